"""Decision rules as membership predicates, parametric transformations of
rules, and Monte Carlo / grid estimates of set distances between rules.

A transformation acts on a rule through the preimage of the query point:
``x in h(G, theta)`` is decided by evaluating the base rule at
``T_theta^{-1}(x)``. A score offset instead adds ``theta`` to the base
decision value. Both constructions used by the simulation settings fall out
of this: ``{theta + beta'x > 0}`` is an offset of ``{beta'x > 0}``, and
``{x'P'QPx > 0}`` is the quadratic rule evaluated at ``P x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .kernel_svm import ShapeError, SvmModel


class UnsupportedTransformError(ValueError):
    pass


class DimensionUnsupportedError(ValueError):
    pass


# Bases -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HalfspaceBase:
    """{x : beta'x + intercept >= 0}."""

    beta: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())

    @property
    def d(self):
        return self.beta.shape[0]

    def decision_values(self, X):
        return X @ self.beta + self.intercept

    def describe(self):
        return f"halfspace(beta={_vec(self.beta)}, intercept={self.intercept!r})"


@dataclass(frozen=True, eq=False)
class QuadraticBase:
    """{x : x'Qx + b'x + c >= 0}; ``b`` and ``c`` default to zero."""

    Q: np.ndarray
    b: Optional[np.ndarray] = None
    c: float = 0.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ShapeError("Q must be square")
        b = np.zeros(Q.shape[0]) if self.b is None else np.asarray(self.b, dtype=float).ravel()
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)

    @property
    def d(self):
        return self.Q.shape[0]

    def decision_values(self, X):
        return np.einsum("ij,jk,ik->i", X, self.Q, X) + X @ self.b + self.c

    def describe(self):
        return f"quadratic(Q={_vec(self.Q.ravel())}, b={_vec(self.b)}, c={self.c!r})"


@dataclass(frozen=True)
class ConstantBase:
    """The whole space (``member=True``) or the empty set; it has no score."""

    member: bool
    dim: int

    @property
    def d(self):
        return self.dim

    def decision_values(self, X):
        raise UnsupportedTransformError("a constant rule has no decision value")

    def membership(self, X):
        return np.full(X.shape[0], bool(self.member))

    def describe(self):
        return f"constant(member={self.member}, d={self.dim})"


@dataclass(frozen=True, eq=False)
class SvmBase:
    model: SvmModel

    @property
    def d(self):
        return self.model.d

    def decision_values(self, X):
        return self.model.decision_values(X)

    def describe(self):
        return f"svm(n_support={self.model.dual_coefficients.size}, sigma={self.model.sigma!r})"


Base = Union[HalfspaceBase, QuadraticBase, ConstantBase, SvmBase]


# Transform families ----------------------------------------------------------

@dataclass(frozen=True)
class ParameterBox:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be non-empty and of equal length")
        if any(not (np.isfinite(a) and np.isfinite(b) and a <= b) for a, b in zip(lo, hi)):
            raise ValueError(f"invalid parameter box {lo} .. {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, radius, p=1):
        return cls((-radius,) * p, (radius,) * p)

    @property
    def dim(self):
        return len(self.lower)

    def clip(self, theta):
        return np.clip(theta, self.lower, self.upper)

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= np.array(self.lower)) and np.all(theta <= np.array(self.upper)))

    @property
    def radius(self):
        return float(np.max(np.maximum(np.abs(self.lower), np.abs(self.upper))))


@dataclass(frozen=True)
class FunctionOffset:
    """Adds theta to the base decision value: {x : f(x) + theta >= 0}."""

    box: ParameterBox = ParameterBox((-5.0,), (5.0,))
    lipschitz_hint: Optional[tuple] = None
    parameter_dim = 1
    moves_points = False

    def preimage(self, X, theta):
        return X

    def offset(self, theta):
        return float(np.atleast_1d(theta)[0])

    def describe(self):
        return "function_offset"


@dataclass(frozen=True, eq=False)
class SpatialTranslation:
    """Translates the set by theta * direction: x is a member iff x - theta * u is.

    ``direction`` is normalised to unit length unless ``normalize=False``;
    a non-unit direction lets theta carry the units of a known score.
    """

    direction: np.ndarray
    box: ParameterBox = ParameterBox((-5.0,), (5.0,))
    normalize: bool = True
    lipschitz_hint: Optional[tuple] = None
    parameter_dim = 1
    moves_points = True

    def __post_init__(self):
        u = np.asarray(self.direction, dtype=float).ravel()
        norm = np.linalg.norm(u)
        if not norm > 0:
            raise ValueError("translation direction must be non-zero")
        if self.normalize:
            u = u / norm
        object.__setattr__(self, "direction", u)

    def preimage(self, X, theta):
        return X - float(np.atleast_1d(theta)[0]) * self.direction

    def offset(self, theta):
        return 0.0

    def describe(self):
        return f"spatial_translation(u={_vec(self.direction)})"


@dataclass(frozen=True)
class CoordinateRotation:
    """Rotation in the (i, j) coordinate plane.

    Membership of x is decided at P(theta) x, where P is the Givens matrix with
    P[i,i] = P[j,j] = cos, P[i,j] = -sin, P[j,i] = sin. The transformed set is
    therefore P(theta)^-1 G.
    """

    i: int = 0
    j: int = 1
    box: ParameterBox = ParameterBox((-np.pi,), (np.pi,))
    lipschitz_hint: Optional[tuple] = None
    parameter_dim = 1
    moves_points = True

    def __post_init__(self):
        if self.i == self.j or min(self.i, self.j) < 0:
            raise ValueError("rotation plane needs two distinct non-negative axes")

    def preimage(self, X, theta):
        t = float(np.atleast_1d(theta)[0])
        c, s = np.cos(t), np.sin(t)
        Y = np.array(X, dtype=float, copy=True)
        xi, xj = X[:, self.i], X[:, self.j]
        Y[:, self.i] = c * xi - s * xj
        Y[:, self.j] = s * xi + c * xj
        return Y

    def offset(self, theta):
        return 0.0

    def describe(self):
        return f"coordinate_rotation(plane=({self.i},{self.j}))"


@dataclass(frozen=True)
class CompositeTransform:
    """Applies its parts in order; theta is the concatenation of their parameters."""

    parts: tuple
    lipschitz_hint: Optional[tuple] = None

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composite transform needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def parameter_dim(self):
        return sum(p.parameter_dim for p in self.parts)

    @property
    def moves_points(self):
        return any(p.moves_points for p in self.parts)

    @property
    def box(self):
        lo, hi = [], []
        for p in self.parts:
            lo.extend(p.box.lower)
            hi.extend(p.box.upper)
        return ParameterBox(tuple(lo), tuple(hi))

    def _split(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        k = 0
        for p in self.parts:
            yield p, theta[k:k + p.parameter_dim]
            k += p.parameter_dim

    def preimage(self, X, theta):
        for p, th in self._split(theta):
            X = p.preimage(X, th)
        return X

    def offset(self, theta):
        return sum(p.offset(th) for p, th in self._split(theta))

    def describe(self):
        return "composite[" + ";".join(p.describe() for p in self.parts) + "]"


TransformFamily = Union[FunctionOffset, SpatialTranslation, CoordinateRotation, CompositeTransform]


# Rules ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecisionRule:
    base: Base
    transforms: tuple = ()

    @property
    def d(self):
        return self.base.d

    def transformed(self, family, theta) -> "DecisionRule":
        theta = np.atleast_1d(np.asarray(theta, dtype=float)).copy()
        if theta.shape[0] != family.parameter_dim:
            raise ShapeError(f"family takes {family.parameter_dim} parameters, got {theta.shape[0]}")
        return DecisionRule(self.base, self.transforms + ((family, theta),))

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.shape[0] == self.d else X.reshape(-1, 1)
        if X.shape[1] != self.d:
            raise ShapeError(f"rule expects {self.d} features, got {X.shape[1]}")
        return X

    def _pull_back(self, X):
        offset = 0.0
        for family, theta in self.transforms:
            X = family.preimage(X, theta)
            offset += family.offset(theta)
        return X, offset

    @property
    def has_score(self):
        return not isinstance(self.base, ConstantBase)

    def decision_values(self, X) -> np.ndarray:
        X = self._check(X)
        Xp, offset = self._pull_back(X)
        return self.base.decision_values(Xp) + offset

    def membership(self, X) -> np.ndarray:
        X = self._check(X)
        if isinstance(self.base, ConstantBase):
            Xp, offset = self._pull_back(X)
            if offset != 0.0:
                raise UnsupportedTransformError("function_offset needs a base with a decision value")
            return self.base.membership(Xp)
        return self.decision_values(X) >= 0

    def contains(self, x) -> bool:
        return bool(self.membership(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def predict(self, X) -> np.ndarray:
        return np.where(self.membership(X), 1.0, -1.0)

    def describe(self) -> str:
        parts = [self.base.describe()]
        for family, theta in self.transforms:
            parts.append(f"{family.describe()}@theta={_vec(theta)}")
        return " | ".join(parts)


def membership(rule: DecisionRule, x) -> bool:
    return rule.contains(x)


def halfspace_rule(beta, intercept=0.0) -> DecisionRule:
    return DecisionRule(HalfspaceBase(beta, intercept))


def quadratic_rule(Q, b=None, c=0.0) -> DecisionRule:
    return DecisionRule(QuadraticBase(Q, b, c))


def svm_rule(model: SvmModel) -> DecisionRule:
    return DecisionRule(SvmBase(model))


def constant_rule(member: bool, d: int) -> DecisionRule:
    return DecisionRule(ConstantBase(member, d))


def interval_rule(a: float, b: float) -> DecisionRule:
    """The closed 1-d interval [a, b] as the quadratic -(x - a)(x - b) >= 0."""
    return quadratic_rule([[-1.0]], [a + b], -a * b)


# Domain and distances ------------------------------------------------------------

@dataclass(frozen=True)
class DomainBox:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("domain box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, d, half_width=3.0):
        return cls((-half_width,) * d, (half_width,) * d)

    @property
    def d(self):
        return len(self.lower)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def sample(self, n, rng):
        return rng.uniform(self.lower, self.upper, size=(n, self.d))

    def grid(self, resolution):
        axes = [np.linspace(a, b, resolution) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        spacing = max((b - a) / (resolution - 1) for a, b in zip(self.lower, self.upper))
        return np.column_stack([m.ravel() for m in mesh]), spacing


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    std_error: float
    n_samples: int

    def __float__(self):
        return self.value


def empirical_symmetric_difference(rule_a, rule_b, domain: DomainBox, n_samples: int, seed: int) -> MonteCarloEstimate:
    """Lebesgue measure of the disagreement region, by uniform sampling of the box."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X = domain.sample(n_samples, np.random.default_rng(seed))
    diff = rule_a.membership(X) != rule_b.membership(X)
    p = diff.mean()
    vol = domain.volume
    se = vol * np.sqrt(p * (1 - p) / n_samples)
    return MonteCarloEstimate(float(vol * p), float(se), n_samples)


def directed_hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    """sup_{a in A} min_{b in B} ||a - b|| over finite point sets."""
    if len(A) == 0:
        return 0.0
    if len(B) == 0:
        return float("inf")
    dist, _ = cKDTree(B).query(A)
    return float(np.max(dist))


def hausdorff_points(A: np.ndarray, B: np.ndarray) -> float:
    if len(A) == 0 and len(B) == 0:
        return 0.0
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


def _require_low_dim(d):
    if d > 3:
        raise DimensionUnsupportedError(f"grid-based set geometry is limited to d <= 3, got d={d}")


def hausdorff_estimate(rule_a, rule_b, domain: DomainBox, grid_resolution: int) -> float:
    """Hausdorff distance between the grid points falling in each rule.

    Biased by at most about one grid spacing.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    _require_low_dim(domain.d)
    G, _ = domain.grid(grid_resolution)
    return hausdorff_points(G[rule_a.membership(G)], G[rule_b.membership(G)])


def boundary_distance(rule: DecisionRule, x, domain: Optional[DomainBox] = None, grid_resolution: int = 201) -> float:
    """Distance from x to the decision boundary of the rule.

    Exact for an untransformed halfspace; otherwise the distance to the nearest
    grid point of the opposite class (d <= 3 only).
    """
    x = np.asarray(x, dtype=float).ravel()
    if isinstance(rule.base, HalfspaceBase) and all(isinstance(f, FunctionOffset) for f, _ in rule.transforms):
        val = float(rule.decision_values(x.reshape(1, -1))[0])
        return abs(val) / float(np.linalg.norm(rule.base.beta))
    if domain is None:
        domain = DomainBox.cube(x.shape[0])
    if domain.d > 3:
        raise UnsupportedTransformError("grid boundary distance needs d <= 3 or an analytic halfspace")
    G, _ = domain.grid(grid_resolution)
    inside = rule.contains(x)
    other = G[rule.membership(G) != inside]
    if len(other) == 0:
        return float("inf")
    return float(cKDTree(other).query(x)[0])


def halfspace_distances(beta, intercept, X) -> np.ndarray:
    """Vectorised |beta'x + c| / ||beta||."""
    beta = np.asarray(beta, dtype=float)
    return np.abs(np.asarray(X) @ beta + intercept) / np.linalg.norm(beta)


def _vec(v) -> str:
    return "[" + ",".join(repr(float(t)) for t in np.atleast_1d(v)) + "]"
