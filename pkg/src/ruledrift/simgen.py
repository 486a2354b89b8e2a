"""Synthetic source/target data with known Bayes rules.

Covariates are uniform on [-3, 3]^d. A boundary score s(x) (linear beta'x or
quadratic x'Qx) is shifted for the target by a translation (s + theta) or a
rotation (s(P x), P a Givens rotation in the first coordinate plane). The
regression family maps the score to eta(x) = P(Y = +1 | x).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .dataset_io import Dataset
from .rules import (
    CoordinateRotation,
    DecisionRule,
    FunctionOffset,
    HalfspaceBase,
    ParameterBox,
    halfspace_distances,
    halfspace_rule,
    quadratic_rule,
)

BOUNDARIES = ("linear", "quadratic")
TRANSFORMS = ("translation", "rotation", "noisy_translation")
REGRESSIONS = ("deterministic", "linear", "logistic", "truncate", "truncatelogit")
HALF_WIDTH = 3.0


def default_beta(d: int) -> np.ndarray:
    return np.r_[3.0, np.ones(d - 1)]


def default_q(d: int) -> np.ndarray:
    if d < 3:
        raise ValueError(f"the quadratic boundary needs d >= 3, got d={d}")
    Q = np.zeros((d, d))
    Q[0, 0] = 0.3
    Q[1, 2] = Q[2, 1] = 0.5
    return Q


def rotation_matrix(theta: float, d: int) -> np.ndarray:
    P = np.eye(d)
    c, s = math.cos(theta), math.sin(theta)
    P[0, 0], P[0, 1], P[1, 0], P[1, 1] = c, -s, s, c
    return P


@dataclass(frozen=True)
class SimSetting:
    boundary: str = "linear"
    transform: str = "translation"
    regression: str = "deterministic"
    d: int = 5
    n: int = 2000
    role: str = "source"
    theta: float = 0.0
    noise_sd: float = 0.5
    seed: int = 0
    beta: Optional[tuple] = None

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.regression not in REGRESSIONS:
            raise ValueError(f"unknown regression {self.regression!r}")
        if self.role not in ("source", "target"):
            raise ValueError(f"role must be source or target, got {self.role!r}")
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        if self.boundary == "quadratic" and self.d < 3:
            raise ValueError(f"the quadratic boundary needs d >= 3, got d={self.d}")
        if self.transform == "rotation" and self.d < 2:
            raise ValueError("rotation needs d >= 2")

    @property
    def tag(self) -> str:
        return f"{self.boundary}_{self.transform}_{self.regression}"

    @property
    def beta_vector(self) -> np.ndarray:
        return default_beta(self.d) if self.beta is None else np.asarray(self.beta, dtype=float)

    @property
    def score_scale(self) -> float:
        """sup of |score| over the source box, the normaliser C."""
        if self.boundary == "linear":
            return HALF_WIDTH * float(np.sum(np.abs(self.beta_vector)))
        return HALF_WIDTH ** 2 * float(np.sum(np.abs(default_q(self.d))))

    @property
    def shift(self) -> float:
        return self.theta if self.role == "target" else 0.0

    def source_score(self, X) -> np.ndarray:
        if self.boundary == "linear":
            return X @ self.beta_vector
        Q = default_q(self.d)
        return np.einsum("ij,jk,ik->i", X, Q, X)

    def score(self, X) -> np.ndarray:
        """Noise-free score of this role's Bayes boundary."""
        t = self.shift
        if self.transform == "rotation":
            return self.source_score(X @ rotation_matrix(t, self.d).T)
        return self.source_score(X) + t

    def bayes_rule(self) -> DecisionRule:
        base = halfspace_rule(self.beta_vector) if self.boundary == "linear" else quadratic_rule(default_q(self.d))
        t = self.shift
        if self.transform == "rotation":
            return base.transformed(CoordinateRotation(0, 1), [t])
        return base.transformed(FunctionOffset(ParameterBox.symmetric(max(10.0, abs(t)))), [t])

    def eta_from_score(self, s) -> np.ndarray:
        C = self.score_scale
        reg = self.regression
        s = np.asarray(s, dtype=float)
        if reg == "deterministic":
            return (s > 0).astype(float)
        if reg == "linear":
            return np.clip(0.5 + s / (2 * C), 0.0, 1.0)
        if reg == "logistic":
            return expit(s)
        if reg == "truncate":
            return np.clip(0.5 + np.sign(s) * np.maximum(np.abs(s) / (2 * C), 0.1), 0.0, 1.0)
        return np.clip(0.5 + np.sign(s) * np.maximum(np.abs(expit(s) - 0.5), 0.1), 0.0, 1.0)

    def eta(self, X) -> np.ndarray:
        s = self.score(X)
        if self.transform != "noisy_translation" or self.role == "source" or self.noise_sd == 0:
            return self.eta_from_score(s)
        noisy = self.source_score(X) > 0
        out = self.eta_from_score(s)
        if not noisy.any():
            return out
        sn = s[noisy]
        if self.regression == "deterministic":
            out[noisy] = norm.cdf(sn / self.noise_sd)
        else:
            # E_eps[eta(s - eps)], eps ~ N(0, sd^2), by Gauss-Hermite quadrature
            nodes, weights = np.polynomial.hermite_e.hermegauss(40)
            vals = self.eta_from_score(sn[:, None] - self.noise_sd * nodes[None, :])
            out[noisy] = vals @ weights / math.sqrt(2 * math.pi)
        return out


@dataclass(frozen=True, eq=False)
class GeneratedData:
    dataset: Dataset
    bayes_rule: DecisionRule
    eta_oracle: Callable = field(repr=False)
    sample_x: Callable = field(repr=False)

    def bayes_risk(self, n_mc: int = 200_000, seed: int = 0) -> tuple[float, float]:
        """Monte Carlo E[min(eta, 1 - eta)] and its standard error."""
        X = self.sample_x(n_mc, np.random.default_rng(seed))
        eta = self.eta_oracle(X)
        v = np.minimum(eta, 1 - eta)
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n_mc))


def _uniform_box(d):
    return lambda n, rng: rng.uniform(-HALF_WIDTH, HALF_WIDTH, size=(n, d))


def generate(setting: SimSetting) -> GeneratedData:
    rng = np.random.default_rng(setting.seed)
    X = rng.uniform(-HALF_WIDTH, HALF_WIDTH, size=(setting.n, setting.d))
    u = rng.uniform(size=setting.n)
    if setting.transform == "noisy_translation" and setting.role == "target" and setting.noise_sd > 0:
        eps = rng.normal(0.0, setting.noise_sd, size=setting.n) * (setting.source_score(X) > 0)
        eta = setting.eta_from_score(setting.score(X) - eps)
    else:
        eta = setting.eta(X)
    y = np.where(u < eta, 1.0, -1.0)
    return GeneratedData(Dataset(X, y), setting.bayes_rule(), setting.eta, _uniform_box(setting.d))


def generate_pair(template: SimSetting, n_source: int, n_target: int, source_seed: int, target_seed: int):
    src = generate(replace(template, role="source", n=n_source, seed=source_seed))
    tgt = generate(replace(template, role="target", n=n_target, seed=target_seed))
    return src, tgt


# Example with tunable margin / noise exponents ---------------------------------------------

def sample_unit_ball(n: int, d: int, rng) -> np.ndarray:
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(size=(n, 1)) ** (1.0 / d)
    return g * r


def example1_eta(X, beta, t_exponent) -> np.ndarray:
    s = np.asarray(X) @ beta
    return 0.5 + 0.5 * np.sign(s) * np.abs(s) ** t_exponent


def example1_sampler(t_exponent: float, d: int, n: int, seed: int, beta=None) -> GeneratedData:
    """X uniform on the unit ball, eta = 1/2 + 1/2 sign(x'beta) |x'beta|^t."""
    if not t_exponent > 0:
        raise ValueError("t_exponent must be positive")
    beta = np.eye(d)[0] if beta is None else np.asarray(beta, dtype=float)
    if not math.isclose(np.linalg.norm(beta), 1.0, rel_tol=1e-9):
        raise ValueError("beta must have unit norm")
    rng = np.random.default_rng(seed)
    X = sample_unit_ball(n, d, rng)
    eta_fn = lambda Z: example1_eta(Z, beta, t_exponent)
    y = np.where(rng.uniform(size=n) < eta_fn(X), 1.0, -1.0)
    return GeneratedData(Dataset(X, y), halfspace_rule(beta), eta_fn, lambda m, r: sample_unit_ball(m, d, r))


# Exponent estimation ---------------------------------------------------------------------------

DEFAULT_T_GRID = (0.05, 0.1, 0.2, 0.4)


@dataclass(frozen=True, eq=False)
class ExponentFit:
    slope: float
    t_grid: np.ndarray
    estimates: np.ndarray
    used: np.ndarray

    def rows(self):
        return [(float(t), float(e)) for t, e in zip(self.t_grid, self.estimates)]


def _loglog_slope(t_grid, est, what) -> ExponentFit:
    t_grid = np.asarray(t_grid, dtype=float)
    used = est > 0
    if not used.all():
        warnings.warn(f"{what}: dropping {int((~used).sum())} empty grid cells", RuntimeWarning)
    if used.sum() < 2:
        return ExponentFit(math.inf, t_grid, est, used)
    slope = np.polyfit(np.log(t_grid[used]), np.log(est[used]), 1)[0]
    return ExponentFit(float(slope), t_grid, est, used)


def _check_grid(t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 4 or np.any(t_grid <= 0) or np.any(t_grid > 1):
        raise ValueError("t_grid needs >= 4 thresholds in (0, 1]")
    return t_grid


def estimate_margin_exponent(gen: GeneratedData, t_grid=DEFAULT_T_GRID, n_mc: int = 1_000_000,
                             seed: int = 0) -> ExponentFit:
    """Slope of log P(|2 eta - 1| <= t) against log t."""
    t_grid = _check_grid(t_grid)
    X = gen.sample_x(n_mc, np.random.default_rng(seed))
    m = np.abs(2 * gen.eta_oracle(X) - 1)
    est = np.array([np.mean(m <= t) for t in t_grid])
    return _loglog_slope(t_grid, est, "margin exponent")


def estimate_noise_exponent(gen: GeneratedData, t_grid=DEFAULT_T_GRID, n_mc: int = 1_000_000,
                            seed: int = 0) -> ExponentFit:
    """Slope of log E[|2 eta - 1| I(tau(X) <= t)] against log t, tau the distance to the Bayes boundary."""
    t_grid = _check_grid(t_grid)
    rule = gen.bayes_rule
    if not isinstance(rule.base, HalfspaceBase) or any(not isinstance(f, FunctionOffset) for f, _ in rule.transforms):
        raise ValueError("noise exponent needs an analytic halfspace Bayes rule")
    offset = sum(f.offset(th) for f, th in rule.transforms)
    X = gen.sample_x(n_mc, np.random.default_rng(seed))
    tau = halfspace_distances(rule.base.beta, rule.base.intercept + offset, X)
    m = np.abs(2 * gen.eta_oracle(X) - 1)
    est = np.array([np.mean(m * (tau <= t)) for t in t_grid])
    return _loglog_slope(t_grid, est, "noise exponent")
