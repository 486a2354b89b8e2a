"""Weighted hinge-loss SVM without offset, Gaussian RBF kernel.

Solves

    min_f  lam * ||f||_H^2 + (1/n) * sum_i w_i * (1 - y_i f(x_i))_+

through its box-constrained dual

    max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j k(x_i, x_j),   0 <= a_i <= w_i / (2 lam n)

by cyclic coordinate ascent. Without an offset there is no equality
constraint, so every coordinate step is an exact clipped Newton step
(k(x, x) = 1 for the RBF kernel).

The kernel is k(x, x') = exp(-sigma^2 ||x - x'||^2); note sigma multiplies
the squared distance, it is not a width.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np
from scipy.spatial.distance import cdist

from .dataset_io import Dataset

GRAM_CACHE_LIMIT = 4000


class DegenerateWeightsError(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class SvmConfig:
    """Regularisation ``lam`` and bandwidth ``sigma``; None means the default
    for the training set (sigma = d^-1/2, lam = 1/(2n))."""

    lam: Optional[float] = None
    sigma: Optional[float] = None
    tolerance: float = 1e-6
    max_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def resolve(self, n: int, d: int) -> "SvmConfig":
        lam = self.lam if self.lam is not None else 1.0 / (2.0 * n)
        sigma = self.sigma if self.sigma is not None else d ** -0.5
        return replace(self, lam=lam, sigma=sigma)


@dataclass(frozen=True, eq=False)
class SvmDiagnostics:
    iterations: int
    kkt_violation: float
    objective: float
    dual_objective: float
    converged: bool
    alpha: np.ndarray = field(repr=False)
    upper_bounds: np.ndarray = field(repr=False)
    primal_history: np.ndarray = field(repr=False)
    dual_history: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_points: np.ndarray
    dual_coefficients: np.ndarray
    sigma: float
    lam: float = float("nan")
    diagnostics: Optional[SvmDiagnostics] = None

    @property
    def d(self) -> int:
        return self.support_points.shape[1]

    def decision_values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise ShapeError(f"model expects {self.d} features, got {X.shape[1]}")
        if self.dual_coefficients.size == 0:
            return np.zeros(X.shape[0])
        K = np.exp(-(self.sigma ** 2) * cdist(X, self.support_points, "sqeuclidean"))
        return K @ self.dual_coefficients

    def decision_value(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.d:
            raise ShapeError(f"model expects {self.d} features, got {x.shape[0]}")
        return float(self.decision_values(x.reshape(1, -1))[0])

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_values(X) >= 0, 1.0, -1.0)


def rbf_kernel(x, x_prime, sigma: float) -> float:
    diff = np.asarray(x, dtype=float) - np.asarray(x_prime, dtype=float)
    return math.exp(-(sigma ** 2) * float(diff @ diff))


def rbf_gram(X, Z, sigma: float) -> np.ndarray:
    return np.exp(-(sigma ** 2) * cdist(np.asarray(X, float), np.asarray(Z, float), "sqeuclidean"))


def decision_value(model: SvmModel, x) -> float:
    return model.decision_value(x)


def predict(model: SvmModel, x) -> float:
    """+1 iff the decision value is >= 0 (the closed acceptance set)."""
    return 1.0 if model.decision_value(x) >= 0 else -1.0


@numba.njit(cache=True)
def _kernel_column(X, i, s2, out):
    n, d = X.shape
    for j in range(n):
        acc = 0.0
        for k in range(d):
            t = X[i, k] - X[j, k]
            acc += t * t
        out[j] = math.exp(-s2 * acc)


@numba.njit(cache=True)
def _cd_epochs(K, X, s2, y, C, alpha, f, lam_scale, tol, n_epochs, seed, use_gram, primal_out, dual_out, pos):
    """Cyclic coordinate ascent sweeps, updating alpha and f in place.

    Writes per-epoch primal/dual objectives from index ``pos`` on; returns the
    number of sweeps done and the final max KKT violation.
    """
    # lam_scale = 2 * lam maps the standard dual value to the scale of the primal objective
    n = y.shape[0]
    col = np.empty(n)
    np.random.seed(seed)
    done = 0
    viol = np.inf
    for ep in range(n_epochs):
        order = np.random.permutation(n)
        for ii in range(n):
            i = order[ii]
            ci = C[i]
            if ci <= 0.0:
                continue
            a_new = alpha[i] + 1.0 - y[i] * f[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > ci:
                a_new = ci
            delta = a_new - alpha[i]
            if delta == 0.0:
                continue
            alpha[i] = a_new
            step = delta * y[i]
            if use_gram:
                for j in range(n):
                    f[j] += step * K[i, j]
            else:
                _kernel_column(X, i, s2, col)
                for j in range(n):
                    f[j] += step * col[j]
        viol, primal, dual = _objectives(y, C, alpha, f, lam_scale)
        primal_out[pos + ep] = primal
        dual_out[pos + ep] = dual
        done = ep + 1
        if viol <= tol:
            break
    return done, viol


@numba.njit(cache=True)
def _objectives(y, C, alpha, f, lam_scale):
    n = y.shape[0]
    viol = 0.0
    sum_a = 0.0
    norm2 = 0.0
    hinge = 0.0
    for i in range(n):
        g = 1.0 - y[i] * f[i]
        sum_a += alpha[i]
        norm2 += alpha[i] * y[i] * f[i]
        if g > 0.0:
            hinge += C[i] * g
        if C[i] <= 0.0:
            v = 0.0
        elif alpha[i] <= 0.0:
            v = g if g > 0.0 else 0.0
        elif alpha[i] >= C[i]:
            v = -g if g < 0.0 else 0.0
        else:
            v = abs(g)
        if v > viol:
            viol = v
    # primal = lam ||f||^2 + (1/n) sum w (1 - y f)_+ = lam_scale * (||f||^2 / 2 + sum C hinge)
    return viol, lam_scale * (0.5 * norm2 + hinge), lam_scale * (sum_a - 0.5 * norm2)


def _free_set_newton(K_cols, y, C, alpha, f, rounds=20):
    """Active-set Newton steps on the free dual variables.

    Solves for the point where the gradient vanishes on the free set, moves
    toward it as far as the box allows, drops variables that hit a bound and
    repeats. The dual is a concave quadratic and every step stays on the
    segment toward the restricted maximiser, so the dual value never drops.
    ``K_cols(idx)`` returns the kernel columns for the training indices idx.
    """
    free = np.flatnonzero((alpha > 0) & (alpha < C))
    for _ in range(rounds):
        if free.size == 0:
            return
        g = 1.0 - y[free] * f[free]
        Kf = K_cols(free)
        Q = Kf[free] * np.outer(y[free], y[free])
        Q[np.diag_indices_from(Q)] += 1e-12
        try:
            step = np.linalg.solve(Q, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Q, g, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return
        a = alpha[free]
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(step > 0, (C[free] - a) / step, np.where(step < 0, -a / step, np.inf))
        t = min(1.0, float(np.min(room)))
        if t <= 0:
            return
        new = np.clip(a + t * step, 0.0, C[free])
        delta = new - a
        alpha[free] = new
        f += Kf @ (delta * y[free])
        if t >= 1.0:
            return
        free = free[(new > 0) & (new < C[free])]


def _solve_dual(X, y, C, sigma, lam, tol, max_epochs, seed):
    n = y.shape[0]
    s2 = sigma ** 2
    use_gram = n <= GRAM_CACHE_LIMIT
    if use_gram:
        K = rbf_gram(X, X, sigma)
        K_cols = lambda idx: K[idx].T  # symmetric; row slices are contiguous
    else:
        K = np.zeros((1, 1))
        K_cols = lambda idx: rbf_gram(X, X[idx], sigma)
    alpha = np.zeros(n)
    f = np.zeros(n)
    primal = np.empty(max_epochs)
    dual = np.empty(max_epochs)
    pos, chunk, viol, call = 0, 10, np.inf, 0
    while pos < max_epochs:
        done, viol = _cd_epochs(K, X, s2, y, C, alpha, f, 2.0 * lam, tol, min(chunk, max_epochs - pos),
                                seed + call, use_gram, primal, dual, pos)
        pos += done
        call += 1
        if viol <= tol or pos >= max_epochs:
            break
        _free_set_newton(K_cols, y, C, alpha, f)
    return alpha, pos, float(viol), primal[:pos].copy(), dual[:pos].copy()


def train_weighted_svm(data: Dataset, config: SvmConfig = SvmConfig()) -> SvmModel:
    """Fit the weighted no-offset RBF SVM; weights scale the hinge terms."""
    cfg = config.resolve(data.n, data.d)
    X = np.ascontiguousarray(data.features, dtype=float)
    y = np.ascontiguousarray(data.labels, dtype=float)
    w = data.sample_weights
    if not w.sum() > 0:
        raise DegenerateWeightsError("total sample weight is zero")
    n = data.n
    C = np.ascontiguousarray(w / (2.0 * cfg.lam * n), dtype=float)
    alpha, epochs, viol, ph, dh = _solve_dual(X, y, C, cfg.sigma, cfg.lam, cfg.tolerance,
                                              cfg.max_iterations, cfg.seed)
    diag = SvmDiagnostics(
        iterations=int(epochs),
        kkt_violation=viol,
        objective=float(ph[-1]),
        dual_objective=float(dh[-1]),
        converged=bool(viol <= cfg.tolerance),
        alpha=alpha,
        upper_bounds=C,
        primal_history=ph,
        dual_history=dh,
    )
    sv = alpha > 0
    return SvmModel(
        support_points=X[sv].copy(),
        dual_coefficients=(alpha * y)[sv],
        sigma=float(cfg.sigma),
        lam=float(cfg.lam),
        diagnostics=diag,
    )


def dump_model(model: SvmModel) -> str:
    """Text dump: one '#' header line with sigma, lambda and diagnostics, then CSV rows."""
    buf = io.StringIO()
    dg = model.diagnostics
    head = f"# sigma={model.sigma!r} lambda={model.lam!r}"
    if dg is not None:
        head += (
            f" iterations={dg.iterations} kkt_violation={dg.kkt_violation!r}"
            f" objective={dg.objective!r} converged={int(dg.converged)}"
        )
    buf.write(head + "\n")
    buf.write(",".join(["coef"] + [f"s{j + 1}" for j in range(model.d)]) + "\n")
    for c, s in zip(model.dual_coefficients, model.support_points):
        buf.write(",".join([repr(float(c))] + [repr(float(v)) for v in s]) + "\n")
    return buf.getvalue()


def load_model(text: str) -> SvmModel:
    lines = text.strip("\n").split("\n")
    meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
    d = len(lines[1].split(",")) - 1
    rows = [list(map(float, ln.split(","))) for ln in lines[2:] if ln]
    arr = np.array(rows, dtype=float).reshape(-1, d + 1)
    return SvmModel(
        support_points=arr[:, 1:].copy(),
        dual_coefficients=arr[:, 0].copy(),
        sigma=float(meta["sigma"]),
        lam=float(meta["lambda"]),
    )


def cross_validate(data: Dataset, config: SvmConfig, folds: int = 5, seed: int = 0) -> float:
    """Weighted k-fold misclassification rate of ``config`` on ``data``."""
    if folds < 2 or folds > data.n:
        raise ValueError("need 2 <= folds <= n")
    perm = np.random.default_rng(seed).permutation(data.n)
    parts = np.array_split(perm, folds)
    w = data.sample_weights
    wrong = 0.0
    for k in range(folds):
        test = parts[k]
        train = np.concatenate([parts[j] for j in range(folds) if j != k])
        model = train_weighted_svm(data.subset(train), config)
        wrong += float(np.sum(w[test] * (model.predict(data.features[test]) != data.labels[test])))
    return wrong / float(np.sum(w))


def select_svm_config(data: Dataset, sigmas, costs, folds: int = 5, seed: int = 0, base: SvmConfig = SvmConfig()):
    """Grid search over (sigma, cost) by cross-validation.

    ``cost`` is the per-sample box bound for unit weights, i.e. lam = 1 / (2 n cost)
    with n the size of the training fold. Returns the best config (lam set for
    the full data size) and a list of (sigma, cost, cv_error) rows.
    """
    n_fold = data.n - data.n // folds
    table = []
    best = None
    for sigma in sigmas:
        for cost in costs:
            cfg = replace(base, sigma=float(sigma), lam=1.0 / (2.0 * n_fold * cost))
            err = cross_validate(data, cfg, folds, seed)
            table.append((float(sigma), float(cost), err))
            if best is None or err < best[0]:
                best = (err, sigma, cost)
    _, sigma, cost = best
    return replace(base, sigma=float(sigma), lam=1.0 / (2.0 * data.n * cost)), table
