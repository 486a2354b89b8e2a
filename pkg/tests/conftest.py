import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pg_dual_oracle(K, y, C, iters=200_000, tol=1e-10):
    """Accelerated projected gradient ascent on the box-constrained no-offset dual.

    Independent of the package solver: plain numpy, full-gradient steps with
    step 1/L and FISTA momentum, stopped on the projected-gradient norm.
    """
    Q = (y[:, None] * y[None, :]) * K
    L = np.linalg.eigvalsh(Q)[-1]
    a = np.zeros_like(y)
    z = a.copy()
    t = 1.0
    for _ in range(iters):
        g = 1.0 - Q @ z
        a_new = np.clip(z + g / L, 0.0, C)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = a_new + ((t - 1) / t_new) * (a_new - a)
        if np.max(np.abs(a_new - a)) < tol:
            a = a_new
            break
        a, t = a_new, t_new
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_force_offset_risk(scores, labels, weights, lo, hi):
    """Exact min over theta in [lo, hi] of the weighted 0-1 risk of {s + theta >= 0}.

    The risk is constant on [b_k, b_{k+1}) between consecutive breakpoints
    b = -s, so evaluating at lo and at every breakpoint inside the box is exhaustive.
    """
    cands = np.r_[lo, -scores[(-scores >= lo) & (-scores <= hi)]]
    n = len(labels)
    best = np.inf
    for t in cands:
        pred = np.where(scores + t >= 0, 1.0, -1.0)
        best = min(best, float(np.sum(weights * (pred != labels)) / n))
    return best


def itr_design(n, d, theta, seed, noise=1.0):
    """Randomized trial (pi = 1/2) whose treatment effect has the sign of beta'x + theta.

    R = 1 + T (beta'x + theta) / C + N(0, noise^2), beta = (3, 1, ..., 1), C = 3 sum|beta|.
    Returns (ItrDataset, oracle value E[R(g*)]) with the oracle in closed form by
    Monte Carlo over X only, which is exact up to 1e-3 with 10^6 draws.
    """
    from ruledrift.dataset_io import ItrDataset

    beta = np.r_[3.0, np.ones(d - 1)]
    C = 3 * np.abs(beta).sum()
    r = np.random.default_rng(seed)
    X = r.uniform(-3, 3, size=(n, d))
    T = np.where(r.uniform(size=n) < 0.5, 1.0, -1.0)
    R = 1 + T * (X @ beta + theta) / C + noise * r.standard_normal(n)
    Z = np.random.default_rng(seed + 1).uniform(-3, 3, size=(1_000_000, d))
    oracle = float(np.mean(1 + np.abs(Z @ beta + theta) / C))
    return ItrDataset(X, T, R, np.full(n, 0.5)), oracle


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
