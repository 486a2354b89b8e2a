"""Weighted 0-1 empirical risk and its minimisation over a transform parameter.

The 0-1 objective is piecewise constant in theta, so a single Nelder-Mead run
stalls on whatever plateau it starts on. ``calibrate`` runs Nelder-Mead from
theta = 0 plus a Latin hypercube of starts and keeps the best end point,
breaking ties toward the smallest ||theta||.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.stats import qmc

from .dataset_io import Dataset
from .rules import DecisionRule, ParameterBox


def weighted_zero_one_risk(rule: DecisionRule, data: Dataset) -> float:
    """(1/n) sum_i w_i * I(y_i != prediction_i)."""
    wrong = rule.predict(data.features) != data.labels
    return float(np.sum(data.sample_weights * wrong) / data.n)


def zero_one_risk_from_scores(scores, data: Dataset) -> float:
    pred = np.where(scores >= 0, 1.0, -1.0)
    return float(np.sum(data.sample_weights * (pred != data.labels)) / data.n)


@dataclass(frozen=True)
class ErmConfig:
    n_starts: Optional[int] = None  # None: max(20, 10 p)
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    simplex_tolerance: float = 1e-4
    max_evals: int = 400
    initial_step: float = 0.1  # fraction of the box width per coordinate
    seed: int = 0
    threshold_starts: bool = True  # p = 1 offset families: also start inside every risk plateau

    def __post_init__(self):
        if self.n_starts is not None and self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        for name in ("reflection", "expansion", "contraction", "shrink", "simplex_tolerance", "initial_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def starts_for(self, p: int) -> int:
        return self.n_starts if self.n_starts is not None else max(20, 10 * p)


class NelderMeadResult(NamedTuple):
    x: np.ndarray
    fun: float
    n_evals: int
    best_history: list


def nelder_mead(objective: Callable, start, box: ParameterBox, config: ErmConfig = ErmConfig()) -> NelderMeadResult:
    """Nelder-Mead with every trial point clipped into ``box``.

    Stops when the largest vertex distance from the best vertex falls below
    ``config.simplex_tolerance`` or after ``config.max_evals`` evaluations.
    """
    x0 = box.clip(np.atleast_1d(np.asarray(start, dtype=float)))
    p = x0.shape[0]
    lo, hi = np.array(box.lower), np.array(box.upper)
    width = np.where(hi > lo, hi - lo, 1.0)
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(objective(x))

    simplex = [x0]
    for k in range(p):
        v = x0.copy()
        step = config.initial_step * width[k]
        v[k] = v[k] + step if v[k] + step <= hi[k] else v[k] - step
        simplex.append(box.clip(v))
    values = [f(v) for v in simplex]
    history = []

    rho, chi, gam, sig = config.reflection, config.expansion, config.contraction, config.shrink
    while True:
        # stable sort keeps the earlier vertex on ties, so a flat objective returns the start
        order = sorted(range(p + 1), key=lambda i: values[i])
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        history.append(values[0])
        diam = max(float(np.linalg.norm(v - simplex[0])) for v in simplex[1:])
        if diam < config.simplex_tolerance or evals >= config.max_evals:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = box.clip(centroid + rho * (centroid - worst))
        fr = f(xr)
        if fr < values[0]:
            xe = box.clip(centroid + chi * (xr - centroid))
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = box.clip(centroid + gam * (xr - centroid))
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = box.clip(centroid + gam * (worst - centroid))
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        best = simplex[0]
        for k in range(1, p + 1):
            simplex[k] = box.clip(best + sig * (simplex[k] - best))
            values[k] = f(simplex[k])
    return NelderMeadResult(simplex[0].copy(), values[0], evals, history)


@dataclass(frozen=True, eq=False)
class StartRecord:
    start: np.ndarray
    final: np.ndarray
    risk: float
    n_evals: int


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    theta_hat: np.ndarray
    achieved_risk: float
    rule: DecisionRule
    risk_at_zero: float
    starts_log: list = field(repr=False)
    degenerate: bool = False

    def starts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        p = self.theta_hat.shape[0]
        w.writerow([f"start{k + 1}" for k in range(p)] + [f"final{k + 1}" for k in range(p)] + ["risk", "n_evals"])
        for rec in self.starts_log:
            w.writerow([repr(float(v)) for v in rec.start] + [repr(float(v)) for v in rec.final]
                       + [repr(rec.risk), rec.n_evals])
        return buf.getvalue()


def _tie_key(risk, theta):
    return (risk, float(np.linalg.norm(theta)), tuple(float(v) for v in theta))


def make_objective(base: DecisionRule, family, data: Dataset) -> Callable:
    """theta -> weighted 0-1 risk of h(base, theta) on data."""
    if not family.moves_points:
        scores = base.decision_values(data.features)
        return lambda theta: zero_one_risk_from_scores(scores + family.offset(theta), data)
    return lambda theta: weighted_zero_one_risk(base.transformed(family, theta), data)


def _plateau_midpoints(base: DecisionRule, family, data: Dataset, lo: float, hi: float) -> list:
    """One point inside each interval of theta on which the offset risk is constant.

    For a score-only family the prediction of point i flips where offset(theta) = -s_i,
    so the breakpoints are known and a start in each piece makes the search exhaustive.
    """
    slope = family.offset(np.ones(1)) - family.offset(np.zeros(1))
    if slope == 0:
        return []
    shift = family.offset(np.zeros(1))
    all_cuts = (-base.decision_values(data.features) - shift) / slope
    cuts = np.unique(all_cuts[(all_cuts > lo) & (all_cuts < hi)])
    edges = np.r_[lo, cuts, hi]
    mids = list(0.5 * (edges[:-1] + edges[1:]))
    if np.any(all_cuts == hi):  # the single point theta = hi is its own piece
        mids.append(hi)
    return [np.array([m]) for m in mids]


def calibrate(base: DecisionRule, family, data: Dataset, config: ErmConfig = ErmConfig()) -> CalibrationResult:
    """Fit theta by multi-start Nelder-Mead on the weighted empirical 0-1 risk."""
    if data.n < 1:
        raise ValueError("calibration data is empty")
    box = family.box
    p = family.parameter_dim
    objective = make_objective(base, family, data)
    degenerate = bool(np.all(data.labels == data.labels[0]))
    if degenerate:
        warnings.warn("all calibration labels are identical; the risk landscape is flat", RuntimeWarning)

    lo, hi = np.array(box.lower), np.array(box.upper)
    n_lhs = config.starts_for(p)
    lhs = qmc.LatinHypercube(d=p, seed=config.seed).random(n_lhs)
    starts = [box.clip(np.zeros(p))] + [lo + u * (hi - lo) for u in lhs]
    if config.threshold_starts and p == 1 and not family.moves_points:
        starts += _plateau_midpoints(base, family, data, lo[0], hi[0])

    log = []
    best = None
    for s in starts:
        res = nelder_mead(objective, s, box, config)
        log.append(StartRecord(s, res.x, res.fun, res.n_evals))
        key = _tie_key(res.fun, res.x)
        if best is None or key < best[0]:
            best = (key, res.x)
    theta_hat = best[1]
    zero = box.clip(np.zeros(p))
    risk_zero = weighted_zero_one_risk(base.transformed(family, zero), data)
    rule = base.transformed(family, theta_hat)
    achieved = weighted_zero_one_risk(rule, data)
    return CalibrationResult(theta_hat, achieved, rule, risk_zero, log, degenerate)
