"""Individualized treatment rules as weighted classification.

A rule G assigns treatment +1 on G and -1 off it. Maximising the IPW value
(1/n) sum R_i I(T_i = g(X_i)) / pi_i(T_i) is the same as minimising the
weighted 0-1 risk with weight W_i = R_i / pi_i(T_i) and label T_i.

Negative rewards give negative weights. Since
    W I(T != g) = |W| I(T sign(W) != g) + min(W, 0)      for g in {-1, +1},
a negative weight is replaced by its magnitude with the label flipped, and the
objective only moves by a constant. The SVM and the calibration step never
see a negative weight.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dataset_io import Dataset, ItrDataset
from .pipeline import TransferConfig, TransferFit, fit_transfer_classifier
from .rules import DecisionRule

PROPENSITY_CLAMP = 1e-6


class OverlapError(ValueError):
    pass


def itr_weight(treatment, reward, propensity):
    """R / (T pi + (1 - T)/2): R/pi for treated, R/(1 - pi) for controls. Vectorised."""
    t = np.asarray(treatment, dtype=float)
    pi = np.asarray(propensity, dtype=float)
    if np.any(~((pi > 0) & (pi < 1))):
        raise OverlapError("propensity outside (0, 1) violates strict overlap")
    out = np.asarray(reward, dtype=float) / (t * pi + (1 - t) / 2)
    return float(out) if out.ndim == 0 else out


def check_overlap(propensities, c0: float) -> None:
    pi = np.asarray(propensities, dtype=float)
    bad = np.flatnonzero((pi < c0) | (pi > 1 - c0))
    if bad.size:
        shown = ", ".join(f"row {i}: {pi[i]:.6g}" for i in bad[:10])
        more = f" (+{bad.size - 10} more)" if bad.size > 10 else ""
        raise OverlapError(f"propensities outside [{c0}, {1 - c0}]: {shown}{more}")


@dataclass(frozen=True, eq=False)
class ItrWeighting:
    weights: np.ndarray
    labels: np.ndarray
    constants: np.ndarray
    raw_weights: np.ndarray

    def as_dataset(self, features) -> Dataset:
        return Dataset(features, self.labels, self.weights)


def make_weighting(data: ItrDataset) -> ItrWeighting:
    if data.propensities is None:
        raise ValueError("propensities are required; fit them first")
    raw = np.asarray(itr_weight(data.treatments, data.rewards, data.propensities), dtype=float).reshape(-1)
    sign = np.where(raw >= 0, 1.0, -1.0)
    return ItrWeighting(
        weights=np.abs(raw),
        labels=data.treatments * sign,
        constants=np.minimum(raw, 0.0),
        raw_weights=raw,
    )


def raw_weighted_risk(rule: DecisionRule, data: ItrDataset) -> float:
    """(1/n) sum W_i I(T_i != g(X_i)) with the signed IPW weights."""
    w = np.asarray(itr_weight(data.treatments, data.rewards, data.propensities)).reshape(-1)
    return float(np.sum(w * (rule.predict(data.features) != data.treatments)) / data.n)


def estimate_value(rule: DecisionRule, data: ItrDataset) -> float:
    """IPW estimate of E[R(g(X))]."""
    if data.propensities is None:
        raise ValueError("propensities are required")
    w = np.asarray(itr_weight(data.treatments, data.rewards, data.propensities)).reshape(-1)
    follow = rule.predict(data.features) == data.treatments
    return float(np.sum(w * follow) / data.n)


# Propensity model -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PropensityModel:
    coefficients: np.ndarray  # intercept first
    iterations: int
    converged: bool
    ridge: float

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        eta = self.coefficients[0] + X @ self.coefficients[1:]
        p = 0.5 * (1 + np.tanh(0.5 * eta))
        return np.clip(p, PROPENSITY_CLAMP, 1 - PROPENSITY_CLAMP)


def fit_logistic_propensity(features, treatments, ridge: float = 1e-8, max_iter: int = 100,
                            grad_tol: float = 1e-8) -> PropensityModel:
    """Logistic regression of P(T = +1 | X) by iteratively reweighted least squares."""
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    Z = np.hstack([np.ones((n, 1)), X])
    z = (np.asarray(treatments, dtype=float) + 1) / 2
    coef = np.zeros(Z.shape[1])
    R = ridge * np.eye(Z.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Z @ coef
        p = 0.5 * (1 + np.tanh(0.5 * eta))
        grad = Z.T @ (z - p) - ridge * coef
        if np.linalg.norm(grad) / n < grad_tol:
            converged = True
            break
        W = p * (1 - p)
        H = Z.T @ (Z * W[:, None]) + R
        try:
            coef = coef + np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            coef = coef + np.linalg.lstsq(H, grad, rcond=None)[0]
    eta = Z @ coef
    separated = bool(np.all(np.where(z > 0.5, eta > 0, eta < 0)))
    return PropensityModel(coef, it, converged and not separated, ridge)


# Algorithm ----------------------------------------------------------------------------------

def ensure_propensities(data: ItrDataset, ridge: float = 1e-8) -> ItrDataset:
    if data.propensities is not None:
        return data
    model = fit_logistic_propensity(data.features, data.treatments, ridge)
    return data.with_propensities(model.predict(data.features))


def fit_transfer_itr(source: ItrDataset, target: ItrDataset, config: TransferConfig = TransferConfig(),
                     c0: float = 0.01) -> TransferFit:
    """Transfer learning for a treatment rule via the weighted classification pipeline."""
    source = ensure_propensities(source)
    target = ensure_propensities(target)
    check_overlap(source.propensities, c0)
    check_overlap(target.propensities, c0)
    ws, wt = make_weighting(source), make_weighting(target)
    return fit_transfer_classifier(ws.as_dataset(source.features), wt.as_dataset(target.features), config)


@dataclass(frozen=True)
class ValueRow:
    rule: str
    value: float
    n: int
    mean_weight: float
    share_treated: float


VALUE_HEADER = ["rule", "value", "n", "mean_weight", "share_treated"]


def value_row(tag: str, rule: DecisionRule, data: ItrDataset) -> ValueRow:
    w = np.asarray(itr_weight(data.treatments, data.rewards, data.propensities)).reshape(-1)
    treated = rule.predict(data.features) > 0
    return ValueRow(tag, estimate_value(rule, data), data.n, float(np.mean(w)), float(np.mean(treated)))


def value_report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VALUE_HEADER)
    for r in rows:
        w.writerow([r.rule, repr(r.value), r.n, repr(r.mean_weight), repr(r.share_treated)])
    return buf.getvalue()
