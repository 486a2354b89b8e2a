"""Source SVM -> split target -> calibrate -> target SVM -> holdout selection.

Also holds the rate exponent and (lambda, sigma) schedule from the excess
risk bound, which can replace the default SVM hyperparameters.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset_io import Dataset, split_indices
from .erm import CalibrationResult, ErmConfig, calibrate, weighted_zero_one_risk
from .kernel_svm import SvmConfig, SvmModel, train_weighted_svm
from .rules import DecisionRule, FunctionOffset, svm_rule

CANDIDATE_TAGS = ("calibrated", "target_only", "source_only")


def rate_beta(alpha: float, gamma_prime: float) -> float:
    """Rate exponent from the margin exponent alpha and gamma' = gamma / d.

    alpha may be ``math.inf``.
    """
    if not gamma_prime > 0 or not math.isfinite(gamma_prime):
        raise ValueError("gamma_prime must be a positive finite number")
    if alpha < 0 or math.isnan(alpha):
        raise ValueError("alpha must be >= 0")
    g = gamma_prime
    if alpha == 0:
        return g / (2 * g + 1)
    if math.isinf(alpha):
        threshold = 0.5
        return g / (2 * g + 1) if g <= threshold else 2 * g / (2 * g + 3)
    if g <= (alpha + 2) / (2 * alpha):
        return g / (2 * g + 1)
    return 2 * g * (alpha + 1) / (2 * g * (alpha + 2) + 3 * alpha + 4)


def schedule_lambda_sigma(n: int, beta: float, gamma_prime: float, d: int) -> tuple[float, float]:
    """lambda = n^(-beta (gamma' + d) / gamma'), sigma = n^(beta / gamma')."""
    if n < 1 or not beta > 0 or not gamma_prime > 0 or d < 1:
        raise ValueError("schedule inputs must be positive")
    lam = float(n) ** (-beta * (gamma_prime + d) / gamma_prime)
    sigma = float(n) ** (beta / gamma_prime)
    return lam, sigma


@dataclass(frozen=True)
class TheorySchedule:
    """Margin exponent alpha and noise exponent gamma (gamma' = gamma / d)."""

    alpha: float
    gamma: float
    d: int

    def svm_config(self, n: int, base: SvmConfig) -> SvmConfig:
        g = self.gamma / self.d
        lam, sigma = schedule_lambda_sigma(n, rate_beta(self.alpha, g), g, self.d)
        return replace(base, lam=lam, sigma=sigma)


@dataclass(frozen=True)
class TransferConfig:
    family: object = FunctionOffset()
    source_svm: SvmConfig = SvmConfig()
    target_svm: SvmConfig = SvmConfig()
    erm: ErmConfig = ErmConfig()
    split_seed: int = 0
    schedule: Optional[TheorySchedule] = None

    def svm_for(self, which: str, n: int) -> SvmConfig:
        base = self.source_svm if which == "source" else self.target_svm
        if self.schedule is None:
            return base
        if base.lam is not None or base.sigma is not None:
            raise ValueError("set either explicit SVM hyperparameters or the theoretical schedule, not both")
        return self.schedule.svm_config(n, base)


@dataclass(frozen=True, eq=False)
class TransferFit:
    rule_source: DecisionRule
    rule_calibrated: DecisionRule
    rule_target: DecisionRule
    rule_final: DecisionRule
    selection: str
    holdout_risks: dict
    calibration: CalibrationResult = field(repr=False)
    source_model: SvmModel = field(repr=False)
    target_model: SvmModel = field(repr=False)
    calibration_index: np.ndarray = field(repr=False)
    holdout_index: np.ndarray = field(repr=False)
    split_seed: int = 0

    @property
    def theta_hat(self) -> np.ndarray:
        return self.calibration.theta_hat

    def candidates(self) -> list:
        return [self.rule_calibrated, self.rule_target, self.rule_source]

    def summary_header(self) -> list:
        p = self.theta_hat.shape[0]
        return (["split_seed"] + [f"theta_hat{k + 1}" for k in range(p)]
                + [f"risk_{t}" for t in CANDIDATE_TAGS] + ["selection"])

    def summary_row(self) -> list:
        return ([self.split_seed] + [repr(float(v)) for v in self.theta_hat]
                + [repr(self.holdout_risks[t]) for t in CANDIDATE_TAGS] + [self.selection])

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.summary_header())
        w.writerow(self.summary_row())
        return buf.getvalue()


def aggregate(candidates: Sequence[DecisionRule], holdout: Dataset) -> tuple[DecisionRule, list, int]:
    """Candidate with the smallest weighted 0-1 holdout risk; ties go to the earliest."""
    if not candidates:
        raise ValueError("no candidate rules to aggregate")
    risks = [weighted_zero_one_risk(r, holdout) for r in candidates]
    best = min(range(len(risks)), key=lambda i: (risks[i], i))
    return candidates[best], risks, best


def fit_transfer_classifier(source: Dataset, target: Dataset, config: TransferConfig = TransferConfig()) -> TransferFit:
    if target.n < 4:
        raise ValueError(f"target data needs at least 4 rows, got {target.n}")
    if source.d != target.d:
        raise ValueError("source and target feature dimensions differ")
    model_p = train_weighted_svm(source, config.svm_for("source", source.n))
    rule_p = svm_rule(model_p)

    cal_idx, hold_idx = split_indices(target.n, config.split_seed)
    d1, d2 = target.subset(cal_idx), target.subset(hold_idx)

    cal = calibrate(rule_p, config.family, d1, config.erm)
    model_q = train_weighted_svm(d1, config.svm_for("target", d1.n))
    rule_q = svm_rule(model_q)

    candidates = [cal.rule, rule_q, rule_p]
    final, risks, idx = aggregate(candidates, d2)
    return TransferFit(
        rule_source=rule_p,
        rule_calibrated=cal.rule,
        rule_target=rule_q,
        rule_final=final,
        selection=CANDIDATE_TAGS[idx],
        holdout_risks=dict(zip(CANDIDATE_TAGS, risks)),
        calibration=cal,
        source_model=model_p,
        target_model=model_q,
        calibration_index=cal_idx,
        holdout_index=hold_idx,
        split_seed=config.split_seed,
    )
