import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ruledrift.bench import transform_family
from ruledrift.dataset_io import Dataset
from ruledrift.erm import weighted_zero_one_risk
from ruledrift.kernel_svm import SvmConfig, train_weighted_svm
from ruledrift.pipeline import (
    CANDIDATE_TAGS,
    TheorySchedule,
    TransferConfig,
    aggregate,
    fit_transfer_classifier,
    rate_beta,
    schedule_lambda_sigma,
)
from ruledrift.rules import FunctionOffset, constant_rule, halfspace_rule, svm_rule
from ruledrift.simgen import SimSetting, generate


def test_rate_beta_hand_values():
    assert Fraction(rate_beta(1, 1)).limit_denominator(1000) == Fraction(1, 3)
    assert Fraction(rate_beta(2, 2)).limit_denominator(1000) == Fraction(6, 13)
    assert Fraction(rate_beta(math.inf, 1)).limit_denominator(1000) == Fraction(2, 5)
    assert rate_beta(0, 3) == 3 / 7


@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_rate_beta_in_unit_interval(alpha, g):
    b = rate_beta(alpha, g)
    assert 0 < b < 1


@given(st.floats(0.05, 20).filter(lambda g: abs(g - 0.5) > 1e-3))
def test_rate_beta_approaches_infinite_alpha(g):
    assert rate_beta(1e9, g) == pytest.approx(rate_beta(math.inf, g), rel=1e-6)


@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_rate_beta_continuous_at_threshold(alpha, g):
    thr = (alpha + 2) / (2 * alpha)
    lo, hi = rate_beta(alpha, thr * (1 - 1e-9)), rate_beta(alpha, thr * (1 + 1e-9))
    assert lo == pytest.approx(hi, rel=1e-6)


def test_rate_beta_domain():
    with pytest.raises(ValueError):
        rate_beta(-1, 1)
    with pytest.raises(ValueError):
        rate_beta(1, 0)


def test_schedule_example():
    lam, sigma = schedule_lambda_sigma(1000, 1 / 3, 1, 5)
    assert lam == pytest.approx(1e-6, rel=1e-12)
    assert sigma == pytest.approx(10.0, rel=1e-12)
    with pytest.raises(ValueError):
        schedule_lambda_sigma(1000, 0.0, 1, 5)
    sig = [schedule_lambda_sigma(n, 0.4, 1.5, 3)[1] for n in (100, 1000, 10_000)]
    assert sig[0] < sig[1] < sig[2]


def test_theory_schedule_config():
    cfg = TheorySchedule(alpha=1, gamma=5, d=5).svm_config(1000, SvmConfig())
    assert cfg.lam == pytest.approx(1e-6) and cfg.sigma == pytest.approx(10.0)
    tc = TransferConfig(source_svm=SvmConfig(lam=0.1), schedule=TheorySchedule(1, 5, 5))
    with pytest.raises(ValueError):
        tc.svm_for("source", 100)


def _labelled(pred):
    return Dataset(np.arange(len(pred), dtype=float).reshape(-1, 1), np.asarray(pred, float))


def test_aggregate_examples():
    hold = _labelled([1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1])
    # rules that misclassify the first k of 20 points
    rules = [halfspace_rule([1.0], -k + 0.5) for k in (6, 4, 5)]
    rule, risks, idx = aggregate(rules, hold)
    assert risks == pytest.approx([0.3, 0.2, 0.25]) and idx == 1
    assert weighted_zero_one_risk(rule, hold) == pytest.approx(0.2)
    one = constant_rule(False, 1)
    assert aggregate([one], hold)[2] == 0
    same = [constant_rule(True, 1), halfspace_rule([1.0], 1.0)]
    assert aggregate(same, hold)[2] == 0
    with pytest.raises(ValueError):
        aggregate([], hold)


def test_no_drift_sanity():
    tmpl = SimSetting("linear", "translation", "deterministic", d=2, theta=0.0)
    src = generate(replace(tmpl, n=1500, seed=1)).dataset
    tgt = generate(replace(tmpl, role="target", n=600, seed=2)).dataset
    fit = fit_transfer_classifier(src, tgt, TransferConfig(family=FunctionOffset()))
    assert fit.holdout_risks["calibrated"] < 0.05 and fit.holdout_risks["source_only"] < 0.05
    r = fit.holdout_risks
    best = min(r.values())
    assert fit.selection == next(t for t in CANDIDATE_TAGS if r[t] == best)


def test_fit_structure_and_aggregation_identity():
    tmpl = SimSetting("linear", "translation", "logistic", d=3, theta=1.0)
    src = generate(replace(tmpl, n=400, seed=3)).dataset
    tgt = generate(replace(tmpl, role="target", n=101, seed=4)).dataset
    fit = fit_transfer_classifier(src, tgt, TransferConfig(family=transform_family(tmpl), split_seed=9))
    assert len(fit.calibration_index) == 51 and len(fit.holdout_index) == 50
    hold = tgt.subset(fit.holdout_index)
    assert weighted_zero_one_risk(fit.rule_final, hold) == min(fit.holdout_risks.values())
    assert fit.summary_header()[0] == "split_seed"
    assert fit.summary_csv().count("\n") == 2


def test_small_target_rejected():
    src = Dataset(np.zeros((4, 1)), np.array([1.0, -1, 1, -1]))
    with pytest.raises(ValueError):
        fit_transfer_classifier(src, src.subset([0, 1, 2]))


def test_target_model_trained_on_calibration_half():
    tmpl = SimSetting("linear", "translation", "deterministic", d=2, theta=0.5)
    src = generate(replace(tmpl, n=300, seed=5)).dataset
    tgt = generate(replace(tmpl, role="target", n=60, seed=6)).dataset
    fit = fit_transfer_classifier(src, tgt, TransferConfig())
    ref = train_weighted_svm(tgt.subset(fit.calibration_index))
    assert np.array_equal(ref.dual_coefficients, fit.target_model.dual_coefficients)


@pytest.mark.slow
def test_transfer_beats_target_only_mostly():
    tmpl = SimSetting("linear", "translation", "deterministic", d=5, theta=1.0)
    fam = transform_family(tmpl)
    wins = 0
    for rep in range(20):
        s = np.random.SeedSequence([77, rep]).generate_state(4)
        src = generate(replace(tmpl, n=2000, seed=int(s[0]))).dataset
        tgt = generate(replace(tmpl, role="target", n=400, seed=int(s[1]))).dataset
        val = generate(replace(tmpl, role="target", n=400, seed=int(s[2]))).dataset
        fit = fit_transfer_classifier(src, tgt, TransferConfig(family=fam, split_seed=int(s[3])))
        target_only = svm_rule(train_weighted_svm(tgt))
        wins += weighted_zero_one_risk(fit.rule_final, val) < weighted_zero_one_risk(target_only, val)
    assert wins >= 14
