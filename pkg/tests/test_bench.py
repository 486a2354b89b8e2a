import csv
import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import itr_design
from ruledrift.bench import (
    RESULT_HEADER,
    BenchmarkConfig,
    BenchmarkRow,
    Grid,
    ItrAnalysisConfig,
    _cell_seed,
    _rep_seeds,
    rows_csv,
    run_benchmark,
    run_itr_analysis,
    summarize,
    summary_csv,
)
from ruledrift.dataset_io import Dataset, save_itr_csv
from ruledrift.itr import OverlapError
from ruledrift.kernel_svm import train_weighted_svm
from ruledrift.rules import svm_rule
from ruledrift.simgen import SimSetting, generate

SMALL = dict(setting=SimSetting("linear", "translation", "logistic", d=2), n_source=200,
             grid=Grid(dims=(2,), shifts=(1.0,), shares=(4,)))


def _row(method, misclass, **kw):
    base = dict(setting="s", dim=2, shift=1.0, share=2.0, rep=0, seed=0)
    base.update(kw)
    return BenchmarkRow(method=method, misclass=misclass, **base)


def test_row_count_and_range():
    rows = run_benchmark(BenchmarkConfig(reps=2, methods=("target_only",), **SMALL))
    assert len(rows) == 2
    assert all(0 <= r.misclass <= 1 for r in rows)


def test_all_methods_and_header(tmp_path):
    out = tmp_path / "r.csv"
    rows = run_benchmark(BenchmarkConfig(reps=1, output=str(out), **SMALL))
    assert [r.method for r in rows] == ["proposed", "pooled", "source_only", "target_only"]
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(RESULT_HEADER)
    assert text == rows_csv(rows)
    prop = rows[0]
    assert prop.selection in ("calibrated", "target_only", "source_only") and len(prop.theta_hat) == 1


def test_pooled_matches_refit():
    cfg = BenchmarkConfig(reps=1, methods=("pooled",), **SMALL)
    row = run_benchmark(cfg)[0]
    s_src, s_tgt, s_val, _ = _rep_seeds(_cell_seed(cfg.base_seed, 0, 0))
    tmpl = replace(cfg.setting, d=2, theta=1.0)
    src = generate(replace(tmpl, n=200, seed=s_src)).dataset
    tgt = generate(replace(tmpl, role="target", n=50, seed=s_tgt)).dataset
    val = generate(replace(tmpl, role="target", n=50, seed=s_val)).dataset
    rule = svm_rule(train_weighted_svm(Dataset.concat([src, tgt])))
    assert row.seed == _cell_seed(0, 0, 0)
    assert row.misclass == float(np.mean(rule.predict(val.features) != val.labels))


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_benchmark(BenchmarkConfig(reps=2, output=str(a), **SMALL))
    run_benchmark(BenchmarkConfig(reps=2, output=str(b), **SMALL))
    assert a.read_bytes() == b.read_bytes()


def test_parallel_matches_serial():
    cfg = BenchmarkConfig(reps=2, methods=("source_only", "target_only"), **SMALL)
    assert rows_csv(run_benchmark(cfg)) == rows_csv(run_benchmark(replace(cfg, workers=2)))


def test_infeasible_cell_yields_error_rows():
    cfg = BenchmarkConfig(reps=1, methods=("target_only", "proposed"),
                          **{**SMALL, "grid": Grid(dims=(2,), shifts=(1.0,), shares=(4, 100))})
    rows = run_benchmark(cfg)
    bad = [r for r in rows if r.share == 100]
    assert len(bad) == 2 and all(r.misclass is None and r.selection.startswith("error") for r in bad)
    assert all(r.misclass is not None for r in rows if r.share == 4)


def test_failing_cell_is_isolated():
    # quadratic boundary with d=2 raises inside the task; the d=3 cell still runs
    cfg = BenchmarkConfig(reps=1, methods=("target_only",), n_source=100,
                          setting=SimSetting("quadratic", "rotation", "deterministic", d=3),
                          grid=Grid(dims=(2, 3), shifts=(0.5,), shares=(2,)))
    rows = run_benchmark(cfg)
    assert [r.dim for r in rows] == [2, 3]
    assert rows[0].selection.startswith("error") and rows[1].misclass is not None


def test_config_validation_and_from_dict():
    with pytest.raises(ValueError):
        BenchmarkConfig(reps=0)
    with pytest.raises(ValueError):
        BenchmarkConfig(methods=("magic",))
    cfg = BenchmarkConfig.from_dict({
        "setting": {"boundary": "quadratic", "transform": "rotation", "regression": "logistic", "d": 5},
        "grid": {"dims": [3, 5], "shifts": [0.5], "shares": [2, 16]},
        "n_source": 1000, "reps": 3, "methods": ["proposed", "target_only"], "base_seed": 4,
        "source_svm": {"sigma": 0.3},
    })
    assert cfg.grid.dims == (3, 5) and cfg.n_target(16) == 62 and cfg.source_svm.sigma == 0.3
    with pytest.raises(ValueError):
        BenchmarkConfig.from_dict({"nonsense": 1})


def test_timing_off_by_default():
    rows = run_benchmark(BenchmarkConfig(reps=1, methods=("target_only",), **SMALL))
    assert rows[0].wall_ms == 0.0
    timed = run_benchmark(BenchmarkConfig(reps=1, methods=("target_only",), record_timing=True, **SMALL))
    assert timed[0].wall_ms > 0


def test_summarize_examples():
    one = summarize([_row("proposed", 0.25)])
    assert one[0].median == 0.25 and one[0].iqr == 0.0
    three = summarize([_row("proposed", v, rep=i) for i, v in enumerate((0.1, 0.3, 0.2))])
    assert three[0].median == pytest.approx(0.2) and three[0].count == 3
    with pytest.raises(ValueError):
        summarize([])
    assert summary_csv(three).splitlines()[0].startswith("setting,dim,shift,share,method")


@given(st.lists(st.tuples(st.sampled_from(["proposed", "pooled", "target_only"]), st.integers(0, 2),
                          st.floats(0, 1)), min_size=1, max_size=40))
def test_summary_never_mixes_methods(entries):
    rows = [_row(m, v, dim=d, rep=i) for i, (m, d, v) in enumerate(entries)]
    summ = summarize(rows)
    for s in summ:
        vals = [r.misclass for r in rows if r.method == s.method and r.dim == s.dim]
        assert s.count == len(vals)
        assert s.median == pytest.approx(float(np.median(vals)))
    keys = [(s.setting, s.dim, s.shift, s.share, s.method) for s in summ]
    assert keys == sorted(keys)


def _itr_csvs(tmp_path, n_src, n_tgt, theta=1.0, with_pi=True):
    src, _ = itr_design(n_src, 3, 0.0, 11, noise=0.5)
    tgt, oracle = itr_design(n_tgt, 3, theta, 12, noise=0.5)
    if not with_pi:
        src, tgt = replace(src, propensities=None), replace(tgt, propensities=None)
    save_itr_csv(src, tmp_path / "src.csv")
    save_itr_csv(tgt, tmp_path / "tgt.csv")
    return tgt, oracle


def test_itr_analysis_three_rows(tmp_path):
    _itr_csvs(tmp_path, 300, 80, with_pi=False)
    out = tmp_path / "values.csv"
    rows = run_itr_analysis(tmp_path / "src.csv", tmp_path / "tgt.csv", out=out)
    assert [r.rule for r in rows] == ["proposed", "source_only", "target_only"]
    lines = list(csv.reader(io.StringIO(out.read_text())))
    assert lines[0] == ["rule", "value", "n", "mean_weight", "share_treated"] and len(lines) == 4


def test_itr_analysis_overlap_violation(tmp_path):
    src, _ = itr_design(100, 2, 0.0, 1)
    save_itr_csv(replace(src, propensities=np.r_[0.001, np.full(99, 0.5)]), tmp_path / "s.csv")
    save_itr_csv(src, tmp_path / "t.csv")
    with pytest.raises(OverlapError, match="row 0"):
        run_itr_analysis(tmp_path / "s.csv", tmp_path / "t.csv")


def test_itr_analysis_log1p(tmp_path):
    src, _ = itr_design(200, 2, 0.0, 1)
    tgt, _ = itr_design(60, 2, 0.5, 2)
    src = replace(src, rewards=np.abs(src.rewards))
    tgt = replace(tgt, rewards=np.abs(tgt.rewards))
    save_itr_csv(src, tmp_path / "s.csv")
    save_itr_csv(tgt, tmp_path / "t.csv")
    plain = run_itr_analysis(tmp_path / "s.csv", tmp_path / "t.csv")
    logged = run_itr_analysis(tmp_path / "s.csv", tmp_path / "t.csv", ItrAnalysisConfig(log1p_outcome=True))
    assert logged[0].mean_weight == pytest.approx(np.mean(np.log1p(tgt.rewards) / 0.5))
    assert plain[0].mean_weight != logged[0].mean_weight
