"""Seeded Monte Carlo sweeps over (dimension, shift, share) grids.

Every grid cell and repetition gets its own seed from
``SeedSequence([base_seed, cell_index, rep])``; source, target, validation
and split seeds are spawned from it. Rows are sorted canonically before
they are written, so results do not depend on execution order.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from itertools import product
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset_io import Dataset, ItrDataset, load_itr_csv
from .erm import ErmConfig
from .itr import (
    ValueRow,
    check_overlap,
    ensure_propensities,
    make_weighting,
    fit_transfer_itr,
    value_report_csv,
    value_row,
)
from .kernel_svm import SvmConfig, train_weighted_svm
from .pipeline import TransferConfig, fit_transfer_classifier
from .rules import CoordinateRotation, FunctionOffset, ParameterBox, SpatialTranslation, svm_rule
from .simgen import SimSetting, generate

METHODS = ("proposed", "pooled", "source_only", "target_only")
RESULT_HEADER = ["setting", "method", "dim", "shift", "share", "rep", "seed", "misclass",
                 "theta_hat", "selection", "wall_ms"]
FULL_SHARES = (2, 5, 8, 16, 32, 64)
FULL_DIMS = (3, 5, 8, 10, 15, 20)
SUPPLEMENT_DIMS = (3, 5, 10, 15, 20, 30)
TRANSLATION_SHIFTS = (-0.5, 0.5, 1.0, 2.0, 3.0, 4.0)
ROTATION_SHIFTS = tuple(math.pi * k for k in (-1 / 12, 1 / 12, 1 / 6, 1 / 3, 1 / 2, 2 / 3))


@dataclass(frozen=True)
class Grid:
    dims: tuple = (5,)
    shifts: tuple = (1.0,)
    shares: tuple = (5,)


@dataclass(frozen=True)
class BenchmarkConfig:
    setting: SimSetting = SimSetting()
    grid: Grid = Grid()
    n_source: int = 2000
    reps: int = 20
    methods: tuple = METHODS
    base_seed: int = 0
    output: Optional[str] = None
    source_svm: SvmConfig = SvmConfig()
    target_svm: SvmConfig = SvmConfig()
    erm: ErmConfig = ErmConfig()
    family: str = "auto"
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def n_target(self, share) -> int:
        return int(self.n_source // share)

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchmarkConfig":
        raw = dict(raw)
        kw = {}
        if "setting" in raw:
            kw["setting"] = SimSetting(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in raw.pop("setting").items()})
        if "grid" in raw:
            kw["grid"] = Grid(**{k: tuple(v) for k, v in raw.pop("grid").items()})
        for key, typ in (("source_svm", SvmConfig), ("target_svm", SvmConfig), ("erm", ErmConfig)):
            if key in raw:
                kw[key] = typ(**raw.pop(key))
        if "methods" in raw:
            kw["methods"] = tuple(raw.pop("methods"))
        known = {f.name for f in fields(cls)}
        bad = set(raw) - known
        if bad:
            raise ValueError(f"unknown config keys {sorted(bad)}")
        kw.update(raw)
        return cls(**kw)


@dataclass(frozen=True)
class BenchmarkRow:
    setting: str
    method: str
    dim: int
    shift: float
    share: float
    rep: int
    seed: int
    misclass: Optional[float]
    theta_hat: tuple = ()
    selection: str = ""
    wall_ms: float = 0.0

    def sort_key(self):
        return (self.setting, self.dim, self.shift, self.share, self.rep, METHODS.index(self.method)
                if self.method in METHODS else 99, self.method)

    def as_csv(self) -> list:
        return [
            self.setting, self.method, self.dim, repr(float(self.shift)), repr(float(self.share)), self.rep,
            self.seed, "" if self.misclass is None else repr(float(self.misclass)),
            ";".join(repr(float(t)) for t in self.theta_hat), self.selection,
            repr(round(float(self.wall_ms), 3)),
        ]


def transform_family(setting: SimSetting, kind: str = "auto"):
    """Transform family matching the setting's drift, or an explicit kind.

    For a linear boundary, translation is taken along -beta/||beta||^2 so that
    theta is in the units of the score beta'x (theta* is then the true shift).
    """
    if kind == "auto":
        if setting.transform == "rotation":
            kind = "rotation"
        elif setting.boundary == "linear":
            kind = "translation"
        else:
            kind = "offset"
    if kind == "rotation":
        return CoordinateRotation(0, 1, ParameterBox((-math.pi,), (math.pi,)))
    if kind == "translation":
        b = setting.beta_vector
        return SpatialTranslation(-b / float(b @ b), ParameterBox((-5.0,), (5.0,)), normalize=False)
    if kind == "offset":
        return FunctionOffset(ParameterBox((-5.0,), (5.0,)))
    raise ValueError(f"unknown family kind {kind!r}")


def _cell_seed(base_seed: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([base_seed, cell, rep]).generate_state(1)[0])


def _rep_seeds(rep_seed: int) -> tuple:
    ss = np.random.SeedSequence(rep_seed).generate_state(4)
    return tuple(int(s) for s in ss)


def _misclass(rule, data: Dataset) -> float:
    return float(np.mean(rule.predict(data.features) != data.labels))


def _run_task(task) -> list:
    config, cell, d, shift, share, rep = task
    seed = _cell_seed(config.base_seed, cell, rep)
    tag = config.setting.tag
    n_target = config.n_target(share)
    base = dict(setting=tag, dim=d, shift=shift, share=share, rep=rep, seed=seed)
    if n_target < 4:
        return [BenchmarkRow(method=m, misclass=None, selection=f"error:n_target={n_target}<4", **base)
                for m in config.methods]
    s_src, s_tgt, s_val, s_split = _rep_seeds(seed)
    rows = []
    try:
        tmpl = replace(config.setting, d=d, theta=shift)
        src = generate(replace(tmpl, role="source", n=config.n_source, seed=s_src)).dataset
        tgt = generate(replace(tmpl, role="target", n=n_target, seed=s_tgt)).dataset
        val = generate(replace(tmpl, role="target", n=n_target, seed=s_val)).dataset
    except Exception as exc:  # noqa: BLE001 - a broken cell must not stop the sweep
        return [BenchmarkRow(method=m, misclass=None, selection=f"error:{type(exc).__name__}", **base)
                for m in config.methods]

    source_model = None
    for method in config.methods:
        t0 = time.perf_counter()
        try:
            theta, selection = (), ""
            if method == "proposed":
                tc = TransferConfig(family=transform_family(tmpl, config.family), source_svm=config.source_svm,
                                    target_svm=config.target_svm, erm=config.erm, split_seed=s_split)
                fit = fit_transfer_classifier(src, tgt, tc)
                source_model = fit.source_model
                rule, theta, selection = fit.rule_final, tuple(fit.theta_hat), fit.selection
            elif method == "source_only":
                if source_model is None:
                    source_model = train_weighted_svm(src, config.source_svm)
                rule = svm_rule(source_model)
            elif method == "target_only":
                rule = svm_rule(train_weighted_svm(tgt, config.target_svm))
            else:
                rule = svm_rule(train_weighted_svm(Dataset.concat([src, tgt]), config.source_svm))
            err = _misclass(rule, val)
        except Exception as exc:  # noqa: BLE001
            err, theta, selection = None, (), f"error:{type(exc).__name__}"
        wall = (time.perf_counter() - t0) * 1000 if config.record_timing else 0.0
        rows.append(BenchmarkRow(method=method, misclass=err, theta_hat=theta, selection=selection,
                                 wall_ms=wall, **base))
    return rows


def _tasks(config: BenchmarkConfig):
    cells = list(product(config.grid.dims, config.grid.shifts, config.grid.shares))
    for cell, (d, shift, share) in enumerate(cells):
        for rep in range(config.reps):
            yield (config, cell, d, shift, share, rep)


def rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def run_benchmark(config: BenchmarkConfig, progress=None) -> list:
    tasks = list(_tasks(config))
    rows = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for out in pool.map(_run_task, tasks):
                rows.extend(out)
                if progress:
                    progress(out)
    else:
        for task in tasks:
            out = _run_task(task)
            rows.extend(out)
            if progress:
                progress(out)
    rows.sort(key=BenchmarkRow.sort_key)
    if config.output:
        Path(config.output).write_text(rows_csv(rows), encoding="utf-8")
    return rows


SUMMARY_HEADER = ["setting", "dim", "shift", "share", "method", "count", "median", "q25", "q75", "iqr"]


@dataclass(frozen=True)
class SummaryRow:
    setting: str
    dim: int
    shift: float
    share: float
    method: str
    count: int
    median: float
    q25: float
    q75: float

    @property
    def iqr(self) -> float:
        return self.q75 - self.q25


def summarize(rows) -> list:
    """Per-cell, per-method median and interquartile range of the misclassification rate."""
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to summarise")
    groups = {}
    for r in rows:
        if r.misclass is None:
            continue
        groups.setdefault((r.setting, r.dim, r.shift, r.share, r.method), []).append(r.misclass)
    out = []
    for key in sorted(groups):
        v = np.asarray(groups[key])
        q25, med, q75 = np.percentile(v, [25, 50, 75])
        out.append(SummaryRow(*key, count=len(v), median=float(med), q25=float(q25), q75=float(q75)))
    return out


def summary_csv(summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for s in summary:
        w.writerow([s.setting, s.dim, repr(float(s.shift)), repr(float(s.share)), s.method, s.count,
                    repr(s.median), repr(s.q25), repr(s.q75), repr(s.iqr)])
    return buf.getvalue()


# Real-data treatment rule comparison ---------------------------------------------------------

@dataclass(frozen=True)
class ItrAnalysisConfig:
    transfer: TransferConfig = TransferConfig()
    log1p_outcome: bool = False
    c0: float = 0.01
    reward_bound: Optional[float] = None


def _log1p_rewards(data: ItrDataset) -> ItrDataset:
    if np.any(data.rewards <= -1):
        raise ValueError("log1p outcome transform needs rewards > -1")
    return ItrDataset(data.features, data.treatments, np.log1p(data.rewards), data.propensities)


def run_itr_analysis(source_csv, target_csv, config: ItrAnalysisConfig = ItrAnalysisConfig(), out=None) -> list:
    """Fit proposed / source-only / target-only rules and report IPW values on the target sample."""
    source = load_itr_csv(source_csv)
    target = load_itr_csv(target_csv)
    if config.log1p_outcome:
        source, target = _log1p_rewards(source), _log1p_rewards(target)
    if config.reward_bound is not None:
        source = replace(source, reward_bound=config.reward_bound)
        target = replace(target, reward_bound=config.reward_bound)
    source, target = ensure_propensities(source), ensure_propensities(target)
    check_overlap(source.propensities, config.c0)
    check_overlap(target.propensities, config.c0)
    fit = fit_transfer_itr(source, target, config.transfer, c0=config.c0)
    # target-only uses the whole target sample, like the source-only rule uses the whole source
    target_model = train_weighted_svm(make_weighting(target).as_dataset(target.features), config.transfer.target_svm)
    rows = [
        value_row("proposed", fit.rule_final, target),
        value_row("source_only", fit.rule_source, target),
        value_row("target_only", svm_rule(target_model), target),
    ]
    if out is not None:
        Path(out).write_text(value_report_csv(rows), encoding="utf-8")
    return rows
