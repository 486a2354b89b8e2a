"""Command line entry point: ``ruledrift {simulate,fit,itr,diagnose}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .bench import (
    BenchmarkConfig,
    ItrAnalysisConfig,
    rows_csv,
    run_benchmark,
    run_itr_analysis,
    summarize,
    summary_csv,
)
from .dataset_io import load_classification_csv
from .erm import ErmConfig
from .itr import OverlapError, value_report_csv
from .kernel_svm import SvmConfig
from .pipeline import TransferConfig, fit_transfer_classifier
from .rules import CoordinateRotation, FunctionOffset, ParameterBox, SpatialTranslation
from .simgen import (
    DEFAULT_T_GRID,
    estimate_margin_exponent,
    estimate_noise_exponent,
    example1_sampler,
)

log = logging.getLogger("ruledrift")
FULL_REPS = 320


def _load_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        return json.loads(text)
    return yaml.safe_load(text) or {}


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _family(kind: str, d: int, radius: float):
    box = ParameterBox((-radius,), (radius,))
    if kind == "offset":
        return FunctionOffset(box)
    if kind == "translation":
        return SpatialTranslation(np.eye(d)[0], box)
    if kind == "rotation":
        return CoordinateRotation(0, 1, ParameterBox((-math.pi,), (math.pi,)))
    raise ValueError(f"unknown family {kind!r}")


def _svm(lam, sigma) -> SvmConfig:
    return SvmConfig(lam=lam, sigma=sigma)


def cmd_simulate(args) -> int:
    raw = _load_config_file(args.config) if args.config else {}
    cfg = BenchmarkConfig.from_dict(raw)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if args.paper_scale:
        cfg = replace(cfg, reps=FULL_REPS)
    if args.reps is not None:
        cfg = replace(cfg, reps=args.reps)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.timing:
        cfg = replace(cfg, record_timing=True)
    if args.out is not None:
        cfg = replace(cfg, output=args.out)

    def progress(rows):
        r = rows[0]
        log.info("dim=%s shift=%.4g share=%g rep=%d done", r.dim, r.shift, r.share, r.rep)

    rows = run_benchmark(cfg, progress=progress)
    if cfg.output is None:
        sys.stdout.write(rows_csv(rows))
    if args.summary:
        Path(args.summary).write_text(summary_csv(summarize(rows)), encoding="utf-8")
    return 0


def cmd_fit(args) -> int:
    source = load_classification_csv(args.source)
    target = load_classification_csv(args.target)
    cfg = TransferConfig(
        family=_family(args.family, source.d, args.radius),
        source_svm=_svm(args.source_lambda, args.source_sigma),
        target_svm=_svm(args.target_lambda, args.target_sigma),
        erm=ErmConfig(seed=args.seed),
        split_seed=args.seed,
    )
    fit = fit_transfer_classifier(source, target, cfg)
    _emit(fit.summary_csv(), args.out)
    return 0


def cmd_itr(args) -> int:
    transfer = TransferConfig(
        family=_family(args.family, _n_features(args.source), args.radius),
        source_svm=_svm(args.source_lambda, args.source_sigma),
        target_svm=_svm(args.target_lambda, args.target_sigma),
        erm=ErmConfig(seed=args.seed),
        split_seed=args.seed,
    )
    cfg = ItrAnalysisConfig(transfer, log1p_outcome=args.log1p_outcome, c0=args.c0, reward_bound=args.reward_bound)
    try:
        rows = run_itr_analysis(args.source, args.target, cfg)
    except OverlapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(value_report_csv(rows), args.out)
    return 0


def _n_features(path) -> int:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    return sum(1 for h in header if h.strip().startswith("x"))


def cmd_diagnose(args) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_exponent", "d", "quantity", "t", "estimate", "slope"])
    for t_exp in args.t_exponent:
        gen = example1_sampler(t_exp, args.d, 1, args.seed)
        for name, fn in (("margin", estimate_margin_exponent), ("noise", estimate_noise_exponent)):
            fit = fn(gen, args.grid, n_mc=args.n_mc, seed=args.seed)
            for t, est in fit.rows():
                w.writerow([repr(t_exp), args.d, name, repr(t), repr(est), repr(fit.slope)])
    _emit(buf.getvalue(), args.out)
    return 0


def _add_svm_flags(p) -> None:
    p.add_argument("--family", choices=("offset", "translation", "rotation"), default="offset")
    p.add_argument("--radius", type=float, default=5.0, help="half-width of the parameter box")
    p.add_argument("--source-lambda", type=float)
    p.add_argument("--source-sigma", type=float)
    p.add_argument("--target-lambda", type=float)
    p.add_argument("--target-sigma", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ruledrift")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="seeded benchmark sweep")
    p.add_argument("--config", help="YAML or JSON file with BenchmarkConfig fields")
    p.add_argument("--seed", type=int, help="overrides base_seed")
    p.add_argument("--out", help="results CSV (stdout if omitted)")
    p.add_argument("--reps", type=int)
    p.add_argument("--paper-scale", action="store_true", help=f"use {FULL_REPS} reps")
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true", help="record wall_ms (makes output nondeterministic)")
    p.add_argument("--summary", help="also write per-cell median/IQR CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="single classification transfer fit")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_svm_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("itr", help="treatment-rule transfer on CSVs, writes a value report")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--log1p-outcome", action="store_true")
    p.add_argument("--c0", type=float, default=0.01, help="overlap bound for propensities")
    p.add_argument("--reward-bound", type=float)
    _add_svm_flags(p)
    p.set_defaults(func=cmd_itr)

    p = sub.add_parser("diagnose", help="margin/noise exponent estimates for the unit-ball example")
    p.add_argument("--t-exponent", type=float, nargs="+", default=[1.0, 2.0])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n-mc", type=int, default=1_000_000)
    p.add_argument("--grid", type=float, nargs="+", default=list(DEFAULT_T_GRID))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
