"""One-axis sweeps for the three simulation settings.

Each sweep varies one of dimension, shift or share ratio and holds the
others at d=5, n_Q=400 (share 5) and theta=1 (translation) or pi/6 (rotation).

    python3 scripts/sweeps.py --setting a --axis share --reps 20 --out results/
"""
import argparse
import logging
import math
from pathlib import Path

from ruledrift.bench import (
    FULL_DIMS,
    FULL_SHARES,
    ROTATION_SHIFTS,
    SUPPLEMENT_DIMS,
    TRANSLATION_SHIFTS,
    BenchmarkConfig,
    Grid,
    run_benchmark,
    summarize,
    summary_csv,
)
from ruledrift.simgen import SimSetting

SETTINGS = {
    "a": SimSetting("linear", "translation", "logistic"),
    "b": SimSetting("linear", "noisy_translation", "deterministic"),
    "c": SimSetting("quadratic", "rotation", "deterministic"),
}
DEFAULT_SHIFT = {"a": 1.0, "b": 1.0, "c": math.pi / 6}


def grid_for(setting: str, axis: str, supplement: bool) -> Grid:
    shift = (DEFAULT_SHIFT[setting],)
    if axis == "dim":
        return Grid(SUPPLEMENT_DIMS if supplement else FULL_DIMS, shift, (5,))
    if axis == "shift":
        return Grid((5,), ROTATION_SHIFTS if setting == "c" else TRANSLATION_SHIFTS, (5,))
    return Grid((5,), shift, FULL_SHARES)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--setting", choices=sorted(SETTINGS), required=True)
    ap.add_argument("--axis", choices=("dim", "shift", "share"), required=True)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--supplement", action="store_true", help="dimension grid up to 30")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"setting_{args.setting}_{args.axis}"
    cfg = BenchmarkConfig(setting=SETTINGS[args.setting], grid=grid_for(args.setting, args.axis, args.supplement),
                          reps=args.reps, base_seed=args.seed, workers=args.workers,
                          output=str(out / f"{stem}.csv"))
    rows = run_benchmark(cfg, progress=lambda r: logging.info("d=%s shift=%.3g share=%g rep=%d",
                                                              r[0].dim, r[0].shift, r[0].share, r[0].rep))
    text = summary_csv(summarize(rows))
    (out / f"{stem}_summary.csv").write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
