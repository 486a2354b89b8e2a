"""Datasets, CSV schemas and the random half split.

Classification CSV: header ``x1,...,xd,y``.
ITR CSV: header ``x1,...,xd,t,r[,pi]``.

Labels and treatments may be coded {0,1} or {-1,+1} on disk; in memory
they are always {-1,+1}.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np


class SchemaError(ValueError):
    pass


class ParseError(ValueError):
    pass


class LabelError(ValueError):
    pass


class PropensityError(ValueError):
    pass


class BoundError(ValueError):
    pass


def _as_sign_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    bad = ~np.isin(arr, (-1.0, 1.0))
    if bad.any():
        raise LabelError(f"{what} must be -1 or +1 (first offending index {int(np.argmax(bad))})")
    return arr


def _as_features(features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise SchemaError(f"features must be a non-empty n x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ParseError("features contain non-finite values")
    return x


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled feature matrix with optional nonnegative sample weights."""

    features: np.ndarray
    labels: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        x = _as_features(self.features)
        y = _as_sign_vector(self.labels, "labels")
        if y.shape[0] != x.shape[0]:
            raise SchemaError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        w = None
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != x.shape[0]:
                raise SchemaError("weights length does not match number of rows")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite and nonnegative")
        _freeze(x, y, w)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def sample_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n)
        return self.weights

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        w = None if self.weights is None else self.weights[idx]
        return Dataset(self.features[idx], self.labels[idx], w)

    def with_weights(self, weights) -> "Dataset":
        return Dataset(self.features, self.labels, weights)

    @staticmethod
    def concat(parts: Sequence["Dataset"]) -> "Dataset":
        x = np.vstack([p.features for p in parts])
        y = np.concatenate([p.labels for p in parts])
        if all(p.weights is None for p in parts):
            w = None
        else:
            w = np.concatenate([p.sample_weights for p in parts])
        return Dataset(x, y, w)


@dataclass(frozen=True, eq=False)
class ItrDataset:
    """(covariates, treatment, reward) triplets with optional propensities.

    ``propensities`` holds P(T=+1 | X) for each row. ``reward_bound`` is the
    declared M with |R| <= M; None means undeclared.
    """

    features: np.ndarray
    treatments: np.ndarray
    rewards: np.ndarray
    propensities: Optional[np.ndarray] = None
    reward_bound: Optional[float] = None

    def __post_init__(self):
        x = _as_features(self.features)
        t = _as_sign_vector(self.treatments, "treatments")
        r = np.asarray(self.rewards, dtype=float).ravel()
        if not (t.shape[0] == r.shape[0] == x.shape[0]):
            raise SchemaError("features, treatments and rewards must have equal length")
        if not np.all(np.isfinite(r)):
            raise ParseError("rewards contain non-finite values")
        if self.reward_bound is not None and np.any(np.abs(r) > self.reward_bound):
            i = int(np.argmax(np.abs(r) > self.reward_bound))
            raise BoundError(f"reward {r[i]} at row {i} exceeds declared bound {self.reward_bound}")
        p = None
        if self.propensities is not None:
            p = np.asarray(self.propensities, dtype=float).ravel()
            if p.shape[0] != x.shape[0]:
                raise SchemaError("propensities length does not match number of rows")
            bad = ~((p > 0) & (p < 1))
            if bad.any():
                i = int(np.argmax(bad))
                raise PropensityError(f"propensity {p[i]} at row {i} is outside (0, 1)")
        _freeze(x, t, r, p)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "treatments", t)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "propensities", p)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "ItrDataset":
        idx = np.asarray(idx, dtype=int)
        p = None if self.propensities is None else self.propensities[idx]
        return ItrDataset(self.features[idx], self.treatments[idx], self.rewards[idx], p, self.reward_bound)

    def with_propensities(self, propensities) -> "ItrDataset":
        return ItrDataset(self.features, self.treatments, self.rewards, propensities, self.reward_bound)


AnyDataset = Union[Dataset, ItrDataset]


@dataclass(frozen=True, eq=False)
class SplitPair:
    first: AnyDataset
    second: AnyDataset
    seed: int
    first_index: np.ndarray = field(repr=False)
    second_index: np.ndarray = field(repr=False)


def split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random partition of range(n) into ceil(n/2) and floor(n/2) sorted indices."""
    if n < 2:
        raise ValueError(f"need at least 2 rows to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    k = (n + 1) // 2
    return np.sort(perm[:k]), np.sort(perm[k:])


def split_half(data: AnyDataset, seed: int) -> SplitPair:
    """Split into a calibration half (the larger one for odd n) and a holdout half."""
    a, b = split_indices(data.n, seed)
    return SplitPair(data.subset(a), data.subset(b), seed, a, b)


# CSV I/O ---------------------------------------------------------------

def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def _feature_columns(header: list[str], path) -> list[int]:
    cols = []
    j = 1
    while f"x{j}" in header:
        cols.append(header.index(f"x{j}"))
        j += 1
    if not cols:
        raise SchemaError(f"{path}: no feature columns x1..xd in header {header}")
    extra = [h for h in header if h.startswith("x") and h[1:].isdigit() and int(h[1:]) >= j]
    if extra:
        raise SchemaError(f"{path}: feature columns are not contiguous x1..x{j - 1} (found {extra})")
    return cols


def _parse_matrix(rows, cols: list[int], path) -> np.ndarray:
    out = np.empty((len(rows), len(cols)))
    for i, row in enumerate(rows, start=1):
        for k, c in enumerate(cols):
            try:
                out[i - 1, k] = float(row[c])
            except (ValueError, IndexError):
                cell = row[c] if c < len(row) else "<missing>"
                raise ParseError(f"{path}: row {i}: non-numeric cell {cell!r}") from None
            if not math.isfinite(out[i - 1, k]):
                raise ParseError(f"{path}: row {i}: non-finite value {row[c]!r}")
    return out


def _recode_signs(values: np.ndarray, what: str, path) -> np.ndarray:
    out = values.copy()
    for i, v in enumerate(values, start=1):
        if v == 0:
            out[i - 1] = -1.0
        elif v in (-1.0, 1.0):
            pass
        else:
            raise LabelError(f"{path}: row {i}: {what} {v:g} not in {{0,1,-1,+1}}")
    return out


def load_classification_csv(path, label_column: str = "y") -> Dataset:
    header, rows = _read_rows(path)
    if label_column not in header:
        raise SchemaError(f"{path}: missing label column {label_column!r}")
    xcols = _feature_columns(header, path)
    x = _parse_matrix(rows, xcols, path)
    y = _parse_matrix(rows, [header.index(label_column)], path)[:, 0]
    return Dataset(x, _recode_signs(y, "label", path))


def load_itr_csv(path, reward_bound: Optional[float] = None) -> ItrDataset:
    header, rows = _read_rows(path)
    for col in ("t", "r"):
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    xcols = _feature_columns(header, path)
    x = _parse_matrix(rows, xcols, path)
    t = _recode_signs(_parse_matrix(rows, [header.index("t")], path)[:, 0], "treatment", path)
    r = _parse_matrix(rows, [header.index("r")], path)[:, 0]
    pi = None
    if "pi" in header:
        pi = _parse_matrix(rows, [header.index("pi")], path)[:, 0]
        bad = ~((pi > 0) & (pi < 1))
        if bad.any():
            i = int(np.argmax(bad)) + 1
            raise PropensityError(f"{path}: row {i}: propensity {pi[i - 1]:g} outside (0, 1)")
    return ItrDataset(x, t, r, pi, reward_bound)


def _fmt(v: float) -> str:
    return repr(float(v))


def save_classification_csv(data: Dataset, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(data.d)] + ["y"])
        for xi, yi in zip(data.features, data.labels):
            w.writerow([_fmt(v) for v in xi] + [int(yi)])


def save_itr_csv(data: ItrDataset, path) -> None:
    path = Path(path)
    has_pi = data.propensities is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(data.d)] + ["t", "r"] + (["pi"] if has_pi else []))
        for i in range(data.n):
            row = [_fmt(v) for v in data.features[i]] + [int(data.treatments[i]), _fmt(data.rewards[i])]
            if has_pi:
                row.append(_fmt(data.propensities[i]))
            w.writerow(row)
