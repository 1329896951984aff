"""Dataset container, file loaders, standardization and the synthetic generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

TASKS = ("regression", "classification")


class ParseError(ValueError):
    """Malformed input file. ``row`` and ``col`` are 1-based when known."""

    def __init__(self, message: str, row: Optional[int] = None, col: Optional[int] = None):
        where = ""
        if row is not None and col is not None:
            where = f" at (row {row}, col {col})"
        elif row is not None:
            where = f" at row {row}"
        super().__init__(message + where)
        self.row = row
        self.col = col


@dataclass(frozen=True)
class Dataset:
    """Dense inputs ``X`` (d features x n samples) and an output vector ``y``.

    For classification ``y`` holds integer labels ``0..C-1`` and ``classes``
    keeps the original label for each index.
    """

    X: np.ndarray
    y: np.ndarray
    task: str = "regression"
    feature_names: Optional[list[str]] = None
    classes: Optional[np.ndarray] = None
    constant: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D (d x n), got shape {X.shape}")
        d, n = X.shape
        if d < 1 or n < 2:
            raise ValueError(f"need d >= 1 and n >= 2, got d={d}, n={n}")
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[0]
            raise ValueError(f"non-finite value in feature {bad[0]}, sample {bad[1]}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")

        if self.task == "regression":
            y = np.asarray(self.y, dtype=np.float64)
            if not np.all(np.isfinite(y)):
                raise ValueError("non-finite output value")
        else:
            y = np.asarray(self.y)
            if not np.issubdtype(y.dtype, np.integer):
                raise ValueError("classification labels must be integer class indices")
            y = y.astype(np.int64)
            if y.size and y.min() < 0:
                raise ValueError("class indices must be non-negative")
            counts = np.bincount(y)
            empty = np.flatnonzero(counts == 0)
            if empty.size:
                raise ValueError(f"empty class {int(empty[0])}")
        if y.shape != (n,):
            raise ValueError(f"y must have length n={n}, got shape {y.shape}")
        if self.feature_names is not None and len(self.feature_names) != d:
            raise ValueError("feature_names length does not match d")

        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.constant is None:
            object.__setattr__(self, "constant", np.ptp(X, axis=1) == 0)

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task != "classification":
            raise AttributeError("n_classes is only defined for classification")
        return int(self.y.max()) + 1

    def feature_name(self, k: int) -> str:
        if self.feature_names is not None:
            return self.feature_names[k]
        return f"x{k}"

    def subset(self, features: Sequence[int]) -> "Dataset":
        """Dataset restricted to ``features`` (in the given order)."""
        idx = np.asarray(features, dtype=np.int64)
        names = None
        if self.feature_names is not None:
            names = [self.feature_names[i] for i in idx]
        return replace(self, X=self.X[idx], feature_names=names, constant=self.constant[idx])


def _encode_labels(tokens: list[str]) -> tuple[np.ndarray, np.ndarray]:
    uniq = sorted(set(tokens))
    try:
        # numeric labels sort numerically, so {-1, +1} maps to {0, 1}
        uniq = sorted(uniq, key=float)
        classes = np.array([float(u) for u in uniq])
        if np.all(classes == np.round(classes)):
            classes = classes.astype(np.int64)
        values = [float(t) for t in tokens]
        lookup = {float(u): i for i, u in enumerate(uniq)}
        y = np.array([lookup[v] for v in values], dtype=np.int64)
    except ValueError:
        classes = np.array(uniq, dtype=object)
        lookup = {u: i for i, u in enumerate(uniq)}
        y = np.array([lookup[t] for t in tokens], dtype=np.int64)
    return y, classes


def _make_dataset(rows: list[list[float]], labels: list[str], task: str,
                  names: Optional[list[str]]) -> Dataset:
    if not rows:
        raise ParseError("no samples found")
    X = np.array(rows, dtype=np.float64).T
    if task == "classification":
        y, classes = _encode_labels(labels)
        return Dataset(X, y, task, names, classes)
    y = []
    for i, tok in enumerate(labels):
        try:
            y.append(float(tok))
        except ValueError:
            raise ParseError(f"non-numeric output {tok!r}", row=i + 1) from None
    return Dataset(X, np.array(y), task, names)


def _load_csv(path: Path, task: str, header: bool) -> Dataset:
    rows: list[list[float]] = []
    labels: list[str] = []
    names = None
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if header and names is None:
                names = [c.strip() for c in record[:-1]]
                width = len(record)
                continue
            if width is None:
                width = len(record)
            if len(record) != width:
                raise ParseError(f"ragged row: expected {width} columns, got {len(record)}",
                                 row=lineno)
            if width < 2:
                raise ParseError("need at least one feature column plus the output", row=lineno)
            vals = []
            for col, cell in enumerate(record[:-1], start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell.strip()!r}",
                                     row=lineno, col=col) from None
            rows.append(vals)
            labels.append(record[-1].strip())
    return _make_dataset(rows, labels, task, names)


def _load_libsvm(path: Path, task: str, n_features: Optional[int]) -> Dataset:
    entries: list[dict[int, float]] = []
    labels: list[str] = []
    top = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            labels.append(parts[0])
            row = {}
            for col, tok in enumerate(parts[1:], start=2):
                try:
                    idx, val = tok.split(":", 1)
                    idx, val = int(idx), float(val)
                except ValueError:
                    raise ParseError(f"malformed entry {tok!r}", row=lineno, col=col) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} is not 1-based", row=lineno, col=col)
                row[idx - 1] = val
                top = max(top, idx)
            entries.append(row)
    d = n_features if n_features is not None else top
    if d < top:
        raise ParseError(f"feature index {top} exceeds n_features={d}")
    rows = []
    for row in entries:
        dense = [0.0] * d
        for k, v in row.items():
            dense[k] = v
        rows.append(dense)
    return _make_dataset(rows, labels, task, None)


def load_dataset(path, format: str = "csv", task: str = "regression", header: bool = False,
                 n_features: Optional[int] = None) -> Dataset:
    """Read a dense CSV (one sample per line, last column = output) or a LIBSVM file.

    Classification labels are re-indexed to ``0..C-1``; the original labels are
    kept in ``Dataset.classes``.
    """
    path = Path(path)
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if format in ("csv", "dense-csv"):
        return _load_csv(path, task, header)
    if format == "libsvm":
        return _load_libsvm(path, task, n_features)
    raise ValueError(f"unknown format {format!r}")


def _zscore_rows(A: np.ndarray, constant: np.ndarray) -> np.ndarray:
    out = A.copy()
    live = ~constant
    mean = A[live].mean(axis=1, keepdims=True)
    std = A[live].std(axis=1, ddof=1, keepdims=True)
    out[live] = (A[live] - mean) / std
    return out


def standardize(ds: Dataset) -> Dataset:
    """Center each feature row and scale it to unit sample standard deviation.

    Constant rows are left untouched and flagged in ``Dataset.constant``.
    Regression outputs are standardized the same way; class labels are not.
    """
    # rows whose spread underflows the sample std are treated as constant too
    constant = (np.ptp(ds.X, axis=1) == 0) | ~(ds.X.std(axis=1, ddof=1) > 0)
    X = _zscore_rows(ds.X, constant)
    y = ds.y
    if ds.task == "regression" and np.ptp(y) > 0:
        y = (y - y.mean()) / y.std(ddof=1)
    return replace(ds, X=X, y=y, constant=constant)


def generate_synthetic(n: int, d_base: int, d_redundant: int, noise: float = 0.1,
                       seed: int = 0, copy_noise: float = 0.01,
                       shared_noise: bool = True) -> Dataset:
    """Regression data with target ``x0 * exp(x1) + x2 + noise * e``.

    Features ``d_base .. d_base + d_redundant - 1`` are copies
    ``x_k + copy_noise * e`` of the first ``d_redundant`` base features. With
    ``shared_noise`` a single standard-normal vector ``e`` is used for every
    copy and for the target; otherwise each gets an independent draw.
    """
    if d_base < 3:
        raise ValueError("d_base must be at least 3 (the target uses three features)")
    if not 0 <= d_redundant <= d_base:
        raise ValueError("d_redundant must lie in [0, d_base]")
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((d_base, n))
    if shared_noise:
        e = rng.standard_normal(n)
        copies = base[:d_redundant] + copy_noise * e
        y = base[0] * np.exp(base[1]) + base[2] + noise * e
    else:
        copies = base[:d_redundant] + copy_noise * rng.standard_normal((d_redundant, n))
        y = base[0] * np.exp(base[1]) + base[2] + noise * rng.standard_normal(n)
    X = np.vstack([base, copies])
    names = [f"X{k + 1}" for k in range(d_base + d_redundant)]
    return Dataset(X, y, "regression", names)
