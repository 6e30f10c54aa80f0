"""Dataset ingestion: LIBSVM sparse text, comma-delimited tables, standardisation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import ParseError


@dataclass(frozen=True)
class Dataset:
    features: Union[np.ndarray, sp.csr_matrix]
    labels: np.ndarray
    feature_stats: Optional[dict] = None
    name: str = ""

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d_in(self) -> int:
        return self.features.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.features)

    def dense_features(self) -> np.ndarray:
        if self.is_sparse:
            return self.features.toarray()
        return np.asarray(self.features, dtype=np.float64)


def _as_text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8")
    return data


def map_binary_labels(labels: np.ndarray) -> np.ndarray:
    """Map a two-valued label vector onto {-1, +1}, smaller value -> -1."""
    values = np.unique(labels)
    if np.all(np.isin(values, (-1.0, 1.0))):
        return labels.astype(np.float64)
    if values.size == 2:
        return np.where(labels == values[1], 1.0, -1.0)
    raise ParseError(f"cannot map labels {values.tolist()} onto -1/+1")


def parse_libsvm(data, label_mode: str = "binary", n_features: Optional[int] = None) -> Dataset:
    """Read ``<label> <index>:<value> ...`` lines with 1-based indices.

    ``label_mode`` is ``"binary"`` (labels mapped onto -1/+1) or ``"raw"``.
    """
    if label_mode not in ("binary", "raw"):
        raise ValueError(f"unknown label_mode {label_mode!r}")
    text = _as_text(data)
    labels, indptr, indices, values = [], [0], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"non-numeric label {tokens[0]!r}", line=lineno) from None
        prev = 0
        for tok in tokens[1:]:
            idx_txt, sep, val_txt = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_txt), float(val_txt)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", line=lineno) from None
            if idx <= prev:
                raise ParseError(f"feature index {idx} not increasing (previous {prev})", line=lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", line=lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        indptr.append(len(indices))
    if not labels:
        raise ParseError("empty file")
    width = max(indices, default=-1) + 1
    if n_features is not None:
        if n_features < width:
            raise ParseError(f"feature index {width} exceeds n_features={n_features}")
        width = n_features
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), width),
    )
    y = np.asarray(labels, dtype=np.float64)
    if label_mode == "binary":
        y = map_binary_labels(y)
    return Dataset(X, y)


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def serialize_libsvm(ds: Dataset) -> str:
    X = ds.features if ds.is_sparse else sp.csr_matrix(ds.features)
    lines = []
    for r in range(X.shape[0]):
        lo, hi = X.indptr[r], X.indptr[r + 1]
        pairs = " ".join(f"{j + 1}:{_fmt(v)}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        lab = ds.labels[r]
        head = "+1" if lab == 1 else _fmt(lab)
        lines.append(f"{head} {pairs}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def parse_csv(data, label_column: Union[int, str] = -1, has_header: bool = True) -> Dataset:
    """Comma-separated numeric table; ``label_column`` by index or header name."""
    text = _as_text(data)
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file")
    header = None
    if has_header:
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise ParseError("no data rows after header")
    width = len(header) if header is not None else len(rows[0][1])
    if isinstance(label_column, str):
        if header is None or label_column not in header:
            raise ParseError(f"label column {label_column!r} not found in header")
        label_idx = header.index(label_column)
    else:
        label_idx = label_column % width if -width <= label_column < width else None
        if label_idx is None:
            raise ParseError(f"label column {label_column} out of range for {width} columns")
    table = np.empty((len(rows), width))
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"row has {len(cells)} cells, expected {width}", line=lineno)
        for c, cell in enumerate(cells):
            cell = cell.strip()
            if not cell:
                raise ParseError("missing value", line=lineno, column=c + 1)
            try:
                table[r, c] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", line=lineno, column=c + 1) from None
    keep = [c for c in range(width) if c != label_idx]
    stats = None
    if header is not None:
        stats = {"columns": [header[c] for c in keep]}
    return Dataset(table[:, keep], table[:, label_idx].copy(), stats)


def standardize(ds: Dataset) -> Dataset:
    """Column-wise (x - mean) / std with population std; constant columns are dropped."""
    if ds.n < 2:
        raise ValueError("standardization needs at least two rows")
    X = ds.dense_features()
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    kept = np.flatnonzero(~const)
    Z = (X[:, kept] - mean[kept]) / std[kept]
    stats = dict(ds.feature_stats or {})
    stats.update(mean=mean, std=std, kept=kept, dropped=np.flatnonzero(const))
    return replace(ds, features=Z, feature_stats=stats)


def binarize_labels(ds: Dataset, threshold: float) -> Dataset:
    """+1 where label > threshold, else -1."""
    return replace(ds, labels=np.where(ds.labels > threshold, 1.0, -1.0))


def load_dataset(path, fmt: Optional[str] = None, **kwargs) -> Dataset:
    """Read a LIBSVM or CSV file; format inferred from the suffix when not given."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    raw = path.read_bytes()
    ds = parse_csv(raw, **kwargs) if fmt == "csv" else parse_libsvm(raw, **kwargs)
    return replace(ds, name=path.stem)
