"""Feature matrices on disk.

Two formats are supported:

* dense CSV: optional ``#`` comment lines, a ``label,v0,...`` header, then
  one ``label,v0,v1,...`` row per sample;
* sparse text: ``label index:value ...`` with 1-based indices and zero
  values omitted, as read by common SVM tools.
"""
from __future__ import annotations

import os
from typing import Mapping

import numpy as np


def _fmt(v: float) -> str:
    # shortest repr that round-trips a double (always >= 9 significant digits
    # of precision)
    return repr(float(v))


def write_dense(path: str | os.PathLike, X: np.ndarray, y: np.ndarray,
                meta: Mapping[str, object] | None = None) -> None:
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(["label"] + [f"v{i}" for i in range(X.shape[1])]) + "\n")
        for label, row in zip(y, X):
            fh.write(",".join([str(int(label))] + [_fmt(v) for v in row]) + "\n")


def read_dense(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray, dict[str, str]]:
    """Return ``(X, y, meta)``; ``meta`` comes from ``key=value`` comments."""
    meta: dict[str, str] = {}
    labels, rows = [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            if line.startswith("label"):
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(parts)}")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), (width or 1) - 1)
    return X, np.array(labels, dtype=np.int64), meta


def format_sparse_row(row: np.ndarray) -> str:
    return " ".join(f"{i + 1}:{_fmt(v)}" for i, v in enumerate(row) if v != 0)


def parse_sparse_row(tokens: list[str], n_features: int) -> np.ndarray:
    x = np.zeros(n_features)
    for tok in tokens:
        idx, val = tok.split(":", 1)
        i = int(idx) - 1
        if not 0 <= i < n_features:
            raise ValueError(f"feature index {idx} outside 1..{n_features}")
        x[i] = float(val)
    return x


def write_sparse(path: str | os.PathLike, X: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w") as fh:
        for label, row in zip(y, np.asarray(X, dtype=np.float64)):
            body = format_sparse_row(row)
            fh.write(f"{int(label)} {body}".rstrip() + "\n")


def read_sparse(path: str | os.PathLike, n_features: int | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
    """Read a sparse file. Without ``n_features`` the width is the largest
    index present."""
    labels, entries = [], []
    with open(path) as fh:
        for line in fh:
            tokens = line.split()
            if not tokens:
                continue
            labels.append(int(float(tokens[0])))
            entries.append(tokens[1:])
    if n_features is None:
        n_features = max((int(t.split(":", 1)[0]) for e in entries for t in e), default=0)
    X = np.vstack([parse_sparse_row(e, n_features) for e in entries]) if entries \
        else np.zeros((0, n_features))
    return X, np.array(labels, dtype=np.int64)


def read_features(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read either format, sniffing the first data line."""
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if s and not s.startswith("#"):
                break
        else:
            s = ""
    if s.startswith("label") or "," in s:
        X, y, _ = read_dense(path)
        return X, y
    return read_sparse(path)
