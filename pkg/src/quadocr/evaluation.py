"""Confusion matrices and macro recognition accuracy."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np


class LabelOutOfRange(ValueError):
    pass


class EmptyMatrix(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    """``counts[i, j]`` = samples of true class ``i`` predicted as ``j``."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be non-negative")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def true_positives(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    @property
    def false_negatives(self) -> np.ndarray:
        return self.support - self.true_positives

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            for row in self.counts:
                fh.write(",".join(str(int(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "ConfusionMatrix":
        with open(path) as fh:
            rows = [[int(v) for v in line.split(",")] for line in fh if line.strip()]
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), -1))


def confusion(preds, truth, n: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if preds.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    for name, arr in (("prediction", preds), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise LabelOutOfRange(f"{name} label outside 0..{n - 1}")
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (truth, preds), 1)
    return ConfusionMatrix(counts)


def recalls(c: ConfusionMatrix) -> np.ndarray:
    """Per-class ``TP / (TP + FN)``; NaN for classes without samples."""
    support = c.support.astype(np.float64)
    out = np.full(c.n_classes, np.nan)
    nz = support > 0
    out[nz] = c.true_positives[nz] / support[nz]
    return out


def macro_accuracy(c: ConfusionMatrix) -> float:
    """Mean per-class recall in percent over classes that have samples.

    ``FN_k`` is the off-diagonal row sum, so ``TP_k + FN_k`` is the class
    support.
    """
    r = recalls(c)
    present = ~np.isnan(r)
    if not present.any():
        raise EmptyMatrix("no class has any sample")
    return float(r[present].mean() * 100.0)


@dataclass
class EvalReport:
    n_classes: int
    support: list[int]
    recall: list[float | None]
    overall_accuracy: float
    macro_accuracy: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def report(c: ConfusionMatrix) -> EvalReport:
    total = int(c.counts.sum())
    r = recalls(c)
    overall = 100.0 * float(np.trace(c.counts)) / total if total else 0.0
    macro = macro_accuracy(c) if total else 0.0
    return EvalReport(
        n_classes=c.n_classes,
        support=[int(v) for v in c.support],
        recall=[None if np.isnan(v) else float(v) for v in r],
        overall_accuracy=overall,
        macro_accuracy=macro,
    )
