"""Merging of classes that are frequently mistaken for one another."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .evaluation import ConfusionMatrix, LabelOutOfRange
from .raster import Dataset, LabeledSample


class EmptyRow(ValueError):
    pass


@dataclass
class ClassGrouping:
    """``map[i]`` is the merged label of original class ``i``."""

    map: np.ndarray

    def __post_init__(self):
        self.map = np.asarray(self.map, dtype=np.int64)
        if self.map.size and sorted(set(self.map.tolist())) != list(range(self.map.max() + 1)):
            raise ValueError("merged labels must be dense 0..M-1")

    @property
    def original_count(self) -> int:
        return int(self.map.size)

    @property
    def merged_count(self) -> int:
        return int(self.map.max()) + 1 if self.map.size else 0

    def groups(self) -> list[list[int]]:
        return [np.flatnonzero(self.map == g).tolist() for g in range(self.merged_count)]

    def to_json(self) -> str:
        return json.dumps({
            "original_count": self.original_count,
            "map": self.map.tolist(),
            "merged_count": self.merged_count,
        })

    @classmethod
    def from_json(cls, text: str) -> "ClassGrouping":
        doc = json.loads(text)
        g = cls(np.array(doc["map"], dtype=np.int64))
        if g.original_count != doc["original_count"] or g.merged_count != doc["merged_count"]:
            raise ValueError("grouping counts disagree with the map")
        return g

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ClassGrouping":
        with open(path) as fh:
            return cls.from_json(fh.read())


def mutual_confusion(c: ConfusionMatrix, i: int, j: int) -> float:
    """``(C_ij + C_ji) / (support_i + support_j)``."""
    if i == j:
        raise ValueError("mutual confusion needs two distinct classes")
    support = c.support
    if support[i] == 0 or support[j] == 0:
        raise EmptyRow(f"class {i if support[i] == 0 else j} has no samples")
    return float(c.counts[i, j] + c.counts[j, i]) / float(support[i] + support[j])


def mutual_confusion_matrix(c: ConfusionMatrix) -> np.ndarray:
    """Symmetric matrix of pairwise rates; the diagonal is zero."""
    n = c.n_classes
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = mutual_confusion(c, i, j)
    return out


def build_grouping(c: ConfusionMatrix, tau: float) -> ClassGrouping:
    """Group classes into the connected components of the graph whose edges
    join pairs with mutual confusion ``>= tau``. Groups are numbered in order
    of their smallest member."""
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    rates = mutual_confusion_matrix(c)
    n = c.n_classes
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if rates[i, j] >= tau:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    roots: dict[int, int] = {}
    mapping = np.empty(n, dtype=np.int64)
    for i in range(n):
        mapping[i] = roots.setdefault(find(i), len(roots))
    return ClassGrouping(mapping)


def identity_grouping(n: int) -> ClassGrouping:
    return ClassGrouping(np.arange(n))


def apply_grouping(g: ClassGrouping, d: Dataset) -> Dataset:
    bad = [s.label for s in d.samples if not 0 <= s.label < g.original_count]
    if bad:
        raise LabelOutOfRange(f"labels {sorted(set(bad))} outside the grouping")
    samples = [LabeledSample(s.image, int(g.map[s.label]), s.source_id) for s in d.samples]
    return Dataset(samples, g.merged_count)


def apply_to_labels(g: ClassGrouping, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= g.original_count):
        raise LabelOutOfRange("labels outside the grouping")
    return g.map[y]
