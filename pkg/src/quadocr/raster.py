"""Image representation, binarization, bounding boxes, manifests and splits.

Gray images are 2-D ``uint8`` arrays. Binary images are 2-D ``bool`` arrays
where ``True`` marks a black (ink) pixel.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np


class EmptyImage(ValueError):
    """Raised when an image holds no black pixel."""


class OutOfBounds(ValueError):
    pass


class ClassTooSmall(ValueError):
    pass


class Rect(NamedTuple):
    """Inclusive pixel rectangle."""

    top: int
    left: int
    bottom: int
    right: int

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def width(self) -> int:
        return self.right - self.left + 1


@dataclass(frozen=True)
class LabeledSample:
    image: np.ndarray
    label: int
    source_id: str = ""


@dataclass
class Dataset:
    samples: list[LabeledSample] = field(default_factory=list)
    class_count: int = 0

    def __post_init__(self):
        for s in self.samples:
            if not 0 <= s.label < self.class_count:
                raise ValueError(
                    f"label {s.label} outside 0..{self.class_count - 1}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


# ---------------------------------------------------------------------------
# binarization


def otsu_threshold(img: np.ndarray) -> int:
    """Return the threshold ``t`` maximizing between-class variance.

    Pixels with intensity ``< t`` form the dark class. A single-intensity
    image has no separating threshold; 0 is returned so nothing turns black.
    """
    hist = np.bincount(np.asarray(img, dtype=np.uint8).ravel(), minlength=256)
    hist = hist.astype(np.float64)
    total = hist.sum()
    if total == 0 or np.count_nonzero(hist) < 2:
        return 0
    levels = np.arange(256, dtype=np.float64)
    # w0[t], mu0[t]: weight and mean of intensities < t
    w0 = np.concatenate(([0.0], np.cumsum(hist)[:-1]))
    s0 = np.concatenate(([0.0], np.cumsum(hist * levels)[:-1]))
    w1 = total - w0
    s1 = (hist * levels).sum() - s0
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros(256)
    mu0 = np.divide(s0, w0, out=np.zeros(256), where=valid)
    mu1 = np.divide(s1, w1, out=np.zeros(256), where=valid)
    between[valid] = w0[valid] * w1[valid] * (mu0[valid] - mu1[valid]) ** 2
    return int(np.argmax(between))


def binarize(img: np.ndarray, method: str = "otsu", threshold: int = 128) -> np.ndarray:
    """Threshold a gray image; a pixel is black iff intensity < threshold.

    ``method`` is ``"otsu"`` or ``"fixed"`` (uses ``threshold``).
    """
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty 2-D gray image")
    if method == "otsu":
        t = otsu_threshold(img)
    elif method == "fixed":
        t = int(threshold)
    else:
        raise ValueError(f"unknown binarization method {method!r}")
    return img.astype(np.int32) < t


# ---------------------------------------------------------------------------
# geometry


def bounding_box(img: np.ndarray) -> Rect:
    rows = np.flatnonzero(img.any(axis=1))
    if rows.size == 0:
        raise EmptyImage("image has no black pixel")
    cols = np.flatnonzero(img.any(axis=0))
    return Rect(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    h, w = img.shape
    if not (0 <= r.top <= r.bottom < h and 0 <= r.left <= r.right < w):
        raise OutOfBounds(f"{r} outside {h}x{w} image")
    return img[r.top:r.bottom + 1, r.left:r.right + 1].copy()


def crop_to_ink(img: np.ndarray) -> np.ndarray:
    return crop(img, bounding_box(img))


# ---------------------------------------------------------------------------
# splitting


def split_train_test(d: Dataset, train_fraction: float | Fraction = Fraction(2, 3),
                     seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified split: ``floor(c * train_fraction)`` samples of each class go
    to the training set, the rest to the test set. Sample order within each
    output follows the original dataset order."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    counts = d.class_counts()
    small = [k for k, c in enumerate(counts) if 0 < c < 2]
    if small:
        raise ClassTooSmall(f"classes with fewer than 2 samples: {small}")
    # exact rational arithmetic: in floats 90 * 0.7 floors to 62
    frac = Fraction(train_fraction).limit_denominator(10**6)
    rng = np.random.default_rng(seed)
    labels = d.labels
    in_train = np.zeros(len(d), dtype=bool)
    for k in range(d.class_count):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            continue
        n_train = idx.size * frac.numerator // frac.denominator
        chosen = rng.permutation(idx)[:n_train]
        in_train[chosen] = True
    train = [s for s, t in zip(d.samples, in_train) if t]
    test = [s for s, t in zip(d.samples, in_train) if not t]
    return Dataset(train, d.class_count), Dataset(test, d.class_count)


def make_fold_pairs(d: Dataset, pairs: int = 3,
                    train_fraction: float | Fraction = Fraction(2, 3),
                    seeds: Sequence[int] | None = None) -> list[tuple[Dataset, Dataset]]:
    """Independent seeded stratified splits, one per seed.

    These are repeated hold-out pairs, not a partition of the data.
    """
    if seeds is None:
        seeds = list(range(pairs))
    if len(seeds) != pairs:
        raise ValueError(f"need {pairs} seeds, got {len(seeds)}")
    return [split_train_test(d, train_fraction, s) for s in seeds]


# ---------------------------------------------------------------------------
# netpbm I/O


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        if buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif buf[pos:pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ValueError("truncated netpbm header")
    return buf[start:pos], pos


def read_netpbm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM (P5) as ``uint8`` or a PBM (P4) as ``bool``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_token(buf, 0)
    if magic not in (b"P4", b"P5"):
        raise ValueError(f"{path}: unsupported netpbm magic {magic!r}")
    w_tok, pos = _read_token(buf, pos)
    h_tok, pos = _read_token(buf, pos)
    w, h = int(w_tok), int(h_tok)
    if magic == b"P5":
        maxval_tok, pos = _read_token(buf, pos)
        maxval = int(maxval_tok)
        if maxval > 255:
            raise ValueError(f"{path}: 16-bit PGM not supported")
        pos += 1
        data = np.frombuffer(buf, dtype=np.uint8, count=h * w, offset=pos)
        img = data.reshape(h, w)
        if maxval != 255:
            img = (img.astype(np.uint32) * 255 // maxval).astype(np.uint8)
        return img.copy()
    pos += 1
    row_bytes = (w + 7) // 8
    data = np.frombuffer(buf, dtype=np.uint8, count=h * row_bytes, offset=pos)
    bits = np.unpackbits(data.reshape(h, row_bytes), axis=1)[:, :w]
    return bits.astype(bool)


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


def write_pbm(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=bool)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P4\n%d %d\n" % (w, h))
        fh.write(np.packbits(img, axis=1).tobytes())


def binary_to_gray(img: np.ndarray) -> np.ndarray:
    """Black ink on white paper."""
    return np.where(img, 0, 255).astype(np.uint8)


def load_binary(path: str | os.PathLike, method: str = "otsu",
                threshold: int = 128) -> np.ndarray:
    img = read_netpbm(path)
    if img.dtype == bool:
        return img
    return binarize(img, method, threshold)


# ---------------------------------------------------------------------------
# manifests


def read_manifest(path: str | os.PathLike) -> list[tuple[str, int]]:
    """Return ``(absolute_path, label)`` rows of a ``path,label`` CSV."""
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["path", "label"]:
            raise ValueError(f"{path}: manifest header must be 'path,label'")
        for i, row in enumerate(reader, start=2):
            label = int(row["label"])
            if label < 0:
                raise ValueError(f"{path}:{i}: negative label")
            rows.append((os.path.join(base, row["path"].strip()), label))
    return rows


def write_manifest(path: str | os.PathLike, rows: Sequence[tuple[str, int]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label"])
        for p, label in rows:
            writer.writerow([p, int(label)])


def load_dataset(manifest: str | os.PathLike, method: str = "otsu",
                 threshold: int = 128, class_count: int | None = None) -> Dataset:
    rows = read_manifest(manifest)
    samples = [LabeledSample(load_binary(p, method, threshold), label, p)
               for p, label in rows]
    if class_count is None:
        class_count = max((label for _, label in rows), default=-1) + 1
    return Dataset(samples, class_count)
