"""Deterministic synthetic glyphs used as a stand-in for scanned characters.

Templates are stroke programs in a unit square (x to the right, y down).
Rendering perturbs them (rotation, endpoint jitter, stroke thickness,
salt-and-pepper noise) and rasterizes with integer line drawing and a
square brush.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .raster import Dataset, LabeledSample, binary_to_gray, write_manifest, write_pgm


class TooManyClasses(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    p0: tuple[float, float]
    p1: tuple[float, float]


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    start: float  # degrees, 0 = +x, growing towards +y (clockwise on screen)
    end: float


@dataclass(frozen=True)
class Dot:
    center: tuple[float, float]
    radius: float = 0.08


Primitive = Line | Arc | Dot


@dataclass(frozen=True)
class GlyphTemplate:
    class_id: int
    name: str
    strokes: tuple[Primitive, ...]


@dataclass(frozen=True)
class PerturbParams:
    rotation: tuple[float, float] = (-10.0, 10.0)
    thickness: tuple[int, int] = (1, 3)
    jitter: float = 0.04
    noise: float = 0.001

    def __post_init__(self):
        if not 0 <= self.noise < 0.05:
            raise ValueError("noise probability must lie in [0, 0.05)")
        if self.thickness[0] < 1 or self.thickness[1] < self.thickness[0]:
            raise ValueError("thickness range must be 1 <= lo <= hi")


NO_PERTURBATION = PerturbParams(rotation=(0.0, 0.0), thickness=(2, 2), jitter=0.0, noise=0.0)


def _polyline(*pts: tuple[float, float]) -> tuple[Line, ...]:
    return tuple(Line(a, b) for a, b in zip(pts, pts[1:]))


TEMPLATES: tuple[GlyphTemplate, ...] = (
    GlyphTemplate(0, "bar", (Line((0.5, 0.15), (0.5, 0.85)),)),
    GlyphTemplate(1, "cross", (Line((0.5, 0.15), (0.5, 0.85)), Line((0.15, 0.5), (0.85, 0.5)))),
    GlyphTemplate(2, "ring", (Arc((0.5, 0.5), 0.33, 0, 360),)),
    GlyphTemplate(3, "L", _polyline((0.3, 0.15), (0.3, 0.85), (0.75, 0.85))),
    GlyphTemplate(4, "T", (Line((0.2, 0.15), (0.8, 0.15)), Line((0.5, 0.15), (0.5, 0.85)))),
    GlyphTemplate(5, "X", (Line((0.2, 0.15), (0.8, 0.85)), Line((0.8, 0.15), (0.2, 0.85)))),
    GlyphTemplate(6, "Z", _polyline((0.2, 0.15), (0.8, 0.15), (0.2, 0.85), (0.8, 0.85))),
    GlyphTemplate(7, "step", _polyline((0.15, 0.85), (0.15, 0.6), (0.45, 0.6), (0.45, 0.35),
                                       (0.75, 0.35), (0.75, 0.15))),
    GlyphTemplate(8, "hook", (Line((0.6, 0.15), (0.6, 0.65)), Arc((0.42, 0.65), 0.18, 0, 180))),
    GlyphTemplate(9, "dot-pair", (Dot((0.3, 0.5), 0.1), Dot((0.7, 0.5), 0.1))),
    GlyphTemplate(10, "triangle", _polyline((0.5, 0.15), (0.85, 0.85), (0.15, 0.85), (0.5, 0.15))),
    GlyphTemplate(11, "ring-bar", (Arc((0.5, 0.5), 0.28, 0, 360), Line((0.5, 0.1), (0.5, 0.9)))),
    GlyphTemplate(12, "cup", (Arc((0.5, 0.35), 0.32, 0, 180),
                              Line((0.18, 0.15), (0.18, 0.35)), Line((0.82, 0.15), (0.82, 0.35)))),
    GlyphTemplate(13, "comb", (Line((0.25, 0.15), (0.25, 0.85)), Line((0.25, 0.15), (0.75, 0.15)),
                               Line((0.25, 0.5), (0.65, 0.5)), Line((0.25, 0.85), (0.75, 0.85)))),
    GlyphTemplate(14, "open-c", (Arc((0.5, 0.5), 0.33, 45, 315),)),
    # near duplicate of open-c: the gap is only 10 degrees narrower
    GlyphTemplate(15, "open-c-narrow", (Arc((0.5, 0.5), 0.33, 40, 320),)),
)

CONFUSABLE_PAIR = (14, 15)


# ---------------------------------------------------------------------------
# rasterization


def _bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    pts = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        pts.append((r, c))
        if r == r1 and c == c1:
            return pts
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


class _Canvas:
    def __init__(self, size: int, thickness: int):
        self.size = size
        self.img = np.zeros((size, size), dtype=bool)
        lo = -((thickness - 1) // 2)
        self.brush = range(lo, lo + thickness)

    def to_px(self, x: float, y: float) -> tuple[int, int]:
        s = self.size - 1
        return int(round(y * s)), int(round(x * s))

    def stamp(self, r: int, c: int) -> None:
        for dr in self.brush:
            for dc in self.brush:
                rr, cc = r + dr, c + dc
                if 0 <= rr < self.size and 0 <= cc < self.size:
                    self.img[rr, cc] = True

    def line(self, a: tuple[float, float], b: tuple[float, float]) -> None:
        r0, c0 = self.to_px(*a)
        r1, c1 = self.to_px(*b)
        for r, c in _bresenham(r0, c0, r1, c1):
            self.stamp(r, c)

    def disc(self, center: tuple[float, float], radius: float) -> None:
        rc, cc = self.to_px(*center)
        rad = max(1.0, radius * (self.size - 1))
        span = int(math.ceil(rad))
        for dr in range(-span, span + 1):
            for dc in range(-span, span + 1):
                if dr * dr + dc * dc <= rad * rad:
                    self.stamp(rc + dr, cc + dc)


def _rotate(p: tuple[float, float], cos: float, sin: float) -> tuple[float, float]:
    x, y = p[0] - 0.5, p[1] - 0.5
    return (0.5 + cos * x - sin * y, 0.5 + sin * x + cos * y)


def gen_glyph(template: GlyphTemplate, canvas: int = 32, seed: int = 0,
              params: PerturbParams = PerturbParams()) -> np.ndarray:
    """Render one perturbed sample of ``template`` as a binary image."""
    if canvas < 16:
        raise ValueError("canvas must be at least 16 pixels")
    rng = np.random.default_rng(seed)
    angle = math.radians(rng.uniform(*params.rotation))
    cos, sin = math.cos(angle), math.sin(angle)
    thickness = int(rng.integers(params.thickness[0], params.thickness[1] + 1))
    cv = _Canvas(canvas, thickness)

    def jit(p: tuple[float, float]) -> tuple[float, float]:
        d = rng.uniform(-params.jitter, params.jitter, size=2)
        return _rotate((p[0] + d[0], p[1] + d[1]), cos, sin)

    for prim in template.strokes:
        if isinstance(prim, Line):
            cv.line(jit(prim.p0), jit(prim.p1))
        elif isinstance(prim, Arc):
            center = jit(prim.center)
            radius = prim.radius + rng.uniform(-params.jitter, params.jitter) / 2
            # angular jitter matches the endpoint displacement of a line
            spread = math.degrees(params.jitter / max(prim.radius, 1e-6))
            start = prim.start + rng.uniform(-spread, spread)
            end = prim.end + rng.uniform(-spread, spread)
            if prim.end - prim.start >= 360:
                start, end = prim.start, prim.end
            steps = max(8, int(math.ceil(abs(end - start) / 360 * 2 * math.pi
                                         * radius * canvas / 2)))
            pts = []
            for k in range(steps + 1):
                th = math.radians(start + (end - start) * k / steps) + angle
                pts.append((center[0] + radius * math.cos(th),
                            center[1] + radius * math.sin(th)))
            for a, b in zip(pts, pts[1:]):
                cv.line(a, b)
        else:
            cv.disc(jit(prim.center), prim.radius)

    img = cv.img
    if not img.any():
        img[canvas // 2, canvas // 2] = True
    if params.noise > 0:
        flips = rng.random(img.shape) < params.noise
        noisy = img ^ flips
        if noisy.any():
            img = noisy
    return img


def gen_dataset(n_classes: int = 10, per_class: int = 200,
                params: PerturbParams = PerturbParams(), seed: int = 0,
                canvas: int = 32) -> Dataset:
    """``per_class`` samples of each of the first ``n_classes`` templates,
    grouped by class."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if n_classes > len(TEMPLATES):
        raise TooManyClasses(f"only {len(TEMPLATES)} templates are built in")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=(n_classes, per_class))
    samples = []
    for k in range(n_classes):
        for i in range(per_class):
            img = gen_glyph(TEMPLATES[k], canvas, int(seeds[k, i]), params)
            samples.append(LabeledSample(img, k, f"{TEMPLATES[k].name}_{i:04d}"))
    return Dataset(samples, n_classes)


def write_dataset(d: Dataset, out_dir: str | os.PathLike,
                  manifest_name: str = "manifest.csv") -> str:
    """Write every sample as a PGM plus a ``path,label`` manifest; returns
    the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for idx, s in enumerate(d.samples):
        name = f"{idx:05d}_c{s.label:02d}.pgm"
        write_pgm(os.path.join(out_dir, name), binary_to_gray(s.image))
        rows.append((name, s.label))
    path = os.path.join(out_dir, manifest_name)
    write_manifest(path, rows)
    return path
