"""Shadow and longest-run features over a centre-of-gravity quad-tree.

A character image is cropped to its ink bounding box and partitioned
recursively: each region is cut into four by a horizontal and a vertical
line through the centre of gravity of its black pixels. Every node of a
depth-1 tree contributes 24 shadow features and every node of a depth-2
tree contributes 4 longest-run features, 5*24 + 21*4 = 204 in total.

Octant and side order used by the shadow features (clockwise from the
top-left corner, image rows growing downwards)::

    0 ULU  top side, left half        4 LRL  bottom side, right half
    1 URU  top side, right half       5 LLD  bottom side, left half
    2 URR  right side, upper half     6 LLL  left side, lower half
    3 LRR  right side, lower half     7 ULL  left side, upper half

Each octant is a right triangle with one leg on the box border, one leg on
a midline and its hypotenuse on a box diagonal. Its three features are
the shadows on those sides, in that order: (border, midline, diagonal).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .raster import EmptyImage, Rect, bounding_box, crop

OCTANTS = ("ULU", "URU", "URR", "LRR", "LRL", "LLD", "LLL", "ULL")
SIDES = ("border", "midline", "diagonal")
RUN_DIRECTIONS = ("row", "column", "main_diagonal", "anti_diagonal")
SHADOW_PER_NODE = 24
RUNS_PER_NODE = 4


@dataclass(frozen=True)
class FeatureConfig:
    shadow_depth: int = 1
    run_depth: int = 2

    def __post_init__(self):
        if self.shadow_depth < 0 or self.run_depth < 0:
            raise ValueError("quad-tree depths must be >= 0")

    @property
    def n_features(self) -> int:
        return (SHADOW_PER_NODE * tree_node_count(self.shadow_depth)
                + RUNS_PER_NODE * tree_node_count(self.run_depth))


@dataclass(frozen=True)
class Region:
    """A rectangular window ``box`` of a binary ``parent`` image."""

    parent: np.ndarray
    box: Rect

    @classmethod
    def whole(cls, img: np.ndarray) -> "Region":
        h, w = img.shape
        return cls(img, Rect(0, 0, h - 1, w - 1))

    @property
    def height(self) -> int:
        return self.box.height

    @property
    def width(self) -> int:
        return self.box.width

    @property
    def pixels(self) -> np.ndarray:
        b = self.box
        return self.parent[b.top:b.bottom + 1, b.left:b.right + 1]


@dataclass
class QuadTree:
    region: Region
    cg: tuple[float, float]
    children: list["QuadTree"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def depth_below(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth_below for c in self.children)

    def breadth_first(self) -> Iterator["QuadTree"]:
        level = [self]
        while level:
            yield from level
            level = [c for node in level for c in node.children]

    def leaves(self) -> list["QuadTree"]:
        return [n for n in self.breadth_first() if n.is_leaf]


def tree_node_count(depth: int) -> int:
    return sum(4 ** i for i in range(depth + 1))


# ---------------------------------------------------------------------------
# quad-tree


def center_of_gravity(r: Region) -> tuple[float, float]:
    """Mean (row, column) of the black pixels, relative to the region box.

    An empty region yields its geometric centre.
    """
    px = r.pixels
    rows, cols = np.nonzero(px)
    if rows.size == 0:
        return ((r.height - 1) / 2, (r.width - 1) / 2)
    return (float(rows.sum()) / rows.size, float(cols.sum()) / cols.size)


def _split(extent: int, c: float) -> tuple[tuple[int, int], tuple[int, int]]:
    # relative inclusive spans of the low and high halves; a single row or
    # column cannot be split so both halves alias it
    if extent == 1:
        return (0, 0), (0, 0)
    cut = min(int(np.floor(c)) + 1, extent - 1)
    return (0, cut - 1), (cut, extent - 1)


def quad_partition(r: Region, depth: int) -> QuadTree:
    """Recursively split ``r`` through its centre of gravity.

    Children are ordered top-left, top-right, bottom-left, bottom-right.
    Row ``floor(cx)`` goes to the upper half; a half that would be empty is
    clamped to a one-pixel slab so every internal node has four children.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    cg = center_of_gravity(r)
    node = QuadTree(r, cg)
    if depth == 0:
        return node
    row_spans = _split(r.height, cg[0])
    col_spans = _split(r.width, cg[1])
    t, l = r.box.top, r.box.left
    for r0, r1 in row_spans:
        for c0, c1 in col_spans:
            child = Region(r.parent, Rect(t + r0, l + c0, t + r1, l + c1))
            node.children.append(quad_partition(child, depth - 1))
    return node


# ---------------------------------------------------------------------------
# longest runs


def _run_lengths_along_rows(a: np.ndarray) -> np.ndarray:
    """Label every black pixel with the length of the horizontal run holding it."""
    h, w = a.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = a
    flat = padded.ravel()
    d = np.diff(flat)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    lengths = ends - starts
    out = np.zeros(flat.size, dtype=np.int32)
    out[flat.astype(bool)] = np.repeat(lengths, lengths)
    return out.reshape(h, w + 2)[:, 1:-1]


def _shear(a: np.ndarray, anti: bool) -> np.ndarray:
    """Rearrange diagonals of ``a`` into rows, padding with zeros.

    Row ``k`` holds the cells with constant ``col - row`` (main) or
    ``row + col`` (anti), indexed by row so consecutive cells stay adjacent.
    """
    h, w = a.shape
    rr, cc = np.indices((h, w))
    line = rr + cc if anti else cc - rr + h - 1
    out = np.zeros((h + w - 1, h), dtype=a.dtype)
    out[line, rr] = a
    return out


def _unshear(s: np.ndarray, shape: tuple[int, int], anti: bool) -> np.ndarray:
    h, w = shape
    rr, cc = np.indices((h, w))
    line = rr + cc if anti else cc - rr + h - 1
    return s[line, rr]


@dataclass(frozen=True)
class RunMaps:
    """Per-pixel maximal-run lengths of a parent image in all four directions."""

    row: np.ndarray
    column: np.ndarray
    main_diagonal: np.ndarray
    anti_diagonal: np.ndarray

    @classmethod
    def of(cls, img: np.ndarray) -> "RunMaps":
        img = np.asarray(img, dtype=bool)
        main = _run_lengths_along_rows(_shear(img, anti=False))
        anti = _run_lengths_along_rows(_shear(img, anti=True))
        return cls(
            row=_run_lengths_along_rows(img),
            column=_run_lengths_along_rows(img.T).T,
            main_diagonal=_unshear(main, img.shape, anti=False),
            anti_diagonal=_unshear(anti, img.shape, anti=True),
        )


def longest_run_sums(r: Region, maps: RunMaps | None = None) -> np.ndarray:
    """Integer sums, over every line of ``r`` in each direction, of the
    longest run crossing that line. Runs are measured in the parent image,
    so a bar may extend past the region border."""
    if maps is None:
        maps = RunMaps.of(r.parent)
    b = r.box
    win = (slice(b.top, b.bottom + 1), slice(b.left, b.right + 1))
    row = maps.row[win].max(axis=1).sum()
    col = maps.column[win].max(axis=0).sum()
    main = _shear(maps.main_diagonal[win], anti=False).max(axis=1).sum()
    anti = _shear(maps.anti_diagonal[win], anti=True).max(axis=1).sum()
    return np.array([row, col, main, anti], dtype=np.int64)


def longest_run_features(r: Region, maps: RunMaps | None = None) -> np.ndarray:
    """Row, column, main- and anti-diagonal longest-run features of ``r``,
    each normalized by the region area and clipped to 1."""
    sums = longest_run_sums(r, maps)
    return np.minimum(sums / float(r.height * r.width), 1.0)


# ---------------------------------------------------------------------------
# shadows


def octant_masks(h: int, w: int) -> np.ndarray:
    """Boolean ``(8, h, w)`` array: pixel belongs to octant ``k``.

    A pixel belongs to an octant when its unit square overlaps the octant
    triangle with positive area, so boundary pixels are shared and no
    octant is ever empty. Work is done in doubled integer coordinates
    where the box is ``[0, 2h] x [0, 2w]`` and the centre is ``(h, w)``.
    """
    r = np.arange(h)[:, None]
    c = np.arange(w)[None, :]
    r0, r1, c0, c1 = 2 * r, 2 * r + 2, 2 * c, 2 * c + 2
    upper = np.broadcast_to(r0 < h, (h, w))
    lower = np.broadcast_to(r1 > h, (h, w))
    left = np.broadcast_to(c0 < w, (h, w))
    right = np.broadcast_to(c1 > w, (h, w))
    # main diagonal: row*w - col*h = 0; anti diagonal: row*w + col*h = 2hw
    main_neg = r0 * w - c1 * h < 0
    main_pos = r1 * w - c0 * h > 0
    anti_neg = r0 * w + c0 * h - 2 * h * w < 0
    anti_pos = r1 * w + c1 * h - 2 * h * w > 0
    return np.stack([
        upper & left & main_neg,    # ULU
        upper & right & anti_neg,   # URU
        upper & right & anti_pos,   # URR
        lower & right & main_neg,   # LRR
        lower & right & main_pos,   # LRL
        lower & left & anti_pos,    # LLD
        lower & left & anti_neg,    # LLL
        upper & left & main_pos,    # ULL
    ])


# (border axis, midline axis, diagonal family) for every octant; a horizontal
# side is indexed by column, a vertical side by row, a side on the main
# diagonal by row+col and one on the anti diagonal by row-col, i.e. each
# projection runs perpendicular to the side it lands on.
_OCTANT_SIDES = (
    ("col", "row", "sum"),   # ULU
    ("col", "row", "diff"),  # URU
    ("row", "col", "diff"),  # URR
    ("row", "col", "sum"),   # LRR
    ("col", "row", "sum"),   # LRL
    ("col", "row", "diff"),  # LLD
    ("row", "col", "diff"),  # LLL
    ("row", "col", "sum"),   # ULL
)


def _distinct(index: np.ndarray, mask: np.ndarray, size: int) -> int:
    return int(np.count_nonzero(np.bincount(index[mask], minlength=size)))


def shadow_counts(r: Region) -> tuple[np.ndarray, np.ndarray]:
    """Covered and maximal projection lengths, 24 of each, as integers.

    The covered length of a side is the number of distinct projection
    indices hit by the octant's black pixels; the maximal length is the
    number hit by all pixels of the octant.
    """
    px = r.pixels
    h, w = px.shape
    masks = octant_masks(h, w)
    rr, cc = np.indices((h, w))
    index = {"row": rr, "col": cc, "sum": rr + cc, "diff": rr - cc + w - 1}
    size = {"row": h, "col": w, "sum": h + w - 1, "diff": h + w - 1}
    covered = np.zeros(SHADOW_PER_NODE, dtype=np.int64)
    full = np.zeros(SHADOW_PER_NODE, dtype=np.int64)
    for k, sides in enumerate(_OCTANT_SIDES):
        m = masks[k]
        ink = m & px
        for j, axis in enumerate(sides):
            covered[3 * k + j] = _distinct(index[axis], ink, size[axis])
            full[3 * k + j] = _distinct(index[axis], m, size[axis])
    return covered, full


def shadow_features(r: Region) -> np.ndarray:
    covered, full = shadow_counts(r)
    return covered / full


# ---------------------------------------------------------------------------
# assembly


def feature_layout(cfg: FeatureConfig = FeatureConfig()) -> list[str]:
    """Names of the features emitted by :func:`extract_feature_vector`."""
    names = []
    for node in range(tree_node_count(cfg.shadow_depth)):
        for octant in OCTANTS:
            for side in SIDES:
                names.append(f"shadow/node{node}/{octant}/{side}")
    for node in range(tree_node_count(cfg.run_depth)):
        for direction in RUN_DIRECTIONS:
            names.append(f"run/node{node}/{direction}")
    return names


def extract_feature_vector(img: np.ndarray,
                           cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Feature vector of a binary character image (default length 204).

    Shadow features of every node of the shadow tree come first, then the
    longest-run features of every node of the run tree, both trees walked
    breadth first.
    """
    img = np.asarray(img, dtype=bool)
    try:
        glyph = crop(img, bounding_box(img))
    except EmptyImage:
        raise EmptyImage("cannot extract features from an empty image") from None
    root = Region.whole(glyph)
    maps = RunMaps.of(glyph)
    parts = [shadow_features(n.region)
             for n in quad_partition(root, cfg.shadow_depth).breadth_first()]
    parts += [longest_run_features(n.region, maps)
              for n in quad_partition(root, cfg.run_depth).breadth_first()]
    return np.concatenate(parts)


def extract_many(images, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    rows = [extract_feature_vector(img, cfg) for img in images]
    if not rows:
        return np.zeros((0, cfg.n_features))
    return np.vstack(rows)
