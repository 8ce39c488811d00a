"""Brute-force reference computations used by the tests.

Nothing here imports from ``quadocr``; each routine recomputes its
quantity the slow, obvious way.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

# ---------------------------------------------------------------------------
# binarization


def otsu_scan(img) -> int:
    """Threshold t maximizing between-class variance of {v < t} vs {v >= t},
    checked for every t in 0..256 with plain Python sums."""
    values = [int(v) for v in np.asarray(img).ravel()]
    best_t, best = 0, -1.0
    for t in range(257):
        dark = [v for v in values if v < t]
        light = [v for v in values if v >= t]
        if not dark or not light:
            continue
        w0, w1 = len(dark) / len(values), len(light) / len(values)
        m0, m1 = sum(dark) / len(dark), sum(light) / len(light)
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best:
            best_t, best = t, var
    return best_t


# ---------------------------------------------------------------------------
# longest runs

_STEPS = {
    "row": (0, 1),
    "column": (1, 0),
    "main_diagonal": (1, 1),
    "anti_diagonal": (1, -1),
}


def maximal_runs(img, step):
    """Every maximal run of black pixels along ``step`` as a list of cells."""
    h, w = img.shape
    dr, dc = step
    runs = []
    for r in range(h):
        for c in range(w):
            if not img[r, c]:
                continue
            pr, pc = r - dr, c - dc
            if 0 <= pr < h and 0 <= pc < w and img[pr, pc]:
                continue  # not the first cell of its run
            cells = []
            rr, cc = r, c
            while 0 <= rr < h and 0 <= cc < w and img[rr, cc]:
                cells.append((rr, cc))
                rr, cc = rr + dr, cc + dc
            runs.append(cells)
    return runs


def _line_key(direction, r, c):
    return {"row": r, "column": c, "main_diagonal": r - c, "anti_diagonal": r + c}[direction]


def longest_run_sums(parent, top, left, bottom, right):
    """Per direction: sum over region lines of the longest parent run touching
    the line's in-region segment."""
    parent = np.asarray(parent, dtype=bool)
    region = {(r, c) for r in range(top, bottom + 1) for c in range(left, right + 1)}
    out = []
    for direction, step in _STEPS.items():
        best = {}
        for r, c in region:
            best.setdefault(_line_key(direction, r, c), 0)
        for run in maximal_runs(parent, step):
            for r, c in run:
                if (r, c) in region:
                    k = _line_key(direction, r, c)
                    best[k] = max(best[k], len(run))
        out.append(sum(best.values()))
    return out


# ---------------------------------------------------------------------------
# shadows


def _clip(poly, a, b):
    """Sutherland-Hodgman: keep the part of ``poly`` left of the edge a->b."""
    def side(p):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        sp, sq = side(p), side(q)
        if sp >= 0:
            out.append(p)
        if (sp > 0 > sq) or (sp < 0 < sq):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _area(poly):
    if len(poly) < 3:
        return Fraction(0)
    s = Fraction(0)
    for i in range(len(poly)):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % len(poly)]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2


def octant_triangles(h, w):
    """(corner, side midpoint, centre) for the eight octants, clockwise from
    the top-left, in exact (row, col) coordinates of a [0,h]x[0,w] box."""
    H, W = Fraction(h), Fraction(w)
    ctr = (H / 2, W / 2)
    anchors = [
        ((0, 0), (0, W / 2)),
        ((0, W), (0, W / 2)),
        ((0, W), (H / 2, W)),
        ((H, W), (H / 2, W)),
        ((H, W), (H, W / 2)),
        ((H, 0), (H, W / 2)),
        ((H, 0), (H / 2, 0)),
        ((0, 0), (H / 2, 0)),
    ]
    return [(tuple(map(Fraction, corner)), tuple(map(Fraction, mid)), ctr)
            for corner, mid in anchors]


@lru_cache(maxsize=None)
def octant_members(h, w):
    """Pixels whose unit square overlaps each octant with positive area,
    found by clipping the square against the triangle."""
    members = []
    for tri in octant_triangles(h, w):
        a, b, c = tri
        # orient counter-clockwise in (row, col) for the clipper
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        verts = [a, b, c] if cross > 0 else [a, c, b]
        cells = set()
        for r in range(h):
            for col in range(w):
                poly = [(Fraction(r), Fraction(col)), (Fraction(r + 1), Fraction(col)),
                        (Fraction(r + 1), Fraction(col + 1)), (Fraction(r), Fraction(col + 1))]
                for i in range(3):
                    poly = _clip(poly, verts[i], verts[(i + 1) % 3])
                    if not poly:
                        break
                if _area(poly) > 0:
                    cells.add((r, col))
        members.append(cells)
    return members


def _side_index(p, q, h, w):
    """Projection index perpendicular to segment p-q."""
    if p[0] == q[0]:
        return lambda r, c: c          # horizontal side
    if p[1] == q[1]:
        return lambda r, c: r          # vertical side
    slope_down = (q[0] - p[0]) * (q[1] - p[1]) > 0
    if slope_down:                      # parallel to the main diagonal
        return lambda r, c: r + c
    return lambda r, c: r - c


def shadow_counts(img):
    """(covered, full) integer projection counts for the 24 shadow sides of
    ``img`` taken as a whole region."""
    img = np.asarray(img, dtype=bool)
    h, w = img.shape
    covered, full = [], []
    for (corner, mid, ctr), cells in zip(octant_triangles(h, w), octant_members(h, w)):
        for p, q in ((corner, mid), (mid, ctr), (corner, ctr)):
            idx = _side_index(p, q, h, w)
            full.append(len({idx(r, c) for r, c in cells}))
            covered.append(len({idx(r, c) for r, c in cells if img[r, c]}))
    return covered, full


# ---------------------------------------------------------------------------
# MLP


def mlp_forward(w_hidden, w_output, x):
    """Plain-Python forward pass; bias is the last column of each matrix."""
    def sig(t):
        return 1.0 / (1.0 + math.exp(-t))

    hidden = []
    for row in w_hidden:
        s = sum(row[k] * x[k] for k in range(len(x))) + row[-1]
        hidden.append(sig(s))
    out = []
    for row in w_output:
        s = sum(row[j] * hidden[j] for j in range(len(hidden))) + row[-1]
        out.append(sig(s))
    return hidden, out


def mlp_error(w_hidden, w_output, x, target):
    _, out = mlp_forward(w_hidden, w_output, x)
    return 0.5 * sum((t - o) ** 2 for t, o in zip(target, out))


def finite_difference_grad(w_hidden, w_output, x, target, step=1e-5):
    w_hidden = np.array(w_hidden, dtype=float)
    w_output = np.array(w_output, dtype=float)
    grads = []
    for W in (w_hidden, w_output):
        g = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            orig = W[idx]
            W[idx] = orig + step
            plus = mlp_error(w_hidden, w_output, x, target)
            W[idx] = orig - step
            minus = mlp_error(w_hidden, w_output, x, target)
            W[idx] = orig
            g[idx] = (plus - minus) / (2 * step)
        grads.append(g)
    return grads


# ---------------------------------------------------------------------------
# SVM


def rbf_gram(X, gamma):
    X = np.asarray(X, dtype=float)
    n = len(X)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = math.exp(-gamma * sum((a - b) ** 2 for a, b in zip(X[i], X[j])))
    return K


def grid_dual_max(X, y, c, gamma, step=1e-3):
    """Maximize the SVM dual over the lattice ``alpha_i in {0, step, ..., c}``
    for all but the last multiplier, which the equality constraint fixes.
    The lattice is walked one slab of the first coordinate at a time."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    K = rbf_gram(X, gamma)
    Q = (y[:, None] * y[None, :]) * K
    levels = np.arange(0, int(round(c / step)) + 1) * step
    best = -np.inf
    rest = n - 2
    if rest > 0:
        grids = np.meshgrid(*([levels] * rest), indexing="ij")
        tail = np.stack([g.ravel() for g in grids], axis=1)
    else:
        tail = np.zeros((1, 0))
    for a0 in levels:
        A = np.hstack([np.full((len(tail), 1), a0), tail])
        last = -y[-1] * (A @ y[:-1])
        ok = (last >= -1e-9) & (last <= c + 1e-9)
        if not ok.any():
            continue
        A = np.hstack([A[ok], np.clip(last[ok], 0, c)[:, None]])
        vals = A.sum(1) - 0.5 * np.einsum("ij,jk,ik->i", A, Q, A)
        best = max(best, float(vals.max()))
    return best
