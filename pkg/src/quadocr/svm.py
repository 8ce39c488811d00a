"""Soft-margin RBF support vector machines.

Binary machines are trained by sequential minimal optimization on the dual

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum(a_i y_i) = 0

and combined one-vs-one with majority voting for multi-class problems.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .featurefile import format_sparse_row, parse_sparse_row


class SingleClass(ValueError):
    pass


class NonConvergence(UserWarning):
    pass


class DimensionMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# scaling


@dataclass
class ScaleParams:
    """Per-feature training minima and maxima; rows are mapped to [-1, +1]."""

    lo: np.ndarray
    hi: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return scale_apply(self, X)


def scale_fit(X: np.ndarray) -> ScaleParams:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("cannot fit scaling on an empty set")
    return ScaleParams(X.min(axis=0), X.max(axis=0))


def scale_apply(p: ScaleParams, X: np.ndarray) -> np.ndarray:
    """Linear map sending each training min to -1 and max to +1; constant
    features map to 0."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != p.lo.size:
        raise DimensionMismatch(f"expected {p.lo.size} features, got {X.shape[-1]}")
    span = p.hi - p.lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = -1.0 + 2.0 * (X - p.lo) / safe
    return np.where(const, 0.0, out)


# ---------------------------------------------------------------------------
# kernel


def rbf(x: np.ndarray, z: np.ndarray, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise DimensionMismatch("vectors differ in length")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    d = x - z
    return float(np.exp(-gamma * (d @ d)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch("row widths differ")
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


# ---------------------------------------------------------------------------
# binary machine


@dataclass
class SVMBinary:
    """Decision function ``f(x) = sum_i coef_i K(sv_i, x) + bias`` where
    ``coef_i = y_i * alpha_i``; ``f(x) >= 0`` predicts the positive class."""

    support_vectors: np.ndarray
    coefficients: np.ndarray
    bias: float
    gamma: float
    c: float
    support_indices: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.coefficients)


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ya = alpha * y
    return float(alpha.sum() - 0.5 * ya @ K @ ya)


def smo_train(X: np.ndarray, y: np.ndarray, c: float = 8.0, gamma: float = 1 / 204,
              tol: float = 1e-3, max_passes: int = 200) -> SVMBinary:
    """Train a binary C-SVM; labels must be +1/-1.

    Each step optimizes the pair of multipliers that most violates the
    optimality conditions: the first index has the smallest error
    ``E_i = f(x_i) - y_i`` among multipliers free to move up, the second
    maximizes ``|E_i - E_j|`` among those free to move down. Training stops
    once that gap is within ``tol`` (all KKT conditions hold to ``tol``) or
    after ``max_passes * len(X)`` steps, which emits :class:`NonConvergence`.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if c <= 0 or gamma <= 0:
        raise ValueError("c and gamma must be > 0")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError("labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClass("both classes are needed to train a binary machine")

    n = len(y)
    K = rbf_matrix(X, X, gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the minimization form of the dual
    pos = y > 0
    max_iter = max_passes * n
    converged = False
    it = 0
    while it < max_iter:
        v = -y * grad  # equals b - E_i for any bias b
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] <= tol:
            converged = True
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = (v[i] - v[j]) / max(eta, 1e-12)
        # move alpha_i by +y_i t and alpha_j by -y_j t, staying inside the box
        room_i = c - alpha[i] if pos[i] else alpha[i]
        room_j = alpha[j] if pos[j] else c - alpha[j]
        old_i, old_j = alpha[i], alpha[j]
        if t >= room_i and room_i <= room_j:
            alpha[i] = c if pos[i] else 0.0
            t = y[i] * (alpha[i] - old_i)
            alpha[j] = old_j - y[j] * t
        elif t >= room_j:
            alpha[j] = 0.0 if pos[j] else c
            t = -y[j] * (alpha[j] - old_j)
            alpha[i] = old_i + y[i] * t
        else:
            alpha[i] = old_i + y[i] * t
            alpha[j] = old_j - y[j] * t
        alpha[i] = min(max(alpha[i], 0.0), c)
        alpha[j] = min(max(alpha[j], 0.0), c)
        d_i, d_j = alpha[i] - old_i, alpha[j] - old_j
        grad += y * (y[i] * d_i * K[:, i] + y[j] * d_j * K[:, j])
        it += 1

    if not converged:
        warnings.warn(f"SMO stopped after {it} steps without reaching tol={tol}",
                      NonConvergence, stacklevel=2)
    v = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        bias = float(v[free].mean())
    else:
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        hi = v[up].max() if up.any() else v[low].min()
        lo = v[low].min() if low.any() else hi
        bias = float((hi + lo) / 2)
    sv = np.flatnonzero(alpha > 0)
    return SVMBinary(
        support_vectors=X[sv].copy(),
        coefficients=(y[sv] * alpha[sv]),
        bias=bias,
        gamma=gamma,
        c=c,
        support_indices=sv,
        converged=converged,
        iterations=it,
    )


def decision_function(m: SVMBinary, X: np.ndarray) -> float | np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != m.support_vectors.shape[1]:
        raise DimensionMismatch(
            f"machine expects {m.support_vectors.shape[1]} features, got {X.shape[-1]}")
    f = rbf_matrix(np.atleast_2d(X), m.support_vectors, m.gamma) @ m.coefficients + m.bias
    return float(f[0]) if X.ndim == 1 else f


def full_alphas(m: SVMBinary, n: int) -> np.ndarray:
    """Multipliers of all ``n`` training rows of a freshly trained machine."""
    if m.support_indices is None:
        raise ValueError("machine carries no training indices")
    alpha = np.zeros(n)
    alpha[m.support_indices] = m.alphas
    return alpha


def kkt_violation(m: SVMBinary, X: np.ndarray, y: np.ndarray) -> float:
    """Largest amount by which any training row breaks its KKT condition.

    With margins ``y_i f(x_i)``: rows with alpha = 0 need >= 1, rows at C
    need <= 1, free rows need == 1.
    """
    y = np.asarray(y, dtype=np.float64)
    alpha = full_alphas(m, len(y))
    margin = y * decision_function(m, np.atleast_2d(X))
    at_zero = alpha <= 0
    at_c = alpha >= m.c
    free = ~at_zero & ~at_c
    worst = 0.0
    if at_zero.any():
        worst = max(worst, float((1 - margin[at_zero]).max()))
    if at_c.any():
        worst = max(worst, float((margin[at_c] - 1).max()))
    if free.any():
        worst = max(worst, float(np.abs(margin[free] - 1).max()))
    return worst


# ---------------------------------------------------------------------------
# one-vs-one


@dataclass
class SVMMulti:
    classes: np.ndarray
    scale: ScaleParams
    gamma: float
    c: float
    machines: dict[tuple[int, int], SVMBinary] = field(default_factory=dict)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def save(self, path: str | os.PathLike) -> None:
        save_multi(self, path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SVMMulti":
        return load_multi(path)


def ovo_train(X: np.ndarray, y: np.ndarray, c: float = 8.0, gamma: float = 1 / 204,
              tol: float = 1e-3, max_passes: int = 200) -> SVMMulti:
    """Scale the rows, then train one machine per unordered pair of classes.

    In the machine for ``(a, b)`` with ``a < b`` class ``a`` is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass("one-vs-one training needs at least two classes")
    scale = scale_fit(X)
    Xs = scale_apply(scale, X)
    model = SVMMulti(classes, scale, gamma, c)
    for a, b in combinations(classes.tolist(), 2):
        rows = (y == a) | (y == b)
        yy = np.where(y[rows] == a, 1.0, -1.0)
        model.machines[(a, b)] = smo_train(Xs[rows], yy, c, gamma, tol, max_passes)
    return model


def ovo_votes(m: SVMMulti, X: np.ndarray) -> np.ndarray:
    Xs = np.atleast_2d(scale_apply(m.scale, X))
    index = {int(k): i for i, k in enumerate(m.classes)}
    votes = np.zeros((Xs.shape[0], m.class_count), dtype=np.int64)
    rows = np.arange(Xs.shape[0])
    for (a, b), machine in m.machines.items():
        f = decision_function(machine, Xs)
        winner = np.where(f >= 0, index[a], index[b])
        np.add.at(votes, (rows, winner), 1)
    return votes


def ovo_predict(m: SVMMulti, X: np.ndarray) -> int | np.ndarray:
    """Majority vote over all pair machines; ties go to the lowest class."""
    X = np.asarray(X, dtype=np.float64)
    labels = m.classes[np.argmax(ovo_votes(m, X), axis=1)]
    return int(labels[0]) if X.ndim == 1 else labels


# ---------------------------------------------------------------------------
# model file


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_multi(m: SVMMulti, path: str | os.PathLike) -> None:
    lines = [
        "svm_type c_svc_ovo",
        "kernel rbf",
        f"classes {m.class_count}",
        "labels " + " ".join(str(int(k)) for k in m.classes),
        f"gamma {float(m.gamma)!r}",
        f"c {float(m.c)!r}",
        f"features {m.scale.lo.size}",
        "scale_min " + _floats(m.scale.lo),
        "scale_max " + _floats(m.scale.hi),
    ]
    for (a, b), mach in m.machines.items():
        lines.append(f"pair {a} {b}")
        lines.append(f"bias {mach.bias!r}")
        lines.append(f"nsv {len(mach.coefficients)}")
        for coef, sv in zip(mach.coefficients, mach.support_vectors):
            lines.append(f"{float(coef)!r} {format_sparse_row(sv)}".rstrip())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_multi(path: str | os.PathLike) -> SVMMulti:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header: dict[str, str] = {}
    pos = 0
    while pos < len(lines) and not lines[pos].startswith("pair "):
        key, _, value = lines[pos].partition(" ")
        header[key] = value
        pos += 1
    if header.get("svm_type") != "c_svc_ovo":
        raise ValueError(f"{path}: not a one-vs-one SVM model file")
    n_features = int(header["features"])
    gamma, c = float(header["gamma"]), float(header["c"])
    scale = ScaleParams(np.array([float(v) for v in header["scale_min"].split()]),
                        np.array([float(v) for v in header["scale_max"].split()]))
    model = SVMMulti(np.array([int(v) for v in header["labels"].split()]), scale, gamma, c)
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        _, a, b = lines[pos].split()
        bias = float(lines[pos + 1].split()[1])
        nsv = int(lines[pos + 2].split()[1])
        coefs, svs = [], []
        for ln in lines[pos + 3:pos + 3 + nsv]:
            tokens = ln.split()
            coefs.append(float(tokens[0]))
            svs.append(parse_sparse_row(tokens[1:], n_features))
        model.machines[(int(a), int(b))] = SVMBinary(
            np.array(svs).reshape(nsv, n_features), np.array(coefs), bias, gamma, c)
        pos += 3 + nsv
    return model
