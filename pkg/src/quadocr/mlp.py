"""One-hidden-layer sigmoid MLP trained by online backpropagation with momentum."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DimensionMismatch(ValueError):
    pass


@dataclass
class MLPModel:
    """Weights of an ``n``-``h``-``m`` network; the last column of each
    weight matrix holds the bias."""

    w_hidden: np.ndarray
    w_output: np.ndarray

    def __post_init__(self):
        self.w_hidden = np.asarray(self.w_hidden, dtype=np.float64)
        self.w_output = np.asarray(self.w_output, dtype=np.float64)
        if self.w_hidden.ndim != 2 or self.w_output.ndim != 2:
            raise DimensionMismatch("weight matrices must be 2-D")
        if self.w_output.shape[1] != self.w_hidden.shape[0] + 1:
            raise DimensionMismatch(
                f"output layer expects {self.w_output.shape[1] - 1} hidden units, "
                f"hidden layer has {self.w_hidden.shape[0]}")

    @property
    def n(self) -> int:
        return self.w_hidden.shape[1] - 1

    @property
    def h(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def m(self) -> int:
        return self.w_output.shape[0]

    def copy(self) -> "MLPModel":
        return MLPModel(self.w_hidden.copy(), self.w_output.copy())

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "h": self.h, "m": self.m,
            "w_hidden": self.w_hidden.tolist(),
            "w_output": self.w_output.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "MLPModel":
        doc = json.loads(text)
        model = cls(np.array(doc["w_hidden"]), np.array(doc["w_output"]))
        if (model.n, model.h, model.m) != (doc["n"], doc["h"], doc["m"]):
            raise DimensionMismatch("declared sizes disagree with weight shapes")
        return model

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MLPModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.8
    momentum: float = 0.7
    iterations: int = 10000
    seed: int = 0
    init_range: float = 0.5
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class TrainHistory:
    sse: list[float] = field(default_factory=list)


def sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def init_model(n: int, h: int, m: int, seed: int = 0, init_range: float = 0.5) -> MLPModel:
    if min(n, h, m) < 1:
        raise ValueError("layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    w_hidden = rng.uniform(-init_range, init_range, size=(h, n + 1))
    w_output = rng.uniform(-init_range, init_range, size=(m, h + 1))
    return MLPModel(w_hidden, w_output)


def _check_input(model: MLPModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.n:
        raise DimensionMismatch(f"model expects {model.n} features, got {x.shape[-1]}")


def forward(model: MLPModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden and output activations for one sample or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    _check_input(model, x)
    hidden = sigmoid(x @ model.w_hidden[:, :-1].T + model.w_hidden[:, -1])
    output = sigmoid(hidden @ model.w_output[:, :-1].T + model.w_output[:, -1])
    return hidden, output


def one_hot(label: int, m: int) -> np.ndarray:
    t = np.zeros(m)
    t[label] = 1.0
    return t


def backprop(model: MLPModel, x: np.ndarray, target: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray, float]:
    """Gradients of ``E = 0.5 * sum((target - output)**2)`` for one sample.

    Returns ``(dE/dw_hidden, dE/dw_output, E)``.
    """
    hidden, output = forward(model, x)
    err = output - target
    delta_out = err * output * (1.0 - output)
    delta_hid = (model.w_output[:, :-1].T @ delta_out) * hidden * (1.0 - hidden)
    grad_out = np.outer(delta_out, np.append(hidden, 1.0))
    grad_hid = np.outer(delta_hid, np.append(x, 1.0))
    return grad_hid, grad_out, 0.5 * float(err @ err)


def sum_squared_error(model: MLPModel, X: np.ndarray, y: np.ndarray) -> float:
    _, out = forward(model, X)
    targets = np.eye(model.m)[y]
    return float(((targets - out) ** 2).sum())


def _epoch_numpy(X1, targets, order, wh, wo, step_hid, step_out, lr, mom):
    h = wh.shape[0]
    hb = np.ones(h + 1)
    for i in order:
        x1 = X1[i]
        hid = hb[:h]
        hid[:] = sigmoid(wh @ x1)
        out = sigmoid(wo @ hb)
        delta_out = (out - targets[i]) * out * (1.0 - out)
        delta_hid = (delta_out @ wo[:, :h]) * hid * (1.0 - hid)
        # dw = momentum * dw_prev - lr * grad
        step_out *= mom
        step_out -= lr * np.outer(delta_out, hb)
        step_hid *= mom
        step_hid -= lr * np.outer(delta_hid, x1)
        wo += step_out
        wh += step_hid


def _epoch_loops(X1, targets, order, wh, wo, step_hid, step_out, lr, mom):
    h, n1 = wh.shape
    m = wo.shape[0]
    hb = np.empty(h + 1)
    hb[h] = 1.0
    out = np.empty(m)
    delta_out = np.empty(m)
    delta_hid = np.empty(h)
    for i in order:
        x1 = X1[i]
        for j in range(h):
            s = 0.0
            for k in range(n1):
                s += wh[j, k] * x1[k]
            hb[j] = 1.0 / (1.0 + np.exp(-s))
        for o in range(m):
            s = 0.0
            for j in range(h + 1):
                s += wo[o, j] * hb[j]
            out[o] = 1.0 / (1.0 + np.exp(-s))
            delta_out[o] = (out[o] - targets[i, o]) * out[o] * (1.0 - out[o])
        for j in range(h):
            s = 0.0
            for o in range(m):
                s += wo[o, j] * delta_out[o]
            delta_hid[j] = s * hb[j] * (1.0 - hb[j])
        for o in range(m):
            g = lr * delta_out[o]
            for j in range(h + 1):
                step_out[o, j] = mom * step_out[o, j] - g * hb[j]
                wo[o, j] += step_out[o, j]
        for j in range(h):
            g = lr * delta_hid[j]
            for k in range(n1):
                step_hid[j, k] = mom * step_hid[j, k] - g * x1[k]
                wh[j, k] += step_hid[j, k]


try:
    import numba
except ImportError:  # pragma: no cover
    _epoch_jit = None
else:
    _epoch_jit = numba.njit(cache=True)(_epoch_loops)


def train(model: MLPModel, X: np.ndarray, y: Sequence[int], cfg: TrainConfig = TrainConfig(),
          use_jit: bool = True) -> tuple[MLPModel, TrainHistory]:
    """Online backpropagation with momentum for ``cfg.iterations`` epochs.

    Each sample updates the weights by ``dw = -lr * grad + momentum * dw_prev``.
    The sample order is reshuffled every epoch from ``cfg.seed`` unless
    ``cfg.shuffle`` is off. The history holds the training-set sum of squared
    errors after every epoch. The input model is left untouched.

    A compiled epoch loop is used when numba is importable and ``use_jit`` is
    set; otherwise an equivalent numpy loop runs.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise DimensionMismatch("training rows must form a 2-D array")
    _check_input(model, X)
    if len(X) != len(y):
        raise DimensionMismatch("feature and label counts differ")
    if y.size and (y.min() < 0 or y.max() >= model.m):
        raise ValueError(f"labels must lie in 0..{model.m - 1}")

    model = model.copy()
    targets = np.eye(model.m)[y]
    X1 = np.hstack([X, np.ones((len(X), 1))])
    rng = np.random.default_rng(cfg.seed)
    step_hid = np.zeros_like(model.w_hidden)
    step_out = np.zeros_like(model.w_output)
    epoch = _epoch_jit if (_epoch_jit is not None and use_jit) else _epoch_numpy
    history = TrainHistory()
    order = np.arange(len(X))
    for _ in range(cfg.iterations):
        if cfg.shuffle:
            order = rng.permutation(len(X))
        epoch(X1, targets, order, model.w_hidden, model.w_output,
              step_hid, step_out, cfg.learning_rate, cfg.momentum)
        history.sse.append(sum_squared_error(model, X, y))
    return model, history


def predict(model: MLPModel, x: np.ndarray) -> int | np.ndarray:
    """Argmax class of one sample (or each row); ties go to the lowest index."""
    _, out = forward(model, x)
    return np.argmax(out, axis=-1) if out.ndim > 1 else int(np.argmax(out))


def sweep_hidden(X_train: np.ndarray, y_train: np.ndarray,
                 X_test: np.ndarray, y_test: np.ndarray,
                 n_classes: int, cfg: TrainConfig = TrainConfig(),
                 sizes: Sequence[int] = tuple(range(40, 141, 10))) -> dict[int, float]:
    """Test-set macro accuracy for one freshly initialized network per hidden size."""
    from .evaluation import confusion, macro_accuracy

    if not sizes:
        raise ValueError("sizes must be non-empty")
    table = {}
    for h in sizes:
        model = init_model(X_train.shape[1], h, n_classes, cfg.seed, cfg.init_range)
        model, _ = train(model, X_train, y_train, cfg)
        preds = predict(model, X_test)
        table[h] = macro_accuracy(confusion(preds, y_test, n_classes))
    return table


def best_hidden(table: dict[int, float]) -> tuple[int, float]:
    """Hidden size with the highest accuracy; ties go to the smaller network."""
    h = max(table, key=lambda k: (table[k], -k))
    return h, table[h]


def mean_of_best(tables: Sequence[dict[int, float]]) -> float:
    """Average over train/test pairs of each pair's best sweep accuracy."""
    return float(np.mean([best_hidden(t)[1] for t in tables]))
