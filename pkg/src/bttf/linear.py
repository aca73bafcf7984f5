"""Direct multi-step linear forecasters (Linear and DLinear) trained with
analytic gradients.

A forecaster maps a length-``input_len`` window to all ``horizon`` future
steps in one matrix product. The ``dlinear`` kind first splits the window
into a moving-average trend and a seasonal remainder and applies one linear
map to each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from . import records
from .errors import ConfigError, DivergenceError, ParameterError, ShapeError

Kind = Literal["plain", "dlinear"]

PARAM_NAMES: dict[str, tuple[str, ...]] = {
    "plain": ("weight", "bias"),
    "dlinear": ("trend_weight", "trend_bias", "seasonal_weight", "seasonal_bias"),
}


@dataclass(frozen=True, eq=False)
class LinearForecaster:
    kind: str
    input_len: int
    horizon: int
    kernel: int
    seed: int
    params: dict[str, np.ndarray]

    def __post_init__(self):
        if self.kind not in PARAM_NAMES:
            raise ParameterError(f"unknown model kind {self.kind!r}")
        frozen = {}
        for name in PARAM_NAMES[self.kind]:
            arr = np.array(self.params[name], dtype=np.float64)
            want = (self.horizon, self.input_len) if name.endswith("weight") else (self.horizon,)
            if arr.shape != want:
                raise ShapeError(f"parameter {name}", want, arr.shape)
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"parameter {name} has non-finite entries")
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "params", frozen)

    def predict(self, inputs) -> np.ndarray:
        """Batched forward pass: ``(n, input_len) -> (n, horizon)``."""
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_len:
            raise ShapeError("input batch", f"(n, {self.input_len})", X.shape)
        p = self.params
        if self.kind == "plain":
            return X @ p["weight"].T + p["bias"]
        trend, seasonal = decompose(X, self.kernel)
        return (trend @ p["trend_weight"].T + p["trend_bias"]
                + seasonal @ p["seasonal_weight"].T + p["seasonal_bias"])

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in PARAM_NAMES[self.kind]])

    def to_bytes(self) -> bytes:
        header = {
            "kind": self.kind,
            "input_len": self.input_len,
            "horizon": self.horizon,
            "kernel": self.kernel,
            "seed": self.seed,
            "params": list(PARAM_NAMES[self.kind]),
        }
        return records.pack(b"MODL", header, self.flat_params())

    @classmethod
    def from_bytes(cls, data: bytes) -> "LinearForecaster":
        header, flat = records.unpack(data, b"MODL")
        H, n = header["horizon"], header["input_len"]
        params, pos = {}, 0
        for name in header["params"]:
            shape = (H, n) if name.endswith("weight") else (H,)
            size = int(np.prod(shape))
            params[name] = flat[pos:pos + size].reshape(shape)
            pos += size
        return cls(header["kind"], n, H, header["kernel"], header["seed"], params)

    def save(self, path) -> Path:
        return records.atomic_write(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "LinearForecaster":
        return cls.from_bytes(Path(path).read_bytes())

    def digest(self) -> str:
        return records.digest(self.to_bytes())


def init_model(kind: Kind, input_len: int, horizon: int, kernel: int = 25, seed: int = 0) -> LinearForecaster:
    """Weights ~ U[-1/input_len, 1/input_len] from ``seed``; biases zero."""
    if input_len < 1 or horizon < 1:
        raise ParameterError(f"input_len and horizon must be >= 1, got {input_len}, {horizon}")
    if kind not in PARAM_NAMES:
        raise ParameterError(f"unknown model kind {kind!r}")
    if kind == "dlinear" and (kernel < 1 or kernel % 2 == 0):
        raise ParameterError(f"moving-average kernel must be odd and >= 1, got {kernel}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / input_len
    params = {}
    for name in PARAM_NAMES[kind]:
        if name.endswith("weight"):
            params[name] = rng.uniform(-bound, bound, size=(horizon, input_len))
        else:
            params[name] = np.zeros(horizon)
    return LinearForecaster(kind, input_len, horizon, kernel, seed, params)


def decompose(window, kernel: int) -> tuple[np.ndarray, np.ndarray]:
    """Split along the last axis into moving-average trend and remainder.

    The trend is a centered mean over ``kernel`` points with the window's
    edge values replicated ``(kernel - 1) // 2`` times on each side.

    >>> t, s = decompose([1.0, 2.0, 3.0], 3)
    >>> np.round(t, 6).tolist(), np.round(s, 6).tolist()
    ([1.333333, 2.0, 2.666667], [-0.333333, 0.0, 0.333333])
    """
    x = np.asarray(window, dtype=np.float64)
    if kernel < 1 or kernel % 2 == 0:
        raise ParameterError(f"moving-average kernel must be odd and >= 1, got {kernel}")
    if x.shape[-1] < 1:
        raise ParameterError("cannot decompose an empty window")
    half = (kernel - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    padded = np.pad(x, pad, mode="edge")
    trend = np.lib.stride_tricks.sliding_window_view(padded, kernel, axis=-1).mean(axis=-1)
    return trend, x - trend


def forward(model: LinearForecaster, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != model.input_len:
        raise ShapeError("input window", model.input_len, x.size if x.ndim == 1 else x.shape)
    return model.predict(x[None, :])[0]


def loss_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError("prediction vs target", target.shape, pred.shape)
    if pred.size == 0:
        raise ParameterError("empty batch")
    return float(np.mean((pred - target) ** 2))


def grad_mse(model: LinearForecaster, inputs, targets) -> tuple[float, dict[str, np.ndarray]]:
    """MSE over a batch and its exact gradient with respect to each parameter."""
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if X.shape[0] == 0:
        raise ParameterError("empty batch")
    pred = model.predict(X)
    if pred.shape != Y.shape:
        raise ShapeError("targets", pred.shape, Y.shape)
    resid = pred - Y
    loss = float(np.mean(resid ** 2))
    G = resid * (2.0 / resid.size)  # dloss/dpred
    gb = G.sum(axis=0)
    if model.kind == "plain":
        return loss, {"weight": G.T @ X, "bias": gb}
    trend, seasonal = decompose(X, model.kernel)
    return loss, {
        "trend_weight": G.T @ trend,
        "trend_bias": gb,
        "seasonal_weight": G.T @ seasonal,
        "seasonal_bias": gb.copy(),
    }


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k in params:
            params[k] -= self.lr * grads[k]


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings shared by first- and second-stage models.

    ``strategy="1E"`` trains exactly one epoch and overrides ``max_epochs``;
    ``"ES"`` trains up to ``max_epochs`` with early stopping on validation MSE.
    """

    learning_rate: float = 5e-3
    batch_size: int = 32
    max_epochs: int = 20
    strategy: str = "ES"
    patience: int = 3
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.strategy not in ("ES", "1E"):
            raise ConfigError(f"strategy must be 'ES' or '1E', got {self.strategy!r}")
        if self.strategy == "ES" and self.patience < 1:
            raise ConfigError(f"patience must be >= 1 under ES, got {self.patience}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.strategy == "1E":
            object.__setattr__(self, "max_epochs", 1)

    def make_optimizer(self):
        if self.optimizer == "sgd":
            return SGD(self.learning_rate)
        return Adam(self.learning_rate, self.beta1, self.beta2, self.eps)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_val_loss: float = math.nan

    def to_dict(self) -> dict:
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
        }


class EarlyStopping:
    """Tracks the best validation loss; signals a stop after ``patience``
    consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, val_loss: float) -> tuple[bool, bool]:
        """Return ``(improved, should_stop)``."""
        if val_loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = val_loss, epoch, 0
            return True, False
        self.bad_epochs += 1
        return False, self.bad_epochs >= self.patience


def train(
    model: LinearForecaster,
    train_windows,
    val_windows=None,
    config: TrainConfig = TrainConfig(),
    on_batch: Callable[[int, dict[str, np.ndarray]], None] | None = None,
) -> tuple[LinearForecaster, TrainReport]:
    """Mini-batch training on MSE.

    ``train_windows`` and ``val_windows`` are any objects exposing ``inputs``
    and ``targets`` arrays. Batches follow a fresh seeded permutation each
    epoch. Under ES the returned parameters are the best-validation snapshot.

    Raises
    ------
    DivergenceError
        If a batch loss or an updated parameter becomes non-finite.
    """
    X = np.asarray(train_windows.inputs, dtype=np.float64)
    Y = np.asarray(train_windows.targets, dtype=np.float64)
    if len(X) == 0:
        raise ParameterError("no training windows")
    has_val = val_windows is not None and len(val_windows.inputs) > 0
    if config.strategy == "ES" and not has_val:
        raise ParameterError("early stopping requires at least one validation window")

    rng = np.random.default_rng(config.seed)
    optimizer = config.make_optimizer()
    params = {k: v.copy() for k, v in model.params.items()}
    current = model
    best_params = params
    stopper = EarlyStopping(config.patience)
    report = TrainReport()
    n, bs = len(X), config.batch_size

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = grad_mse(current, X[idx], Y[idx])
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, loss)
                optimizer.step(params, grads)
            if not all(np.all(np.isfinite(p)) for p in params.values()):
                raise DivergenceError(epoch, math.inf)
            current = replace(current, params=params)
            batch_losses.append(loss)
            if on_batch is not None:
                on_batch(epoch, current.params)
        report.train_loss.append(float(np.mean(batch_losses)))
        report.stopped_epoch = epoch
        if not has_val:
            continue
        val_loss = loss_mse(current.predict(val_windows.inputs), val_windows.targets)
        if not math.isfinite(val_loss):
            raise DivergenceError(epoch, val_loss)
        report.val_loss.append(val_loss)
        improved, stop = stopper.update(epoch, val_loss)
        if improved:
            best_params = {k: v.copy() for k, v in params.items()}
        if config.strategy == "ES" and stop:
            break

    if has_val:
        report.best_epoch = stopper.best_epoch
        report.best_val_loss = stopper.best
    if config.strategy == "ES":
        return replace(model, params=best_params), report
    return replace(model, params=params), report

