"""From-scratch convolutional regression network.

Forward and backward passes are plain numpy.  Convolutions run as im2col
GEMMs; max pooling routes gradients through the first argmax of each
window, so analytic gradients match finite differences wherever the loss is
differentiable.  The optimizer is Adam with bias correction.  All
randomness (weight init, batch order, dropout masks) flows from named
substreams of the config seed, which makes training bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import streams


@dataclass(frozen=True)
class ModelConfig:
    conv_filters: tuple[int, ...] = (16, 32, 64)
    kernel_size: int = 3
    pool_kind: str = "max"
    pool_size: int = 2
    fc_widths: tuple[int, ...] = (128, 64)
    dropout: float = 0.3
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 100
    patience: int | None = 20  # None disables early stopping
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if not self.conv_filters or not self.fc_widths:
            raise ValueError("need at least one conv stage and one fc layer")
        if any(f < 1 for f in self.conv_filters) or any(w < 1 for w in self.fc_widths):
            raise ValueError("layer widths must be positive")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")
        if self.pool_kind not in ("max", "avg"):
            raise ValueError(f"unknown pool_kind '{self.pool_kind}'")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive or None")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    def to_dict(self) -> dict:
        return {
            "conv_filters": list(self.conv_filters),
            "kernel_size": self.kernel_size,
            "pool_kind": self.pool_kind,
            "pool_size": self.pool_size,
            "fc_widths": list(self.fc_widths),
            "dropout": self.dropout,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "dtype": self.dtype,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv_filters"] = tuple(d.get("conv_filters", (16, 32, 64)))
        d["fc_widths"] = tuple(d.get("fc_widths", (128, 64)))
        return ModelConfig(**d)


class Conv2D:
    """3x3-style same-padded convolution via im2col."""

    def __init__(self, c_in: int, c_out: int, k: int, dtype):
        self.c_in, self.c_out, self.k = c_in, c_out, k
        self.w = np.zeros((c_out, c_in, k, k), dtype=dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cols = None
        self._x_shape = None

    def init_weights(self, rng):
        fan_in = self.c_in * self.k * self.k
        bound = np.sqrt(1.0 / fan_in)
        self.w[...] = rng.uniform(-bound, bound, self.w.shape)
        self.b[...] = 0.0

    def forward(self, x, train, rng):
        b, c, h, w = x.shape
        p = self.k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (self.k, self.k), axis=(2, 3))  # (B,C,H,W,k,k)
        cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
            b * h * w, c * self.k * self.k
        )
        out = cols @ self.w.reshape(self.c_out, -1).T + self.b
        self._cols = cols
        self._x_shape = x.shape
        return out.reshape(b, h, w, self.c_out).transpose(0, 3, 1, 2)

    def backward(self, dy):
        b, c, h, w = self._x_shape
        k, p = self.k, self.k // 2
        dym = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(-1, self.c_out)
        self.dw[...] = (dym.T @ self._cols).reshape(self.w.shape)
        self.db[...] = dym.sum(axis=0)
        dcols = (dym @ self.w.reshape(self.c_out, -1)).reshape(b, h, w, c, k, k)
        dcols = dcols.transpose(0, 3, 1, 2, 4, 5)  # (B,C,H,W,k,k)
        dxp = np.zeros((b, c, h + 2 * p, w + 2 * p), dtype=dy.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + h, j : j + w] += dcols[..., i, j]
        self._cols = None
        return dxp[:, :, p : p + h, p : p + w]

    def params(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x, train, rng):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask

    def params(self):
        return []


class Pool2D:
    """Strided pooling with a per-axis kernel in {1, pool_size}.

    Trailing rows/cols that do not fill a window are dropped; their gradient
    is zero.  Max pooling backpropagates to the first maximum of each
    window.
    """

    def __init__(self, kind: str, kh: int, kw: int):
        self.kind, self.kh, self.kw = kind, kh, kw
        self._cache = None

    def forward(self, x, train, rng):
        b, c, h, w = x.shape
        ho, wo = h // self.kh, w // self.kw
        xc = x[:, :, : ho * self.kh, : wo * self.kw]
        win = xc.reshape(b, c, ho, self.kh, wo, self.kw).transpose(0, 1, 2, 4, 3, 5)
        flat = np.ascontiguousarray(win).reshape(b, c, ho, wo, self.kh * self.kw)
        if self.kind == "max":
            am = flat.argmax(axis=-1)
            out = np.take_along_axis(flat, am[..., None], axis=-1)[..., 0]
            self._cache = (x.shape, am)
        else:
            out = flat.mean(axis=-1)
            self._cache = (x.shape, None)
        return out

    def backward(self, dy):
        (b, c, h, w), am = self._cache
        ho, wo = h // self.kh, w // self.kw
        flat = np.zeros((b, c, ho, wo, self.kh * self.kw), dtype=dy.dtype)
        if self.kind == "max":
            np.put_along_axis(flat, am[..., None], dy[..., None], axis=-1)
        else:
            flat[...] = (dy / (self.kh * self.kw))[..., None]
        dxc = (
            flat.reshape(b, c, ho, wo, self.kh, self.kw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, ho * self.kh, wo * self.kw)
        )
        dx = np.zeros((b, c, h, w), dtype=dy.dtype)
        dx[:, :, : ho * self.kh, : wo * self.kw] = dxc
        return dx

    def params(self):
        return []


class Flatten:
    def __init__(self):
        self._shape = None

    def forward(self, x, train, rng):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)

    def params(self):
        return []


class Dense:
    def __init__(self, d_in: int, d_out: int, dtype):
        self.w = np.zeros((d_in, d_out), dtype=dtype)
        self.b = np.zeros(d_out, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def init_weights(self, rng):
        bound = np.sqrt(1.0 / self.w.shape[0])
        self.w[...] = rng.uniform(-bound, bound, self.w.shape)
        self.b[...] = 0.0

    def forward(self, x, train, rng):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.dw[...] = self._x.T @ dy
        self.db[...] = dy.sum(axis=0)
        self._x = None
        return dy @ self.w.T

    def params(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]


class Dropout:
    """Inverted dropout; identity when p == 0 or in inference mode."""

    def __init__(self, p: float):
        self.p = p
        self._mask = None

    def forward(self, x, train, rng):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.p).astype(x.dtype) / (1.0 - self.p)
        return x * self._mask

    def backward(self, dy):
        return dy if self._mask is None else dy * self._mask

    def params(self):
        return []


class RateNet:
    """conv->relu->pool stages, then fc->relu->dropout stages, linear head.

    Pooling adapts per axis: an axis shorter than the pool window is left
    unpooled so small panels keep a nonempty spatial map.
    """

    def __init__(self, cfg: ModelConfig, in_channels: int, height: int, width: int):
        self.cfg = cfg
        self.in_shape = (in_channels, height, width)
        dtype = np.dtype(cfg.dtype)
        layers = []
        c, h, w = in_channels, height, width
        for f in cfg.conv_filters:
            layers.append(Conv2D(c, f, cfg.kernel_size, dtype))
            layers.append(ReLU())
            kh = cfg.pool_size if h >= cfg.pool_size else 1
            kw = cfg.pool_size if w >= cfg.pool_size else 1
            if kh > 1 or kw > 1:
                layers.append(Pool2D(cfg.pool_kind, kh, kw))
                h, w = h // kh, w // kw
            c = f
        layers.append(Flatten())
        d = c * h * w
        for width_fc in cfg.fc_widths:
            layers.append(Dense(d, width_fc, dtype))
            layers.append(ReLU())
            layers.append(Dropout(cfg.dropout))
            d = width_fc
        layers.append(Dense(d, 1, dtype))
        self.layers = layers
        self.dtype = dtype
        rng = np.random.default_rng([cfg.seed, streams.WEIGHT_INIT])
        for layer in layers:
            if hasattr(layer, "init_weights"):
                layer.init_weights(rng)

    def forward(self, x, train: bool = False, rng=None):
        x = np.ascontiguousarray(x, dtype=self.dtype)
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x[:, 0]

    def predict(self, x, chunk: int = 4096):
        """Inference in bounded-memory chunks; dropout disabled."""
        outs = [self.forward(x[i : i + chunk]) for i in range(0, x.shape[0], chunk)]
        return np.concatenate(outs) if outs else np.empty(0, dtype=self.dtype)

    def loss_and_grads(self, x, y, train: bool = False, rng=None) -> float:
        """Batch MSE; leaves d(loss)/d(param) in each layer's grad buffers."""
        pred = self.forward(x, train, rng)
        diff = pred - np.asarray(y, dtype=self.dtype)
        loss = float(np.mean(diff * diff))
        dout = (2.0 * diff / diff.shape[0])[:, None].astype(self.dtype)
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return loss

    def param_triples(self):
        out = []
        for li, layer in enumerate(self.layers):
            for name, arr, grad in layer.params():
                out.append((f"layer{li}.{name}", arr, grad))
        return out

    def get_weights(self) -> list[np.ndarray]:
        return [arr.copy() for _, arr, _ in self.param_triples()]

    def set_weights(self, weights: list[np.ndarray]) -> None:
        triples = self.param_triples()
        if len(weights) != len(triples):
            raise ValueError("weight list length mismatch")
        for (_, arr, _), src in zip(triples, weights):
            if arr.shape != src.shape:
                raise ValueError(f"weight shape mismatch: {arr.shape} vs {src.shape}")
            arr[...] = src


class Adam:
    def __init__(self, cfg: ModelConfig, param_arrays):
        self.lr, self.b1, self.b2, self.eps = (
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.eps,
        )
        self.t = 0
        self.m = [np.zeros_like(p) for p in param_arrays]
        self.v = [np.zeros_like(p) for p in param_arrays]

    def step(self, params_and_grads):
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for (arr, grad), m, v in zip(params_and_grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * grad
            v *= self.b2
            v += (1.0 - self.b2) * grad * grad
            arr -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainReport:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    stopping_epoch: int = 0
    best_epoch: int = 0
    best_val_mse: float = float("inf")
    wall_time_s: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
            "stopping_epoch": self.stopping_epoch,
            "best_epoch": self.best_epoch,
            "best_val_mse": self.best_val_mse,
        }
        # wall time is run-environment noise; persisted artifacts omit it
        if include_timing:
            d["wall_time_s"] = self.wall_time_s
        return d


def fit(model: RateNet, x_train, y_train, x_val, y_val, cfg: ModelConfig) -> TrainReport:
    """Minibatch Adam on MSE with patience-based early stopping.

    Stops after `patience` consecutive epochs without strict validation
    improvement, then restores the best-validation weights.  Raises on a
    non-finite loss instead of silently continuing.
    """
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("train and val sets must be nonempty")
    t0 = time.perf_counter()
    x_train = np.ascontiguousarray(x_train, dtype=model.dtype)
    y_train = np.ascontiguousarray(y_train, dtype=model.dtype)
    x_val = np.ascontiguousarray(x_val, dtype=model.dtype)
    y_val = np.ascontiguousarray(y_val, dtype=model.dtype)

    rng = np.random.default_rng([cfg.seed, streams.TRAIN_LOOP])
    triples = model.param_triples()
    adam = Adam(cfg, [arr for _, arr, _ in triples])
    pg = [(arr, grad) for _, arr, grad in triples]

    report = TrainReport()
    best_weights = model.get_weights()
    bad = 0
    n = x_train.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss = model.loss_and_grads(x_train[idx], y_train[idx], train=True, rng=rng)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            adam.step(pg)
            loss_sum += loss * idx.shape[0]
        report.train_mse.append(loss_sum / n)

        val_pred = model.predict(x_val)
        val_mse = float(np.mean((val_pred - y_val) ** 2))
        if not np.isfinite(val_mse):
            raise RuntimeError(f"non-finite validation loss at epoch {epoch}")
        report.val_mse.append(val_mse)
        report.stopping_epoch = epoch

        if val_mse < report.best_val_mse:
            report.best_val_mse = val_mse
            report.best_epoch = epoch
            best_weights = model.get_weights()
            bad = 0
        else:
            bad += 1
            if cfg.patience is not None and bad >= cfg.patience:
                break

    model.set_weights(best_weights)
    report.wall_time_s = time.perf_counter() - t0
    return report


def gradient_check(model: RateNet, x, y, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Perturbs every single parameter entry, so keep the model tiny.  Run with
    dropout 0 (inference-mode backward) so the loss is deterministic.
    """
    x = np.ascontiguousarray(x, dtype=model.dtype)
    y = np.ascontiguousarray(y, dtype=model.dtype)
    model.loss_and_grads(x, y, train=False)
    analytic = [(arr, grad.copy()) for _, arr, grad in model.param_triples()]

    def loss_only():
        pred = model.forward(x, train=False)
        return float(np.mean((pred - y) ** 2))

    worst = 0.0
    for arr, grad in analytic:
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_only()
            flat[i] = orig - h
            lm = loss_only()
            flat[i] = orig
            g_fd = (lp - lm) / (2 * h)
            denom = max(abs(gflat[i]), abs(g_fd), 1e-8)
            worst = max(worst, abs(gflat[i] - g_fd) / denom)
    return worst
