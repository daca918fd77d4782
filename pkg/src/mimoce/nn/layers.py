"""Layer objects holding parameters around the functional primitives."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import RngStream
from . import functional as fn
from .tensor import Tensor

__all__ = [
    "Layer",
    "Conv1D",
    "Dense",
    "BatchNorm",
    "ReLU",
    "Sigmoid",
    "GlobalAvgPool",
    "Attention",
    "Reshape",
    "Flatten",
    "xavier_uniform",
    "layer_from_config",
]


def xavier_uniform(shape, fan_in: int, fan_out: int, stream: RngStream, dtype=np.float32) -> np.ndarray:
    """Glorot-uniform draws on ``[-sqrt(6/(fan_in+fan_out)), +sqrt(...)]``."""
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return stream.uniform(-bound, bound, shape).astype(dtype)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def __call__(self, x: Tensor, train: bool = False) -> Tensor:
        raise NotImplementedError

    def config(self) -> dict:
        return {}

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def astype(self, dtype) -> None:
        for t in self.params.values():
            t.data = t.data.astype(dtype)
        for k, v in self.buffers.items():
            self.buffers[k] = v.astype(dtype)

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{type(self).__name__}({args})"


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, in_channels: int, filters: int, kernel_size: int, stride: int = 1,
                 use_bias: bool = True, stream: RngStream | None = None, dtype=np.float32):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError("same padding needs an odd kernel size")
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.in_channels, self.filters = in_channels, filters
        self.kernel_size, self.stride, self.use_bias = kernel_size, stride, use_bias
        shape = (kernel_size, in_channels, filters)
        if stream is None:
            w = np.zeros(shape, dtype=dtype)
        else:
            w = xavier_uniform(shape, kernel_size * in_channels, kernel_size * filters, stream, dtype)
        self.params["weight"] = Tensor(w, requires_grad=True)
        if use_bias:
            self.params["bias"] = Tensor(np.zeros(filters, dtype=dtype), requires_grad=True)

    def __call__(self, x, train=False):
        if x.data.ndim != 3 or x.data.shape[2] != self.in_channels:
            raise ValueError(f"conv1d expects (B, F, {self.in_channels}), got {x.data.shape}")
        return fn.conv1d(x, self.params["weight"], self.params.get("bias"), self.stride)

    def config(self):
        return {"in_channels": self.in_channels, "filters": self.filters, "kernel_size": self.kernel_size,
                "stride": self.stride, "use_bias": self.use_bias}

    def output_shape(self, in_shape):
        return (-(-in_shape[0] // self.stride), self.filters)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, units: int, use_bias: bool = True,
                 stream: RngStream | None = None, dtype=np.float32):
        super().__init__()
        self.in_features, self.units, self.use_bias = in_features, units, use_bias
        shape = (in_features, units)
        if stream is None:
            w = np.zeros(shape, dtype=dtype)
        else:
            w = xavier_uniform(shape, in_features, units, stream, dtype)
        self.params["weight"] = Tensor(w, requires_grad=True)
        if use_bias:
            self.params["bias"] = Tensor(np.zeros(units, dtype=dtype), requires_grad=True)

    def __call__(self, x, train=False):
        return fn.linear(x, self.params["weight"], self.params.get("bias"))

    def config(self):
        return {"in_features": self.in_features, "units": self.units, "use_bias": self.use_bias}

    def output_shape(self, in_shape):
        return in_shape[:-1] + (self.units,)


class BatchNorm(Layer):
    """Batch normalisation over all axes except the channel (last) axis.

    Running statistics follow ``r <- momentum * r + (1 - momentum) * batch``.
    """

    kind = "batch_norm"

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.99, dtype=np.float32, **_):
        super().__init__()
        self.channels, self.eps, self.momentum = channels, eps, momentum
        self.params["gamma"] = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.params["beta"] = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def __call__(self, x, train=False):
        if x.data.shape[-1] != self.channels:
            raise ValueError(f"batch norm expects {self.channels} channels, got {x.data.shape[-1]}")
        g, b = self.params["gamma"], self.params["beta"]
        if not train:
            out, _, _ = fn.batch_norm(x, g, b, self.eps, self.buffers["running_mean"], self.buffers["running_var"])
            return out
        out, mean, var = fn.batch_norm(x, g, b, self.eps)
        m = self.momentum
        self.buffers["running_mean"] = (m * self.buffers["running_mean"] + (1 - m) * mean).astype(x.data.dtype)
        self.buffers["running_var"] = (m * self.buffers["running_var"] + (1 - m) * var).astype(x.data.dtype)
        return out

    def config(self):
        return {"channels": self.channels, "eps": self.eps, "momentum": self.momentum}


class ReLU(Layer):
    kind = "relu"

    def __call__(self, x, train=False):
        return fn.relu(x)


class Sigmoid(Layer):
    kind = "sigmoid"

    def __call__(self, x, train=False):
        return fn.sigmoid(x)


class GlobalAvgPool(Layer):
    kind = "global_avg_pool"

    def __call__(self, x, train=False):
        return fn.global_avg_pool(x)

    def output_shape(self, in_shape):
        return (1,) + tuple(in_shape[1:])


class Attention(Layer):
    """Squeeze-excitation channel attention on (B, F, C) features.

    pool -> FC(C -> C/r, no bias) -> ReLU -> FC(C/r -> C, no bias) -> sigmoid,
    then every channel is scaled by its map value. When ``capture`` is set
    the most recent maps, shape (B, C), are kept in ``last_map``.
    """

    kind = "attention"

    def __init__(self, channels: int, reduction: int = 2, stream: RngStream | None = None, dtype=np.float32):
        super().__init__()
        if channels % reduction:
            raise ValueError(f"channel count {channels} is not divisible by reduction ratio {reduction}")
        self.channels, self.reduction = channels, reduction
        hidden = channels // reduction
        self.squeeze = Dense(channels, hidden, use_bias=False, stream=stream, dtype=dtype)
        self.excite = Dense(hidden, channels, use_bias=False, stream=stream, dtype=dtype)
        self.params["squeeze"] = self.squeeze.params["weight"]
        self.params["excite"] = self.excite.params["weight"]
        self.capture = False
        self.last_map = None

    def __call__(self, x, train=False):
        if x.data.ndim != 3 or x.data.shape[2] != self.channels:
            raise ValueError(f"attention expects (B, F, {self.channels}), got {x.data.shape}")
        z = fn.global_avg_pool(x)
        s = fn.relu(fn.linear(z, self.params["squeeze"]))
        m = fn.sigmoid(fn.linear(s, self.params["excite"]))
        if self.capture:
            self.last_map = m.data[:, 0, :].copy()
        return fn.channel_scale(x, m)

    def config(self):
        return {"channels": self.channels, "reduction": self.reduction}


class Reshape(Layer):
    """Reshape each sample (batch axis kept)."""

    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def __call__(self, x, train=False):
        return fn.reshape(x, (x.data.shape[0],) + self.shape)

    def config(self):
        return {"shape": list(self.shape)}

    def output_shape(self, in_shape):
        return self.shape


class Flatten(Layer):
    kind = "flatten"

    def __call__(self, x, train=False):
        return fn.reshape(x, (x.data.shape[0], -1))

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


LAYER_TYPES = {cls.kind: cls for cls in (Conv1D, Dense, BatchNorm, ReLU, Sigmoid, GlobalAvgPool, Attention, Reshape, Flatten)}


def layer_from_config(kind: str, config: dict, stream=None, dtype=np.float32) -> Layer:
    cls = LAYER_TYPES[kind]
    if cls in (ReLU, Sigmoid, GlobalAvgPool, Flatten):
        return cls()
    if cls is Reshape:
        return cls(config["shape"])
    if cls is BatchNorm:
        return cls(dtype=dtype, **config)
    return cls(stream=stream, dtype=dtype, **config)
