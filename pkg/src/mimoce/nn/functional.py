"""Differentiable primitives. Shapes follow (batch, position, channel)."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = [
    "conv1d",
    "linear",
    "batch_norm",
    "relu",
    "sigmoid",
    "global_avg_pool",
    "channel_scale",
    "reshape",
    "mse_loss",
    "weighted_mse_loss",
]


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: str = "same") -> Tensor:
    """1-D cross-correlation.

    x: (B, F, Cin), w: (L, Cin, Cout), b: (Cout,) -> (B, F', Cout).
    With ``padding="same"`` zeros are added so that ``F' = ceil(F / stride)``.
    """
    bsz, flen, cin = x.data.shape
    klen, wcin, cout = w.data.shape
    if wcin != cin:
        raise ValueError(f"conv1d expects {wcin} input channels, got {cin}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if padding == "same":
        fout = -(-flen // stride)
        total = max((fout - 1) * stride + klen - flen, 0)
        left, right = total // 2, total - total // 2
    elif padding == "valid":
        left = right = 0
        fout = (flen - klen) // stride + 1
        if fout < 1:
            raise ValueError("kernel longer than input")
    else:
        raise ValueError(f"unknown padding {padding!r}")
    xp = np.pad(x.data, ((0, 0), (left, right), (0, 0))) if left or right else x.data
    span = (fout - 1) * stride + 1
    # im2col: (B, F', L*Cin) with the kernel-offset axis outermost
    cols = np.concatenate([xp[:, l:l + span:stride, :] for l in range(klen)], axis=2)
    w2 = w.data.reshape(klen * cin, cout)
    out = (cols.reshape(-1, klen * cin) @ w2).reshape(bsz, fout, cout)
    if b is not None:
        out += b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        g2 = g.reshape(-1, cout)
        if w.requires_grad:
            w.accumulate((cols.reshape(-1, klen * cin).T @ g2).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate(g2.sum(axis=0))
        if x.requires_grad:
            gcols = (g2 @ w2.T).reshape(bsz, fout, klen, cin)
            gxp = np.zeros_like(xp)
            for l in range(klen):
                gxp[:, l:l + span:stride, :] += gcols[:, :, l, :]
            x.accumulate(gxp[:, left:left + flen, :])

    return Tensor(out, parents=parents, backward=backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map on the last axis. x: (..., Din), w: (Din, Dout)."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ValueError(f"linear expects {w.data.shape[0]} input features, got {x.data.shape[-1]}")
    out = x.data @ w.data
    if b is not None:
        out += b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        din, dout = w.data.shape
        if w.requires_grad:
            w.accumulate(x.data.reshape(-1, din).T @ g.reshape(-1, dout))
        if b is not None and b.requires_grad:
            b.accumulate(g.reshape(-1, dout).sum(axis=0))
        if x.requires_grad:
            x.accumulate(g @ w.data.T)

    return Tensor(out, parents=parents, backward=backward)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float, mean=None, var=None):
    """Per-channel normalisation over every axis but the last.

    If ``mean``/``var`` are given they are used as constants (evaluation
    mode); otherwise batch statistics are computed and differentiated
    through. Returns ``(out, batch_mean, batch_var)``.
    """
    axes = tuple(range(x.data.ndim - 1))
    train = mean is None
    if train:
        if x.data.shape[0] < 2:
            raise ValueError("batch norm in training mode needs a batch of at least 2")
        mean = x.data.mean(axis=axes)
        xc = x.data - mean
        var = np.mean(xc * xc, axis=axes)
    else:
        xc = x.data - mean
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate((g * xhat).sum(axis=axes))
        if beta.requires_grad:
            beta.accumulate(g.sum(axis=axes))
        if x.requires_grad:
            gxhat = g * gamma.data
            if train:
                gx = (gxhat - gxhat.mean(axis=axes) - xhat * (gxhat * xhat).mean(axis=axes)) * inv_std
            else:
                gx = gxhat * inv_std
            x.accumulate(gx)

    out_t = Tensor(out, parents=(x, gamma, beta), backward=backward)
    return out_t, mean, var


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * mask)

    return Tensor(x.data * mask, parents=(x,), backward=backward)


def sigmoid(x: Tensor) -> Tensor:
    # split form avoids overflow in exp for large |x|
    z = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.data.dtype)
    # keep the range open at the working precision
    fi = np.finfo(s.dtype)
    np.clip(s, fi.tiny, 1.0 - fi.epsneg, out=s)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * s * (1.0 - s))

    return Tensor(s, parents=(x,), backward=backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the position axis: (B, F, C) -> (B, 1, C)."""
    flen = x.data.shape[1]

    def backward(g):
        if x.requires_grad:
            x.accumulate(np.broadcast_to(g / flen, x.data.shape).copy())

    return Tensor(x.data.mean(axis=1, keepdims=True), parents=(x,), backward=backward)


def channel_scale(z: Tensor, m: Tensor) -> Tensor:
    """Scale every channel of z (B, F, C) by the per-sample map m (B, 1, C)."""

    def backward(g):
        if z.requires_grad:
            z.accumulate(g * m.data)
        if m.requires_grad:
            m.accumulate((g * z.data).sum(axis=1, keepdims=True))

    return Tensor(z.data * m.data, parents=(z, m), backward=backward)


def reshape(x: Tensor, shape) -> Tensor:
    in_shape = x.data.shape

    def backward(g):
        if x.requires_grad:
            x.accumulate(g.reshape(in_shape))

    return Tensor(x.data.reshape(shape), parents=(x,), backward=backward)


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean over samples of the per-sample total squared error."""
    return weighted_mse_loss(pred, target, None)


def weighted_mse_loss(pred: Tensor, target, weights) -> Tensor:
    """``(1/n) sum_i w_i ||pred_i - target_i||^2``; ``weights=None`` means all ones."""
    target = target.data if isinstance(target, Tensor) else np.asarray(target)
    if target.shape != pred.data.shape:
        raise ValueError(f"prediction {pred.data.shape} and target {target.shape} differ")
    n = pred.data.shape[0]
    diff = pred.data - target
    per_sample = (diff * diff).reshape(n, -1).sum(axis=1)
    if weights is None:
        w = None
        loss = per_sample.sum() / n
    else:
        w = np.asarray(weights, dtype=pred.data.dtype).reshape(n)
        if w.shape[0] != n:
            raise ValueError("need exactly one weight per sample")
        if np.any(w < 0):
            raise ValueError("loss weights must be non-negative")
        loss = (w * per_sample).sum() / n

    def backward(g):
        if pred.requires_grad:
            scale = (2.0 / n) * g
            gd = diff * scale if w is None else diff * (scale * w).reshape((n,) + (1,) * (diff.ndim - 1))
            pred.accumulate(gd.astype(pred.data.dtype, copy=False))

    return Tensor(np.asarray(loss, dtype=pred.data.dtype), parents=(pred,), backward=backward)
