"""Minimal dense/convolutional autograd kernel.

Arrays are plain numpy, images laid out [batch, height, width, channels].
Every forward op records a backward closure on its output; `backward`
replays the tape in reverse topological order and accumulates gradients
into `.grad`. Only the layers the generator/discriminator pair needs are
implemented; this is deliberately not a general graph engine.

Production paths run float32; gradient checking builds the same graphs
in float64.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import GraphError, NotTrainedError, ShapeError

Array = np.ndarray


class Tensor:
    """An n-dimensional value (order <= 4) with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 parents: Sequence["Tensor"] = (), backward=None):
        self.data = np.asarray(data)
        if self.data.ndim > 4:
            raise ShapeError(f"tensor order {self.data.ndim} > 4 unsupported")
        self.grad: Optional[Array] = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """A trainable tensor bundled with its Adam moment buffers."""

    __slots__ = ("name", "adam_m", "adam_v", "step_count")

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data), requires_grad=True)
        self.name = name
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0

    def zero_grad(self) -> None:
        self.grad = None


# ---------------------------------------------------------------------------
# graph traversal

def backward(loss: Tensor, params: Iterable[Parameter] = ()) -> None:
    """Populate .grad with d(loss)/d(tensor) for everything reachable.

    Parameters passed in `params` that the loss does not reach get an
    explicit zero gradient.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    if loss._backward is None and not loss._parents:
        raise GraphError("backward called on a leaf tensor; no forward pass recorded")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)

    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# dense layer

def dense_forward(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """out[b,m] = sum_k x[b,k] w[k,m] (+ bias[m])."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense: input {tuple(x.shape)} does not match weights {tuple(w.shape)}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"dense: bias {tuple(b.shape)} does not match weights {tuple(w.shape)}")
    out_data = x.data @ w.data
    if b is not None:
        out_data = out_data + b.data
    parents = (x, w) if b is None else (x, w, b)
    out = Tensor(out_data, parents=parents)

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(g @ w.data.T)
        if w.requires_grad:
            w.accumulate(x.data.T @ g)
        if b is not None and b.requires_grad:
            b.accumulate(g.sum(axis=0))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# convolution machinery
#
# "same" zero padding, stride in {1, 2}; im2col/col2im are realized as k*k
# strided slice copies so the heavy lifting is a single GEMM per layer.

def _same_geometry(size: int, k: int, stride: int) -> tuple[int, int, int]:
    """Return (out_size, pad_before, pad_total) for same-padded convolution."""
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total


def _im2col(xp: Array, k: int, stride: int, h2: int, w2: int) -> Array:
    b, _, _, c = xp.shape
    cols = np.empty((b, h2, w2, k, k, c), dtype=xp.dtype)
    for u in range(k):
        for v in range(k):
            cols[:, :, :, u, v, :] = xp[:, u:u + stride * h2:stride,
                                        v:v + stride * w2:stride, :]
    return cols

def _col2im(cols: Array, k: int, stride: int, hp: int, wp: int) -> Array:
    b, h2, w2, _, _, c = cols.shape
    xp = np.zeros((b, hp, wp, c), dtype=cols.dtype)
    for u in range(k):
        for v in range(k):
            xp[:, u:u + stride * h2:stride, v:v + stride * w2:stride, :] += cols[:, :, :, u, v, :]
    return xp


def _check_conv_args(k_shape, stride: int) -> None:
    if k_shape[0] != k_shape[1] or k_shape[0] % 2 == 0:
        raise ShapeError(f"kernel must be odd and square, got {tuple(k_shape)}")
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")


def _pad_same(x: Array, k: int, stride: int):
    b, h, w, c = x.shape
    h2, pt, tot_h = _same_geometry(h, k, stride)
    w2, pl, tot_w = _same_geometry(w, k, stride)
    xp = np.pad(x, ((0, 0), (pt, tot_h - pt), (pl, tot_w - pl), (0, 0)))
    return xp, h2, w2, pt, pl


def _conv_core(x: Array, kern: Array, stride: int) -> tuple[Array, Array]:
    """Forward cross-correlation; returns (out, cols) with cols kept for backward."""
    k = kern.shape[0]
    cin, cout = kern.shape[2], kern.shape[3]
    xp, h2, w2, _, _ = _pad_same(x, k, stride)
    cols = _im2col(xp, k, stride, h2, w2)
    out = cols.reshape(-1, k * k * cin) @ kern.reshape(k * k * cin, cout)
    return out.reshape(x.shape[0], h2, w2, cout), cols


def _conv_input_grad(g: Array, kern: Array, stride: int, h: int, w: int) -> Array:
    """Adjoint of _conv_core w.r.t. its input; also the tconv forward kernel."""
    k = kern.shape[0]
    cin, cout = kern.shape[2], kern.shape[3]
    b, h2, w2 = g.shape[0], g.shape[1], g.shape[2]
    cols = (g.reshape(-1, cout) @ kern.reshape(k * k * cin, cout).T)
    cols = cols.reshape(b, h2, w2, k, k, cin)
    _, pt, tot_h = _same_geometry(h, k, stride)
    _, pl, tot_w = _same_geometry(w, k, stride)
    hp, wp = max(h + tot_h, h), max(w + tot_w, w)
    xp = _col2im(cols, k, stride, hp, wp)
    return xp[:, pt:pt + h, pl:pl + w, :]


def conv2d_forward(x: Tensor, kern: Tensor, stride: int = 1) -> Tensor:
    """Same-padded cross-correlation; output spatial extents are ceil(in/stride)."""
    _check_conv_args(kern.shape, stride)
    if x.data.ndim != 4 or kern.data.ndim != 4 or x.shape[3] != kern.shape[2]:
        raise ShapeError(f"conv2d: input {tuple(x.shape)} does not match kernel {tuple(kern.shape)}")
    out_data, cols = _conv_core(x.data, kern.data, stride)
    out = Tensor(out_data, parents=(x, kern))
    k = kern.shape[0]
    cin, cout = kern.shape[2], kern.shape[3]
    h, w = x.shape[1], x.shape[2]

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(_conv_input_grad(g, kern.data, stride, h, w))
        if kern.requires_grad:
            dk = cols.reshape(-1, k * k * cin).T @ g.reshape(-1, cout)
            kern.accumulate(dk.reshape(kern.shape))

    out._backward = _bw
    return out


def tconv2d_forward(x: Tensor, kern: Tensor, stride: int = 1) -> Tensor:
    """Transposed convolution: the adjoint of conv2d_forward used as a forward op.

    Kernel layout is [k, k, c_out, c_in]; output spatial extents are in*stride,
    so <conv2d(a, kern), b> == <a, tconv2d(b, kern)> holds with the same kernel
    array.
    """
    _check_conv_args(kern.shape, stride)
    if x.data.ndim != 4 or kern.data.ndim != 4 or x.shape[3] != kern.shape[3]:
        raise ShapeError(f"tconv2d: input {tuple(x.shape)} does not match kernel {tuple(kern.shape)}")
    h_out, w_out = x.shape[1] * stride, x.shape[2] * stride
    out_data = _conv_input_grad(x.data, kern.data, stride, h_out, w_out)
    out = Tensor(out_data, parents=(x, kern))
    k = kern.shape[0]
    cout, cin = kern.shape[2], kern.shape[3]

    def _bw(g: Array) -> None:
        gx, g_cols = _conv_core(g, kern.data, stride)
        if x.requires_grad:
            x.accumulate(gx)
        if kern.requires_grad:
            dk = g_cols.reshape(-1, k * k * cout).T @ x.data.reshape(-1, cin)
            kern.accumulate(dk.reshape(kern.shape))

    out._backward = _bw
    return out


def add_channel_bias(x: Tensor, b: Tensor) -> Tensor:
    """Broadcast a per-channel bias over [B,H,W,C]."""
    if b.shape != (x.shape[-1],):
        raise ShapeError(f"bias {tuple(b.shape)} does not match channels of {tuple(x.shape)}")
    out = Tensor(x.data + b.data, parents=(x, b))

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=tuple(range(g.ndim - 1))))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# batch normalization

class BatchNormStats:
    """Running mean/variance accumulated over training batches (EMA)."""

    __slots__ = ("mean", "var", "count")

    def __init__(self, channels: int, dtype=np.float32):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)
        self.count = 0


def batchnorm_forward(x: Tensor, gamma: Tensor, beta: Tensor,
                      stats: Optional[BatchNormStats] = None,
                      eps: float = 1e-3, mode: str = "train",
                      momentum: float = 0.99) -> Tensor:
    """Normalize per channel over batch+spatial extents, then affine.

    Train mode uses batch statistics (well-defined at batch size 1 through
    the spatial extent) and folds them into `stats`; infer mode requires
    previously accumulated statistics.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"batchnorm expects [B,H,W,C], got {tuple(x.shape)}")
    c = x.shape[3]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm affine shapes {tuple(gamma.shape)}/{tuple(beta.shape)} "
                         f"do not match {c} channels")
    axes = (0, 1, 2)
    dt = x.data.dtype

    if mode in ("train", "batch"):
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if mode == "train" and stats is not None:
            m = dt.type(momentum)
            stats.mean = m * stats.mean.astype(dt) + (1 - m) * mu
            stats.var = m * stats.var.astype(dt) + (1 - m) * var
            stats.count += 1
    elif mode == "infer":
        if stats is None or stats.count == 0:
            raise NotTrainedError("batchnorm inference requested before any training step")
        mu = stats.mean.astype(dt)
        var = stats.var.astype(dt)
    else:
        raise ValueError(f"unknown batchnorm mode {mode!r}")

    inv = 1.0 / np.sqrt(var + dt.type(eps))
    xhat = (x.data - mu) * inv
    out = Tensor(gamma.data * xhat + beta.data, parents=(x, gamma, beta))
    m_count = x.data.shape[0] * x.data.shape[1] * x.data.shape[2]

    def _bw(g: Array) -> None:
        if beta.requires_grad:
            beta.accumulate(g.sum(axis=axes))
        if gamma.requires_grad:
            gamma.accumulate((g * xhat).sum(axis=axes))
        if x.requires_grad:
            dxhat = g * gamma.data
            if mode == "infer":
                x.accumulate(dxhat * inv)
            else:
                s1 = dxhat.sum(axis=axes)
                s2 = (dxhat * xhat).sum(axis=axes)
                x.accumulate(inv / m_count * (m_count * dxhat - s1 - xhat * s2))

    out._backward = _bw
    return out


class BatchNorm:
    """Affine parameters plus running stats for one normalized channel axis."""

    def __init__(self, channels: int, name: str = "bn", dtype=np.float32,
                 eps: float = 1e-3, momentum: float = 0.99):
        self.gamma = Parameter(np.ones(channels, dtype=dtype), f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels, dtype=dtype), f"{name}.beta")
        self.stats = BatchNormStats(channels, dtype=dtype)
        self.eps = eps
        self.momentum = momentum

    def __call__(self, x: Tensor, mode: str) -> Tensor:
        return batchnorm_forward(x, self.gamma, self.beta, self.stats,
                                 eps=self.eps, mode=mode, momentum=self.momentum)

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]


# ---------------------------------------------------------------------------
# activations and shape ops

def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(x.data > 0, x.data.dtype.type(1), x.data.dtype.type(slope))
    out = Tensor(x.data * factor, parents=(x,))

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(g * factor)

    out._backward = _bw
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y, parents=(x,))

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(g * (1 - y * y))

    out._backward = _bw
    return out


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if math.prod(shape) != x.data.size:
        raise ShapeError(f"reshape {tuple(x.shape)} -> {shape} changes element count")
    out = Tensor(x.data.reshape(shape), parents=(x,))

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(g.reshape(x.shape))

    out._backward = _bw
    return out


def flatten(x: Tensor) -> Tensor:
    """Collapse everything after the batch axis."""
    return reshape(x, (x.shape[0], x.data.size // x.shape[0]))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: {tuple(a.shape)} vs {tuple(b.shape)}")
    out = Tensor(a.data + b.data, parents=(a, b))

    def _bw(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)

    out._backward = _bw
    return out


def scale(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * x.data.dtype.type(c), parents=(x,))

    def _bw(g: Array) -> None:
        if x.requires_grad:
            x.accumulate(g * x.data.dtype.type(c))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# loss

def bce_with_logits(logit: Tensor, target: float) -> Tensor:
    """Mean binary cross-entropy computed stably from raw logits.

    max(l,0) - l*t + log(1+exp(-|l|)) == -[t ln s(l) + (1-t) ln(1-s(l))].
    """
    l = logit.data
    t = l.dtype.type(target)
    per = np.maximum(l, 0) - l * t + np.log1p(np.exp(-np.abs(l)))
    out = Tensor(np.asarray(per.mean(), dtype=l.dtype), parents=(logit,))
    n = l.size

    def _bw(g: Array) -> None:
        if logit.requires_grad:
            sig = 1.0 / (1.0 + np.exp(-l))
            logit.accumulate((sig - t) / n * g)

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# optimizer

def adam_step(params: Iterable[Parameter], lr: float = 2e-4, beta1: float = 0.5,
              beta2: float = 0.999, eps: float = 1e-7) -> None:
    """One bias-corrected Adam update; skips parameters with no gradient."""
    for p in params:
        if p.grad is None:
            continue
        g = p.grad
        p.step_count += 1
        p.adam_m = beta1 * p.adam_m + (1 - beta1) * g
        p.adam_v = beta2 * p.adam_v + (1 - beta2) * (g * g)
        mhat = p.adam_m / (1 - beta1 ** p.step_count)
        vhat = p.adam_v / (1 - beta2 ** p.step_count)
        p.data -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.data.dtype)
