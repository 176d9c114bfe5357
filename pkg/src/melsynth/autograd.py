"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray plus an optional gradient and a backward closure.
Ops build a DAG; Tensor.backward() runs a topological sweep accumulating
gradients into every reachable tensor with requires_grad set.

Conventions: activations are channels-first, (channels, batch) or
(channels, batch, time). Ops preserve the input dtype, so the same graph
runs in float32 for training and float64 for finite-difference checks.
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        # iterative postorder; nodes are marked when expanded, not when
        # pushed, so a node shared by several consumers still finishes
        # before every consumer and receives its full gradient first
        order = []
        seen = set()
        stack = [(self, False)]
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
                if p._backward is not None and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            node._backward(node.grad)


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def _accum(t: Tensor, g):
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def _node(data, parents, backward) -> Tensor:
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = tuple(parents)
        out._backward = backward
        return out
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))
    return _node(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, -_unbroadcast(g, b.data.shape))
    return _node(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))
    return _node(out, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    out = a.data * s

    def backward(g):
        _accum(a, g * s)
    return _node(out, (a,), backward)


def add_const(a: Tensor, c: float) -> Tensor:
    out = a.data + c

    def backward(g):
        _accum(a, g)
    return _node(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        _accum(a, g * (1.0 - out * out))
    return _node(out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)

    def backward(g):
        _accum(a, g * out * (1.0 - out))
    return _node(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def backward(g):
        _accum(a, g * (a.data > 0))
    return _node(out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g):
        _accum(a, g * out)
    return _node(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def backward(g):
        _accum(a, g / a.data)
    return _node(out, (a,), backward)


def arctanh(a: Tensor) -> Tensor:
    out = np.arctanh(a.data)

    def backward(g):
        _accum(a, g / (1.0 - a.data * a.data))
    return _node(out, (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)

    def backward(g):
        _accum(a, g * ((a.data >= lo) & (a.data <= hi)))
    return _node(out, (a,), backward)


def mean(a: Tensor) -> Tensor:
    out = np.asarray(a.data.mean())
    n = a.data.size

    def backward(g):
        _accum(a, np.full_like(a.data, g / n))
    return _node(out, (a,), backward)


def mse(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error against a constant target."""
    diff = pred.data - target
    out = np.asarray((diff * diff).mean())
    n = pred.data.size

    def backward(g):
        _accum(pred, (2.0 * g / n) * diff)
    return _node(out, (pred,), backward)


# ---------------------------------------------------------------------------
# shape


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.data.shape))
    return _node(out, (a,), backward)


def flip_time(a: Tensor) -> Tensor:
    """Reverse the trailing (time) axis."""
    out = a.data[..., ::-1].copy()

    def backward(g):
        _accum(a, g[..., ::-1])
    return _node(out, (a,), backward)


def concat_channels(parts) -> Tensor:
    parts = list(parts)
    out = np.concatenate([p.data for p in parts], axis=0)
    sizes = [p.data.shape[0] for p in parts]

    def backward(g):
        start = 0
        for p, s in zip(parts, sizes):
            _accum(p, g[start:start + s])
            start += s
    return _node(out, tuple(parts), backward)


def channel_slice(a: Tensor, start: int, stop: int) -> Tensor:
    out = a.data[start:stop].copy()

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        _accum(a, full)
    return _node(out, (a,), backward)


# ---------------------------------------------------------------------------
# linear maps


def conv1x1(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Pointwise channel mix: w (O, C) applied over (C, B) or (C, B, T)."""
    out = np.tensordot(w.data, x.data, axes=([1], [0]))
    if b is not None:
        out += b.data.reshape((-1,) + (1,) * (x.data.ndim - 1))

    def backward(g):
        flat_axes = tuple(range(1, g.ndim))
        _accum(w, np.tensordot(g, x.data, axes=(flat_axes, flat_axes)))
        _accum(x, np.tensordot(w.data, g, axes=([0], [0])))
        if b is not None:
            _accum(b, g.sum(axis=flat_axes))
    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, backward)


def _shifted(x: np.ndarray, offset: int) -> np.ndarray:
    """x delayed by `offset` steps along time (zeros shifted in)."""
    if offset == 0:
        return x
    out = np.zeros_like(x)
    if offset > 0:
        out[..., offset:] = x[..., :-offset]
    else:
        out[..., :offset] = x[..., -offset:]
    return out


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, dilation: int = 1,
           causal: bool = True) -> Tensor:
    """Dilated 1-D convolution, w (O, C, K), x (C, B, T), zero padding.

    Causal taps look back (K - 1) * dilation steps; otherwise the kernel is
    centered (odd K).
    """
    o, c, k = w.data.shape
    if causal:
        offsets = [(k - 1 - j) * dilation for j in range(k)]
    else:
        offsets = [((k - 1) // 2 - j) * dilation for j in range(k)]
    shifted = [_shifted(x.data, off) for off in offsets]
    out = np.zeros((o,) + x.data.shape[1:], dtype=x.data.dtype)
    for j in range(k):
        out += np.tensordot(w.data[:, :, j], shifted[j], axes=([1], [0]))
    if b is not None:
        out += b.data.reshape((-1, 1, 1))

    def backward(g):
        dw = np.empty_like(w.data)
        dx = np.zeros_like(x.data)
        for j in range(k):
            dw[:, :, j] = np.tensordot(g, shifted[j], axes=([1, 2], [1, 2]))
            dx += _shifted(np.tensordot(w.data[:, :, j], g, axes=([0], [0])),
                           -offsets[j])
        _accum(w, dw)
        _accum(x, dx)
        if b is not None:
            _accum(b, g.sum(axis=(1, 2)))
    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, backward)


def conv_transpose1d(x: Tensor, w: Tensor, b: Tensor | None, stride: int) -> Tensor:
    """Transposed 1-D convolution, w (O, C, K), output cropped to T * stride.

    The raw output has length (T - 1) * stride + K; a symmetric crop of
    (K - stride) // 2 leading samples aligns it to exactly T * stride.
    """
    o, c, k = w.data.shape
    t = x.data.shape[2]
    lead = (k - stride) // 2
    raw = np.zeros((o, x.data.shape[1], (t - 1) * stride + k), dtype=x.data.dtype)
    z = np.tensordot(w.data, x.data, axes=([1], [0]))    # (O, K, B, T)
    for j in range(k):
        raw[:, :, j:j + stride * t:stride] += z[:, j]
    out = raw[:, :, lead:lead + stride * t].copy()
    if b is not None:
        out += b.data.reshape((-1, 1, 1))

    def backward(g):
        graw = np.zeros_like(raw)
        graw[:, :, lead:lead + stride * t] = g
        gz = np.empty_like(z)
        for j in range(k):
            gz[:, j] = graw[:, :, j:j + stride * t:stride]
        _accum(w, np.tensordot(gz, x.data, axes=([2, 3], [1, 2])).transpose(0, 2, 1))
        _accum(x, np.tensordot(w.data, gz, axes=([0, 2], [0, 1])))
        if b is not None:
            _accum(b, g.sum(axis=(1, 2)))
    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, backward)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Column lookup: table (C, K), integer indices of any shape."""
    indices = np.asarray(indices)
    out = table.data[:, indices]

    def backward(g):
        c, k = table.data.shape
        flat = indices.ravel()
        onehot = np.zeros((flat.size, k), dtype=g.dtype)
        onehot[np.arange(flat.size), flat] = 1.0
        _accum(table, g.reshape(c, -1) @ onehot)
    return _node(out, (table,), backward)


# ---------------------------------------------------------------------------
# fused recurrent and loss ops


def _sigmoid(x: np.ndarray) -> np.ndarray:
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def lstm(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """Single-direction LSTM scanning the time axis, zero initial state.

    x (C, B, T); wx (4H, C), wh (4H, H), b (4H,) with gate order
    input, forget, cell, output. Returns hidden states (H, B, T).
    The whole backward-through-time pass is fused into one node.
    """
    fourh = wx.data.shape[0]
    h_dim = fourh // 4
    c_dim, b_dim, t_dim = x.data.shape
    dt = x.data.dtype

    xproj = np.tensordot(wx.data, x.data, axes=([1], [0]))
    xproj += b.data.reshape(-1, 1, 1)

    gi = np.empty((h_dim, b_dim, t_dim), dtype=dt)
    gf = np.empty_like(gi)
    gg = np.empty_like(gi)
    go = np.empty_like(gi)
    cs = np.empty_like(gi)
    tc = np.empty_like(gi)
    hs = np.empty_like(gi)

    h_prev = np.zeros((h_dim, b_dim), dtype=dt)
    c_prev = np.zeros((h_dim, b_dim), dtype=dt)
    for t in range(t_dim):
        gates = xproj[:, :, t] + wh.data @ h_prev
        gi[:, :, t] = i = _sigmoid(gates[:h_dim])
        gf[:, :, t] = f = _sigmoid(gates[h_dim:2 * h_dim])
        gg[:, :, t] = g_ = np.tanh(gates[2 * h_dim:3 * h_dim])
        go[:, :, t] = o = _sigmoid(gates[3 * h_dim:])
        cs[:, :, t] = c_prev = f * c_prev + i * g_
        tc[:, :, t] = tcv = np.tanh(c_prev)
        hs[:, :, t] = h_prev = o * tcv

    def backward(gout):
        dgates_all = np.empty((fourh, b_dim, t_dim), dtype=dt)
        dwh = np.zeros_like(wh.data)
        dh = np.zeros((h_dim, b_dim), dtype=dt)
        dc = np.zeros((h_dim, b_dim), dtype=dt)
        for t in range(t_dim - 1, -1, -1):
            dh += gout[:, :, t]
            i, f, g_, o = gi[:, :, t], gf[:, :, t], gg[:, :, t], go[:, :, t]
            tcv = tc[:, :, t]
            dc += dh * o * (1.0 - tcv * tcv)
            c_old = cs[:, :, t - 1] if t > 0 else np.zeros_like(dc)
            dg = dgates_all[:, :, t]
            dg[:h_dim] = dc * g_ * i * (1.0 - i)
            dg[h_dim:2 * h_dim] = dc * c_old * f * (1.0 - f)
            dg[2 * h_dim:3 * h_dim] = dc * i * (1.0 - g_ * g_)
            dg[3 * h_dim:] = dh * tcv * o * (1.0 - o)
            h_old = hs[:, :, t - 1] if t > 0 else np.zeros((h_dim, b_dim), dtype=dt)
            dwh += dg @ h_old.T
            dh = wh.data.T @ dg
            dc *= f
        _accum(wh, dwh)
        _accum(wx, np.tensordot(dgates_all, x.data, axes=([1, 2], [1, 2])))
        _accum(b, dgates_all.sum(axis=(1, 2)))
        _accum(x, np.tensordot(wx.data, dgates_all, axes=([0], [0])))
    return _node(hs, (x, wx, wh, b), backward)


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy; logits (K, ...), integer targets (...)."""
    targets = np.asarray(targets)
    m = logits.data.max(axis=0, keepdims=True)
    shifted = logits.data - m
    lse = np.log(np.exp(shifted).sum(axis=0, keepdims=True)) + m
    idx = (targets,) + tuple(np.indices(targets.shape))
    picked = logits.data[idx]
    out = np.asarray((lse[0] - picked).mean())
    n = targets.size

    def backward(g):
        p = np.exp(logits.data - lse)
        p[idx] -= 1.0
        _accum(logits, p * (g / n))
    return _node(out, (logits,), backward)
