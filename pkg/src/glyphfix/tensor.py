"""Minimal dense-array engine with reverse-mode differentiation.

Just enough operator coverage for the glyph model: BLAS-backed matmul and
im2col convolutions, recurrent cells composed from primitives, the usual
activations, and fused loss kernels.  Values are numpy arrays up to 4-D;
float64 is used in tests so finite-difference checks are meaningful, float32
in training for speed.  Graphs are per-forward tapes: each op records a
closure that scatters the output gradient back to its parents.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

EPS = 1e-12  # probability clamp applied before every log

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / finite diffs)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0)) if isinstance(other, Tensor) else add(self, -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.grad is not None})"


class Parameter(Tensor):
    """Named trainable tensor carrying adadelta accumulators (zeros at init)."""

    __slots__ = ("name", "acc_grad_sq", "acc_delta_sq")

    def __init__(self, data, name: str):
        super().__init__(np.asarray(data), requires_grad=True)
        self.name = name
        self.acc_grad_sq = np.zeros_like(self.data)
        self.acc_delta_sq = np.zeros_like(self.data)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    arr = np.asarray(data, dtype=dtype)
    return Tensor(arr, requires_grad=requires_grad)


def _coerce(x, like: np.ndarray) -> np.ndarray:
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=like.dtype)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(np.broadcast_to(g, t.data.shape), dtype=t.data.dtype)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# --------------------------------------------------------------------------
# elementwise arithmetic
# --------------------------------------------------------------------------

def add(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a, b = b, a
    bd = _coerce(b, a.data)
    out_data = a.data + bd
    parents = (a, b) if isinstance(b, Tensor) else (a,)

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        if isinstance(b, Tensor):
            _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, parents, backward)


def mul(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a, b = b, a
    bd = _coerce(b, a.data)
    out_data = a.data * bd
    parents = (a, b) if isinstance(b, Tensor) else (a,)

    def backward(g):
        _accum(a, _unbroadcast(g * bd, a.data.shape))
        if isinstance(b, Tensor):
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, parents, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            if b.data.ndim == 1:
                ga = g[..., None] * b.data
            elif a.data.ndim == 1:
                ga = b.data @ g
            else:
                ga = _unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape)
            _accum(a, ga)
        if b.requires_grad:
            if b.data.ndim == 1:
                gb = np.tensordot(a.data, g,
                                  axes=(tuple(range(a.data.ndim - 1)), tuple(range(g.ndim))))
            elif a.data.ndim == 1:
                gb = np.outer(a.data, g)
            else:
                gb = _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape)
            _accum(b, gb)

    return _make(out_data, (a, b), backward)


def stop_gradient(x: Tensor) -> Tensor:
    """Identity forward; blocks all gradient flow backward."""
    return Tensor(x.data)


# --------------------------------------------------------------------------
# shape ops
# --------------------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    out_data = x.data.reshape(shape)

    def backward(g):
        _accum(x, g.reshape(old))

    return _make(out_data, (x,), backward)


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out_data = x.data.transpose(axes)

    def backward(g):
        _accum(x, g.transpose(inv))

    return _make(out_data, (x,), backward)


def concat(parts: list, axis: int = -1) -> Tensor:
    datas = [p.data for p in parts]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]

    def backward(g):
        offset = 0
        for p, s in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + s)
            _accum(p, g[tuple(sl)])
            offset += s

    return _make(out_data, tuple(parts), backward)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    sl = [slice(None)] * x.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    out_data = x.data[sl]

    def backward(g):
        full = np.zeros_like(x.data)
        full[sl] = g
        _accum(x, full)

    return _make(out_data, (x,), backward)


def index_select(x: Tensor, idx, axis: int = 0) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    out_data = np.take(x.data, idx, axis=axis)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (slice(None),) * axis + (idx,), g)
        _accum(x, full)

    return _make(out_data, (x,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of an embedding table selected by integer ids."""
    return index_select(table, np.asarray(ids, dtype=np.int64), axis=0)


# --------------------------------------------------------------------------
# reductions
# --------------------------------------------------------------------------

def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(x, np.broadcast_to(g, x.data.shape).copy() if np.ndim(g) else np.full_like(x.data, g))
            return
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(gg, x.data.shape).astype(x.data.dtype, copy=True))

    return _make(out_data, (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = x.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([x.data.shape[a] for a in axis]))
    else:
        n = x.data.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def global_avg_pool(x: Tensor, axis) -> Tensor:
    """Mean over the given spatial axis/axes; GAP in the model equations."""
    return mean(x, axis=axis)


def max_along(x: Tensor, axis: int) -> Tensor:
    """Max over one axis, gradient routed to the (first) argmax."""
    idx = np.argmax(x.data, axis=axis)
    out_data = np.take_along_axis(x.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        _accum(x, full)

    return _make(out_data, (x,), backward)


def spatial_max(x: Tensor) -> Tensor:
    """Max over the trailing two spatial dims: (..., H, W) -> (...)."""
    flat = reshape(x, x.data.shape[:-2] + (-1,))
    return max_along(flat, axis=-1)


# --------------------------------------------------------------------------
# activations
# --------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0)

    def backward(g):
        _accum(x, g * (x.data > 0))

    return _make(out_data, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        _accum(x, g * out_data * (1.0 - out_data))

    return _make(out_data, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backward(g):
        _accum(x, g * (1.0 - out_data * out_data))

    return _make(out_data, (x,), backward)


def maxout(x: Tensor) -> Tensor:
    """Pairwise maxout halving the trailing dimension: (..., 2m) -> (..., m)."""
    if x.data.shape[-1] % 2:
        raise ValueError("maxout needs an even trailing dimension")
    shaped = x.data.reshape(x.data.shape[:-1] + (-1, 2))
    idx = np.argmax(shaped, axis=-1)
    out_data = np.take_along_axis(shaped, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        full = np.zeros_like(shaped)
        np.put_along_axis(full, idx[..., None], g[..., None], axis=-1)
        _accum(x, full.reshape(x.data.shape))

    return _make(out_data, (x,), backward)


def softmax(x: Tensor, axis: int = -1, temperature: float = 1.0) -> Tensor:
    z = x.data / temperature
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        _accum(x, (g - inner) * out_data / temperature)

    return _make(out_data, (x,), backward)


# --------------------------------------------------------------------------
# convolution and pooling (NCHW layout)
# --------------------------------------------------------------------------

def _same_pad(k: int) -> tuple[int, int]:
    lo = (k - 1) // 2
    return lo, k - 1 - lo


def _resolve_pad(pad, kh: int, kw: int):
    if pad == "same":
        return _same_pad(kh), _same_pad(kw)
    if isinstance(pad, int):
        return (pad, pad), (pad, pad)
    (ph, pw) = pad
    return (ph, ph), (pw, pw)


def _crop_pad_grad(dxp: np.ndarray, pt: int, pb: int, pl: int, pr: int,
                   h: int, w: int, pad_mode: str) -> np.ndarray:
    """Undo padding in the gradient; edge mode folds pad rows onto the border."""
    if pad_mode == "edge":
        if pt:
            dxp[:, :, pt, :] += dxp[:, :, :pt, :].sum(axis=2)
        if pb:
            dxp[:, :, -pb - 1, :] += dxp[:, :, -pb:, :].sum(axis=2)
        if pl:
            dxp[:, :, :, pl] += dxp[:, :, :, :pl].sum(axis=3)
        if pr:
            dxp[:, :, :, -pr - 1] += dxp[:, :, :, -pr:].sum(axis=3)
    return dxp[:, :, pt:pt + h, pl:pl + w]


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1,
           pad=0, groups: int = 1, pad_mode: str = "zeros") -> Tensor:
    """2-D cross-correlation over NCHW inputs.

    ``w`` has shape (C_out, C_in/groups, kh, kw).  ``pad`` is an int, an
    (ph, pw) pair, or "same" (stride 1), with even kernels padded per the
    floor/ceil convention.  ``pad_mode`` "zeros" or "edge" (replicate).
    groups == C_in == C_out takes a depthwise fast path; other group counts
    fall back to a per-group im2col loop.
    """
    bsz, cin, h, wid = x.data.shape
    cout, cpg, kh, kw = w.data.shape
    if cin != cpg * groups or cout % groups:
        raise ValueError(f"shape mismatch: x has {cin} channels, w is {w.data.shape} with groups={groups}")
    if pad_mode not in ("zeros", "edge"):
        raise ValueError(f"unknown pad_mode {pad_mode!r}")
    (pt, pb), (pl, pr) = _resolve_pad(pad, kh, kw)
    if pt or pb or pl or pr:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                    mode="constant" if pad_mode == "zeros" else "edge")
    else:
        xp = x.data
    oh = (xp.shape[2] - kh) // stride + 1
    ow = (xp.shape[3] - kw) // stride + 1

    if groups == cin == cout and cpg == 1:
        win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out_data = np.einsum("bcijuv,cuv->bcij", win, w.data[:, 0], optimize=True)
        if b is not None:
            out_data = out_data + b.data[None, :, None, None]

        def backward(g):
            if w.requires_grad:
                _accum(w, np.einsum("bcijuv,bcij->cuv", win, g, optimize=True)[:, None])
            if b is not None and b.requires_grad:
                _accum(b, g.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                dxp = np.zeros_like(xp)
                for u in range(kh):
                    for v in range(kw):
                        dxp[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += (
                            g * w.data[None, :, 0, u, v, None, None])
                _accum(x, _crop_pad_grad(dxp, pt, pb, pl, pr, h, wid, pad_mode))

        parents = (x, w) if b is None else (x, w, b)
        return _make(out_data, parents, backward)

    def im2col(xpad, c0, c1):
        win = sliding_window_view(xpad[:, c0:c1], (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(bsz * oh * ow, -1)

    gsize_in, gsize_out = cin // groups, cout // groups
    cols = []
    outs = []
    for gi in range(groups):
        c = im2col(xp, gi * gsize_in, (gi + 1) * gsize_in)
        wmat = w.data[gi * gsize_out:(gi + 1) * gsize_out].reshape(gsize_out, -1)
        outs.append(c @ wmat.T)
        cols.append(c)
    out2 = np.concatenate(outs, axis=1) if groups > 1 else outs[0]
    out_data = out2.reshape(bsz, oh, ow, cout).transpose(0, 3, 1, 2)
    if b is not None:
        out_data = out_data + b.data[None, :, None, None]

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(bsz * oh * ow, cout)
        if b is not None and b.requires_grad:
            _accum(b, g2.sum(axis=0))
        small_kernel = kh * kw <= 25  # the correlation blow-up is k^2 in memory
        if x.requires_grad and stride == 1 and groups == 1 and small_kernel:
            # input gradient as one GEMM: full correlation with flipped kernels
            gp = np.pad(g, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
            win = sliding_window_view(gp, (kh, kw), axis=(2, 3))
            gcols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
                bsz * xp.shape[2] * xp.shape[3], cout * kh * kw)
            wflip = np.ascontiguousarray(
                w.data[:, :, ::-1, ::-1].transpose(0, 2, 3, 1)).reshape(cout * kh * kw, cin)
            dxp = (gcols @ wflip).reshape(bsz, xp.shape[2], xp.shape[3], cin).transpose(0, 3, 1, 2)
            if w.requires_grad:
                _accum(w, (g2.T @ cols[0]).reshape(cout, cin, kh, kw))
            _accum(x, _crop_pad_grad(dxp, pt, pb, pl, pr, h, wid, pad_mode))
            return
        dxp = np.zeros_like(xp) if x.requires_grad else None
        for gi in range(groups):
            gslice = g2[:, gi * gsize_out:(gi + 1) * gsize_out]
            if w.requires_grad:
                dw = gslice.T @ cols[gi]
                _accum_slice(w, dw.reshape(gsize_out, gsize_in, kh, kw), gi * gsize_out, gsize_out)
            if x.requires_grad:
                wmat = w.data[gi * gsize_out:(gi + 1) * gsize_out].reshape(gsize_out, -1)
                dcols = (gslice @ wmat).reshape(bsz, oh, ow, gsize_in, kh, kw).transpose(0, 3, 1, 2, 4, 5)
                base = gi * gsize_in
                for u in range(kh):
                    for v in range(kw):
                        dxp[:, base:base + gsize_in, u:u + stride * oh:stride,
                            v:v + stride * ow:stride] += dcols[:, :, :, :, u, v]
        if x.requires_grad:
            _accum(x, _crop_pad_grad(dxp, pt, pb, pl, pr, h, wid, pad_mode))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out_data, parents, backward)


def _accum_slice(w: Tensor, dw: np.ndarray, start: int, length: int) -> None:
    if w.grad is None:
        w.grad = np.zeros_like(w.data)
    w.grad[start:start + length] += dw


def grouped_conv(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1,
                 pad=0) -> Tensor:
    """Depthwise convolution: one filter per channel, groups = channels."""
    return conv2d(x, w, b=b, stride=stride, pad=pad, groups=x.data.shape[1])


def max_pool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2."""
    bsz, c, h, w = x.data.shape
    hh, ww = h // 2, w // 2
    blocks = x.data[:, :, :hh * 2, :ww * 2].reshape(bsz, c, hh, 2, ww, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(bsz, c, hh, ww, 4)
    idx = np.argmax(blocks, axis=-1)
    out_data = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        full = np.zeros_like(blocks)
        np.put_along_axis(full, idx[..., None], g[..., None], axis=-1)
        full = full.reshape(bsz, c, hh, ww, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(bsz, c, hh * 2, ww * 2)
        if full.shape != x.data.shape:
            padded = np.zeros_like(x.data)
            padded[:, :, :hh * 2, :ww * 2] = full
            full = padded
        _accum(x, full)

    return _make(out_data, (x,), backward)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2."""
    bsz, c, h, w = x.data.shape
    hh, ww = h // 2, w // 2
    out_data = x.data[:, :, :hh * 2, :ww * 2].reshape(bsz, c, hh, 2, ww, 2).mean(axis=(3, 5))

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, :, :hh * 2, :ww * 2] = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        _accum(x, full)

    return _make(out_data, (x,), backward)


# --------------------------------------------------------------------------
# recurrent cell
# --------------------------------------------------------------------------

def gru_cell(x: Tensor, h: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """One GRU step.

    ``wx`` is (d_in, 3d), ``wh`` is (d, 3d), ``b`` is (3d,), gate order
    (update, reset, candidate); the reset gate scales the hidden projection.
    """
    d = h.data.shape[-1]
    gx = add(matmul(x, wx), b)
    gh = matmul(h, wh)
    z = sigmoid(add(narrow(gx, -1, 0, d), narrow(gh, -1, 0, d)))
    r = sigmoid(add(narrow(gx, -1, d, d), narrow(gh, -1, d, d)))
    n = tanh(add(narrow(gx, -1, 2 * d, d), mul(r, narrow(gh, -1, 2 * d, d))))
    one_minus_z = add(mul(z, -1.0), 1.0)
    return add(mul(one_minus_z, n), mul(z, h))


# --------------------------------------------------------------------------
# losses (fused kernels, probability args clamped to [EPS, 1-EPS])
# --------------------------------------------------------------------------

def bce(target, pred: Tensor) -> Tensor:
    """Elementwise binary cross entropy -(t log p + (1-t) log(1-p))."""
    t = _coerce(target, pred.data)
    p = np.clip(pred.data, EPS, 1.0 - EPS)
    live = (pred.data > EPS) & (pred.data < 1.0 - EPS)
    out_data = -(t * np.log(p) + (1.0 - t) * np.log1p(-p))

    def backward(g):
        _accum(pred, g * live * (p - t) / (p * (1.0 - p)))

    return _make(out_data, (pred,), backward)


def ce(target, pred: Tensor, axis: int = -1) -> Tensor:
    """Cross entropy -sum(t log p) over one axis; target is a distribution."""
    t = _coerce(target, pred.data)
    p = np.clip(pred.data, EPS, 1.0 - EPS)
    live = (pred.data > EPS) & (pred.data < 1.0 - EPS)
    out_data = -(t * np.log(p)).sum(axis=axis)

    def backward(g):
        _accum(pred, -np.expand_dims(g, axis) * live * t / p)

    return _make(out_data, (pred,), backward)


def smooth_l1(x: Tensor) -> Tensor:
    """Elementwise smooth L1: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise."""
    a = np.abs(x.data)
    out_data = np.where(a < 1.0, 0.5 * x.data * x.data, a - 0.5)

    def backward(g):
        _accum(x, g * np.where(a < 1.0, x.data, np.sign(x.data)))

    return _make(out_data, (x,), backward)


def kl(p: Tensor, q: Tensor, axis=None) -> Tensor:
    """KL divergence sum p log(p/q), summed over ``axis`` (all axes if None)."""
    pc = np.clip(p.data, EPS, None)
    qc = np.clip(q.data, EPS, None)
    p_live = p.data > EPS
    q_live = q.data > EPS
    logratio = np.log(pc) - np.log(qc)
    out_data = (p.data * logratio).sum(axis=axis)

    def backward(g):
        gg = g if axis is None else np.expand_dims(g, axis)
        _accum(p, gg * (logratio + p_live * (p.data / pc)))
        _accum(q, -gg * q_live * (p.data / qc))

    return _make(out_data, (p, q), backward)


# --------------------------------------------------------------------------
# gradient checking
# --------------------------------------------------------------------------

def grad_check(fn, wrt: list[Tensor], eps: float = 1e-5,
               sample: int | None = None, seed: int = 0) -> float:
    """Max relative error between reverse-mode and central finite differences.

    ``fn`` rebuilds the scalar loss from scratch on each call (it must read
    the current ``wrt`` values).  When ``sample`` is given, at most that many
    coordinates per tensor are checked, chosen by a seeded RNG; otherwise all
    coordinates are checked.  Relative error is |g - ghat| / max(1e-8,
    |g| + |ghat|).
    """
    for t in wrt:
        t.zero_grad()
    out = fn()
    out.backward()
    grads = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in wrt]
    for t in wrt:
        t.zero_grad()

    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for t, g in zip(wrt, grads):
            flat = t.data.reshape(-1)
            gflat = g.reshape(-1)
            if sample is not None and flat.size > sample:
                coords = rng.choice(flat.size, size=sample, replace=False)
            else:
                coords = range(flat.size)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + eps
                hi = fn().item()
                flat[i] = orig - eps
                lo = fn().item()
                flat[i] = orig
                fd = (hi - lo) / (2.0 * eps)
                an = float(gflat[i])
                rel = abs(an - fd) / max(1e-8, abs(an) + abs(fd))
                worst = max(worst, rel)
    return worst


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


def xavier(rng: np.random.Generator, shape, dtype) -> np.ndarray:
    fan_in = shape[0] if len(shape) == 1 else int(np.prod(shape[1:]))
    fan_out = shape[0]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
