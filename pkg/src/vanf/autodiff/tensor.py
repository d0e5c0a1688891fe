"""Minimal reverse-mode automatic differentiation on numpy buffers.

Design:

* ``Tensor`` wraps an ndarray plus a ``requires_grad`` flag; leaves created
  by the caller accumulate into ``.grad``.
* ``Tape`` is an append-only record of executed operations. Execution order
  is already topological, so ``backward`` is a single reverse sweep that
  visits each record exactly once. A tape can be consumed once; a second
  ``backward`` raises.
* Operations are module-level functions. They record themselves only when a
  tape is active and some input requires gradients, so value-only code (eval
  renders, finite differences) pays no tape overhead.
* No operation mutates an input buffer; every forward allocates fresh
  output. The only sanctioned mutation of parameter data happens in the
  optimizer, between tapes.

Floating dtype defaults to float64 and can be switched to float32 for
training speed via ``set_default_dtype``; tensors created from float data
are cast to the default.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeError, TapeConsumedError, ValidationError

_state = threading.local()

_DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValidationError(f"unsupported default dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


def _tape_stack() -> list:
    if not hasattr(_state, "stack"):
        _state.stack = []
    return _state.stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad():
    """Suspend recording on any active tape for the enclosed ops."""
    stack = _tape_stack()
    saved = stack[:]
    stack.clear()
    try:
        yield
    finally:
        stack.clear()
        stack.extend(saved)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_op_output")

    def __init__(self, data, requires_grad: bool = False, dtype=None) -> None:
        arr = np.asarray(data)
        if arr.dtype.kind == "f":
            arr = arr.astype(dtype or _DEFAULT_DTYPE, copy=False)
        elif dtype is not None:
            arr = arr.astype(dtype)
        else:
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._op_output = False

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_err(self)

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.requires_grad = False
        out.grad = None
        out._op_output = False
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def _scalar_err(t):
    raise ValidationError(f"item() on non-scalar tensor of shape {t.shape}")


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: tuple, backward: Callable) -> None:
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Append-only operation record; one backward sweep per tape."""

    def __init__(self) -> None:
        self.records: list[_Record] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise ValidationError("tape stack corrupted: exiting a non-active tape")
        stack.pop()

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeConsumedError("backward() already ran on this tape")
        if loss.size != 1:
            raise ValidationError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise ValidationError("loss is not connected to this tape (requires_grad is False)")
        self.consumed = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for rec in reversed(self.records):
            g_out = grads.pop(id(rec.out), None)
            if g_out is None:
                continue
            g_inputs = rec.backward(g_out)
            for t, g in zip(rec.inputs, g_inputs):
                if g is None or not isinstance(t, Tensor) or not t.requires_grad:
                    continue
                prev = grads.get(id(t))
                grads[id(t)] = g if prev is None else prev + g
                if not t._op_output:
                    leaves[id(t)] = t
        for key, leaf in leaves.items():
            g = grads.get(key)
            if g is None:
                continue
            g = g.astype(leaf.data.dtype, copy=False).reshape(leaf.data.shape)
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(data: np.ndarray, inputs: tuple, backward: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op_output = False
    out.requires_grad = False
    tape = active_tape()
    if tape is not None and any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        out.requires_grad = True
        out._op_output = True
        tape.records.append(_Record(out, inputs, backward))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic ---------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data
    return _emit(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data
    return _emit(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _emit(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data
    return _emit(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data / b.data
    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb
    return _emit(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    data = a.data @ b.data
    return _emit(data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


# -- nonlinearities -------------------------------------------------------


def relu(a) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0.0)
    return _emit(data, (a,), lambda g: (g * (a.data > 0.0),))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # stable two-branch form; exact 0.5 at x = 0
    data = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    data = data.astype(x.dtype, copy=False)
    return _emit(data, (a,), lambda g: (g * data * (1.0 - data),))


def softplus(a) -> Tensor:
    a = _as_tensor(a)
    data = np.logaddexp(0.0, a.data).astype(a.data.dtype, copy=False)
    def backward(g):
        x = a.data
        s = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        return (g * s,)
    return _emit(data, (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    data = np.tanh(a.data)
    return _emit(data, (a,), lambda g: (g * (1.0 - data * data),))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    data = np.exp(a.data)
    return _emit(data, (a,), lambda g: (g * data,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    data = np.log(a.data)
    return _emit(data, (a,), lambda g: (g / a.data,))


def abs_(a) -> Tensor:
    a = _as_tensor(a)
    data = np.abs(a.data)
    return _emit(data, (a,), lambda g: (g * np.sign(a.data),))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only where lo < x < hi (zero at the rails)."""
    a = _as_tensor(a)
    data = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)
    return _emit(data, (a,), lambda g: (g * inside,))


# -- reductions and shape ops ---------------------------------------------


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)
    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, a.shape).copy(),)
    return _emit(np.asarray(data), (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2 / count, a.shape).copy(),)
    return _emit(np.asarray(data), (a,), backward)


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(p) for p in parts]
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)
    def backward(g):
        outs = []
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            outs.append(g[tuple(sl)])
        return tuple(outs)
    return _emit(data, tuple(ts), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)
    return _emit(data, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = np.ascontiguousarray(np.transpose(a.data, axes))
    return _emit(data, (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a, key) -> Tensor:
    a = _as_tensor(a)
    data = a.data[key]
    if not isinstance(data, np.ndarray):
        data = np.asarray(data)
    uses_arrays = isinstance(key, np.ndarray) or (
        isinstance(key, tuple) and any(isinstance(k, np.ndarray) for k in key)
    )
    def backward(g):
        ga = np.zeros_like(a.data)
        if uses_arrays:
            np.add.at(ga, key, g)
        else:
            ga[key] = g
        return (ga,)
    return _emit(data, (a,), backward)


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = np.broadcast_to(a.data, shape).copy()
    return _emit(data, (a,), lambda g: (_unbroadcast(g, a.shape),))


# -- structured ops ---------------------------------------------------------


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2D convolution (cross-correlation) over NCHW input with zero padding."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError("conv2d", x.shape, w.shape)
    if stride not in (1, 2):
        raise ValidationError(f"conv2d stride must be 1 or 2, got {stride}")
    bt = _as_tensor(b) if b is not None else None
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError("conv2d output", (n, f, oh, ow))
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    out = np.zeros((n, f, oh, ow), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            out += np.einsum("nchw,fc->nfhw", xs, w.data[:, :, i, j], optimize=True)
    if bt is not None:
        out += bt.data.reshape(1, f, 1, 1)

    def backward(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w.data)
        for i in range(kh):
            for j in range(kw):
                xs = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
                gw[:, :, i, j] = np.einsum("nfhw,nchw->fc", g, xs, optimize=True)
                gxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += np.einsum(
                    "nfhw,fc->nchw", g, w.data[:, :, i, j], optimize=True
                )
        gx = gxp[:, :, padding : padding + h, padding : padding + wd] if padding else gxp
        if bt is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    inputs = (x, w) if bt is None else (x, w, bt)
    return _emit(out, inputs, backward)


def upsample_nearest2x(x) -> Tensor:
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError("upsample_nearest2x", x.shape)
    n, c, h, w = x.shape
    data = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    def backward(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)
    return _emit(data, (x,), backward)


def bilinear_sample(fmap, u: np.ndarray, v: np.ndarray) -> Tensor:
    """Sample a (C, H, W) map at continuous pixel coords; border-clamped.

    (u, v) are plain arrays: the gradient flows only into the feature map.
    Integer coordinates address pixel centers.
    """
    fmap = _as_tensor(fmap)
    if fmap.ndim != 3:
        raise ShapeError("bilinear_sample", fmap.shape)
    c, h, w = fmap.shape
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, w - 1.0)
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    x0 = np.minimum(x0, w - 1)
    y0 = np.minimum(y0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (u - x0).astype(fmap.data.dtype)
    fy = (v - y0).astype(fmap.data.dtype)
    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    m = fmap.data
    data = (
        m[:, y0, x0] * w00 + m[:, y0, x1] * w01 + m[:, y1, x0] * w10 + m[:, y1, x1] * w11
    ).T.copy()

    def backward(g):
        gm = np.zeros((h, w, c), dtype=m.dtype)
        np.add.at(gm, (y0, x0), g * w00[:, None])
        np.add.at(gm, (y0, x1), g * w01[:, None])
        np.add.at(gm, (y1, x0), g * w10[:, None])
        np.add.at(gm, (y1, x1), g * w11[:, None])
        return (np.moveaxis(gm, 2, 0).copy(),)

    return _emit(data, (fmap,), backward)


def quadrature_weights(sigma: np.ndarray, dt: np.ndarray):
    """Plain-numpy emission quadrature: per-sample weights and final transmittance.

    alpha_i = 1 - exp(-sigma_i dt_i); T_i = prod_{j<i}(1 - alpha_j);
    weight_i = T_i alpha_i. Returns (weights, T_final), both non-differentiable.
    """
    e = np.exp(-sigma * dt)
    t_excl = np.cumprod(e, axis=-1)
    t = np.concatenate([np.ones_like(e[..., :1]), t_excl[..., :-1]], axis=-1)
    weights = t * (1.0 - e)
    return weights, t_excl[..., -1]


def composite_rays(sigma, rgb, dt: np.ndarray, background: np.ndarray) -> Tensor:
    """Volume-render rays: returns (R, 4) tensor of [r, g, b, alpha].

    ``sigma`` is (R, S), ``rgb`` is (R, S, 3); ``dt`` (R, S) and
    ``background`` (3,) are constants. Remaining transmittance composites the
    background; alpha is the summed sample weight. The backward rule is
    analytic (suffix sums), O(R*S).
    """
    sigma, rgb = _as_tensor(sigma), _as_tensor(rgb)
    if sigma.ndim != 2 or rgb.shape != sigma.shape + (3,):
        raise ShapeError("composite_rays", sigma.shape, rgb.shape)
    if (sigma.data < 0).any():
        raise ValidationError("composite_rays: negative density")
    dt = np.asarray(dt, dtype=sigma.data.dtype)
    if dt.shape != sigma.shape:
        raise ShapeError("composite_rays dt", sigma.shape, dt.shape)
    bg = np.asarray(background, dtype=sigma.data.dtype).reshape(3)

    e = np.exp(-sigma.data * dt)                      # (R, S)
    t_incl = np.cumprod(e, axis=1)                    # T_{i+1} = prod_{j<=i} e_j
    t = np.concatenate([np.ones_like(e[:, :1]), t_incl[:, :-1]], axis=1)
    w = t * (1.0 - e)                                 # (R, S)
    t_final = t_incl[:, -1]                           # (R,)
    pix = np.einsum("rs,rsc->rc", w, rgb.data) + t_final[:, None] * bg[None, :]
    alpha = w.sum(axis=1)
    out = np.concatenate([pix, alpha[:, None]], axis=1)

    def backward(g):
        g_pix = g[:, :3]                              # (R, 3)
        g_alpha = g[:, 3]                             # (R,)
        cg = np.einsum("rsc,rc->rs", rgb.data, g_pix)           # c_k . g
        wcg = w * cg
        # suffix_{k+1} = sum_{i>k} w_i (c_i . g)
        suffix = np.flip(np.cumsum(np.flip(wcg, axis=1), axis=1), axis=1)
        suffix_next = np.concatenate([suffix[:, 1:], np.zeros_like(suffix[:, :1])], axis=1)
        bg_g = g_pix @ bg                              # (R,)
        d_sigma = dt * (
            t_incl * cg - suffix_next - (t_final * bg_g)[:, None] + (g_alpha * t_final)[:, None]
        )
        d_rgb = w[:, :, None] * g_pix[:, None, :]
        return d_sigma, d_rgb

    return _emit(out, (sigma, rgb), backward)
