"""Reverse-mode automatic differentiation over dense numpy arrays.

A Tensor wraps an ndarray plus a gradient slot and (when it participates in
a graph) a closure that scatters its upstream gradient into its parents.
Graphs are acyclic tapes built eagerly by the op functions below; calling
``backward`` on a scalar loss walks the tape in reverse topological order.

Only what the model zoo needs is implemented: elementwise arithmetic with
broadcasting, matmul, reductions, shape surgery, the usual nonlinearities,
strided 2-D/1-D cross-correlation with its transpose, and overlap-add.
"""

import numpy as np

from .errors import ContractError, ShapeError
from .precision import dtype


class Tensor:
    """A value participating in reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, Tensor):
            raise TypeError("wrap raw array data, not another Tensor")
        self.data = np.asarray(data, dtype=dtype())
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        """A view of the same data with no graph history."""
        t = Tensor.__new__(Tensor)
        t.data = self.data
        t.grad = None
        t.requires_grad = False
        t.name = None
        t._parents = ()
        t._backward = None
        return t

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's grad.

        self must be scalar. Repeated calls without zeroing accumulate.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                if node.grad is not None:
                    node._backward(node.grad)
                node.grad = None  # interior gradients are spent; free them

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None):
    """A leaf tensor flagged for gradient accumulation."""
    return Tensor(np.array(data, dtype=dtype()), requires_grad=True, name=name)


def _make(data, parents, backward_fn):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    track = any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._parents = tuple(parents) if track else ()
    out._backward = backward_fn if track else None
    return out


def _unbroadcast(g, shape):
    """Sum g down to the given (broadcast-source) shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic ------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        a.accumulate_grad(_unbroadcast(g, a.data.shape))
        b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), bwd)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        a.accumulate_grad(_unbroadcast(g, a.data.shape))
        b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _make(a.data - b.data, (a, b), bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), bwd)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        a.accumulate_grad(_unbroadcast(g / b.data, a.data.shape))
        b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(a.data / b.data, (a, b), bwd)


def power(a, p):
    a = as_tensor(a)
    out_data = a.data ** p

    def bwd(g):
        a.accumulate_grad(g * p * a.data ** (p - 1))

    return _make(out_data, (a,), bwd)


# -- matmul and reductions -------------------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    inner_a = a.data.shape[-1]
    inner_b = b.data.shape[0] if b.data.ndim == 1 else b.data.shape[-2]
    if inner_a != inner_b:
        raise ShapeError(f"matmul inner dimensions differ: {a.data.shape} @ {b.data.shape}")

    def bwd(g):
        if a.data.ndim == 1 and b.data.ndim == 1:
            a.accumulate_grad(g * b.data)
            b.accumulate_grad(g * a.data)
        elif b.data.ndim == 1:
            a.accumulate_grad(np.einsum("...i,j->...ij", g, b.data))
            b.accumulate_grad(_unbroadcast(np.einsum("...ij,...i->...j", a.data, g), b.data.shape))
        elif a.data.ndim == 1:
            a.accumulate_grad(_unbroadcast(np.einsum("...ij,...j->...i", b.data, g), a.data.shape))
            b.accumulate_grad(_unbroadcast(np.einsum("i,...j->...ij", a.data, g), b.data.shape))
        else:
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = np.swapaxes(a.data, -1, -2) @ g
            a.accumulate_grad(_unbroadcast(ga, a.data.shape))
            b.accumulate_grad(_unbroadcast(gb, b.data.shape))

    return _make(a.data @ b.data, (a, b), bwd)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        a.accumulate_grad(np.broadcast_to(gg, a.data.shape).copy())

    return _make(np.asarray(out_data), (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))])
    return mul(tsum(a, axis, keepdims), 1.0 / float(n))


# -- shape surgery ---------------------------------------------------------


def reshape(a, *shape):
    a = as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    old = a.data.shape

    def bwd(g):
        a.accumulate_grad(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), bwd)


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    inv = np.argsort(axes)

    def bwd(g):
        a.accumulate_grad(g.transpose(inv))

    return _make(a.data.transpose(axes).copy(), (a,), bwd)


def getitem(a, idx):
    a = as_tensor(a)

    def bwd(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        a.accumulate_grad(buf)

    return _make(a.data[idx].copy(), (a,), bwd)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t.accumulate_grad(piece)

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bwd)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def bwd(g):
        for i, t in enumerate(tensors):
            t.accumulate_grad(np.take(g, i, axis=axis))

    return _make(np.stack([t.data for t in tensors], axis=axis), tensors, bwd)


def pad(a, widths):
    """Zero padding; widths is a per-axis list of (before, after)."""
    a = as_tensor(a)
    slices = tuple(slice(b, b + s) for (b, _), s in zip(widths, a.data.shape))

    def bwd(g):
        a.accumulate_grad(g[slices])

    return _make(np.pad(a.data, widths), (a,), bwd)


# -- nonlinearities --------------------------------------------------------


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def bwd(g):
        a.accumulate_grad(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bwd)


def sigmoid(a):
    a = as_tensor(a)
    out_data = _sigmoid_np(a.data)

    def bwd(g):
        a.accumulate_grad(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bwd)


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def bwd(g):
        a.accumulate_grad(g * out_data)

    return _make(out_data, (a,), bwd)


def log(a):
    a = as_tensor(a)

    def bwd(g):
        a.accumulate_grad(g / a.data)

    return _make(np.log(a.data), (a,), bwd)


def sqrt(a):
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def bwd(g):
        a.accumulate_grad(g * 0.5 / out_data)

    return _make(out_data, (a,), bwd)


def absolute(a):
    a = as_tensor(a)

    def bwd(g):
        a.accumulate_grad(g * np.sign(a.data))

    return _make(np.abs(a.data), (a,), bwd)


def softplus(a):
    """log(1 + exp(a)) in the overflow-safe form max(a,0) + log1p(exp(-|a|))."""
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    sig = _sigmoid_np(a.data)

    def bwd(g):
        a.accumulate_grad(g * sig)

    return _make(out_data, (a,), bwd)


def sin(a):
    a = as_tensor(a)

    def bwd(g):
        a.accumulate_grad(g * np.cos(a.data))

    return _make(np.sin(a.data), (a,), bwd)


def cos(a):
    a = as_tensor(a)

    def bwd(g):
        a.accumulate_grad(-g * np.sin(a.data))

    return _make(np.cos(a.data), (a,), bwd)


def atan2(y, x):
    y, x = as_tensor(y), as_tensor(x)
    denom = y.data * y.data + x.data * x.data

    def bwd(g):
        y.accumulate_grad(_unbroadcast(g * x.data / denom, y.data.shape))
        x.accumulate_grad(_unbroadcast(-g * y.data / denom, x.data.shape))

    return _make(np.arctan2(y.data, x.data), (y, x), bwd)


def prelu(x, alpha, channel_axis=1):
    """x for x >= 0, alpha*x otherwise; alpha has one slope per channel."""
    x, alpha = as_tensor(x), as_tensor(alpha)
    a_shape = [1] * x.data.ndim
    a_shape[channel_axis] = alpha.data.size
    ab = alpha.data.reshape(a_shape)
    neg = x.data < 0
    out_data = np.where(neg, ab * x.data, x.data)

    def bwd(g):
        gx = np.where(neg, ab * g, g)
        x.accumulate_grad(gx)
        ga = np.where(neg, x.data * g, 0.0)
        reduce_axes = tuple(i for i in range(x.data.ndim) if i != channel_axis)
        alpha.accumulate_grad(ga.sum(axis=reduce_axes).reshape(alpha.data.shape))

    return _make(out_data, (x, alpha), bwd)


def leaky_relu(x, slope):
    x = as_tensor(x)
    neg = x.data < 0
    out_data = np.where(neg, slope * x.data, x.data)

    def bwd(g):
        x.accumulate_grad(np.where(neg, slope * g, g))

    return _make(out_data, (x,), bwd)


# -- strided cross-correlation --------------------------------------------
#
# conv2d input is [B, C, F, T], kernels [O, C, kf, kt]; conv1d input is
# [B, C, L], kernels [O, C, k]. Forward and weight gradients go through an
# im2col view + tensordot (BLAS); the input gradient scatters per kernel tap,
# which is cheap because the kernels here are small.


def _win_view2d(xp, kf, kt, sf, st):
    v = np.lib.stride_tricks.sliding_window_view(xp, (kf, kt), axis=(2, 3))
    return v[:, :, ::sf, ::st]  # [B, C, Fo, To, kf, kt]


def conv2d(x, w, stride, padding):
    """Strided 2-D cross-correlation; padding is ((pf0, pf1), (pt0, pt1))."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/kernel, got {x.data.shape} and {w.data.shape}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"channel mismatch: input {x.data.shape} vs kernel {w.data.shape}")
    (pf0, pf1), (pt0, pt1) = padding
    sf, st = stride
    kf, kt = w.data.shape[2], w.data.shape[3]
    xp = np.pad(x.data, ((0, 0), (0, 0), (pf0, pf1), (pt0, pt1)))
    if xp.shape[2] < kf or xp.shape[3] < kt:
        raise ShapeError(f"input {x.data.shape} smaller than kernel {w.data.shape} after padding")
    win = _win_view2d(xp, kf, kt, sf, st)
    out_data = np.ascontiguousarray(
        np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2))

    def bwd(g):
        if w.requires_grad:
            gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))  # [O, C, kf, kt]
            w.accumulate_grad(gw)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for u in range(kf):
                for v in range(kt):
                    # each output element feeds back into tap (u, v)
                    sub = gxp[:, :, u:u + sf * g.shape[2]:sf, v:v + st * g.shape[3]:st]
                    sub += np.einsum("boij,oc->bcij", g, w.data[:, :, u, v], optimize=True)
            x.accumulate_grad(gxp[:, :, pf0:xp.shape[2] - pf1 or None, pt0:xp.shape[3] - pt1 or None])

    return _make(out_data, (x, w), bwd)


def conv_transpose2d(y, w, stride, padding, out_spatial):
    """Adjoint of conv2d(·, w, stride, padding) onto spatial size out_spatial."""
    y, w = as_tensor(y), as_tensor(w)
    if y.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"channel mismatch: input {y.data.shape} vs kernel {w.data.shape}")
    (pf0, pf1), (pt0, pt1) = padding
    sf, st = stride
    kf, kt = w.data.shape[2], w.data.shape[3]
    Fo, To = out_spatial
    Fp, Tp = Fo + pf0 + pf1, To + pt0 + pt1
    B = y.data.shape[0]

    def scatter(ydat):
        zp = np.zeros((B, w.data.shape[1], Fp, Tp), dtype=ydat.dtype)
        for u in range(kf):
            for v in range(kt):
                sub = zp[:, :, u:u + sf * ydat.shape[2]:sf, v:v + st * ydat.shape[3]:st]
                sub += np.einsum("boij,oc->bcij", ydat, w.data[:, :, u, v], optimize=True)
        return zp[:, :, pf0:Fp - pf1 or None, pt0:Tp - pt1 or None]

    out_data = scatter(y.data)

    def bwd(g):
        gp = np.pad(g, ((0, 0), (0, 0), (pf0, pf1), (pt0, pt1)))
        win = _win_view2d(gp, kf, kt, sf, st)
        if y.requires_grad:
            gy = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
            y.accumulate_grad(np.ascontiguousarray(gy))
        if w.requires_grad:
            gw = np.tensordot(y.data, win, axes=([0, 2, 3], [0, 2, 3]))
            w.accumulate_grad(gw)

    return _make(out_data, (y, w), bwd)


def conv1d(x, w, stride, padding):
    """Strided 1-D cross-correlation; x [B, C, L], w [O, C, k], padding (p0, p1)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"channel mismatch: input {x.data.shape} vs kernel {w.data.shape}")
    if x.data.shape[2] < 1:
        raise ShapeError("conv1d input has zero length")
    p0, p1 = padding
    k = w.data.shape[2]
    xp = np.pad(x.data, ((0, 0), (0, 0), (p0, p1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride]
    out_data = np.ascontiguousarray(
        np.tensordot(win, w.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1))

    def bwd(g):
        if w.requires_grad:
            w.accumulate_grad(np.tensordot(g, win, axes=([0, 2], [0, 2])))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for u in range(k):
                sub = gxp[:, :, u:u + stride * g.shape[2]:stride]
                sub += np.einsum("bol,oc->bcl", g, w.data[:, :, u], optimize=True)
            x.accumulate_grad(gxp[:, :, p0:xp.shape[2] - p1 or None])

    return _make(out_data, (x, w), bwd)


def overlap_add(frames, hop, out_len):
    """Sum frames [B, T, W] into a signal [B, L]; frame t starts at t*hop."""
    frames = as_tensor(frames)
    B, T, W = frames.data.shape
    full = (T - 1) * hop + W

    def fold(fdat):
        out = np.zeros((B, full), dtype=fdat.dtype)
        for t in range(T):
            out[:, t * hop:t * hop + W] += fdat[:, t, :]
        return out

    acc = fold(frames.data)
    if out_len <= full:
        out_data = np.ascontiguousarray(acc[:, :out_len])
    else:
        out_data = np.pad(acc, ((0, 0), (0, out_len - full)))

    def bwd(g):
        gfull = np.zeros((B, full), dtype=g.dtype)
        n = min(out_len, full)
        gfull[:, :n] = g[:, :n]
        gf = np.empty_like(frames.data)
        for t in range(T):
            gf[:, t, :] = gfull[:, t * hop:t * hop + W]
        frames.accumulate_grad(gf)

    return _make(out_data, (frames,), bwd)


# -- finite differences ----------------------------------------------------


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of scalar f at x, one coordinate at a time."""
    from .errors import NumericError

    x = np.asarray(x, dtype=np.float64)
    if h <= 0:
        raise ContractError("finite-difference step must be positive")
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"objective returned non-finite value at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
