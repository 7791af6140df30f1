"""Dense float64 tensors with reverse-mode autodiff.

Values live in numpy arrays (N,C,H,W for images/features, any rank for
reductions). Every differentiable op records a backward closure on a dynamic
tape; `backward()` on a scalar walks the tape in reverse topological order and
accumulates into `.grad`. Repeated backward calls keep accumulating until
`zero_grad()`.
"""

import contextlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(data):
    return np.asarray(data, dtype=np.float64, order="C")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        backward(self)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return _binary(self, other, np.add, lambda go, a, b: (go, go))

    __radd__ = __add__

    def __sub__(self, other):
        return _binary(self, other, np.subtract, lambda go, a, b: (go, -go))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return _binary(self, other, np.multiply,
                       lambda go, a, b: (go * b, go * a))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _binary(self, other, np.divide,
                       lambda go, a, b: (go / b, -go * a / (b * b)))

    def __neg__(self):
        return _unary(self, -self.data, lambda go, x: -go)

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def grad_fn(go, x):
            g = go
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, x.shape)

        return _unary(self, out_data, grad_fn)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    # -- pointwise nonlinearities -------------------------------------------

    def relu(self):
        return _unary(self, np.maximum(self.data, 0.0),
                      lambda go, x: go * (x > 0.0))

    def sigmoid(self):
        x = self.data
        y = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        return _unary(self, y, lambda go, _x, _y=y: go * _y * (1.0 - _y))

    def softplus(self):
        y = np.logaddexp(0.0, self.data)

        def grad_fn(go, x):
            s = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                         np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
            return go * s

        return _unary(self, y, grad_fn)

    def abs(self):
        return _unary(self, np.abs(self.data), lambda go, x: go * np.sign(x))

    def clamp(self, lo=None, hi=None):
        """Clip to [lo, hi]; gradient passes only strictly inside the range."""
        y = np.clip(self.data, lo, hi)
        mask = np.ones_like(self.data, dtype=bool)
        if lo is not None:
            mask &= self.data > lo
        if hi is not None:
            mask &= self.data < hi
        return _unary(self, y, lambda go, x: go * mask)


def _record(out, parents, backward_fn):
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unary(x, out_data, grad_fn):
    out = Tensor(out_data)

    def backward_fn():
        if x.requires_grad:
            x._accumulate(grad_fn(out.grad, x.data))

    return _record(out, (x,), backward_fn)


def _unbroadcast(g, shape):
    """Sum grad g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary(a, b, fwd, grads):
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=np.float64))
    if not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=np.float64))
    out = Tensor(fwd(a.data, b.data))

    def backward_fn():
        ga, gb = grads(out.grad, a.data, b.data)
        if a.requires_grad:
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _record(out, (a, b), backward_fn)


def backward(loss):
    """Populate grads of everything `loss` depends on. `loss` must be scalar.

    Interior nodes get a fresh grad buffer every pass; leaf tensors
    (parameters, inputs) keep accumulating until `zero_grad()`.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar, got shape {loss.shape}")
    # iterative post-order topological sort (graphs can be deep)
    topo, visited, stack = [], set(), [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    for node in topo:
        if node._backward is not None:
            node.grad = None
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()
            node.grad = None  # interior grads are per-pass scratch


# -- convolution -------------------------------------------------------------


@dataclass
class ConvKernel:
    """Square conv kernel: weights (C_out, C_in, k, k) plus optional bias (C_out,)."""

    weights: Tensor
    bias: Tensor = None

    def __post_init__(self):
        if not isinstance(self.weights, Tensor):
            self.weights = Tensor(self.weights)
        w = self.weights.data
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ShapeError(f"kernel weights must be (C_out, C_in, k, k), got {w.shape}")
        k = w.shape[2]
        if k % 2 == 0:
            raise ConfigError(f"kernel size must be odd, got {k}")
        if k not in (1, 3, 5, 7):
            raise ConfigError(f"kernel size must be one of 1/3/5/7, got {k}")
        if not np.isfinite(w).all():
            raise DomainError("kernel weights must be finite")
        if self.bias is not None and not isinstance(self.bias, Tensor):
            self.bias = Tensor(self.bias)
        if self.bias is not None and self.bias.data.shape != (w.shape[0],):
            raise ShapeError(f"bias must have shape ({w.shape[0]},), got {self.bias.data.shape}")

    @property
    def k(self):
        return self.weights.data.shape[2]

    @property
    def c_in(self):
        return self.weights.data.shape[1]

    @property
    def c_out(self):
        return self.weights.data.shape[0]


def _conv2d_forward(x, w, stride, padding):
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv output would be empty for input {x.shape} with k={k}")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((n, co, ho, wo))
    for i in range(k):
        for j in range(k):
            xs = xp[:, :, i:i + stride * (ho - 1) + 1:stride,
                    j:j + stride * (wo - 1) + 1:stride]
            # (co,ci)·(n,ci,ho,wo) -> (co,n,ho,wo)
            out += np.tensordot(w[:, :, i, j], xs, axes=([1], [1])).transpose(1, 0, 2, 3)
    return out, xp


def conv2d_raw(x, weights, bias=None, stride=1, padding=0):
    """conv2d over Tensor weights/bias (used where weights are derived nodes)."""
    if x.ndim != 4:
        raise ShapeError(f"conv input must be 4-d (N,C,H,W), got {x.shape}")
    w = weights.data
    if x.data.shape[1] != w.shape[1]:
        raise ShapeError(f"input has {x.data.shape[1]} channels, kernel expects {w.shape[1]}")
    if stride < 1:
        raise ConfigError(f"stride must be positive, got {stride}")
    if padding < 0:
        raise ConfigError(f"padding must be non-negative, got {padding}")
    out_data, xp = _conv2d_forward(x.data, w, stride, padding)
    if bias is not None:
        out_data += bias.data.reshape(1, -1, 1, 1)
    out = Tensor(out_data)
    parents = (x, weights) if bias is None else (x, weights, bias)

    def backward_fn():
        go = out.grad
        n, c, h, wd = x.data.shape
        co, ci, k, _ = w.shape
        ho, wo = go.shape[2], go.shape[3]
        if weights.requires_grad:
            gw = np.empty_like(w)
            for i in range(k):
                for j in range(k):
                    xs = xp[:, :, i:i + stride * (ho - 1) + 1:stride,
                            j:j + stride * (wo - 1) + 1:stride]
                    gw[:, :, i, j] = np.tensordot(go, xs, axes=([0, 2, 3], [0, 2, 3]))
            weights._accumulate(gw)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    # (ci,co)·(n,co,ho,wo) -> (ci,n,ho,wo)
                    contrib = np.tensordot(w[:, :, i, j], go, axes=([0], [1]))
                    gxp[:, :, i:i + stride * (ho - 1) + 1:stride,
                        j:j + stride * (wo - 1) + 1:stride] += contrib.transpose(1, 0, 2, 3)
            if padding:
                gxp = gxp[:, :, padding:padding + h, padding:padding + wd]
            x._accumulate(gxp)
        if bias is not None and bias.requires_grad:
            bias._accumulate(go.sum(axis=(0, 2, 3)))

    return _record(out, parents, backward_fn)


def conv2d(x, kern, stride=1, padding=0):
    """2-D convolution with zero padding; gradients flow to x, weights, bias."""
    return conv2d_raw(x, kern.weights, kern.bias, stride, padding)


# -- resampling ---------------------------------------------------------------


def avg_downsample2(x):
    """Halve H and W by averaging each 2x2 block."""
    n, c, h, w = _require_4d(x, "avg_downsample2")
    if h % 2 or w % 2:
        raise ShapeError(f"avg_downsample2 needs even extents, got {h}x{w}")
    d = x.data
    out_data = 0.25 * (d[:, :, 0::2, 0::2] + d[:, :, 1::2, 0::2]
                       + d[:, :, 0::2, 1::2] + d[:, :, 1::2, 1::2])
    out = Tensor(out_data)

    def backward_fn():
        if x.requires_grad:
            g = np.zeros_like(d)
            q = 0.25 * out.grad
            g[:, :, 0::2, 0::2] = q
            g[:, :, 1::2, 0::2] = q
            g[:, :, 0::2, 1::2] = q
            g[:, :, 1::2, 1::2] = q
            x._accumulate(g)

    return _record(out, (x,), backward_fn)


def _bilinear_taps(out_len, in_len):
    # output center i maps to source coordinate (i + 0.5)/2 - 0.5, taps clamped
    src = (np.arange(out_len) + 0.5) / 2.0 - 0.5
    i0 = np.floor(src).astype(np.int64)
    frac = src - i0
    lo = np.clip(i0, 0, in_len - 1)
    hi = np.clip(i0 + 1, 0, in_len - 1)
    return lo, hi, frac


def upsample2_bilinear(x):
    """Double H and W with bilinear weights; constants map to constants."""
    n, c, h, w = _require_4d(x, "upsample2_bilinear")
    rlo, rhi, rf = _bilinear_taps(2 * h, h)
    clo, chi, cf = _bilinear_taps(2 * w, w)
    d = x.data
    rows = d[:, :, rlo, :] * (1.0 - rf)[None, None, :, None] \
        + d[:, :, rhi, :] * rf[None, None, :, None]
    out_data = rows[:, :, :, clo] * (1.0 - cf)[None, None, None, :] \
        + rows[:, :, :, chi] * cf[None, None, None, :]
    out = Tensor(out_data)

    def backward_fn():
        if not x.requires_grad:
            return
        go = out.grad
        grows = np.zeros_like(rows)
        np.add.at(grows, (slice(None), slice(None), slice(None), clo),
                  go * (1.0 - cf)[None, None, None, :])
        np.add.at(grows, (slice(None), slice(None), slice(None), chi),
                  go * cf[None, None, None, :])
        gx = np.zeros_like(d)
        np.add.at(gx, (slice(None), slice(None), rlo, slice(None)),
                  grows * (1.0 - rf)[None, None, :, None])
        np.add.at(gx, (slice(None), slice(None), rhi, slice(None)),
                  grows * rf[None, None, :, None])
        x._accumulate(gx)

    return _record(out, (x,), backward_fn)


# -- window helpers ------------------------------------------------------------


def box_sum(x, k):
    """Sliding k x k window sum with zero padding (self-adjoint)."""
    _require_4d(x, "box_sum")
    if k % 2 == 0:
        raise ConfigError(f"box_sum window must be odd, got {k}")
    out = Tensor(_box_sum_data(x.data, k))

    def backward_fn():
        if x.requires_grad:
            x._accumulate(_box_sum_data(out.grad, k))

    return _record(out, (x,), backward_fn)


def _box_sum_data(d, k):
    r = k // 2
    n, c, h, w = d.shape
    xp = np.pad(d, ((0, 0), (0, 0), (r, r), (r, r)))
    out = np.zeros_like(d)
    for i in range(k):
        for j in range(k):
            out += xp[:, :, i:i + h, j:j + w]
    return out


def shift2d(x, dy, dx):
    """Translate content by (dy, dx) pixels, zero-filling exposed borders."""
    _require_4d(x, "shift2d")
    out = Tensor(_shift_data(x.data, dy, dx))

    def backward_fn():
        if x.requires_grad:
            x._accumulate(_shift_data(out.grad, -dy, -dx))

    return _record(out, (x,), backward_fn)


def _shift_data(d, dy, dx):
    n, c, h, w = d.shape
    out = np.zeros_like(d)
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    ysrc = slice(max(-dy, 0), h + min(-dy, 0))
    xsrc = slice(max(-dx, 0), w + min(-dx, 0))
    out[:, :, ys, xs] = d[:, :, ysrc, xsrc]
    return out


def concat_channels(tensors):
    """Concatenate along the channel axis."""
    datas = [t.data for t in tensors]
    out = Tensor(np.concatenate(datas, axis=1))
    splits = np.cumsum([d.shape[1] for d in datas])[:-1]

    def backward_fn():
        pieces = np.split(out.grad, splits, axis=1)
        for t, g in zip(tensors, pieces):
            if t.requires_grad:
                t._accumulate(g)

    return _record(out, tuple(tensors), backward_fn)


def batchnorm(x, gamma, beta, eps=1e-5):
    """Per-channel normalization over (N,H,W) using batch statistics."""
    _require_4d(x, "batchnorm")
    d = x.data
    axes = (0, 2, 3)
    mu = d.mean(axis=axes, keepdims=True)
    var = d.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (d - mu) * inv
    g = gamma.data.reshape(1, -1, 1, 1)
    out = Tensor(xhat * g + beta.data.reshape(1, -1, 1, 1))

    def backward_fn():
        go = out.grad
        if gamma.requires_grad:
            gamma._accumulate((go * xhat).sum(axis=axes))
        if beta.requires_grad:
            beta._accumulate(go.sum(axis=axes))
        if x.requires_grad:
            go_mean = go.mean(axis=axes, keepdims=True)
            gox_mean = (go * xhat).mean(axis=axes, keepdims=True)
            x._accumulate(g * inv * (go - go_mean - xhat * gox_mean))

    return _record(out, (x, gamma, beta), backward_fn)


def _require_4d(x, name):
    if x.ndim != 4:
        raise ShapeError(f"{name} expects a 4-d tensor, got shape {x.shape}")
    return x.data.shape
