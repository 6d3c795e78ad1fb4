"""Minimal reverse-mode automatic differentiation on float64 numpy arrays.

The computation graph is implicit: every Tensor produced by an operation keeps
references to its parent Tensors plus a closure that routes the output
gradient back to them.  Tensors are numbered in creation order, so parent ids
are always smaller than child ids and creation order is already a topological
order.  ``backward`` walks the sub-graph reachable from the loss exactly once
per node (each node's ``bwd_visits`` counter is incremented, which the tests
use to assert the exactly-once property).

Only the operations this project needs are provided; there is no general
broadcasting.  Elementwise binary ops require equal shapes (python scalars are
allowed), reductions are full or axis-tuple sums, and conv/dense carry their
bias handling internally.

All arithmetic is float64.  With ``set_debug_checks(True)`` every forward op
asserts its output is finite and raises ``FloatingPointError`` otherwise;
the check is off by default because it costs a full pass over the data.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager

import numpy as np

_ids = itertools.count()
_grad_enabled = True
_debug_checks = False


def set_debug_checks(on: bool) -> None:
    """Toggle per-op finiteness checks (NaN/Inf in an op output raises)."""
    global _debug_checks
    _debug_checks = bool(on)


def debug_checks_enabled() -> bool:
    return _debug_checks


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference-only forward)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A float64 array node in the reverse-mode graph."""

    __slots__ = ("data", "grad", "requires_grad", "op", "parents",
                 "_backward", "node_id", "bwd_visits")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self.parents = ()
        self._backward = None
        self.node_id = next(_ids)
        self.bwd_visits = 0

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A constant view of this tensor's values, cut off from the graph."""
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out.op = "leaf"
        out.parents = ()
        out._backward = None
        out.node_id = next(_ids)
        out.bwd_visits = 0
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op}, grad={self.requires_grad})"

    # Operator sugar; all handed to the module-level functions.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self):
        return tmean(self)

    def backward(self):
        backward(self)


def _wrap(data: np.ndarray, parents, op: str, bwd) -> Tensor:
    """Create a graph node; collapses to a constant leaf under no_grad."""
    if _debug_checks and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values produced by op '{op}'")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.node_id = next(_ids)
    out.bwd_visits = 0
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.op = op
        out.parents = tuple(parents)
        out._backward = bwd
    else:
        out.requires_grad = False
        out.op = "leaf" if not _grad_enabled else op
        out.parents = tuple(parents) if _grad_enabled else ()
        out._backward = None
    return out


def _acc(t: Tensor, g: np.ndarray, owned: bool = True) -> None:
    """Accumulate a gradient contribution into t.grad.

    ``owned=False`` marks contributions that alias another tensor's buffer
    (views from reshape/concat); those are copied before being stored.
    """
    if t.grad is None:
        t.grad = g if owned else g.copy()
    else:
        t.grad += g


def _as_const(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape and a.data.ndim > 0 and b.data.ndim > 0:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def graph_nodes(root: Tensor) -> list:
    """All nodes feeding ``root``, in topological (creation) order."""
    seen = set()
    order = []
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    order.sort(key=lambda n: n.node_id)
    return order


def backward(loss: Tensor) -> None:
    """Reverse pass from a scalar loss; accumulates into leaf ``grad``s."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    nodes = graph_nodes(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(nodes):
        node.bwd_visits += 1
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    # Intermediate grads are not needed once leaves are populated.
    for node in nodes:
        if node._backward is not None and node is not loss:
            node.grad = None


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# Elementwise and reduction ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        a = _as_const(a)
        s = float(b)

        def bwd(g, a=a):
            if a.requires_grad:
                _acc(a, g, owned=False)

        return _wrap(a.data + s, (a,), "add_scalar", bwd)
    if not isinstance(a, Tensor):
        return add(b, a)
    _check_same_shape(a, b, "add")

    def bwd(g, a=a, b=b):
        if a.requires_grad:
            _acc(a, g, owned=False)
        if b.requires_grad:
            _acc(b, g, owned=False)

    return _wrap(a.data + b.data, (a, b), "add", bwd)


def sub(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    if not isinstance(a, Tensor):
        s = float(a)
        b_ = b

        def bwd(g, b_=b_):
            if b_.requires_grad:
                _acc(b_, -g)

        return _wrap(s - b_.data, (b_,), "rsub_scalar", bwd)
    _check_same_shape(a, b, "sub")

    def bwd(g, a=a, b=b):
        if a.requires_grad:
            _acc(a, g, owned=False)
        if b.requires_grad:
            _acc(b, -g)

    return _wrap(a.data - b.data, (a, b), "sub", bwd)


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        a = _as_const(a)
        s = float(b)

        def bwd(g, a=a, s=s):
            if a.requires_grad:
                _acc(a, g * s)

        return _wrap(a.data * s, (a,), "mul_scalar", bwd)
    if not isinstance(a, Tensor):
        return mul(b, a)
    _check_same_shape(a, b, "mul")

    def bwd(g, a=a, b=b):
        if a.requires_grad:
            _acc(a, g * b.data)
        if b.requires_grad:
            _acc(b, g * a.data)

    return _wrap(a.data * b.data, (a, b), "mul", bwd)


def sqdiff(a: Tensor, b: Tensor) -> Tensor:
    """(a - b)**2 elementwise, fused."""
    _check_same_shape(a, b, "sqdiff")
    d = a.data - b.data

    def bwd(g, a=a, b=b, d=d):
        gd = 2.0 * g * d
        if a.requires_grad:
            _acc(a, gd)
        if b.requires_grad:
            _acc(b, -gd)

    return _wrap(d * d, (a, b), "sqdiff", bwd)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bwd(g, a=a, out_data=out_data):
        if a.requires_grad:
            _acc(a, g * out_data)

    return _wrap(out_data, (a,), "exp", bwd)


def log(a: Tensor) -> Tensor:
    def bwd(g, a=a):
        if a.requires_grad:
            _acc(a, g / a.data)

    return _wrap(np.log(a.data), (a,), "log", bwd)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def bwd(g, a=a, out_data=out_data):
        if a.requires_grad:
            # Guard the derivative blow-up at exactly zero.
            _acc(a, g * (0.5 / np.maximum(out_data, 1e-150)))

    return _wrap(out_data, (a,), "sqrt", bwd)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def bwd(g, a=a, out_data=out_data):
        if a.requires_grad:
            _acc(a, g * (out_data > 0.0))

    return _wrap(out_data, (a,), "relu", bwd)


def sigmoid(a: Tensor) -> Tensor:
    """Elementwise 1/(1+exp(-x)); output strictly inside (0, 1) for finite x."""
    out_data = sigmoid_np(a.data)

    def bwd(g, a=a, out_data=out_data):
        if a.requires_grad:
            _acc(a, g * out_data * (1.0 - out_data))

    return _wrap(out_data, (a,), "sigmoid", bwd)


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    """The same squashing map on a raw array (used for constant targets)."""
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def tsum(a: Tensor, axis=None) -> Tensor:
    if axis is None:
        def bwd(g, a=a):
            if a.requires_grad:
                _acc(a, np.full_like(a.data, float(g)))

        return _wrap(np.asarray(a.data.sum()), (a,), "sum", bwd)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)

    def bwd(g, a=a, axes=axes):
        if a.requires_grad:
            ge = np.expand_dims(g, axes)
            _acc(a, np.broadcast_to(ge, a.data.shape), owned=False)

    return _wrap(a.data.sum(axis=axes), (a,), "sum_axis", bwd)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g, a=a, n=n):
        if a.requires_grad:
            _acc(a, np.full_like(a.data, float(g) / n))

    return _wrap(np.asarray(a.data.mean()), (a,), "mean", bwd)


def reshape(a: Tensor, shape) -> Tensor:
    def bwd(g, a=a):
        if a.requires_grad:
            _acc(a, g.reshape(a.data.shape), owned=False)

    return _wrap(a.data.reshape(shape), (a,), "reshape", bwd)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat: empty input list")
    base = list(tensors[0].data.shape)
    for t in tensors[1:]:
        other = list(t.data.shape)
        if len(other) != len(base) or any(
                o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis):
            raise ValueError(f"concat: incompatible shapes {base} vs {other}")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, tensors=tensors, offsets=offsets, axis=axis):
        idx = [slice(None)] * g.ndim
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx[axis] = slice(int(lo), int(hi))
                _acc(t, g[tuple(idx)], owned=False)

    return _wrap(np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), "concat", bwd)


# ---------------------------------------------------------------------------
# Structured ops: dense, conv2d, resampling
# ---------------------------------------------------------------------------

def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map [N,F] @ [F,G] (+ bias[G])."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ValueError(f"dense: need 2-D input/weight, got {x.data.shape} and {weight.data.shape}")
    if x.data.shape[1] != weight.data.shape[0]:
        raise ValueError(f"dense: inner dims disagree, input {x.data.shape} vs weight {weight.data.shape}")
    out_data = x.data @ weight.data
    parents = [x, weight]
    if bias is not None:
        if bias.data.shape != (weight.data.shape[1],):
            raise ValueError(f"dense: bias shape {bias.data.shape} does not match output dim {weight.data.shape[1]}")
        out_data = out_data + bias.data
        parents.append(bias)

    def bwd(g, x=x, weight=weight, bias=bias):
        if x.requires_grad:
            _acc(x, g @ weight.data.T)
        if weight.requires_grad:
            _acc(weight, x.data.T @ g)
        if bias is not None and bias.requires_grad:
            _acc(bias, g.sum(axis=0))

    return _wrap(out_data, tuple(parents), "dense", bwd)


def _pack_windows(x: np.ndarray, kh: int, kw: int, stride: int, padding):
    """im2col in [C*kh*kw, N*oh*ow] layout (fast to build and to multiply)."""
    n, c = x.shape[0], x.shape[1]
    ph, pw = padding if isinstance(padding, tuple) else (padding, padding)
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    cols = win.transpose(1, 4, 5, 0, 2, 3).reshape(c * kh * kw, n * oh * ow)
    return cols, oh, ow


def _conv_gemm(cols: np.ndarray, kmat: np.ndarray, n: int, oh: int, ow: int) -> np.ndarray:
    o = kmat.shape[0]
    out = (kmat @ cols).reshape(o, n, oh, ow)
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0,
           bias: Tensor | None = None) -> Tensor:
    """2-D cross-correlation: x[N,C,H,W] * kernel[O,C,kh,kw] -> [N,O,H',W']."""
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ValueError(f"conv2d: need 4-D input/kernel, got {x.data.shape} and {kernel.data.shape}")
    n, c, h, w = x.data.shape
    o, ck, kh, kw = kernel.data.shape
    if c != ck:
        raise ValueError(f"conv2d: input channels {x.data.shape} do not match kernel {kernel.data.shape}")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be positive, got {stride}")
    if padding < 0:
        raise ValueError(f"conv2d: padding must be non-negative, got {padding}")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ValueError(
            f"conv2d: non-integer output extent for input {x.data.shape}, "
            f"kernel {kernel.data.shape}, stride {stride}, padding {padding}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError(f"conv2d: kernel {kernel.data.shape} larger than padded input {x.data.shape}")
    if bias is not None and bias.data.shape != (o,):
        raise ValueError(f"conv2d: bias shape {bias.data.shape} does not match {o} output channels")
    if padding >= kh or padding >= kw:
        raise ValueError(f"conv2d: padding {padding} must be smaller than the kernel extent")

    if kh == 1 and kw == 1 and stride == 1 and padding == 0:
        return _conv1x1(x, kernel, bias)
    if kh == 2 and kw == 2 and stride == 2 and padding == 0:
        return _conv2x2s2(x, kernel, bias)

    cols, oh, ow = _pack_windows(x.data, kh, kw, stride, padding)
    kmat = kernel.data.reshape(o, c * kh * kw)
    out_data = _conv_gemm(cols, kmat, n, oh, ow)
    if bias is not None:
        out_data += bias.data[None, :, None, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd(g, x=x, kernel=kernel, bias=bias, cols=cols, n=n, c=c, h=h, w=w,
            oh=oh, ow=ow, kh=kh, kw=kw, stride=stride, padding=padding):
        gmat = g.transpose(1, 0, 2, 3).reshape(g.shape[1], n * oh * ow)
        if kernel.requires_grad:
            _acc(kernel, (gmat @ cols.T).reshape(kernel.data.shape))
        if bias is not None and bias.requires_grad:
            _acc(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            # dX is the stride-1 convolution of the (dilated, padded) output
            # gradient with the flipped kernel, channels swapped.
            if stride > 1:
                gd = np.zeros((n, g.shape[1], (oh - 1) * stride + 1, (ow - 1) * stride + 1))
                gd[:, :, ::stride, ::stride] = g
            else:
                gd = g
            kflip = np.ascontiguousarray(
                kernel.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)).reshape(c, -1)
            gcols, ih, iw = _pack_windows(gd, kh, kw, 1, (kh - 1 - padding, kw - 1 - padding))
            _acc(x, _conv_gemm(gcols, kflip, n, ih, iw))

    return _wrap(out_data, parents, "conv2d", bwd)


def _conv2x2s2(x: Tensor, kernel: Tensor, bias: Tensor | None) -> Tensor:
    # Non-overlapping 2x2 windows: space-to-depth plus one batched gemm.
    n, c, h, w = x.data.shape
    o = kernel.data.shape[0]
    oh, ow = h // 2, w // 2
    xs = np.ascontiguousarray(
        x.data.reshape(n, c, oh, 2, ow, 2).transpose(0, 1, 3, 5, 2, 4)
    ).reshape(n, 4 * c, oh * ow)
    kmat = kernel.data.reshape(o, 4 * c)
    out_data = np.matmul(kmat[None], xs)
    if bias is not None:
        out_data += bias.data[None, :, None]
    out_data = out_data.reshape(n, o, oh, ow)
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd(g, x=x, kernel=kernel, bias=bias, xs=xs, kmat=kmat,
            n=n, c=c, h=h, w=w, o=o, oh=oh, ow=ow):
        gr = g.reshape(n, o, oh * ow)
        if kernel.requires_grad:
            _acc(kernel, np.matmul(gr, xs.transpose(0, 2, 1)).sum(axis=0)
                 .reshape(kernel.data.shape))
        if bias is not None and bias.requires_grad:
            _acc(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dxs = np.matmul(kmat.T[None], gr).reshape(n, c, 2, 2, oh, ow)
            _acc(x, np.ascontiguousarray(
                dxs.transpose(0, 1, 4, 2, 5, 3)).reshape(n, c, h, w))

    return _wrap(out_data, parents, "conv2x2s2", bwd)


def _conv1x1(x: Tensor, kernel: Tensor, bias: Tensor | None) -> Tensor:
    # 1x1 stride-1 fast path: one batched gemm, no window extraction.
    n, c, h, w = x.data.shape
    o = kernel.data.shape[0]
    k2 = kernel.data.reshape(o, c)
    xr = x.data.reshape(n, c, h * w)
    out_data = np.matmul(k2[None], xr)
    if bias is not None:
        out_data += bias.data[None, :, None]
    out_data = out_data.reshape(n, o, h, w)
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd(g, x=x, kernel=kernel, bias=bias, k2=k2, xr=xr, n=n, c=c, h=h, w=w, o=o):
        gr = g.reshape(n, o, h * w)
        if kernel.requires_grad:
            _acc(kernel, np.matmul(gr, xr.transpose(0, 2, 1)).sum(axis=0).reshape(kernel.data.shape))
        if bias is not None and bias.requires_grad:
            _acc(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            _acc(x, np.matmul(k2.T[None], gr).reshape(n, c, h, w))

    return _wrap(out_data, parents, "conv1x1", bwd)


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    if x.data.ndim != 4:
        raise ValueError(f"upsample_nearest: need 4-D input, got {x.data.shape}")
    n, c, h, w = x.data.shape
    out_data = x.data.repeat(factor, axis=2).repeat(factor, axis=3)

    def bwd(g, x=x, n=n, c=c, h=h, w=w, factor=factor):
        if x.requires_grad:
            _acc(x, g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)))

    return _wrap(out_data, (x,), "upsample_nearest", bwd)


def downsample_stride(x: Tensor, step: int = 2) -> Tensor:
    if x.data.ndim != 4:
        raise ValueError(f"downsample_stride: need 4-D input, got {x.data.shape}")

    def bwd(g, x=x, step=step):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[:, :, ::step, ::step] = g
            _acc(x, dx)

    return _wrap(np.ascontiguousarray(x.data[:, :, ::step, ::step]), (x,), "downsample_stride", bwd)


def gaussian_sample(mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
    """Reparameterized draw mu + exp(logvar/2) * eps with eps held constant."""
    _check_same_shape(mu, logvar, "gaussian_sample")
    if eps.shape != mu.data.shape:
        raise ValueError(f"gaussian_sample: eps shape {eps.shape} != mu shape {mu.data.shape}")
    return add(mu, mul(exp(mul(logvar, 0.5)), Tensor(eps)))
