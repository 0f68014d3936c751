"""Dense float64 tensors with reverse-mode automatic differentiation.

Every value is a numpy float64 array wrapped in a :class:`Tensor` node.
Operations record their parents and a backward closure; calling
``backward()`` on a scalar walks the graph in reverse topological order.
Nodes whose inputs are all gradient-free are pruned from the graph, so
frozen subnetworks cost nothing at backward time.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from .errors import DegenerateBoxError, InvalidArgumentError

__all__ = [
    "Tensor",
    "ParamStore",
    "as_tensor",
    "concat",
    "conv2d",
    "roi_align",
    "softmax",
    "take_rows",
]


class Tensor:
    """A float64 array plus optional gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    # make `ndarray <op> Tensor` defer to the reflected Tensor operator
    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self.op = "leaf"

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

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, grad={self.requires_grad})"

    # -- graph ----------------------------------------------------------

    def backward(self, grad=None):
        """Accumulate gradients of this (scalar) node into the graph.

        Grad buffers of every node reachable from here are reset first, so
        repeated backward passes do not mix.
        """
        if grad is None:
            if self.data.size != 1:
                raise InvalidArgumentError(
                    f"backward() without a seed requires a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)

        topo = _toposort(self)
        for node in topo:
            node.grad = None
        self.grad = grad
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                # accumulate by re-binding; closures may hand back views
                parent.grad = g if parent.grad is None else parent.grad + g

    # -- operators --------------------------------------------------------

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return getitem(self, key)

    # method-style aliases used throughout the model code
    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, *axes):
        return transpose(self, *axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _toposort(root: Tensor):
    order, seen = [], set()
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
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _node(data, parents, backward, op):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out.op = op
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise arithmetic -----------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), backward, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), backward, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )

    return _node(out, (a, b), backward, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _node(out, (a, b), backward, "div")


def power(a, exponent: float):
    a = as_tensor(a)
    exponent = float(exponent)
    out = np.power(a.data, exponent)

    def backward(g):
        return (g * exponent * np.power(a.data, exponent - 1.0),)

    return _node(out, (a,), backward, "power")


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _node(out, (a,), backward, "exp")


def log(a):
    a = as_tensor(a)
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _node(out, (a,), backward, "log")


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def backward(g):
        return (g * 0.5 / out,)

    return _node(out, (a,), backward, "sqrt")


def sigmoid(a):
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))  # numerically stable logistic

    def backward(g):
        return (g * out * (1.0 - out),)

    return _node(out, (a,), backward, "sigmoid")


def erf(a):
    a = as_tensor(a)
    out = _erf(a.data)
    coeff = 2.0 / np.sqrt(np.pi)

    def backward(g):
        return (g * coeff * np.exp(-a.data * a.data),)

    return _node(out, (a,), backward, "erf")


def clip(a, lo: float, hi: float):
    """Clamp values; gradient passes through where the clamp is inactive."""
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)
    active = (a.data > lo) & (a.data < hi)

    def backward(g):
        return (g * active,)

    return _node(out, (a,), backward, "clip")


# -- shape manipulation ------------------------------------------------------


def reshape(a, *shape):
    a = as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return _node(out, (a,), backward, "reshape")


def transpose(a, *axes):
    a = as_tensor(a)
    if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = tuple(axes[0])
    if not axes:
        axes = tuple(reversed(range(a.ndim)))
    inverse = np.argsort(axes)
    out = a.data.transpose(axes)

    def backward(g):
        return (g.transpose(inverse),)

    return _node(out, (a,), backward, "transpose")


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise InvalidArgumentError("concat of zero tensors")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, tensors, backward, "concat")


def getitem(a, key):
    a = as_tensor(a)
    out = a.data[key]

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, key, g)
        return (grad,)

    return _node(out, (a,), backward, "getitem")


def take_rows(a, indices):
    """Select rows of a 2-d tensor; duplicate indices accumulate gradient."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    out = a.data[idx]

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return _node(out, (a,), backward, "take_rows")


# -- reductions and contractions ---------------------------------------------


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(out, (a,), backward, "sum")


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        count = np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out, (a, b), backward, "matmul")


def softmax(a, axis=-1):
    """Softmax along ``axis``; stable via a detached max shift."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (a,), backward, "softmax")


# -- structured primitives -----------------------------------------------


def conv2d(x, kernel):
    """Same-padded stride-1 convolution of an H×W×C_in map with a k×k kernel.

    ``kernel`` has shape k×k×C_in×C_out with odd k. Differentiable with
    respect to both arguments.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3:
        raise InvalidArgumentError(f"conv2d input must be H×W×C, got shape {x.shape}")
    if kernel.ndim != 4:
        raise InvalidArgumentError(
            f"conv2d kernel must be k×k×C_in×C_out, got shape {kernel.shape}"
        )
    h, w, c_in = x.shape
    k, k2, kc_in, c_out = kernel.shape
    if k != k2:
        raise InvalidArgumentError(f"kernel must be square, got {k}×{k2}")
    if k % 2 != 1:
        raise InvalidArgumentError(f"kernel size must be odd, got {k}")
    if kc_in != c_in:
        raise InvalidArgumentError(
            f"kernel input channels {kc_in} != input channels {c_in}"
        )

    pad = k // 2
    padded = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((h * w, k * k * c_in), dtype=np.float64)
    for tap, (di, dj) in enumerate((i, j) for i in range(k) for j in range(k)):
        cols[:, tap * c_in : (tap + 1) * c_in] = padded[
            di : di + h, dj : dj + w, :
        ].reshape(h * w, c_in)
    kmat = kernel.data.reshape(k * k * c_in, c_out)
    out = (cols @ kmat).reshape(h, w, c_out)

    def backward(g):
        gm = g.reshape(h * w, c_out)
        gkernel = (cols.T @ gm).reshape(kernel.shape)
        gcols = gm @ kmat.T
        gpadded = np.zeros_like(padded)
        for tap, (di, dj) in enumerate((i, j) for i in range(k) for j in range(k)):
            gpadded[di : di + h, dj : dj + w, :] += gcols[
                :, tap * c_in : (tap + 1) * c_in
            ].reshape(h, w, c_in)
        gx = gpadded[pad : pad + h, pad : pad + w, :]
        return gx, gkernel

    return _node(out, (x, kernel), backward, "conv2d")


def roi_align(feature_map, box, out_size=3, samples_per_bin=2):
    """Average-pool bilinear samples of a normalized box region.

    ``box`` is [x1, y1, x2, y2] in [0, 1] image coordinates and is clamped
    before use; the result is out_size×out_size×C. Sample points use the
    half-pixel convention (u*W - 0.5) and are clamped to the map border, so
    a constant map pools to the same constant. Differentiable with respect
    to ``feature_map`` only.
    """
    feature_map = as_tensor(feature_map)
    if feature_map.ndim != 3:
        raise InvalidArgumentError(
            f"roi_align feature map must be H×W×C, got shape {feature_map.shape}"
        )
    if out_size < 1 or samples_per_bin < 1:
        raise InvalidArgumentError("out_size and samples_per_bin must be positive")
    h, w, c = feature_map.shape
    x1, y1, x2, y2 = (float(np.clip(v, 0.0, 1.0)) for v in box)
    if x2 <= x1 or y2 <= y1:
        raise DegenerateBoxError(f"box {list(box)} degenerate after clamping")

    s, n = int(out_size), int(samples_per_bin)
    # sub-bin sample centers in normalized coordinates
    offsets = (np.arange(n) + 0.5) / n
    bins = np.arange(s)
    ys = y1 + (bins[:, None] + offsets[None, :]) / s * (y2 - y1)  # s×n
    xs = x1 + (bins[:, None] + offsets[None, :]) / s * (x2 - x1)
    ypix = np.clip(ys * h - 0.5, 0.0, h - 1.0)
    xpix = np.clip(xs * w - 0.5, 0.0, w - 1.0)

    # all (bin_y, sub_y, bin_x, sub_x) combinations, flattened
    yy = np.repeat(ypix.reshape(s, n, 1, 1), s * n, axis=-1).reshape(s, n, s, n)
    xx = np.broadcast_to(xpix.reshape(1, 1, s, n), (s, n, s, n))
    yf = yy.reshape(-1)
    xf = xx.reshape(-1)

    y0 = np.floor(yf).astype(np.intp)
    x0 = np.floor(xf).astype(np.intp)
    y1i = np.minimum(y0 + 1, h - 1)
    x1i = np.minimum(x0 + 1, w - 1)
    wy = yf - y0
    wx = xf - x0

    w00 = (1 - wy) * (1 - wx)
    w01 = (1 - wy) * wx
    w10 = wy * (1 - wx)
    w11 = wy * wx

    fm = feature_map.data
    samples = (
        w00[:, None] * fm[y0, x0]
        + w01[:, None] * fm[y0, x1i]
        + w10[:, None] * fm[y1i, x0]
        + w11[:, None] * fm[y1i, x1i]
    )
    out = samples.reshape(s, n, s, n, c).mean(axis=(1, 3))

    def backward(g):
        gsamples = np.broadcast_to(
            g.reshape(s, 1, s, 1, c) / (n * n), (s, n, s, n, c)
        ).reshape(-1, c)
        gfm = np.zeros_like(fm)
        np.add.at(gfm, (y0, x0), w00[:, None] * gsamples)
        np.add.at(gfm, (y0, x1i), w01[:, None] * gsamples)
        np.add.at(gfm, (y1i, x0), w10[:, None] * gsamples)
        np.add.at(gfm, (y1i, x1i), w11[:, None] * gsamples)
        return (gfm,)

    return _node(out, (feature_map,), backward, "roi_align")


# -- parameter registry ------------------------------------------------------


class ParamStore:
    """Named tensors, some trainable and some frozen.

    Names are dotted paths; enumeration is always lexicographic so every
    consumer (optimizer, checkpointing, gradient checks) sees the same
    deterministic order.
    """

    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._subset_cache: dict[str, dict[str, Tensor]] = {}

    def add(self, name: str, data, trainable: bool) -> Tensor:
        if name in self._entries:
            raise InvalidArgumentError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=trainable)
        self._entries[name] = t
        self._subset_cache.clear()
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self):
        return sorted(self._entries)

    def items(self):
        for name in self.names():
            yield name, self._entries[name]

    def trainable(self):
        for name, t in self.items():
            if t.requires_grad:
                yield name, t

    def frozen(self):
        for name, t in self.items():
            if not t.requires_grad:
                yield name, t

    def subset(self, prefix: str) -> dict[str, Tensor]:
        """Entries under ``prefix.``, keyed by the remaining suffix.

        Cached: the mapping is rebuilt only when entries are added, so hot
        paths can call this per layer without rescanning every name.
        """
        cached = self._subset_cache.get(prefix)
        if cached is None:
            head = prefix + "."
            cached = {
                name[len(head) :]: t
                for name, t in self._entries.items()
                if name.startswith(head)
            }
            self._subset_cache[prefix] = cached
        return cached

    def zero_grads(self):
        for _, t in self.trainable():
            t.grad = None

    def checksum(self, frozen_only=False) -> int:
        """CRC of the raw bytes of (frozen) entries, for tamper checks."""
        import zlib

        crc = 0
        for name, t in self.items():
            if frozen_only and t.requires_grad:
                continue
            crc = zlib.crc32(name.encode(), crc)
            crc = zlib.crc32(np.ascontiguousarray(t.data).tobytes(), crc)
        return crc

    def clone(self) -> "ParamStore":
        other = ParamStore()
        for name, t in self.items():
            other.add(name, t.data.copy(), t.requires_grad)
        return other
