"""Reverse-mode automatic differentiation over dense numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` and remembers how it was produced.
Calling :func:`backward` on a scalar tensor walks the recorded graph in
reverse topological order and fills ``.grad`` on every reachable tensor that
requires a gradient.

Binary elementwise ops require equal shapes; there is no implicit
broadcasting. Biases enter through :func:`affine`.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from relata.errors import ArgumentError, DimensionError, NumericError

DEFAULT_DTYPE = np.float32

GradFn = Callable[[np.ndarray], np.ndarray]


def _require_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite value in operand")


class Tensor:
    """Dense array node in a differentiation graph.

    ``grad`` is materialized lazily: reading it before any backward pass
    reaches this tensor yields zeros of the right shape.
    """

    __slots__ = ("data", "requires_grad", "_grad", "_parents", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None,
                 _parents: tuple[tuple["Tensor", GradFn], ...] = ()):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE if dtype is None else dtype)
        _require_finite(arr)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad or bool(_parents)
        self._grad: np.ndarray | None = None
        self._parents = _parents
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = None if value is None else np.asarray(value, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self._grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ArgumentError(f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _node(data: np.ndarray, parents: Iterable[tuple[Tensor, GradFn]]) -> Tensor:
    live = tuple((p, fn) for p, fn in parents if p.requires_grad)
    _require_finite(data)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = bool(live)
    out._grad = None
    out._parents = live
    out.name = None
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _node(a.data + b.data, ((a, lambda g: g), (b, lambda g: g)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _node(a.data - b.data, ((a, lambda g: g), (b, lambda g: -g)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data
    return _node(ad * bd, ((a, lambda g: g * bd), (b, lambda g: g * ad)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, ((a, lambda g: -g),))


def scale(a, c: float) -> Tensor:
    """Multiply by a constant scalar."""
    a = as_tensor(a)
    if not np.isfinite(c):
        raise NumericError("non-finite scale factor")
    c = a.data.dtype.type(c)
    return _node(a.data * c, ((a, lambda g: g * c),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    _require_finite(a.data)
    y = np.tanh(a.data)
    return _node(y, ((a, lambda g: g * (1 - y * y)),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split on sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    _require_finite(a.data)
    y = _sigmoid(a.data)
    return _node(y, ((a, lambda g: g * y * (1 - y)),))


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
    return np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))


def log_sigmoid(a) -> Tensor:
    """``log(sigmoid(x))`` evaluated as ``-softplus(-x)``."""
    a = as_tensor(a)
    _require_finite(a.data)
    x = a.data
    y = -_softplus(-x)
    return _node(y, ((a, lambda g: g * _sigmoid(-x)),))


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_finite(a.data, b.data)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _node(ad @ bd, ((a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g)))


def affine(x, w, b) -> Tensor:
    """``x @ w + b`` with ``b`` added to every row of the product."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require_finite(x.data, w.data, b.data)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"affine: incompatible shapes {x.shape} and {w.shape}")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"affine: bias shape {b.shape} vs weight shape {w.shape}")
    xd, wd = x.data, w.data
    return _node(
        xd @ wd + b.data,
        (
            (x, lambda g: g @ wd.T),
            (w, lambda g: xd.T @ g),
            (b, lambda g: g.sum(axis=0, dtype=np.float64).astype(g.dtype)),
        ),
    )


def dot(a, b) -> Tensor:
    """Inner product of two equal-shape tensors, as a scalar."""
    return sum_(mul(a, b))


# ---------------------------------------------------------------- structure

def concat(parts: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ArgumentError("concat of an empty list")
    nd = parts[0].data.ndim
    ax = axis % nd if nd else 0
    for p in parts[1:]:
        if p.data.ndim != nd or any(
            s != t for i, (s, t) in enumerate(zip(p.shape, parts[0].shape)) if i != ax
        ):
            raise DimensionError(
                f"concat: shape mismatch {parts[0].shape} vs {p.shape} along axis {axis}"
            )
    if len(parts) == 1:
        return parts[0]
    data = np.concatenate([p.data for p in parts], axis=ax)
    bounds = np.cumsum([0] + [p.shape[ax] for p in parts])

    def slicer(lo, hi):
        index = [slice(None)] * nd
        index[ax] = slice(lo, hi)
        index = tuple(index)
        return lambda g: g[index]

    return _node(data, ((p, slicer(bounds[i], bounds[i + 1])) for i, p in enumerate(parts)))


def split(a, sections: int, axis: int = -1) -> list[Tensor]:
    """Split into ``sections`` equal slices along ``axis``."""
    a = as_tensor(a)
    ax = axis % a.data.ndim
    width = a.shape[ax]
    if sections < 1 or width % sections:
        raise DimensionError(f"split: axis of width {width} not divisible by {sections}")
    step = width // sections
    out = []
    for k in range(sections):
        index = [slice(None)] * a.data.ndim
        index[ax] = slice(k * step, (k + 1) * step)
        index = tuple(index)

        def grad_fn(g, index=index):
            full = np.zeros_like(a.data)
            full[index] = g
            return full

        out.append(_node(a.data[index], ((a, grad_fn),)))
    return out


def take(a, indices) -> Tensor:
    """Gather rows ``a[indices]``; the gradient scatter-adds back."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise DimensionError(f"take: indices must be 1-d, got shape {idx.shape}")
    if idx.size and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise ArgumentError(f"take: index out of range for {a.shape[0]} rows")

    def grad_fn(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return full

    return _node(a.data[idx], ((a, grad_fn),))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {old} as {tuple(shape)}") from exc
    return _node(data, ((a, lambda g: g.reshape(old)),))


def sum_(a, axis: int | None = None) -> Tensor:
    """Sum with float64 accumulation, cast back to the operand dtype."""
    a = as_tensor(a)
    data = np.asarray(a.data.sum(axis=axis, dtype=np.float64), dtype=a.dtype)
    shape = a.shape

    def grad_fn(g):
        if axis is None:
            return np.full(shape, g, dtype=a.dtype)
        return np.broadcast_to(np.expand_dims(g, axis), shape).astype(a.dtype)

    return _node(data, ((a, grad_fn),))


def mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis), 1.0 / n)


# ---------------------------------------------------------------- backward

def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Populate ``.grad`` of every tensor reachable from the scalar ``root``.

    Gradients from this pass overwrite earlier ones; contributions arriving
    along several paths are summed.
    """
    if root.data.size != 1:
        raise ArgumentError(f"backward needs a scalar root, got shape {root.shape}")
    order = _topological(root)
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node._grad = g
        for parent, fn in node._parents:
            contrib = fn(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = contrib
