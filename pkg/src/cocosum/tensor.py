"""Small dense tensor type with reverse-mode automatic differentiation.

Every array the model touches is a :class:`Tensor` wrapping a numpy array.
Operations build a graph of parent links; :func:`backward` orders that graph
into a :class:`GradTape` and runs the recorded backward closures in reverse.
Broadcasting follows numpy semantics for the elementwise kinds only (bias
rows, masks, scalar gates); gradients are summed back to the input shapes.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPES = {"single": np.float32, "double": np.float64}


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        if type(data) is np.ndarray and dtype is None and data.dtype.kind == "f":
            arr = data
        else:
            arr = np.asarray(data, dtype=dtype)
            if arr.dtype.kind != "f":
                arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{tag})"

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def backward(self, wrt: Iterable["Tensor"] | None = None):
        return backward(self, wrt)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _result(data: np.ndarray, parents: tuple[Tensor, ...], op: str, grad_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = grad_fn
        out._op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, kind: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "add")
    return _result(
        a.data + b.data,
        (a, b),
        "add",
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "sub")
    return _result(
        a.data - b.data,
        (a, b),
        "sub",
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "hadamard")
    return _result(
        a.data * b.data,
        (a, b),
        "mul",
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def sigmoid(a: Tensor) -> Tensor:
    # tanh form never overflows
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _result(out, (a,), "tanh", lambda g: (g * (1.0 - out * out),))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    x = a.data
    scale = np.where(x > 0, 1.0, slope).astype(x.dtype)
    return _result(x * scale, (a,), "leaky_relu", lambda g: (g * scale,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), "exp", lambda g: (g * out,))


def log(a: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log; inputs below ``floor`` are clamped (and pass no gradient)."""
    x = a.data
    clamped = np.maximum(x, floor) if floor > 0 else x
    live = (x >= floor).astype(x.dtype) if floor > 0 else 1.0
    return _result(np.log(clamped), (a,), "log", lambda g: (g * live / clamped,))


_UNARY = {"sigmoid": sigmoid, "tanh": tanh}
_BINARY = {"add": add, "hadamard": mul}


def elementwise(kind: str, a: Tensor, b: Tensor | None = None, slope: float = 0.2) -> Tensor:
    """Dispatch one of the pointwise kinds used by the model.

    Binary kinds require equal shapes.
    """
    if kind in _BINARY:
        if b is None:
            raise ValueError(f"{kind} needs two operands")
        if a.shape != b.shape:
            raise ShapeError(f"{kind}: shapes differ, {a.shape} vs {b.shape}")
        return _BINARY[kind](a, b)
    if kind in _UNARY:
        return _UNARY[kind](a)
    if kind == "leaky_relu":
        return leaky_relu(a, slope)
    raise ValueError(f"unknown elementwise kind {kind!r}")


# ---------------------------------------------------------------------------
# linear algebra and shape ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product, batched over leading axes the way ``np.matmul`` does."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def grad_fn(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        gb = np.swapaxes(a.data, -1, -2) @ g if b.requires_grad else None
        return (
            None if ga is None else _unbroadcast(ga, a.shape),
            None if gb is None else _unbroadcast(gb, b.shape),
        )

    return _result(out, (a, b), "matmul", grad_fn)


def transpose(a: Tensor) -> Tensor:
    return _result(
        np.swapaxes(a.data, -1, -2), (a,), "transpose", lambda g: (np.swapaxes(g, -1, -2),)
    )


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    return _result(a.data.reshape(shape), (a,), "reshape", lambda g: (g.reshape(src),))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    src = a.shape

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, src).copy(),)

    return _result(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), "sum", grad_fn)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


class _IndexGrad:
    """Gradient that is nonzero only at ``index``; scattered into one buffer."""

    __slots__ = ("index", "value", "fancy")

    def __init__(self, index, value):
        self.index = index
        self.value = value
        parts = index if isinstance(index, tuple) else (index,)
        self.fancy = any(isinstance(p, (np.ndarray, list)) for p in parts)

    def scatter_into(self, buf: np.ndarray) -> None:
        if self.fancy:
            np.add.at(buf, self.index, self.value)
        else:
            buf[self.index] += self.value


def getitem(a: Tensor, index) -> Tensor:
    return _result(a.data[index], (a,), "getitem", lambda g: (_IndexGrad(index, g),))


def take_rows(table: Tensor, ids) -> Tensor:
    """Embedding lookup: rows of a 2-d table gathered by an integer array."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"token id out of range for embedding with {table.shape[0]} rows")
    return getitem(table, ids)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of nothing")
    ndim = tensors[0].ndim
    ax = axis % ndim if ndim else 0
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            s != u for i, (s, u) in enumerate(zip(base, t.shape)) if i != ax
        ):
            raise ShapeError(f"concat: incompatible shapes {base} and {t.shape} on axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        out = []
        for i in range(len(tensors)):
            sl = [slice(None)] * ndim
            sl[ax] = slice(offsets[i], offsets[i + 1])
            out.append(g[tuple(sl)])
        return out

    return _result(
        np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), "concat", grad_fn
    )


def softmax(v: Tensor, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis`` with max-subtraction.

    ``mask`` (boolean, broadcastable) excludes entries; excluded entries get
    probability exactly 0. Every slice must keep at least one entry.
    """
    x = v.data
    if x.size == 0 or x.shape[axis] == 0:
        raise ShapeError("softmax of an empty vector")
    if mask is None:
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=axis).all():
            raise ShapeError("softmax mask leaves an empty slice")
        top = np.where(mask, x, -np.inf).max(axis=axis, keepdims=True)
        e = np.where(mask, np.exp(np.where(mask, x - top, 0.0)), 0.0).astype(x.dtype)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result(out, (v,), "softmax", grad_fn)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not training or p <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / (1.0 - p)
    return mul(a, Tensor(keep))


# ---------------------------------------------------------------------------
# reverse pass


class GradTape:
    """Operations reachable from a root, in execution (topological) order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    @classmethod
    def from_root(cls, root: Tensor) -> "GradTape":
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
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Populate ``.grad`` on everything reachable from a scalar ``loss``.

    Returns a map from leaf tensors (and any ``wrt`` tensors, which get zeros
    when unreachable) to their gradients.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = GradTape.from_root(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    owned: set[int] = set()  # buffers safe to update in place
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            g = np.zeros_like(node.data)
        node.grad = g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if isinstance(pg, _IndexGrad):
                if key not in grads:
                    grads[key] = np.zeros_like(parent.data)
                elif key not in owned:
                    grads[key] = np.array(grads[key], dtype=parent.dtype)
                owned.add(key)
                pg.scatter_into(grads[key])
            elif key in grads:
                grads[key] = grads[key] + pg
                owned.add(key)
            else:
                grads[key] = np.asarray(pg, dtype=parent.dtype)
                owned.discard(key)
    result = {n: n.grad for n in tape.nodes if n._backward is None}
    on_tape = {id(n) for n in tape.nodes}
    for t in wrt or ():
        if id(t) not in on_tape:
            t.grad = np.zeros_like(t.data)
        result[t] = t.grad
    return result


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    analytic: dict[Tensor, np.ndarray] | None = None,
) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``f`` recomputes the scalar loss from the current values in ``params``
    (perturbed in place). ``analytic`` overrides the backward-pass gradients,
    which is how tests confirm that a corrupted gradient gets flagged.
    """
    if analytic is None:
        for p in params:
            p.grad = None
        loss = f()
        _finite(loss)
        backward(loss, wrt=params)
        analytic = {p: np.array(p.grad, copy=True) for p in params}
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        ana = np.asarray(analytic[p]).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = _finite(f())
            flat[i] = orig - eps
            down = _finite(f())
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            err = abs(ana[i] - num) / max(1e-8, abs(ana[i]) + abs(num))
            worst = max(worst, err)
    return worst


def _finite(t: Tensor) -> float:
    value = float(np.asarray(t.data).reshape(-1)[0])
    if math.isnan(value):
        raise FloatingPointError("objective returned NaN")
    return value
