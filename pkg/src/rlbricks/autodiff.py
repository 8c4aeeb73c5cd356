"""Reverse-mode automatic differentiation on small dense tensors.

Tensors are rank <= 2 arrays of float64. Every operation performed while
gradient recording is enabled appends a node to an implicit computation
graph; ``backward`` walks that graph once and returns the gradients of all
reachable leaf parameters. The graph is consumed by the walk, so each
forward pass supports exactly one backward pass.

Broadcasting is deliberately restricted to the bias pattern: an (n, d)
matrix combined with a length-d vector. Everything else must match shapes
exactly.
"""

from __future__ import annotations

import threading
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "Tensor",
    "GradientMap",
    "EngineError",
    "ShapeError",
    "DomainError",
    "NonFiniteError",
    "GraphConsumedError",
    "tensor",
    "zeros",
    "elementwise",
    "matmul",
    "reduce",
    "minimum",
    "concat_cols",
    "gather_rows",
    "reshape",
    "backward",
    "no_grad",
    "grad_enabled",
    "ELEMENTWISE_KINDS",
]


class EngineError(Exception):
    """Base class for autodiff engine failures."""


class ShapeError(EngineError):
    """Operand shapes violate an operation's contract."""


class DomainError(EngineError):
    """Operand values lie outside an operation's domain (e.g. log of x <= 0)."""


class NonFiniteError(EngineError):
    """A forward operation produced NaN or Inf."""


class GraphConsumedError(EngineError):
    """backward was called on a graph that a previous backward already consumed."""


_local = threading.local()


def grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


class no_grad:
    """Context manager that disables graph recording on the current thread."""

    def __enter__(self):
        self._prev = grad_enabled()
        _local.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _local.grad_enabled = self._prev
        return False


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim > 2:
        raise ShapeError(f"tensors are rank <= 2, got shape {arr.shape}")
    return arr


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced a non-finite value")
    return arr


# A backward rule maps the upstream gradient to this input's contribution.
_Rule = Tuple["Tensor", Callable[[np.ndarray], np.ndarray]]


class Tensor:
    """A rank <= 2 float64 array, optionally recorded in the computation graph."""

    __slots__ = ("values", "requires_grad", "_rules", "_consumed")

    def __init__(self, values, requires_grad: bool = False):
        self.values = _as_array(values)
        self.requires_grad = bool(requires_grad)
        self._rules: Optional[List[_Rule]] = None  # None marks a leaf
        self._consumed = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def is_leaf(self) -> bool:
        return self._rules is None

    def __repr__(self) -> str:
        head = np.array2string(self.values, precision=4, threshold=6)
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, values={head})"

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        return _binary("add", self, other)

    def __radd__(self, other):
        return _binary("add", self, other)

    def __sub__(self, other):
        return _binary("sub", self, other)

    def __rsub__(self, other):
        return _binary("sub", _constant_like(other, self), self)

    def __mul__(self, other):
        return _binary("mul", self, other)

    def __rmul__(self, other):
        return _binary("mul", self, other)

    def __neg__(self):
        return _unary("neg", self)

    def __matmul__(self, other):
        return matmul(self, other)

    def exp(self):
        return _unary("exp", self)

    def log(self):
        return _unary("log", self)

    def tanh(self):
        return _unary("tanh", self)

    def relu(self):
        return _unary("relu", self)

    def softplus(self):
        return _unary("softplus", self)

    def square(self):
        return _unary("square", self)

    def clamp(self, lo: float, hi: float):
        return _unary("clamp", self, lo=lo, hi=hi)

    def sum(self, axis: Optional[int] = None):
        return reduce("sum", self, axis)

    def mean(self, axis: Optional[int] = None):
        return reduce("mean", self, axis)

    def reshape(self, *shape: int):
        return reshape(self, shape)

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())


GradientMap = Dict[Tensor, np.ndarray]

TensorLike = Union[Tensor, float, int, np.ndarray]


def tensor(values, requires_grad: bool = False) -> Tensor:
    return Tensor(values, requires_grad=requires_grad)


def zeros(*shape: int, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def _constant_like(value, ref: Tensor) -> Tensor:
    return Tensor(np.full(ref.shape, float(value)))


def _make_node(values: np.ndarray, rules: Sequence[_Rule], op: str) -> Tensor:
    out = Tensor(_check_finite(values, op))
    if grad_enabled():
        live = [(t, fn) for t, fn in rules if _needs_grad(t)]
        if live:
            out._rules = live
            out.requires_grad = True
    return out


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or t._rules is not None


def _sum_to_bias(grad: np.ndarray) -> np.ndarray:
    # Gradient of a bias vector broadcast across rows: sum over the row axis.
    return grad.sum(axis=0)


def _binary(kind: str, a: Tensor, b: TensorLike) -> Tensor:
    if not isinstance(b, Tensor):
        b_arr = np.asarray(b, dtype=np.float64)
        if b_arr.ndim == 0:  # scalar constants skip the graph entirely
            return _scalar_binary(kind, a, float(b_arr))
        b = Tensor(b_arr)
    broadcast = False
    if a.shape != b.shape:
        if a.values.ndim == 2 and b.values.ndim == 1 and a.shape[1] == b.shape[0]:
            broadcast = True  # (n, d) op (d,) bias pattern
        else:
            raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}")

    if kind == "add":
        vals = a.values + b.values
        da = lambda g: g
        db = (lambda g: _sum_to_bias(g)) if broadcast else (lambda g: g)
    elif kind == "sub":
        vals = a.values - b.values
        da = lambda g: g
        db = (lambda g: -_sum_to_bias(g)) if broadcast else (lambda g: -g)
    elif kind == "mul":
        vals = a.values * b.values
        av, bv = a.values, b.values
        da = lambda g: g * bv
        db = (lambda g: _sum_to_bias(g * av)) if broadcast else (lambda g: g * av)
    else:
        raise ValueError(f"unknown binary kind {kind!r}")
    return _make_node(vals, [(a, da), (b, db)], kind)


def _scalar_binary(kind: str, a: Tensor, c: float) -> Tensor:
    if kind == "add":
        vals, da = a.values + c, lambda g: g
    elif kind == "sub":
        vals, da = a.values - c, lambda g: g
    elif kind == "mul":
        vals, da = a.values * c, lambda g: g * c
    else:
        raise ValueError(f"unknown binary kind {kind!r}")
    return _make_node(vals, [(a, da)], kind)


def _unary(kind: str, a: Tensor, lo: float = None, hi: float = None) -> Tensor:
    av = a.values
    if kind == "neg":
        vals, da = -av, lambda g: -g
    elif kind == "exp":
        with np.errstate(over="ignore"):  # overflow surfaces as NonFiniteError
            vals = np.exp(av)
        da = lambda g: g * vals
    elif kind == "log":
        if np.any(av <= 0.0):
            raise DomainError("log requires strictly positive inputs; clamp first")
        vals = np.log(av)
        da = lambda g: g / av
    elif kind == "tanh":
        vals = np.tanh(av)
        da = lambda g: g * (1.0 - vals * vals)
    elif kind == "relu":
        vals = np.maximum(av, 0.0)
        mask = av > 0.0  # subgradient 0 at exactly 0
        da = lambda g: g * mask
    elif kind == "softplus":
        vals = np.logaddexp(0.0, av)
        sig = np.exp(-np.logaddexp(0.0, -av))
        da = lambda g: g * sig
    elif kind == "square":
        vals = av * av
        da = lambda g: g * (2.0 * av)
    elif kind == "clamp":
        if lo is None or hi is None or not lo <= hi:
            raise ValueError("clamp needs bounds lo <= hi")
        vals = np.clip(av, lo, hi)
        mask = (av >= lo) & (av <= hi)  # boundary passes gradient
        da = lambda g: g * mask
    else:
        raise ValueError(f"unknown unary kind {kind!r}")
    return _make_node(vals, [(a, da)], kind)


ELEMENTWISE_KINDS = (
    "add", "sub", "mul", "neg", "exp", "log", "tanh", "relu",
    "softplus", "square", "clamp",
)


def elementwise(kind: str, *inputs: Tensor, lo: float = None, hi: float = None) -> Tensor:
    """Apply one of the supported elementwise operations by name."""
    if kind in ("add", "sub", "mul"):
        if len(inputs) != 2:
            raise ValueError(f"{kind} takes two operands")
        return _binary(kind, inputs[0], inputs[1])
    if kind in ELEMENTWISE_KINDS:
        if len(inputs) != 1:
            raise ValueError(f"{kind} takes one operand")
        if kind == "clamp":
            return _unary("clamp", inputs[0], lo=lo, hi=hi)
        return _unary(kind, inputs[0])
    raise ValueError(f"unknown elementwise kind {kind!r}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} vs {b.shape}")
    av, bv = a.values, b.values
    vals = av @ bv
    return _make_node(
        vals,
        [(a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)],
        "matmul",
    )


def reduce(kind: str, t: Tensor, axis: Optional[int] = None) -> Tensor:
    if kind not in ("sum", "mean"):
        raise ValueError(f"unknown reduce kind {kind!r}")
    if axis is not None and not 0 <= axis < t.values.ndim:
        raise ShapeError(f"axis {axis} invalid for shape {t.shape}")
    shape = t.shape
    if kind == "sum":
        vals = t.values.sum(axis=axis)
        scale = 1.0
    else:
        vals = t.values.mean(axis=axis)
        scale = 1.0 / (t.values.size if axis is None else shape[axis])

    def da(g: np.ndarray) -> np.ndarray:
        if axis is None:
            return np.full(shape, float(g) * scale)
        g = np.asarray(g)
        if axis == 0:
            return np.broadcast_to(g * scale, shape).copy()
        return np.repeat((g * scale).reshape(-1, 1), shape[1], axis=1)

    return _make_node(np.asarray(vals), [(t, da)], kind)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; ties route the gradient to the first operand."""
    if a.shape != b.shape:
        raise ShapeError(f"minimum: incompatible shapes {a.shape} and {b.shape}")
    take_a = a.values <= b.values
    vals = np.where(take_a, a.values, b.values)
    return _make_node(
        vals,
        [(a, lambda g: g * take_a), (b, lambda g: g * ~take_a)],
        "minimum",
    )


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two (n, *) tensors along the column axis."""
    av = a.values if a.values.ndim == 2 else a.values.reshape(-1, 1)
    bv = b.values if b.values.ndim == 2 else b.values.reshape(-1, 1)
    if av.shape[0] != bv.shape[0]:
        raise ShapeError(f"concat_cols: row counts differ: {a.shape} vs {b.shape}")
    ka = av.shape[1]
    vals = np.concatenate([av, bv], axis=1)
    return _make_node(
        vals,
        [
            (a, lambda g: g[:, :ka].reshape(a.shape)),
            (b, lambda g: g[:, ka:].reshape(b.shape)),
        ],
        "concat_cols",
    )


def gather_rows(t: Tensor, indices: np.ndarray) -> Tensor:
    """Pick one column per row: out[i] = t[i, indices[i]]."""
    if t.values.ndim != 2:
        raise ShapeError(f"gather_rows needs a rank-2 tensor, got {t.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.shape != (t.shape[0],):
        raise ShapeError(f"gather_rows needs {t.shape[0]} indices, got shape {idx.shape}")
    rows = np.arange(t.shape[0])
    vals = t.values[rows, idx]

    def da(g: np.ndarray) -> np.ndarray:
        out = np.zeros(t.shape)
        out[rows, idx] = g
        return out

    return _make_node(vals, [(t, da)], "gather_rows")


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    vals = t.values.reshape(shape)
    if vals.ndim > 2:
        raise ShapeError(f"reshape target {shape} exceeds rank 2")
    return _make_node(vals, [(t, lambda g: np.asarray(g).reshape(t.shape))], "reshape")


def backward(loss: Tensor, params: Optional[Iterable[Tensor]] = None) -> GradientMap:
    """Run one reverse pass from a scalar loss.

    Returns gradients for every reachable leaf with ``requires_grad``. Leaves
    listed in ``params`` but not reached get explicit zero entries. The
    traversed graph is consumed; a second backward through any of its nodes
    raises ``GraphConsumedError``.
    """
    if loss.values.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphConsumedError("graph already consumed; rebuild the forward pass")

    order: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node._consumed:
            raise GraphConsumedError("graph already consumed; rebuild the forward pass")
        stack.append((node, True))
        if node._rules:
            for parent, _ in node._rules:
                if id(parent) not in seen:
                    stack.append((parent, False))

    grads: Dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    result: GradientMap = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._rules is None:
            if node.requires_grad:
                result[node] = g
            continue
        for parent, rule in node._rules:
            contrib = rule(g)
            prev = grads.get(id(parent))
            grads[id(parent)] = contrib if prev is None else prev + contrib
        node._consumed = True
        node._rules = None

    if params is not None:
        for p in params:
            if p not in result:
                result[p] = np.zeros(p.shape)
    return result
