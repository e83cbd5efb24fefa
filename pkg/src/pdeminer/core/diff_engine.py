"""
Truncated Taylor-Jet Differentiation Engine

Forward jets carry a value, the pure x-derivatives of orders 1..M and a single
first t-derivative. Every primitive works on plain numpy values and, when an
operand lives on an AdjointTape, records itself so one backward sweep yields
the gradient of any scalar built from jets with respect to every parameter.

Jets are stored stacked along the first axis:
    coeffs[0]        value
    coeffs[1..M]     D_x^m, m = 1..M
    coeffs[M + 1]    D_t
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import comb
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pdeminer.errors import DanglingNodeError, PoleError

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12
MAX_ORDER = 4


# ========================================
# REVERSE MODE: nodes and tape
# ========================================

class Node:
    """A value recorded on an AdjointTape"""

    __slots__ = ("value", "tape", "parents", "vjp", "name", "index")
    # numpy must defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, value: np.ndarray, tape: "AdjointTape", parents: Sequence[Any] = (),
                 vjp: Optional[Callable] = None, name: Optional[str] = None):
        self.value = value
        self.tape = tape
        self.parents = tuple(parents)
        self.vjp = vjp
        self.name = name
        self.index = tape._append(self)

    @property
    def shape(self) -> Tuple[int, ...]:
        return np.shape(self.value)

    def __repr__(self) -> str:
        label = self.name or f"#{self.index}"
        return f"Node({label}, shape={self.shape})"

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __getitem__(self, index): return take(self, index)


class AdjointTape:
    """
    Append-only record of primitive operations

    Parameters are leaf nodes registered by name; `backward` replays the
    records in reverse and returns one gradient per registered parameter,
    exactly zero for parameters that never reached the output.
    """

    def __init__(self):
        self.records: List[Node] = []
        self.parameters: Dict[str, Node] = {}

    def __len__(self) -> int:
        return len(self.records)

    def _append(self, node: Node) -> int:
        self.records.append(node)
        return len(self.records) - 1

    def parameter(self, name: str, value: Any) -> Node:
        if name in self.parameters:
            raise ValueError(f"Parameter '{name}' already registered on this tape")
        node = Node(np.asarray(value, dtype=float), self, name=name)
        self.parameters[name] = node
        return node

    def record(self, value: np.ndarray, parents: Sequence[Any], vjp: Callable) -> Node:
        return Node(value, self, parents, vjp)

    def backward(self, output: Node) -> Dict[str, np.ndarray]:
        if (not isinstance(output, Node) or output.tape is not self
                or output.index >= len(self.records) or self.records[output.index] is not output):
            raise DanglingNodeError(f"{output!r} was not produced on this tape")
        if np.size(output.value) != 1:
            raise ValueError(f"backward needs a scalar output, got shape {output.shape}")

        adjoints: Dict[int, np.ndarray] = {output.index: np.ones_like(output.value)}
        for node in reversed(self.records[: output.index + 1]):
            if node.vjp is None or (grad := adjoints.pop(node.index, None)) is None:
                continue
            for parent, parent_grad in zip(node.parents, node.vjp(grad)):
                if isinstance(parent, Node) and parent_grad is not None:
                    previous = adjoints.get(parent.index)
                    adjoints[parent.index] = parent_grad if previous is None else previous + parent_grad

        return {
            name: np.asarray(adjoints.get(node.index, np.zeros(node.shape)), dtype=float).reshape(node.shape)
            for name, node in self.parameters.items()
        }


def tape_backward(tape: AdjointTape, output: Node) -> Dict[str, np.ndarray]:
    """Gradient of a scalar tape node with respect to every tape parameter"""
    return tape.backward(output)


def value_of(x: Any) -> Any:
    return x.value if isinstance(x, Node) else x


def _shape(x: Any) -> Tuple[int, ...]:
    return x.shape if isinstance(x, Node) else np.shape(x)


def _lift(forward: Callable, backward: Callable, *operands: Any) -> Any:
    """Run `forward` on raw values; record it when any operand is a tape node"""
    values = [value_of(op) for op in operands]
    out = forward(*values)
    tape = next((op.tape for op in operands if isinstance(op, Node)), None)
    if tape is None:
        return out
    return tape.record(out, operands, lambda grad: backward(grad, out, *values))


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    grad = np.asarray(grad)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_denominator(den: Any) -> None:
    den = np.asarray(den)
    bad = ~(np.abs(den) >= DENOMINATOR_FLOOR)
    if np.any(bad):
        flat = int(np.flatnonzero(bad)[0])
        index = int(np.unravel_index(flat, den.shape)[0]) if den.ndim else 0
        raise PoleError(f"Denominator magnitude below {DENOMINATOR_FLOOR:g} at batch index {index}", index=index)


# ========================================
# ELEMENTWISE PRIMITIVES
# ========================================

def add(a, b):
    return _lift(np.add, lambda g, out, x, y: (_unbroadcast(g, np.shape(x)), _unbroadcast(g, np.shape(y))), a, b)


def sub(a, b):
    return _lift(np.subtract, lambda g, out, x, y: (_unbroadcast(g, np.shape(x)), _unbroadcast(-g, np.shape(y))), a, b)


def mul(a, b):
    return _lift(np.multiply,
                 lambda g, out, x, y: (_unbroadcast(g * y, np.shape(x)), _unbroadcast(g * x, np.shape(y))), a, b)


def _divide(x, y):
    _check_denominator(y)
    return np.divide(x, y)


def div(a, b):
    return _lift(_divide,
                 lambda g, out, x, y: (_unbroadcast(g / y, np.shape(x)), _unbroadcast(-g * out / y, np.shape(y))),
                 a, b)


def neg(a):
    return _lift(np.negative, lambda g, out, x: (-g,), a)


def exp(a):
    return _lift(np.exp, lambda g, out, x: (g * out,), a)


def square(a):
    return _lift(np.square, lambda g, out, x: (2.0 * g * x,), a)


def total(a):
    return _lift(np.sum, lambda g, out, x: (np.ones(np.shape(x)) * g,), a)


def mean(a):
    return mul(total(a), 1.0 / np.size(value_of(a)))


def linear(x, weight):
    """x @ weight.T over the last axis of x"""
    return _lift(lambda v, w: v @ w.T,
                 lambda g, out, v, w: (g @ w, np.einsum("...o,...i->oi", g, v)), x, weight)


def take(x, index):
    def backward(g, out, v):
        full = np.zeros(np.shape(v))
        full[index] = g
        return (full,)
    return _lift(lambda v: v[index], backward, x)


def stack(items: Sequence[Any], axis: int = -1):
    return _lift(lambda *vals: np.stack(vals, axis=axis),
                 lambda g, out, *vals: tuple(np.take(g, i, axis=axis) for i in range(len(vals))), *items)


# ========================================
# TRUNCATED SERIES KERNELS (derivative form)
# ========================================

def _leibniz(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = a.shape[0] - 2
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.empty(shape)
    for n in range(m + 1):
        acc = np.zeros(shape[1:])
        # symmetric pairs keep the product commutative bit-for-bit
        for k in range(n // 2 + 1):
            j = n - k
            pair = a[k] * b[j] if k == j else a[k] * b[j] + a[j] * b[k]
            acc = acc + comb(n, k) * pair
        out[n] = acc
    out[m + 1] = a[m + 1] * b[0] + a[0] * b[m + 1]
    return out


def _leibniz_adjoint(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of <g, leibniz(a, b)> with respect to a"""
    m = g.shape[0] - 2
    ga = np.empty(np.broadcast_shapes(g.shape, b.shape))
    for k in range(m + 1):
        acc = np.zeros(ga.shape[1:])
        for n in range(k, m + 1):
            acc = acc + comb(n, k) * g[n] * b[n - k]
        ga[k] = acc
    ga[0] = ga[0] + g[m + 1] * b[m + 1]
    ga[m + 1] = g[m + 1] * b[0]
    return ga


def _series_quotient(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_denominator(b[0])
    m = a.shape[0] - 2
    q = np.empty(np.broadcast_shapes(a.shape, b.shape))
    for n in range(m + 1):
        acc = a[n]
        for k in range(1, n + 1):
            acc = acc - comb(n, k) * b[k] * q[n - k]
        q[n] = acc / b[0]
    q[m + 1] = (a[m + 1] - q[0] * b[m + 1]) / b[0]
    return q


def _quotient_adjoint(g: np.ndarray, b: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # back-substitution through the transposed multiplication operator of b
    m = g.shape[0] - 2
    y = np.empty(np.broadcast_shapes(g.shape, b.shape))
    y[m + 1] = g[m + 1] / b[0]
    for k in range(m, -1, -1):
        acc = g[k]
        for n in range(k + 1, m + 1):
            acc = acc - comb(n, k) * b[n - k] * y[n]
        if k == 0:
            acc = acc - b[m + 1] * y[m + 1]
        y[k] = acc / b[0]
    return y, -_leibniz_adjoint(y, q)


def _series_exp(z: np.ndarray) -> np.ndarray:
    m = z.shape[0] - 2
    e = np.empty(z.shape)
    e[0] = np.exp(z[0])
    for n in range(1, m + 1):
        acc = np.zeros(z.shape[1:])
        for k in range(n):
            acc = acc + comb(n - 1, k) * e[k] * z[n - k]
        e[n] = acc
    e[m + 1] = e[0] * z[m + 1]
    return e


# ========================================
# JETS
# ========================================

@dataclass(frozen=True)
class Jet:
    """Value, pure x-derivatives of orders 1..M and one t-derivative"""

    coeffs: Any

    @property
    def order(self) -> int:
        return _shape(self.coeffs)[0] - 2

    def component(self, k: int) -> Any:
        return take(self.coeffs, k)

    @property
    def val(self) -> Any:
        return self.component(0)

    @property
    def dx(self) -> Tuple[Any, ...]:
        return tuple(self.component(k) for k in range(1, self.order + 1))

    @property
    def dt(self) -> Any:
        return self.component(self.order + 1)


ScalarOrArray = Union[float, np.ndarray]


def jet_seed(coord: ScalarOrArray, which: str, order: int) -> Jet:
    """Independent-variable jet: x gives dx = (1, 0, ...), t gives dt = 1"""
    if which not in ("x", "t"):
        raise ValueError(f"Seed variable must be 'x' or 't', got {which!r}")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"Jet order must lie in [0, {MAX_ORDER}], got {order}")
    base = np.asarray(coord, dtype=float)
    coeffs = np.zeros((order + 2,) + base.shape)
    coeffs[0] = base
    if which == "t":
        coeffs[order + 1] = 1.0
    elif order >= 1:
        coeffs[1] = 1.0
    return Jet(coeffs)


def jet_constant(value: ScalarOrArray, order: int) -> Jet:
    base = np.asarray(value, dtype=float)
    coeffs = np.zeros((order + 2,) + base.shape)
    coeffs[0] = base
    return Jet(coeffs)


def _same_order(a: Jet, b: Jet) -> None:
    if a.order != b.order:
        raise ValueError(f"Jet orders differ: {a.order} vs {b.order}")


def jet_add(a: Jet, b: Jet) -> Jet:
    _same_order(a, b)
    return Jet(add(a.coeffs, b.coeffs))


def jet_sub(a: Jet, b: Jet) -> Jet:
    _same_order(a, b)
    return Jet(sub(a.coeffs, b.coeffs))


def jet_mul(a: Jet, b: Jet) -> Jet:
    _same_order(a, b)
    return Jet(_lift(_leibniz,
                     lambda g, out, x, y: (_unbroadcast(_leibniz_adjoint(g, y), x.shape),
                                           _unbroadcast(_leibniz_adjoint(g, x), y.shape)),
                     a.coeffs, b.coeffs))


def jet_div(a: Jet, b: Jet) -> Jet:
    _same_order(a, b)

    def backward(g, out, x, y):
        ga, gb = _quotient_adjoint(g, y, out)
        return _unbroadcast(ga, x.shape), _unbroadcast(gb, y.shape)

    return Jet(_lift(_series_quotient, backward, a.coeffs, b.coeffs))


def jet_exp(a: Jet) -> Jet:
    return Jet(_lift(_series_exp, lambda g, out, z: (_unbroadcast(_leibniz_adjoint(g, out), z.shape),), a.coeffs))


def jet_scale(a: Jet, factor: Any) -> Jet:
    """Multiply every component by a factor constant in x and t"""
    return Jet(mul(a.coeffs, factor))


def _value_basis(coeffs: Any) -> np.ndarray:
    shape = _shape(coeffs)
    basis = np.zeros((shape[0],) + (1,) * (len(shape) - 1))
    basis[0] = 1.0
    return basis


def jet_unit(like: Jet) -> Jet:
    """Constant 1 jet that broadcasts against `like`"""
    return Jet(_value_basis(like.coeffs))


def jet_shift(a: Jet, offset: Any) -> Jet:
    """Add a constant (in x and t) to the value component only"""
    return Jet(add(a.coeffs, mul(_value_basis(a.coeffs), offset)))


def jet_linear(a: Jet, weight: Any, bias: Any = None) -> Jet:
    """Affine map over the last axis: derivative rows are mapped linearly, bias hits the value"""
    out = Jet(linear(a.coeffs, weight))
    return out if bias is None else jet_shift(out, bias)


def jet_stack(jets: Sequence[Jet]) -> Jet:
    if len({jet.order for jet in jets}) != 1:
        raise ValueError("Cannot stack jets of different orders")
    return Jet(stack([jet.coeffs for jet in jets], axis=-1))
