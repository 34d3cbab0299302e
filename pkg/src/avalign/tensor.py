"""Dense float64 tensors with a reverse-mode tape.

A ``Tensor`` is an immutable array; a ``Tape`` records every primitive
applied to tensors derived from its leaves and can replay the chain rule
backwards from a scalar output. The design is deliberately minimal: eager
recording, no graph rewriting, 64-bit everywhere so finite-difference
checks can run at tight tolerances.

Typical use::

    tape = Tape()
    x = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
    y = softmax(matmul(x, x), axis=1)
    loss = y.sum()
    grads = backward(loss)
    grads.wrt(x)            # ndarray, same shape as x
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "GradientReport",
    "backward",
    "matmul",
    "softmax",
    "cosine_similarity_matrix",
    "finite_difference_gradient",
    "gradient_check",
]


class Tensor:
    """Immutable dense array of 64-bit floats.

    Values are copied and frozen at construction; NaN or Inf entries are
    rejected so every downstream computation starts finite.
    """

    __slots__ = ("data", "tape")

    def __init__(self, values, _tape: "Tape | None" = None):
        arr = np.array(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor values must be finite (no NaN/Inf)")
        arr.setflags(write=False)
        self.data = arr
        self.tape = _tape

    @classmethod
    def _wrap(cls, arr: np.ndarray, tape: "Tape | None") -> "Tensor":
        # fast path for op outputs: fresh arrays from finite inputs, so the
        # copy and finiteness scan of __init__ are skipped
        out = cls.__new__(cls)
        out.data = arr
        out.tape = tape
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def tolist(self):
        return self.data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, taped={self.tape is not None})"

    # arithmetic sugar; every overload routes through the same primitives
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

    def sum(self, axis: int | None = None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | None = None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, shape: Sequence[int]):
        return reshape(self, shape)


class _Node:
    __slots__ = ("inputs", "output", "vjp", "name")

    def __init__(self, name, inputs, output, vjp):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.vjp = vjp


class Tape:
    """Ordered record of primitive operations for reverse-mode replay.

    Nodes are appended eagerly as operations execute, so the list is
    topologically ordered by construction. A tape is single-owner: sharing
    one tape across threads is not supported, but the tensors themselves
    are immutable and safe to share.
    """

    def __init__(self):
        self._nodes: list[_Node] = []

    def leaf(self, values) -> Tensor:
        """Create a differentiable input tensor tracked by this tape."""
        if isinstance(values, Tensor):
            values = values.data
        return Tensor(values, _tape=self)

    def _record(self, name, inputs, out_data, vjp) -> Tensor:
        out = Tensor._wrap(np.asarray(out_data, dtype=np.float64), self)
        self._nodes.append(_Node(name, inputs, out, vjp))
        return out

    def __len__(self) -> int:
        return len(self._nodes)


class Gradients:
    """Result of a backward pass; zero for leaves the output never touched."""

    def __init__(self, table: dict[int, np.ndarray]):
        self._table = table

    def wrt(self, t: Tensor) -> np.ndarray:
        g = self._table.get(id(t))
        if g is None:
            return np.zeros_like(t.data)
        return g


def _resolve_tape(*args) -> Tape | None:
    tape = None
    for a in args:
        if isinstance(a, Tensor) and a.tape is not None:
            if tape is None:
                tape = a.tape
            elif tape is not a.tape:
                raise ValueError("operands belong to different tapes")
    return tape


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def as_tensor(x) -> Tensor:
    """Return ``x`` unchanged if already a Tensor, else wrap it."""
    return _lift(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def _binary(name, a, b, fwd, vjp_a, vjp_b) -> Tensor:
    a, b = _lift(a), _lift(b)
    tape = _resolve_tape(a, b)
    out_data = fwd(a.data, b.data)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)

    def vjp(g):
        return (
            _unbroadcast(vjp_a(g, a.data, b.data, out_data), a.shape),
            _unbroadcast(vjp_b(g, a.data, b.data, out_data), b.shape),
        )

    return tape._record(name, (a, b), out_data, vjp)


def add(a, b) -> Tensor:
    return _binary(
        "add", a, b,
        lambda x, y: x + y,
        lambda g, x, y, o: g,
        lambda g, x, y, o: g,
    )


def sub(a, b) -> Tensor:
    return _binary(
        "sub", a, b,
        lambda x, y: x - y,
        lambda g, x, y, o: g,
        lambda g, x, y, o: -g,
    )


def mul(a, b) -> Tensor:
    return _binary(
        "mul", a, b,
        lambda x, y: x * y,
        lambda g, x, y, o: g * y,
        lambda g, x, y, o: g * x,
    )


def div(a, b) -> Tensor:
    return _binary(
        "div", a, b,
        lambda x, y: x / y,
        lambda g, x, y, o: g / y,
        lambda g, x, y, o: -g * x / (y * y),
    )


def matmul(a, b) -> Tensor:
    """Matrix product of a 2-D pair, recorded on the tape if either is taped."""
    a, b = _lift(a), _lift(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    tape = _resolve_tape(a, b)
    out_data = a.data @ b.data
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return tape._record("matmul", (a, b), out_data, vjp)


def transpose(a) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = a.data.T
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record("transpose", (a,), out_data, lambda g: (g.T,))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _lift(a)
    shape = tuple(shape)
    tape = _resolve_tape(a)
    out_data = a.data.reshape(shape)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record("reshape", (a,), out_data, lambda g: (g.reshape(a.shape),))


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [_lift(p) for p in parts]
    tape = _resolve_tape(*parts)
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return tape._record("concat", tuple(parts), out_data, vjp)


def tsum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return tape._record("sum", (a,), out_data, vjp)


def tmean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) / float(n)


def exp(a) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = np.exp(a.data)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record("exp", (a,), out_data, lambda g: (g * out_data,))


def log(a) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = np.log(a.data)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record("log", (a,), out_data, lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = np.sqrt(a.data)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record("sqrt", (a,), out_data, lambda g: (g * 0.5 / out_data,))


def tanh(a) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = np.tanh(a.data)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record("tanh", (a,), out_data, lambda g: (g * (1.0 - out_data**2),))


def sigmoid(a) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    return tape._record(
        "sigmoid", (a,), out_data, lambda g: (g * out_data * (1.0 - out_data),)
    )


def _extreme(a, reducer, argreducer, name) -> Tensor:
    # subgradient: all of g lands on the first extremal element
    a = _lift(a)
    tape = _resolve_tape(a)
    out_data = reducer(a.data)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    flat_idx = int(argreducer(a.data))

    def vjp(g):
        grad = np.zeros_like(a.data)
        grad.reshape(-1)[flat_idx] = np.asarray(g).reshape(())
        return (grad,)

    return tape._record(name, (a,), out_data, vjp)


def tmax(a) -> Tensor:
    return _extreme(a, np.max, np.argmax, "max")


def tmin(a) -> Tensor:
    return _extreme(a, np.min, np.argmin, "min")


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with max-subtraction for overflow safety."""
    a = _lift(a)
    if not (-a.ndim <= axis < a.ndim):
        raise ValueError(f"axis {axis} invalid for shape {a.shape}")
    tape = _resolve_tape(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)

    def vjp(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        return (out_data * (g - dot),)

    return tape._record("softmax", (a,), out_data, vjp)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _lift(a)
    tape = _resolve_tape(a)
    m = a.data.max(axis=axis, keepdims=True)
    lse = m + np.log(np.exp(a.data - m).sum(axis=axis, keepdims=True))
    out_data = a.data - lse
    if tape is None:
        return Tensor._wrap(np.asarray(out_data, dtype=np.float64), None)
    soft = np.exp(out_data)

    def vjp(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return tape._record("log_softmax", (a,), out_data, vjp)


def cosine_similarity_matrix(x, y) -> Tensor:
    """Pairwise cosine similarities between rows of ``x`` (MxD) and ``y`` (NxD).

    Zero-norm rows are rejected rather than mapped to 0 so a degenerate
    embedding can never masquerade as perfect orthogonality.
    """
    x, y = _lift(x), _lift(y)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(f"expected MxD and NxD with equal D, got {x.shape}, {y.shape}")
    for name, t in (("x", x), ("y", y)):
        norms = np.linalg.norm(t.data, axis=1)
        if np.any(norms == 0.0):
            raise ValueError(f"zero-norm row in {name}; cosine similarity undefined")
    xn = div(x, sqrt(tsum(mul(x, x), axis=1, keepdims=True)))
    yn = div(y, sqrt(tsum(mul(y, y), axis=1, keepdims=True)))
    return matmul(xn, transpose(yn))


def backward(output: Tensor) -> Gradients:
    """Reverse sweep from a scalar output to every tensor on its tape."""
    if output.tape is None:
        raise ValueError("output is not recorded on any tape")
    if output.data.size != 1:
        raise ValueError(f"backward requires a scalar output, got shape {output.shape}")
    tape = output.tape
    table: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    for node in reversed(tape._nodes):
        g_out = table.get(id(node.output))
        if g_out is None:
            continue
        for inp, g_in in zip(node.inputs, node.vjp(g_out)):
            key = id(inp)
            if key in table:
                table[key] = table[key] + g_in
            else:
                table[key] = g_in
    return Gradients(table)


def finite_difference_gradient(
    f: Callable[[Tensor], float], x: Tensor, h: float = 1e-5
) -> Tensor:
    """Central-difference gradient of a scalar function at ``x``."""
    if h <= 0:
        raise ValueError("step size h must be positive")
    base = x.data
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)
    for i in range(base.size):
        bumped = base.copy().reshape(-1)
        bumped[i] += h
        f_plus = float(f(Tensor(bumped.reshape(base.shape))))
        bumped[i] -= 2 * h
        f_minus = float(f(Tensor(bumped.reshape(base.shape))))
        flat[i] = (f_plus - f_minus) / (2 * h)
    return Tensor(grad)


class GradientReport:
    """Analytic vs numeric gradient of one scalar function at one point."""

    def __init__(self, analytic: Tensor, numeric: Tensor):
        self.analytic = analytic
        self.numeric = numeric
        a, n = analytic.data, numeric.data
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        self.max_relative_error = float(np.max(np.abs(a - n) / denom))

    def __repr__(self) -> str:
        return f"GradientReport(max_relative_error={self.max_relative_error:.3e})"


def gradient_check(
    f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5
) -> GradientReport:
    """Compare reverse-mode and central-difference gradients of ``f`` at ``x``.

    ``f`` must map a tensor to a scalar tensor and must run unmodified both
    on and off a tape (pure function of its argument).
    """
    tape = Tape()
    leaf = tape.leaf(x.data)
    out = f(leaf)
    analytic = Tensor(backward(out).wrt(leaf))
    numeric = finite_difference_gradient(lambda t: f(t).item(), x, h=h)
    return GradientReport(analytic, numeric)
