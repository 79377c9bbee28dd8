"""NCHW tensor containers and the reverse-mode differentiation tape.

Every array in the package is a 4-axis, row-major, float64 buffer.  Real
feature maps use the axes as (batch, channel, height, width); learnable
weights reuse the same container with their own axis meaning (for a
convolution kernel: out-channels, in-channels-per-group, kernel-h,
kernel-w).  Scalars are tensors of shape (1, 1, 1, 1).

Operations are pure functions.  While a :class:`DiffGraph` is active (as a
context manager) each operation appends a node holding its inputs, its
output, and a vector-Jacobian closure; :func:`backward` replays the nodes
in reverse and accumulates gradients keyed by tensor identity.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, NumericError

__all__ = [
    "TensorShape",
    "Tensor",
    "ComplexTensor",
    "DiffGraph",
    "backward",
    "finite_diff",
    "active_graph",
]


class TensorShape(NamedTuple):
    """Axis sizes of a 4-D buffer: batch, channel, height, width."""

    n: int
    c: int
    h: int
    w: int

    @property
    def size(self) -> int:
        return self.n * self.c * self.h * self.w


def _as_buffer(data, check_finite: bool) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 4:
        raise DimensionError(f"tensor data must have 4 axes, got {arr.ndim}")
    if check_finite and not np.all(np.isfinite(arr)):
        raise NumericError("tensor holds NaN or Inf values")
    return arr


class Tensor:
    """Immutable-by-convention float64 NCHW array.

    Operations never mutate an existing tensor; the one sanctioned writer
    is the optimizer, which updates parameter buffers in place between
    recorded graphs.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = _as_buffer(data, check_finite=True)

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        """Adopt a freshly computed array without copying."""
        t = object.__new__(cls)
        t.data = arr
        return t

    @classmethod
    def zeros(cls, n: int, c: int, h: int, w: int) -> "Tensor":
        return cls._wrap(np.zeros((n, c, h, w)))

    @classmethod
    def full(cls, shape: Sequence[int], value: float) -> "Tensor":
        return cls._wrap(np.full(tuple(shape), float(value)))

    @classmethod
    def scalar(cls, value: float) -> "Tensor":
        return cls._wrap(np.full((1, 1, 1, 1), float(value)))

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        return cls(np.asarray(arr, dtype=np.float64).reshape(_promote_shape(arr)))

    @property
    def shape(self) -> TensorShape:
        return TensorShape(*self.data.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar tensor, shape is {tuple(self.data.shape)}")
        return float(self.data.reshape(()))

    def copy(self) -> "Tensor":
        return Tensor._wrap(self.data.copy())

    def __repr__(self) -> str:
        n, c, h, w = self.data.shape
        return f"Tensor(n={n}, c={c}, h={h}, w={w})"


def _promote_shape(arr) -> tuple:
    """Pad a <=4-D shape with leading singleton axes."""
    shape = tuple(np.shape(arr))
    if len(shape) > 4:
        raise DimensionError(f"cannot promote shape {shape} to 4 axes")
    return (1,) * (4 - len(shape)) + shape


class ComplexTensor:
    """Frequency-domain companion of :class:`Tensor` (complex128, NCHW)."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.complex128)
        if arr.ndim != 4:
            raise DimensionError(f"complex tensor data must have 4 axes, got {arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise NumericError("complex tensor holds NaN or Inf values")
        self.data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "ComplexTensor":
        t = object.__new__(cls)
        t.data = arr
        return t

    @property
    def shape(self) -> TensorShape:
        return TensorShape(*self.data.shape)

    def __repr__(self) -> str:
        n, c, h, w = self.data.shape
        return f"ComplexTensor(n={n}, c={c}, h={h}, w={w})"


class _Node(NamedTuple):
    name: str
    out: object                       # Tensor or ComplexTensor
    inputs: tuple                     # recorded operands, same kinds
    vjp: Callable                     # grad(out) -> tuple of grads per input (None allowed)
    forward: Callable                 # () -> ndarray, recomputes the output value


class DiffGraph:
    """Recorded operation tape.

    Single-owner: record and run :func:`backward` from one logical thread.
    Entering the context pushes the graph on a thread-local stack; ops
    record onto the innermost active graph only.
    """

    def __init__(self):
        self._nodes: list[_Node] = []

    def __enter__(self) -> "DiffGraph":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _stack().pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise ContractError("DiffGraph context exited out of order")

    def _add(self, node: _Node) -> None:
        self._nodes.append(node)

    def __len__(self) -> int:
        return len(self._nodes)

    def node_names(self) -> list[str]:
        return [n.name for n in self._nodes]

    def replay_matches(self) -> bool:
        """Re-execute every node and compare with the cached values bit-exactly."""
        for node in self._nodes:
            fresh = node.forward()
            if fresh.dtype != node.out.data.dtype or fresh.shape != node.out.data.shape:
                return False
            if not np.array_equal(fresh, node.out.data):
                return False
        return True


_LOCAL = threading.local()


def _stack() -> list:
    stack = getattr(_LOCAL, "graphs", None)
    if stack is None:
        stack = []
        _LOCAL.graphs = stack
    return stack


def active_graph() -> DiffGraph | None:
    stack = _stack()
    return stack[-1] if stack else None


def record(name: str, out, inputs: Iterable, vjp: Callable, forward: Callable) -> None:
    """Append a node to the active graph, if any."""
    g = active_graph()
    if g is not None:
        g._add(_Node(name, out, tuple(inputs), vjp, forward))


def backward(graph: DiffGraph, loss: Tensor) -> dict:
    """Accumulate gradients of a scalar loss for every tensor on the tape.

    Returns a map keyed by tensor identity (the recorded Tensor and
    ComplexTensor objects themselves) to float64 / complex128 arrays.
    A complex entry packs d(loss)/d(real part) + 1j * d(loss)/d(imag part).
    """
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise ContractError("backward() needs a scalar loss tensor")
    grads: dict = {loss: np.ones((1, 1, 1, 1))}
    for node in reversed(graph._nodes):
        g_out = grads.get(node.out)
        if g_out is None:
            continue
        partials = node.vjp(g_out)
        for operand, g_in in zip(node.inputs, partials):
            if g_in is None:
                continue
            if not np.all(np.isfinite(g_in)):
                raise NumericError(f"non-finite gradient out of node '{node.name}'")
            held = grads.get(operand)
            if held is None:
                grads[operand] = g_in
            else:
                grads[operand] = held + g_in
    return grads


def finite_diff(f: Callable[[], float], wrt: Tensor | Sequence[Tensor], h: float = 1e-5) -> dict:
    """Central-difference gradient oracle.

    ``f`` is a closure evaluating the scalar objective from current tensor
    contents; each element of ``wrt`` is perturbed in place by +-h and
    restored.  Returns the same identity-keyed map as :func:`backward`.
    """
    tensors = [wrt] if isinstance(wrt, Tensor) else list(wrt)
    out: dict = {}
    for t in tensors:
        buf = t.data
        grad = np.zeros_like(buf)
        flat = buf.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            f_plus = f()
            flat[i] = keep - h
            f_minus = f()
            flat[i] = keep
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
        out[t] = grad
    return out
