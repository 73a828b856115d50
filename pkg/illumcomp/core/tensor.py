"""
Dense tensor type with tape-based reverse-mode differentiation.

Responsibilities:
- Tensor: float64 N-dimensional array carrier for images, features, parameters
- OpNode: one recorded op (inputs, saved activations, vector-Jacobian product)
- Tape: records ops executed inside a `with Tape():` block and replays them
  backwards to accumulate gradients
- Elementwise arithmetic, reductions and activations with broadcasting

Architecture:
- Ops are recorded only while a tape is active and at least one input is
  tracked (requires_grad or produced by a recorded op). Outside a tape every
  op is a plain numpy computation.
- Each op registers exactly one VJP closure over the activations it saved.
- Tapes are thread-local; a single tape is not meant to be shared between threads.

Usage:
    from illumcomp.core.tensor import Tape, Tensor

    x = Tensor(np.ones((3, 4)), requires_grad=True)
    with Tape() as tape:
        y = (x * x).sum()
    (gx,) = tape.gradient(y, [x])
"""

import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from illumcomp.utils.errors import ShapeMismatchError, ValidationError

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
VJP = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_state = threading.local()


def _active_tape() -> Optional["Tape"]:
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


class OpNode:
    """
    One recorded operation.

    Attributes:
        op (str): Op identifier (e.g. "conv2d")
        inputs (Tuple[Tensor, ...]): Input tensors, in VJP output order
        saved (Dict[str, Any]): Activations kept for the backward pass
        vjp (VJP): Maps the output cotangent to one cotangent per input
        output (Tensor): Tensor produced by the op
    """

    __slots__ = ("op", "inputs", "saved", "vjp", "output")

    def __init__(
        self,
        op: str,
        inputs: Tuple["Tensor", ...],
        saved: Dict[str, Any],
        vjp: VJP
    ) -> None:
        self.op = op
        self.inputs = inputs
        self.saved = saved
        self.vjp = vjp
        self.output: Optional["Tensor"] = None

    def __repr__(self) -> str:
        return f"OpNode(op={self.op!r}, n_inputs={len(self.inputs)})"


class Tensor:
    """
    Dense float64 array with optional gradient tracking.

    Attributes:
        data (np.ndarray): Row-major values, always float64
        requires_grad (bool): Whether gradients are requested for this leaf
        node (Optional[OpNode]): Producing op when recorded on a tape
    """

    __array_priority__ = 100.0

    def __init__(self, data: ArrayLike, requires_grad: bool = False) -> None:
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad: bool = requires_grad
        self.node: Optional[OpNode] = None

    # ------------------------------------------------------------------ info

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        """True when gradients can flow into this tensor."""
        return self.requires_grad or self.node is not None

    def numpy(self) -> np.ndarray:
        """Return a copy of the underlying values."""
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError(
                "item() requires a single-element tensor",
                shapes={"tensor": self.shape}
            )
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # ------------------------------------------------------------- operators

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def mean(self) -> "Tensor":
        return mean_all(self)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)


class Tape:
    """
    Records differentiable ops executed in its context.

    Attributes:
        nodes (List[OpNode]): Ops in execution order
    """

    def __init__(self) -> None:
        self.nodes: List[OpNode] = []

    def __enter__(self) -> "Tape":
        if not hasattr(_state, "stack"):
            _state.stack = []
        _state.stack.append(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        _state.stack.pop()

    def gradient(
        self,
        output: Tensor,
        wrt: Sequence[Tensor],
        seed: Optional[np.ndarray] = None
    ) -> List[np.ndarray]:
        """
        Reverse-accumulate d(output)/d(wrt).

        Args:
            output: Tensor to differentiate (scalar unless seed is given)
            wrt: Tensors to differentiate with respect to
            seed: Output cotangent; defaults to ones for scalar outputs

        Returns:
            One gradient array per entry of wrt (zeros when unreachable)
        """
        if seed is None:
            if output.size != 1:
                raise ShapeMismatchError(
                    "gradient() needs a seed for non-scalar outputs",
                    shapes={"output": output.shape}
                )
            seed = np.ones_like(output.data)

        grads: Dict[int, np.ndarray] = {id(output): np.asarray(seed, dtype=np.float64)}
        for node in reversed(self.nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            for tensor, g_in in zip(node.inputs, node.vjp(g_out)):
                if g_in is None or not tensor.tracked:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g_in
                else:
                    grads[key] = g_in
            if any(id(t) == id(node.output) for t in wrt):
                grads[id(node.output)] = g_out

        return [grads.get(id(t), np.zeros_like(t.data)) for t in wrt]


# ============================================================================
# RECORDING HELPERS
# ============================================================================

def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap arrays and scalars as constant tensors; pass tensors through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def record(
    op: str,
    out: np.ndarray,
    inputs: Tuple[Tensor, ...],
    vjp: VJP,
    saved: Optional[Dict[str, Any]] = None
) -> Tensor:
    """
    Wrap an op result, registering its VJP on the active tape if needed.

    Args:
        op: Op identifier
        out: Forward result
        inputs: Op inputs, in the order the VJP returns cotangents
        vjp: Backward closure
        saved: Activations captured by the VJP (kept for inspection)

    Returns:
        Output tensor, tracked when recorded
    """
    result = Tensor(out)
    tape = _active_tape()
    if tape is not None and any(t.tracked for t in inputs):
        node = OpNode(op, inputs, saved or {}, vjp)
        node.output = result
        result.node = node
        tape.nodes.append(node)
    return result


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an input's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(
            f"{op}: shapes {a.shape} and {b.shape} do not broadcast",
            shapes={"a": a.shape, "b": b.shape}
        )


# ============================================================================
# ELEMENTWISE
# ============================================================================

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return record(
        "add", a.data + b.data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape))
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return record(
        "sub", a.data - b.data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape))
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return record(
        "mul", a.data * b.data, (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
        saved={"a": a.data, "b": b.data}
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * out / b.data, b.shape),
        )

    return record("div", out, (a, b), vjp, saved={"b": b.data, "out": out})


def safe_div(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise a / b, defined as 0 (with zero gradient) wherever b == 0."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("safe_div", a, b)
    nonzero = b.data != 0.0
    denom = np.where(nonzero, b.data, 1.0)
    out = np.where(nonzero, a.data / denom, 0.0)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ga = np.where(nonzero, g / denom, 0.0)
        gb = np.where(nonzero, -g * out / denom, 0.0)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return record("safe_div", out, (a, b), vjp, saved={"b": b.data, "out": out})


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0.0
    return record("relu", np.where(mask, x.data, 0.0), (x,),
                  lambda g: (g * mask,), saved={"mask": mask})


def tanh(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),), saved={"out": out})


def absolute(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)
    return record("abs", np.abs(x.data), (x,), lambda g: (g * sign,), saved={"sign": sign})


# ============================================================================
# REDUCTIONS / SHAPE
# ============================================================================

def sum_all(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return record("sum", np.sum(x.data), (x,),
                  lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean_all(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    n = max(x.size, 1)
    return record("mean", np.mean(x.data), (x,),
                  lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeMismatchError(
            f"cannot reshape {x.shape} to {tuple(shape)}",
            shapes={"input": x.shape, "target": tuple(shape)}
        )
    return record("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    """Concatenate along an existing axis (channels by default)."""
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ValidationError("concat needs at least one tensor")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatchError(
            "concat: non-concatenation extents differ",
            shapes={f"t{i}": p.shape for i, p in enumerate(parts)}
        )
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return record("concat", out, tuple(parts), vjp)


def stack_mean(scalars: Sequence[Tensor]) -> Tensor:
    """Mean of a non-empty list of scalar tensors."""
    if not scalars:
        raise ValidationError("stack_mean needs at least one value")
    total = scalars[0]
    for s in scalars[1:]:
        total = add(total, s)
    return mul(total, 1.0 / len(scalars))
