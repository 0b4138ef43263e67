"""Dense float tensors with reverse-mode automatic differentiation.

Every numeric primitive the entailment models need lives here: elementwise
arithmetic and activations, matrix products, cosine kernels, stable softmax,
and the tape that replays the chain rule in reverse. Arrays are float64 by
default; float32 can be selected as a training-speed mode at the cost of
gradient-check fidelity.

Shape discipline is strict: binary operations require equal shapes, with the
single exception of a scalar combined with a tensor. Operations that would
otherwise need broadcasting have explicit named forms (``mul_rowvec``,
``add_rowvec``, ``scale_rows``, ``repeat_row``) so model code always states
its shapes.
"""

from __future__ import annotations

import builtins
import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "ZeroNormError",
    "GradCheckError",
    "Tensor",
    "ComputationTape",
    "set_default_dtype",
    "get_default_dtype",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "tanh",
    "sigmoid",
    "relu",
    "exp",
    "log",
    "sqrt",
    "tensor_sum",
    "tensor_max",
    "mean",
    "softmax",
    "log_softmax",
    "concat",
    "stack",
    "reshape",
    "row",
    "take_rows",
    "mul_rowvec",
    "add_rowvec",
    "scale_rows",
    "repeat_row",
    "clamp_min",
    "dot",
    "cosine_similarity",
    "row_cosine",
    "pairwise_cosine",
    "l2_normalize",
    "dropout",
    "grad_check",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


class ZeroNormError(ValueError):
    """Raised when a vector with zero Euclidean norm cannot be handled."""


class GradCheckError(RuntimeError):
    """Raised when a gradient check hits a non-finite intermediate value."""


_DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Select the array dtype for newly created tensors (float64 or float32)."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype!r}; use float64 or float32")
    _DEFAULT_DTYPE = dt.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """A dense row-major float array, optionally tracked for differentiation.

    ``data`` is immutable by convention once the tensor has been produced by a
    forward operation; only ``grad`` (allocated when ``requires_grad``) is
    mutated, by `ComputationTape.backward` accumulating into it.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        if arr.ndim > 0 and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        # Fast construction path for op outputs: arr is already a fresh array.
        out = cls.__new__(cls)
        out.data = arr
        out.requires_grad = requires_grad
        out.grad = np.zeros_like(arr) if requires_grad else None
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Arithmetic sugar; the functional forms below do the work.
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
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return tensor_sum(self, axis=axis)

    def max(self, axis=None):
        return tensor_max(self, axis=axis)

    def mean(self):
        return mean(self)

    def reshape(self, shape):
        return reshape(self, shape)


class ComputationTape:
    """Ordered record of executed operations, replayed in reverse for backprop.

    Execution order is already topological, so the reverse walk visits every
    node exactly once. One tape belongs to one training context at a time;
    tensors produced while no tape is active are untracked.
    """

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes: list[tuple] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def __enter__(self) -> "ComputationTape":
        _STATE.stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _STATE.stack.pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise RuntimeError("computation tapes exited out of order")

    def record(self, output: Tensor, inputs: tuple, backward_fn: Callable) -> None:
        self._nodes.append((output, inputs, backward_fn))

    def backward(self, loss: Tensor, seed: float = 1.0) -> None:
        """Fill ``grad`` for every tracked tensor reachable from ``loss``.

        Gradients accumulate additively, so a tensor used along several paths
        receives the sum of all path contributions.
        """
        if loss.shape != ():
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        if loss.grad is None:
            raise ValueError("loss does not require grad; nothing to differentiate")
        loss.grad[...] += seed
        for output, inputs, backward_fn in reversed(self._nodes):
            out_grad = output.grad
            if out_grad is None:
                continue
            grads = backward_fn(out_grad)
            for tensor_in, g in zip(inputs, grads):
                if g is not None and tensor_in.grad is not None:
                    tensor_in.grad += g


class _TapeState(threading.local):
    def __init__(self):
        self.stack: list[ComputationTape] = []


_STATE = _TapeState()


def _active_tape() -> Optional[ComputationTape]:
    stack = _STATE.stack
    return stack[-1] if stack else None


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_DEFAULT_DTYPE))


def _apply(out_data: np.ndarray, inputs: tuple, backward_fn: Callable) -> Tensor:
    """Wrap an op result, recording it on the active tape when tracked."""
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out = Tensor._wrap(out_data, True)
        tape.record(out, inputs, backward_fn)
        return out
    return Tensor._wrap(out_data, False)


def _binary_shapes(a: Tensor, b: Tensor, op_name: str) -> None:
    # Equal shapes, or one operand is a scalar; nothing else.
    if a.shape == b.shape or a.shape == () or b.shape == ():
        return
    raise ShapeError(f"{op_name}: operand shapes {a.shape} and {b.shape} do not match")


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # Collapse a full-shape gradient onto a scalar operand.
    if shape == () and grad.shape != ():
        return np.asarray(grad.sum())
    return grad


# ---------------------------------------------------------------------------
# Elementwise arithmetic and activations
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "add")
    out = a.data + b.data

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _apply(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "sub")
    out = a.data - b.data

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _apply(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data
    out = ad * bd

    def backward(g):
        return _reduce_to(g * bd, a.shape), _reduce_to(g * ad, b.shape)

    return _apply(out, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        return _reduce_to(g / bd, a.shape), _reduce_to(-g * ad / (bd * bd), b.shape)

    return _apply(out, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _apply(-a.data, (a,), lambda g: (-g,))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _apply(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    # Split by sign so exp never overflows.
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _apply(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _apply(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _apply(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    ad = a.data
    return _apply(np.log(ad), (a,), lambda g: (g / ad,))


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    out = np.sqrt(a.data)
    return _apply(out, (a,), lambda g: (g / (2.0 * out),))


def clamp_min(a, bound: float) -> Tensor:
    """max(a, bound) elementwise; gradient passes only where a exceeds bound."""
    a = _as_tensor(a)
    mask = a.data > bound
    return _apply(np.where(mask, a.data, bound), (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError(f"matmul expects 1-D or 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != (b.shape[0] if b.ndim >= 1 else None):
        raise ShapeError(f"matmul: inner dimensions of {a.shape} and {b.shape} do not agree")
    ad, bd = a.data, b.data
    out = ad @ bd

    def backward(g):
        if a.ndim == 2 and b.ndim == 2:
            return g @ bd.T, ad.T @ g
        if a.ndim == 2 and b.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        if a.ndim == 1 and b.ndim == 2:
            return bd @ g, np.outer(ad, g)
        return g * bd, g * ad  # vector dot vector

    return _apply(out, (a, b), backward)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    return _apply(np.ascontiguousarray(a.data.T), (a,), lambda g: (np.ascontiguousarray(g.T),))


def dot(a, b) -> Tensor:
    """Inner product of two equal-length vectors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot expects equal-length vectors, got {a.shape} and {b.shape}")
    return matmul(a, b)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def tensor_sum(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(a.data.sum(axis=axis))

    def backward(g):
        if axis is None:
            return (np.full_like(a.data, float(g)) if a.shape != () else np.asarray(g),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _apply(out, (a,), backward)


def mean(a) -> Tensor:
    a = _as_tensor(a)
    if a.size == 0:
        raise ShapeError("mean of an empty tensor is undefined")
    n = a.size
    out = np.asarray(a.data.mean())
    return _apply(out, (a,), lambda g: (np.full_like(a.data, float(g) / n),))


def tensor_max(a, axis=None) -> Tensor:
    """Maximum along an axis (or overall); ties route gradient to the first hit."""
    a = _as_tensor(a)
    if a.size == 0:
        raise ShapeError("max of an empty tensor is undefined")
    ad = a.data
    if axis is None:
        flat_idx = int(np.argmax(ad))
        out = np.asarray(ad.reshape(-1)[flat_idx])

        def backward(g):
            ga = np.zeros_like(ad)
            ga.reshape(-1)[flat_idx] = float(g)
            return (ga,)

        return _apply(out, (a,), backward)

    idx = np.argmax(ad, axis=axis)
    out = np.take_along_axis(ad, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        ga = np.zeros_like(ad)
        np.put_along_axis(
            ga, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis
        )
        return (ga,)

    return _apply(np.ascontiguousarray(out), (a,), backward)


# ---------------------------------------------------------------------------
# Softmax family
# ---------------------------------------------------------------------------


def softmax(a, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis`` (max-subtracted before exponentiation)."""
    a = _as_tensor(a)
    if a.size == 0:
        raise ShapeError("softmax of an empty tensor is undefined")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _apply(out, (a,), backward)


def log_softmax(a) -> Tensor:
    """Stable log-softmax of a vector."""
    a = _as_tensor(a)
    if a.ndim != 1 or a.size == 0:
        raise ShapeError(f"log_softmax expects a nonempty vector, got shape {a.shape}")
    shifted = a.data - a.data.max()
    log_z = np.log(np.exp(shifted).sum())
    out = shifted - log_z
    probs = np.exp(out)
    return _apply(out, (a,), lambda g: (g - probs * g.sum(),))


# ---------------------------------------------------------------------------
# Structure: concatenation, stacking, selection
# ---------------------------------------------------------------------------


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat requires at least one tensor")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        slicer = [slice(None)] * g.ndim
        pieces = []
        for i in range(len(sizes)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(np.ascontiguousarray(g[tuple(slicer)]))
        return tuple(pieces)

    return _apply(out, tuple(tensors), backward)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack requires at least one tensor")
    first = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != first:
            raise ShapeError(f"stack: mixed shapes {first} and {t.shape}")
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        # ascontiguousarray promotes 0-d pieces to 1-d; reshape restores the
        # stacked operands' true shape.
        moved = np.moveaxis(g, axis, 0)
        return tuple(
            np.ascontiguousarray(moved[i]).reshape(first) for i in range(len(tensors))
        )

    return _apply(out, tuple(tensors), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape).copy()
    return _apply(out, (a,), lambda g: (g.reshape(a.shape),))


def row(a, i: int) -> Tensor:
    """Row ``i`` of a matrix as a vector."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"row expects a matrix, got shape {a.shape}")
    out = a.data[i].copy()

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[i] = g
        return (ga,)

    return _apply(out, (a,), backward)


def take_rows(a, indices) -> Tensor:
    """Gather rows of a matrix; gradient scatter-adds into the source rows."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"take_rows expects a matrix, got shape {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    out = a.data[idx]

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)

    return _apply(out, (a,), backward)


# ---------------------------------------------------------------------------
# Explicit row-wise combinations (no implicit broadcasting in model code)
# ---------------------------------------------------------------------------


def mul_rowvec(x, v) -> Tensor:
    """Multiply every row of matrix ``x`` elementwise by vector ``v``."""
    x, v = _as_tensor(x), _as_tensor(v)
    if x.ndim != 2 or v.ndim != 1 or x.shape[1] != v.shape[0]:
        raise ShapeError(f"mul_rowvec: incompatible shapes {x.shape} and {v.shape}")
    xd, vd = x.data, v.data
    out = xd * vd

    def backward(g):
        return g * vd, (g * xd).sum(axis=0)

    return _apply(out, (x, v), backward)


def add_rowvec(x, v) -> Tensor:
    """Add vector ``v`` to every row of matrix ``x``."""
    x, v = _as_tensor(x), _as_tensor(v)
    if x.ndim != 2 or v.ndim != 1 or x.shape[1] != v.shape[0]:
        raise ShapeError(f"add_rowvec: incompatible shapes {x.shape} and {v.shape}")
    out = x.data + v.data

    def backward(g):
        return g, g.sum(axis=0)

    return _apply(out, (x, v), backward)


def scale_rows(x, s) -> Tensor:
    """Scale row ``i`` of matrix ``x`` by scalar ``s[i]``."""
    x, s = _as_tensor(x), _as_tensor(s)
    if x.ndim != 2 or s.ndim != 1 or x.shape[0] != s.shape[0]:
        raise ShapeError(f"scale_rows: incompatible shapes {x.shape} and {s.shape}")
    xd, sd = x.data, s.data
    out = xd * sd[:, None]

    def backward(g):
        return g * sd[:, None], (g * xd).sum(axis=1)

    return _apply(out, (x, s), backward)


def repeat_row(v, n: int) -> Tensor:
    """Stack ``n`` copies of vector ``v`` into an ``n x d`` matrix."""
    v = _as_tensor(v)
    if v.ndim != 1:
        raise ShapeError(f"repeat_row expects a vector, got shape {v.shape}")
    if n < 1:
        raise ShapeError("repeat_row requires n >= 1")
    out = np.tile(v.data, (n, 1))
    return _apply(out, (v,), lambda g: (g.sum(axis=0),))


# ---------------------------------------------------------------------------
# Cosine kernels
# ---------------------------------------------------------------------------

# Zero-norm convention: a cosine involving a zero vector is 0 with zero
# gradient. Padded or gated time-steps legitimately produce zero vectors
# inside the matching layers, so this must never surface as NaN.


def cosine_similarity(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"cosine_similarity expects equal-length vectors, got {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    na = np.linalg.norm(ad)
    nb = np.linalg.norm(bd)
    if na == 0.0 or nb == 0.0:
        out = np.asarray(0.0)
        zero_a, zero_b = np.zeros_like(ad), np.zeros_like(bd)
        return _apply(out, (a, b), lambda g: (zero_a, zero_b))
    inner = float(ad @ bd)
    cos = inner / (na * nb)
    out = np.asarray(cos)

    def backward(g):
        g = float(g)
        ga = g * (bd / (na * nb) - cos * ad / (na * na))
        gb = g * (ad / (na * nb) - cos * bd / (nb * nb))
        return ga, gb

    return _apply(out, (a, b), backward)


def row_cosine(a, b) -> Tensor:
    """Cosine of corresponding rows of two equal-shape matrices."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or a.shape != b.shape:
        raise ShapeError(f"row_cosine expects equal-shape matrices, got {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    na = np.linalg.norm(ad, axis=1)
    nb = np.linalg.norm(bd, axis=1)
    ok = (na > 0.0) & (nb > 0.0)
    sa = np.where(na > 0.0, na, 1.0)
    sb = np.where(nb > 0.0, nb, 1.0)
    inner = np.einsum("ij,ij->i", ad, bd)
    cos = np.where(ok, inner / (sa * sb), 0.0)

    def backward(g):
        gm = np.where(ok, g, 0.0)
        ga = (gm / (sa * sb))[:, None] * bd - (gm * cos / (sa * sa))[:, None] * ad
        gb = (gm / (sa * sb))[:, None] * ad - (gm * cos / (sb * sb))[:, None] * bd
        return ga, gb

    return _apply(cos, (a, b), backward)


def pairwise_cosine(a, b) -> Tensor:
    """All-pairs cosine: rows of ``a`` against rows of ``b`` -> [m x n]."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"pairwise_cosine: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    na = np.linalg.norm(ad, axis=1)
    nb = np.linalg.norm(bd, axis=1)
    sa = np.where(na > 0.0, na, 1.0)
    sb = np.where(nb > 0.0, nb, 1.0)
    ok = (na > 0.0)[:, None] & (nb > 0.0)[None, :]
    inner = ad @ bd.T
    cos = np.where(ok, inner / (sa[:, None] * sb[None, :]), 0.0)

    def backward(g):
        gm = np.where(ok, g, 0.0)
        scaled = gm / (sa[:, None] * sb[None, :])
        ga = scaled @ bd - ((gm * cos).sum(axis=1) / (sa * sa))[:, None] * ad
        gb = scaled.T @ ad - ((gm * cos).sum(axis=0) / (sb * sb))[:, None] * bd
        return ga, gb

    return _apply(cos, (a, b), backward)


def l2_normalize(v) -> Tensor:
    """Rescale a vector to unit Euclidean norm; zero vectors are an error."""
    v = _as_tensor(v)
    if v.ndim != 1:
        raise ShapeError(f"l2_normalize expects a vector, got shape {v.shape}")
    if float(np.linalg.norm(v.data)) == 0.0:
        raise ZeroNormError("cannot normalize a zero-norm vector")
    norm = sqrt(tensor_sum(mul(v, v)))
    return div(v, norm)


def dropout(x, keep_prob: float, rng: np.random.Generator) -> Tensor:
    """Inverted-scaling dropout mask sampled from ``rng``; identity at keep=1."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    x = _as_tensor(x)
    if keep_prob >= 1.0:
        return x
    mask = (rng.random(x.shape) < keep_prob).astype(x.data.dtype) / keep_prob
    return mul(x, Tensor(mask))


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Iterable[Tensor],
    epsilon: float = 1e-5,
    max_coordinates: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Compare analytic gradients of ``fn`` against central differences.

    ``fn`` takes no arguments and rebuilds a scalar loss from the ``inputs``
    tensors on every call. Returns the maximum over checked coordinates of
    ``|analytic - numeric| / max(1, |analytic|)``. ``max_coordinates`` caps
    the number of coordinates probed per input (sampled with ``rng``), which
    keeps whole-model checks affordable; by default every coordinate is
    checked.
    """
    inputs = list(inputs)
    saved_flags = [t.requires_grad for t in inputs]
    for t in inputs:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.requires_grad = True
        t.zero_grad()
    try:
        with ComputationTape() as tape:
            out = fn()
            if out.shape != ():
                raise ShapeError(f"grad_check requires a scalar-valued function, got shape {out.shape}")
            tape.backward(out)
        analytic = [t.grad.copy() for t in inputs]
    finally:
        for t, flag in zip(inputs, saved_flags):
            t.requires_grad = flag
            if not flag:
                t.grad = None

    worst = 0.0
    for i, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coordinates is not None and flat.size > max_coordinates:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(flat.size, size=max_coordinates, replace=False)
        for c in coords:
            original = flat[c]
            flat[c] = original + epsilon
            f_plus = float(fn().data)
            flat[c] = original - epsilon
            f_minus = float(fn().data)
            flat[c] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise GradCheckError(
                    f"non-finite value while perturbing input {i} coordinate {int(c)}"
                )
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            ana = analytic[i].reshape(-1)[c]
            err = abs(ana - numeric) / builtins.max(1.0, abs(ana))
            if err > worst:
                worst = err
    return worst
