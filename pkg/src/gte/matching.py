"""Multi-perspective cosine matching between sentence (and image) vectors.

One perspective is a trainable elementwise reweighting of both operands
before a cosine; l perspectives give an l-entry matching vector. The four
sequence strategies differ in what each time-step of the first sequence is
compared against: the other sequence's final state (full), the elementwise
best over all steps (max-pooling), a cosine-weighted mixture (attentive), or
the single most similar step (max-attentive). The multimodal variant reuses
the same kernel with a separate reweighting for each modality, after image
features are mapped into the text width by an affine projection.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    add,
    clamp_min,
    concat,
    div,
    matmul,
    mul,
    mul_rowvec,
    pairwise_cosine,
    repeat_row,
    reshape,
    row,
    row_cosine,
    scale_rows,
    softmax,
    take_rows,
    tensor_sum,
)

EPSILON_WEIGHT_SUM = 1e-8


class PerspectiveWeights:
    """Trainable [l x d] reweighting matrix; one row per perspective."""

    def __init__(self, W: Tensor):
        if W.ndim != 2 or W.shape[0] < 1:
            raise ShapeError(f"perspective weights must be a nonempty matrix, got shape {W.shape}")
        if np.any(np.all(W.data == 0.0, axis=1)):
            raise ValueError("a perspective row is identically zero")
        self.W = W

    @classmethod
    def seeded(cls, num_perspectives: int, width: int, seed: int = 0) -> "PerspectiveWeights":
        rng = np.random.default_rng(seed)
        data = rng.uniform(-0.08, 0.08, size=(num_perspectives, width))
        while np.any(np.all(data == 0.0, axis=1)):  # pragma: no cover - measure-zero
            data = rng.uniform(-0.08, 0.08, size=(num_perspectives, width))
        return cls(Tensor(data, requires_grad=True))

    @property
    def num_perspectives(self) -> int:
        return self.W.shape[0]

    @property
    def width(self) -> int:
        return self.W.shape[1]

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(prefix, self.W)]


class AffineMap:
    """Affine projection of e-dimensional image features into width d."""

    def __init__(self, weight: Tensor, bias: Tensor):
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[0] != bias.shape[0]:
            raise ShapeError(
                f"affine map needs weight [d x e] and bias [d], got {weight.shape} and {bias.shape}"
            )
        self.weight = weight
        self.bias = bias

    @classmethod
    def seeded(cls, in_dim: int, out_dim: int, seed: int = 0) -> "AffineMap":
        # Fan-scaled limit keeps activation magnitude roughly constant through
        # stacked layers; a fixed small scale would shrink deep pre-activations
        # toward the finite-difference epsilon and land on ReLU kinks.
        # The bias draw is small but never zero: exact-zero biases leave ReLU
        # pre-activations sitting on the kink whenever a gating product zeroes
        # the input, which breaks finite-difference gradient validation.
        rng = np.random.default_rng(seed)
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        w = Tensor(rng.uniform(-limit, limit, size=(out_dim, in_dim)), requires_grad=True)
        b = Tensor(rng.uniform(-0.05, 0.05, size=out_dim), requires_grad=True)
        return cls(w, b)

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


class MultimodalWeights:
    """Paired perspective matrices: W for the text side, U for the image side."""

    def __init__(self, W: PerspectiveWeights, U: PerspectiveWeights):
        if W.W.shape != U.W.shape:
            raise ShapeError(
                f"text and image perspective shapes differ: {W.W.shape} vs {U.W.shape}"
            )
        self.W = W
        self.U = U

    @classmethod
    def seeded(cls, num_perspectives: int, width: int, seed: int = 0) -> "MultimodalWeights":
        return cls(
            PerspectiveWeights.seeded(num_perspectives, width, seed),
            PerspectiveWeights.seeded(num_perspectives, width, seed + 1),
        )

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.text", self.W.W), (f"{prefix}.image", self.U.W)]


def _check_vector(v: Tensor, width: int, name: str) -> None:
    if v.ndim != 1 or v.shape[0] != width:
        raise ShapeError(f"{name} must be a vector of width {width}, got shape {v.shape}")


def _check_sequence(seq: Tensor, width: int, name: str) -> None:
    if seq.ndim != 2 or seq.shape[1] != width:
        raise ShapeError(f"{name} must be [T x {width}], got shape {seq.shape}")
    if seq.shape[0] < 1:
        raise ShapeError(f"{name} must contain at least one time-step")


def mp_match(
    v1: Tensor,
    v2: Tensor,
    weights: PerspectiveWeights,
    weights_other: Optional[PerspectiveWeights] = None,
) -> Tensor:
    """Per-perspective cosine of the reweighted operands -> vector of length l.

    ``weights_other``, when given, reweights ``v2`` instead of ``weights``;
    that is the multimodal form where each modality owns its matrix.
    """
    W = weights.W
    U = weights_other.W if weights_other is not None else W
    _check_vector(v1, W.shape[1], "v1")
    _check_vector(v2, U.shape[1], "v2")
    return row_cosine(mul_rowvec(W, v1), mul_rowvec(U, v2))


def multimodal_match(v_text: Tensor, v_image: Tensor, mw: MultimodalWeights) -> Tensor:
    """Matching vector between a text vector and a projected image vector."""
    return mp_match(v_text, v_image, mw.W, mw.U)


def affine_project(features: Tensor, affine: AffineMap) -> Tensor:
    """weight @ features + bias, mapping image width e into matching width d."""
    if features.ndim != 1 or features.shape[0] != affine.weight.shape[1]:
        raise ShapeError(
            f"features of shape {features.shape} do not fit affine map {affine.weight.shape}"
        )
    return add(matmul(affine.weight, features), affine.bias)


def _per_perspective(seq: Tensor, weights: PerspectiveWeights, k: int) -> Tensor:
    # Rows of seq reweighted by perspective k.
    return mul_rowvec(seq, row(weights.W, k))


def full_matching(
    seq: Tensor,
    other_final: Tensor,
    weights: PerspectiveWeights,
    weights_other: Optional[PerspectiveWeights] = None,
) -> Tensor:
    """Match every step of ``seq`` against one designated state -> [T x l].

    The caller supplies the direction-consistent state: the forward pass
    matches against the other sentence's last forward state, the backward
    pass against its first backward state.
    """
    W = weights
    U = weights_other if weights_other is not None else weights
    _check_sequence(seq, W.width, "seq")
    _check_vector(other_final, U.width, "other_final")
    n = seq.shape[0]
    other = repeat_row(other_final, n)
    columns = []
    for k in range(W.num_perspectives):
        cos_k = row_cosine(_per_perspective(seq, W, k), _per_perspective(other, U, k))
        columns.append(reshape(cos_k, (n, 1)))
    return concat(columns, axis=1)


def maxpool_matching(
    seq1: Tensor,
    seq2: Tensor,
    weights: PerspectiveWeights,
    weights_other: Optional[PerspectiveWeights] = None,
) -> Tensor:
    """Elementwise max over matches against every step of ``seq2`` -> [T1 x l]."""
    W = weights
    U = weights_other if weights_other is not None else weights
    _check_sequence(seq1, W.width, "seq1")
    _check_sequence(seq2, U.width, "seq2")
    columns = []
    for k in range(W.num_perspectives):
        table = pairwise_cosine(_per_perspective(seq1, W, k), _per_perspective(seq2, U, k))
        columns.append(reshape(table.max(axis=1), (seq1.shape[0], 1)))
    return concat(columns, axis=1)


def _attentive_states(seq1: Tensor, seq2: Tensor, weighting: str) -> Tensor:
    # One mixture of seq2 rows per seq1 step, weighted by raw state cosine.
    raw = pairwise_cosine(seq1, seq2)
    if weighting == "softmax":
        return matmul(softmax(raw, axis=1), seq2)
    if weighting != "cosine":
        raise ValueError(f"unknown attentive weighting {weighting!r}")
    numer = matmul(raw, seq2)
    denom = clamp_min(tensor_sum(raw, axis=1), EPSILON_WEIGHT_SUM)
    return scale_rows(numer, div(Tensor(np.ones(seq1.shape[0])), denom))


def attentive_matching(
    seq1: Tensor,
    seq2: Tensor,
    weights: PerspectiveWeights,
    weights_other: Optional[PerspectiveWeights] = None,
    weighting: str = "cosine",
) -> Tensor:
    """Match each step of ``seq1`` against its cosine-weighted mixture of ``seq2``."""
    W = weights
    U = weights_other if weights_other is not None else weights
    _check_sequence(seq1, W.width, "seq1")
    _check_sequence(seq2, U.width, "seq2")
    mixed = _attentive_states(seq1, seq2, weighting)
    columns = []
    for k in range(W.num_perspectives):
        cos_k = row_cosine(_per_perspective(seq1, W, k), _per_perspective(mixed, U, k))
        columns.append(reshape(cos_k, (seq1.shape[0], 1)))
    return concat(columns, axis=1)


def max_attentive_matching(
    seq1: Tensor,
    seq2: Tensor,
    weights: PerspectiveWeights,
    weights_other: Optional[PerspectiveWeights] = None,
) -> Tensor:
    """Match each step of ``seq1`` against its highest-cosine step of ``seq2``.

    Selection is by raw state cosine with ties going to the earliest index;
    gradients flow through the selected states, not the selection itself.
    """
    W = weights
    U = weights_other if weights_other is not None else weights
    _check_sequence(seq1, W.width, "seq1")
    _check_sequence(seq2, U.width, "seq2")
    raw = pairwise_cosine(seq1, seq2)
    chosen = take_rows(seq2, np.argmax(raw.data, axis=1))
    columns = []
    for k in range(W.num_perspectives):
        cos_k = row_cosine(_per_perspective(seq1, W, k), _per_perspective(chosen, U, k))
        columns.append(reshape(cos_k, (seq1.shape[0], 1)))
    return concat(columns, axis=1)
