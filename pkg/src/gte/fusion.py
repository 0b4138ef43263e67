"""Image features and text-image fusion blocks.

Three feature variants cover the model family: one global vector per image,
a 7x7 convolutional grid flattened to 49 vectors, and 36 detected-region
vectors. Fusion is always multiplicative: a text representation and an image
representation are projected into a shared width and combined elementwise,
optionally after attending over regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import AffineMap, affine_project
from .tensor import (
    ShapeError,
    Tensor,
    add,
    add_rowvec,
    concat,
    matmul,
    mul,
    relu,
    repeat_row,
    sigmoid,
    softmax,
    tanh,
    transpose,
)

GLOBAL_4096 = "global_4096"
GRID_49X512 = "grid_49x512"
REGIONS_36X2048 = "regions_36x2048"

FEATURE_SHAPES = {
    GLOBAL_4096: (4096,),
    GRID_49X512: (49, 512),
    REGIONS_36X2048: (36, 2048),
}

UNIT_NORM_TOLERANCE = 1e-4


class VariantError(ValueError):
    """Raised when an image feature variant does not fit the consumer."""


@dataclass
class ImageFeature:
    """One image's feature tensor under a named extraction variant.

    The global vector and every region row are unit-norm within a tolerance
    that absorbs 32-bit storage; the grid carries raw activations.
    """

    image_id: str
    variant: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.variant not in FEATURE_SHAPES:
            raise VariantError(f"unknown feature variant {self.variant!r}")
        expected = FEATURE_SHAPES[self.variant]
        self.data = np.asarray(self.data)
        if self.data.shape != expected:
            raise ShapeError(
                f"variant {self.variant} requires shape {expected}, got {self.data.shape}"
            )
        if self.variant == GLOBAL_4096:
            norms = np.linalg.norm(self.data, keepdims=True)
        elif self.variant == REGIONS_36X2048:
            norms = np.linalg.norm(self.data, axis=1)
        else:
            return
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
            raise ValueError(
                f"{self.variant} features for {self.image_id!r} are not unit-norm"
            )


def require_variant(image: ImageFeature, variant: str) -> None:
    if image.variant != variant:
        raise VariantError(
            f"expected {variant} features, got {image.variant} for image {image.image_id!r}"
        )


@dataclass
class VlstmFusionParameters:
    """Projections for global-vector fusion: text through ReLU, image linear."""

    text_map: AffineMap
    image_map: AffineMap

    @classmethod
    def seeded(cls, text_dim: int, image_dim: int, out_dim: int, seed: int = 0) -> "VlstmFusionParameters":
        return cls(
            text_map=AffineMap.seeded(text_dim, out_dim, seed),
            image_map=AffineMap.seeded(image_dim, out_dim, seed + 1),
        )

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return self.text_map.named_parameters(f"{prefix}.text") + self.image_map.named_parameters(
            f"{prefix}.image"
        )


def vlstm_fuse(text_vec: Tensor, image: ImageFeature, params: VlstmFusionParameters) -> Tensor:
    """Elementwise product of ReLU-projected text and projected global image."""
    require_variant(image, GLOBAL_4096)
    t = relu(affine_project(text_vec, params.text_map))
    v = affine_project(Tensor(image.data), params.image_map)
    return mul(t, v)


class GatedTanhParameters:
    """Two affine branches of identical shape: content (tanh) and gate (sigmoid)."""

    def __init__(self, content: AffineMap, gate: AffineMap):
        if content.weight.shape != gate.weight.shape:
            raise ShapeError(
                f"gated-tanh branches disagree: {content.weight.shape} vs {gate.weight.shape}"
            )
        self.content = content
        self.gate = gate

    @classmethod
    def seeded(cls, in_dim: int, out_dim: int, seed: int = 0) -> "GatedTanhParameters":
        return cls(AffineMap.seeded(in_dim, out_dim, seed), AffineMap.seeded(in_dim, out_dim, seed + 1))

    @property
    def in_dim(self) -> int:
        return self.content.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.content.weight.shape[0]

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return self.content.named_parameters(f"{prefix}.content") + self.gate.named_parameters(
            f"{prefix}.gate"
        )


def gated_tanh(x: Tensor, params: GatedTanhParameters) -> Tensor:
    """tanh branch modulated by a sigmoid gate; accepts a vector or row matrix."""
    if x.ndim == 1:
        content = add(matmul(params.content.weight, x), params.content.bias)
        gate = add(matmul(params.gate.weight, x), params.gate.bias)
    elif x.ndim == 2:
        content = add_rowvec(matmul(x, transpose(params.content.weight)), params.content.bias)
        gate = add_rowvec(matmul(x, transpose(params.gate.weight)), params.gate.bias)
    else:
        raise ShapeError(f"gated_tanh expects a vector or matrix, got shape {x.shape}")
    return mul(tanh(content), sigmoid(gate))


class TopDownAttentionParameters:
    """Scoring block: concat(text, region) -> gated tanh -> scalar score."""

    def __init__(self, gate: GatedTanhParameters, score_weight: Tensor):
        if score_weight.ndim != 1 or score_weight.shape[0] != gate.out_dim:
            raise ShapeError(
                f"score weight of shape {score_weight.shape} does not fit gate output {gate.out_dim}"
            )
        self.gate = gate
        self.score_weight = score_weight

    @classmethod
    def seeded(cls, text_dim: int, region_dim: int, attention_dim: int, seed: int = 0) -> "TopDownAttentionParameters":
        rng = np.random.default_rng(seed)
        gate = GatedTanhParameters.seeded(text_dim + region_dim, attention_dim, seed + 1)
        w = Tensor(rng.uniform(-0.08, 0.08, size=attention_dim), requires_grad=True)
        return cls(gate, w)

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return self.gate.named_parameters(f"{prefix}.gate") + [
            (f"{prefix}.score", self.score_weight)
        ]


def topdown_attention(
    text_vec: Tensor,
    regions: ImageFeature,
    params: TopDownAttentionParameters,
    region_mask: np.ndarray | None = None,
) -> Tensor:
    """Softmax-weighted sum of region vectors scored against the text vector.

    ``region_mask``, when given, marks regions eligible for attention; masked
    regions receive exactly zero weight.
    """
    require_variant(regions, REGIONS_36X2048)
    r = Tensor(regions.data)
    n = r.shape[0]
    joined = concat([repeat_row(text_vec, n), r], axis=1)
    scores = matmul(gated_tanh(joined, params.gate), params.score_weight)
    if region_mask is not None:
        mask = np.asarray(region_mask, dtype=bool)
        if mask.shape != (n,):
            raise ShapeError(f"region mask must have shape ({n},), got {mask.shape}")
        if not mask.any():
            raise ValueError("region mask excludes every region")
        # -inf-like offset: exp underflows to exactly zero after shifting.
        scores = add(scores, Tensor(np.where(mask, 0.0, -1e30)))
    weights = softmax(scores)
    return matmul(weights, r)
