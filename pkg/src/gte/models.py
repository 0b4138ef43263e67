"""The five entailment architectures and their grounding configurations.

Two text-only models (a final-state LSTM with a ReLU classifier stack and a
bilateral multi-perspective matcher) and three visually grounded ones (the
LSTM with multiplicative global-image fusion, the matcher extended with
text-to-image matching over a projected grid, and a region-attention model
with gated-tanh fusion). Groundings control which inputs reach the network:
premise and hypothesis text, and optionally an image fused with one or both
sentences.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from . import fusion as fus
from .encoders import (
    ContextualEmbedding,
    EmbeddingTable,
    LstmParameters,
    encode_contextual,
    encode_final,
    run_lstm,
)
from .matching import (
    AffineMap,
    MultimodalWeights,
    PerspectiveWeights,
    attentive_matching,
    full_matching,
    max_attentive_matching,
    maxpool_matching,
)
from .tensor import (
    Tensor,
    add,
    add_rowvec,
    concat,
    dropout,
    matmul,
    mul,
    relu,
    row,
    softmax,
    transpose,
)

CLASS_ORDER = ("entailment", "contradiction", "neutral")

ARCH_LSTM = "lstm"
ARCH_VLSTM = "v-lstm"
ARCH_BIMPM = "bimpm"
ARCH_VBIMPM = "v-bimpm"
ARCH_VQA = "vqa"

ARCHITECTURE_ALIASES = {
    "lstm": ARCH_LSTM,
    "v-lstm": ARCH_VLSTM,
    "vlstm": ARCH_VLSTM,
    "bimpm": ARCH_BIMPM,
    "v-bimpm": ARCH_VBIMPM,
    "vbimpm": ARCH_VBIMPM,
    "vqa": ARCH_VQA,
}

GROUNDING_NONE = "none"
GROUNDING_H = "h"
GROUNDING_H_IMAGE = "h+i"
GROUNDING_FULL = "full"
GROUNDING_FULL_BOTH = "full-both"

GROUNDING_ALIASES = {
    "none": GROUNDING_NONE,
    "h": GROUNDING_H,
    "h-only": GROUNDING_H,
    "h+i": GROUNDING_H_IMAGE,
    "hi-only": GROUNDING_H_IMAGE,
    "hi_only": GROUNDING_H_IMAGE,
    "full": GROUNDING_FULL,
    "full-both": GROUNDING_FULL_BOTH,
    "full_both": GROUNDING_FULL_BOTH,
}

# Which groundings each architecture supports, and its default.
_TEXT_GROUNDINGS = {
    ARCH_LSTM: {GROUNDING_NONE, GROUNDING_H},
    ARCH_BIMPM: {GROUNDING_NONE},
}
_IMAGE_GROUNDINGS = {GROUNDING_H_IMAGE, GROUNDING_FULL, GROUNDING_FULL_BOTH}

REQUIRED_VARIANT = {
    ARCH_LSTM: None,
    ARCH_BIMPM: None,
    ARCH_VLSTM: fus.GLOBAL_4096,
    ARCH_VBIMPM: fus.GRID_49X512,
    ARCH_VQA: fus.REGIONS_36X2048,
}


@dataclass
class ModelConfig:
    """Architecture, grounding, and dimension settings for one model."""

    architecture: str
    vocab_size: int
    grounding: Optional[str] = None
    embed_dim: int = 300
    hidden_dim: int = 512
    perspectives: int = 8
    dropout_keep: float = 0.5
    seed: int = 0
    attention_dim: Optional[int] = None
    attentive_weighting: str = "cosine"
    image_full_matching: bool = False
    share_encoders: bool = True
    max_len: int = 82

    def __post_init__(self):
        arch = ARCHITECTURE_ALIASES.get(str(self.architecture).lower())
        if arch is None:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        self.architecture = arch
        if self.grounding is None:
            self.grounding = GROUNDING_NONE if arch in _TEXT_GROUNDINGS else GROUNDING_FULL_BOTH
        grounding = GROUNDING_ALIASES.get(str(self.grounding).lower())
        if grounding is None:
            raise ValueError(f"unknown grounding {self.grounding!r}")
        self.grounding = grounding
        if arch in _TEXT_GROUNDINGS:
            if grounding not in _TEXT_GROUNDINGS[arch]:
                raise ValueError(
                    f"architecture {arch} does not support grounding {grounding!r}"
                )
        elif grounding not in _IMAGE_GROUNDINGS:
            raise ValueError(
                f"image architecture {arch} requires an image grounding, not {grounding!r}"
            )
        if self.vocab_size < 3:
            raise ValueError("vocab_size must cover PAD, UNK, and at least one token")
        for name in ("embed_dim", "hidden_dim", "perspectives", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError("dropout_keep must be in (0, 1]")
        if self.attention_dim is None:
            self.attention_dim = self.hidden_dim

    @staticmethod
    def canonical_architecture(name: str) -> str:
        arch = ARCHITECTURE_ALIASES.get(str(name).lower())
        if arch is None:
            raise ValueError(f"unknown architecture {name!r}")
        return arch

    @property
    def required_variant(self) -> Optional[str]:
        return REQUIRED_VARIANT[self.architecture]

    @property
    def uses_image(self) -> bool:
        return self.grounding in _IMAGE_GROUNDINGS

    @property
    def uses_premise(self) -> bool:
        return self.grounding not in (GROUNDING_H, GROUNDING_H_IMAGE)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def apply_ablation(
    grounding: str,
    premise: Optional[Sequence[int]],
    hypothesis: Sequence[int],
    image: Optional[fus.ImageFeature],
):
    """Sever the inputs a grounding excludes; what remains reaches the model."""
    if grounding in (GROUNDING_H, GROUNDING_H_IMAGE):
        premise = None
    if grounding in (GROUNDING_NONE, GROUNDING_H):
        image = None
    return premise, hypothesis, image


@dataclass
class Prediction:
    """Class probabilities plus the argmax label under the fixed class order."""

    probabilities: np.ndarray
    label: str

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        if self.probabilities.shape != (len(CLASS_ORDER),):
            raise ValueError(f"expected {len(CLASS_ORDER)} probabilities")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities do not sum to 1")
        if self.label not in CLASS_ORDER:
            raise ValueError(f"unknown label {self.label!r}")

    @classmethod
    def from_logits(cls, logits: Tensor) -> "Prediction":
        probs = softmax(logits).data
        return cls(probabilities=probs, label=CLASS_ORDER[int(np.argmax(probs))])


def _seed_stream(seed: int):
    rng = np.random.default_rng(seed)
    while True:
        yield int(rng.integers(0, 2**31 - 1))


def _identity(x: Tensor) -> Tensor:
    return x


class _ModelBase:
    """Shared plumbing: embedding table, dropout closure, prediction."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self._seeds = _seed_stream(config.seed)
        self.embedding = EmbeddingTable.seeded(
            config.vocab_size, config.embed_dim, seed=next(self._seeds)
        )

    def _drop(self, train: bool, rng: Optional[np.random.Generator]):
        keep = self.config.dropout_keep
        if not train or keep >= 1.0:
            return _identity
        if rng is None:
            raise ValueError("training-mode forward requires an rng for dropout")
        return lambda t: dropout(t, keep, rng)

    def forward(self, premise, hypothesis, image=None, train=False, rng=None) -> Tensor:
        raise NotImplementedError

    def predict(self, premise, hypothesis, image=None) -> Prediction:
        return Prediction.from_logits(self.forward(premise, hypothesis, image))

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def _require_image(self, image: Optional[fus.ImageFeature]) -> fus.ImageFeature:
        if image is None:
            raise ValueError(
                f"grounding {self.config.grounding!r} requires an image feature"
            )
        return image


def _affine_stack(widths: list[tuple[int, int]], seeds) -> list[AffineMap]:
    return [AffineMap.seeded(i, o, seed=next(seeds)) for i, o in widths]


def _named_affine(prefix: str, layers: list[AffineMap]) -> list[tuple[str, Tensor]]:
    out = []
    for i, layer in enumerate(layers):
        out.extend(layer.named_parameters(f"{prefix}.{i}"))
    return out


def _apply_affine(x: Tensor, layer: AffineMap) -> Tensor:
    return add(matmul(layer.weight, x), layer.bias)


class LstmClassifier(_ModelBase):
    """Final-state LSTM encodings concatenated into a three-layer ReLU stack."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden_dim
        self.encoder = LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        self.encoder_h = (
            self.encoder
            if config.share_encoders
            else LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        )
        in_dim = 2 * h if config.uses_premise else h
        self.classifier = _affine_stack(
            [(in_dim, h), (h, h), (h, h), (h, len(CLASS_ORDER))], self._seeds
        )

    def _encode(self, indices, params, drop) -> Tensor:
        return drop(
            encode_final(
                indices, self.embedding, params,
                max_len=self.config.max_len, row_transform=drop,
            )
        )

    def forward(self, premise, hypothesis, image=None, train=False, rng=None) -> Tensor:
        premise, hypothesis, image = apply_ablation(
            self.config.grounding, premise, hypothesis, image
        )
        drop = self._drop(train, rng)
        hh = self._encode(hypothesis, self.encoder_h, drop)
        if premise is not None:
            x = concat([self._encode(premise, self.encoder, drop), hh])
        else:
            x = hh
        for layer in self.classifier[:-1]:
            x = drop(relu(_apply_affine(x, layer)))
        return _apply_affine(x, self.classifier[-1])

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("embedding", self.embedding.weights)]
        out.extend(self.encoder.named_parameters("encoder"))
        if self.encoder_h is not self.encoder:
            out.extend(self.encoder_h.named_parameters("encoder_h"))
        out.extend(_named_affine("classifier", self.classifier))
        return out


class VlstmClassifier(_ModelBase):
    """LSTM classifier with multiplicative global-image fusion per sentence."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden_dim
        self.encoder = LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        self.encoder_h = (
            self.encoder
            if config.share_encoders
            else LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        )
        self.fusion = fus.VlstmFusionParameters.seeded(
            h, fus.FEATURE_SHAPES[fus.GLOBAL_4096][0], h, seed=next(self._seeds)
        )
        in_dim = 2 * h if config.uses_premise else h
        self.classifier = _affine_stack(
            [(in_dim, h), (h, h), (h, h), (h, len(CLASS_ORDER))], self._seeds
        )

    def _encode(self, indices, params, drop) -> Tensor:
        return drop(
            encode_final(
                indices, self.embedding, params,
                max_len=self.config.max_len, row_transform=drop,
            )
        )

    def forward(self, premise, hypothesis, image=None, train=False, rng=None) -> Tensor:
        premise, hypothesis, image = apply_ablation(
            self.config.grounding, premise, hypothesis, image
        )
        image = self._require_image(image)
        drop = self._drop(train, rng)
        hh = self._encode(hypothesis, self.encoder_h, drop)
        fused_h = fus.vlstm_fuse(hh, image, self.fusion)
        if premise is None:
            x = fused_h
        else:
            hp = self._encode(premise, self.encoder, drop)
            if self.config.grounding == GROUNDING_FULL_BOTH:
                hp = fus.vlstm_fuse(hp, image, self.fusion)
            x = concat([hp, fused_h])
        for layer in self.classifier[:-1]:
            x = drop(relu(_apply_affine(x, layer)))
        return _apply_affine(x, self.classifier[-1])

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("embedding", self.embedding.weights)]
        out.extend(self.encoder.named_parameters("encoder"))
        if self.encoder_h is not self.encoder:
            out.extend(self.encoder_h.named_parameters("encoder_h"))
        out.extend(self.fusion.named_parameters("fusion"))
        out.extend(_named_affine("classifier", self.classifier))
        return out


_TEXT_STRATEGIES = ("full", "maxpool", "attentive", "max_attentive")
_IMAGE_STRATEGIES = ("maxpool", "attentive", "max_attentive")
_DIRECTIONS = ("fwd", "bwd")


class BimpmClassifier(_ModelBase):
    """Bilateral multi-perspective matching over contextual BiLSTM states.

    Each side's per-step states are matched against the other side with all
    four strategies in both directions; the matching sequences are aggregated
    by a second BiLSTM whose final states feed a two-layer classifier.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h, l = config.hidden_dim, config.perspectives
        self.context_fwd = LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        self.context_bwd = LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        self.match_weights = {
            f"{s}.{d}": PerspectiveWeights.seeded(l, h, seed=next(self._seeds))
            for s in _TEXT_STRATEGIES
            for d in _DIRECTIONS
        }
        agg_in = self._aggregation_width()
        self.agg_fwd = LstmParameters.seeded(agg_in, h, seed=next(self._seeds))
        self.agg_bwd = LstmParameters.seeded(agg_in, h, seed=next(self._seeds))
        ff_in = 4 * h if config.uses_premise else 2 * h
        self.ff = _affine_stack([(ff_in, h), (h, len(CLASS_ORDER))], self._seeds)

    def _aggregation_width(self) -> int:
        return len(_TEXT_STRATEGIES) * len(_DIRECTIONS) * self.config.perspectives

    def _encode(self, indices, drop) -> ContextualEmbedding:
        ctx = encode_contextual(
            indices, self.embedding, self.context_fwd, self.context_bwd,
            max_len=self.config.max_len, row_transform=drop,
        )
        return ContextualEmbedding(
            forward=drop(ctx.forward), backward=drop(ctx.backward), length=ctx.length
        )

    def _match_text(self, this: ContextualEmbedding, other: ContextualEmbedding) -> Tensor:
        w = self.match_weights
        weighting = self.config.attentive_weighting
        cols = [
            full_matching(this.forward, row(other.forward, other.length - 1), w["full.fwd"]),
            full_matching(this.backward, row(other.backward, 0), w["full.bwd"]),
            maxpool_matching(this.forward, other.forward, w["maxpool.fwd"]),
            maxpool_matching(this.backward, other.backward, w["maxpool.bwd"]),
            attentive_matching(this.forward, other.forward, w["attentive.fwd"], weighting=weighting),
            attentive_matching(this.backward, other.backward, w["attentive.bwd"], weighting=weighting),
            max_attentive_matching(this.forward, other.forward, w["max_attentive.fwd"]),
            max_attentive_matching(this.backward, other.backward, w["max_attentive.bwd"]),
        ]
        return concat(cols, axis=1)

    def _aggregate(self, match_seq: Tensor, drop) -> Tensor:
        seq = drop(match_seq)
        fwd_final = run_lstm(seq, self.agg_fwd)[-1]
        bwd_final = run_lstm(seq, self.agg_bwd, reverse=True)[-1]
        return concat([drop(fwd_final), drop(bwd_final)])

    def _classify(self, rep: Tensor, drop) -> Tensor:
        hidden = drop(relu(_apply_affine(rep, self.ff[0])))
        return _apply_affine(hidden, self.ff[1])

    def forward(self, premise, hypothesis, image=None, train=False, rng=None) -> Tensor:
        premise, hypothesis, image = apply_ablation(
            self.config.grounding, premise, hypothesis, image
        )
        drop = self._drop(train, rng)
        ctx_p = self._encode(premise, drop)
        ctx_h = self._encode(hypothesis, drop)
        rep = concat([
            self._aggregate(self._match_text(ctx_p, ctx_h), drop),
            self._aggregate(self._match_text(ctx_h, ctx_p), drop),
        ])
        return self._classify(rep, drop)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("embedding", self.embedding.weights)]
        out.extend(self.context_fwd.named_parameters("context.fwd"))
        out.extend(self.context_bwd.named_parameters("context.bwd"))
        for name in sorted(self.match_weights):
            out.extend(self.match_weights[name].named_parameters(f"match.{name}"))
        out.extend(self.agg_fwd.named_parameters("aggregate.fwd"))
        out.extend(self.agg_bwd.named_parameters("aggregate.bwd"))
        out.extend(_named_affine("ff", self.ff))
        return out


class VbimpmClassifier(BimpmClassifier):
    """Bilateral matcher extended with matching against projected grid vectors.

    Image vectors have no ordering, so the strategy that targets a last
    time-step is omitted for the image block (a mean-vector stand-in is
    available behind ``image_full_matching``). Ungrounded sides carry
    zero-valued image channels so the aggregation layout is grounding-stable.
    """

    def __init__(self, config: ModelConfig):
        # Image projection and matching weights are created after the text
        # blocks so the text parameter draw order matches the plain matcher.
        self._image_channels = (
            (len(_IMAGE_STRATEGIES) + (1 if config.image_full_matching else 0))
            * len(_DIRECTIONS)
            * config.perspectives
        )
        super().__init__(config)
        h, l = config.hidden_dim, config.perspectives
        grid_dim = fus.FEATURE_SHAPES[fus.GRID_49X512][1]
        self.image_projection = AffineMap.seeded(grid_dim, h, seed=next(self._seeds))
        strategies = list(_IMAGE_STRATEGIES) + (
            ["full"] if config.image_full_matching else []
        )
        self.image_match = {
            f"{s}.{d}": MultimodalWeights.seeded(l, h, seed=next(self._seeds))
            for s in strategies
            for d in _DIRECTIONS
        }

    def _aggregation_width(self) -> int:
        return super()._aggregation_width() + self._image_channels

    def _project_grid(self, image: fus.ImageFeature) -> Tensor:
        grid = Tensor(image.data)
        return add_rowvec(matmul(grid, transpose(self.image_projection.weight)),
                          self.image_projection.bias)

    def _match_image(self, this: ContextualEmbedding, grid_rows: Tensor) -> Tensor:
        mw = self.image_match
        weighting = self.config.attentive_weighting
        cols = []
        if self.config.image_full_matching:
            ones = Tensor(np.full(grid_rows.shape[0], 1.0 / grid_rows.shape[0]))
            mean_vec = matmul(ones, grid_rows)
            cols.append(full_matching(this.forward, mean_vec, mw["full.fwd"].W, mw["full.fwd"].U))
            cols.append(full_matching(this.backward, mean_vec, mw["full.bwd"].W, mw["full.bwd"].U))
        cols.extend([
            maxpool_matching(this.forward, grid_rows, mw["maxpool.fwd"].W, mw["maxpool.fwd"].U),
            maxpool_matching(this.backward, grid_rows, mw["maxpool.bwd"].W, mw["maxpool.bwd"].U),
            attentive_matching(this.forward, grid_rows, mw["attentive.fwd"].W, mw["attentive.fwd"].U, weighting=weighting),
            attentive_matching(this.backward, grid_rows, mw["attentive.bwd"].W, mw["attentive.bwd"].U, weighting=weighting),
            max_attentive_matching(this.forward, grid_rows, mw["max_attentive.fwd"].W, mw["max_attentive.fwd"].U),
            max_attentive_matching(this.backward, grid_rows, mw["max_attentive.bwd"].W, mw["max_attentive.bwd"].U),
        ])
        return concat(cols, axis=1)

    def _zero_image_channels(self, length: int) -> Tensor:
        return Tensor(np.zeros((length, self._image_channels)))

    def forward(self, premise, hypothesis, image=None, train=False, rng=None) -> Tensor:
        premise, hypothesis, image = apply_ablation(
            self.config.grounding, premise, hypothesis, image
        )
        image = self._require_image(image)
        fus.require_variant(image, fus.GRID_49X512)
        drop = self._drop(train, rng)
        grid_rows = self._project_grid(image)
        ctx_h = self._encode(hypothesis, drop)
        h_image = self._match_image(ctx_h, grid_rows)
        if premise is None:
            # Hypothesis-plus-image: no text matching target, so the text
            # channels are zero and only the image block carries signal.
            zero_text = Tensor(np.zeros((ctx_h.length, super()._aggregation_width())))
            rep = self._aggregate(concat([zero_text, h_image], axis=1), drop)
            return self._classify(rep, drop)
        ctx_p = self._encode(premise, drop)
        if self.config.grounding == GROUNDING_FULL_BOTH:
            p_image = self._match_image(ctx_p, grid_rows)
        else:
            p_image = self._zero_image_channels(ctx_p.length)
        match_p = concat([self._match_text(ctx_p, ctx_h), p_image], axis=1)
        match_h = concat([self._match_text(ctx_h, ctx_p), h_image], axis=1)
        rep = concat([self._aggregate(match_p, drop), self._aggregate(match_h, drop)])
        return self._classify(rep, drop)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = super().named_parameters()
        out.extend(self.image_projection.named_parameters("image_projection"))
        for name in sorted(self.image_match):
            out.extend(self.image_match[name].named_parameters(f"image_match.{name}"))
        return out


class VqaClassifier(_ModelBase):
    """Region attention over detected objects with gated-tanh fusion.

    Each sentence attends over the 36 region vectors; text and attended image
    are reduced by gated-tanh blocks and fused multiplicatively, then the
    per-sentence fusions feed a three-layer gated-tanh stack.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden_dim
        region_dim = fus.FEATURE_SHAPES[fus.REGIONS_36X2048][1]
        self.encoder = LstmParameters.seeded(config.embed_dim, h, seed=next(self._seeds))
        self.attention = fus.TopDownAttentionParameters.seeded(
            h, region_dim, config.attention_dim, seed=next(self._seeds)
        )
        self.text_reduce = fus.GatedTanhParameters.seeded(h, h, seed=next(self._seeds))
        self.image_reduce = fus.GatedTanhParameters.seeded(region_dim, h, seed=next(self._seeds))
        in_dim = 2 * h if config.uses_premise else h
        self.stack = [
            fus.GatedTanhParameters.seeded(in_dim, h, seed=next(self._seeds)),
            fus.GatedTanhParameters.seeded(h, h, seed=next(self._seeds)),
            fus.GatedTanhParameters.seeded(h, h, seed=next(self._seeds)),
        ]
        self.output = AffineMap.seeded(h, len(CLASS_ORDER), seed=next(self._seeds))

    def _fuse_sentence(self, text_vec: Tensor, image: fus.ImageFeature, with_image: bool) -> Tensor:
        reduced_text = fus.gated_tanh(text_vec, self.text_reduce)
        if not with_image:
            return reduced_text
        attended = fus.topdown_attention(text_vec, image, self.attention)
        return mul(reduced_text, fus.gated_tanh(attended, self.image_reduce))

    def forward(self, premise, hypothesis, image=None, train=False, rng=None) -> Tensor:
        premise, hypothesis, image = apply_ablation(
            self.config.grounding, premise, hypothesis, image
        )
        image = self._require_image(image)
        drop = self._drop(train, rng)
        hh = drop(encode_final(
            hypothesis, self.embedding, self.encoder,
            max_len=self.config.max_len, row_transform=drop,
        ))
        parts = [self._fuse_sentence(hh, image, with_image=True)]
        if premise is not None:
            hp = drop(encode_final(
                premise, self.embedding, self.encoder,
                max_len=self.config.max_len, row_transform=drop,
            ))
            with_image = self.config.grounding == GROUNDING_FULL_BOTH
            parts.insert(0, self._fuse_sentence(hp, image, with_image=with_image))
        x = parts[0] if len(parts) == 1 else concat(parts)
        for layer in self.stack:
            x = fus.gated_tanh(x, layer)
        return _apply_affine(x, self.output)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("embedding", self.embedding.weights)]
        out.extend(self.encoder.named_parameters("encoder"))
        out.extend(self.attention.named_parameters("attention"))
        out.extend(self.text_reduce.named_parameters("reduce.text"))
        out.extend(self.image_reduce.named_parameters("reduce.image"))
        for i, layer in enumerate(self.stack):
            out.extend(layer.named_parameters(f"stack.{i}"))
        out.extend(self.output.named_parameters("output"))
        return out


ARCHITECTURES = {
    ARCH_LSTM: LstmClassifier,
    ARCH_VLSTM: VlstmClassifier,
    ARCH_BIMPM: BimpmClassifier,
    ARCH_VBIMPM: VbimpmClassifier,
    ARCH_VQA: VqaClassifier,
}


def build_model(config: ModelConfig) -> _ModelBase:
    return ARCHITECTURES[config.architecture](config)
