"""Shared test fixtures: synthetic labeled corpora and image features."""

import numpy as np

from gte.fusion import FEATURE_SHAPES, GLOBAL_4096, REGIONS_36X2048, ImageFeature
from gte.models import CLASS_ORDER
from gte.training import TrainingExample

# Reserved low ids stay clear of PAD/UNK; one signature token per class makes
# the corpora separable so overfitting tests converge quickly.
CLASS_TOKENS = {label: i + 5 for i, label in enumerate(CLASS_ORDER)}


def synthetic_image(variant, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(FEATURE_SHAPES[variant])
    if variant == GLOBAL_4096:
        data = data / np.linalg.norm(data)
    elif variant == REGIONS_36X2048:
        data = data / np.linalg.norm(data, axis=1, keepdims=True)
    return ImageFeature(f"synth-{seed}", variant, data)


def synthetic_pairs(n=64, vocab_size=50, variant=None, seed=0, length=5):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = CLASS_ORDER[i % len(CLASS_ORDER)]
        premise = [int(x) for x in rng.integers(2, vocab_size, size=length)]
        hypothesis = [int(x) for x in rng.integers(2, vocab_size, size=length)]
        hypothesis[-1] = CLASS_TOKENS[label]
        image = synthetic_image(variant, seed * 100003 + i) if variant else None
        out.append(
            TrainingExample(premise, hypothesis, label, image, pair_id=f"pair-{i}")
        )
    return out
