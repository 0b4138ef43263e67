"""Image feature storage: JSON manifest + raw float32 payload, plus a
deterministic synthetic generator for fixtures."""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from .fusion import FEATURE_SHAPES, GLOBAL_4096, REGIONS_36X2048, ImageFeature

MANIFEST_VERSION = 1
_DTYPE = np.dtype("<f4")


class FeatureStoreError(RuntimeError):
    """Raised when manifest and payload disagree or entries are malformed."""


class FeatureStore:
    """Random-access map from image id to one validated feature tensor.

    Values are held as float64 but quantized through float32 on the way in,
    so write → read → write reproduces the payload byte for byte.
    """

    def __init__(self, features: Iterable = ()):  # noqa: B008 - tuple default
        self._entries = {}
        for feature in features:
            self.add(feature)

    def add(self, feature: ImageFeature) -> None:
        if feature.image_id in self._entries:
            raise FeatureStoreError(f"duplicate image id {feature.image_id!r}")
        quantized = feature.data.astype(_DTYPE).astype(np.float64)
        self._entries[feature.image_id] = ImageFeature(
            feature.image_id, feature.variant, quantized
        )

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._entries

    def ids(self) -> list:
        return sorted(self._entries)

    def get(self, image_id: str) -> ImageFeature:
        try:
            return self._entries[image_id]
        except KeyError:
            raise KeyError(f"no features stored for image {image_id!r}") from None

    def write(self, manifest_path, payload_path) -> None:
        entries = {}
        offset = 0
        with open(payload_path, "wb") as payload:
            for image_id in self.ids():
                feature = self._entries[image_id]
                raw = np.ascontiguousarray(feature.data, dtype=_DTYPE).tobytes()
                entries[image_id] = {
                    "variant": feature.variant,
                    "shape": list(feature.data.shape),
                    "offset": offset,
                }
                payload.write(raw)
                offset += len(raw)
        manifest = {"version": MANIFEST_VERSION, "entries": entries}
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, manifest_path, payload_path) -> "FeatureStore":
        try:
            with open(manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FeatureStoreError(f"manifest is not valid JSON: {exc}") from exc
        if manifest.get("version") != MANIFEST_VERSION:
            raise FeatureStoreError(f"unsupported manifest version {manifest.get('version')!r}")
        entries = manifest.get("entries")
        if not isinstance(entries, dict):
            raise FeatureStoreError("manifest has no entries map")
        with open(payload_path, "rb") as fh:
            payload = fh.read()

        spans = []
        for image_id, entry in entries.items():
            try:
                variant = entry["variant"]
                shape = tuple(int(x) for x in entry["shape"])
                offset = int(entry["offset"])
            except (KeyError, TypeError, ValueError) as exc:
                raise FeatureStoreError(f"malformed manifest entry for {image_id!r}") from exc
            expected = FEATURE_SHAPES.get(variant)
            if expected is None:
                raise FeatureStoreError(f"{image_id!r}: unknown variant {variant!r}")
            if shape != expected:
                raise FeatureStoreError(
                    f"{image_id!r}: shape {list(shape)} does not match variant "
                    f"{variant} {list(expected)}"
                )
            extent = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
            if offset < 0 or offset + extent > len(payload):
                raise FeatureStoreError(
                    f"{image_id!r}: extent [{offset}, {offset + extent}) is outside "
                    f"the {len(payload)}-byte payload"
                )
            spans.append((offset, offset + extent, image_id))

        spans.sort()
        for (_, prev_end, prev_id), (start, _, image_id) in zip(spans, spans[1:]):
            if start < prev_end:
                raise FeatureStoreError(
                    f"manifest offsets overlap: {prev_id!r} and {image_id!r}"
                )
        covered = spans[-1][1] if spans else 0
        if covered != len(payload):
            raise FeatureStoreError(
                f"payload holds {len(payload)} bytes but the manifest describes {covered}"
            )

        store = cls()
        for image_id, entry in entries.items():
            shape = tuple(int(x) for x in entry["shape"])
            offset = int(entry["offset"])
            count = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(
                payload, dtype=_DTYPE, count=count, offset=offset
            ).reshape(shape)
            store.add(ImageFeature(image_id, entry["variant"], data.astype(np.float64)))
        return store


def synth_features(seed: int, ids: Iterable, variant: str) -> FeatureStore:
    """Deterministic per-id pseudo-random features satisfying the variant's
    shape and normalization rules; the id itself seeds the draw, so a store is
    reproducible regardless of id order."""
    if variant not in FEATURE_SHAPES:
        raise ValueError(f"unknown variant {variant!r}")
    shape = FEATURE_SHAPES[variant]
    store = FeatureStore()
    for image_id in ids:
        rng = np.random.default_rng([seed, *image_id.encode("utf-8")])
        data = rng.standard_normal(shape)
        if variant == GLOBAL_4096:
            data = data / np.linalg.norm(data)
        elif variant == REGIONS_36X2048:
            data = data / np.linalg.norm(data, axis=1, keepdims=True)
        store.add(ImageFeature(image_id, variant, data))
    return store
