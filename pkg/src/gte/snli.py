"""SNLI ingestion, caption-to-image alignment, and hard-subset filtering."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .encoders import tokenize
from .models import CLASS_ORDER

logger = logging.getLogger(__name__)

NONE_LABEL = "NONE"
VALID_LABELS = frozenset(CLASS_ORDER) | {NONE_LABEL}

_REQUIRED_FIELDS = ("gold_label", "sentence1", "sentence2", "pairID", "captionID")


class IngestError(ValueError):
    """Raised for unparseable corpus lines; message carries the line number."""


@dataclass
class SnliRecord:
    pair_id: str
    caption_id: str
    premise: list
    hypothesis: list
    gold_label: str
    annotator_labels: list = field(default_factory=list)


@dataclass
class VsnliRecord(SnliRecord):
    image_id: str = ""


def image_id_of(caption_id: str) -> str:
    """Flickr30K file name embedded in a caption id ("123.jpg#2" → "123.jpg")."""
    return caption_id.split("#", 1)[0]


def _tokens(payload: dict, text_key: str) -> list:
    pre = payload.get(f"{text_key}_tokens")
    if pre is not None:
        if not isinstance(pre, list) or not all(isinstance(t, str) for t in pre):
            raise ValueError(f"{text_key}_tokens must be a list of strings")
        return list(pre)
    return tokenize(payload[text_key])


def ingest_snli(path) -> list:
    """Parse a JSONL corpus file into records.

    Gold label "-" (annotators failed to agree) becomes NONE; such records are
    kept here so counts match the raw file, and dropped by model_facing().
    """
    records = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(payload, dict):
                raise IngestError(f"line {line_no}: expected a JSON object")
            missing = [k for k in _REQUIRED_FIELDS if k not in payload]
            if missing:
                raise IngestError(f"line {line_no}: missing fields {missing}")
            gold = payload["gold_label"]
            if gold == "-":
                gold = NONE_LABEL
            if gold not in VALID_LABELS:
                raise IngestError(f"line {line_no}: unknown gold label {gold!r}")
            pair_id = str(payload["pairID"])
            if pair_id in seen_ids:
                raise IngestError(f"line {line_no}: duplicate pair id {pair_id!r}")
            seen_ids.add(pair_id)
            try:
                premise = _tokens(payload, "sentence1")
                hypothesis = _tokens(payload, "sentence2")
            except (TypeError, ValueError) as exc:
                raise IngestError(f"line {line_no}: {exc}") from exc
            labels = payload.get("annotator_labels", [])
            if not isinstance(labels, list):
                raise IngestError(f"line {line_no}: annotator_labels must be a list")
            records.append(
                SnliRecord(
                    pair_id=pair_id,
                    caption_id=str(payload["captionID"]),
                    premise=premise,
                    hypothesis=hypothesis,
                    gold_label=gold,
                    annotator_labels=[str(x) for x in labels],
                )
            )
    return records


def write_snli_jsonl(path, records: Iterable) -> None:
    """Inverse of ingest_snli; NONE goes back to the raw "-" marker."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            payload = {
                "gold_label": "-" if record.gold_label == NONE_LABEL else record.gold_label,
                "sentence1": " ".join(record.premise),
                "sentence1_tokens": list(record.premise),
                "sentence2": " ".join(record.hypothesis),
                "sentence2_tokens": list(record.hypothesis),
                "pairID": record.pair_id,
                "captionID": record.caption_id,
                "annotator_labels": list(record.annotator_labels),
            }
            fh.write(json.dumps(payload, sort_keys=True) + "\n")


def model_facing(records: Iterable) -> list:
    """Drop records without a consensus gold label."""
    return [r for r in records if r.gold_label != NONE_LABEL]


def align_images(records: Iterable, flickr_ids) -> tuple:
    """Attach image ids resolvable in ``flickr_ids``; returns (kept, dropped).

    Premises sourced from other corpora have caption ids with no Flickr30K
    counterpart; those records are dropped rather than given a dangling id.
    """
    flickr_ids = set(flickr_ids)
    kept = []
    dropped = 0
    for record in records:
        image_id = image_id_of(record.caption_id)
        if image_id in flickr_ids:
            kept.append(
                VsnliRecord(
                    pair_id=record.pair_id,
                    caption_id=record.caption_id,
                    premise=record.premise,
                    hypothesis=record.hypothesis,
                    gold_label=record.gold_label,
                    annotator_labels=record.annotator_labels,
                    image_id=image_id,
                )
            )
        else:
            dropped += 1
    if dropped:
        logger.info("align_images dropped %d records without a known image", dropped)
    return kept, dropped


def read_id_file(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def filter_hard(records: Iterable, hard_ids) -> tuple:
    """Keep records whose pair id is listed; returns (subset, unknown_count)."""
    records = list(records)
    wanted = set(hard_ids)
    subset = [r for r in records if r.pair_id in wanted]
    unknown = len(wanted) - len({r.pair_id for r in subset})
    if unknown:
        logger.warning("filter_hard: %d listed ids not present in the records", unknown)
    return subset, unknown


def label_counts(records: Iterable) -> dict:
    counts = {label: 0 for label in CLASS_ORDER}
    other = 0
    for record in records:
        if record.gold_label in counts:
            counts[record.gold_label] += 1
        else:
            other += 1
    if other:
        counts[NONE_LABEL] = other
    return counts
