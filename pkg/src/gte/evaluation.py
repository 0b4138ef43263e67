"""Accuracy reports, confusion matrices, foil substitution, and tag breakdowns.

The confusion matrix is indexed [gold][predicted] under the fixed class
order.  Under hypothesis-plus-image evaluation the two cross cells between
entailment and contradiction are flagged: a model that confuses those classes
while seeing the image is not using the image.
"""

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from . import fusion as fus
from .agreement import DegenerateInputError, chi_square_2x2
from .models import CLASS_ORDER, GROUNDING_H_IMAGE
from .tagging import AUTO_TAGS

_CLASS_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}

# (gold, predicted) cells that should not occur when grounding works.
IMPLAUSIBLE_CELLS = (
    ("contradiction", "entailment"),
    ("entailment", "contradiction"),
)


class EvaluationError(RuntimeError):
    """Raised for unusable evaluation inputs or inconsistent reports."""


@dataclass(frozen=True)
class PredictionRecord:
    """One evaluated pair: ids and labels only, no probabilities."""

    pair_id: str
    gold: str
    predicted: str

    def __post_init__(self):
        for role, label in (("gold", self.gold), ("predicted", self.predicted)):
            if label not in _CLASS_INDEX:
                raise EvaluationError(
                    f"pair {self.pair_id!r}: unknown {role} label {label!r}"
                )


@dataclass(frozen=True)
class ImplausibleCell:
    gold: str
    predicted: str
    count: int

    def to_dict(self) -> dict:
        return {"gold": self.gold, "predicted": self.predicted, "count": self.count}


def confusion_counts(golds: Sequence[str], predicted: Sequence[str]) -> np.ndarray:
    """3x3 integer counts indexed [gold][predicted]."""
    if len(golds) != len(predicted):
        raise EvaluationError(
            f"{len(golds)} gold labels but {len(predicted)} predictions"
        )
    counts = np.zeros((len(CLASS_ORDER), len(CLASS_ORDER)), dtype=np.int64)
    for position, (gold, pred) in enumerate(zip(golds, predicted)):
        if gold not in _CLASS_INDEX:
            raise EvaluationError(f"item {position}: unknown gold label {gold!r}")
        if pred not in _CLASS_INDEX:
            raise EvaluationError(f"item {position}: unknown predicted label {pred!r}")
        counts[_CLASS_INDEX[gold], _CLASS_INDEX[pred]] += 1
    return counts


def implausible_cells(counts: np.ndarray) -> tuple:
    """The two entailment/contradiction cross cells, with their counts."""
    return tuple(
        ImplausibleCell(gold, pred, int(counts[_CLASS_INDEX[gold], _CLASS_INDEX[pred]]))
        for gold, pred in IMPLAUSIBLE_CELLS
    )


@dataclass(frozen=True)
class TagAccuracy:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def to_dict(self) -> dict:
        return {"correct": self.correct, "total": self.total, "accuracy": self.accuracy}


@dataclass
class EvaluationReport:
    """Confusion counts plus the accuracies derivable from them.

    Stored accuracies must equal the values recomputed from the matrix;
    construction through from_counts guarantees it and __post_init__ checks it,
    so a report deserialized from disk cannot silently disagree with itself.
    """

    confusion: np.ndarray
    per_class: Dict[str, Optional[float]]
    overall: float
    implausible: tuple = ()
    per_tag: Optional[Dict[str, TagAccuracy]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        expected_shape = (len(CLASS_ORDER), len(CLASS_ORDER))
        if self.confusion.shape != expected_shape:
            raise EvaluationError(f"confusion matrix must be {expected_shape}")
        if (self.confusion < 0).any():
            raise EvaluationError("confusion counts must be non-negative")
        if int(self.confusion.sum()) == 0:
            raise EvaluationError("cannot report on an empty dataset")
        if set(self.per_class) != set(CLASS_ORDER):
            raise EvaluationError("per-class map must cover exactly the three classes")
        for label, stored in self.per_class.items():
            if stored != _row_accuracy(self.confusion, label):
                raise EvaluationError(f"per-class accuracy for {label!r} is inconsistent")
        if self.overall != _overall_accuracy(self.confusion):
            raise EvaluationError("overall accuracy is inconsistent with the matrix")
        for cell in self.implausible:
            if (cell.gold, cell.predicted) not in IMPLAUSIBLE_CELLS:
                raise EvaluationError(
                    f"cell ({cell.gold!r} -> {cell.predicted!r}) cannot be implausible"
                )
            row, col = _CLASS_INDEX[cell.gold], _CLASS_INDEX[cell.predicted]
            if cell.count != int(self.confusion[row, col]):
                raise EvaluationError("implausible-cell count disagrees with the matrix")

    @classmethod
    def from_counts(
        cls,
        counts: np.ndarray,
        *,
        flag_implausible: bool = False,
        per_tag: Optional[Dict[str, TagAccuracy]] = None,
        metadata: Optional[dict] = None,
    ) -> "EvaluationReport":
        counts = np.asarray(counts, dtype=np.int64)
        if int(counts.sum()) == 0:
            raise EvaluationError("cannot report on an empty dataset")
        return cls(
            confusion=counts,
            per_class={label: _row_accuracy(counts, label) for label in CLASS_ORDER},
            overall=_overall_accuracy(counts),
            implausible=implausible_cells(counts) if flag_implausible else (),
            per_tag=per_tag,
            metadata=dict(metadata or {}),
        )

    @classmethod
    def from_records(
        cls,
        records: Sequence[PredictionRecord],
        *,
        flag_implausible: bool = False,
        per_tag: Optional[Dict[str, TagAccuracy]] = None,
        metadata: Optional[dict] = None,
    ) -> "EvaluationReport":
        if not records:
            raise EvaluationError("cannot report on an empty dataset")
        counts = confusion_counts(
            [r.gold for r in records], [r.predicted for r in records]
        )
        return cls.from_counts(
            counts,
            flag_implausible=flag_implausible,
            per_tag=per_tag,
            metadata=metadata,
        )

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall,
            "per_class_accuracy": dict(self.per_class),
            "confusion": self.confusion.tolist(),
            "implausible_errors": [cell.to_dict() for cell in self.implausible],
            "per_tag": (
                None
                if self.per_tag is None
                else {tag: acc.to_dict() for tag, acc in self.per_tag.items()}
            ),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvaluationReport":
        try:
            counts = np.asarray(payload["confusion"], dtype=np.int64)
            flagged = bool(payload["implausible_errors"])
            raw_tags = payload["per_tag"]
            metadata = payload["metadata"]
        except (KeyError, TypeError, ValueError) as exc:
            raise EvaluationError(f"malformed report payload: {exc}") from exc
        per_tag = None
        if raw_tags is not None:
            per_tag = {
                tag: TagAccuracy(int(entry["correct"]), int(entry["total"]))
                for tag, entry in raw_tags.items()
            }
        report = cls.from_counts(
            counts, flag_implausible=flagged, per_tag=per_tag, metadata=metadata
        )
        if report.to_dict()["per_class_accuracy"] != payload.get("per_class_accuracy"):
            raise EvaluationError("stored per-class accuracies disagree with the matrix")
        if report.overall != payload.get("overall_accuracy"):
            raise EvaluationError("stored overall accuracy disagrees with the matrix")
        return report

    def to_markdown(self) -> str:
        return render_markdown(self)


def _row_accuracy(counts: np.ndarray, label: str) -> Optional[float]:
    row = counts[_CLASS_INDEX[label]]
    total = int(row.sum())
    if total == 0:
        return None
    return int(row[_CLASS_INDEX[label]]) / total


def _overall_accuracy(counts: np.ndarray) -> float:
    return int(np.trace(counts)) / int(counts.sum())


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def render_markdown(report: EvaluationReport) -> str:
    """Human-readable report; percentages carry two decimals."""
    lines = ["# Evaluation report", ""]
    meta = report.metadata
    if meta:
        for key in sorted(meta):
            value = meta[key]
            if isinstance(value, dict):
                value = json.dumps(value, sort_keys=True)
            lines.append(f"- {key}: {value}")
        lines.append("")
    lines += ["## Accuracy (%)", "", "| Class | Accuracy |", "| --- | --- |"]
    for label in CLASS_ORDER:
        lines.append(f"| {label} | {_percent(report.per_class[label])} |")
    lines.append(f"| overall | {_percent(report.overall)} |")
    lines.append("")

    flagged = {(c.gold, c.predicted) for c in report.implausible}
    header = " | ".join(CLASS_ORDER)
    lines += [
        "## Confusion matrix (rows gold, columns predicted)",
        "",
        f"| gold \\ predicted | {header} |",
        "| --- | " + " | ".join("---" for _ in CLASS_ORDER) + " |",
    ]
    for gold in CLASS_ORDER:
        cells = []
        for pred in CLASS_ORDER:
            count = int(report.confusion[_CLASS_INDEX[gold], _CLASS_INDEX[pred]])
            mark = " (*)" if (gold, pred) in flagged else ""
            cells.append(f"{count}{mark}")
        lines.append(f"| {gold} | " + " | ".join(cells) + " |")
    if flagged:
        lines.append("")
        lines.append("(*) implausible error under hypothesis-plus-image evaluation")
    lines.append("")

    if report.per_tag is not None:
        lines += ["## Accuracy by tag (%)", "", "| Tag | Accuracy | N |", "| --- | --- | --- |"]
        for tag in sorted(report.per_tag):
            acc = report.per_tag[tag]
            lines.append(f"| {tag} | {_percent(acc.accuracy)} | {acc.total} |")
        lines.append("")
    return "\n".join(lines)


def write_report_json(path, report: EvaluationReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report_json(path) -> EvaluationReport:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"{path}: not a JSON report: {exc}") from exc
    return EvaluationReport.from_dict(payload)


PREDICTION_HEADER = ("pair_id", "gold", "predicted")


def write_predictions_csv(path, records: Iterable[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for record in records:
            writer.writerow([record.pair_id, record.gold, record.predicted])


def read_predictions_csv(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(PREDICTION_HEADER):
            raise EvaluationError(f"{path}: expected header {','.join(PREDICTION_HEADER)}")
        for row_number, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise EvaluationError(f"{path}:{row_number}: expected 3 columns")
            try:
                records.append(PredictionRecord(*row))
            except EvaluationError as exc:
                raise EvaluationError(f"{path}:{row_number}: {exc}") from exc
    return records


@dataclass(frozen=True)
class FoilMap:
    """Total map test image id -> substitute image id.

    build_foil_map guarantees foil(i) != i; identity_foil_map deliberately
    violates that for plumbing tests, so the map itself does not enforce it.
    """

    mapping: dict

    def foil_of(self, image_id: str) -> str:
        try:
            return self.mapping[image_id]
        except KeyError:
            raise KeyError(f"no foil assigned for image {image_id!r}") from None

    def __len__(self) -> int:
        return len(self.mapping)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for image_id in sorted(self.mapping):
            digest.update(f"{image_id}\t{self.mapping[image_id]}\n".encode("utf-8"))
        return digest.hexdigest()

    def to_dict(self) -> dict:
        return dict(self.mapping)


def identity_foil_map(image_ids: Iterable[str]) -> FoilMap:
    """Maps every image to itself; a no-op substitution used to test plumbing."""
    return FoilMap({image_id: image_id for image_id in image_ids})


def build_foil_map(
    feature_store,
    image_ids: Optional[Iterable[str]] = None,
    variant: str = fus.GLOBAL_4096,
) -> FoilMap:
    """Pair every image with its least cosine-similar peer.

    Similarity is computed on the flattened feature vectors of one variant
    (the shared global vector by default).  Ties go to the lexicographically
    smallest image id.
    """
    ids = sorted(set(feature_store.ids() if image_ids is None else image_ids))
    if len(ids) < 2:
        raise EvaluationError("foil map needs at least 2 distinct images")
    rows = []
    for image_id in ids:
        feature = feature_store.get(image_id)
        if feature.variant != variant:
            raise EvaluationError(
                f"image {image_id!r} holds {feature.variant!r} features, "
                f"foil similarity needs {variant!r}"
            )
        vector = feature.data.reshape(-1)
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise EvaluationError(f"image {image_id!r} has a zero feature vector")
        rows.append(vector / norm)
    matrix = np.stack(rows)
    similarity = matrix @ matrix.T
    np.fill_diagonal(similarity, np.inf)
    # argmin returns the first minimum; ids are sorted, so ties already land
    # on the lexicographically smallest candidate.
    choices = np.argmin(similarity, axis=1)
    return FoilMap({ids[i]: ids[int(j)] for i, j in enumerate(choices)})


def _resolve_image(example, feature_store, foil_map):
    image = example.image
    if foil_map is None:
        return image
    if image is None:
        return None
    if feature_store is None:
        raise EvaluationError("foil substitution requires a feature store")
    return feature_store.get(foil_map.foil_of(image.image_id))


def predict_dataset(
    model, dataset, feature_store=None, foil_map: Optional[FoilMap] = None
) -> list:
    """Dropout-free predictions for every example, in dataset order."""
    examples = list(dataset)
    if not examples:
        raise EvaluationError("cannot evaluate an empty dataset")
    needs_image = model.config.required_variant is not None
    records = []
    for example in examples:
        if example.label not in _CLASS_INDEX:
            raise EvaluationError(
                f"pair {example.pair_id!r}: unknown gold label {example.label!r}"
            )
        image = _resolve_image(example, feature_store, foil_map)
        if needs_image and image is None:
            raise EvaluationError(
                f"pair {example.pair_id!r}: model grounding "
                f"{model.config.grounding!r} requires an image feature"
            )
        prediction = model.predict(example.premise, example.hypothesis, image)
        records.append(PredictionRecord(example.pair_id, example.label, prediction.label))
    return records


def assemble_report(
    model,
    records: Sequence[PredictionRecord],
    *,
    dataset_id: str = "",
    foil_map: Optional[FoilMap] = None,
    per_tag: Optional[Dict[str, TagAccuracy]] = None,
    extra_metadata: Optional[dict] = None,
) -> EvaluationReport:
    """Report over already-computed predictions, with standard metadata."""
    metadata = {
        "model": model.config.to_dict(),
        "dataset_id": dataset_id,
        "foil": foil_map is not None,
    }
    if foil_map is not None:
        metadata["foil_map_checksum"] = foil_map.checksum()
    metadata.update(extra_metadata or {})
    return EvaluationReport.from_records(
        records,
        flag_implausible=model.config.grounding == GROUNDING_H_IMAGE,
        per_tag=per_tag,
        metadata=metadata,
    )


def evaluate(
    model,
    dataset,
    feature_store=None,
    foil_map: Optional[FoilMap] = None,
    *,
    dataset_id: str = "",
    per_tag: Optional[Dict[str, TagAccuracy]] = None,
) -> EvaluationReport:
    """Full pass over a dataset, assembled into a consistency-checked report."""
    records = predict_dataset(model, dataset, feature_store, foil_map)
    return assemble_report(
        model, records, dataset_id=dataset_id, foil_map=foil_map, per_tag=per_tag
    )


def _bears(tag_set, tag: str) -> bool:
    return bool(tag_set.flags.get(tag, False)) or tag in tag_set.manual


def _tag_universe(tags_by_pair: dict) -> list:
    manual = set()
    for tag_set in tags_by_pair.values():
        manual |= tag_set.manual
    return list(AUTO_TAGS) + sorted(manual)


def tag_breakdown(records: Sequence[PredictionRecord], tags_by_pair: dict) -> dict:
    """Accuracy restricted to pairs bearing each tag; untagged pairs count
    toward no entry, and a tag borne by nothing is absent, not zero."""
    out = {}
    for tag in _tag_universe(tags_by_pair):
        correct = total = 0
        for record in records:
            tag_set = tags_by_pair.get(record.pair_id)
            if tag_set is None or not _bears(tag_set, tag):
                continue
            total += 1
            correct += int(record.gold == record.predicted)
        if total:
            out[tag] = TagAccuracy(correct, total)
    return out


@dataclass(frozen=True)
class TagComparison:
    tag: str
    first: TagAccuracy
    second: TagAccuracy
    statistic: Optional[float]
    significant: bool

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "first": self.first.to_dict(),
            "second": self.second.to_dict(),
            "statistic": self.statistic,
            "significant": self.significant,
        }


def compare_tag_accuracies(
    records_a: Sequence[PredictionRecord],
    records_b: Sequence[PredictionRecord],
    tags_by_pair: dict,
) -> dict:
    """Per-tag accuracy of two prediction sets over the same pairs, with a
    correct/incorrect chi-square flag per tag.

    A degenerate contingency table (for example both models perfect on the
    tag) has no defined statistic; the comparison is kept with statistic None.
    """
    if {r.pair_id for r in records_a} != {r.pair_id for r in records_b}:
        raise EvaluationError("the two prediction sets cover different pairs")
    breakdown_a = tag_breakdown(records_a, tags_by_pair)
    breakdown_b = tag_breakdown(records_b, tags_by_pair)
    out = {}
    for tag in breakdown_a:
        a, b = breakdown_a[tag], breakdown_b[tag]
        table = [[a.correct, a.total - a.correct], [b.correct, b.total - b.correct]]
        try:
            statistic, significant = chi_square_2x2(table)
        except (DegenerateInputError, ValueError):
            statistic, significant = None, False
        out[tag] = TagComparison(tag, a, b, statistic, significant)
    return out
