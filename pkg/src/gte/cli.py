"""Command-line surface: one ``gte`` entry point with task subcommands.

Training options can come from a JSON config file, a flat object whose keys
match the long flag names with underscores (``{"hidden_dim": 64}``); flags
given on the command line win over file values.
"""

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

from . import evaluation as ev
from .agreement import agreement_metrics
from .encoders import Vocabulary, build_vocab, DEFAULT_MAX_VOCAB
from .features import FeatureStore, synth_features
from .fusion import FEATURE_SHAPES
from .models import (
    CLASS_ORDER,
    GROUNDING_FULL,
    GROUNDING_FULL_BOTH,
    GROUNDING_H,
    GROUNDING_H_IMAGE,
    GROUNDING_NONE,
    ModelConfig,
    build_model,
)
from .snli import (
    align_images,
    filter_hard,
    image_id_of,
    ingest_snli,
    label_counts,
    model_facing,
    read_id_file,
    write_snli_jsonl,
)
from .tagging import (
    LexicalResource,
    LexiconTagger,
    RuleTagger,
    read_tag_csv,
    tag_records,
    write_tag_csv,
)
from .training import TrainingExample, load_checkpoint, save_checkpoint, train_model

# Keys a train config file may carry; every one has a same-named CLI flag.
TRAIN_CONFIG_KEYS = (
    "architecture",
    "grounding",
    "embed_dim",
    "hidden_dim",
    "perspectives",
    "dropout_keep",
    "max_len",
    "max_vocab",
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "clip_norm",
    "patience",
    "train_data",
    "dev_data",
    "feature_manifest",
    "feature_payload",
    "checkpoint",
    "log",
)

TRAIN_DEFAULTS = {
    "architecture": "lstm",
    "grounding": None,
    "embed_dim": 300,
    "hidden_dim": 512,
    "perspectives": 8,
    "dropout_keep": 0.5,
    "max_len": 82,
    "max_vocab": DEFAULT_MAX_VOCAB,
    "seed": 0,
    "epochs": 10,
    "batch_size": 64,
    "learning_rate": 0.001,
    "clip_norm": None,
    "patience": 3,
    "dev_data": None,
    "feature_manifest": None,
    "feature_payload": None,
    "log": None,
}


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def _print_table(rows) -> None:
    """Plain space-aligned columns; rows is a list of cell-string lists."""
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())


def _load_store(manifest, payload) -> Optional[FeatureStore]:
    if manifest is None and payload is None:
        return None
    if manifest is None or payload is None:
        raise ValueError("--feature-manifest and --feature-payload go together")
    return FeatureStore.read(manifest, payload)


def _examples(records, vocab: Vocabulary, store, variant) -> list:
    out = []
    for r in records:
        image = None
        if variant is not None:
            if store is None:
                raise ValueError(
                    "this model consumes image features; pass "
                    "--feature-manifest and --feature-payload"
                )
            image = store.get(getattr(r, "image_id", "") or image_id_of(r.caption_id))
        out.append(
            TrainingExample(
                vocab.encode(r.premise),
                vocab.encode(r.hypothesis),
                r.gold_label,
                image,
                pair_id=r.pair_id,
            )
        )
    return out


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------


def cmd_prepare(args) -> int:
    flickr_ids = read_id_file(args.flickr_ids)
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    splits = [
        (name, getattr(args, name))
        for name in ("train", "dev", "test")
        if getattr(args, name) is not None
    ]
    if not splits:
        raise ValueError("give at least one of --train/--dev/--test")

    header = ["split", *CLASS_ORDER, "total", "no-image", "no-gold"]
    rows = [header]
    totals = {label: 0 for label in CLASS_ORDER}
    test_records = None
    for name, path in splits:
        records = ingest_snli(path)
        kept, dropped = align_images(records, flickr_ids)
        facing = model_facing(kept)
        write_snli_jsonl(out_dir / f"vsnli_{name}.jsonl", facing)
        counts = label_counts(facing)
        for label in CLASS_ORDER:
            totals[label] += counts[label]
        rows.append(
            [
                name,
                *[str(counts[label]) for label in CLASS_ORDER],
                str(len(facing)),
                str(dropped),
                str(len(kept) - len(facing)),
            ]
        )
        if name == "test":
            test_records = facing

    rows.append(
        [
            "all",
            *[str(totals[label]) for label in CLASS_ORDER],
            str(sum(totals.values())),
            "",
            "",
        ]
    )
    _print_table(rows)

    if args.hard_ids is not None:
        if test_records is None:
            raise ValueError("--hard-ids needs --test")
        hard, unknown = filter_hard(test_records, read_id_file(args.hard_ids))
        write_snli_jsonl(out_dir / "vsnli_test_hard.jsonl", hard)
        counts = label_counts(hard)
        print()
        _print_table(
            [
                ["hard", *CLASS_ORDER, "total", "unmatched-ids"],
                [
                    "",
                    *[str(counts[label]) for label in CLASS_ORDER],
                    str(len(hard)),
                    str(unknown),
                ],
            ]
        )
    return 0


# ---------------------------------------------------------------------------
# tag
# ---------------------------------------------------------------------------


def cmd_tag(args) -> int:
    records = model_facing(ingest_snli(args.data))
    lexicon = LexicalResource.load(args.lexicon) if args.lexicon else None
    fallback = None if args.no_fallback else RuleTagger()
    if args.pos_file:
        tagger = LexiconTagger.load(args.pos_file, fallback=fallback)
    else:
        if args.no_fallback:
            raise ValueError("--no-fallback requires --pos-file")
        tagger = RuleTagger()
    tags = tag_records(records, lexicon, tagger)
    write_tag_csv(tags, args.out)
    print(f"tagged {len(tags)} pairs -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------


def cmd_features_validate(args) -> int:
    store = FeatureStore.read(args.manifest, args.payload)
    by_variant = {}
    for image_id in store.ids():
        variant = store.get(image_id).variant
        by_variant[variant] = by_variant.get(variant, 0) + 1
    print(f"{len(store)} features ok")
    for variant in sorted(by_variant):
        print(f"  {variant}: {by_variant[variant]}")
    return 0


def cmd_features_synth(args) -> int:
    ids = read_id_file(args.ids)
    store = synth_features(args.seed, ids, args.variant)
    store.write(args.manifest, args.payload)
    print(f"wrote {len(store)} {args.variant} features")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _merged_train_settings(args) -> dict:
    settings = dict(TRAIN_DEFAULTS)
    settings.update({"train_data": None, "checkpoint": None})
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                file_values = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.config}: config is not valid JSON: {exc}")
        if not isinstance(file_values, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(file_values) - set(TRAIN_CONFIG_KEYS))
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys {unknown}")
        settings.update(file_values)
    for key in TRAIN_CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["train_data"] is None:
        raise ValueError("no training data given (--train-data or config train_data)")
    if settings["checkpoint"] is None:
        raise ValueError("no checkpoint path given (--checkpoint or config checkpoint)")
    return settings


def cmd_train(args) -> int:
    s = _merged_train_settings(args)
    train_records = model_facing(ingest_snli(s["train_data"]))
    dev_records = (
        model_facing(ingest_snli(s["dev_data"])) if s["dev_data"] else None
    )

    vocab = build_vocab(
        (t for r in train_records for t in r.premise + r.hypothesis),
        max_size=int(s["max_vocab"]),
    )
    config = ModelConfig(
        architecture=s["architecture"],
        vocab_size=len(vocab),
        grounding=s["grounding"],
        embed_dim=int(s["embed_dim"]),
        hidden_dim=int(s["hidden_dim"]),
        perspectives=int(s["perspectives"]),
        dropout_keep=float(s["dropout_keep"]),
        max_len=int(s["max_len"]),
        seed=int(s["seed"]),
    )
    model = build_model(config)
    store = _load_store(s["feature_manifest"], s["feature_payload"])
    variant = config.required_variant
    train_set = _examples(train_records, vocab, store, variant)
    dev_set = _examples(dev_records, vocab, store, variant) if dev_records else None

    result = train_model(
        model,
        train_set,
        dev_set,
        epochs=int(s["epochs"]),
        batch_size=int(s["batch_size"]),
        seed=int(s["seed"]),
        learning_rate=float(s["learning_rate"]),
        clip_norm=None if s["clip_norm"] is None else float(s["clip_norm"]),
        patience=int(s["patience"]),
        log_path=s["log"],
    )
    save_checkpoint(s["checkpoint"], model, extra_metadata={"vocab": vocab.tokens()})

    last = result.history[-1]
    print(
        f"trained {config.architecture} ({config.grounding}) for "
        f"{result.epochs_run} epochs; final train accuracy {_percent(last.train_accuracy)}"
    )
    if result.best_dev_accuracy is not None:
        print(
            f"best dev accuracy {_percent(result.best_dev_accuracy)} "
            f"at epoch {result.best_epoch}"
            + (" (stopped early)" if result.stopped_early else "")
        )
    print(f"checkpoint -> {s['checkpoint']}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

# Evaluation-ablation flag -> the grounding(s) a checkpoint must hold.
_EVAL_GROUNDINGS = {
    "h": (GROUNDING_H_IMAGE,),
    "ph": (GROUNDING_FULL, GROUNDING_FULL_BOTH),
    "none": (GROUNDING_NONE,),
}


def _check_grounding(args, model) -> str:
    """The --grounding/--hypothesis-only flags declare which ablation the
    numbers describe; a checkpoint wired differently cannot produce them."""
    if args.hypothesis_only and args.grounding:
        raise ValueError("--hypothesis-only and --grounding are mutually exclusive")
    actual = model.config.grounding
    if args.hypothesis_only:
        allowed, requested = (GROUNDING_H,), "hypothesis-only"
    elif args.grounding:
        allowed, requested = _EVAL_GROUNDINGS[args.grounding], args.grounding
    else:
        return actual
    if actual not in allowed:
        raise ValueError(
            f"checkpoint was trained under grounding {actual!r}, which does not "
            f"match the requested {requested!r} evaluation"
        )
    return actual


def cmd_eval(args) -> int:
    model, metadata = load_checkpoint(args.checkpoint)
    tokens = metadata.get("extra", {}).get("vocab")
    if tokens is None:
        raise ValueError(f"{args.checkpoint}: checkpoint carries no vocabulary")
    vocab = Vocabulary(tokens)
    grounding = _check_grounding(args, model)

    records = model_facing(ingest_snli(args.data))
    store = _load_store(args.feature_manifest, args.feature_payload)
    variant = model.config.required_variant
    examples = _examples(records, vocab, store, variant)

    foil_map = None
    if args.foil:
        if variant is None:
            raise ValueError("--foil is meaningless for a text-only model")
        # Similarity may come from a separate store (global vectors) even
        # when the model itself consumes another variant.
        similarity_store = (
            _load_store(args.foil_manifest, args.foil_payload)
            if args.foil_manifest or args.foil_payload
            else store
        )
        image_ids = sorted({e.image.image_id for e in examples})
        foil_map = ev.build_foil_map(
            similarity_store, image_ids, variant=args.foil_variant
        )

    per_tag = None
    predictions = ev.predict_dataset(model, examples, store, foil_map)
    if args.tags:
        per_tag = ev.tag_breakdown(predictions, read_tag_csv(args.tags))
    report = ev.assemble_report(
        model,
        predictions,
        dataset_id=str(args.data),
        foil_map=foil_map,
        per_tag=per_tag,
        extra_metadata={"grounding_evaluated": grounding},
    )

    if args.report:
        ev.write_report_json(args.report, report)
    if args.predictions:
        ev.write_predictions_csv(args.predictions, predictions)
    markdown = ev.render_markdown(report)
    if args.markdown:
        with open(args.markdown, "w", encoding="utf-8") as fh:
            fh.write(markdown)
    print(markdown)
    return 0


# ---------------------------------------------------------------------------
# agreement
# ---------------------------------------------------------------------------


def cmd_agreement(args) -> int:
    with open(args.table, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{args.table}: empty label table")
        table = [[cell.strip() or None for cell in row] for row in reader]
    report = agreement_metrics(table)
    print(f"items: {report.items}  annotators: {report.annotators} ({', '.join(header)})")
    for name, value in (
        ("cohen_kappa", report.cohen_kappa),
        ("scott_pi", report.scott_pi),
        ("krippendorff_alpha", report.krippendorff_alpha),
    ):
        shown = "n/a" if value is None else f"{value:.6f}"
        print(f"{name}: {shown}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _run_label(report, path) -> str:
    meta = report.metadata
    arch = meta.get("model", {}).get("architecture")
    label = meta.get("run_id") or arch or path.stem
    if meta.get("foil"):
        label += " (foil)"
    return label


def cmd_report(args) -> int:
    loaded = [(path, ev.read_report_json(path)) for path in args.inputs]
    labels = [_run_label(report, path) for path, report in loaded]
    lines = ["# Collated evaluation runs", ""]

    lines += ["## Accuracy (%)", "", "| Class | " + " | ".join(labels) + " |"]
    lines.append("| --- | " + " | ".join("---" for _ in labels) + " |")
    for label in CLASS_ORDER:
        cells = [_percent(report.per_class[label]) for _, report in loaded]
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    lines.append(
        "| overall | "
        + " | ".join(_percent(report.overall) for _, report in loaded)
        + " |"
    )
    lines.append("")

    tags = sorted({t for _, r in loaded if r.per_tag for t in r.per_tag})
    if tags:
        lines += ["## Accuracy by tag (%)", "", "| Tag | " + " | ".join(labels) + " |"]
        lines.append("| --- | " + " | ".join("---" for _ in labels) + " |")
        for tag in tags:
            cells = []
            for _, report in loaded:
                entry = (report.per_tag or {}).get(tag)
                cells.append("n/a" if entry is None else _percent(entry.accuracy))
            lines.append(f"| {tag} | " + " | ".join(cells) + " |")
        lines.append("")

    for label, (_, report) in zip(labels, loaded):
        flagged = {(c.gold, c.predicted) for c in report.implausible}
        lines += [f"## Confusion: {label}", ""]
        lines.append("| gold \\ predicted | " + " | ".join(CLASS_ORDER) + " |")
        lines.append("| --- | " + " | ".join("---" for _ in CLASS_ORDER) + " |")
        for g, gold in enumerate(CLASS_ORDER):
            cells = []
            for p, pred in enumerate(CLASS_ORDER):
                mark = " (*)" if (gold, pred) in flagged else ""
                cells.append(f"{int(report.confusion[g, p])}{mark}")
            lines.append(f"| {gold} | " + " | ".join(cells) + " |")
        lines.append("")

    text = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gte",
        description="Grounded textual entailment: data preparation, training, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="align SNLI splits with Flickr30K images")
    p.add_argument("--train", type=Path)
    p.add_argument("--dev", type=Path)
    p.add_argument("--test", type=Path)
    p.add_argument("--flickr-ids", type=Path, required=True)
    p.add_argument("--hard-ids", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(handler=cmd_prepare)

    p = sub.add_parser("tag", help="annotate pairs with linguistic tags")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--pos-file", type=Path)
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_tag)

    p = sub.add_parser("features", help="validate or synthesize image features")
    fsub = p.add_subparsers(dest="features_command", required=True)
    v = fsub.add_parser("validate", help="integrity-check a feature store")
    v.add_argument("--manifest", type=Path, required=True)
    v.add_argument("--payload", type=Path, required=True)
    v.set_defaults(handler=cmd_features_validate)
    s = fsub.add_parser("synth", help="write deterministic synthetic features")
    s.add_argument("--ids", type=Path, required=True)
    s.add_argument("--variant", choices=sorted(FEATURE_SHAPES), required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--manifest", type=Path, required=True)
    s.add_argument("--payload", type=Path, required=True)
    s.set_defaults(handler=cmd_features_synth)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--config", type=Path, help="JSON file with the keys listed in the docs")
    p.add_argument("--train-data", dest="train_data", type=Path)
    p.add_argument("--dev-data", dest="dev_data", type=Path)
    p.add_argument("--architecture")
    p.add_argument("--grounding")
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--perspectives", type=int)
    p.add_argument("--dropout-keep", dest="dropout_keep", type=float)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--max-vocab", dest="max_vocab", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--feature-manifest", dest="feature_manifest", type=Path)
    p.add_argument("--feature-payload", dest="feature_payload", type=Path)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--log", type=Path)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--feature-manifest", dest="feature_manifest", type=Path)
    p.add_argument("--feature-payload", dest="feature_payload", type=Path)
    p.add_argument("--foil", action="store_true", help="substitute most-dissimilar images")
    p.add_argument("--foil-variant", dest="foil_variant", default="global_4096")
    p.add_argument("--foil-manifest", dest="foil_manifest", type=Path)
    p.add_argument("--foil-payload", dest="foil_payload", type=Path)
    p.add_argument("--grounding", choices=sorted(_EVAL_GROUNDINGS))
    p.add_argument("--hypothesis-only", dest="hypothesis_only", action="store_true")
    p.add_argument("--tags", type=Path, help="tag CSV for a per-tag breakdown")
    p.add_argument("--report", type=Path, help="write the JSON report here")
    p.add_argument("--markdown", type=Path, help="write the markdown report here")
    p.add_argument("--predictions", type=Path, help="write a pair_id,gold,predicted CSV")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("agreement", help="inter-annotator statistics from a label table")
    p.add_argument("--table", type=Path, required=True, help="CSV: header row, one row per item")
    p.add_argument("--json", type=Path)
    p.set_defaults(handler=cmd_agreement)

    p = sub.add_parser("report", help="collate evaluation runs into markdown tables")
    p.add_argument("--inputs", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_report)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
