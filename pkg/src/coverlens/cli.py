"""Command-line entry point.

Subcommands: extract, label, train, eval, baseline, synth, plotdata.
Exit status is 0 on success, 1 on runtime/validation failures and 2 on
usage errors.  Any long flag can also be given in a TOML file passed with
``--config`` (top-level keys, or keys under a table named after the
subcommand); flags on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from coverlens import __version__
from coverlens.dataset import (
    SYNTH_SEGMENT,
    attach_labels,
    build_dataset,
    default_workers,
    generate_synthetic,
    read_dataset_jsonl,
    read_labels_csv,
    read_manifest,
    split,
    write_dataset_jsonl,
    write_labels_csv,
)
from coverlens.dsp_core import FrameConfig
from coverlens.errors import CoverlensError, DatasetError
from coverlens.features import PITCH_CLASSES, FeatureExtractor, FeatureKind
from coverlens.regression import TrainConfig, evaluate, fit, load_model, save_model
from coverlens.segmentation import SegmentConfig
from coverlens.sentiment import labels_by_pair, load_lexicon, read_comments, score_comments
from coverlens.serialize import (
    read_features,
    write_features_binary,
    write_features_jsonl,
    write_json,
    write_stamp,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KIND_CHOICES = [k.value for k in FeatureKind]


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


# --- argument parsing --------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="TOML file with default values for any flag")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", help="directory for outputs and the reproducibility stamp")


def _add_segment(p, seconds=30.0):
    p.add_argument("--segment-seconds", type=float, default=seconds,
                   help="segment length (default 30, or 1 for synthetic corpora)" if seconds is None else None)
    p.add_argument("--sample-rate", type=int, default=22050)
    p.add_argument("--frame-length", type=int, default=2048)
    p.add_argument("--hop-length", type=int, default=512)


def _add_train(p):
    d = TrainConfig()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--tolerance", type=float, default=d.tolerance)
    p.add_argument("--l2-alpha", type=float, default=d.l2_alpha)
    p.add_argument("--max-epochs", type=int, default=d.max_epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--patience", type=int, default=d.patience)
    p.add_argument("--val-fraction", type=float, default=0.2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coverlens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"coverlens {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="manifest -> per-segment feature file")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=KIND_CHOICES, default="mfcc")
    p.add_argument("--out", help="feature file (default: OUT_DIR/features.jsonl or .clfv)")
    p.add_argument("--format", choices=["jsonl", "binary"], default="jsonl")
    p.add_argument("--labels-out", help="also write the manifest's per-pair labels as CSV")
    p.add_argument("--workers", type=int, default=default_workers())
    _add_segment(p)

    p = sub.add_parser("label", help="comments CSV -> per-pair labels CSV")
    _add_common(p)
    p.add_argument("--comments", required=True)
    p.add_argument("--out", help="labels CSV (default: OUT_DIR/labels.csv)")
    p.add_argument("--scores-out", help="optional per-comment scores CSV")
    p.add_argument("--lexicon", help="token<TAB>valence file (default: $COVERLENS_LEXICON or bundled)")

    p = sub.add_parser("train", help="features + labels -> model JSON and history CSV")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset JSONL, or a feature file together with --labels")
    p.add_argument("--labels", help="pair_id,label CSV for a feature file")
    p.add_argument("--warm-start", metavar="MODEL", help="continue training from this model")
    _add_train(p)

    p = sub.add_parser("eval", help="model + features -> metrics JSON")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels")
    p.add_argument("--out", help="metrics JSON (default: OUT_DIR/metrics.json)")

    p = sub.add_parser("baseline", help="train and evaluate the absolute-difference baseline")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--synth-pairs", type=int)
    p.add_argument("--noise", type=float, default=2.0, help="label noise sigma for --synth-pairs")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--save-model", action="store_true")
    _add_segment(p, seconds=None)
    _add_train(p)

    p = sub.add_parser("synth", help="write a synthetic dataset and its planted weights")
    _add_common(p)
    p.add_argument("--pairs", type=int, default=40)
    p.add_argument("--kind", choices=KIND_CHOICES, default="mfcc")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--label-kind", choices=KIND_CHOICES[:4])

    p = sub.add_parser("plotdata", help="history or features -> plotting CSV")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--history", help="history CSV or model JSON")
    src.add_argument("--features", help="feature file")
    p.add_argument("--max-segments", type=int, default=4, help="segments per pair to export")
    p.add_argument("--out", required=True)
    return parser


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad config {path}: {exc}") from None


def parse_args(parser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    raw = _load_toml(args.config)
    values = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    values.update(raw.get(args.command, {}))
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    defaults = {}
    for key, val in values.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise UsageError(f"unknown key {key!r} in {args.config}")
        defaults[dest] = val
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# --- helpers ------------------------------------------------------------------

def _seg_cfg(args, default_seconds=30.0) -> SegmentConfig:
    seconds = default_seconds if args.segment_seconds is None else args.segment_seconds
    return SegmentConfig(seconds, args.sample_rate)


def _frame_cfg(args) -> FrameConfig:
    return FrameConfig(args.frame_length, args.hop_length)


def _train_cfg(args, warm=False) -> TrainConfig:
    return TrainConfig(args.learning_rate, args.tolerance, args.l2_alpha, args.max_epochs,
                       args.batch_size, args.patience, warm, args.seed)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_config(args) -> dict:
    skip = {"config", "out_dir", "verbose", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def load_examples(data_path, labels_path=None):
    """Examples from a dataset JSONL, or from a feature file joined with a labels CSV."""
    path = Path(data_path)
    if not path.is_file():
        raise DatasetError(f"no such data file: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head != b"CLFV":
        first = ""
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    first = line
                    break
        try:
            is_dataset = first and "y" in json.loads(first)
        except json.JSONDecodeError:
            raise DatasetError(f"{path}: not a JSON-lines file") from None
        if is_dataset:
            return read_dataset_jsonl(path)
    if not labels_path:
        raise DatasetError(f"{path} holds features without labels; pass --labels")
    return attach_labels(read_features(path), read_labels_csv(labels_path))


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for i, (t, v) in enumerate(zip(history.train_mse, history.val_mse), start=1):
            writer.writerow([i, _fmt(t), _fmt(v)])


def _read_history(path):
    path = Path(path)
    if path.suffix == ".json":
        hist = load_model(path).history
        if hist is None:
            raise DatasetError(f"{path}: model has no training history")
        return list(zip(hist.train_mse, hist.val_mse))
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"train_mse", "val_mse"} <= set(reader.fieldnames):
            raise DatasetError(f"{path}: expected columns epoch,train_mse,val_mse")
        for row in reader:
            rows.append((float(row["train_mse"]), float(row["val_mse"])))
    return rows


def _bin_labels(kind: FeatureKind, n: int) -> list[str]:
    if kind is FeatureKind.MFCC:
        return [f"mfcc{i}" for i in range(n)]
    if kind is FeatureKind.CHROMA:
        return list(PITCH_CLASSES)
    if kind is FeatureKind.SPECTRAL_CONTRAST:
        return [f"band{i}" for i in range(n)]
    if kind is FeatureKind.TEMPORAL:
        return ["zcr", "temporal_centroid_s"]
    return [str(i) for i in range(n)]


def _fit_and_report(train, val, cfg, kind, out, prefix, warm_model=None):
    model, history = fit(warm_model, train, val, cfg, kind=kind)
    write_history_csv(history, out / f"{prefix}history.csv")
    metrics = {
        "kind": kind.value,
        "train": evaluate(model, train),
        "validation": evaluate(model, val) if val else None,
        "epochs": len(history),
        "best_epoch": history.best_epoch,
        "diverged": history.diverged,
    }
    return model, history, metrics


# --- subcommands --------------------------------------------------------------

def cmd_extract(args):
    out = _out_dir(args)
    manifest = read_manifest(args.manifest)
    if len(manifest) == 0:
        raise DatasetError("empty manifest")
    kind = FeatureKind(args.kind)
    skipped = []
    examples = build_dataset(manifest, kind, _seg_cfg(args), _frame_cfg(args), workers=args.workers,
                             on_skip=lambda row, reason: skipped.append((row.pair_id, reason)))
    for pid, reason in skipped:
        print(f"warning: skipped pair {pid}: {reason}", file=sys.stderr)
    if not examples:
        raise DatasetError(f"no usable rows in {args.manifest} ({len(skipped)} skipped)")
    feats = [ex.x for ex in examples]
    if args.format == "binary":
        path = Path(args.out) if args.out else out / "features.clfv"
        write_features_binary(feats, path)
    else:
        path = Path(args.out) if args.out else out / "features.jsonl"
        write_features_jsonl(feats, path)
    if args.labels_out:
        labels = {}
        for ex in examples:
            labels.setdefault(ex.pair_id, ex.y)
        write_labels_csv(labels, args.labels_out)
    write_stamp(out, "extract", args.seed, _run_config(args))
    print(f"wrote {len(feats)} {kind.value} vectors to {path} ({len(skipped)} rows skipped)")


def cmd_label(args):
    out = _out_dir(args)
    lexicon = load_lexicon(args.lexicon)
    scored = score_comments(read_comments(args.comments), lexicon)
    if not scored:
        raise DatasetError(f"{args.comments}: no comments")
    labels = labels_by_pair(scored)
    path = Path(args.out) if args.out else out / "labels.csv"
    write_labels_csv(labels, path)
    if args.scores_out:
        with open(args.scores_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["pair_id", "comment", "score"])
            for c in scored:
                writer.writerow([c.pair_id, c.text, f"{c.score:.2f}"])
    write_stamp(out, "label", args.seed, _run_config(args))
    print(f"wrote {len(labels)} labels to {path}")


def cmd_train(args):
    out = _out_dir(args)
    examples = load_examples(args.data, args.labels)
    kind = examples[0].x.kind
    train, val = split(examples, args.val_fraction, args.seed)
    warm = load_model(args.warm_start) if args.warm_start else None
    model, history, metrics = _fit_and_report(train, val, _train_cfg(args, warm is not None), kind, out, "",
                                              warm)
    save_model(model, out / "model.json")
    write_json(metrics, out / "train_metrics.json")
    write_stamp(out, "train", args.seed, _run_config(args))
    val_rmse = metrics["validation"]["rmse"] if metrics["validation"] else float("nan")
    print(f"trained {kind.value} model: {len(history)} epochs, validation rmse {val_rmse:.4f}"
          + (" (diverged)" if history.diverged else ""))


def cmd_eval(args):
    out = _out_dir(args)
    model = load_model(args.model)
    examples = load_examples(args.data, args.labels)
    metrics = {"kind": model.kind.value, **evaluate(model, examples)}
    path = Path(args.out) if args.out else out / "metrics.json"
    write_json(metrics, path)
    write_stamp(out, "eval", args.seed, _run_config(args))
    print(f"rmse {metrics['rmse']:.4f} over {metrics['n']} examples")


def cmd_baseline(args):
    out = _out_dir(args)
    kind = FeatureKind.BASELINE_ABSDIFF
    if args.manifest:
        manifest = read_manifest(args.manifest)
        examples = build_dataset(manifest, kind, _seg_cfg(args), _frame_cfg(args), workers=args.workers)
    else:
        extractor = FeatureExtractor(_seg_cfg(args, SYNTH_SEGMENT.segment_seconds), _frame_cfg(args))
        examples, _ = generate_synthetic(args.synth_pairs, kind, args.seed, args.noise, extractor=extractor)
    if not examples:
        raise DatasetError("no baseline examples")
    train, val = split(examples, args.val_fraction, args.seed)
    model, history, metrics = _fit_and_report(train, val, _train_cfg(args), kind, out, "baseline_")
    write_json(metrics, out / "baseline_metrics.json")
    if args.save_model:
        save_model(model, out / "baseline_model.json")
    write_stamp(out, "baseline", args.seed, _run_config(args))
    status = "diverged" if history.diverged else f"validation rmse {metrics['validation']['rmse']:.4g}"
    print(f"baseline: {len(history)} epochs, {status}")


def cmd_synth(args):
    out = _out_dir(args)
    label_kind = FeatureKind(args.label_kind) if args.label_kind else None
    examples, planted = generate_synthetic(args.pairs, FeatureKind(args.kind), args.seed, args.noise,
                                           label_kind=label_kind)
    write_dataset_jsonl(examples, out / "dataset.jsonl")
    write_json(planted.to_dict(), out / "planted.json")
    write_stamp(out, "synth", args.seed, _run_config(args))
    print(f"wrote {len(examples)} synthetic {args.kind} examples to {out / 'dataset.jsonl'}")


def cmd_plotdata(args):
    out = _out_dir(args)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if args.history:
            rows = _read_history(args.history)
            writer.writerow(["epoch", "train_mse", "val_mse"])
            for i, (t, v) in enumerate(rows, start=1):
                writer.writerow([i, _fmt(t), _fmt(v)])
            n = len(rows)
        else:
            feats = read_features(args.features)
            writer.writerow(["pair_id", "k", "side", "bin", "label", "value"])
            n = 0
            for fv in feats:
                if fv.k > args.max_segments:
                    continue
                if fv.kind is FeatureKind.BASELINE_ABSDIFF:
                    halves = [("absdiff", fv.values)]
                else:
                    half = len(fv.values) // 2
                    halves = [("cover", fv.values[:half]), ("original", fv.values[half:])]
                for side, vals in halves:
                    names = _bin_labels(fv.kind, len(vals))
                    for b, v in enumerate(vals):
                        writer.writerow([fv.pair_id, fv.k, side, b, names[b], _fmt(v)])
                        n += 1
    write_stamp(out, "plotdata", args.seed, _run_config(args))
    print(f"wrote {n} rows to {args.out}")


COMMANDS = {
    "extract": cmd_extract,
    "label": cmd_label,
    "train": cmd_train,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "synth": cmd_synth,
    "plotdata": cmd_plotdata,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parse_args(parser, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"coverlens: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (CoverlensError, OSError, ValueError) as exc:
        print(f"coverlens {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
