"""Training-set assembly from a manifest of cover/original recordings, plus a
synthetic corpus with a planted linear labeling for desk-scale checks."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from coverlens.audio_io import AudioClip, load_clip
from coverlens.dsp_core import FrameConfig
from coverlens.errors import DatasetError, ManifestError, SegmentationError, WavError
from coverlens.features import FeatureExtractor, FeatureKind, FeatureVector
from coverlens.segmentation import SegmentConfig, SegmentPair, pair_segments
from coverlens.sentiment import (
    SentimentLexicon,
    aggregate_scores,
    load_lexicon,
    read_comments,
    score_comment,
)
from coverlens.serialize import dumps

log = logging.getLogger(__name__)

MANIFEST_FIELDS = ("pair_id", "cover_path", "original_path", "comments_path", "label")


@dataclass(frozen=True)
class TrainingExample:
    x: FeatureVector
    y: float

    def __post_init__(self):
        if not 0.0 <= self.y <= 100.0:
            raise ValueError(f"label {self.y} outside [0, 100]")

    @property
    def pair_id(self) -> str:
        return self.x.pair_id


@dataclass(frozen=True)
class ManifestRow:
    pair_id: str
    cover_path: Path
    original_path: Path
    comments_path: Path | None = None
    label: float | None = None


@dataclass(frozen=True)
class Manifest:
    rows: tuple = ()

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.pair_id in seen:
                raise ManifestError(f"duplicate pair_id {row.pair_id!r}")
            seen.add(row.pair_id)
            if (row.comments_path is None) == (row.label is None):
                raise ManifestError(f"pair {row.pair_id!r}: give exactly one of comments_path or label")
            if row.label is not None and not 0.0 <= row.label <= 100.0:
                raise ManifestError(f"pair {row.pair_id!r}: label {row.label} outside [0, 100]")

    def __len__(self):
        return len(self.rows)


def read_manifest(path) -> Manifest:
    """Parse a manifest CSV; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot open manifest {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return Manifest(())
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames)
        if missing:
            raise ManifestError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            comments = (rec["comments_path"] or "").strip()
            label = (rec["label"] or "").strip()
            try:
                rows.append(ManifestRow(
                    rec["pair_id"].strip(),
                    base / rec["cover_path"].strip(),
                    base / rec["original_path"].strip(),
                    base / comments if comments else None,
                    float(label) if label else None,
                ))
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
    try:
        return Manifest(tuple(rows))
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from None


def row_label(row: ManifestRow, lexicon: SentimentLexicon | None = None) -> float:
    if row.label is not None:
        return row.label
    lexicon = lexicon or load_lexicon()
    texts = [text for pid, text in read_comments(row.comments_path) if pid == row.pair_id]
    if not texts:
        raise DatasetError(f"pair {row.pair_id!r}: no comments in {row.comments_path}")
    return aggregate_scores(score_comment(t, lexicon) for t in texts)


def _row_examples(row: ManifestRow, kind: FeatureKind, extractor: FeatureExtractor,
                  lexicon: SentimentLexicon | None) -> list[TrainingExample]:
    label = row_label(row, lexicon)
    sr = extractor.seg_cfg.sample_rate
    cover = load_clip(row.cover_path, sr)
    original = load_clip(row.original_path, sr)
    pairs = pair_segments(cover, original, extractor.seg_cfg, row.pair_id)
    return [TrainingExample(extractor.pair(p, kind), label) for p in pairs]


def _row_job(args):
    row, kind, extractor, lexicon = args
    try:
        return _row_examples(row, kind, extractor, lexicon), None
    except (WavError, DatasetError, SegmentationError, OSError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def build_dataset(manifest: Manifest, kind: FeatureKind, seg_cfg: SegmentConfig | None = None,
                  frame_cfg: FrameConfig | None = None, *, workers: int = 1,
                  lexicon: SentimentLexicon | None = None, on_skip=None) -> list[TrainingExample]:
    """Examples for every readable manifest row, in manifest then segment order.

    Rows that fail (unreadable audio, no comments) are skipped with a warning;
    ``on_skip(row, reason)`` is called for each of them.
    """
    if len(manifest) == 0:
        raise DatasetError("empty manifest")
    kind = FeatureKind(kind)
    extractor = FeatureExtractor(seg_cfg or SegmentConfig(), frame_cfg or FrameConfig())
    if lexicon is None and any(r.comments_path is not None for r in manifest.rows):
        lexicon = load_lexicon()
    jobs = [(row, kind, extractor, lexicon) for row in manifest.rows]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_row_job, jobs))
    else:
        results = [_row_job(j) for j in jobs]

    examples = []
    for row, (rows_ex, reason) in zip(manifest.rows, results):
        if rows_ex is None:
            log.warning("skipping pair %s: %s", row.pair_id, reason)
            if on_skip is not None:
                on_skip(row, reason)
            continue
        examples.extend(rows_ex)
    return examples


def pair_ids(examples) -> list[str]:
    return list(dict.fromkeys(ex.pair_id for ex in examples))


def split(examples, val_fraction: float = 0.2, seed: int = 0):
    """Split by pair id so all segments of a recording pair land on one side."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    examples = list(examples)
    ids = pair_ids(examples)
    if len(ids) < 2:
        raise DatasetError("need at least two distinct pair ids to split")
    n_val = min(len(ids) - 1, max(1, int(math.floor(val_fraction * len(ids) + 0.5))))
    perm = np.random.default_rng(seed).permutation(len(ids))
    val_ids = {ids[i] for i in perm[:n_val]}
    train = [ex for ex in examples if ex.pair_id not in val_ids]
    val = [ex for ex in examples if ex.pair_id in val_ids]
    return train, val


def example_record(ex: TrainingExample) -> dict:
    return {"pair_id": ex.x.pair_id, "k": ex.x.k, "kind": ex.x.kind.value, "x": ex.x.values, "y": ex.y}


def write_dataset_jsonl(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(dumps(example_record(ex)) + "\n")


def read_dataset_jsonl(path) -> list[TrainingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                fv = FeatureVector(FeatureKind(rec["kind"]), rec["x"], str(rec["pair_id"]), int(rec["k"]))
                out.append(TrainingExample(fv, float(rec["y"])))
            except (KeyError, ValueError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return out


def attach_labels(features, labels: dict) -> list[TrainingExample]:
    """Join feature vectors with per-pair labels; unlabeled pairs raise."""
    out = []
    for fv in features:
        if fv.pair_id not in labels:
            raise DatasetError(f"no label for pair {fv.pair_id!r}")
        out.append(TrainingExample(fv, float(labels[fv.pair_id])))
    return out


def read_labels_csv(path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"pair_id", "label"} <= set(reader.fieldnames):
            raise DatasetError(f"{path}: expected header 'pair_id,label'")
        try:
            return {row["pair_id"]: float(row["label"]) for row in reader}
        except ValueError as exc:
            raise DatasetError(f"{path}: {exc}") from None


def write_labels_csv(labels: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pair_id", "label"])
        for pid, val in labels.items():
            writer.writerow([pid, format(val, ".17g")])


# --- synthetic corpus -------------------------------------------------------

SYNTH_SEGMENT = SegmentConfig(segment_seconds=1.0, sample_rate=22050)
SYNTH_SEGMENTS_PER_PAIR = (6, 7)
LABEL_LOW, LABEL_HIGH = 10.0, 90.0


@dataclass(frozen=True, eq=False)
class PlantedModel:
    """Hidden labeling ``y = weights . phi + intercept`` (before noise and clipping).

    ``unit_weights`` is the direction drawn in z-scored feature space;
    ``means``/``stds`` are the corpus statistics used for that z-score and
    ``scale``/``offset`` the affine map of the raw score onto [10, 90].
    """

    label_kind: FeatureKind
    weights: np.ndarray
    intercept: float
    unit_weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    scale: float
    offset: float
    noise_sigma: float

    def to_dict(self) -> dict:
        return {
            "label_kind": self.label_kind.value,
            "weights": self.weights,
            "intercept": self.intercept,
            "unit_weights": self.unit_weights,
            "means": self.means,
            "stds": self.stds,
            "scale": self.scale,
            "offset": self.offset,
            "noise_sigma": self.noise_sigma,
        }


def _sine_mixture(rng, n_samples, sr, freqs, amps, rates, phases):
    t = np.arange(n_samples) / sr
    x = np.zeros(n_samples)
    for f, a, r, ph in zip(freqs, amps, rates, phases):
        # slow tremolo so successive windows differ in spectral balance
        env = a * (1.0 + 0.8 * np.sin(2 * np.pi * r * t + ph))
        x += env * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return x


def synthesize_corpus(num_pairs: int, seed: int, seg_cfg: SegmentConfig = SYNTH_SEGMENT) -> list[SegmentPair]:
    """Random sine-mixture recordings; each cover is a detuned, re-balanced copy of its original."""
    if num_pairs < 2:
        raise ValueError("need at least two pairs")
    rng = np.random.default_rng(seed)
    sr = seg_cfg.sample_rate
    seg_len = seg_cfg.segment_samples
    pairs = []
    for i in range(num_pairs):
        n_seg = int(rng.integers(SYNTH_SEGMENTS_PER_PAIR[0], SYNTH_SEGMENTS_PER_PAIR[1] + 1))
        n_comp = int(rng.integers(3, 7))
        freqs = np.exp(rng.uniform(np.log(100.0), np.log(4000.0), n_comp))
        amps = rng.uniform(0.05, 0.3, n_comp)
        rates = rng.uniform(0.05, 0.5, n_comp)
        phases = rng.uniform(0, 2 * np.pi, n_comp)
        orig_len = n_seg * seg_len + int(rng.integers(0, 2 * seg_len))
        # cover ends inside its last window so that window is zero-padded
        cover_len = (n_seg - 1) * seg_len + int(rng.integers(seg_len // 2, seg_len + 1))
        original = _sine_mixture(rng, orig_len, sr, freqs, amps, rates, phases)
        cover = _sine_mixture(
            rng, cover_len, sr,
            freqs * (1.0 + rng.uniform(-0.03, 0.03, n_comp)),
            amps * rng.uniform(0.5, 1.5, n_comp),
            rates * rng.uniform(0.5, 1.5, n_comp),
            phases + rng.uniform(-1.0, 1.0, n_comp),
        )
        # recording noise floor; keeps upper mel bands off the log floor
        original += rng.normal(0.0, 0.005, orig_len)
        cover += rng.normal(0.0, 0.01, cover_len)
        pairs.extend(pair_segments(AudioClip(cover, sr), AudioClip(original, sr), seg_cfg, f"synth{i:03d}"))
    return pairs


def generate_synthetic(num_pairs: int, kind: FeatureKind, seed: int, noise_sigma: float = 0.0, *,
                       label_kind: FeatureKind | None = None,
                       extractor: FeatureExtractor | None = None):
    """Synthetic examples of ``kind`` with labels linear in ``label_kind`` features.

    ``label_kind`` defaults to ``kind``, or to MFCC for the baseline kind.
    Returns ``(examples, planted)``.
    """
    kind = FeatureKind(kind)
    if label_kind is None:
        label_kind = FeatureKind.MFCC if kind is FeatureKind.BASELINE_ABSDIFF else kind
    label_kind = FeatureKind(label_kind)
    if label_kind is FeatureKind.BASELINE_ABSDIFF:
        raise ValueError("labels are planted on one of the four feature kinds")
    extractor = extractor or FeatureExtractor(SYNTH_SEGMENT)
    pairs = synthesize_corpus(num_pairs, seed, extractor.seg_cfg)

    phi = np.stack([extractor.pair(p, label_kind).values for p in pairs])
    means = phi.mean(axis=0)
    stds = phi.std(axis=0)
    stds = np.where(stds > 0, stds, 1.0)
    rng = np.random.default_rng([seed, 1])
    unit = rng.normal(size=phi.shape[1])
    raw = ((phi - means) / stds) @ unit
    span = raw.max() - raw.min()
    scale = (LABEL_HIGH - LABEL_LOW) / span if span > 0 else 0.0
    offset = LABEL_LOW - scale * raw.min()
    weights = scale * unit / stds
    intercept = offset - float(weights @ means)
    clean = scale * raw + offset
    y = clean + rng.normal(0.0, noise_sigma, len(clean)) if noise_sigma > 0 else clean
    y = np.clip(y, 0.0, 100.0)

    planted = PlantedModel(label_kind, weights, intercept, unit, means, stds, scale, offset, noise_sigma)
    if kind is label_kind:
        feats = [FeatureVector(kind, v, p.pair_id, p.k) for v, p in zip(phi, pairs)]
    else:
        feats = [extractor.pair(p, kind) for p in pairs]
    return [TrainingExample(fv, float(t)) for fv, t in zip(feats, y)], planted


def default_workers() -> int:
    return os.cpu_count() or 1
