"""Data model and file ingestion for stimuli, judgments, annotations,
captions, responses, and embedding vectors.

File formats (all human-diffable):
  stimuli.csv       id,image_path[,caption? no - captions live in JSONL]
  judgments.csv     judge_id,style,left_id,right_id,winner
  annotations.csv   annotator_id,stimulus_id,feature_name,value
  responses.csv     respondent_id,style,text
  captions.jsonl    {"id": ..., "caption": ...} per line
  embeddings.json   {"<key>": [floats]} - keys are stimulus ids or text hashes
  manifest.json     styles, embedding_dim, relative paths to the files above

Loading is whole-file-or-nothing: a single bad row fails the load so that
silently dropped rows cannot bias downstream fits.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    EmptyInputError,
    MissingColumnError,
    MixedValueKindsError,
    NonFiniteValueError,
    SelfComparisonError,
    UnknownStimulusError,
    UnknownStyleError,
)

log = logging.getLogger(__name__)

DEFAULT_STYLES = (
    "aerodynamic",
    "classic",
    "dynamic",
    "elegant",
    "futuristic",
    "luxury",
    "rugged",
    "sleek",
    "sporty",
)

DEFAULT_EMBEDDING_DIM = 384

# Designer-informed feature registry. Booleans aggregate to presence
# proportions; the spoke count aggregates to its modal value; the split
# type aggregates to the modal category.
BOOLEAN_FEATURES = (
    "directional",
    "doublesplit",
    "triplesplit",
    "vsplit",
    "ysplit",
    "complexsplit",
    "offset",
    "doublestacked",
    "hollowed",
    "indented",
)
SPOKE_COUNT_FEATURE = "spoke_count"
SPLIT_TYPE_FEATURE = "split_type"
SPLIT_TYPE_CATEGORIES = ("none", "single", "split")

FEATURE_KINDS = {name: "bool" for name in BOOLEAN_FEATURES}
FEATURE_KINDS[SPOKE_COUNT_FEATURE] = "count"
FEATURE_KINDS[SPLIT_TYPE_FEATURE] = "category"

# Captions far outside this word range get flagged during validation.
CAPTION_WORD_RANGE = (20, 400)


class Winner(Enum):
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class Stimulus:
    id: str
    image_path: str
    caption: str | None = None
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Judgment:
    judge_id: str
    style: str
    left_id: str
    right_id: str
    winner: Winner

    @property
    def winner_id(self) -> str:
        return self.left_id if self.winner is Winner.LEFT else self.right_id

    @property
    def loser_id(self) -> str:
        return self.right_id if self.winner is Winner.LEFT else self.left_id


@dataclass(frozen=True)
class AnnotationRecord:
    annotator_id: str
    stimulus_id: str
    feature_name: str
    value: bool | int | str


@dataclass(frozen=True)
class ResponseText:
    respondent_id: str
    style: str
    text: str
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Corpus:
    styles: tuple[str, ...]
    embedding_dim: int
    stimuli: tuple[Stimulus, ...]
    judgments: tuple[Judgment, ...]
    annotations: tuple[AnnotationRecord, ...]
    responses: tuple[ResponseText, ...]
    base_dir: str = "."

    def stimulus_ids(self) -> list[str]:
        return [s.id for s in self.stimuli]

    def stimulus(self, stimulus_id: str) -> Stimulus:
        for s in self.stimuli:
            if s.id == stimulus_id:
                return s
        raise UnknownStimulusError(f"no stimulus with id {stimulus_id!r}")


# --------------------------------------------------------------------------
# CSV / JSON loaders
# --------------------------------------------------------------------------

def _read_rows(path: str | Path, required: list[str]) -> list[dict]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing column(s) {missing}")
        return list(reader)


def load_stimuli(path: str | Path) -> list[Stimulus]:
    rows = _read_rows(path, ["id", "image_path"])
    seen: set[str] = set()
    out = []
    for i, row in enumerate(rows):
        sid = row["id"].strip()
        if not sid:
            raise EmptyInputError(f"{path}: empty stimulus id at row {i + 2}")
        if sid in seen:
            raise DuplicateIdError(f"{path}: duplicate stimulus id {sid!r}")
        seen.add(sid)
        out.append(Stimulus(id=sid, image_path=row["image_path"]))
    return out


def load_judgments(
    path: str | Path,
    styles: tuple[str, ...] | None = None,
    known_ids: set[str] | None = None,
) -> list[Judgment]:
    """Parse a judgments CSV. The whole load fails on the first bad row.

    When `styles` / `known_ids` are given, each row is additionally checked
    against the configured keyword set and the corpus stimulus ids.
    """
    rows = _read_rows(path, ["judge_id", "style", "left_id", "right_id", "winner"])
    out = []
    for i, row in enumerate(rows):
        where = f"{path} row {i + 2}"
        style = row["style"].strip()
        if styles is not None and style not in styles:
            raise UnknownStyleError(f"{where}: unknown style {style!r}")
        left, right = row["left_id"].strip(), row["right_id"].strip()
        if left == right:
            raise SelfComparisonError(f"{where}: {left!r} compared with itself")
        if known_ids is not None:
            for sid in (left, right):
                if sid not in known_ids:
                    raise UnknownStimulusError(f"{where}: unknown stimulus {sid!r}")
        try:
            winner = Winner(row["winner"].strip())
        except ValueError:
            raise MissingColumnError(
                f"{where}: winner must be 'Left' or 'Right', got {row['winner']!r}"
            ) from None
        out.append(Judgment(row["judge_id"], style, left, right, winner))
    return out


def _parse_annotation_value(name: str, raw: str, where: str) -> bool | int | str:
    kind = FEATURE_KINDS.get(name)
    if kind is None:
        raise MixedValueKindsError(f"{where}: feature {name!r} not in the registry")
    raw = raw.strip()
    if kind == "bool":
        if raw.upper() == "TRUE":
            return True
        if raw.upper() == "FALSE":
            return False
        raise MixedValueKindsError(f"{where}: {name!r} expects TRUE/FALSE, got {raw!r}")
    if kind == "count":
        try:
            n = int(raw)
        except ValueError:
            raise MixedValueKindsError(f"{where}: {name!r} expects an integer") from None
        if n < 0:
            raise MixedValueKindsError(f"{where}: {name!r} must be >= 0, got {n}")
        return n
    if raw not in SPLIT_TYPE_CATEGORIES:
        raise MixedValueKindsError(
            f"{where}: {name!r} expects one of {SPLIT_TYPE_CATEGORIES}, got {raw!r}"
        )
    return raw


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    rows = _read_rows(path, ["annotator_id", "stimulus_id", "feature_name", "value"])
    out = []
    for i, row in enumerate(rows):
        where = f"{path} row {i + 2}"
        name = row["feature_name"].strip()
        value = _parse_annotation_value(name, row["value"], where)
        out.append(AnnotationRecord(row["annotator_id"], row["stimulus_id"].strip(), name, value))
    return out


def load_responses(path: str | Path, styles: tuple[str, ...] | None = None) -> list[ResponseText]:
    rows = _read_rows(path, ["respondent_id", "style", "text"])
    out = []
    for i, row in enumerate(rows):
        where = f"{path} row {i + 2}"
        style = row["style"].strip()
        if styles is not None and style not in styles:
            raise UnknownStyleError(f"{where}: unknown style {style!r}")
        text = row["text"]
        if not text.strip():
            raise EmptyInputError(f"{where}: empty response text")
        out.append(ResponseText(row["respondent_id"], style, text))
    return out


def load_captions(path: str | Path) -> dict[str, str]:
    """Read a captions JSONL file into an id -> caption map."""
    out: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "id" not in rec or "caption" not in rec:
                raise MissingColumnError(f"{path} line {i + 1}: need 'id' and 'caption'")
            if rec["id"] in out:
                raise DuplicateIdError(f"{path} line {i + 1}: duplicate id {rec['id']!r}")
            out[rec["id"]] = rec["caption"]
    return out


def _reject_duplicate_keys(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise DuplicateIdError(f"duplicate id {key!r} in embeddings file")
        seen.add(key)
    return dict(pairs)


def load_embeddings(path: str | Path, expected_dim: int | None) -> dict[str, np.ndarray]:
    """Load a JSON object mapping string keys to numeric vectors.

    Every vector must have length `expected_dim` and contain only finite
    values; duplicate keys fail the load. With `expected_dim=None` the
    first vector sets the length and the rest must match it.
    """
    with Path(path).open(encoding="utf-8") as fh:
        raw = json.load(fh, object_pairs_hook=_reject_duplicate_keys)
    out: dict[str, np.ndarray] = {}
    for key, values in raw.items():
        vec = np.asarray(values, dtype=float)
        if expected_dim is None:
            expected_dim = int(vec.shape[0]) if vec.ndim == 1 else None
        if vec.ndim != 1 or vec.shape[0] != expected_dim:
            raise DimensionMismatchError(
                f"{path}: vector for {key!r} has length {vec.size}, expected {expected_dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValueError(f"{path}: non-finite entry in vector for {key!r}")
        out[key] = vec
    return out


# --------------------------------------------------------------------------
# Writers (used by the synthetic generator and for round-trip persistence)
# --------------------------------------------------------------------------

def save_stimuli(path: str | Path, stimuli: list[Stimulus]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "image_path"])
        for s in stimuli:
            w.writerow([s.id, s.image_path])


def save_judgments(path: str | Path, judgments: list[Judgment]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["judge_id", "style", "left_id", "right_id", "winner"])
        for j in judgments:
            w.writerow([j.judge_id, j.style, j.left_id, j.right_id, j.winner.value])


def save_annotations(path: str | Path, records: list[AnnotationRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["annotator_id", "stimulus_id", "feature_name", "value"])
        for r in records:
            if isinstance(r.value, bool):
                raw = "TRUE" if r.value else "FALSE"
            else:
                raw = str(r.value)
            w.writerow([r.annotator_id, r.stimulus_id, r.feature_name, raw])


def save_responses(path: str | Path, responses: list[ResponseText]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["respondent_id", "style", "text"])
        for r in responses:
            w.writerow([r.respondent_id, r.style, r.text])


def save_captions(path: str | Path, captions: dict[str, str]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for sid in captions:
            fh.write(json.dumps({"id": sid, "caption": captions[sid]}) + "\n")


def save_embeddings(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    payload = {key: [float(v) for v in vec] for key, vec in vectors.items()}
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------

MANIFEST_FILES = ("stimuli", "judgments", "annotations", "responses", "captions")


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("styles", "embedding_dim"):
        if key not in manifest:
            raise MissingColumnError(f"{path}: manifest missing {key!r}")
    manifest["styles"] = tuple(manifest["styles"])
    manifest["_dir"] = str(path.parent)
    return manifest


def manifest_path(manifest: dict, key: str) -> Path | None:
    rel = manifest.get(key)
    if rel is None:
        return None
    return Path(manifest["_dir"]) / rel


def load_corpus(manifest_file: str | Path) -> Corpus:
    """Load every file referenced by a corpus manifest."""
    manifest = load_manifest(manifest_file)
    styles = manifest["styles"]
    dim = int(manifest["embedding_dim"])

    stimuli = load_stimuli(manifest_path(manifest, "stimuli"))
    ids = {s.id for s in stimuli}

    judgments = []
    if manifest.get("judgments"):
        judgments = load_judgments(manifest_path(manifest, "judgments"), styles, ids)
    annotations = []
    if manifest.get("annotations"):
        annotations = load_annotations(manifest_path(manifest, "annotations"))
    responses = []
    if manifest.get("responses"):
        responses = load_responses(manifest_path(manifest, "responses"), styles)

    captions: dict[str, str] = {}
    if manifest.get("captions"):
        captions = load_captions(manifest_path(manifest, "captions"))

    stimuli = [
        Stimulus(id=s.id, image_path=s.image_path, caption=captions.get(s.id))
        for s in stimuli
    ]
    return Corpus(
        styles=styles,
        embedding_dim=dim,
        stimuli=tuple(stimuli),
        judgments=tuple(judgments),
        annotations=tuple(annotations),
        responses=tuple(responses),
        base_dir=manifest["_dir"],
    )


# --------------------------------------------------------------------------
# Annotation aggregation
# --------------------------------------------------------------------------

def aggregate_annotations(
    records: list[AnnotationRecord],
) -> dict[str, dict[str, float | int | str]]:
    """Collapse multi-annotator records into one row per stimulus.

    Boolean features become the proportion of TRUE records, exactly
    (TRUE count) / (record count). The spoke count becomes the modal value
    with ties broken toward the smaller count. The split type becomes the
    modal category with ties broken by the fixed order none < single < split.
    """
    if not records:
        raise EmptyInputError("no annotation records to aggregate")

    grouped: dict[tuple[str, str], list] = {}
    for r in records:
        kind = FEATURE_KINDS.get(r.feature_name)
        if kind is None:
            raise MixedValueKindsError(f"feature {r.feature_name!r} not in the registry")
        expected = {"bool": bool, "count": int, "category": str}[kind]
        if not isinstance(r.value, expected) or (expected is int and isinstance(r.value, bool)):
            raise MixedValueKindsError(
                f"feature {r.feature_name!r} got a {type(r.value).__name__} value"
            )
        grouped.setdefault((r.stimulus_id, r.feature_name), []).append(r.value)

    table: dict[str, dict[str, float | int | str]] = {}
    for (sid, name), values in sorted(grouped.items()):
        row = table.setdefault(sid, {})
        kind = FEATURE_KINDS[name]
        if kind == "bool":
            row[name] = sum(1 for v in values if v) / len(values)
        elif kind == "count":
            counts = Counter(values)
            best = max(counts.values())
            row[name] = min(v for v, c in counts.items() if c == best)
        else:
            counts = Counter(values)
            best = max(counts.values())
            tied = [v for v, c in counts.items() if c == best]
            row[name] = min(tied, key=SPLIT_TYPE_CATEGORIES.index)
    return table


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    kind: str
    detail: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, kind: str, detail: str) -> None:
        self.findings.append(Finding(kind, detail))


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check referential integrity, per-style comparison-graph connectivity,
    annotation coverage, and caption length policy. Never mutates anything.
    """
    from .ranking import check_connectivity, win_matrix_from_judgments

    report = ValidationReport()
    ids = set(corpus.stimulus_ids())

    for j in corpus.judgments:
        for sid in (j.left_id, j.right_id):
            if sid not in ids:
                report.add("UnknownStimulus", f"judgment references unknown stimulus {sid!r}")
        if j.style not in corpus.styles:
            report.add("UnknownStyle", f"judgment uses unknown style {j.style!r}")

    for r in corpus.annotations:
        if r.stimulus_id not in ids:
            report.add("UnknownStimulus", f"annotation for unknown stimulus {r.stimulus_id!r}")
        if r.feature_name not in FEATURE_KINDS:
            report.add("UnknownFeature", f"annotation for unknown feature {r.feature_name!r}")

    # Boolean coverage: every boolean feature of every stimulus needs >= 1 record.
    if corpus.annotations:
        covered = {(r.stimulus_id, r.feature_name) for r in corpus.annotations}
        for sid in sorted(ids):
            for name in BOOLEAN_FEATURES:
                if (sid, name) not in covered:
                    report.add("MissingAnnotation", f"stimulus {sid!r} lacks {name!r} records")

    # Per-style comparison-graph connectivity.
    per_style_counts: dict[str, int] = {}
    pair_counts: Counter = Counter()
    ordered_ids = corpus.stimulus_ids()
    for style in corpus.styles:
        style_judgments = [
            j for j in corpus.judgments
            if j.style == style and j.left_id in ids and j.right_id in ids
        ]
        per_style_counts[style] = len(style_judgments)
        for j in style_judgments:
            pair_counts[frozenset((j.left_id, j.right_id))] += 1
        if style_judgments:
            matrix = win_matrix_from_judgments(style_judgments, ordered_ids)
            components = check_connectivity(matrix)
            if len(components) > 1:
                report.add(
                    "DisconnectedGraph",
                    f"style {style!r} has {len(components)} comparison components",
                )

    # Caption length policy.
    lo, hi = CAPTION_WORD_RANGE
    for s in corpus.stimuli:
        if s.caption is not None:
            n_words = len(s.caption.split())
            if not lo <= n_words <= hi:
                report.add(
                    "CaptionLengthOutOfPolicy",
                    f"caption for {s.id!r} has {n_words} words (policy {lo}-{hi})",
                )

    report.stats = {
        "n_stimuli": len(corpus.stimuli),
        "n_judgments": len(corpus.judgments),
        "n_annotations": len(corpus.annotations),
        "n_responses": len(corpus.responses),
        "judgments_per_style": per_style_counts,
        "mean_ratings_per_pair": (
            round(sum(pair_counts.values()) / len(pair_counts), 4) if pair_counts else 0.0
        ),
        "n_captioned": sum(1 for s in corpus.stimuli if s.caption is not None),
    }
    return report
