"""
Raw inertial recordings: ingestion, subject manifest, and the three-part
per-subject split used by the personalization protocol.

Input is one CSV per (subject, body position) named
``<subject_id>_<position>.csv`` with the header::

    timestamp_ms,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,activity

Subjects are included or excluded by a JSON manifest; exclusion (e.g. the
subject whose phone was mounted in a different orientation) is declared,
never detected.
"""

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from harlearn.config import SAMPLE_RATE_HZ
from harlearn.errors import (
    InsufficientClassData,
    InvalidRecording,
    MalformedRow,
    ManifestError,
    MissingSubject,
    UnknownActivity,
)
from harlearn.logutil import get_logger

if TYPE_CHECKING:
    from harlearn.features import FeatureMatrix

log = get_logger("dataset")

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
CSV_COLUMNS = ("timestamp_ms", "acc_x", "acc_y", "acc_z",
               "gyro_x", "gyro_y", "gyro_z", "activity")
SIGNAL_COLUMNS = CSV_COLUMNS[1:7]
LOAD_WORKERS = 4


class ActivityClass(str, Enum):
    """The fixed 7-class label set.  Definition order is the class order
    used by every model (a label's integer code is its index here)."""

    WALKING = "walking"
    SITTING = "sitting"
    STANDING = "standing"
    JOGGING = "jogging"
    BIKING = "biking"
    UPSTAIRS = "upstairs"
    DOWNSTAIRS = "downstairs"

    @property
    def code(self) -> int:
        return ACTIVITY_CLASSES.index(self)

    @classmethod
    def from_code(cls, code: int) -> "ActivityClass":
        return ACTIVITY_CLASSES[int(code)]


ACTIVITY_CLASSES = tuple(ActivityClass)
N_CLASSES = len(ACTIVITY_CLASSES)


class BodyPosition(str, Enum):
    ARM = "arm"
    WAIST = "waist"
    WRIST = "wrist"


@dataclass(frozen=True, eq=False)
class RawRecording:
    """One subject/position stream of 6-channel inertial samples.

    ``samples`` is an (n, 6) float array ordered acc x/y/z, gyro x/y/z;
    ``labels`` holds one activity code per sample.
    """

    subject_id: str
    body_position: BodyPosition
    samples: np.ndarray
    labels: np.ndarray
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        if self.sample_rate_hz != SAMPLE_RATE_HZ:
            raise InvalidRecording(
                f"{self.subject_id}/{self.body_position.value}: sample rate "
                f"{self.sample_rate_hz} Hz, only {SAMPLE_RATE_HZ} Hz is supported")
        samples = np.array(self.samples, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if samples.ndim != 2 or samples.shape[1] != len(SIGNAL_COLUMNS):
            raise InvalidRecording(f"samples must be (n, 6), got {samples.shape}")
        if labels.shape != (samples.shape[0],):
            raise InvalidRecording(
                f"{len(labels)} labels for {samples.shape[0]} samples")
        if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
            raise InvalidRecording("label code outside the 7-class set")
        samples.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def activities(self) -> list:
        return [ACTIVITY_CLASSES[c] for c in self.labels]


@dataclass(frozen=True)
class DatasetManifest:
    """Which subjects take part in the experiment, and at which positions."""

    included_subjects: tuple
    excluded_subjects: tuple = ()  # (subject_id, reason) pairs
    positions: tuple = tuple(BodyPosition)

    def __post_init__(self):
        excluded = {s for s, _ in self.excluded_subjects}
        overlap = excluded.intersection(self.included_subjects)
        if overlap:
            raise ManifestError(f"subjects both included and excluded: {sorted(overlap)}")
        if len(set(self.included_subjects)) != len(self.included_subjects):
            raise ManifestError("duplicate subject in manifest")
        object.__setattr__(
            self, "positions", tuple(BodyPosition(p) for p in self.positions))

    @classmethod
    def from_mapping(cls, data: dict) -> "DatasetManifest":
        """Build from ``{subject_id: "include" | "exclude:<reason>"}``.

        An optional ``"positions"`` key lists the body positions to load.
        """
        included, excluded = [], []
        positions = tuple(BodyPosition)
        for key, value in data.items():
            if key == "positions":
                positions = tuple(BodyPosition(p) for p in value)
                continue
            if not isinstance(value, str):
                raise ManifestError(f"manifest value for {key!r} must be a string")
            verdict, _, reason = value.partition(":")
            verdict = verdict.strip().lower()
            if verdict == "include":
                included.append(key)
            elif verdict == "exclude":
                excluded.append((key, reason.strip() or "unspecified"))
            else:
                raise ManifestError(f"manifest value for {key!r}: {value!r}")
        return cls(tuple(_natural_sorted(included)),
                   tuple(sorted(excluded, key=lambda e: _natural_key(e[0]))),
                   positions)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_mapping(data)

    def to_mapping(self) -> dict:
        data = {s: "include" for s in self.included_subjects}
        data.update({s: f"exclude:{reason}" for s, reason in self.excluded_subjects})
        data["positions"] = [p.value for p in self.positions]
        return data


def _natural_key(subject_id: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", subject_id)]


def _natural_sorted(ids):
    return sorted(ids, key=_natural_key)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

_PARSER_LINE_RE = re.compile(r"line (\d+)")


def read_recording_csv(path, subject_id: str, position: BodyPosition) -> RawRecording:
    """Parse one recording file; errors carry the 1-based file line number."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise MalformedRow(path, 1, "empty file") from exc
    except pd.errors.ParserError as exc:
        m = _PARSER_LINE_RE.search(str(exc))
        raise MalformedRow(path, int(m.group(1)) if m else 0, "column count") from exc

    header = tuple(c.strip() for c in frame.columns)
    if header != CSV_COLUMNS:
        raise MalformedRow(path, 1, f"header {','.join(header)}")
    frame.columns = list(CSV_COLUMNS)

    # Short rows are padded with NaN by the parser.
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        raise MalformedRow(path, int(np.argmax(short)) + 2, "column count")

    numeric = frame[list(CSV_COLUMNS[:7])].apply(pd.to_numeric, errors="coerce")
    values = numeric.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values).all(axis=1)
    if bad.any():
        row = int(np.argmax(bad))
        col = CSV_COLUMNS[int(np.argmax(~np.isfinite(values[row])))]
        raise MalformedRow(path, row + 2, f"cannot parse {col}")

    names = frame["activity"].str.strip().str.lower()
    codes = names.map({a.value: a.code for a in ACTIVITY_CLASSES})
    unknown = codes.isna().to_numpy()
    if unknown.any():
        row = int(np.argmax(unknown))
        raise UnknownActivity(path, row + 2, frame["activity"].iloc[row])

    log.debug("Read %s: %d samples", path, len(frame))
    return RawRecording(subject_id=subject_id, body_position=BodyPosition(position),
                        samples=values[:, 1:7], labels=codes.to_numpy(dtype=np.int64))


def recording_path(data_dir, subject_id: str, position: BodyPosition) -> str:
    return os.path.join(data_dir, f"{subject_id}_{BodyPosition(position).value}.csv")


def load_dataset(path, manifest: DatasetManifest, positions=None,
                 workers: int = LOAD_WORKERS) -> list:
    """Load one RawRecording per (included subject, requested position).

    ``positions`` narrows the manifest's positions.  Files are parsed on a
    bounded thread pool; the result order is (subject, position) in
    manifest order.
    """
    if not os.path.isdir(path):
        raise FileNotFoundError(f"data directory not found: {path}")
    wanted = tuple(BodyPosition(p) for p in (positions or manifest.positions))

    jobs = []
    for subject in manifest.included_subjects:
        missing = [p.value for p in wanted
                   if not os.path.exists(recording_path(path, subject, p))]
        if missing:
            raise MissingSubject(subject, f"no file for position(s) {', '.join(missing)}")
        jobs.extend((subject, p) for p in wanted)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(read_recording_csv, recording_path(path, s, p), s, p)
                   for s, p in jobs]
        recordings = [f.result() for f in futures]

    log.info("Loaded %d recordings (%d subjects x %d positions); excluded: %s",
             len(recordings), len(manifest.included_subjects), len(wanted),
             ", ".join(s for s, _ in manifest.excluded_subjects) or "none")
    return recordings


def majority_label(codes) -> int | None:
    """Majority activity code of a window; ``None`` on an exact tie."""
    counts = np.bincount(np.asarray(codes, dtype=np.int64), minlength=N_CLASSES)
    winners = np.flatnonzero(counts == counts.max())
    if len(winners) != 1:
        return None
    return int(winners[0])


# ---------------------------------------------------------------------------
# Three-part split
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubjectSplit:
    subject_id: str
    parts: tuple = field(default_factory=tuple)  # exactly three FeatureMatrix

    def __post_init__(self):
        if len(self.parts) != 3:
            raise ValueError(f"a split has exactly 3 parts, got {len(self.parts)}")


def split_three_parts(windows: "FeatureMatrix", seed: int,
                      subject_id: str | None = None) -> SubjectSplit:
    """Split one subject's labeled windows into three class-balanced parts.

    Each class's windows (in temporal order) are cut into three contiguous
    runs of near-equal length; the seed decides which parts receive the
    remainder windows when the class count is not divisible by three.
    Rows within a part keep their temporal order.  Every activity class
    needs at least three windows, otherwise InsufficientClassData.
    """
    if subject_id is None:
        subject_id = windows.subject_label()
    counts = windows.class_counts()
    for code in range(N_CLASSES):
        if counts[code] < 3:
            raise InsufficientClassData(subject_id, ACTIVITY_CLASSES[code].value,
                                        int(counts[code]))
    rng = np.random.default_rng(seed)
    labels = windows.labels
    part_rows = ([], [], [])
    for code in range(N_CLASSES):
        idx = np.flatnonzero(labels == code)
        base, extra = divmod(len(idx), 3)
        sizes = np.full(3, base)
        sizes[rng.permutation(3)[:extra]] += 1
        bounds = np.concatenate(([0], np.cumsum(sizes)))
        for p in range(3):
            part_rows[p].append(idx[bounds[p]:bounds[p + 1]])
    parts = tuple(windows.take(np.sort(np.concatenate(rows))) for rows in part_rows)
    return SubjectSplit(subject_id=subject_id, parts=parts)


def chunks_for_personalization(split: SubjectSplit):
    """Return ``(chunk_1, chunk_2, test_set)`` = parts 1, 2 and 3."""
    chunk_1, chunk_2, test_set = split.parts
    return chunk_1, chunk_2, test_set
