"""
Window-level feature extraction for 6-channel inertial data.

Each 4.2 s window (210 samples at 50 Hz, sliding by 1.4 s) is expanded
into 14 derived channels (raw, magnitudes, pairwise square-sums), and every
channel contributes the same 40 extractors:

  * 8 basic statistics: std, min, max, median, p10, p25, p75, p90
  * 24 percentile aggregates: for p in (10, 25, 75, 90) the sum, square
    sum and crossing count above/below the p-th percentile
  * 8 frequency descriptors of the mean-removed, untapered spectrum

``FeatureCatalog`` is the single source of truth for the column order.

Conventions:
  * Percentiles use linear interpolation at sorted position p/100 * (n-1).
  * ``std`` is the population standard deviation (ddof=0).
  * A crossing is a strict sign change of (v - t) between consecutive
    samples; samples equal to t carry the sign of the previous non-equal
    sample.  ``cross_above`` and ``cross_below`` count the same events.
  * Spectral entropy uses the natural log of the normalised power
    spectrum without the DC bin.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.fft import rfft, rfftfreq
from scipy.stats import entropy

from harlearn.config import SAMPLE_RATE_HZ, WINDOW_LENGTH_S, WINDOW_SLIDE_S
from harlearn.dataset import N_CLASSES, RawRecording, majority_label
from harlearn.errors import EmptyInput, NonFiniteFeature, RecordingTooShort
from harlearn.logutil import get_logger

log = get_logger("features")

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
CHANNEL_NAMES = (
    "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z",
    "acc_mag", "gyro_mag",
    "acc_xy", "acc_xz", "acc_yz", "gyro_xy", "gyro_xz", "gyro_yz",
)
PERCENTILE_LEVELS = (10, 25, 75, 90)
BASIC_EXTRACTORS = ("std", "min", "max", "median", "p10", "p25", "p75", "p90")
AGGREGATE_KINDS = ("sum_above", "sum_below", "sqsum_above", "sqsum_below",
                   "cross_above", "cross_below")
FREQUENCY_BANDS = ((0.0, 1.0), (1.0, 3.0), (3.0, 6.0), (6.0, 10.0))
FREQUENCY_EXTRACTORS = (
    "dominant_freq", "dominant_mag", "spectral_energy", "spectral_entropy",
) + tuple(f"band_{lo:g}_{hi:g}" for lo, hi in FREQUENCY_BANDS)
EXTRACTORS = (
    BASIC_EXTRACTORS
    + tuple(f"{kind}_p{p}" for p in PERCENTILE_LEVELS for kind in AGGREGATE_KINDS)
    + FREQUENCY_EXTRACTORS
)

# Spectra with less energy than this (relative to the signal power) are
# treated as exactly zero, so a constant signal yields all-zero features.
_ZERO_SPECTRUM_RTOL = 1e-18


@dataclass(frozen=True)
class WindowSpec:
    window_length_s: float = WINDOW_LENGTH_S
    slide_s: float = WINDOW_SLIDE_S
    sample_rate_hz: float = SAMPLE_RATE_HZ

    @property
    def window_length_samples(self) -> int:
        return int(round(self.window_length_s * self.sample_rate_hz))

    @property
    def slide_samples(self) -> int:
        return int(round(self.slide_s * self.sample_rate_hz))


@dataclass(frozen=True, eq=False)
class RawWindow:
    """One raw 6-channel window; ``label`` is None on a majority tie."""

    index: int
    start: int
    samples: np.ndarray
    label: int | None


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSpec:
    index: int
    name: str
    channel: str
    extractor: str


@dataclass(frozen=True, eq=False)
class FeatureCatalog:
    entries: tuple

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        channel_index = np.array([CHANNEL_NAMES.index(e.channel) for e in self.entries],
                                 dtype=np.intp)
        extractor_index = np.array([EXTRACTORS.index(e.extractor) for e in self.entries],
                                   dtype=np.intp)
        object.__setattr__(self, "_channel_index", channel_index)
        object.__setattr__(self, "_extractor_index", extractor_index)

    @property
    def total_count(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> tuple:
        return tuple(e.name for e in self.entries)

    def select(self, block: np.ndarray) -> np.ndarray:
        """Pick catalog-ordered values out of a (channels, extractors) block."""
        return block[self._channel_index, self._extractor_index]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "feature_index": [e.index for e in self.entries],
            "feature_name": [e.name for e in self.entries],
            "channel": [e.channel for e in self.entries],
            "extractor": [e.extractor for e in self.entries],
        })


def build_catalog(channels=CHANNEL_NAMES, extractors=EXTRACTORS) -> FeatureCatalog:
    """Catalog of every (channel, extractor) pair, channel-major."""
    entries = []
    for ch in channels:
        for ex in extractors:
            entries.append(FeatureSpec(len(entries), f"{ch}__{ex}", ch, ex))
    return FeatureCatalog(tuple(entries))


# ---------------------------------------------------------------------------
# Feature matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows = windows, columns = catalog features.

    ``subject_ids`` and ``window_index`` are provenance tags: together they
    identify a window uniquely across the whole dataset.  ``labels`` holds
    activity codes, or is None for unlabeled rows.
    """

    values: np.ndarray
    labels: np.ndarray | None
    subject_ids: np.ndarray
    window_index: np.ndarray
    columns: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"feature values must be 2-D, got {values.shape}")
        n = values.shape[0]
        if self.columns and len(self.columns) != values.shape[1]:
            raise ValueError(f"{len(self.columns)} column names for {values.shape[1]} columns")
        if not np.isfinite(values).all():
            raise ValueError("feature matrix holds non-finite values")
        labels = None if self.labels is None else np.asarray(self.labels, dtype=np.int64)
        subject_ids = np.asarray(self.subject_ids, dtype=object)
        window_index = np.asarray(self.window_index, dtype=np.int64)
        for name, arr in (("labels", labels), ("subject_ids", subject_ids),
                          ("window_index", window_index)):
            if arr is not None and arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "subject_ids", subject_ids)
        object.__setattr__(self, "window_index", window_index)

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=np.intp)
        return FeatureMatrix(
            values=self.values[idx],
            labels=None if self.labels is None else self.labels[idx],
            subject_ids=self.subject_ids[idx],
            window_index=self.window_index[idx],
            columns=self.columns,
        )

    def with_labels(self, labels) -> "FeatureMatrix":
        return FeatureMatrix(self.values, labels, self.subject_ids,
                             self.window_index, self.columns)

    @staticmethod
    def concat(matrices) -> "FeatureMatrix":
        matrices = list(matrices)
        if not matrices:
            raise EmptyInput("nothing to concatenate")
        has_labels = all(m.labels is not None for m in matrices)
        return FeatureMatrix(
            values=np.vstack([m.values for m in matrices]),
            labels=np.concatenate([m.labels for m in matrices]) if has_labels else None,
            subject_ids=np.concatenate([m.subject_ids for m in matrices]),
            window_index=np.concatenate([m.window_index for m in matrices]),
            columns=matrices[0].columns,
        )

    def row_keys(self) -> set:
        return set(zip(self.subject_ids.tolist(), self.window_index.tolist()))

    def subject_label(self) -> str:
        return "+".join(sorted(set(self.subject_ids.tolist()))) or "?"

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=N_CLASSES)


# ---------------------------------------------------------------------------
# Windowing and derived signals
# ---------------------------------------------------------------------------

def window_count(n_samples: int, spec: WindowSpec = WindowSpec()) -> int:
    w, s = spec.window_length_samples, spec.slide_samples
    if n_samples < w:
        return 0
    return (n_samples - w) // s + 1


def sliding_windows(recording: RawRecording, spec: WindowSpec = WindowSpec()) -> list:
    """Cut a recording into windows; window i covers [slide*i, slide*i + length)."""
    w, s = spec.window_length_samples, spec.slide_samples
    if len(recording) < w:
        raise RecordingTooShort(
            f"{recording.subject_id}/{recording.body_position.value}: "
            f"{len(recording)} samples, need at least {w}")
    windows = []
    for i in range(window_count(len(recording), spec)):
        start = i * s
        windows.append(RawWindow(
            index=i, start=start,
            samples=recording.samples[start:start + w],
            label=majority_label(recording.labels[start:start + w]),
        ))
    return windows


def derive_signals(window) -> np.ndarray:
    """Return the 14 derived channels of a (n, 6) window as a (14, n) array."""
    samples = np.asarray(getattr(window, "samples", window), dtype=np.float64)
    acc = samples[:, 0:3].T
    gyro = samples[:, 3:6].T
    channels = [acc[0], acc[1], acc[2], gyro[0], gyro[1], gyro[2],
                np.sqrt(np.sum(acc ** 2, axis=0)), np.sqrt(np.sum(gyro ** 2, axis=0))]
    for sensor in (acc, gyro):
        for i, j in ((0, 1), (0, 2), (1, 2)):
            channels.append(sensor[i] ** 2 + sensor[j] ** 2)
    return np.vstack(channels)


# ---------------------------------------------------------------------------
# Extractors
# ---------------------------------------------------------------------------

class PercentileAggregates(NamedTuple):
    sum_above: float
    sum_below: float
    sqsum_above: float
    sqsum_below: float
    cross_above: int
    cross_below: int


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile (sorted position p/100 * (n-1))."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("percentile of an empty sequence")
    if not 0 <= p <= 100:
        raise ValueError(f"percentile level must be in [0, 100], got {p}")
    return float(np.percentile(arr, p, method="linear"))


def _crossings(signs: np.ndarray) -> np.ndarray:
    """Strict sign changes along the last axis, zeros forward-filled."""
    n = signs.shape[-1]
    positions = np.where(signs != 0, np.arange(n), 0)
    positions = np.maximum.accumulate(positions, axis=-1)
    filled = np.take_along_axis(signs, positions, axis=-1)
    return np.count_nonzero(filled[..., :-1] * filled[..., 1:] < 0, axis=-1)


def percentile_aggregates(values, p: float, threshold: float | None = None):
    """Sums, square sums and crossings relative to the p-th percentile.

    ``threshold`` overrides the percentile (used to try thresholds that
    lie outside the sample).
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("aggregates of an empty sequence")
    t = percentile(arr, p) if threshold is None else float(threshold)
    above = arr > t
    below = arr < t
    crossings = int(_crossings(np.sign(arr - t)))
    return PercentileAggregates(
        sum_above=float(np.sum(arr[above])),
        sum_below=float(np.sum(arr[below])),
        sqsum_above=float(np.sum(arr[above] ** 2)),
        sqsum_below=float(np.sum(arr[below] ** 2)),
        cross_above=crossings,
        cross_below=crossings,
    )


def _frequency_block(signals: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """Frequency descriptors for each row of a (channels, n) array."""
    n = signals.shape[-1]
    centred = signals - signals.mean(axis=-1, keepdims=True)
    magnitude = np.abs(rfft(centred, axis=-1))[:, 1:]  # drop DC
    power = magnitude ** 2
    freqs = rfftfreq(n, d=1.0 / sample_rate_hz)[1:]

    energy = power.sum(axis=-1)
    zero = energy <= _ZERO_SPECTRUM_RTOL * n * n * np.mean(signals ** 2, axis=-1)
    dominant = np.argmax(magnitude, axis=-1)
    rows = np.arange(signals.shape[0])

    out = np.zeros((signals.shape[0], len(FREQUENCY_EXTRACTORS)))
    out[:, 0] = freqs[dominant]
    out[:, 1] = magnitude[rows, dominant]
    out[:, 2] = energy
    out[:, 3] = entropy(np.where(zero[:, None], 1.0, power), axis=-1)
    for b, (lo, hi) in enumerate(FREQUENCY_BANDS):
        in_band = (freqs >= lo) & (freqs < hi)
        out[:, 4 + b] = power[:, in_band].sum(axis=-1)
    out[zero] = 0.0
    return out


def frequency_features(channel, sample_rate_hz: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """Dominant frequency (Hz), its magnitude, energy without DC, spectral
    entropy, and band energies in [0,1), [1,3), [3,6), [6,10) Hz."""
    arr = np.asarray(channel, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("frequency features of an empty signal")
    return _frequency_block(arr[None, :], sample_rate_hz)[0]


def _channel_block(derived: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """All 40 extractors for every derived channel: (channels, extractors)."""
    n_ch = derived.shape[0]
    levels = np.array(PERCENTILE_LEVELS, dtype=np.float64)
    block = np.empty((n_ch, len(EXTRACTORS)))

    pct = np.percentile(derived, levels, axis=-1, method="linear").T  # (ch, 4)
    block[:, 0] = np.std(derived, axis=-1)
    block[:, 1] = np.min(derived, axis=-1)
    block[:, 2] = np.max(derived, axis=-1)
    block[:, 3] = np.median(derived, axis=-1)
    block[:, 4:8] = pct

    v = derived[:, None, :]  # (ch, 1, n)
    t = pct[:, :, None]      # (ch, 4, 1)
    above = v > t
    below = v < t
    crossings = _crossings(np.sign(v - t))
    aggregates = np.stack([
        np.where(above, v, 0.0).sum(axis=-1),
        np.where(below, v, 0.0).sum(axis=-1),
        np.where(above, v ** 2, 0.0).sum(axis=-1),
        np.where(below, v ** 2, 0.0).sum(axis=-1),
        crossings,
        crossings,
    ], axis=-1)  # (ch, 4 levels, 6 kinds)
    n_agg = len(PERCENTILE_LEVELS) * len(AGGREGATE_KINDS)
    block[:, 8:8 + n_agg] = aggregates.reshape(n_ch, n_agg)
    block[:, 8 + n_agg:] = _frequency_block(derived, sample_rate_hz)
    return block


def extract_features(window, catalog: FeatureCatalog,
                     sample_rate_hz: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """One FeatureMatrix row, in catalog order."""
    block = _channel_block(derive_signals(window), sample_rate_hz)
    vector = catalog.select(block)
    bad = np.flatnonzero(~np.isfinite(vector))
    if bad.size:
        raise NonFiniteFeature(catalog.entries[bad[0]].name, vector[bad[0]])
    return vector


def build_feature_matrix(recording: RawRecording, catalog: FeatureCatalog,
                         spec: WindowSpec = WindowSpec()) -> FeatureMatrix:
    """Labeled feature rows of one recording; tie-labeled windows are dropped."""
    windows = [w for w in sliding_windows(recording, spec) if w.label is not None]
    dropped = window_count(len(recording), spec) - len(windows)
    if dropped:
        log.debug("%s/%s: dropped %d boundary windows with tied labels",
                  recording.subject_id, recording.body_position.value, dropped)
    if windows:
        values = np.vstack([extract_features(w, catalog, spec.sample_rate_hz)
                            for w in windows])
    else:
        values = np.empty((0, catalog.total_count))
    return FeatureMatrix(
        values=values,
        labels=np.array([w.label for w in windows], dtype=np.int64),
        subject_ids=np.full(len(windows), recording.subject_id, dtype=object),
        window_index=np.array([w.index for w in windows], dtype=np.int64),
        columns=catalog.names,
    )
