"""
Synthetic inertial dataset for demos and tests without the real recordings.

Every subject performs the seven activities once each, as contiguous
segments in a subject-specific order.  An activity is a periodic
accelerometer/gyroscope pattern (step tempo, amplitude, harmonics) on top
of a gravity vector that depends on the body position and on the
activity's posture.  Subjects differ in overall tempo, amplitude, axis
gains and posture, and each subject also shifts the tempo and tilt of
every activity on its own, so class boundaries learned on other subjects
only partly fit a new one.  The last subject wears the phone rotated and
is marked ``exclude:`` in the generated manifest.

Output is deterministic for a given ``SynthConfig``.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from harlearn.config import SAMPLE_RATE_HZ
from harlearn.dataset import (
    ACTIVITY_CLASSES,
    CSV_COLUMNS,
    ActivityClass,
    BodyPosition,
    DatasetManifest,
    RawRecording,
    recording_path,
)
from harlearn.logutil import get_logger

log = get_logger("synth")

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
GRAVITY = 9.81
MANIFEST_NAME = "manifest.json"

# (tempo Hz, acc amplitude m/s^2, gyro amplitude rad/s, second-harmonic ratio)
ACTIVITY_SIGNATURES = {
    ActivityClass.WALKING: (1.8, 3.0, 1.2, 0.30),
    ActivityClass.SITTING: (0.0, 0.0, 0.0, 0.0),
    ActivityClass.STANDING: (0.0, 0.0, 0.0, 0.0),
    ActivityClass.JOGGING: (2.7, 8.0, 2.5, 0.45),
    ActivityClass.BIKING: (1.2, 1.5, 2.0, 0.10),
    ActivityClass.UPSTAIRS: (1.5, 2.4, 1.0, 0.60),
    ActivityClass.DOWNSTAIRS: (1.9, 4.2, 1.4, 0.55),
}

# Posture tilt (degrees about x, y) of the gravity vector per activity.
ACTIVITY_TILT = {
    ActivityClass.WALKING: (0.0, 5.0),
    ActivityClass.SITTING: (60.0, 20.0),
    ActivityClass.STANDING: (0.0, 0.0),
    ActivityClass.JOGGING: (5.0, 10.0),
    ActivityClass.BIKING: (45.0, 30.0),
    ActivityClass.UPSTAIRS: (-10.0, 15.0),
    ActivityClass.DOWNSTAIRS: (10.0, -10.0),
}

POSITION_AMPLITUDE = {BodyPosition.ARM: 0.8, BodyPosition.WAIST: 1.0,
                      BodyPosition.WRIST: 1.3}
POSITION_MOUNT = {BodyPosition.ARM: (0.0, 90.0, 0.0),
                  BodyPosition.WAIST: (0.0, 0.0, 0.0),
                  BodyPosition.WRIST: (90.0, 0.0, 30.0)}


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 10
    segment_seconds: float = 60.0
    noise_scale: float = 0.3
    seed: int = 0
    rotated_subjects: tuple = ("s10",)
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ValueError("need at least two subjects")
        if self.segment_seconds <= 0:
            raise ValueError("segment_seconds must be positive")

    @property
    def subjects(self) -> tuple:
        return tuple(f"s{i + 1}" for i in range(self.n_subjects))

    @property
    def segment_samples(self) -> int:
        return int(round(self.segment_seconds * self.sample_rate_hz))


def _rng(config: SynthConfig, *keys) -> np.random.Generator:
    return np.random.default_rng([config.seed, *keys])


def _subject_style(config: SynthConfig, subject_index: int) -> dict:
    """Per-subject tempo, amplitude, axis gains and posture offsets, plus a
    per-activity tempo factor and tilt on top of them."""
    rng = _rng(config, subject_index, 99)
    n = len(ACTIVITY_CLASSES)
    return {
        "tempo": rng.uniform(0.75, 1.3),
        "amplitude": rng.uniform(0.6, 1.5),
        "axis_gain": rng.uniform(0.6, 1.4, size=3),
        "tilt": rng.normal(0.0, 15.0, size=2),
        "activity_tempo": rng.uniform(0.85, 1.15, size=n),
        "activity_tilt": rng.normal(0.0, 10.0, size=(n, 2)),
        "order": rng.permutation(n),
    }


def _segment(activity: ActivityClass, position: BodyPosition, style: dict,
             n: int, rate: int, rng: np.random.Generator) -> np.ndarray:
    tempo, acc_amp, gyro_amp, harmonic = ACTIVITY_SIGNATURES[activity]
    tilt_x, tilt_y = (np.add(ACTIVITY_TILT[activity], style["tilt"])
                      + style["activity_tilt"][activity.code])
    gravity = Rotation.from_euler("xy", [tilt_x, tilt_y], degrees=True).apply(
        [0.0, 0.0, GRAVITY])

    t = np.arange(n) / rate
    freq = tempo * style["tempo"] * style["activity_tempo"][activity.code]
    phase = rng.uniform(0, 2 * np.pi, size=6)
    scale = POSITION_AMPLITUDE[position] * style["amplitude"]
    out = np.empty((n, 6))
    for axis in range(3):
        weight = (1.0, 0.6, 0.4)[axis] * style["axis_gain"][axis]
        wave = (np.sin(2 * np.pi * freq * t + phase[axis])
                + harmonic * np.sin(4 * np.pi * freq * t + 2 * phase[axis]))
        out[:, axis] = gravity[axis] + scale * acc_amp * weight * wave
        gyro_wave = np.cos(2 * np.pi * freq * t + phase[axis + 3])
        out[:, axis + 3] = scale * gyro_amp * (0.5, 1.0, 0.7)[axis] * gyro_wave
    out[:, :3] += rng.normal(0.0, style["noise"], size=(n, 3))
    out[:, 3:] += rng.normal(0.0, style["noise"] / 6.0, size=(n, 3))
    return out


def synth_recording(subject_index: int, position, config: SynthConfig = SynthConfig()
                    ) -> RawRecording:
    """One subject's recording at one body position (all seven activities)."""
    position = BodyPosition(position)
    subject = config.subjects[subject_index]
    style = dict(_subject_style(config, subject_index), noise=config.noise_scale)
    rng = _rng(config, subject_index, list(BodyPosition).index(position))
    n = config.segment_samples

    segments, labels = [], []
    for code in style["order"]:
        activity = ACTIVITY_CLASSES[code]
        segments.append(_segment(activity, position, style, n, config.sample_rate_hz, rng))
        labels.append(np.full(n, code, dtype=np.int64))
    samples = np.vstack(segments)

    mount = Rotation.from_euler("xyz", POSITION_MOUNT[position], degrees=True)
    if subject in config.rotated_subjects:
        mount = Rotation.from_euler("x", 180.0, degrees=True) * mount
    samples = np.hstack([mount.apply(samples[:, :3]), mount.apply(samples[:, 3:])])
    return RawRecording(subject_id=subject, body_position=position, samples=samples,
                        labels=np.concatenate(labels), sample_rate_hz=config.sample_rate_hz)


def recording_frame(recording: RawRecording) -> pd.DataFrame:
    """The recording in the CSV input schema."""
    n = len(recording)
    frame = pd.DataFrame(recording.samples, columns=list(CSV_COLUMNS[1:7]))
    frame.insert(0, "timestamp_ms",
                 (np.arange(n) * 1000 // recording.sample_rate_hz).astype(np.int64))
    frame["activity"] = [ACTIVITY_CLASSES[c].value for c in recording.labels]
    return frame


def synth_manifest(config: SynthConfig = SynthConfig()) -> DatasetManifest:
    mapping = {s: ("exclude:rotated phone orientation" if s in config.rotated_subjects
                   else "include")
               for s in config.subjects}
    mapping["positions"] = [p.value for p in BodyPosition]
    return DatasetManifest.from_mapping(mapping)


def write_synthetic_dataset(out_dir, config: SynthConfig = SynthConfig()
                            ) -> DatasetManifest:
    """Write every (subject, position) CSV plus ``manifest.json``."""
    os.makedirs(out_dir, exist_ok=True)
    for i, subject in enumerate(config.subjects):
        for position in BodyPosition:
            frame = recording_frame(synth_recording(i, position, config))
            frame.to_csv(recording_path(out_dir, subject, position), index=False,
                         float_format="%.6f", lineterminator="\n")
    manifest = synth_manifest(config)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8",
              newline="\n") as f:
        json.dump(manifest.to_mapping(), f, indent=2, sort_keys=True)
        f.write("\n")
    log.info("Synthetic dataset: %d subjects x %d positions, %.0f s per activity -> %s",
             config.n_subjects, len(BodyPosition), config.segment_seconds, out_dir)
    return manifest
