"""Tests for harlearn.synth: the synthetic dataset writer."""

import numpy as np

from harlearn.dataset import ActivityClass, BodyPosition, DatasetManifest, load_dataset
from harlearn.features import build_catalog, frequency_features
from harlearn.harness import prepare_features
from harlearn.synth import (
    MANIFEST_NAME,
    SynthConfig,
    synth_manifest,
    synth_recording,
    write_synthetic_dataset,
)

SMALL = SynthConfig(n_subjects=3, segment_seconds=10.0, seed=5)


class TestSynthRecording:
    def test_all_activities_in_contiguous_segments(self):
        rec = synth_recording(0, "waist", SMALL)
        assert len(rec) == 7 * 500
        segments = rec.labels.reshape(7, 500)
        assert np.all(segments == segments[:, :1])
        assert sorted(segments[:, 0].tolist()) == list(range(7))

    def test_rotated_subject_is_flipped(self):
        config = SynthConfig(n_subjects=10, segment_seconds=5.0)
        plain = SynthConfig(n_subjects=10, segment_seconds=5.0, rotated_subjects=())
        rotated = synth_recording(9, BodyPosition.WAIST, config).samples
        upright = synth_recording(9, BodyPosition.WAIST, plain).samples
        np.testing.assert_allclose(rotated[:, 0], upright[:, 0], atol=1e-9)
        np.testing.assert_allclose(rotated[:, 1:3], -upright[:, 1:3], atol=1e-9)

    def test_subjects_differ(self):
        a = synth_recording(0, "arm", SMALL).samples
        b = synth_recording(1, "arm", SMALL).samples
        assert not np.allclose(a, b)

    def test_styles_spread_tempo_and_amplitude(self):
        config = SynthConfig(n_subjects=9, segment_seconds=10.0, seed=2, rotated_subjects=())
        tempos, spreads = [], []
        for i in range(config.n_subjects):
            rec = synth_recording(i, BodyPosition.WAIST, config)
            walking = rec.samples[rec.labels == ActivityClass.WALKING.code, 0]
            tempos.append(frequency_features(walking)[0])
            spreads.append(walking.std())
        assert max(tempos) - min(tempos) > 0.15
        assert max(spreads) / min(spreads) > 1.3


class TestSynthManifest:
    def test_rotated_subject_is_excluded(self):
        manifest = synth_manifest(SynthConfig())
        assert manifest.included_subjects == tuple(f"s{i}" for i in range(1, 10))
        assert manifest.excluded_subjects == (("s10", "rotated phone orientation"),)


class TestWriteSyntheticDataset:
    def test_deterministic_files(self, tmp_path):
        write_synthetic_dataset(tmp_path / "a", SMALL)
        write_synthetic_dataset(tmp_path / "b", SMALL)
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert len(names) == 3 * 3 + 1
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_loads_into_features(self, tmp_path):
        write_synthetic_dataset(tmp_path, SMALL)
        manifest = DatasetManifest.load(tmp_path / MANIFEST_NAME)
        recordings = load_dataset(tmp_path, manifest, positions=["wrist"], workers=2)
        assert len(recordings) == 3
        matrices = prepare_features(recordings, build_catalog(), workers=2)
        for fm in matrices.values():
            assert fm.values.shape[1] == 560
            assert np.all(fm.class_counts() >= 3)
