"""Tests for harlearn.features: windowing, extractors, catalog."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harlearn.dataset import BodyPosition, RawRecording
from harlearn.errors import EmptyInput, RecordingTooShort
from harlearn.features import (
    BASIC_EXTRACTORS,
    CHANNEL_NAMES,
    EXTRACTORS,
    FREQUENCY_EXTRACTORS,
    PERCENTILE_LEVELS,
    build_catalog,
    build_feature_matrix,
    derive_signals,
    extract_features,
    frequency_features,
    percentile,
    percentile_aggregates,
    sliding_windows,
    window_count,
)

FS = 50.0
N = 210
SQUARE_SUM_CHANNELS = ("acc_xy", "acc_xz", "acc_yz", "gyro_xy", "gyro_xz", "gyro_yz")


def _recording(n, labels=None, seed=0):
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = np.zeros(n, dtype=np.int64)
    return RawRecording("s1", BodyPosition.WAIST, rng.normal(size=(n, 6)), labels)


def _sine(k, amplitude=1.0, n=N):
    t = np.arange(n)
    return amplitude * np.sin(2 * np.pi * k * t / n)


# ---------------------------------------------------------------------------
# Naive reference implementation
# ---------------------------------------------------------------------------

def _naive_percentile(values, p):
    s = sorted(values)
    pos = p / 100.0 * (len(s) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def _naive_crossings(values, t):
    count, prev = 0, 0
    for v in values:
        sign = (v > t) - (v < t)
        if sign == 0:
            continue
        if prev and sign != prev:
            count += 1
        prev = sign
    return count


def _naive_frequency(x):
    n = len(x)
    centred = np.asarray(x) - np.mean(x)
    k = np.arange(n // 2 + 1)
    dft = np.exp(-2j * np.pi * np.outer(k, np.arange(n)) / n) @ centred
    mag = np.abs(dft)[1:]
    power = mag ** 2
    freqs = np.fft.rfftfreq(n, d=1.0 / FS)[1:]
    dom = int(np.argmax(mag))
    total = power.sum()
    prob = power / total
    ent = -sum(q * math.log(q) for q in prob if q > 0)
    bands = [power[(freqs >= lo) & (freqs < hi)].sum()
             for lo, hi in ((0, 1), (1, 3), (3, 6), (6, 10))]
    return [freqs[dom], mag[dom], total, ent] + bands


def _naive_channel(x):
    x = list(map(float, x))
    mean = sum(x) / len(x)
    std = math.sqrt(sum((v - mean) ** 2 for v in x) / len(x))
    out = [std, min(x), max(x), _naive_percentile(x, 50)]
    out += [_naive_percentile(x, p) for p in (10, 25, 75, 90)]
    for p in (10, 25, 75, 90):
        t = _naive_percentile(x, p)
        above = [v for v in x if v > t]
        below = [v for v in x if v < t]
        c = _naive_crossings(x, t)
        out += [sum(above), sum(below), sum(v * v for v in above),
                sum(v * v for v in below), c, c]
    return out + _naive_frequency(x)


def _naive_window(samples):
    ax, ay, az, gx, gy, gz = samples.T
    channels = [ax, ay, az, gx, gy, gz,
                np.sqrt(ax ** 2 + ay ** 2 + az ** 2), np.sqrt(gx ** 2 + gy ** 2 + gz ** 2),
                ax ** 2 + ay ** 2, ax ** 2 + az ** 2, ay ** 2 + az ** 2,
                gx ** 2 + gy ** 2, gx ** 2 + gz ** 2, gy ** 2 + gz ** 2]
    return np.concatenate([_naive_channel(ch) for ch in channels])


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

class TestWindowing:
    @pytest.mark.parametrize("n, expected", [(3000, 40), (210, 1), (209, 0), (280, 2)])
    def test_window_count(self, n, expected):
        assert window_count(n) == expected

    def test_too_short_recording(self):
        with pytest.raises(RecordingTooShort):
            sliding_windows(_recording(209))

    def test_windows_stay_inside_recording(self):
        windows = sliding_windows(_recording(3000))
        assert len(windows) == 40
        for i, w in enumerate(windows):
            assert w.index == i
            assert w.start == 70 * i
            assert w.samples.shape == (210, 6)
            assert w.start + 210 <= 3000

    def test_tie_windows_are_dropped(self):
        labels = np.array([0] * 175 + [1] * 105)
        fm = build_feature_matrix(_recording(280, labels), build_catalog())
        assert fm.window_index.tolist() == [0]
        assert fm.labels.tolist() == [0]
        assert fm.values.shape == (1, 560)


class TestDeriveSignals:
    def test_derived_channels(self):
        derived = derive_signals(np.array([[3.0, 4.0, 0.0, 1.0, 2.0, 2.0]]))
        assert derived.shape == (14, 1)
        np.testing.assert_allclose(
            derived[:, 0], [3, 4, 0, 1, 2, 2, 5, 3, 25, 9, 16, 5, 5, 8])


# ---------------------------------------------------------------------------
# Extractors
# ---------------------------------------------------------------------------

class TestPercentile:
    def test_linear_interpolation(self):
        values = np.arange(1, 11)
        assert percentile(values, 25) == pytest.approx(3.25)
        assert percentile(values, 50) == pytest.approx(5.5)
        assert percentile(values, 100) == 10

    def test_empty(self):
        with pytest.raises(EmptyInput):
            percentile([], 50)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
           st.sampled_from([10, 25, 50, 75, 90]))
    def test_matches_naive(self, values, p):
        assert percentile(values, p) == pytest.approx(_naive_percentile(values, p),
                                                      rel=1e-9, abs=1e-6)


class TestPercentileAggregates:
    def test_alternating_signal(self):
        agg = percentile_aggregates([0, 2, 0, 2, 0], 50, threshold=1.0)
        assert agg.sum_above == 4
        assert agg.sum_below == 0
        assert agg.sqsum_above == 8
        assert agg.cross_above == agg.cross_below == 4

    def test_constant_signal(self):
        agg = percentile_aggregates([5.0] * 20, 75)
        assert agg == (0.0, 0.0, 0.0, 0.0, 0, 0)

    def test_threshold_outside_sample(self):
        agg = percentile_aggregates([1.0, 2.0, 3.0], 50, threshold=10.0)
        assert agg.sum_above == 0
        assert agg.sum_below == 6
        assert agg.cross_above == 0

    def test_equal_samples_carry_previous_sign(self):
        assert percentile_aggregates([1, 0, -1], 50, threshold=0.0).cross_above == 1
        assert percentile_aggregates([1, 0, 1], 50, threshold=0.0).cross_above == 0
        assert percentile_aggregates([0, 0, 1, 0, -1], 50, threshold=0.0).cross_above == 1


class TestFrequencyFeatures:
    def test_on_bin_sine(self):
        feats = dict(zip(FREQUENCY_EXTRACTORS, frequency_features(_sine(21))))
        assert feats["dominant_freq"] == pytest.approx(5.0)
        assert feats["dominant_mag"] == pytest.approx(105.0)
        assert feats["band_3_6"] == pytest.approx(feats["spectral_energy"])
        assert feats["spectral_entropy"] == pytest.approx(0.0, abs=1e-9)

    def test_band_energy_ratio(self):
        feats = dict(zip(FREQUENCY_EXTRACTORS, frequency_features(_sine(8) + _sine(34, 2.0))))
        assert feats["band_1_3"] / feats["band_6_10"] == pytest.approx(0.25, rel=0.05)
        assert feats["dominant_freq"] == pytest.approx(34 * FS / N)

    def test_constant_is_all_zero(self):
        np.testing.assert_array_equal(frequency_features(np.full(N, 7.3)), 0.0)


class TestExtractFeatures:
    def test_catalog_size(self):
        catalog = build_catalog()
        assert catalog.total_count == len(CHANNEL_NAMES) * len(EXTRACTORS) == 560
        assert catalog.names[0] == "acc_x__std"
        assert len(set(catalog.names)) == 560
        frame = catalog.to_frame()
        assert list(frame.columns) == ["feature_index", "feature_name", "channel", "extractor"]

    def test_constant_window(self):
        catalog = build_catalog()
        row = dict(zip(catalog.names, extract_features(np.full((N, 6), 3.0), catalog)))
        assert row["acc_x__std"] == 0
        assert row["acc_x__min"] == row["acc_x__max"] == row["acc_x__median"] == 3.0
        assert row["acc_xy__p90"] == pytest.approx(18.0)
        for name in FREQUENCY_EXTRACTORS:
            assert row[f"acc_mag__{name}"] == 0.0
        assert row["gyro_z__cross_above_p25"] == 0

    def test_matches_naive_reference(self):
        catalog = build_catalog()
        rng = np.random.default_rng(2024)
        for _ in range(100):
            samples = rng.normal(0.0, 2.0, size=(N, 6))
            np.testing.assert_allclose(extract_features(samples, catalog),
                                       _naive_window(samples), rtol=1e-9, atol=1e-9)

    def test_time_domain_stats_ignore_sample_order(self):
        catalog = build_catalog()
        rng = np.random.default_rng(8)
        samples = rng.normal(0.0, 0.05, size=(N, 6))
        samples[:, 0] += _sine(3, 2.0)
        shuffled = samples[rng.permutation(N)]
        row = dict(zip(catalog.names, extract_features(samples, catalog)))
        mixed = dict(zip(catalog.names, extract_features(shuffled, catalog)))
        for name in catalog.names:
            extractor = name.split("__")[1]
            if extractor.startswith("cross_") or extractor in FREQUENCY_EXTRACTORS:
                continue
            assert mixed[name] == pytest.approx(row[name], rel=1e-9, abs=1e-9), name

    def test_crossings_and_spectrum_depend_on_order(self):
        catalog = build_catalog(channels=("acc_x",))
        rng = np.random.default_rng(8)
        samples = rng.normal(0.0, 0.05, size=(N, 6))
        samples[:, 0] += _sine(3, 2.0)
        row = dict(zip(catalog.names, extract_features(samples, catalog)))
        mixed = dict(zip(catalog.names,
                         extract_features(samples[rng.permutation(N)], catalog)))
        assert mixed["acc_x__cross_above_p25"] > 3 * row["acc_x__cross_above_p25"]
        assert mixed["acc_x__cross_below_p75"] > 3 * row["acc_x__cross_below_p75"]
        assert row["acc_x__dominant_freq"] == pytest.approx(3 * FS / N)
        assert mixed["acc_x__dominant_mag"] < 0.5 * row["acc_x__dominant_mag"]
        assert mixed["acc_x__spectral_entropy"] > row["acc_x__spectral_entropy"] + 1.0

    @pytest.mark.parametrize("scale", [0.5, 2.0, 4.0])
    def test_scaling_equivariance(self, scale):
        # power of the scale factor each extractor picks up on a linear channel
        degree = {name: 1 for name in BASIC_EXTRACTORS}
        for p in PERCENTILE_LEVELS:
            degree.update({f"sum_above_p{p}": 1, f"sum_below_p{p}": 1,
                           f"sqsum_above_p{p}": 2, f"sqsum_below_p{p}": 2,
                           f"cross_above_p{p}": 0, f"cross_below_p{p}": 0})
        degree.update({"dominant_freq": 0, "dominant_mag": 1, "spectral_energy": 2,
                       "spectral_entropy": 0})
        degree.update({name: 2 for name in FREQUENCY_EXTRACTORS[4:]})
        assert set(degree) == set(EXTRACTORS)

        catalog = build_catalog()
        samples = np.random.default_rng(31).normal(0.0, 2.0, size=(N, 6))
        row = dict(zip(catalog.names, extract_features(samples, catalog)))
        scaled = dict(zip(catalog.names, extract_features(scale * samples, catalog)))
        for name in catalog.names:
            channel, extractor = name.split("__")
            # pairwise square sums are quadratic in the samples
            order = 2 if channel in SQUARE_SUM_CHANNELS else 1
            expected = row[name] * scale ** (order * degree[extractor])
            assert scaled[name] == pytest.approx(expected, rel=1e-9, abs=1e-9), name

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_features_are_finite(self, seed):
        samples = np.random.default_rng(seed).normal(size=(N, 6))
        assert np.isfinite(extract_features(samples, build_catalog())).all()

    def test_sub_catalog_keeps_order(self):
        full = build_catalog()
        sub = build_catalog(channels=("gyro_mag",), extractors=("max", "dominant_freq"))
        samples = np.random.default_rng(1).normal(size=(N, 6))
        full_row = dict(zip(full.names, extract_features(samples, full)))
        np.testing.assert_allclose(extract_features(samples, sub),
                                   [full_row["gyro_mag__max"],
                                    full_row["gyro_mag__dominant_freq"]])
