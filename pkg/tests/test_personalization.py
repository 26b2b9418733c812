"""Tests for harlearn.personalization: labeling strategies and step updates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_subject_features
from harlearn.classifiers import BaseKind
from harlearn.ensemble import (
    BaseModel,
    EnsembleModel,
    SkippedModel,
    ensemble_predict,
    train_chunk_models,
)
from harlearn.errors import ConfigError, EmptyChunk, EmptyEnsemble
from harlearn.personalization import (
    LabelingStrategy,
    LabelSource,
    Oracle,
    QueryStats,
    StrategyKind,
    label_chunk,
    personalize_step,
)


class FirstColumnModel:
    """Two-class model whose posterior is (x0, 1 - x0)."""

    classes = (0, 1)
    n_features = 1

    def posterior(self, X):
        return np.column_stack([X[:, 0], 1.0 - X[:, 0]])


def _stub_ensemble():
    base = BaseModel(kind=BaseKind.LDA, model=FirstColumnModel(), feature_indices=(0,),
                     seed=0, sample_size=0, validation_score=1.0)
    return EnsembleModel(class_list=(0, 1)).append(base)


def _label(x, truth, strategy):
    rows = np.asarray(x, dtype=np.float64)[:, None]
    return label_chunk(_stub_ensemble(), rows, strategy, Oracle(truth))


SEMI = LabelingStrategy.semi_supervised
NONSUP = LabelingStrategy.non_supervised()
SUP = LabelingStrategy.supervised()

chunk_inputs = st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
))


class TestLabelingStrategy:
    def test_labels(self):
        assert SEMI(0.9).label == "semi_0.90"
        assert NONSUP.label == "nonsup"
        assert SUP.label == "sup"

    def test_validation(self):
        with pytest.raises(ConfigError):
            SEMI(-0.1)
        with pytest.raises(ConfigError):
            LabelingStrategy(StrategyKind.SUPERVISED, 0.5)
        with pytest.raises(ConfigError):
            LabelingStrategy("semi")


class TestQueryStats:
    def test_fractions_and_sum(self):
        total = QueryStats(30, 1, 5, 10) + QueryStats(10, 3, 5, 0)
        assert total == QueryStats(40, 4, 10, 10)
        assert total.queried_fraction == pytest.approx(0.1)
        assert total.replaced_fraction == pytest.approx(0.25)
        assert QueryStats(0, 0, 0).queried_fraction == 0.0


class TestLabelChunk:
    def test_single_query_propagates(self):
        x = np.ones(30)
        x[10] = 0.5
        truth = np.ones(30, dtype=int)
        chunk, stats = _label(x, truth, SEMI(0.9))
        assert (stats.n_queried, stats.n_replaced) == (1, 5)
        assert stats.queried_fraction == pytest.approx(1 / 30)
        assert stats.replaced_fraction == pytest.approx(5 / 30)
        assert stats.n_certain == 29
        assert chunk.source[10] is LabelSource.USER_QUERY
        assert [chunk.source[i] for i in (8, 9, 11, 12)] == [LabelSource.USER_PROPAGATED] * 4
        assert chunk.labels.tolist() == [0] * 8 + [1] * 5 + [0] * 17

    def test_propagation_clipped_at_edges(self):
        x = np.ones(6)
        x[0] = 0.6
        chunk, stats = _label(x, np.ones(6, dtype=int), SEMI(0.9))
        assert chunk.labels.tolist() == [1, 1, 1, 0, 0, 0]
        assert stats.n_replaced == 3

    def test_propagated_rows_are_not_queried(self):
        x = np.full(5, 0.6)
        chunk, stats = _label(x, [1, 1, 0, 0, 0], SEMI(0.9))
        assert stats.n_queried == 2  # rows 0 and 3
        assert chunk.labels.tolist() == [1, 1, 1, 0, 0]
        assert chunk.source[3] is LabelSource.USER_QUERY
        assert chunk.source[2] is LabelSource.USER_PROPAGATED

    def test_supervised_and_non_supervised(self):
        x = np.linspace(0.0, 1.0, 12)
        truth = np.arange(12) % 2
        sup, sup_stats = _label(x, truth, SUP)
        assert sup.labels.tolist() == truth.tolist()
        assert (sup_stats.queried_fraction, sup_stats.replaced_fraction) == (1.0, 1.0)
        non, non_stats = _label(x, truth, NONSUP)
        assert non.labels.tolist() == non.predicted.tolist()
        assert (non_stats.queried_fraction, non_stats.replaced_fraction) == (0.0, 0.0)

    def test_zero_threshold_equals_non_supervised(self):
        x = np.random.default_rng(0).uniform(size=25)
        truth = np.arange(25) % 2
        semi, stats = _label(x, truth, SEMI(0.0))
        non, _ = _label(x, truth, NONSUP)
        assert stats.n_queried == 0
        assert semi.labels.tolist() == non.labels.tolist()

    def test_high_threshold_on_aligned_runs_equals_supervised(self):
        truth = np.repeat([0, 1, 1, 0, 1], 3)
        x = np.random.default_rng(1).uniform(size=15)
        semi, stats = _label(x, truth, SEMI(1.5))
        sup, _ = _label(x, truth, SUP)
        assert semi.labels.tolist() == sup.labels.tolist()
        assert stats.n_queried == 5

    @settings(max_examples=200, deadline=None)
    @given(chunk_inputs)
    def test_high_threshold_differs_only_near_boundaries(self, data):
        x, truth = data
        truth = np.asarray(truth)
        semi, stats = _label(x, truth, SEMI(1.01))
        assert stats.n_queried == -(-len(x) // 3)
        for i in np.flatnonzero(semi.labels != truth):
            window = truth[max(0, i - 2):i + 3]
            assert window.min() != window.max()

    @settings(max_examples=200, deadline=None)
    @given(chunk_inputs, st.floats(0.0, 1.2))
    def test_propagation_is_local_and_counted(self, data, threshold):
        x, truth = data
        truth = np.asarray(truth)
        chunk, stats = _label(x, truth, SEMI(threshold))
        source = np.array([s.value for s in chunk.source])
        queried = np.flatnonzero(source == LabelSource.USER_QUERY.value)

        assert stats.n_queried == len(queried)
        assert stats.n_replaced == np.count_nonzero(source != LabelSource.PREDICTED.value)
        assert stats.n_replaced <= 5 * stats.n_queried
        for i in range(len(x)):
            if source[i] == LabelSource.PREDICTED.value:
                assert chunk.labels[i] == chunk.predicted[i]
                assert chunk.confidences[i] >= threshold
            elif source[i] == LabelSource.USER_QUERY.value:
                assert chunk.labels[i] == truth[i]
                assert chunk.confidences[i] < threshold
            else:
                near = queried[np.abs(queried - i) <= 2]
                assert chunk.labels[i] in truth[near]

    def test_errors(self):
        with pytest.raises(EmptyChunk):
            label_chunk(_stub_ensemble(), np.empty((0, 1)), NONSUP, Oracle([]))
        with pytest.raises(EmptyEnsemble):
            label_chunk(EnsembleModel(), np.ones((3, 1)), NONSUP, Oracle([0, 0, 0]))
        with pytest.raises(ValueError):
            label_chunk(_stub_ensemble(), np.ones((3, 1)), NONSUP, Oracle([0, 0]))


class TestPersonalizeStep:
    def test_grows_by_three_from_pre_update_labels(self, fast_recipe):
        first = make_subject_features("s1", seed=0)
        chunk = make_subject_features("s2", seed=1, offset=0.2)
        ens = train_chunk_models(EnsembleModel(), first.values, first.labels,
                                 fast_recipe, BaseKind.LDA)
        before = ensemble_predict(ens, chunk)
        frozen = [b.to_dict() for b in ens.base_models]
        seen = []
        result = personalize_step(ens, chunk, SEMI(0.9), Oracle(chunk.labels), fast_recipe,
                                  BaseKind.LDA, step="chunk_1",
                                  on_model=lambda e, o: seen.append((len(e), o)))
        assert len(ens) == 3
        assert len(result.ensemble) == 6
        assert [n for n, _ in seen] == [4, 5, 6]
        assert not any(isinstance(o, SkippedModel) for _, o in seen)
        assert result.ensemble.base_models[:3] == ens.base_models
        assert [b.to_dict() for b in result.ensemble.base_models[:3]] == frozen
        assert [b.to_dict() for b in ens.base_models] == frozen
        np.testing.assert_array_equal(result.labeled.predicted, before.predicted)
        assert result.stats.n_rows == len(chunk)

    def test_supervised_step_trains_on_ground_truth(self, fast_recipe):
        first = make_subject_features("s1", seed=0)
        chunk = make_subject_features("s2", seed=1)
        ens = train_chunk_models(EnsembleModel(), first.values, first.labels,
                                 fast_recipe, BaseKind.CART)
        result = personalize_step(ens, chunk, SUP, Oracle(chunk.labels), fast_recipe,
                                  BaseKind.CART)
        np.testing.assert_array_equal(result.labeled.labels, chunk.labels)
        assert result.stats.queried_fraction == 1.0
