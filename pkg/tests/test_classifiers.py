"""Tests for harlearn.classifiers: LDA, QDA, CART and model serialisation."""

import json

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from harlearn.classifiers import (
    BaseKind,
    gini,
    model_from_dict,
    model_to_dict,
    predict_posterior,
    presort,
    train_cart,
    train_lda,
    train_model,
    train_qda,
)
from harlearn.config import ClassifierParams
from harlearn.errors import (
    DegenerateClass,
    DimensionMismatch,
    ModelFormatError,
    SingularCovariance,
)


def _blobs(rng, n_per_class=40, d=3, k=3, spread=3.0):
    means = rng.normal(0.0, spread, size=(k, d))
    X = np.vstack([rng.normal(means[c], 1.0, size=(n_per_class, d)) for c in range(k)])
    y = np.repeat(np.arange(k), n_per_class)
    return X, y


def _oracle_posterior(x, priors, means, covs):
    dens = np.array([p * multivariate_normal(m, c).pdf(x)
                     for p, m, c in zip(priors, means, covs)])
    return dens / dens.sum()


# ---------------------------------------------------------------------------
# Gaussian models
# ---------------------------------------------------------------------------

class TestLda:
    def test_midpoint_is_undecided(self):
        X = np.array([[-1.5], [-0.5], [0.5], [1.5]])
        model = train_lda(X, [0, 0, 1, 1])
        assert predict_posterior(model, [0.0]) == pytest.approx([0.5, 0.5])

    def test_priors_shift_the_midpoint(self):
        X = np.array([[-1.5], [-0.5]] * 3 + [[0.5], [1.5]])
        model = train_lda(X, [0] * 6 + [1] * 2)
        np.testing.assert_allclose(model.priors, [0.75, 0.25])
        assert predict_posterior(model, [0.0])[0] == pytest.approx(0.75)

    def test_matches_gaussian_oracle(self, rng):
        X, y = _blobs(rng)
        model = train_lda(X, y, shrinkage=0.0)
        means = np.array([X[y == c].mean(axis=0) for c in range(3)])
        scatter = sum((X[y == c] - means[c]).T @ (X[y == c] - means[c]) for c in range(3))
        pooled = scatter / (len(X) - 3)
        np.testing.assert_allclose(model.means, means)
        np.testing.assert_allclose(model.covariances[0], pooled)
        for x in rng.normal(0.0, 3.0, size=(20, 3)):
            expected = _oracle_posterior(x, model.priors, means, [pooled] * 3)
            np.testing.assert_allclose(predict_posterior(model, x), expected, atol=1e-9)

    def test_constant_column_needs_shrinkage(self, rng):
        X, y = _blobs(rng, d=3)
        X[:, 2] = 5.0
        model = train_lda(X, y, shrinkage=0.1)
        assert np.all(np.linalg.eigvalsh(model.covariances[0]) > 0)
        assert np.isfinite(predict_posterior(model, X)).all()
        with pytest.raises(SingularCovariance):
            train_lda(X, y, shrinkage=0.0)

    def test_degenerate_class(self):
        with pytest.raises(DegenerateClass):
            train_lda(np.array([[0.0], [1.0], [2.0]]), [0, 0, 1])
        with pytest.raises(DegenerateClass):
            train_lda(np.array([[0.0], [1.0]]), [0, 0])


class TestQda:
    def test_unequal_variances(self):
        a = 1 / np.sqrt(2)
        X = np.array([[-a], [a], [-3 * a], [3 * a]])
        model = train_qda(X, [0, 0, 1, 1])
        np.testing.assert_allclose(model.covariances[:, 0, 0], [1.0, 9.0])
        assert predict_posterior(model, [0.0])[0] == pytest.approx(0.75)
        assert predict_posterior(model, [3.0])[1] > 0.9

    def test_matches_gaussian_oracle(self, rng):
        X, y = _blobs(rng)
        model = train_qda(X, y, shrinkage=0.0)
        covs = [np.cov(X[y == c].T) for c in range(3)]
        np.testing.assert_allclose(model.covariances, covs, atol=1e-12)
        for x in rng.normal(0.0, 3.0, size=(20, 3)):
            expected = _oracle_posterior(x, model.priors, model.means, covs)
            np.testing.assert_allclose(predict_posterior(model, x), expected, atol=1e-9)

    def test_equals_lda_for_shifted_classes(self, rng):
        base = rng.normal(size=(30, 2))
        X = np.vstack([base, base + [4.0, -2.0]])
        y = np.repeat([0, 1], 30)
        points = rng.normal(0.0, 3.0, size=(50, 2))
        np.testing.assert_allclose(predict_posterior(train_qda(X, y), points),
                                   predict_posterior(train_lda(X, y), points), atol=1e-10)

    def test_singular_class_scatter_is_shrunk(self, rng):
        # two rows in three dimensions give a rank-one scatter, a constant
        # column gives an exactly zero variance
        pair = rng.normal(size=(2, 3))
        flat = rng.normal(size=(12, 3))
        flat[:, 1] = -2.0
        X = np.vstack([pair, flat, rng.normal(4.0, 1.0, size=(12, 3))])
        y = np.repeat([0, 1, 2], [2, 12, 12])
        model = train_qda(X, y, shrinkage=0.1)
        for cov in model.covariances:
            np.testing.assert_allclose(cov, cov.T)
            assert np.all(np.linalg.eigvalsh(cov) > 0)
        proba = predict_posterior(model, rng.normal(0.0, 3.0, size=(40, 3)))
        assert np.isfinite(proba).all()
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)
        with pytest.raises(SingularCovariance):
            train_qda(X, y, shrinkage=0.0)


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------

class TestCart:
    def test_separable_split(self):
        X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
        tree = train_cart(X, [0, 0, 0, 1, 1, 1], laplace=False)
        assert tree.n_nodes == 3
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.0
        assert predict_posterior(tree, [-5.0]).tolist() == [1.0, 0.0]

    def test_laplace_smoothing(self):
        X = np.arange(16, dtype=np.float64)[:, None]
        y = [0] * 8 + [1] * 8
        tree = train_cart(X, y)
        np.testing.assert_allclose(predict_posterior(tree, [0.0]), [0.9, 0.1])
        np.testing.assert_allclose(predict_posterior(tree, [15.0]), [0.1, 0.9])

    def test_duplicate_columns_pick_lowest_index(self, rng):
        col = rng.normal(size=30)
        X = np.column_stack([col, col, col])
        tree = train_cart(X, (col > 0).astype(int))
        assert tree.feature[0] == 0

    def test_leaf_counts_match_routed_rows(self, rng):
        X = rng.integers(0, 5, size=(50, 3)).astype(np.float64)
        y = rng.integers(0, 3, size=50)
        tree = train_cart(X, y, max_depth=6, min_leaf_size=2)
        leaves = tree.apply(X)
        for leaf in np.unique(leaves):
            np.testing.assert_array_equal(
                np.bincount(y[leaves == leaf], minlength=3), tree.counts[leaf])
            assert tree.counts[leaf].sum() >= 2

        # walk the tree by hand
        for x, leaf in zip(X, leaves):
            node = 0
            while tree.feature[node] >= 0:
                node = (tree.left[node] if x[tree.feature[node]] <= tree.threshold[node]
                        else tree.right[node])
            assert node == leaf

    def test_splits_lower_weighted_impurity(self, rng):
        X = rng.normal(size=(80, 4))
        y = rng.integers(0, 4, size=80)
        tree = train_cart(X, y, max_depth=8, min_leaf_size=3)
        for node in np.flatnonzero(tree.feature >= 0):
            lc, rc = tree.counts[tree.left[node]], tree.counts[tree.right[node]]
            child = lc.sum() * gini(lc) + rc.sum() * gini(rc)
            assert child < tree.counts[node].sum() * gini(tree.counts[node])

    def test_deterministic(self, rng):
        X, y = _blobs(rng)
        a = train_cart(X, y, seed=1)
        b = train_cart(X, y, seed=1)
        assert model_to_dict(a) == model_to_dict(b)

    def test_presorted_columns_give_the_same_tree(self, rng):
        X = rng.integers(0, 6, size=(60, 4)).astype(np.float64)
        y = rng.integers(0, 3, size=60)
        order = presort(X)
        np.testing.assert_array_equal(order[[3, 1]], presort(X[:, [3, 1]]))
        plain = train_cart(X[:, [3, 1]], y, max_depth=5, min_leaf_size=2)
        shared = train_cart(X[:, [3, 1]], y, max_depth=5, min_leaf_size=2,
                            sorted_index=order[[3, 1]])
        assert model_to_dict(plain) == model_to_dict(shared)

    def test_sorted_index_shape_is_checked(self, rng):
        X, y = _blobs(rng)
        with pytest.raises(ValueError):
            train_cart(X, y, sorted_index=presort(X[:10]))

    @pytest.mark.parametrize("seed", range(5))
    def test_root_split_matches_exhaustive_search(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 5, size=(40, 3)).astype(np.float64)
        y = (X[:, seed % 3] + rng.integers(0, 2, size=40) > 2).astype(int) + (X[:, 0] > 3)
        min_leaf = 3
        k = int(y.max()) + 1
        best = None
        for j in range(X.shape[1]):
            values = np.unique(X[:, j])
            for lo, hi in zip(values[:-1], values[1:]):
                t = 0.5 * (lo + hi)
                go_left = X[:, j] <= t
                n_l, n_r = go_left.sum(), (~go_left).sum()
                if n_l < min_leaf or n_r < min_leaf:
                    continue
                lc = np.bincount(y[go_left], minlength=k)
                rc = np.bincount(y[~go_left], minlength=k)
                score = (n_l * gini(lc) + n_r * gini(rc)) / len(y)
                if best is None or score < best[0]:
                    best = (score, j, t)
        tree = train_cart(X, y, max_depth=1, min_leaf_size=min_leaf)
        root = gini(np.bincount(y, minlength=k))
        if best is None or best[0] >= root:
            assert tree.n_nodes == 1
        else:
            assert (tree.feature[0], tree.threshold[0]) == (best[1], best[2])
            assert tree.impurity[0] == pytest.approx(root)


# ---------------------------------------------------------------------------
# Shared behaviour
# ---------------------------------------------------------------------------

@pytest.fixture(params=list(BaseKind))
def trained(request, rng):
    X, y = _blobs(rng)
    return train_model(request.param, X, y, ClassifierParams(), seed=3)


class TestPredictPosterior:
    def test_distributions_are_normalised(self, trained, rng):
        proba = predict_posterior(trained, rng.normal(0.0, 5.0, size=(1000, 3)))
        assert proba.shape == (1000, 3)
        assert np.all(proba >= 0)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)

    def test_single_row(self, trained):
        assert predict_posterior(trained, np.zeros(3)).shape == (3,)

    def test_dimension_mismatch(self, trained):
        with pytest.raises(DimensionMismatch):
            predict_posterior(trained, np.zeros(4))


class TestSerialisation:
    def test_round_trip_is_exact(self, trained, rng):
        restored = model_from_dict(json.loads(json.dumps(model_to_dict(trained))))
        points = rng.normal(0.0, 4.0, size=(100, 3))
        np.testing.assert_array_equal(predict_posterior(restored, points),
                                      predict_posterior(trained, points))

    def test_unknown_version(self, trained):
        data = model_to_dict(trained)
        data["format_version"] = 99
        with pytest.raises(ModelFormatError):
            model_from_dict(data)

    def test_unknown_type(self, trained):
        data = model_to_dict(trained)
        data["type"] = "svm"
        with pytest.raises(ModelFormatError):
            model_from_dict(data)
