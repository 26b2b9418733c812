"""
Base classifier families: LDA, QDA and CART.

Every model maps feature rows to a class posterior distribution.  The
maximum of that posterior is the confidence the semi-supervised labeler
compares against its threshold.

  * LDA / QDA: softmax of the Gaussian log-discriminants (log prior included).
    Covariances are shrunk toward their diagonal; the diagonal target is
    floored so that any shrinkage > 0 yields a positive definite matrix.
  * CART: greedy Gini splits, leaves hold class-count histograms; the
    posterior is the Laplace-smoothed histogram (counts + 1) / (total + k),
    or the raw frequencies when smoothing is switched off.

Models are immutable and serialise to a versioned JSON-compatible dict whose
round trip reproduces posteriors bit-for-bit.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.special import softmax

from harlearn.config import (
    DEFAULT_CART_MAX_DEPTH,
    DEFAULT_CART_MIN_LEAF_SIZE,
    DEFAULT_SHRINKAGE,
    ClassifierParams,
)
from harlearn.errors import (
    DegenerateClass,
    DimensionMismatch,
    ModelFormatError,
    SingularCovariance,
)
from harlearn.logutil import get_logger

log = get_logger("classifiers")

MODEL_FORMAT_VERSION = 1
_VARIANCE_FLOOR = 1e-9  # relative to the mean within-class variance


class BaseKind(str, Enum):
    LDA = "lda"
    QDA = "qda"
    CART = "cart"


# ---------------------------------------------------------------------------
# Gaussian discriminant models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianDiscriminantModel:
    """LDA (one pooled covariance) or QDA (one covariance per class).

    ``classes`` lists the activity codes seen in training, in ascending
    order; ``covariances`` has shape (1, d, d) for LDA, (k, d, d) for QDA.
    """

    kind: BaseKind
    classes: tuple
    priors: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    shrinkage: float

    def __post_init__(self):
        factors, logdets = [], []
        for cov in self.covariances:
            try:
                chol = cholesky(cov, lower=True)
            except LinAlgError as exc:
                raise SingularCovariance(
                    f"{self.kind.value}: covariance is not positive definite "
                    f"(shrinkage={self.shrinkage})") from exc
            factors.append(chol)
            logdets.append(2.0 * np.sum(np.log(np.diag(chol))))
        object.__setattr__(self, "_factors", tuple(factors))
        object.__setattr__(self, "_logdets", np.array(logdets))

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def log_discriminants(self, X: np.ndarray) -> np.ndarray:
        """(n, k) matrix of log prior + log Gaussian density (up to a constant)."""
        out = np.empty((X.shape[0], len(self.classes)))
        with np.errstate(divide="ignore"):
            log_priors = np.log(self.priors)
        for c in range(len(self.classes)):
            f = 0 if self.kind is BaseKind.LDA else c
            z = solve_triangular(self._factors[f], (X - self.means[c]).T, lower=True)
            out[:, c] = log_priors[c] - 0.5 * self._logdets[f] - 0.5 * np.sum(z * z, axis=0)
        return out

    def posterior(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.log_discriminants(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "type": "gaussian",
            "kind": self.kind.value,
            "classes": [int(c) for c in self.classes],
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "shrinkage": self.shrinkage,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianDiscriminantModel":
        return cls(
            kind=BaseKind(data["kind"]),
            classes=tuple(data["classes"]),
            priors=np.array(data["priors"], dtype=np.float64),
            means=np.array(data["means"], dtype=np.float64),
            covariances=np.array(data["covariances"], dtype=np.float64),
            shrinkage=float(data["shrinkage"]),
        )


def _check_training_data(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"training data must be a non-empty 2-D array, got {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"{len(y)} labels for {X.shape[0]} rows")
    return X, y


def _shrink(cov: np.ndarray, shrinkage: float) -> np.ndarray:
    """(1 - s) * cov + s * floored diag(cov)."""
    cov = 0.5 * (cov + cov.T)
    if shrinkage == 0.0:
        return cov
    diag = np.diag(cov)
    scale = diag.mean() if diag.mean() > 0 else 1.0
    target = np.diag(np.maximum(diag, _VARIANCE_FLOOR * scale))
    return (1.0 - shrinkage) * cov + shrinkage * target


def _class_groups(X, y):
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise DegenerateClass(f"need at least two classes, got {len(classes)}")
    groups = []
    for c in classes:
        Xc = X[y == c]
        if len(Xc) < 2:
            raise DegenerateClass(f"class {c} has {len(Xc)} row(s), need at least 2")
        groups.append(Xc)
    return classes, groups


def train_lda(X, y, shrinkage: float = DEFAULT_SHRINKAGE) -> GaussianDiscriminantModel:
    """Pooled within-class covariance (divided by n - k), empirical priors."""
    X, y = _check_training_data(X, y)
    classes, groups = _class_groups(X, y)
    means = np.array([g.mean(axis=0) for g in groups])
    scatter = sum((g - m).T @ (g - m) for g, m in zip(groups, means))
    pooled = scatter / (len(X) - len(classes))
    return GaussianDiscriminantModel(
        kind=BaseKind.LDA,
        classes=classes,
        priors=np.array([len(g) for g in groups], dtype=np.float64) / len(X),
        means=means,
        covariances=_shrink(pooled, shrinkage)[None, :, :],
        shrinkage=shrinkage,
    )


def train_qda(X, y, shrinkage: float = DEFAULT_SHRINKAGE) -> GaussianDiscriminantModel:
    """Per-class unbiased covariances, each shrunk independently."""
    X, y = _check_training_data(X, y)
    classes, groups = _class_groups(X, y)
    means = np.array([g.mean(axis=0) for g in groups])
    covs = np.array([
        _shrink((g - m).T @ (g - m) / (len(g) - 1), shrinkage)
        for g, m in zip(groups, means)
    ])
    return GaussianDiscriminantModel(
        kind=BaseKind.QDA,
        classes=classes,
        priors=np.array([len(g) for g in groups], dtype=np.float64) / len(X),
        means=means,
        covariances=covs,
        shrinkage=shrinkage,
    )


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    """Flat binary tree.  Node 0 is the root; ``feature[i] == -1`` marks a
    leaf.  Rows go left when ``x[feature] <= threshold``."""

    classes: tuple
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    impurity: np.ndarray
    n_features: int
    max_depth: int
    min_leaf_size: int
    seed: int = 0
    laplace: bool = True

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def leaf_posterior(self, leaf_counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(leaf_counts, dtype=np.float64)
        if self.laplace:
            return (counts + 1.0) / (counts.sum(axis=-1, keepdims=True) + counts.shape[-1])
        return counts / counts.sum(axis=-1, keepdims=True)

    def posterior(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_posterior(self.counts[self.apply(X)])

    def to_dict(self) -> dict:
        return {
            "type": "tree",
            "classes": [int(c) for c in self.classes],
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "impurity": self.impurity.tolist(),
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_leaf_size": self.min_leaf_size,
            "seed": self.seed,
            "laplace": self.laplace,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionTreeModel":
        return cls(
            classes=tuple(data["classes"]),
            feature=np.array(data["feature"], dtype=np.intp),
            threshold=np.array(data["threshold"], dtype=np.float64),
            left=np.array(data["left"], dtype=np.intp),
            right=np.array(data["right"], dtype=np.intp),
            counts=np.array(data["counts"], dtype=np.int64).reshape(
                len(data["feature"]), len(data["classes"])),
            impurity=np.array(data["impurity"], dtype=np.float64),
            n_features=int(data["n_features"]),
            max_depth=int(data["max_depth"]),
            min_leaf_size=int(data["min_leaf_size"]),
            seed=int(data["seed"]),
            laplace=bool(data["laplace"]),
        )


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of class-count histograms along the last axis."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / total[..., None]
    return np.where(total > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


def _best_split(X: np.ndarray, onehot: np.ndarray, min_leaf_size: int,
                node_order: np.ndarray):
    """Lowest weighted child impurity over all features and thresholds.

    ``node_order[j]`` lists the node's rows (indices into ``X``) sorted by
    feature ``j``; ``onehot`` is the (rows, classes) label indicator.  Ties
    keep the lowest feature index, then the lowest threshold.
    """
    p, n = node_order.shape
    n_left = np.arange(1, n)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf_size) & (n_right >= min_leaf_size)

    xs = X[node_order, np.arange(p)[:, None]]                 # (p, n)
    left = np.cumsum(onehot[node_order], axis=1)[:, :-1]     # (p, n-1, k)
    right = onehot[node_order[0]].sum(axis=0) - left
    weighted = (n_left * gini(left) + n_right * gini(right)) / n
    valid = size_ok & (xs[:, :-1] < xs[:, 1:])
    candidates = np.where(valid, weighted, np.inf)
    per_feature = np.argmin(candidates, axis=1)
    best_per_feature = candidates[np.arange(p), per_feature]
    j = int(np.argmin(best_per_feature))
    if not np.isfinite(best_per_feature[j]):
        return None
    i = int(per_feature[j])
    lo, hi = xs[j, i], xs[j, i + 1]
    threshold = 0.5 * (lo + hi)
    if not lo <= threshold < hi:
        threshold = lo
    return float(best_per_feature[j]), j, float(threshold)


def presort(X) -> np.ndarray:
    """Column-wise stable argsort of ``X``, shape (n_features, n_rows)."""
    return np.argsort(np.asarray(X, dtype=np.float64), axis=0, kind="stable").T


def train_cart(X, y, max_depth: int = DEFAULT_CART_MAX_DEPTH,
               min_leaf_size: int = DEFAULT_CART_MIN_LEAF_SIZE, seed: int = 0,
               classes=None, laplace: bool = True, sorted_index=None) -> DecisionTreeModel:
    """Grow a Gini tree.  Growth stops at ``max_depth``, when a split would
    leave a child smaller than ``min_leaf_size``, on a pure node, or when
    no split lowers the impurity.  Split search is exhaustive and
    deterministic; ``seed`` is recorded on the model only.

    ``classes`` fixes the histogram columns (and the Laplace denominator);
    by default it is the set of labels present.  ``sorted_index`` may pass
    in ``presort(X)`` when the caller already has it; otherwise the columns
    are sorted once here and every node reuses that order.
    """
    X, y = _check_training_data(X, y)
    classes = tuple(int(c) for c in (np.unique(y) if classes is None else classes))
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        yi = np.array([lookup[int(c)] for c in y], dtype=np.intp)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]} not in classes {classes}") from None
    k = len(classes)
    if sorted_index is None:
        sorted_index = presort(X)
    elif sorted_index.shape != (X.shape[1], X.shape[0]):
        raise ValueError(f"sorted_index has shape {sorted_index.shape}, "
                         f"expected {(X.shape[1], X.shape[0])}")
    onehot = np.eye(k, dtype=np.int64)[yi]

    feature, threshold, left, right, counts, impurity = [], [], [], [], [], []

    def new_node(rows):
        c = np.bincount(yi[rows], minlength=k)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(c)
        impurity.append(float(gini(c)))
        return len(feature) - 1

    goes_left = np.zeros(len(yi), dtype=bool)
    root = np.arange(len(yi))
    stack = [(new_node(root), root, sorted_index, 0)]
    while stack:
        node, rows, node_order, depth = stack.pop()
        if depth >= max_depth or impurity[node] == 0.0 or len(rows) < 2 * min_leaf_size:
            continue
        split = _best_split(X, onehot, min_leaf_size, node_order)
        if split is None or split[0] >= impurity[node]:
            continue
        _, j, t = split
        mask = X[rows, j] <= t
        feature[node] = j
        threshold[node] = t
        left[node] = new_node(rows[mask])
        right[node] = new_node(rows[~mask])
        # children inherit the parent's per-feature order
        goes_left[rows] = mask
        in_left = goes_left[node_order]
        n_features = node_order.shape[0]
        left_order = node_order[in_left].reshape(n_features, -1)
        right_order = node_order[~in_left].reshape(n_features, -1)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], rows[~mask], right_order, depth + 1))
        stack.append((left[node], rows[mask], left_order, depth + 1))

    return DecisionTreeModel(
        classes=classes,
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        counts=np.array(counts, dtype=np.int64).reshape(len(feature), k),
        impurity=np.array(impurity, dtype=np.float64),
        n_features=X.shape[1],
        max_depth=max_depth,
        min_leaf_size=min_leaf_size,
        seed=seed,
        laplace=laplace,
    )


# ---------------------------------------------------------------------------
# Shared entry points
# ---------------------------------------------------------------------------

def train_model(kind: BaseKind, X, y, params: ClassifierParams = ClassifierParams(),
                seed: int = 0, classes=None, sorted_index=None):
    """Train one base classifier of the given family.

    ``sorted_index`` (see ``presort``) is only used by CART.
    """
    kind = BaseKind(kind)
    if kind is BaseKind.LDA:
        return train_lda(X, y, params.shrinkage)
    if kind is BaseKind.QDA:
        return train_qda(X, y, params.shrinkage)
    return train_cart(X, y, params.cart_max_depth, params.cart_min_leaf_size,
                      seed=seed, classes=classes, laplace=params.cart_laplace,
                      sorted_index=sorted_index)


def predict_posterior(model, x) -> np.ndarray:
    """Class posterior(s) in ``model.classes`` order.

    A 1-D ``x`` yields a (k,) distribution; a 2-D array yields (n, k).
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(model.n_features, X.shape[1])
    proba = model.posterior(X)
    return proba[0] if single else proba


def model_to_dict(model) -> dict:
    return {"format_version": MODEL_FORMAT_VERSION, **model.to_dict()}


def model_from_dict(data: dict):
    version = data.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r}")
    if data.get("type") == "gaussian":
        return GaussianDiscriminantModel.from_dict(data)
    if data.get("type") == "tree":
        return DecisionTreeModel.from_dict(data)
    raise ModelFormatError(f"unknown model type {data.get('type')!r}")
