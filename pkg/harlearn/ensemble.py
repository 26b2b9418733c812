"""
Chunked incremental ensemble (Learn++ style).

Every data chunk adds ``models_per_chunk`` base models to the ensemble.
Each base model is built from its own seeded, class-stratified random
sample of the chunk, augmented by Gaussian noise injection, reduced to the
features chosen by sequential forward selection, and trained on those.
Earlier base models are never touched.

Base models carry equal weight: the ensemble posterior is the plain mean of
the base-model posteriors, aligned on the shared class list.
"""

import json
import warnings
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np
from sklearn.metrics import balanced_accuracy_score

from harlearn.classifiers import (
    BaseKind,
    model_from_dict,
    model_to_dict,
    predict_posterior,
    presort,
    train_model,
)
from harlearn.config import MODELS_PER_STEP, ClassifierParams, TrainingRecipe
from harlearn.dataset import N_CLASSES
from harlearn.errors import EmptyEnsemble, HarLearnError, ModelFormatError, SingleClassChunk
from harlearn.logutil import get_logger

log = get_logger("ensemble")

ENSEMBLE_FORMAT_VERSION = 1


def derive_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Model containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BaseModel:
    """One trained weak classifier and the feature columns it reads."""

    kind: BaseKind
    model: object
    feature_indices: tuple
    seed: int
    sample_size: int
    validation_score: float
    step: str = ""

    def posterior(self, X: np.ndarray, class_list: tuple) -> np.ndarray:
        """(n, len(class_list)) posterior; classes unseen in training get 0."""
        proba = predict_posterior(self.model, X[:, list(self.feature_indices)])
        out = np.zeros((X.shape[0], len(class_list)))
        out[:, [class_list.index(c) for c in self.model.classes]] = proba
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "feature_indices": [int(i) for i in self.feature_indices],
            "seed": self.seed,
            "sample_size": self.sample_size,
            "validation_score": self.validation_score,
            "step": self.step,
            "model": model_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaseModel":
        return cls(
            kind=BaseKind(data["kind"]),
            model=model_from_dict(data["model"]),
            feature_indices=tuple(data["feature_indices"]),
            seed=int(data["seed"]),
            sample_size=int(data["sample_size"]),
            validation_score=float(data["validation_score"]),
            step=data.get("step", ""),
        )


@dataclass(frozen=True)
class SkippedModel:
    """A base model that could not be trained (e.g. single-class labels)."""

    step: str
    model_index: int
    seed: int
    reason: str


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """Ordered, equally weighted base models sharing one class list.

    Instances are immutable: ``append`` returns a grown copy, so a model
    handed to the labeler is never changed by later training.
    """

    class_list: tuple = tuple(range(N_CLASSES))
    base_models: tuple = ()
    models_per_chunk: int = MODELS_PER_STEP
    skipped: tuple = ()

    def __len__(self):
        return len(self.base_models)

    def append(self, base_model: BaseModel) -> "EnsembleModel":
        unknown = set(base_model.model.classes) - set(self.class_list)
        if unknown:
            raise ValueError(f"base model classes {sorted(unknown)} not in class list")
        return replace(self, base_models=self.base_models + (base_model,))

    def record_skip(self, skip: SkippedModel) -> "EnsembleModel":
        return replace(self, skipped=self.skipped + (skip,))

    def to_dict(self) -> dict:
        return {
            "format_version": ENSEMBLE_FORMAT_VERSION,
            "class_list": [int(c) for c in self.class_list],
            "models_per_chunk": self.models_per_chunk,
            "base_models": [b.to_dict() for b in self.base_models],
            "skipped": [asdict(s) for s in self.skipped],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleModel":
        if data.get("format_version") != ENSEMBLE_FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported ensemble format version {data.get('format_version')!r}")
        return cls(
            class_list=tuple(data["class_list"]),
            base_models=tuple(BaseModel.from_dict(b) for b in data["base_models"]),
            models_per_chunk=int(data["models_per_chunk"]),
            skipped=tuple(SkippedModel(**s) for s in data.get("skipped", [])),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Sampling, noise injection, feature selection
# ---------------------------------------------------------------------------

def stratified_sample(labels, fraction: float, rng) -> np.ndarray:
    """Sorted row indices: ``fraction`` of every class, at least one row."""
    labels = np.asarray(labels)
    picked = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n = max(1, int(round(fraction * len(idx))))
        picked.append(rng.permutation(idx)[:n])
    return np.sort(np.concatenate(picked)) if picked else np.empty(0, dtype=np.intp)


def stratified_holdout(labels, fraction: float, rng):
    """(train, validation) index split per class; singleton classes stay in train."""
    labels = np.asarray(labels)
    train, val = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_val = int(round(fraction * len(idx)))
        n_val = min(max(n_val, 1), len(idx) - 1) if len(idx) >= 2 else 0
        val.append(idx[:n_val])
        train.append(idx[n_val:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def noise_inject(X, y, copies: int, scale: float, seed: int):
    """Append ``copies`` jittered replicas of (X, y).

    Replica feature j = original + N(0, (scale * std_j)^2), std_j being the
    population standard deviation of column j.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if copies < 0 or scale < 0:
        raise ValueError("copies and scale must be non-negative")
    if copies == 0:
        return X.copy(), y.copy()
    rng = np.random.default_rng(seed)
    sigma = scale * X.std(axis=0)
    replicas = [X + rng.standard_normal(X.shape) * sigma for _ in range(copies)]
    return np.vstack([X] + replicas), np.tile(y, copies + 1)


def _fit_rows(kind: BaseKind, X, y, params: ClassifierParams, seed: int,
              sorted_index=None):
    """Train on (X, y); Gaussian families drop classes with fewer than two rows."""
    if kind is not BaseKind.CART:
        classes, counts = np.unique(y, return_counts=True)
        keep = np.isin(y, classes[counts >= 2])
        if np.count_nonzero(counts >= 2) < 2:
            raise SingleClassChunk(
                f"{kind.value} needs two classes with >= 2 rows, got counts "
                f"{dict(zip(classes.tolist(), counts.tolist()))}")
        X, y = X[keep], y[keep]
    return train_model(kind, X, y, params, seed=seed, sorted_index=sorted_index)


def _holdout_score(kind, X_tr, y_tr, X_va, y_va, params, seed, sorted_index=None) -> float:
    try:
        model = _fit_rows(kind, X_tr, y_tr, params, seed, sorted_index)
    except HarLearnError:
        return -np.inf
    proba = predict_posterior(model, X_va)
    predicted = np.asarray(model.classes)[np.argmax(proba, axis=1)]
    with warnings.catch_warnings():
        # predicted classes absent from the holdout are ignored
        warnings.simplefilter("ignore", UserWarning)
        return float(balanced_accuracy_score(y_va, predicted))


def sfs_select(X, y, base_kind: BaseKind, max_features: int,
               validation_fraction: float, seed: int,
               params: ClassifierParams = ClassifierParams()):
    """Sequential forward selection on a seeded, stratified holdout.

    Each round adds the feature whose addition maximises held-out balanced
    accuracy (lowest index on ties).  Selection stops when the best
    candidate does not improve the score or ``max_features`` is reached;
    the first round always selects one feature.

    Returns ``(selected_indices, validation_score)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("feature selection needs a non-empty 2-D array")
    if max_features < 1:
        raise ValueError("max_features must be >= 1")
    kind = BaseKind(base_kind)
    rng = np.random.default_rng(seed)
    tr, va = stratified_holdout(y, validation_fraction, rng)
    if va.size == 0:
        va = tr
    X_tr, y_tr, X_va, y_va = X[tr], y[tr], X[va], y[va]
    # one column sort serves every candidate tree
    order = presort(X_tr) if kind is BaseKind.CART else None

    selected: list[int] = []
    best_score = -np.inf
    limit = min(max_features, X.shape[1])
    while len(selected) < limit:
        scores = np.full(X.shape[1], -np.inf)
        for j in range(X.shape[1]):
            if j in selected:
                continue
            cols = selected + [j]
            scores[j] = _holdout_score(kind, X_tr[:, cols], y_tr, X_va[:, cols], y_va,
                                       params, seed,
                                       None if order is None else order[cols])
        j_best = int(np.argmax(scores))
        if selected and not scores[j_best] > best_score:
            break
        selected.append(j_best)
        best_score = float(scores[j_best])
    return tuple(selected), best_score


# ---------------------------------------------------------------------------
# Growing the ensemble
# ---------------------------------------------------------------------------

def build_base_model(kind: BaseKind, X, y, recipe: TrainingRecipe, seed: int,
                     step: str = "") -> BaseModel:
    """Noise-inject (X, y), select features, and train one base model.

    Raises SingleClassChunk when a Gaussian family cannot be trained; CART
    trains on single-class labels (a constant tree) with a warning.
    """
    kind = BaseKind(kind)
    n_classes = len(np.unique(y))
    if n_classes < 2:
        if kind is not BaseKind.CART:
            raise SingleClassChunk(f"{step}: labels collapsed to a single class")
        log.warning("%s: single-class labels, training CART anyway (seed=%d)", step, seed)

    Xn, yn = noise_inject(X, y, recipe.noise_copies, recipe.noise_scale,
                          derive_seed(seed, 1))
    features, score = sfs_select(Xn, yn, kind, recipe.sfs_max_features,
                                 recipe.sfs_validation_fraction, derive_seed(seed, 2),
                                 recipe.classifier)
    model = _fit_rows(kind, Xn[:, list(features)], yn, recipe.classifier, seed)
    return BaseModel(kind=kind, model=model, feature_indices=features, seed=seed,
                     sample_size=len(y), validation_score=score, step=step)


def iter_chunk_models(ensemble: EnsembleModel, chunk_X, chunk_labels,
                      recipe: TrainingRecipe, base_kind: BaseKind, seeds=None,
                      step: str = "chunk", sampling_fraction: float | None = None):
    """Train the chunk's base models one by one.

    Yields ``(ensemble, outcome)`` after every attempt, where ``outcome`` is
    the appended BaseModel or a SkippedModel.  The yielded ensemble already
    includes the outcome.
    """
    X = np.asarray(getattr(chunk_X, "values", chunk_X), dtype=np.float64)
    labels = np.asarray(chunk_labels)
    if len(labels) != X.shape[0]:
        raise ValueError(f"{len(labels)} labels for {X.shape[0]} chunk rows")
    if seeds is None:
        seeds = [derive_seed(recipe.seed, len(ensemble) + len(ensemble.skipped) + m)
                 for m in range(ensemble.models_per_chunk)]
    fraction = recipe.sampling_fraction if sampling_fraction is None else sampling_fraction

    for m, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        idx = stratified_sample(labels, fraction, rng)
        try:
            base = build_base_model(base_kind, X[idx], labels[idx], recipe,
                                    derive_seed(seed, 0), step=step)
        except SingleClassChunk as exc:
            skip = SkippedModel(step=step, model_index=m, seed=int(seed), reason=str(exc))
            ensemble = ensemble.record_skip(skip)
            log.warning("Skipped base model %s#%d (seed=%d): %s", step, m, seed, exc)
            yield ensemble, skip
            continue
        ensemble = ensemble.append(base)
        log.info("Trained %s base model %s#%d seed=%d sample=%d features=%s score=%.4f",
                 base.kind.value, step, m, seed, base.sample_size,
                 list(base.feature_indices), base.validation_score)
        yield ensemble, base


def train_chunk_models(ensemble: EnsembleModel, chunk_X, chunk_labels,
                       recipe: TrainingRecipe, base_kind: BaseKind, seeds=None,
                       step: str = "chunk", sampling_fraction: float | None = None
                       ) -> EnsembleModel:
    """Append one chunk's base models; returns the grown ensemble."""
    for ensemble, _ in iter_chunk_models(ensemble, chunk_X, chunk_labels, recipe,
                                         base_kind, seeds, step, sampling_fraction):
        pass
    return ensemble


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

class EnsemblePrediction(NamedTuple):
    predicted: object    # class code(s)
    confidence: object   # max averaged posterior
    posterior: np.ndarray


def ensemble_posterior(ensemble: EnsembleModel, X) -> np.ndarray:
    """Equal-weight mean of base-model posteriors, (n, len(class_list))."""
    if not ensemble.base_models:
        raise EmptyEnsemble("ensemble has no base models")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    stacked = np.stack([b.posterior(X, ensemble.class_list) for b in ensemble.base_models])
    return stacked.mean(axis=0)


def ensemble_predict(ensemble: EnsembleModel, x) -> EnsemblePrediction:
    """Averaged posterior, argmax class (earliest class on ties), confidence.

    ``x`` may be one feature vector or a 2-D array of rows.
    """
    X = np.asarray(getattr(x, "values", x), dtype=np.float64)
    single = X.ndim == 1
    proba = ensemble_posterior(ensemble, X)
    best = np.argmax(proba, axis=1)
    predicted = np.asarray(ensemble.class_list)[best]
    confidence = proba[np.arange(len(best)), best]
    if single:
        return EnsemblePrediction(int(predicted[0]), float(confidence[0]), proba[0])
    return EnsemblePrediction(predicted, confidence, proba)
