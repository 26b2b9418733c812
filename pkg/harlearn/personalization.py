"""
Chunk labeling strategies for personalizing the ensemble.

  * non-supervised: every row keeps the ensemble's predicted label.
  * supervised: every row is labeled by the user (the oracle).
  * semi-supervised: rows are scanned in temporal order; a row whose
    confidence is below the threshold is sent to the oracle and its answer
    is also given to the two rows on each side (clipped at the chunk
    edges).  User-sourced labels are never overwritten, and rows already
    labeled by propagation are not queried again.

Labels are fixed with the pre-update ensemble before any new base model is
trained on them.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from harlearn.config import PROPAGATION_RADIUS, TrainingRecipe
from harlearn.ensemble import EnsembleModel, ensemble_predict, iter_chunk_models
from harlearn.errors import ConfigError, EmptyChunk, EmptyEnsemble
from harlearn.logutil import get_logger

log = get_logger("personalization")

# Confidence at or above this counts as "certain" in the confidence profile.
CERTAIN_CONFIDENCE = 0.999


class StrategyKind(str, Enum):
    NON_SUPERVISED = "nonsup"
    SEMI_SUPERVISED = "semi"
    SUPERVISED = "sup"


class LabelSource(str, Enum):
    PREDICTED = "predicted"
    USER_QUERY = "user_query"
    USER_PROPAGATED = "user_propagated"


@dataclass(frozen=True)
class LabelingStrategy:
    kind: StrategyKind
    threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.kind is StrategyKind.SEMI_SUPERVISED:
            if self.threshold is None or self.threshold < 0:
                raise ConfigError("semi-supervised labeling needs a threshold >= 0")
        elif self.threshold is not None:
            raise ConfigError(f"{self.kind.value} labeling takes no threshold")

    @classmethod
    def non_supervised(cls) -> "LabelingStrategy":
        return cls(StrategyKind.NON_SUPERVISED)

    @classmethod
    def supervised(cls) -> "LabelingStrategy":
        return cls(StrategyKind.SUPERVISED)

    @classmethod
    def semi_supervised(cls, threshold: float) -> "LabelingStrategy":
        return cls(StrategyKind.SEMI_SUPERVISED, float(threshold))

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.SEMI_SUPERVISED:
            return f"semi_{self.threshold:.2f}"
        return self.kind.value


class Oracle:
    """Simulated, error-free user answering from the chunk's ground truth."""

    def __init__(self, ground_truth):
        self.ground_truth = np.asarray(ground_truth, dtype=np.int64)
        self._queried: set[int] = set()

    @property
    def query_count(self) -> int:
        return len(self._queried)

    def query(self, row: int) -> int:
        self._queried.add(int(row))
        return int(self.ground_truth[row])


@dataclass(frozen=True)
class QueryStats:
    n_rows: int
    n_queried: int
    n_replaced: int
    n_certain: int = 0

    @property
    def queried_fraction(self) -> float:
        return self.n_queried / self.n_rows if self.n_rows else 0.0

    @property
    def replaced_fraction(self) -> float:
        return self.n_replaced / self.n_rows if self.n_rows else 0.0

    @property
    def certain_fraction(self) -> float:
        return self.n_certain / self.n_rows if self.n_rows else 0.0

    def __add__(self, other: "QueryStats") -> "QueryStats":
        return QueryStats(self.n_rows + other.n_rows, self.n_queried + other.n_queried,
                          self.n_replaced + other.n_replaced,
                          self.n_certain + other.n_certain)


@dataclass(frozen=True, eq=False)
class LabeledChunk:
    rows: object            # FeatureMatrix
    labels: np.ndarray
    source: tuple           # LabelSource per row
    confidences: np.ndarray
    predicted: np.ndarray


def label_chunk(ensemble: EnsembleModel, chunk_rows, strategy: LabelingStrategy,
                oracle: Oracle, radius: int = PROPAGATION_RADIUS):
    """Label a chunk (rows in temporal order) under ``strategy``.

    Returns ``(LabeledChunk, QueryStats)``.
    """
    X = np.asarray(getattr(chunk_rows, "values", chunk_rows), dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise EmptyChunk("cannot label an empty chunk")
    if not ensemble.base_models:
        raise EmptyEnsemble("labeling needs a trained ensemble")
    if len(oracle.ground_truth) != n:
        raise ValueError(f"oracle holds {len(oracle.ground_truth)} labels for {n} rows")

    prediction = ensemble_predict(ensemble, X)
    predicted = np.asarray(prediction.predicted, dtype=np.int64)
    confidences = np.asarray(prediction.confidence, dtype=np.float64)
    labels = predicted.copy()
    source = [LabelSource.PREDICTED] * n
    queries_before = oracle.query_count

    if strategy.kind is StrategyKind.SUPERVISED:
        for w in range(n):
            labels[w] = oracle.query(w)
            source[w] = LabelSource.USER_QUERY
    elif strategy.kind is StrategyKind.SEMI_SUPERVISED:
        for w in range(n):
            if source[w] is not LabelSource.PREDICTED:
                continue
            if confidences[w] >= strategy.threshold:
                continue
            answer = oracle.query(w)
            labels[w] = answer
            source[w] = LabelSource.USER_QUERY
            for j in range(max(0, w - radius), min(n, w + radius + 1)):
                if source[j] is LabelSource.PREDICTED:
                    labels[j] = answer
                    source[j] = LabelSource.USER_PROPAGATED

    n_queried = oracle.query_count - queries_before
    n_replaced = sum(s is not LabelSource.PREDICTED for s in source)
    stats = QueryStats(n_rows=n, n_queried=n_queried, n_replaced=n_replaced,
                       n_certain=int(np.count_nonzero(confidences >= CERTAIN_CONFIDENCE)))
    chunk = LabeledChunk(rows=chunk_rows, labels=labels, source=tuple(source),
                         confidences=confidences, predicted=predicted)
    log.debug("Labeled chunk (%s): %d rows, %d queried, %d user-sourced",
              strategy.label, n, n_queried, n_replaced)
    return chunk, stats


@dataclass(frozen=True, eq=False)
class StepResult:
    ensemble: EnsembleModel
    stats: QueryStats
    labeled: LabeledChunk


def personalize_step(ensemble: EnsembleModel, chunk_rows, strategy: LabelingStrategy,
                     oracle: Oracle, recipe: TrainingRecipe, base_kind,
                     seeds=None, step: str = "chunk", on_model=None) -> StepResult:
    """Label the chunk with the current ensemble, then grow it on those labels.

    ``on_model(ensemble, outcome)`` is called after every base-model attempt.
    """
    labeled, stats = label_chunk(ensemble, chunk_rows, strategy, oracle)
    grown = ensemble
    for grown, outcome in iter_chunk_models(ensemble, chunk_rows, labeled.labels, recipe,
                                            base_kind, seeds=seeds, step=step):
        if on_model is not None:
            on_model(grown, outcome)
    return StepResult(ensemble=grown, stats=stats, labeled=labeled)
