"""
Leave-one-subject-out experiment harness.

For one held-out subject a run goes through three steps:

  1. Train ``models_per_step`` user-independent base models on windows
     pooled from every other included subject.
  2. Label the held-out subject's first chunk with the current ensemble
     (non-supervised / semi-supervised / supervised) and add base models.
  3. The same with the second chunk.

After every base-model attempt the ensemble is evaluated on the subject's
third part, which never takes part in training, giving a learning curve.

Seeds: every random draw derives from ``master_seed`` through
``derive_seed(master_seed, subject_index, step, model_index)`` where
``step`` is 0 for the three-part split, 1 for the user-independent models
and 2, 3 for the personalization chunks.  None of them depend on the
labeling strategy or the base classifier, so every strategy of a subject
shares the same user-independent ensemble and the same first three curve
points.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from harlearn.classifiers import BaseKind
from harlearn.config import DEFAULT_MASTER_SEED, MODELS_PER_STEP, TrainingRecipe
from harlearn.dataset import (
    BodyPosition,
    DatasetManifest,
    chunks_for_personalization,
    load_dataset,
    split_three_parts,
)
from harlearn.ensemble import (
    EnsembleModel,
    SkippedModel,
    derive_seed,
    ensemble_predict,
    iter_chunk_models,
)
from harlearn.errors import (
    ConfigError,
    EmptyEnsemble,
    HarLearnError,
    LeakageError,
    MissingSubject,
)
from harlearn.event_bus import EventType
from harlearn.features import FeatureMatrix, WindowSpec, build_catalog, build_feature_matrix
from harlearn.logutil import get_logger
from harlearn.metrics import confusion_matrix, per_class_recall
from harlearn.personalization import (
    LabelingStrategy,
    Oracle,
    QueryStats,
    StrategyKind,
    personalize_step,
)

log = get_logger("harness")

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
RUN_WORKERS = 4
FEATURE_WORKERS = 4

STEP_SPLIT = 0
STEP_USER_INDEPENDENT = 1
STEP_CHUNK_1 = 2
STEP_CHUNK_2 = 3
STEP_NAMES = {
    STEP_USER_INDEPENDENT: "user_independent",
    STEP_CHUNK_1: "chunk_1",
    STEP_CHUNK_2: "chunk_2",
}
USER_INDEPENDENT = "user_independent"


# ---------------------------------------------------------------------------
# Configuration objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """One (position, classifier, strategy) cell of the experiment grid."""

    position: BodyPosition
    base_kind: BaseKind
    strategy: LabelingStrategy
    manifest: DatasetManifest
    recipe: TrainingRecipe = field(default_factory=TrainingRecipe)
    master_seed: int = DEFAULT_MASTER_SEED
    models_per_step: int = MODELS_PER_STEP

    def __post_init__(self):
        object.__setattr__(self, "position", BodyPosition(self.position))
        object.__setattr__(self, "base_kind", BaseKind(self.base_kind))
        if self.models_per_step < 1:
            raise ConfigError(f"models_per_step must be >= 1, got {self.models_per_step}")
        if len(self.manifest.included_subjects) < 2:
            raise ConfigError("leave-one-subject-out needs at least two included subjects")
        if self.models_per_step != MODELS_PER_STEP:
            log.warning("models_per_step=%d differs from the standard %d",
                        self.models_per_step, MODELS_PER_STEP)

    @property
    def cell(self) -> tuple:
        return self.position.value, self.base_kind.value

    @property
    def label(self) -> str:
        return f"{self.position.value}/{self.base_kind.value}/{self.strategy.label}"

    def to_dict(self) -> dict:
        return {
            "position": self.position.value,
            "classifier": self.base_kind.value,
            "strategy": self.strategy.kind.value,
            "threshold": self.strategy.threshold,
            "recipe": self.recipe.to_dict(),
            "master_seed": self.master_seed,
            "models_per_step": self.models_per_step,
            "manifest": self.manifest.to_mapping(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls(
                position=data["position"],
                base_kind=data["classifier"],
                strategy=LabelingStrategy(StrategyKind(data["strategy"]),
                                          data.get("threshold")),
                manifest=DatasetManifest.from_mapping(data["manifest"]),
                recipe=TrainingRecipe.from_dict(data.get("recipe", {})),
                master_seed=int(data.get("master_seed", DEFAULT_MASTER_SEED)),
                models_per_step=int(data.get("models_per_step", MODELS_PER_STEP)),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc


def standard_strategies(thresholds) -> list:
    """Non-supervised, semi-supervised per threshold, supervised."""
    return ([LabelingStrategy.non_supervised()]
            + [LabelingStrategy.semi_supervised(t) for t in sorted(thresholds)]
            + [LabelingStrategy.supervised()])


def matrix_configs(manifest: DatasetManifest, thresholds, positions=None, kinds=None,
                   recipe: TrainingRecipe | None = None,
                   master_seed: int = DEFAULT_MASTER_SEED,
                   models_per_step: int = MODELS_PER_STEP) -> list:
    """Every (position, classifier, strategy) combination of the grid."""
    positions = positions or manifest.positions
    kinds = kinds or tuple(BaseKind)
    recipe = recipe or TrainingRecipe()
    return [ExperimentConfig(position=p, base_kind=k, strategy=s, manifest=manifest,
                             recipe=recipe, master_seed=master_seed,
                             models_per_step=models_per_step)
            for p in positions for k in kinds for s in standard_strategies(thresholds)]


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    n_models: int                 # base-model attempts so far
    ensemble_size: int            # trained base models so far
    error_rate: float
    step: str
    skipped: bool = False
    class_recall: tuple = ()


@dataclass(frozen=True)
class LearningCurve:
    subject_id: str
    config: ExperimentConfig
    points: tuple = ()

    def __post_init__(self):
        n = [p.n_models for p in self.points]
        if any(b <= a for a, b in zip(n, n[1:])):
            raise ValueError("curve points must have strictly increasing n_models")

    def error_at(self, n_models: int) -> float:
        for p in self.points:
            if p.n_models == n_models:
                return p.error_rate
        raise KeyError(n_models)

    @property
    def final_error(self) -> float:
        return self.points[-1].error_rate


@dataclass(frozen=True, eq=False)
class QueryRecord:
    step: str
    row_index: int
    source: str
    predicted: int
    confidence: float
    final_label: int


@dataclass(frozen=True, eq=False)
class LosoResult:
    config: ExperimentConfig
    subject_id: str
    curve: LearningCurve
    stats: QueryStats
    step_stats: tuple            # (step name, QueryStats) per chunk
    query_log: tuple             # QueryRecord per chunk row
    seeds: dict
    ensemble: EnsembleModel

    @property
    def user_independent_error(self) -> float:
        return self.curve.error_at(self.config.models_per_step)


@dataclass(frozen=True)
class RunFailure:
    config: ExperimentConfig
    subject_id: str
    error: str


# ---------------------------------------------------------------------------
# Feature preparation
# ---------------------------------------------------------------------------

def prepare_features(recordings, catalog=None, spec: WindowSpec = WindowSpec(),
                     workers: int = FEATURE_WORKERS) -> dict:
    """Feature matrix per subject for recordings of one body position."""
    catalog = catalog or build_catalog()
    recordings = list(recordings)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(build_feature_matrix, r, catalog, spec) for r in recordings]
        matrices = [f.result() for f in futures]
    return {r.subject_id: m for r, m in zip(recordings, matrices)}


class FeatureStore:
    """Lazily loads and caches per-position feature matrices."""

    def __init__(self, data_dir, manifest: DatasetManifest, catalog=None,
                 spec: WindowSpec = WindowSpec(), workers: int = FEATURE_WORKERS):
        self.data_dir = data_dir
        self.manifest = manifest
        self.catalog = catalog or build_catalog()
        self.spec = spec
        self.workers = workers
        self._cache: dict = {}
        self._lock = threading.Lock()

    def matrices(self, position) -> dict:
        position = BodyPosition(position)
        with self._lock:
            if position not in self._cache:
                recordings = load_dataset(self.data_dir, self.manifest, [position],
                                          workers=self.workers)
                self._cache[position] = prepare_features(recordings, self.catalog,
                                                         self.spec, self.workers)
                log.info("Prepared %s features for %d subjects", position.value,
                         len(self._cache[position]))
            return self._cache[position]


# ---------------------------------------------------------------------------
# One LOSO run
# ---------------------------------------------------------------------------

def evaluate(ensemble: EnsembleModel, test: FeatureMatrix):
    """(error rate, per-class recall) of the ensemble on labeled rows."""
    predicted = ensemble_predict(ensemble, test.values).predicted
    recall = per_class_recall(confusion_matrix(test.labels, predicted,
                                               len(ensemble.class_list)))
    return float(1.0 - recall.mean()), tuple(float(r) for r in recall)


def _emit(bus, event_type: EventType, **data):
    if bus is not None and bus.has_subscribers(event_type):
        bus.emit(event_type, data)


def check_no_leakage(test: FeatureMatrix, *training: FeatureMatrix):
    """Raise LeakageError if any test row appears in a training block."""
    test_keys = test.row_keys()
    for block in training:
        shared = test_keys & block.row_keys()
        if shared:
            raise LeakageError(f"{len(shared)} test rows in training data, "
                               f"e.g. {sorted(shared)[0]}")


class UserIndependentCache:
    """Step-1 ensembles shared by runs that differ only in labeling strategy.

    The user-independent models depend on the position, classifier,
    recipe, seeds and the held-out subject, never on the strategy, so each
    distinct key is trained once.  Concurrent requests for the same key
    wait for the first one instead of training in parallel.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries = {}   # key -> [lock, steps or None]

    @staticmethod
    def key(config: "ExperimentConfig", held_out: str) -> tuple:
        return (config.position, config.base_kind, config.recipe, config.master_seed,
                config.models_per_step, config.manifest.included_subjects, held_out)

    def get(self, key, build):
        """Cached ``build()`` result for ``key``; a failed build is retried next time."""
        with self._lock:
            entry = self._entries.setdefault(key, [threading.Lock(), None])
        with entry[0]:
            if entry[1] is None:
                entry[1] = build()
            else:
                log.debug("Reusing user-independent models for %s", key[-1])
            return entry[1]

    def __len__(self):
        with self._lock:
            return sum(1 for _, steps in self._entries.values() if steps is not None)


def run_loso_subject(config: ExperimentConfig, held_out: str, features: dict,
                     bus=None, cache: UserIndependentCache | None = None) -> LosoResult:
    """Run the three-step protocol for one held-out subject.

    ``features`` maps subject id to its labeled FeatureMatrix for
    ``config.position``.  With a ``cache`` the user-independent models are
    trained once and shared with other strategies of the same subject.
    """
    included = config.manifest.included_subjects
    if held_out not in included:
        raise MissingSubject(held_out, "not included in the manifest")
    if held_out not in features:
        raise MissingSubject(held_out, f"no {config.position.value} features")
    others = [s for s in included if s != held_out]
    absent = [s for s in others if s not in features]
    if absent:
        raise MissingSubject(absent[0], f"no {config.position.value} features")

    subject_index = included.index(held_out)
    master = config.master_seed
    per_step = config.models_per_step

    def step_seeds(step):
        return [derive_seed(master, subject_index, step, m) for m in range(per_step)]

    seeds = {"split": derive_seed(master, subject_index, STEP_SPLIT)}
    seeds.update({STEP_NAMES[s]: step_seeds(s) for s in STEP_NAMES})

    pool = FeatureMatrix.concat(features[s] for s in others)
    split = split_three_parts(features[held_out], seeds["split"], held_out)
    chunk_1, chunk_2, test = chunks_for_personalization(split)
    check_no_leakage(test, pool, chunk_1, chunk_2)

    _emit(bus, EventType.RUN_STARTED, config=config, subject=held_out)
    log.info("LOSO %s held out %s: pool=%d chunk_1=%d chunk_2=%d test=%d rows",
             config.label, held_out, len(pool), len(chunk_1), len(chunk_2), len(test))

    points = []

    def record(ensemble, outcome):
        skipped = isinstance(outcome, SkippedModel)
        if not ensemble.base_models:
            raise EmptyEnsemble(f"{held_out}: first base model could not be trained")
        error, recall = evaluate(ensemble, test)
        point = CurvePoint(n_models=len(points) + 1, ensemble_size=len(ensemble),
                           error_rate=error, step=outcome.step, skipped=skipped,
                           class_recall=recall)
        points.append(point)
        _emit(bus, EventType.MODEL_SKIPPED if skipped else EventType.MODEL_ADDED,
              config=config, subject=held_out, point=point)

    def train_user_independent():
        return tuple(iter_chunk_models(
            EnsembleModel(models_per_chunk=per_step), pool.values, pool.labels,
            config.recipe, config.base_kind, seeds=seeds[USER_INDEPENDENT],
            step=USER_INDEPENDENT, sampling_fraction=config.recipe.pool_fraction))

    if cache is None:
        user_independent = train_user_independent()
    else:
        user_independent = cache.get(cache.key(config, held_out), train_user_independent)
    ensemble = EnsembleModel(models_per_chunk=per_step)
    for ensemble, outcome in user_independent:
        record(ensemble, outcome)

    step_stats, query_log = [], []
    stats = QueryStats(0, 0, 0)
    for step, chunk in ((STEP_CHUNK_1, chunk_1), (STEP_CHUNK_2, chunk_2)):
        name = STEP_NAMES[step]
        result = personalize_step(ensemble, chunk, config.strategy, Oracle(chunk.labels),
                                  config.recipe, config.base_kind, seeds=seeds[name],
                                  step=name, on_model=record)
        ensemble = result.ensemble
        stats = stats + result.stats
        step_stats.append((name, result.stats))
        labeled = result.labeled
        query_log.extend(
            QueryRecord(step=name, row_index=i, source=labeled.source[i].value,
                        predicted=int(labeled.predicted[i]),
                        confidence=float(labeled.confidences[i]),
                        final_label=int(labeled.labels[i]))
            for i in range(len(chunk)))

    curve = LearningCurve(subject_id=held_out, config=config, points=tuple(points))
    log.info("LOSO %s held out %s: error %.4f -> %.4f over %d models, queried %.3f, "
             "replaced %.3f", config.label, held_out, curve.error_at(per_step),
             curve.final_error, len(ensemble), stats.queried_fraction,
             stats.replaced_fraction)
    result = LosoResult(config=config, subject_id=held_out, curve=curve, stats=stats,
                        step_stats=tuple(step_stats), query_log=tuple(query_log),
                        seeds=seeds, ensemble=ensemble)
    _emit(bus, EventType.RUN_FINISHED, config=config, subject=held_out, result=result)
    return result


# ---------------------------------------------------------------------------
# Summary table
# ---------------------------------------------------------------------------

KEY_COLUMNS = ("position", "classifier")
MEAN_ROW = "mean"


def strategy_columns(strategies) -> list:
    """Error columns in display order, user-independent first."""
    ordered = sorted(set(strategies), key=_strategy_sort_key)
    return [USER_INDEPENDENT] + [s.label for s in ordered]


def _strategy_sort_key(strategy: LabelingStrategy):
    rank = {StrategyKind.NON_SUPERVISED: 0, StrategyKind.SEMI_SUPERVISED: 1,
            StrategyKind.SUPERVISED: 2}[strategy.kind]
    return rank, strategy.threshold if strategy.threshold is not None else 0.0


class SummaryTable:
    """Mean error (percent) per (position, classifier) and strategy.

    Semi-supervised strategies also get a ``queried_<label>`` column with
    the mean queried fraction in percent.  A cell with any failed subject
    run is left empty.  The last row holds the column means over the
    available cells.
    """

    def __init__(self, frame: pd.DataFrame):
        frame = frame.reset_index(drop=True)
        for col in frame.columns:
            frame[col] = (frame[col].astype(object) if col in KEY_COLUMNS
                          else frame[col].astype(np.float64))
        self.frame = frame

    @property
    def error_columns(self) -> list:
        return [c for c in self.frame.columns
                if c not in KEY_COLUMNS and not c.startswith("queried_")]

    @property
    def query_columns(self) -> list:
        return [c for c in self.frame.columns if c.startswith("queried_")]

    def cells(self) -> pd.DataFrame:
        return self.frame[self.frame["position"] != MEAN_ROW]

    def mean_row(self) -> pd.Series:
        return self.frame[self.frame["position"] == MEAN_ROW].iloc[0]

    def to_csv(self, path):
        self.frame.to_csv(path, index=False, lineterminator="\n", na_rep="")

    @classmethod
    def from_csv(cls, path) -> "SummaryTable":
        frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False,
                            na_values=[""], dtype={"position": str, "classifier": str})
        frame["classifier"] = frame["classifier"].fillna("")
        return cls(frame)

    def __eq__(self, other):
        if not isinstance(other, SummaryTable):
            return NotImplemented
        return self.frame.equals(other.frame)

    @classmethod
    def from_results(cls, results, failures=(), strategies=None) -> "SummaryTable":
        results = list(results)
        failures = list(failures)
        configs = [r.config for r in results] + [f.config for f in failures]
        strategies = strategies or [c.strategy for c in configs]
        columns = strategy_columns(strategies)
        semi = [c for c in columns if c.startswith("semi_")]

        failed = {(f.config.cell, f.config.strategy.label) for f in failures}
        cells = sorted({c.cell for c in configs}, key=_cell_sort_key)

        rows = []
        for cell in cells:
            row = {"position": cell[0], "classifier": cell[1]}
            cell_runs = [r for r in results if r.config.cell == cell]
            # every strategy of a subject shares the user-independent models
            uncovered = ({f.subject_id for f in failures if f.config.cell == cell}
                         - {r.subject_id for r in cell_runs})
            for col in columns:
                if col == USER_INDEPENDENT:
                    row[col] = (np.nan if uncovered
                                else _user_independent_mean(cell_runs))
                    continue
                runs = [r for r in cell_runs if r.config.strategy.label == col]
                row[col] = (np.nan if (cell, col) in failed or not runs
                            else 100.0 * float(np.mean([r.curve.final_error for r in runs])))
            for col in semi:
                runs = [r for r in cell_runs if r.config.strategy.label == col]
                row[f"queried_{col}"] = (
                    np.nan if (cell, col) in failed or not runs
                    else 100.0 * float(np.mean([r.stats.queried_fraction for r in runs])))
            rows.append(row)

        frame = pd.DataFrame(rows, columns=list(KEY_COLUMNS) + columns
                             + [f"queried_{c}" for c in semi])
        value_columns = columns + [f"queried_{c}" for c in semi]
        mean = {"position": MEAN_ROW, "classifier": ""}
        mean.update({c: float(frame[c].mean()) if frame[c].notna().any() else np.nan
                     for c in value_columns})
        frame = pd.concat([frame, pd.DataFrame([mean])], ignore_index=True)
        frame[value_columns] = frame[value_columns].astype(np.float64)
        return cls(frame)


def _cell_sort_key(cell):
    position, classifier = cell
    return ([p.value for p in BodyPosition].index(position),
            [k.value for k in BaseKind].index(classifier))


def _user_independent_mean(cell_runs) -> float:
    """Mean over subjects of the error after the user-independent step."""
    by_subject = {}
    for r in cell_runs:
        by_subject.setdefault(r.subject_id, r.user_independent_error)
    if not by_subject:
        return np.nan
    return 100.0 * float(np.mean(list(by_subject.values())))


def subject_errors(results) -> pd.DataFrame:
    """Long table: one row per (cell, subject, strategy) incl. user-independent."""
    rows, seen = [], set()
    for r in sort_results(results):
        position, classifier = r.config.cell
        key = (position, classifier, r.subject_id)
        if key not in seen:
            seen.add(key)
            rows.append({"position": position, "classifier": classifier,
                         "subject": r.subject_id, "strategy": USER_INDEPENDENT,
                         "error_rate": r.user_independent_error})
        rows.append({"position": position, "classifier": classifier,
                     "subject": r.subject_id, "strategy": r.config.strategy.label,
                     "error_rate": r.curve.final_error})
    return pd.DataFrame(rows, columns=["position", "classifier", "subject", "strategy",
                                       "error_rate"])


# ---------------------------------------------------------------------------
# Matrix and sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatrixResult:
    results: tuple
    failures: tuple
    summary: SummaryTable
    configs: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.failures


def sort_results(results) -> list:
    def key(r):
        return (_cell_sort_key(r.config.cell), _strategy_sort_key(r.config.strategy),
                r.config.manifest.included_subjects.index(r.subject_id))

    return sorted(results, key=key)


def _run_jobs(jobs, features_for, workers: int, bus=None):
    """Run (config, subject) jobs on a thread pool; failures are collected."""
    results, failures = [], []
    lock = threading.Lock()
    cache = UserIndependentCache()

    def work(config, subject):
        try:
            result = run_loso_subject(config, subject, features_for(config.position), bus,
                                      cache)
        except HarLearnError as exc:
            log.exception("LOSO %s held out %s failed", config.label, subject)
            _emit(bus, EventType.RUN_FAILED, config=config, subject=subject, error=str(exc))
            with lock:
                failures.append(RunFailure(config, subject, f"{type(exc).__name__}: {exc}"))
            return
        with lock:
            results.append(result)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for future in [pool.submit(work, c, s) for c, s in jobs]:
            future.result()
    failures.sort(key=lambda f: (_cell_sort_key(f.config.cell),
                                 _strategy_sort_key(f.config.strategy),
                                 f.config.manifest.included_subjects.index(f.subject_id)))
    return sort_results(results), failures


def _features_lookup(features):
    """Accept a FeatureStore or a ``{position: {subject: FeatureMatrix}}`` mapping."""
    if hasattr(features, "matrices"):
        return features.matrices
    return lambda position: features[BodyPosition(position)]


def run_matrix(configs, features, subjects=None, workers: int = RUN_WORKERS,
               bus=None) -> MatrixResult:
    """Run every config against every held-out subject (or ``subjects``)."""
    configs = list(configs)
    if not configs:
        raise ConfigError("no experiment configs to run")
    jobs = [(c, s) for c in configs
            for s in (subjects or c.manifest.included_subjects)]
    log.info("Running %d LOSO runs (%d configs)", len(jobs), len(configs))
    results, failures = _run_jobs(jobs, _features_lookup(features), workers, bus)
    summary = SummaryTable.from_results(results, failures,
                                        strategies=[c.strategy for c in configs])
    if failures:
        log.warning("%d of %d LOSO runs failed", len(failures), len(jobs))
    return MatrixResult(results=tuple(results), failures=tuple(failures),
                        summary=summary, configs=tuple(configs))


SWEEP_COLUMNS = ("threshold", "mean_error", "queried_fraction", "replaced_fraction",
                 "certain_fraction", "n_subjects", "n_failed")


def run_threshold_sweep(base: ExperimentConfig, thresholds, features, subjects=None,
                        workers: int = RUN_WORKERS, bus=None):
    """Semi-supervised runs of one cell over a list of thresholds.

    Returns ``(table, matrix_result)``; the table has one row per threshold
    with the mean final error and mean query fractions over subjects.
    """
    configs = [ExperimentConfig(position=base.position, base_kind=base.base_kind,
                                strategy=LabelingStrategy.semi_supervised(t),
                                manifest=base.manifest, recipe=base.recipe,
                                master_seed=base.master_seed,
                                models_per_step=base.models_per_step)
               for t in sorted(set(thresholds))]
    matrix = run_matrix(configs, features, subjects, workers, bus)
    rows = []
    for config in configs:
        runs = [r for r in matrix.results if r.config == config]
        failed = sum(1 for f in matrix.failures if f.config == config)
        rows.append({
            "threshold": config.strategy.threshold,
            "mean_error": _mean(r.curve.final_error for r in runs),
            "queried_fraction": _mean(r.stats.queried_fraction for r in runs),
            "replaced_fraction": _mean(r.stats.replaced_fraction for r in runs),
            "certain_fraction": _mean(r.stats.certain_fraction for r in runs),
            "n_subjects": len(runs),
            "n_failed": failed,
        })
    return pd.DataFrame(rows, columns=list(SWEEP_COLUMNS)), matrix


def _mean(values) -> float:
    values = list(values)
    return float(np.mean(values)) if values else np.nan
