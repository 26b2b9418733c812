# harlearn - incremental ensemble personalization of activity recognition models
__version__ = "0.4.0"

# reports reads __version__ while this package is still initialising
from harlearn.classifiers import BaseKind, predict_posterior, train_model  # noqa: E402
from harlearn.config import ClassifierParams, TrainingRecipe  # noqa: E402
from harlearn.dataset import (  # noqa: E402
    ActivityClass,
    BodyPosition,
    DatasetManifest,
    load_dataset,
    split_three_parts,
)
from harlearn.ensemble import EnsembleModel, ensemble_predict, train_chunk_models  # noqa: E402
from harlearn.errors import HarLearnError  # noqa: E402
from harlearn.features import build_catalog, build_feature_matrix  # noqa: E402
from harlearn.harness import (  # noqa: E402
    ExperimentConfig,
    run_loso_subject,
    run_matrix,
    run_threshold_sweep,
)
from harlearn.personalization import (  # noqa: E402
    LabelingStrategy,
    StrategyKind,
    label_chunk,
    personalize_step,
)
from harlearn.reports import emit_reports  # noqa: E402

__all__ = [
    "ActivityClass",
    "BaseKind",
    "BodyPosition",
    "ClassifierParams",
    "DatasetManifest",
    "EnsembleModel",
    "ExperimentConfig",
    "HarLearnError",
    "LabelingStrategy",
    "StrategyKind",
    "TrainingRecipe",
    "__version__",
    "build_catalog",
    "build_feature_matrix",
    "emit_reports",
    "ensemble_predict",
    "label_chunk",
    "load_dataset",
    "personalize_step",
    "predict_posterior",
    "run_loso_subject",
    "run_matrix",
    "run_threshold_sweep",
    "split_three_parts",
    "train_chunk_models",
    "train_model",
]
