"""
Configuration defaults and JSON settings persistence.

All tunables of an experiment live in one JSON settings file.  A missing
file means "all defaults"; CLI flags override whatever the file holds.
The dataclasses here validate their ranges on construction so a bad
settings file fails before any model is trained.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields

from harlearn.errors import ConfigError
from harlearn.logutil import get_logger

log = get_logger("config")

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
SAMPLE_RATE_HZ = 50
WINDOW_LENGTH_S = 4.2
WINDOW_SLIDE_S = 1.4

DEFAULT_SHRINKAGE = 0.05
DEFAULT_CART_MAX_DEPTH = 12
DEFAULT_CART_MIN_LEAF_SIZE = 3

DEFAULT_SAMPLING_FRACTION = 0.6
DEFAULT_NOISE_COPIES = 2
DEFAULT_NOISE_SCALE = 0.1
DEFAULT_SFS_MAX_FEATURES = 15
DEFAULT_SFS_VALIDATION_FRACTION = 0.3

MODELS_PER_STEP = 3
PROPAGATION_RADIUS = 2  # windows on each side of a queried window
DEFAULT_THRESHOLDS = (0.90, 0.95)
DEFAULT_SWEEP_THRESHOLDS = (0.5, 0.7, 0.8, 0.9, 0.95, 0.99)
DEFAULT_MASTER_SEED = 0


@dataclass(frozen=True)
class ClassifierParams:
    """Hyperparameters of the three base classifier families."""

    shrinkage: float = DEFAULT_SHRINKAGE
    cart_max_depth: int = DEFAULT_CART_MAX_DEPTH
    cart_min_leaf_size: int = DEFAULT_CART_MIN_LEAF_SIZE
    cart_laplace: bool = True

    def __post_init__(self):
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ConfigError(f"shrinkage must be in [0, 1], got {self.shrinkage}")
        if self.cart_max_depth < 1:
            raise ConfigError(f"cart_max_depth must be >= 1, got {self.cart_max_depth}")
        if self.cart_min_leaf_size < 1:
            raise ConfigError(
                f"cart_min_leaf_size must be >= 1, got {self.cart_min_leaf_size}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierParams":
        return cls(**_known_keys(cls, data))


@dataclass(frozen=True)
class TrainingRecipe:
    """How each base model is built from a block of labeled rows.

    ``pool_sampling_fraction`` applies to the pooled user-independent data
    of Step 1; ``None`` means "same as ``sampling_fraction``".
    """

    sampling_fraction: float = DEFAULT_SAMPLING_FRACTION
    noise_copies: int = DEFAULT_NOISE_COPIES
    noise_scale: float = DEFAULT_NOISE_SCALE
    sfs_max_features: int = DEFAULT_SFS_MAX_FEATURES
    sfs_validation_fraction: float = DEFAULT_SFS_VALIDATION_FRACTION
    seed: int = DEFAULT_MASTER_SEED
    pool_sampling_fraction: float | None = None
    classifier: ClassifierParams = field(default_factory=ClassifierParams)

    def __post_init__(self):
        for name in ("sampling_fraction", "pool_sampling_fraction"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        if self.noise_copies < 0:
            raise ConfigError(f"noise_copies must be >= 0, got {self.noise_copies}")
        if self.noise_scale < 0:
            raise ConfigError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.sfs_max_features < 1:
            raise ConfigError(
                f"sfs_max_features must be >= 1, got {self.sfs_max_features}")
        if not 0.0 < self.sfs_validation_fraction < 1.0:
            raise ConfigError(
                "sfs_validation_fraction must be in (0, 1), "
                f"got {self.sfs_validation_fraction}")

    @property
    def pool_fraction(self) -> float:
        if self.pool_sampling_fraction is None:
            return self.sampling_fraction
        return self.pool_sampling_fraction

    def to_dict(self) -> dict:
        data = asdict(self)
        data["classifier"] = self.classifier.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingRecipe":
        kwargs = _known_keys(cls, data)
        if isinstance(kwargs.get("classifier"), dict):
            kwargs["classifier"] = ClassifierParams.from_dict(kwargs["classifier"])
        return cls(**kwargs)


def _known_keys(cls, data: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        log.warning("Ignoring unknown %s settings: %s", cls.__name__, ", ".join(unknown))
    return {k: v for k, v in data.items() if k in names}


# ---------------------------------------------------------------------------
# Settings persistence (JSON file)
# ---------------------------------------------------------------------------

def load_settings(path) -> dict:
    """Read a settings file; an absent file means all defaults."""
    if path is None or not os.path.exists(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read settings {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"settings {path} must hold a JSON object")
    return data


def save_settings(path, data: dict):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
