"""Shared fixtures: small synthetic feature matrices and manifests."""

import os
import sys

import numpy as np
import pytest

# Ensure the repo root is on the path
_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if _ROOT not in sys.path:
    sys.path.insert(0, _ROOT)

from harlearn.config import TrainingRecipe  # noqa: E402
from harlearn.dataset import N_CLASSES, BodyPosition, DatasetManifest  # noqa: E402
from harlearn.features import FeatureMatrix  # noqa: E402

N_FEATURES = 5


def class_means(n_features: int = N_FEATURES) -> np.ndarray:
    """Well separated class centres; feature 0 alone separates all classes."""
    means = np.zeros((N_CLASSES, n_features))
    for c in range(N_CLASSES):
        means[c, 0] = 3.0 * c
        means[c, 1] = 3.0 * ((3 * c) % N_CLASSES)
    return means


def make_subject_features(subject: str, seed: int, per_class: int = 9,
                          offset: float = 0.0, noise: float = 0.5,
                          class_order=None, counts=None) -> FeatureMatrix:
    """Labeled rows for one subject: each class as one contiguous run."""
    rng = np.random.default_rng(seed)
    order = list(range(N_CLASSES)) if class_order is None else list(class_order)
    counts = counts or {}
    labels = np.concatenate([np.full(counts.get(c, per_class), c) for c in order])
    values = class_means()[labels] + offset + rng.normal(0.0, noise,
                                                         (len(labels), N_FEATURES))
    return FeatureMatrix(values=values, labels=labels,
                         subject_ids=np.full(len(labels), subject, dtype=object),
                         window_index=np.arange(len(labels)))


def build_small_manifest() -> DatasetManifest:
    return DatasetManifest(included_subjects=("s1", "s2", "s3", "s4"),
                           excluded_subjects=(("s5", "rotated"),),
                           positions=(BodyPosition.WAIST,))


def build_small_features(overrides=None) -> dict:
    """{position: {subject: FeatureMatrix}} with a mild per-subject offset.

    ``overrides`` maps a subject id to per-class window counts.
    """
    overrides = overrides or {}
    subjects = {}
    for i in range(4):
        sid = f"s{i + 1}"
        subjects[sid] = make_subject_features(sid, seed=i, offset=0.3 * i,
                                              counts=overrides.get(sid))
    return {BodyPosition.WAIST: subjects}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_manifest():
    return build_small_manifest()


@pytest.fixture
def small_features():
    return build_small_features()


@pytest.fixture
def fast_recipe():
    return TrainingRecipe(sfs_max_features=3, seed=7)
