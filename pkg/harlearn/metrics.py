"""Balanced accuracy over the fixed activity-class order."""

import numpy as np
from sklearn.metrics import confusion_matrix as _sk_confusion_matrix

from harlearn.dataset import N_CLASSES
from harlearn.errors import MissingClassInTest


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Rows = true class code, columns = predicted class code."""
    return _sk_confusion_matrix(y_true, y_pred, labels=np.arange(n_classes))


def per_class_recall(confusion) -> np.ndarray:
    confusion = np.asarray(confusion, dtype=np.float64)
    support = confusion.sum(axis=1)
    missing = np.flatnonzero(support == 0)
    if missing.size:
        raise MissingClassInTest(
            f"no test rows for class index(es) {missing.tolist()}")
    return np.diag(confusion) / support


def balanced_accuracy(confusion) -> float:
    """Mean per-class recall; every true class needs at least one row."""
    return float(np.mean(per_class_recall(confusion)))


def error_rate(confusion) -> float:
    return 1.0 - balanced_accuracy(confusion)
