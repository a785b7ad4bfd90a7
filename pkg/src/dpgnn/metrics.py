"""Classification metrics from confusion counts: macro / weighted / micro F1."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class MetricsReport:
    f1_macro: float
    f1_weighted: float
    f1_micro: float
    per_class_f1: np.ndarray
    confusion: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "f1_macro": self.f1_macro,
            "f1_weighted": self.f1_weighted,
            "f1_micro": self.f1_micro,
            "per_class_f1": [round(float(v), 6) for v in self.per_class_f1],
        }


def compute_f1(predictions: np.ndarray, truths: np.ndarray, num_classes: int) -> MetricsReport:
    """Per-class F1 from the confusion matrix; 0/0 cases count as F1 = 0.

    macro is the unweighted class mean, weighted is support-weighted, micro is
    computed globally and equals accuracy for single-label classification.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.size == 0:
        raise InputError("compute_f1: empty input")
    if predictions.shape != truths.shape:
        raise InputError(
            f"compute_f1: {predictions.size} predictions vs {truths.size} truths"
        )
    if truths.min() < 0 or truths.max() >= num_classes or predictions.min() < 0 or predictions.max() >= num_classes:
        raise InputError(f"compute_f1: labels outside [0, {num_classes})")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (truths, predictions), 1)

    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros(num_classes), where=denom > 0)

    support = confusion.sum(axis=1)
    total = support.sum()
    weighted = float((per_class * support).sum() / total)
    micro = float(tp.sum() / total)
    return MetricsReport(
        f1_macro=float(per_class.mean()),
        f1_weighted=weighted,
        f1_micro=micro,
        per_class_f1=per_class,
        confusion=confusion,
    )
