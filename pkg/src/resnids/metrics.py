"""Attack-vs-normal confusion counting and the ACC / DR / FAR metrics.

Predictions and truths are multi-class; counting collapses them to binary
(any non-normal class is an attack), so an attack misclassified as a
different attack category still counts as detected.

    ACC = (TP+TN) / (TP+TN+FP+FN)
    DR  = TP / (TP+FN)
    FAR = FP / (FP+TN)

A metric whose denominator is zero is reported as absent (None), never 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn,
            self.fp + other.fp, self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    dr: float | None
    far: float | None
    counts: ConfusionCounts
    histogram: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "dr": self.dr,
            "far": self.far,
            "counts": {"tp": self.counts.tp, "tn": self.counts.tn,
                       "fp": self.counts.fp, "fn": self.counts.fn},
            "histogram": self.histogram,
        }


def confusion(pred_classes, true_classes, normal_class: int) -> ConfusionCounts:
    pred = np.asarray(pred_classes)
    true = np.asarray(true_classes)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ShapeError(
            f"prediction/truth vectors must share one length, got "
            f"{pred.shape} vs {true.shape}"
        )
    pred_attack = pred != normal_class
    true_attack = true != normal_class
    return ConfusionCounts(
        tp=int((true_attack & pred_attack).sum()),
        tn=int((~true_attack & ~pred_attack).sum()),
        fp=int((~true_attack & pred_attack).sum()),
        fn=int((true_attack & ~pred_attack).sum()),
    )


def compute_metrics(counts: ConfusionCounts,
                    histogram: dict[str, int] | None = None) -> MetricsReport:
    if counts.total == 0:
        raise ConfigError("cannot compute metrics from all-zero counts")
    acc = (counts.tp + counts.tn) / counts.total
    dr = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    far = counts.fp / (counts.fp + counts.tn) if counts.fp + counts.tn else None
    return MetricsReport(acc=acc, dr=dr, far=far, counts=counts,
                         histogram=dict(histogram or {}))


def prediction_histogram(pred_classes, class_names) -> dict[str, int]:
    pred = np.asarray(pred_classes)
    return {
        name: int((pred == i).sum()) for i, name in enumerate(class_names)
    }
