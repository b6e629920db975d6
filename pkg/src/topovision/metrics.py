"""Confusion-matrix metrics and segmentation overlap scores.

The recall printed in the source material is actually specificity
(tn / (fn + tn)); both that literal form and the standard recall
(tp / (tp + fn)) are available behind an explicit mode flag, defaulting
to standard.  Undefined metrics (zero denominators) surface as NaN so
CSV consumers can tell "undefined" from "zero".
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_binary_mask

RECALL_MODES = ("standard", "paper-literal")


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest counts for a single positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def precision(counts):
    """tp / (tp + fp); NaN when no positive predictions exist."""
    denom = counts.tp + counts.fp
    return counts.tp / denom if denom else math.nan


def recall(counts, mode="standard"):
    """Standard: tp / (tp + fn).  Paper-literal: tn / (fn + tn)."""
    if mode == "standard":
        denom = counts.tp + counts.fn
        return counts.tp / denom if denom else math.nan
    if mode == "paper-literal":
        denom = counts.fn + counts.tn
        return counts.tn / denom if denom else math.nan
    raise ValueError(f"unknown recall mode {mode!r}; expected one of {RECALL_MODES}")


def accuracy(counts):
    """(tp + tn) / total."""
    if counts.total < 1:
        raise ValueError("accuracy needs at least one sample")
    return (counts.tp + counts.tn) / counts.total


def f1(counts, recall_mode="standard"):
    """Harmonic mean of precision and recall; 0 when both are 0."""
    p = precision(counts)
    r = recall(counts, recall_mode)
    if math.isnan(p) or math.isnan(r):
        return math.nan
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def dice(mask_a, mask_b):
    """Overlap score 2|A&B| / (|A| + |B|); two empty masks score 1."""
    a = check_binary_mask(mask_a, "mask_a")
    b = check_binary_mask(mask_b, "mask_b")
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def psnr(reference, candidate):
    """Peak signal-to-noise ratio in dB for [0, 1] images; inf if identical."""
    reference = np.asarray(reference, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    if reference.shape != candidate.shape:
        raise ValueError(f"shapes differ: {reference.shape} vs {candidate.shape}")
    mse = float(np.mean((reference - candidate) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def confusion_from_labels(y_true, y_pred, positive):
    """One-vs-rest counts treating ``positive`` as the positive class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"label shapes differ: {y_true.shape} vs {y_pred.shape}"
        )
    actual = y_true == positive
    predicted = y_pred == positive
    return ConfusionCounts(
        tp=int(np.sum(actual & predicted)),
        fp=int(np.sum(~actual & predicted)),
        tn=int(np.sum(~actual & ~predicted)),
        fn=int(np.sum(actual & ~predicted)),
    )


def multiclass_report(y_true, y_pred, classes=None):
    """Per-class one-vs-rest metrics plus a macro average.

    Returns an ordered dict mapping class label (and "macro") to a dict
    with keys precision, recall_standard, recall_paper, f1, accuracy.
    Macro averages skip NaN entries per metric.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    report = {}
    for cls in classes:
        counts = confusion_from_labels(y_true, y_pred, cls)
        report[cls] = {
            "precision": precision(counts),
            "recall_standard": recall(counts, "standard"),
            "recall_paper": recall(counts, "paper-literal"),
            "f1": f1(counts, "standard"),
            "accuracy": accuracy(counts),
        }
    macro = {}
    for key in ("precision", "recall_standard", "recall_paper", "f1", "accuracy"):
        values = [report[c][key] for c in classes if not math.isnan(report[c][key])]
        macro[key] = sum(values) / len(values) if values else math.nan
    report["macro"] = macro
    return report


def write_metrics_csv(path, report):
    """Write a multiclass report with the canonical column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["class", "precision", "recall_standard", "recall_paper", "f1", "accuracy"]
        )
        for cls, row in report.items():
            writer.writerow(
                [
                    cls,
                    *(
                        f"{row[k]:.6f}" if not math.isnan(row[k]) else "nan"
                        for k in (
                            "precision",
                            "recall_standard",
                            "recall_paper",
                            "f1",
                            "accuracy",
                        )
                    ),
                ]
            )
