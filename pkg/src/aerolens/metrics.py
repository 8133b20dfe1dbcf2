"""Confusion-matrix metric suite: accuracy, kappa, RMSE, MCC, macro F1/P/R.

Conventions: confusion rows index truth, columns index prediction; every
0/0 ratio (undefined per-class precision/recall, degenerate kappa/MCC
denominators) resolves to 0; RMSE is computed over probability rows versus
one-hot truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError

__all__ = [
    "EvalReport",
    "confusion_matrix",
    "metrics_from_confusion",
    "rmse_from_probabilities",
]

METRIC_FIELDS = (
    "accuracy",
    "kappa",
    "rmse",
    "mcc",
    "f1_macro",
    "precision_macro",
    "recall_macro",
)


@dataclass(frozen=True)
class EvalReport:
    confusion: tuple[tuple[int, ...], ...]
    accuracy: float
    kappa: float
    rmse: float
    mcc: float
    f1_macro: float
    precision_macro: float
    recall_macro: float

    def to_dict(self) -> dict:
        doc = {"confusion": [list(row) for row in self.confusion]}
        for name in METRIC_FIELDS:
            doc[name] = float(getattr(self, name))
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            confusion=tuple(tuple(int(v) for v in row) for row in doc["confusion"]),
            **{name: float(doc[name]) for name in METRIC_FIELDS},
        )


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Count matrix with rows = truth, columns = prediction."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise EmptyInputError("no instances to evaluate")
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def metrics_from_confusion(cm: np.ndarray) -> dict[str, float]:
    """All confusion-derived metrics (everything except rmse)."""
    cm = np.asarray(cm, dtype=float)
    total = cm.sum()
    if total == 0:
        raise EmptyInputError("empty confusion matrix")
    trace = np.trace(cm)
    truth = cm.sum(axis=1)  # per-class truth counts
    pred = cm.sum(axis=0)  # per-class prediction counts

    accuracy = trace / total

    # Cohen's kappa: observed vs chance agreement.
    p_o = accuracy
    p_e = float(np.dot(truth, pred)) / (total * total)
    if p_e == 1.0:
        kappa = 1.0 if p_o == 1.0 else 0.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)

    # Multiclass MCC, covariance form.
    num = trace * total - float(np.dot(truth, pred))
    den = np.sqrt(
        (total**2 - float(np.dot(pred, pred))) * (total**2 - float(np.dot(truth, truth)))
    )
    mcc = 0.0 if den == 0 else num / den

    diag = np.diag(cm)
    precision = np.divide(diag, pred, out=np.zeros_like(diag), where=pred > 0)
    recall = np.divide(diag, truth, out=np.zeros_like(diag), where=truth > 0)
    pr_sum = precision + recall
    f1 = np.divide(
        2 * precision * recall, pr_sum, out=np.zeros_like(diag), where=pr_sum > 0
    )

    return {
        "accuracy": float(accuracy),
        "kappa": float(kappa),
        "mcc": float(mcc),
        "f1_macro": float(f1.mean()),
        "precision_macro": float(precision.mean()),
        "recall_macro": float(recall.mean()),
    }


def rmse_from_probabilities(proba: np.ndarray, y_true: np.ndarray) -> float:
    """RMSE of probability rows against one-hot truth, over all (row, class) cells."""
    proba = np.asarray(proba, dtype=float)
    y_true = np.asarray(y_true, dtype=int)
    if proba.size == 0:
        raise EmptyInputError("no probability rows")
    onehot = np.zeros_like(proba)
    onehot[np.arange(proba.shape[0]), y_true] = 1.0
    return float(np.sqrt(np.mean((proba - onehot) ** 2)))
