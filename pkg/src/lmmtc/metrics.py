"""Evaluation metrics over 0/1 label matrices (test size x label count).

All four metrics pool counts globally (micro averaging).  The degenerate
0/0 cases for F1 and Jaccard are defined as 1.0: an all-negative gold
set predicted all-negative is perfect agreement.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError


def _as_label_matrix(y, name: str) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-d, got shape {arr.shape}")
    if arr.size == 0:
        raise ContractError(f"{name} is empty")
    if not np.isin(arr, (0, 1)).all():
        raise ContractError(f"{name} entries must be 0 or 1")
    return arr.astype(np.int64)


def _validate_pair(y_true, y_pred):
    yt = _as_label_matrix(y_true, "y_true")
    yp = _as_label_matrix(y_pred, "y_pred")
    if yt.shape != yp.shape:
        raise ContractError(f"shape mismatch: y_true {yt.shape} vs y_pred {yp.shape}")
    return yt, yp


def confusion_counts(y_true, y_pred):
    """Pooled (tp, fp, fn, tn) over every cell."""
    yt, yp = _validate_pair(y_true, y_pred)
    tp = int(((yt == 1) & (yp == 1)).sum())
    fp = int(((yt == 0) & (yp == 1)).sum())
    fn = int(((yt == 1) & (yp == 0)).sum())
    tn = int(((yt == 0) & (yp == 0)).sum())
    return tp, fp, fn, tn


def accuracy(y_true, y_pred) -> float:
    """Strict per-row accuracy: a row counts only if every label matches."""
    yt, yp = _validate_pair(y_true, y_pred)
    return float((yt == yp).all(axis=1).mean())


def micro_f1(y_true, y_pred) -> float:
    tp, fp, fn, _ = confusion_counts(y_true, y_pred)
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2.0 * tp / denom


def micro_jaccard(y_true, y_pred) -> float:
    tp, fp, fn, _ = confusion_counts(y_true, y_pred)
    denom = tp + fp + fn
    return 1.0 if denom == 0 else tp / denom


def hamming_loss(y_true, y_pred) -> float:
    yt, yp = _validate_pair(y_true, y_pred)
    return float((yt != yp).mean())


@dataclass
class MetricsReport:
    accuracy: float
    micro_f1: float
    micro_jaccard: float
    hamming_loss: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "MetricsReport":
        with open(path) as f:
            d = json.load(f)
        try:
            return cls(**{k: d[k] for k in cls.__dataclass_fields__})
        except KeyError as e:
            raise ContractError(f"{path}: report missing key {e}") from e


def full_report(y_true, y_pred) -> MetricsReport:
    tp, fp, fn, tn = confusion_counts(y_true, y_pred)
    return MetricsReport(
        accuracy=accuracy(y_true, y_pred),
        micro_f1=micro_f1(y_true, y_pred),
        micro_jaccard=micro_jaccard(y_true, y_pred),
        hamming_loss=hamming_loss(y_true, y_pred),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
    )
