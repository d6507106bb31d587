"""Scoring rules and top-label calibration error.

All functions take predictions of shape ``(n_samples, k)`` and integer labels
of shape ``(n_samples,)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInputError, check_labels, check_probs

DEFAULT_BINS = 15
NLL_FLOOR = 1e-12


def _validate(preds, labels):
    p = check_probs(preds)
    if p.ndim != 2:
        raise InvalidInputError("predictions must be a 2-d array")
    if p.shape[0] == 0:
        raise InvalidInputError("predictions must be nonempty")
    y = check_labels(labels, p.shape[0], p.shape[1])
    return p, y


def bin_edges(n_bins: int) -> np.ndarray:
    if n_bins < 1:
        raise InvalidInputError("number of bins must be at least 1")
    return np.linspace(0.0, 1.0, n_bins + 1)


def assign_bins(values, edges) -> np.ndarray:
    """Bin index of each value for intervals ``(a[i-1], a[i]]``; zero goes to the first bin."""
    values = np.asarray(values, dtype=np.float64)
    idx = np.searchsorted(edges[1:], values, side="left")
    return np.clip(idx, 0, len(edges) - 2)


def top_label(preds) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class (lowest index on ties) and its confidence."""
    preds = np.asarray(preds)
    cls = np.argmax(preds, axis=1)
    return cls, preds[np.arange(preds.shape[0]), cls]


def brier(preds, labels) -> float:
    p, y = _validate(preds, labels)
    cls, conf = top_label(p)
    correct = (cls == y).astype(np.float64)
    return float(np.mean((conf - correct) ** 2))


def mc_brier(preds, labels) -> float:
    p, y = _validate(preds, labels)
    onehot = np.zeros_like(p)
    onehot[np.arange(p.shape[0]), y] = 1.0
    return float(np.mean(np.sum((p - onehot) ** 2, axis=1)))


def nll(preds, labels) -> float:
    p, y = _validate(preds, labels)
    py = np.maximum(p[np.arange(p.shape[0]), y], NLL_FLOOR)
    return float(-np.mean(np.log(py)))


def accuracy(preds, labels) -> float:
    p, y = _validate(preds, labels)
    return float(np.mean(np.argmax(p, axis=1) == y))


@dataclass
class ReliabilityTable:
    """Per-bin counts, mean confidence and accuracy.

    Empty bins carry ``count == 0`` and ``conf == acc == 0``.
    """

    edges: np.ndarray
    counts: np.ndarray
    conf: np.ndarray
    acc: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    def rows(self):
        for i in range(self.n_bins):
            yield {
                "bin": i,
                "lower": float(self.edges[i]),
                "upper": float(self.edges[i + 1]),
                "count": int(self.counts[i]),
                "conf": float(self.conf[i]),
                "acc": float(self.acc[i]),
            }


def ece(preds, labels, n_bins: int = DEFAULT_BINS) -> tuple[float, ReliabilityTable]:
    """Expected calibration error over equal-width top-label confidence bins.

    Returns the ECE together with the reliability table it was computed from.
    """
    edges = bin_edges(n_bins)
    p, y = _validate(preds, labels)
    cls, conf = top_label(p)
    correct = (cls == y).astype(np.float64)
    idx = assign_bins(conf, edges)
    counts = np.bincount(idx, minlength=n_bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=n_bins)
    acc_sum = np.bincount(idx, weights=correct, minlength=n_bins)
    nonempty = counts > 0
    mean_conf = np.zeros(n_bins)
    mean_acc = np.zeros(n_bins)
    mean_conf[nonempty] = conf_sum[nonempty] / counts[nonempty]
    mean_acc[nonempty] = acc_sum[nonempty] / counts[nonempty]
    gaps = counts / p.shape[0] * np.abs(mean_conf - mean_acc)
    table = ReliabilityTable(edges=edges, counts=counts, conf=mean_conf, acc=mean_acc)
    return float(np.sum(gaps)), table


@dataclass
class CalibrationReport:
    brier: float
    mc_brier: float
    ece: float
    nll: float
    accuracy: float
    n_samples: int
    reliability: ReliabilityTable
    extra: dict = field(default_factory=dict)

    def scores(self) -> dict:
        return {
            "brier": self.brier,
            "mc_brier": self.mc_brier,
            "ece": self.ece,
            "nll": self.nll,
            "accuracy": self.accuracy,
        }


def calibration_report(preds, labels, n_bins: int = DEFAULT_BINS) -> CalibrationReport:
    ece_value, table = ece(preds, labels, n_bins)
    return CalibrationReport(
        brier=brier(preds, labels),
        mc_brier=mc_brier(preds, labels),
        ece=ece_value,
        nll=nll(preds, labels),
        accuracy=accuracy(preds, labels),
        n_samples=int(np.shape(preds)[0]),
        reliability=table,
    )
