"""scikit-learn style wrappers around the calibration methods.

The test-time-augmentation calibrators take either a :class:`Dataset` or a
stacked array of shape ``(n_samples, m + 1, k)`` whose first row per sample is
the original prediction and whose remaining rows are the mean augmented
logits (see :func:`stack_inputs`).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import atta, baselines, optim
from .core import Dataset, InvalidInputError

__all__ = [
    "stack_inputs",
    "unstack_inputs",
    "probs_to_logits",
    "TemperatureScaling",
    "HistogramBinning",
    "IsotonicCalibration",
    "MATTA",
    "VATTA",
    "fit_method",
    "apply_method",
]


def stack_inputs(p0, z) -> np.ndarray:
    p0 = np.asarray(p0, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return np.concatenate([p0[:, None, :], z], axis=1)


def unstack_inputs(X, y=None) -> Dataset:
    if isinstance(X, Dataset):
        return X
    X = check_array(X, allow_nd=True, ensure_min_features=1)
    if X.ndim != 3 or X.shape[1] < 2:
        raise InvalidInputError("stacked input must have shape (n_samples, m + 1, k) with m >= 1")
    if y is None:
        y = np.zeros(X.shape[0], dtype=np.int64)
    return Dataset(X[:, 0, :], X[:, 1:, :], y)


def probs_to_logits(p) -> np.ndarray:
    """Logits reproducing ``p`` under softmax; zeros map to a very negative logit."""
    return np.log(np.maximum(np.asarray(p, dtype=np.float64), np.finfo(np.float64).tiny))


def _top_label_pairs(P, y):
    P = check_array(P)
    y = np.asarray(y)
    top = np.argmax(P, axis=1)
    return P[np.arange(P.shape[0]), top], (top == y).astype(np.float64)


class _ClassifierMixin:
    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class TemperatureScaling(_ClassifierMixin, BaseEstimator):
    """Divide logits by a scalar temperature fitted by NLL.

    Parameters
    ----------
    inputs : {"logits", "probs"}, default="logits"
        Whether ``X`` holds logits or probabilities.
    """

    def __init__(self, inputs="logits"):
        self.inputs = inputs

    def _logits(self, X):
        X = check_array(X)
        if self.inputs == "probs":
            return probs_to_logits(X)
        if self.inputs != "logits":
            raise InvalidInputError("inputs must be 'logits' or 'probs'")
        return X

    def fit(self, X, y):
        self.params_ = baselines.fit_temperature(self._logits(X), y)
        self.temperature_ = self.params_.T
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return baselines.apply_temperature(self._logits(X), self.params_)


class HistogramBinning(_ClassifierMixin, BaseEstimator):
    def __init__(self, n_bins=baselines.HISTOGRAM_BINS):
        self.n_bins = n_bins

    def fit(self, X, y):
        conf, correct = _top_label_pairs(X, y)
        self.params_ = baselines.fit_histogram_binning(conf, correct, self.n_bins)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return baselines.apply_binning(check_array(X), self.params_)


class IsotonicCalibration(_ClassifierMixin, BaseEstimator):
    def fit(self, X, y):
        conf, correct = _top_label_pairs(X, y)
        self.params_ = baselines.fit_isotonic(conf, correct)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return baselines.apply_binning(check_array(X), self.params_)


class _ATTABase(_ClassifierMixin, BaseEstimator):
    _variant = None

    def __init__(self, epochs=500, batch_size=500, learning_rate=0.001, epsilon=atta.DEFAULT_EPSILON,
                 seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.seed = seed

    def fit(self, X, y=None):
        if y is None and not isinstance(X, Dataset):
            raise InvalidInputError("labels are required unless X is a Dataset")
        ds = unstack_inputs(X, y)
        config = optim.FitConfig(epochs=self.epochs, batch_size=self.batch_size,
                                 learning_rate=self.learning_rate, seed=self.seed)
        result = optim.fit(ds, self._variant, config)
        self.params_ = result.params
        self.loss_history_ = result.loss_history
        self.best_epoch_ = result.best_epoch
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return atta.predict(unstack_inputs(X), self.params_, self.epsilon)


class MATTA(_ATTABase):
    """Adaptive TTA calibrator with a full (k, m) weight matrix."""

    _variant = "matta"


class VATTA(_ATTABase):
    """Adaptive TTA calibrator with one weight per augmentation type."""

    _variant = "vatta"


def fit_method(method: str, dataset: Dataset, config: optim.FitConfig | None = None,
               n_bins: int = baselines.HISTOGRAM_BINS):
    """Fit ``method`` on a dataset; returns ``(params, fit_result_or_None)``."""
    if method in ("matta", "vatta"):
        result = optim.fit(dataset, method, config)
        return result.params, result
    if method == "temperature":
        return baselines.fit_temperature(probs_to_logits(dataset.p0), dataset.labels), None
    conf, correct = _top_label_pairs(dataset.p0, dataset.labels)
    if method == "histogram":
        return baselines.fit_histogram_binning(conf, correct, n_bins), None
    if method == "isotonic":
        return baselines.fit_isotonic(conf, correct), None
    raise InvalidInputError(f"method {method!r} cannot be fitted")


def apply_method(method: str, params, dataset: Dataset, epsilon: float = atta.DEFAULT_EPSILON):
    if method == "vanilla":
        return np.array(dataset.p0)
    if method in ("matta", "vatta"):
        return atta.predict(dataset, params, epsilon)
    if method == "temperature":
        return baselines.apply_temperature(probs_to_logits(dataset.p0), params)
    if method in ("histogram", "isotonic"):
        return baselines.apply_binning(dataset.p0, params)
    raise InvalidInputError(f"unknown method {method!r}")
