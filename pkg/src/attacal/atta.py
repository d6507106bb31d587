"""Adaptive test-time-augmentation fusion (M-ATTA and V-ATTA).

The calibrated prediction blends the original prediction ``p0`` with the
average of per-augmentation-type softmaxes of weighted logits::

    p(w) = (1 - w) * p0 + w * mean_i softmax(W[:, i] * z_i)

The blend weight ``w`` is searched per sample on the grid
``omega_star - n * epsilon`` (scanning downward) and the first value at which
the predicted class agrees with ``p0`` is used, so calibrated predictions
never change the predicted class.

The column softmaxes are averaged rather than summed so that the fused vector
stays on the simplex for any number of augmentation types.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import Dataset, InvalidInputError, Sample, argmax_index, softmax

DEFAULT_EPSILON = 0.01


def _check_omega_star(omega_star: float) -> float:
    omega_star = float(omega_star)
    if not 0.0 <= omega_star <= 1.0:
        raise InvalidInputError(f"omega_star must lie in [0, 1], got {omega_star}")
    return omega_star


@dataclass(frozen=True)
class MattaParams:
    """Full per-class, per-augmentation weight matrix ``W`` of shape (k, m)."""

    W: np.ndarray
    omega_star: float = 1.0

    variant = "matta"

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2 or not np.all(np.isfinite(W)):
            raise InvalidInputError("W must be a finite (k, m) matrix")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "omega_star", _check_omega_star(self.omega_star))

    @property
    def k(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1]

    def logit_weights(self) -> np.ndarray:
        """Weights laid out like the augmented logits, shape (m, k)."""
        return self.W.T

    @classmethod
    def ones(cls, k: int, m: int, omega_star: float = 1.0) -> "MattaParams":
        return cls(np.ones((k, m)), omega_star)


@dataclass(frozen=True)
class VattaParams:
    """One scalar weight per augmentation type, shape (m,)."""

    w: np.ndarray
    omega_star: float = 1.0

    variant = "vatta"

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise InvalidInputError("w must be a finite vector")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "omega_star", _check_omega_star(self.omega_star))

    @property
    def k(self):
        return None

    @property
    def m(self) -> int:
        return self.w.shape[0]

    def logit_weights(self) -> np.ndarray:
        return self.w[:, None]

    def as_matta(self, k: int) -> MattaParams:
        return MattaParams(np.tile(self.w, (k, 1)), self.omega_star)

    @classmethod
    def ones(cls, m: int, omega_star: float = 1.0) -> "VattaParams":
        return cls(np.ones(m), omega_star)


AttaParams = Union[MattaParams, VattaParams]


def _check_dims(params: AttaParams, k: int, m: int) -> None:
    if params.m != m or (params.k is not None and params.k != k):
        raise InvalidInputError(
            f"parameters for (k={params.k}, m={params.m}) do not match data with k={k}, m={m}"
        )


def augmented_probs(z: np.ndarray, params: AttaParams) -> np.ndarray:
    """Mean of the per-type softmaxes of the weighted logits.

    ``z`` has shape (..., m, k); the result has shape (..., k).
    """
    return softmax(z * params.logit_weights(), axis=-1).mean(axis=-2)


def blend(p0: np.ndarray, q: np.ndarray, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim == 1:
        omega = omega[:, None]
    return (1.0 - omega) * p0 + omega * q


def _fuse(sample: Sample, params: AttaParams, omega: float) -> np.ndarray:
    if not 0.0 <= omega <= 1.0:
        raise InvalidInputError(f"omega must lie in [0, 1], got {omega}")
    _check_dims(params, sample.k, sample.m)
    return blend(sample.p0, augmented_probs(sample.z, params), omega)


def matta_fuse(sample: Sample, params: MattaParams, omega: float) -> np.ndarray:
    return _fuse(sample, params, omega)


def vatta_fuse(sample: Sample, params: VattaParams, omega: float) -> np.ndarray:
    return _fuse(sample, params, omega)


def adaptive_omega(
    sample: Sample,
    fuse: Callable[[Sample, float], np.ndarray],
    omega_star: float,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Largest grid value ``omega_star - n*epsilon`` keeping the original class.

    Returns 0 when the grid is exhausted; at 0 the fused vector is ``p0``.
    """
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    omega_star = _check_omega_star(omega_star)
    c0 = argmax_index(sample.p0)
    n = 0
    while True:
        omega = omega_star - n * epsilon
        if omega <= 0:
            return 0.0
        if argmax_index(fuse(sample, omega)) == c0:
            return omega
        n += 1


def adaptive_omegas(
    p0: np.ndarray, q: np.ndarray, omega_star: float, epsilon: float = DEFAULT_EPSILON
) -> np.ndarray:
    """Vectorised :func:`adaptive_omega` given precomputed augmented probabilities."""
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    omega_star = _check_omega_star(omega_star)
    n_samples = p0.shape[0]
    c0 = np.argmax(p0, axis=1)
    out = np.zeros(n_samples)
    pending = np.arange(n_samples)
    n = 0
    while pending.size:
        omega = omega_star - n * epsilon
        if omega <= 0:
            break
        fused = (1.0 - omega) * p0[pending] + omega * q[pending]
        ok = np.argmax(fused, axis=1) == c0[pending]
        out[pending[ok]] = omega
        pending = pending[~ok]
        n += 1
    return out


def predict(dataset: Dataset, params: AttaParams, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Calibrated predictions for every sample of ``dataset``, shape (n, k)."""
    _check_dims(params, dataset.k, dataset.m)
    q = augmented_probs(dataset.z, params)
    omegas = adaptive_omegas(dataset.p0, q, params.omega_star, epsilon)
    return blend(dataset.p0, q, omegas)
