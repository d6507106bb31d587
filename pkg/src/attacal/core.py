"""Numeric primitives and data containers shared by the calibrators.

Classes are indexed from 0 throughout. Augmented logits are stored with one
row per augmentation type, so a single sample's logit block has shape
``(m, k)``; row ``i`` is the mean logit of augmentation type ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

PROB_ATOL = 1e-9
RENORM_ATOL = 1e-6


class InvalidInputError(ValueError):
    """Raised when an input violates a documented precondition."""


def _as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidInputError(f"{name} must have {ndim} dimension(s), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def softmax(z, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    z = _as_float_array(z, "logits")
    if z.size == 0:
        raise InvalidInputError("logits must be nonempty")
    shifted = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(z, axis: int = -1) -> np.ndarray:
    z = _as_float_array(z, "logits")
    shifted = z - np.max(z, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def argmax_index(p) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("argmax_index expects a nonempty 1-d vector")
    # np.argmax returns the first occurrence of the maximum
    return int(np.argmax(arr))


def check_probs(p, *, renormalize: bool = False) -> np.ndarray:
    """Validate rows of ``p`` as points on the probability simplex.

    With ``renormalize=True`` rows whose sum is off by at most ``RENORM_ATOL``
    are rescaled to sum to one (rows already within ``PROB_ATOL`` are left
    untouched so serialized values round-trip exactly).
    """
    p = _as_float_array(p, "probabilities")
    if p.ndim not in (1, 2) or p.shape[-1] == 0:
        raise InvalidInputError(f"probabilities must be a vector or matrix, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    sums = p.sum(axis=-1, keepdims=True)
    err = np.abs(sums - 1.0)
    if renormalize:
        if np.any(err > RENORM_ATOL):
            raise InvalidInputError("probability vector does not sum to 1")
        fix = err > PROB_ATOL
        if np.any(fix):
            p = np.where(fix, p / sums, p)
    elif np.any(err > PROB_ATOL):
        raise InvalidInputError("probability vector does not sum to 1")
    return p


def check_labels(labels, n: int, k: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != n:
        raise InvalidInputError(f"expected {n} labels, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidInputError("labels must be integers")
    y = y.astype(np.int64)
    if np.any(y < 0) or np.any(y >= k):
        raise InvalidInputError(f"labels must lie in [0, {k})")
    return y


def aggregate_logits(raw: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    """Average the replicate logits of each augmentation type.

    ``raw[i][j]`` is the logit vector of the ``j``-th replicate of type ``i``.
    Returns an ``(m, k)`` array whose row ``i`` is the mean over replicates.
    """
    if len(raw) == 0:
        raise InvalidInputError("need at least one augmentation type")
    rows = []
    k = None
    for i, group in enumerate(raw):
        block = _as_float_array(group, f"logits of augmentation type {i}")
        if block.ndim != 2 or block.shape[0] == 0:
            raise InvalidInputError(f"augmentation type {i} needs a nonempty list of logit vectors")
        if k is None:
            k = block.shape[1]
        elif block.shape[1] != k:
            raise InvalidInputError("logit vectors have mismatched dimensions")
        rows.append(block.sum(axis=0) / block.shape[0])
    return np.stack(rows)


@dataclass(frozen=True)
class Sample:
    p0: np.ndarray
    z: np.ndarray
    label: int

    @property
    def k(self) -> int:
        return self.p0.shape[0]

    @property
    def m(self) -> int:
        return self.z.shape[0]


class Dataset:
    """Immutable collection of labelled samples stored as dense arrays.

    Parameters
    ----------
    p0 : array-like, shape (n_samples, k)
        Original predictions.
    z : array-like, shape (n_samples, m, k)
        Mean augmented logits, one row per augmentation type.
    labels : array-like of int, shape (n_samples,)
    """

    def __init__(self, p0, z, labels, *, renormalize: bool = False):
        p0 = check_probs(p0, renormalize=renormalize)
        if p0.ndim != 2:
            raise InvalidInputError("p0 must be a 2-d array")
        z = _as_float_array(z, "augmented logits", ndim=3)
        n, k = p0.shape
        if z.shape[0] != n or z.shape[2] != k:
            raise InvalidInputError(
                f"augmented logits shape {z.shape} does not match p0 shape {p0.shape}"
            )
        if z.shape[1] < 1:
            raise InvalidInputError("need at least one augmentation type")
        y = check_labels(labels, n, k)
        for arr in (p0, z, y):
            arr.setflags(write=False)
        self._p0, self._z, self._labels = p0, z, y

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        if len(samples) == 0:
            raise InvalidInputError("cannot build a dataset from zero samples")
        return cls(
            np.stack([s.p0 for s in samples]),
            np.stack([s.z for s in samples]),
            np.array([s.label for s in samples], dtype=np.int64),
        )

    @property
    def p0(self) -> np.ndarray:
        return self._p0

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def k(self) -> int:
        return self._p0.shape[1]

    @property
    def m(self) -> int:
        return self._z.shape[1]

    def __len__(self) -> int:
        return self._p0.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return Sample(self._p0[idx], self._z[idx], int(self._labels[idx]))
        return Dataset(self._p0[idx], self._z[idx], self._labels[idx])

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(
            np.concatenate([self._p0, other.p0]),
            np.concatenate([self._z, other.z]),
            np.concatenate([self._labels, other.labels]),
        )

    def __repr__(self) -> str:
        return f"Dataset(n={len(self)}, k={self.k}, m={self.m})"
