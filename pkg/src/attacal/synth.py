"""Synthetic classifiers with known ground truth.

Latent logits are Gaussian, ``logit_scale * N(0, I_k)``. Labels are drawn
from their softmax, so a model reporting ``softmax(latent)`` is calibrated by
construction. The original prediction is ``softmax(latent / temperature)``:
temperatures below one give an overconfident model.

Augmentation type ``i`` receives mean logits
``noise_scale * (quality[i] * onehot(label) + (1 - quality[i]) * N(0, I_k))``,
from pure noise at quality 0 to an oracle channel at quality 1.

All randomness comes from a Philox (counter-based) generator keyed by ``seed``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, InvalidInputError, softmax

DEFAULT_QUALITY = 0.8
MARGINAL_PREDICTION = (0.5, 0.3, 0.2)
MARGINAL_LABEL_PROBS = (0.5, 0.25, 0.25)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SynthSpec:
    k: int = 10
    m: int = 2
    n: int = 1000
    temperature: float = 1.0
    quality: tuple | None = None
    logit_scale: float = 2.0
    noise_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.quality is None:
            # one informative channel, the rest pure noise
            quality = np.zeros(max(self.m, 1))
            quality[0] = DEFAULT_QUALITY
        else:
            quality = np.atleast_1d(np.asarray(self.quality, dtype=np.float64))
        if quality.size == 1:
            quality = np.repeat(quality, self.m)
        object.__setattr__(self, "quality", tuple(float(q) for q in quality))
        if self.k < 2:
            raise InvalidInputError("k must be at least 2")
        if self.m < 1:
            raise InvalidInputError("m must be at least 1")
        if self.n < 1:
            raise InvalidInputError("n must be at least 1")
        if not self.temperature > 0:
            raise InvalidInputError("temperature must be positive")
        if len(self.quality) != self.m:
            raise InvalidInputError(f"need {self.m} quality values, got {len(self.quality)}")
        if any(not 0.0 <= q <= 1.0 for q in self.quality):
            raise InvalidInputError("quality values must lie in [0, 1]")
        if not (self.logit_scale > 0 and self.noise_scale > 0):
            raise InvalidInputError("scales must be positive")


def sample_labels(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` by inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf <= u[:, None]).sum(axis=1), probs.shape[1] - 1)


def generate(spec: SynthSpec) -> tuple[Dataset, np.ndarray]:
    """Draw a dataset and return it with the true class probabilities."""
    rng = make_rng(spec.seed)
    n, k, m = spec.n, spec.k, spec.m
    latent = spec.logit_scale * rng.standard_normal((n, k))
    true_probs = softmax(latent, axis=1)
    labels = sample_labels(true_probs, rng)
    p0 = softmax(latent / spec.temperature, axis=1)

    onehot = np.zeros((n, 1, k))
    onehot[np.arange(n), 0, labels] = 1.0
    quality = np.asarray(spec.quality)[None, :, None]
    noise = rng.standard_normal((n, m, k))
    z = spec.noise_scale * (quality * onehot + (1.0 - quality) * noise)
    return Dataset(p0, z, labels), true_probs


def marginal_predictor(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Constant prediction (0.5, 0.3, 0.2) with labels drawn from (0.5, 0.25, 0.25)."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    rng = make_rng(seed)
    preds = np.tile(np.array(MARGINAL_PREDICTION), (n, 1))
    labels = sample_labels(np.tile(np.array(MARGINAL_LABEL_PROBS), (n, 1)), rng)
    return preds, labels
