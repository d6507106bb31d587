"""Post-hoc calibration baselines: temperature scaling, histogram binning and
isotonic regression.

Binning methods remap the top-label confidence; the predicted class is kept
even when the remapped confidence falls below another class's probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, check_labels, check_probs, log_softmax, softmax
from .metrics import assign_bins, bin_edges

T_BOUNDS = (0.05, 20.0)
HISTOGRAM_BINS = 15
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TemperatureParams:
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidInputError(f"temperature must be positive, got {self.T}")


@dataclass(frozen=True)
class BinningParams:
    """Step function on [0, 1]: value ``values[i]`` on ``(edges[i], edges[i+1]]``."""

    edges: np.ndarray
    values: np.ndarray
    mode: str = "histogram"

    def __post_init__(self):
        edges = np.array(self.edges, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if self.mode not in ("histogram", "isotonic"):
            raise InvalidInputError(f"unknown binning mode {self.mode!r}")
        if edges.ndim != 1 or values.ndim != 1 or len(edges) != len(values) + 1 or len(values) < 1:
            raise InvalidInputError("binning needs M + 1 edges for M values")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise InvalidInputError("bin edges must increase strictly from 0 to 1")
        if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
            raise InvalidInputError("bin values must lie in [0, 1]")
        if self.mode == "isotonic" and np.any(np.diff(values) < 0):
            raise InvalidInputError("isotonic values must be non-decreasing")
        edges.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return len(self.values)

    def __call__(self, confidences) -> np.ndarray:
        return self.values[assign_bins(confidences, self.edges)]


def _check_logits(logits, labels=None):
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0 or z.shape[1] == 0:
        raise InvalidInputError("logits must be a nonempty (n_samples, k) array")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits contain non-finite values")
    if labels is None:
        return z
    return z, check_labels(labels, z.shape[0], z.shape[1])


def _temperature_nll(z, y, T):
    return float(-np.mean(log_softmax(z / T)[np.arange(z.shape[0]), y]))


def fit_temperature(logits, labels, bounds=T_BOUNDS, tol: float = 1e-4) -> TemperatureParams:
    """NLL-optimal temperature by golden-section search over ``log T``."""
    z, y = _check_logits(logits, labels)
    lo, hi = math.log(bounds[0]), math.log(bounds[1])

    def f(log_t):
        return _temperature_nll(z, y, math.exp(log_t))

    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    return TemperatureParams(math.exp((lo + hi) / 2.0))


def apply_temperature(logits, params: TemperatureParams | float) -> np.ndarray:
    T = params.T if isinstance(params, TemperatureParams) else float(params)
    if not T > 0:
        raise InvalidInputError("temperature must be positive")
    return softmax(_check_logits(logits) / T, axis=-1)


def _check_pairs(confidences, correctness):
    c = np.asarray(confidences, dtype=np.float64)
    o = np.asarray(correctness, dtype=np.float64)
    if c.ndim != 1 or o.shape != c.shape:
        raise InvalidInputError("confidences and correctness must be 1-d arrays of equal length")
    if c.size == 0:
        raise InvalidInputError("need at least one calibration pair")
    if not np.all(np.isfinite(c)) or np.any(c < 0) or np.any(c > 1):
        raise InvalidInputError("confidences must lie in [0, 1]")
    if np.any((o != 0) & (o != 1)):
        raise InvalidInputError("correctness must be 0 or 1")
    return c, o


def fit_histogram_binning(confidences, correctness, n_bins: int = HISTOGRAM_BINS) -> BinningParams:
    """Equal-width bins mapped to their empirical accuracy.

    Bins without training points map to their own midpoint.
    """
    c, o = _check_pairs(confidences, correctness)
    edges = bin_edges(n_bins)
    idx = assign_bins(c, edges)
    counts = np.bincount(idx, minlength=n_bins)
    hits = np.bincount(idx, weights=o, minlength=n_bins)
    values = (edges[:-1] + edges[1:]) / 2.0
    filled = counts > 0
    values[filled] = hits[filled] / counts[filled]
    return BinningParams(edges, values, "histogram")


def pool_adjacent_violators(y, w=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of the sequence ``y``."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    means, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            wt = weights[-2] + weights[-1]
            mu = (weights[-2] * means[-2] + weights[-1] * means[-1]) / wt
            size = sizes[-2] + sizes[-1]
            del means[-1], weights[-1], sizes[-1]
            means[-1], weights[-1], sizes[-1] = mu, wt, size
    return np.repeat(means, sizes)


def fit_isotonic(confidences, correctness) -> BinningParams:
    """Isotonic regression of correctness on confidence.

    Each pooled block becomes one bin whose upper edge is the block's largest
    training confidence (the last bin extends to 1). Queries falling between
    two blocks therefore take the value of the block on their right.
    """
    c, o = _check_pairs(confidences, correctness)
    xs, inverse = np.unique(c, return_inverse=True)
    w = np.bincount(inverse).astype(np.float64)
    ybar = np.bincount(inverse, weights=o) / w
    fitted = pool_adjacent_violators(ybar, w)

    # block boundaries: positions where the fitted value changes
    change = np.flatnonzero(np.diff(fitted) != 0)
    uppers = xs[change]
    values = np.append(fitted[change], fitted[-1])
    if uppers.size and uppers[0] == 0.0:
        # a block holding only zero confidences keeps a nonempty interval
        uppers[0] = np.nextafter(0.0, 1.0)
    edges = np.concatenate([[0.0], uppers, [1.0]])
    return BinningParams(edges, np.clip(values, 0.0, 1.0), "isotonic")


def apply_binning(preds, params: BinningParams) -> np.ndarray:
    """Remap each prediction's top confidence through ``params``.

    The remaining mass is shared among the other classes in proportion to
    their original probabilities (uniformly if they were all zero). Other
    classes are then capped at the new top value and the vector renormalised,
    so the original top class stays the predicted class.
    """
    if not isinstance(params, BinningParams):
        raise InvalidInputError("params must be BinningParams")
    p = check_probs(preds)
    if p.ndim != 2 or p.shape[0] == 0:
        raise InvalidInputError("predictions must be a nonempty (n_samples, k) array")
    n, k = p.shape
    rows = np.arange(n)
    top = np.argmax(p, axis=1)
    conf = p[rows, top]
    theta = params(conf)
    if k == 1:
        return np.ones_like(p)

    others = p.copy()
    others[rows, top] = 0.0
    rest = others.sum(axis=1, keepdims=True)
    share = np.where(rest > 0, others / np.where(rest > 0, rest, 1.0), 1.0 / (k - 1))
    share[rows, top] = 0.0
    out = share * (1.0 - theta)[:, None]
    out = np.minimum(out, theta[:, None])
    out[rows, top] = theta
    total = out.sum(axis=1, keepdims=True)
    # theta == 0 caps every class at zero
    out = np.where(total > 0, out / np.where(total > 0, total, 1.0), 1.0 / k)

    # after capping, a lower-index class tied with the top would win the argmax
    new_top = out[rows, top]
    below = np.nextafter(new_top, 0.0)[:, None]
    lower = np.arange(k)[None, :] < top[:, None]
    out = np.where(lower & (out >= new_top[:, None]), below, out)
    return out
