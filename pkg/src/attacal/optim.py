"""Fitting M-ATTA / V-ATTA weights by minimising NLL with Adam.

During training the blend weight is held at ``clamp(omega_star, 0, 1)``; the
per-sample adaptive search is piecewise constant in the parameters and is
only applied at inference time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .atta import MattaParams, VattaParams
from .core import Dataset, InvalidInputError, softmax
from .metrics import NLL_FLOOR

logger = logging.getLogger(__name__)

VARIANTS = ("matta", "vatta")


@dataclass(frozen=True)
class FitConfig:
    epochs: int = 500
    batch_size: int = 500
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise InvalidInputError("Adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise InvalidInputError("adam_eps must be positive")


@dataclass
class AdamState:
    first: np.ndarray
    second: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, theta: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(theta), np.zeros_like(theta), 0)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState, config: FitConfig) -> np.ndarray:
    """One bias-corrected Adam update; mutates ``state`` and returns new parameters."""
    b1, b2 = config.adam_beta1, config.adam_beta2
    state.step += 1
    state.first = b1 * state.first + (1 - b1) * grad
    state.second = b2 * state.second + (1 - b2) * grad * grad
    m_hat = state.first / (1 - b1**state.step)
    v_hat = state.second / (1 - b2**state.step)
    return theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def _variant_of(params) -> str:
    if isinstance(params, MattaParams):
        return "matta"
    if isinstance(params, VattaParams):
        return "vatta"
    raise InvalidInputError(f"unsupported parameter type {type(params).__name__}")


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


def _weights_mk(weights: np.ndarray, variant: str) -> np.ndarray:
    return weights.T if variant == "matta" else weights[:, None]


def _loss_and_grad(weights, omega_raw, p0, z, y, variant, want_grad=True):
    """NLL at the clamped blend weight and its gradient w.r.t. (weights, omega_raw).

    ``weights`` is W (k, m) for "matta" or w (m,) for "vatta". The gradient
    w.r.t. ``omega_raw`` passes straight through inside [0, 1]; outside it is
    kept only when a descent step would move back towards the interval.
    """
    n, m, _ = z.shape
    omega = min(max(omega_raw, 0.0), 1.0)
    rows = np.arange(n)
    s = softmax(z * _weights_mk(weights, variant), axis=-1)
    q = s.mean(axis=1)
    p_y = (1.0 - omega) * p0[rows, y] + omega * q[rows, y]
    clipped = p_y < NLL_FLOOR
    loss = float(-np.mean(np.log(np.maximum(p_y, NLL_FLOOR))))
    if not want_grad:
        return loss, None, None

    g_py = np.where(clipped, 0.0, -1.0 / (n * np.maximum(p_y, NLL_FLOOR)))
    g_omega = float(np.sum(g_py * (q[rows, y] - p0[rows, y])))
    if (omega_raw > 1.0 and g_omega < 0) or (omega_raw < 0.0 and g_omega > 0):
        g_omega = 0.0

    # dL/ds_i is the same for every augmentation type: omega * g_py / m on the label entry
    g_s = np.zeros((n, 1, s.shape[2]))
    g_s[rows, 0, y] = omega * g_py / m
    g_u = s * (g_s - np.sum(g_s * s, axis=-1, keepdims=True))
    g_wz = g_u * z
    if variant == "matta":
        g_weights = g_wz.sum(axis=0).T
    else:
        g_weights = g_wz.sum(axis=(0, 2))
    return loss, g_weights, g_omega


def _unpack(params):
    variant = _variant_of(params)
    weights = params.W if variant == "matta" else params.w
    return variant, np.asarray(weights, dtype=np.float64)


def _check_batch(batch: Dataset, params) -> None:
    if len(batch) == 0:
        raise InvalidInputError("batch must be nonempty")
    if params.m != batch.m or (params.k is not None and params.k != batch.k):
        raise InvalidInputError("parameter shape does not match the batch")


def training_loss(batch: Dataset, params) -> float:
    """Mean NLL of the fused predictions at the fixed blend weight ``omega_star``."""
    _check_batch(batch, params)
    variant, weights = _unpack(params)
    loss, _, _ = _loss_and_grad(
        weights, params.omega_star, batch.p0, batch.z, batch.labels, variant, want_grad=False
    )
    return loss


def loss_gradient(batch: Dataset, params) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`training_loss`.

    Returns ``(grad_weights, grad_omega_star)`` where ``grad_weights`` has the
    shape of ``W`` or ``w``.
    """
    _check_batch(batch, params)
    variant, weights = _unpack(params)
    _, g_w, g_o = _loss_and_grad(weights, params.omega_star, batch.p0, batch.z, batch.labels, variant)
    return g_w, g_o


@dataclass
class FitResult:
    params: object
    loss_history: list = field(default_factory=list)
    best_epoch: int = 0
    omega_star_raw: float = 1.0


def _make_params(variant, weights, omega_raw):
    omega = min(max(omega_raw, 0.0), 1.0)
    if variant == "matta":
        return MattaParams(weights.copy(), omega)
    return VattaParams(weights.copy(), omega)


def fit(dataset: Dataset, variant: str, config: FitConfig | None = None) -> FitResult:
    """Fit weights (initialised to one) and ``omega_star`` (initialised to one).

    ``loss_history[e]`` is the full-dataset training loss after epoch ``e``;
    the parameters with the lowest such loss are returned.
    """
    config = config or FitConfig()
    _check_variant(variant)
    if len(dataset) == 0:
        raise InvalidInputError("cannot fit on an empty dataset")
    n, k, m = len(dataset), dataset.k, dataset.m
    p0, z, y = dataset.p0, dataset.z, dataset.labels

    shape = (k, m) if variant == "matta" else (m,)
    n_w = int(np.prod(shape))
    theta = np.ones(n_w + 1)
    state = AdamState.zeros_like(theta)
    rng = np.random.Generator(np.random.Philox(config.seed))

    history = []
    best = (np.inf, 0, theta.copy())
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, g_w, g_o = _loss_and_grad(
                theta[:n_w].reshape(shape), theta[n_w], p0[idx], z[idx], y[idx], variant
            )
            grad = np.append(g_w.ravel(), g_o)
            theta = adam_step(theta, grad, state, config)
        loss, _, _ = _loss_and_grad(
            theta[:n_w].reshape(shape), theta[n_w], p0, z, y, variant, want_grad=False
        )
        history.append(loss)
        if loss < best[0]:
            best = (loss, epoch, theta.copy())
        if logger.isEnabledFor(logging.DEBUG) and epoch % 50 == 0:
            logger.debug("epoch %d loss %.6f omega_star %.4f", epoch, loss, theta[n_w])

    _, best_epoch, best_theta = best
    params = _make_params(variant, best_theta[:n_w].reshape(shape), best_theta[n_w])
    return FitResult(params, history, best_epoch, float(best_theta[n_w]))
