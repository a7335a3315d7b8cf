"""AdaModW: Adam with a momental bound on the per-coordinate step size and decoupled weight decay.

One step, per coordinate::

    m_t   = beta1 * m_{t-1} + (1 - beta1) * grad
    z_t   = beta2 * z_{t-1} + (1 - beta2) * grad**2
    m_hat = m_t / (1 - beta1**t)
    z_hat = z_t / (1 - beta2**t)
    kappa = eta / (sqrt(z_hat) + sigma)
    b_t   = beta3 * b_{t-1} + (1 - beta3) * kappa          # b_0 = 0, never bias-corrected
    rate  = min(kappa, b_t)
    x_t   = x_{t-1} - rate * (m_hat + zeta * x_{t-1})

``beta3 = 0`` switches the bound off and ``zeta = 0`` switches the decay off, giving
Adam, AdamW (decay scaled by the adaptive rate) and AdaMod as special cases; see
:func:`variant_config`.

Everything here is a pure function of its inputs; state is returned, never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError

VARIANTS = ("adam", "adamw", "adamod", "adamodw")


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    beta3: float = 0.999
    sigma: float = 1e-8
    zeta: float = 1e-4

    def __post_init__(self):
        vals = (self.eta, self.beta1, self.beta2, self.beta3, self.sigma, self.zeta)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError("optimizer hyperparameters must be finite")
        if not self.eta > 0:
            raise InvalidArgumentError("eta must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgumentError("beta1 and beta2 must lie in [0, 1)")
        if not 0 <= self.beta3 <= 1:
            raise InvalidArgumentError("beta3 must lie in [0, 1]")
        # sigma = 0 is accepted for hand-checked examples; keep it positive in real runs.
        if self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")
        if self.zeta < 0:
            raise InvalidArgumentError("zeta must be >= 0")


def variant_config(name: str, base: OptimizerConfig | None = None) -> OptimizerConfig:
    """Degenerate configurations of AdaModW.

    ``adam`` drops bound and decay, ``adamw`` drops the bound, ``adamod`` drops the
    decay, ``adamodw`` keeps ``base`` unchanged.
    """
    base = base or OptimizerConfig()
    if name == "adam":
        return replace(base, beta3=0.0, zeta=0.0)
    if name == "adamw":
        return replace(base, beta3=0.0)
    if name == "adamod":
        return replace(base, zeta=0.0)
    if name == "adamodw":
        return base
    raise InvalidArgumentError(f"unknown optimizer variant {name!r}; expected one of {VARIANTS}")


def _readonly(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.flags.writeable = False
    return x


@dataclass(frozen=True)
class OptimizerState:
    m: np.ndarray
    z: np.ndarray
    b: np.ndarray
    t: int = 0

    def __post_init__(self):
        for name in ("m", "z", "b"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if not (self.m.shape == self.z.shape == self.b.shape):
            raise InvalidArgumentError("moment vectors must share a shape")
        if self.t < 0:
            raise InvalidArgumentError("step counter must be >= 0")

    @classmethod
    def zeros(cls, size: int = 24) -> "OptimizerState":
        z = np.zeros(size)
        return cls(z, z, z, 0)


@dataclass(frozen=True)
class StepResult:
    new_params: np.ndarray
    new_state: OptimizerState
    effective_lr: np.ndarray


def _check_finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError(f"{name} must be finite")
    return x


def moments_update(state: OptimizerState, grad, config: OptimizerConfig):
    grad = _check_finite(grad, "gradient")
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    z = config.beta2 * state.z + (1.0 - config.beta2) * grad * grad
    return m, z


def bias_correct(m, z, t: int, config: OptimizerConfig):
    if t < 1:
        raise InvalidArgumentError("bias correction needs t >= 1")
    return m / (1.0 - config.beta1 ** t), z / (1.0 - config.beta2 ** t)


def bounded_rate(z_hat, b_prev, config: OptimizerConfig):
    """Returns ``(kappa, b, rate)``: raw adaptive rate, its running average, and their minimum."""
    kappa = config.eta / (np.sqrt(z_hat) + config.sigma)
    b = config.beta3 * np.asarray(b_prev, dtype=float) + (1.0 - config.beta3) * kappa
    return kappa, b, np.minimum(kappa, b)


def step(params, state: OptimizerState, grad, config: OptimizerConfig) -> StepResult:
    params = _check_finite(params, "params")
    t = state.t + 1
    m, z = moments_update(state, grad, config)
    m_hat, z_hat = bias_correct(m, z, t, config)
    _, b, rate = bounded_rate(z_hat, state.b, config)
    new_params = params - rate * (m_hat + config.zeta * params)
    return StepResult(_readonly(new_params), OptimizerState(m, z, b, t), _readonly(rate))


def ema_closed_form(kappas, beta3: float):
    """Expanded form of the bound recurrence: ``(1-beta3) * sum_k beta3**(t-k) * kappa_k``.

    ``kappas`` is the history kappa_1..kappa_t along the first axis.
    """
    kappas = np.asarray(kappas, dtype=float)
    t = kappas.shape[0]
    if t < 1:
        raise InvalidArgumentError("need at least one rate in the history")
    weights = beta3 ** np.arange(t - 1, -1, -1, dtype=float)
    return (1.0 - beta3) * np.tensordot(weights, kappas, axes=1)
