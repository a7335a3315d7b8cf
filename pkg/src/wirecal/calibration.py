"""Identification of D-H deviations from draw-wire length measurements.

The optimised variable is the deviation ``delta`` from the nominal model
(``params = nominal ⊕ delta``), starting at zero, so weight decay pulls the
estimate back toward the nominal robot rather than toward zero-length links.

The loss is ``L = 1/(2n) * sum(r_i**2)`` with ``r_i = measured_i - predicted_i``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import optimizer as opt
from .errors import CalibrationDivergedError, InvalidArgumentError
from .jacobian import batch_cable_jacobian
from .kinematics import (
    ANGLE_MASK,
    N_LINKS,
    N_PARAMS,
    PARAM_NAMES,
    DHParams,
    MeasurementRig,
    batch_cable_lengths,
)

CONVERGENCE_WINDOW = 10
GRADIENT_TOL = 1e-12
# Arc length (mm) that makes one radian comparable to one millimetre of link length.
ANGLE_SCALE_MM = 1000.0


@dataclass(frozen=True)
class MeasurementSet:
    q: np.ndarray  # (n, 6) joint angles, radians
    c_measured: np.ndarray  # (n,) wire lengths, mm
    rig: MeasurementRig

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        c = np.array(self.c_measured, dtype=float)
        if q.ndim != 2 or q.shape[1] != N_LINKS or c.shape != (q.shape[0],):
            raise InvalidArgumentError(
                f"need (n, 6) configurations and n lengths, got {q.shape} and {c.shape}")
        if q.shape[0] < 1:
            raise InvalidArgumentError("a measurement set needs at least one record")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(c))):
            raise InvalidArgumentError("measurements must be finite")
        if np.any(c <= 0):
            raise InvalidArgumentError("measured wire lengths must be positive")
        q.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c_measured", c)

    def __len__(self):
        return self.q.shape[0]

    def subset(self, idx) -> "MeasurementSet":
        return MeasurementSet(self.q[idx], self.c_measured[idx], self.rig)


@dataclass(frozen=True)
class Metrics:
    rmse: float
    mean: float
    max: float

    def as_dict(self):
        return {"rmse_mm": self.rmse, "mean_mm": self.mean, "max_mm": self.max}

    def __str__(self):
        return f"RMSE={self.rmse:.6g}mm MEAN={self.mean:.6g}mm MAX={self.max:.6g}mm"


def default_column_scaling() -> np.ndarray:
    return np.where(ANGLE_MASK, ANGLE_SCALE_MM, 1.0)


@dataclass(frozen=True)
class CalibrationConfig:
    optimizer: opt.OptimizerConfig = field(default_factory=opt.OptimizerConfig)
    max_iters: int = 5000
    tol_rel: float = 1e-10
    param_mask: Optional[np.ndarray] = None  # True = identify, False = keep nominal
    column_scaling: Optional[np.ndarray] = None  # optimise w * delta instead of delta
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.tol_rel > 0:
            raise InvalidArgumentError("tol_rel must be > 0")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")
        object.__setattr__(self, "param_mask", _mask_or_default(self.param_mask))
        object.__setattr__(self, "column_scaling", _scaling_or_default(self.column_scaling))


def _mask_or_default(mask) -> np.ndarray:
    if mask is None:
        mask = np.ones(N_PARAMS, dtype=bool)
    mask = np.array(mask, dtype=bool)
    if mask.shape != (N_PARAMS,):
        raise InvalidArgumentError("parameter mask must have 24 entries")
    mask.flags.writeable = False
    return mask


def _scaling_or_default(scaling) -> np.ndarray:
    if scaling is None:
        scaling = np.ones(N_PARAMS)
    scaling = np.array(scaling, dtype=float)
    if scaling.shape != (N_PARAMS,) or not np.all(np.isfinite(scaling)) or np.any(scaling <= 0):
        raise InvalidArgumentError("column scaling must be 24 positive finite weights")
    scaling.flags.writeable = False
    return scaling


def mask_from_names(frozen) -> np.ndarray:
    """Mask that identifies everything except the named parameters (e.g. ``["theta6"]``)."""
    mask = np.ones(N_PARAMS, dtype=bool)
    for name in frozen:
        try:
            mask[PARAM_NAMES.index(name)] = False
        except ValueError:
            raise InvalidArgumentError(f"unknown parameter name {name!r}") from None
    return mask


@dataclass
class CalibrationReport:
    trace: list
    final_delta: np.ndarray
    final_params: DHParams
    iterations_run: int
    converged: bool
    wall_time: float
    nominal: DHParams
    holdout_metrics: Optional[Metrics] = None

    @property
    def final_metrics(self) -> Metrics:
        return self.trace[-1]


# --- residuals, metrics, gradient ---------------------------------------------

def residuals(params: DHParams, data: MeasurementSet) -> np.ndarray:
    return data.c_measured - batch_cable_lengths(params, data.q, data.rig)


def compute_metrics(r) -> Metrics:
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise InvalidArgumentError("metrics need at least one residual")
    a = np.abs(r)
    peak = float(np.max(a))
    # scale by the peak so tiny residuals do not underflow when squared
    rmse = peak * float(np.sqrt(np.mean((a / peak) ** 2))) if peak > 0 else 0.0
    return Metrics(
        rmse=rmse,
        mean=float(np.mean(a)),
        max=peak,
    )


def evaluate(params: DHParams, holdout: MeasurementSet) -> Metrics:
    return compute_metrics(residuals(params, holdout))


def _rows(g, data: MeasurementSet, workers: int = 1):
    """Predicted lengths and wire Jacobian rows, optionally computed in row chunks.

    Chunks are concatenated in record order, so the result does not depend on
    ``workers``.
    """
    if workers == 1 or len(data) < 2 * workers:
        return batch_cable_jacobian(g, data.q, data.rig)
    chunks = np.array_split(np.arange(len(data)), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: batch_cable_jacobian(g, data.q[idx], data.rig), chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _gradient(J, r, mask, scaling):
    grad = -(J.T @ r) / r.shape[0]
    grad = grad / scaling
    grad[~mask] = 0.0
    return grad


def loss_gradient(delta, nominal: DHParams, data: MeasurementSet, mask=None, scaling=None,
                  workers: int = 1) -> np.ndarray:
    """Gradient of ``1/(2n) sum r_i^2`` at ``nominal ⊕ delta``.

    With ``scaling`` w the gradient is taken w.r.t. ``w * delta`` (i.e. divided
    by w); masked coordinates are zero.
    """
    mask = _mask_or_default(mask)
    scaling = _scaling_or_default(scaling)
    params = nominal.oplus(delta)
    lengths, J = _rows(params.flatten(), data, workers)
    return _gradient(J, data.c_measured - lengths, mask, scaling)


# --- main loop ----------------------------------------------------------------

def calibrate(nominal: DHParams, data: MeasurementSet, config: CalibrationConfig = None,
              holdout: MeasurementSet = None,
              on_iteration: Callable[[int, Metrics], None] = None) -> CalibrationReport:
    """Fit the deviation vector with AdaModW, starting from the nominal model.

    ``trace[k]`` holds the training metrics at the k-th iterate (``trace[0]`` is
    the nominal model); the final parameters are the iterate of ``trace[-1]``.
    Stops once the relative RMSE change stays below ``tol_rel`` for
    ``CONVERGENCE_WINDOW`` consecutive iterations, or the gradient vanishes.
    """
    config = config or CalibrationConfig()
    mask, scaling = config.param_mask, config.column_scaling
    g_nominal = nominal.flatten()
    started = time.perf_counter()

    u = np.zeros(N_PARAMS)  # optimiser variable: scaling * delta
    state = opt.OptimizerState.zeros(N_PARAMS)
    trace = []
    converged = False
    streak = 0

    def report(u_final, done):
        delta = u_final / scaling
        return CalibrationReport(
            trace=list(trace),
            final_delta=delta,
            final_params=DHParams.from_flat(g_nominal + delta),
            iterations_run=len(trace),
            converged=done,
            wall_time=time.perf_counter() - started,
            nominal=nominal,
        )

    last_good = u
    for k in range(config.max_iters):
        delta = u / scaling
        lengths, J = _rows(g_nominal + delta, data, config.workers)
        r = data.c_measured - lengths
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(J)):
            raise CalibrationDivergedError(
                f"non-finite residuals at iteration {k}", report(last_good, False))
        last_good = u
        metrics = compute_metrics(r)
        trace.append(metrics)
        if on_iteration is not None:
            on_iteration(k, metrics)

        grad = _gradient(J, r, mask, scaling)
        if k > 0:
            prev = trace[-2].rmse
            change = abs(metrics.rmse - prev)
            rel = change / prev if prev > 0 else (0.0 if change == 0 else math.inf)
            streak = streak + 1 if rel < config.tol_rel else 0
        if streak >= CONVERGENCE_WINDOW or np.max(np.abs(grad)) < GRADIENT_TOL:
            converged = True
            break
        if k == config.max_iters - 1:
            break
        result = opt.step(u, state, grad, config.optimizer)
        u = np.array(result.new_params)
        u[~mask] = 0.0
        state = result.new_state

    out = report(u, converged)
    if holdout is not None:
        out.holdout_metrics = evaluate(out.final_params, holdout)
    return out
