"""Kinematic calibration of 6R arms from draw-wire length measurements with AdaModW."""

from .calibration import (
    CalibrationConfig,
    CalibrationReport,
    MeasurementSet,
    Metrics,
    calibrate,
    compute_metrics,
    evaluate,
    loss_gradient,
    residuals,
)
from .errors import CalibrationDivergedError, DegenerateGeometryError, InvalidArgumentError
from .kinematics import (
    DHLink,
    DHParams,
    MeasurementRig,
    Transform,
    cable_length,
    dh_transform,
    forward_kinematics,
    jr680_nominal,
    tool_position,
)
from .optimizer import OptimizerConfig, OptimizerState, StepResult, step

__version__ = "0.1.0"

__all__ = [
    "CalibrationConfig", "CalibrationReport", "MeasurementSet", "Metrics", "calibrate",
    "compute_metrics", "evaluate", "loss_gradient", "residuals",
    "CalibrationDivergedError", "DegenerateGeometryError", "InvalidArgumentError",
    "DHLink", "DHParams", "MeasurementRig", "Transform", "cable_length", "dh_transform",
    "forward_kinematics", "jr680_nominal", "tool_position",
    "OptimizerConfig", "OptimizerState", "StepResult", "step",
]
