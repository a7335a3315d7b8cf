"""File formats: robot description JSON, measurement CSV, ground-truth sidecar, report JSON.

Files carry degrees and millimetres; everything returned to Python is radians/mm.
Floats are written with ``repr`` so values survive a round trip unchanged.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationReport, Metrics
from .datagen import DEFAULT_JOINT_LIMITS_DEG
from .errors import InvalidArgumentError
from .kinematics import N_LINKS, N_PARAMS, PARAM_NAMES, DHLink, DHParams, MeasurementRig

CSV_HEADER = ["q1_deg", "q2_deg", "q3_deg", "q4_deg", "q5_deg", "q6_deg", "cable_mm"]
TRACE_HEADER = ["iter", "rmse_mm", "mean_mm", "max_mm"]


class FormatError(InvalidArgumentError):
    """A file could not be parsed into the expected structure."""


@dataclass(frozen=True)
class RobotDescription:
    nominal: DHParams
    rig: MeasurementRig
    joint_limits: np.ndarray  # (6, 2) radians


def links_to_json(params: DHParams) -> list:
    return [
        {
            "alpha_deg": math.degrees(l.alpha),
            "a_mm": l.a,
            "d_mm": l.d,
            "theta_deg": math.degrees(l.theta_offset),
        }
        for l in params.links
    ]


def links_from_json(rows) -> DHParams:
    if not isinstance(rows, list) or len(rows) != N_LINKS:
        raise FormatError("'links' must be an array of 6 objects")
    try:
        return DHParams(tuple(
            DHLink.from_degrees(float(r["alpha_deg"]), float(r["a_mm"]),
                                float(r["d_mm"]), float(r["theta_deg"]))
            for r in rows
        ))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad link entry: {exc}") from exc


def robot_to_json(desc: RobotDescription) -> dict:
    return {
        "links": links_to_json(desc.nominal),
        "rig": {
            "base_point_mm": desc.rig.base_point.tolist(),
            "tool_offset_mm": desc.rig.tool_offset.tolist(),
        },
        "joint_limits_deg": np.degrees(desc.joint_limits).tolist(),
    }


def robot_from_json(obj) -> RobotDescription:
    try:
        nominal = links_from_json(obj["links"])
        rig = MeasurementRig(obj["rig"]["base_point_mm"], obj["rig"]["tool_offset_mm"])
        limits = np.array(obj.get("joint_limits_deg", DEFAULT_JOINT_LIMITS_DEG), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad robot description: {exc}") from exc
    if limits.shape != (N_LINKS, 2) or not np.all(np.isfinite(limits)) or np.any(limits[:, 1] < limits[:, 0]):
        raise FormatError("'joint_limits_deg' must be six [lo, hi] pairs with lo <= hi")
    return RobotDescription(nominal, rig, np.radians(limits))


def load_robot(path) -> RobotDescription:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return robot_from_json(obj)


def save_robot(path, desc: RobotDescription):
    write_json(path, robot_to_json(desc))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


# --- measurement CSV ------------------------------------------------------------

def write_measurements(path, q_deg, lengths):
    """Write records given joint angles in degrees and lengths in mm."""
    q_deg = np.asarray(q_deg, dtype=float).reshape(-1, N_LINKS)
    lengths = np.asarray(lengths, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row, c in zip(q_deg, lengths):
            w.writerow([repr(float(v)) for v in row] + [repr(float(c))])


def read_measurements(path):
    """Returns ``(q_rad, lengths)``; both empty for a header-only file."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise FormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = [r for r in rows[1:] if r]
    try:
        arr = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, 7)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return np.radians(arr[:, :N_LINKS]), arr[:, N_LINKS]


# --- reports ----------------------------------------------------------------------

def report_to_json(report: CalibrationReport, include_wall_time: bool = True) -> dict:
    out = {
        "trace": [
            {"iter": k, "rmse_mm": m.rmse, "mean_mm": m.mean, "max_mm": m.max}
            for k, m in enumerate(report.trace)
        ],
        "final_delta": [float(v) for v in report.final_delta],
        "final_delta_order": list(PARAM_NAMES),
        "final_delta_units": "rad for alpha/theta, mm for a/d",
        "final_params": links_to_json(report.final_params),
        "nominal_flat": [float(v) for v in report.nominal.flatten()],
        "converged": bool(report.converged),
        "iterations_run": int(report.iterations_run),
        "wall_time_s": float(report.wall_time) if include_wall_time else None,
    }
    if report.holdout_metrics is not None:
        out["holdout"] = report.holdout_metrics.as_dict()
    return out


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    delta = obj.get("final_delta") if isinstance(obj, dict) else None
    if not isinstance(delta, list) or len(delta) != N_PARAMS:
        raise FormatError(f"{path}: 'final_delta' must hold 24 numbers")
    return obj


def params_from_report(report: dict, nominal: DHParams, atol: float = 1e-9) -> DHParams:
    """Calibrated parameters for ``nominal``; refuses reports made for another robot."""
    recorded = report.get("nominal_flat")
    if recorded is not None:
        recorded = np.asarray(recorded, dtype=float)
        if recorded.shape != (N_PARAMS,) or not np.allclose(recorded, nominal.flatten(), rtol=0, atol=atol):
            raise FormatError("report was produced for a different nominal robot")
    return nominal.oplus(np.asarray(report["final_delta"], dtype=float))


def metrics_from_json(obj) -> Metrics:
    return Metrics(float(obj["rmse_mm"]), float(obj["mean_mm"]), float(obj["max_mm"]))
