"""Standard Denavit-Hartenberg model of a 6R serial arm and the draw-wire measurement model.

Angles are radians and lengths millimetres everywhere in this module; degree
conversion happens only at file/CLI boundaries (see :mod:`wirecal.robotio`).

The flattened parameter vector is ordered by block::

    [alpha_1..alpha_6, a_1..a_6, d_1..d_6, theta_1..theta_6]

and every Jacobian in the package uses the same column order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

N_LINKS = 6
N_PARAMS = 4 * N_LINKS

# Slices of the flattened vector.
ALPHA = slice(0, 6)
A = slice(6, 12)
D = slice(12, 18)
THETA = slice(18, 24)

BLOCK_NAMES = ("alpha", "a", "d", "theta")
PARAM_NAMES = tuple(f"{b}{i + 1}" for b in BLOCK_NAMES for i in range(N_LINKS))

ANGLE_MASK = np.zeros(N_PARAMS, dtype=bool)
ANGLE_MASK[ALPHA] = True
ANGLE_MASK[THETA] = True
ANGLE_MASK.flags.writeable = False


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]; values already in range are returned untouched."""
    x = float(x)
    if -math.pi < x <= math.pi:
        return x
    r = math.remainder(x, 2.0 * math.pi)
    if r <= -math.pi:
        r = math.pi
    return r


def angle_difference(a: float, b: float) -> float:
    """Wrapped difference ``a - b``."""
    return wrap_angle(a - b)


def _frozen(arr, shape, name) -> np.ndarray:
    out = np.array(arr, dtype=float)
    if out.shape != shape:
        raise InvalidArgumentError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidArgumentError(f"{name} must be finite")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DHLink:
    alpha: float
    a: float
    d: float
    theta_offset: float

    def __post_init__(self):
        vals = (self.alpha, self.a, self.d, self.theta_offset)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidArgumentError(f"DH link fields must be finite: {vals}")
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "theta_offset", wrap_angle(self.theta_offset))

    @classmethod
    def from_degrees(cls, alpha_deg, a_mm, d_mm, theta_deg) -> "DHLink":
        return cls(math.radians(alpha_deg), a_mm, d_mm, math.radians(theta_deg))


@dataclass(frozen=True)
class DHParams:
    """The six links of the arm; immutable."""

    links: tuple

    def __post_init__(self):
        links = tuple(self.links)
        if len(links) != N_LINKS or not all(isinstance(l, DHLink) for l in links):
            raise InvalidArgumentError("DHParams needs exactly 6 DHLink values")
        object.__setattr__(self, "links", links)

    def flatten(self) -> np.ndarray:
        g = np.empty(N_PARAMS)
        for i, link in enumerate(self.links):
            g[i] = link.alpha
            g[6 + i] = link.a
            g[12 + i] = link.d
            g[18 + i] = link.theta_offset
        return g

    @classmethod
    def from_flat(cls, g) -> "DHParams":
        g = np.asarray(g, dtype=float)
        if g.shape != (N_PARAMS,):
            raise InvalidArgumentError(f"flat DH vector must have 24 entries, got shape {g.shape}")
        return cls(tuple(DHLink(g[i], g[6 + i], g[12 + i], g[18 + i]) for i in range(N_LINKS)))

    @classmethod
    def from_degrees(cls, rows: Sequence[Sequence[float]]) -> "DHParams":
        """Build from ``(alpha_deg, a_mm, d_mm, theta_deg)`` rows."""
        return cls(tuple(DHLink.from_degrees(*row) for row in rows))

    def oplus(self, delta) -> "DHParams":
        """Apply a 24-vector deviation: angles add in radians, lengths in mm."""
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (N_PARAMS,):
            raise InvalidArgumentError("deviation must be a 24-vector")
        return DHParams.from_flat(self.flatten() + delta)


# Nominal parameters of the HSR-JR680 (alpha deg, a mm, d mm, theta deg).
JR680_TABLE = (
    (-90.0, 250.0, 653.5, 0.0),
    (0.0, 900.0, 0.0, -90.0),
    (-90.0, -205.0, 0.0, 180.0),
    (90.0, 0.0, 1030.2, 0.0),
    (-90.0, 0.0, 0.0, 90.0),
    (0.0, 0.0, 200.6, 0.0),
)


def jr680_nominal() -> DHParams:
    return DHParams.from_degrees(JR680_TABLE)


@dataclass(frozen=True)
class Transform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,), "translation"))

    @classmethod
    def identity(cls) -> "Transform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Transform":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "Transform") -> "Transform":
        return Transform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation


@dataclass(frozen=True)
class MeasurementRig:
    """Draw-wire geometry: anchor in the base frame, attachment point in frame 6 (mm)."""

    base_point: np.ndarray
    tool_offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_point", _frozen(self.base_point, (3,), "base_point"))
        object.__setattr__(self, "tool_offset", _frozen(self.tool_offset, (3,), "tool_offset"))


def joint_config(q) -> np.ndarray:
    """Validate a 6-vector of joint angles (radians)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (N_LINKS,):
        raise InvalidArgumentError(f"joint configuration must have 6 angles, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidArgumentError("joint configuration must be finite")
    return q


def dh_matrix(alpha: float, a: float, d: float, theta: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def dh_transform(link: DHLink, q: float) -> Transform:
    """Homogeneous transform of one link with joint angle ``q`` added to its theta offset."""
    if not math.isfinite(q):
        raise InvalidArgumentError(f"joint angle must be finite, got {q}")
    T = dh_matrix(link.alpha, link.a, link.d, link.theta_offset + q)
    return Transform(T[:3, :3], T[:3, 3])


def forward_kinematics(params: DHParams, q) -> Transform:
    q = joint_config(q)
    T = Transform.identity()
    for link, qi in zip(params.links, q):
        T = T @ dh_transform(link, qi)
    return T


def tool_position(params: DHParams, q, rig: MeasurementRig) -> np.ndarray:
    return forward_kinematics(params, q).apply(rig.tool_offset)


def cable_length(params: DHParams, q, rig: MeasurementRig) -> float:
    return float(np.linalg.norm(tool_position(params, q, rig) - rig.base_point))


# --- batched evaluation over many configurations -------------------------------

def _as_flat(params) -> np.ndarray:
    if isinstance(params, DHParams):
        return params.flatten()
    g = np.asarray(params, dtype=float)
    if g.shape != (N_PARAMS,):
        raise InvalidArgumentError("flat DH vector must have 24 entries")
    return g


def _as_configs(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != N_LINKS:
        raise InvalidArgumentError(f"configurations must be an (n, 6) array, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise InvalidArgumentError("configurations must be finite")
    return Q


def batch_link_matrices(params, Q):
    """Link transforms for every configuration.

    Returns ``(T, trig)`` where ``T`` has shape (n, 6, 4, 4) and ``trig`` is the
    tuple ``(ca, sa, ct, st)`` of (n, 6) arrays, reused by the Jacobian code.
    """
    g = _as_flat(params)
    Q = _as_configs(Q)
    n = Q.shape[0]
    alpha, a, d = g[ALPHA], g[A], g[D]
    theta = g[THETA] + Q
    ca = np.broadcast_to(np.cos(alpha), (n, N_LINKS))
    sa = np.broadcast_to(np.sin(alpha), (n, N_LINKS))
    ct, st = np.cos(theta), np.sin(theta)
    T = np.zeros((n, N_LINKS, 4, 4))
    T[..., 0, 0] = ct
    T[..., 0, 1] = -st * ca
    T[..., 0, 2] = st * sa
    T[..., 0, 3] = a * ct
    T[..., 1, 0] = st
    T[..., 1, 1] = ct * ca
    T[..., 1, 2] = -ct * sa
    T[..., 1, 3] = a * st
    T[..., 2, 1] = sa
    T[..., 2, 2] = ca
    T[..., 2, 3] = d
    T[..., 3, 3] = 1.0
    return T, (ca, sa, ct, st)


def batch_chain_points(params, Q, tool_offset):
    """Propagate the tool point backwards through the chain, componentwise.

    Returns ``(points, frames, trig)``: ``points`` (n, 3) in the base frame,
    ``frames[i]`` the ``(x, y, z)`` arrays of the tool point in the output frame
    of link ``i`` (i.e. before link ``i`` is applied), and ``trig`` the
    ``(ca, sa, ct, st)`` values with ``ct``/``st`` shaped (6, n).
    """
    g = _as_flat(params)
    Q = _as_configs(Q)
    n = Q.shape[0]
    ca, sa = np.cos(g[ALPHA]), np.sin(g[ALPHA])
    theta = (g[THETA] + Q).T
    ct, st = np.cos(theta), np.sin(theta)
    a, d = g[A], g[D]
    x = np.full(n, float(tool_offset[0]))
    y = np.full(n, float(tool_offset[1]))
    z = np.full(n, float(tool_offset[2]))
    frames = [None] * N_LINKS
    for i in range(N_LINKS - 1, -1, -1):
        frames[i] = (x, y, z)
        yz = ca[i] * y - sa[i] * z
        x, y, z = (
            ct[i] * x - st[i] * yz + a[i] * ct[i],
            st[i] * x + ct[i] * yz + a[i] * st[i],
            sa[i] * y + ca[i] * z + d[i],
        )
    return np.stack([x, y, z], axis=1), frames, (ca, sa, ct, st)


def batch_tool_positions(params, Q, rig: MeasurementRig) -> np.ndarray:
    return batch_chain_points(params, Q, rig.tool_offset)[0]


def batch_cable_lengths(params, Q, rig: MeasurementRig) -> np.ndarray:
    diff = batch_tool_positions(params, Q, rig) - rig.base_point
    return np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)
