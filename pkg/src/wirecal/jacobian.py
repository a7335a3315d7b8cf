"""Derivatives of the D-H chain and the wire-length model w.r.t. the 24 link parameters.

Columns always follow :meth:`DHParams.flatten` order ([alpha | a | d | theta]).
Angles are in radians and lengths in mm, so columns carry mixed units; any
rescaling is left to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateGeometryError, InvalidArgumentError
from .kinematics import (
    N_LINKS,
    N_PARAMS,
    DHLink,
    DHParams,
    MeasurementRig,
    _as_flat,
    batch_chain_points,
    batch_link_matrices,
    dh_transform,
    forward_kinematics,
    joint_config,
)

DEFAULT_FD_STEP = 1e-6
DEFAULT_MIN_LENGTH = 1e-6


@dataclass(frozen=True)
class LinkPartials:
    d_alpha: np.ndarray
    d_theta: np.ndarray
    d_a: np.ndarray
    d_d: np.ndarray

    def by_block(self):
        """Partials in flatten block order (alpha, a, d, theta)."""
        return (self.d_alpha, self.d_a, self.d_d, self.d_theta)


@dataclass(frozen=True)
class PoseError:
    dH: np.ndarray
    dO: np.ndarray


def link_partials(link: DHLink, q: float) -> LinkPartials:
    """Entrywise derivatives of the link transform w.r.t. alpha, theta, a and d."""
    theta = link.theta_offset + q
    ca, sa = math.cos(link.alpha), math.sin(link.alpha)
    ct, st = math.cos(theta), math.sin(theta)
    a = link.a
    d_alpha = np.array([
        [0.0, st * sa, st * ca, 0.0],
        [0.0, -ct * sa, -ct * ca, 0.0],
        [0.0, ca, -sa, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    d_theta = np.array([
        [-st, -ct * ca, ct * sa, -a * st],
        [ct, -st * ca, st * sa, a * ct],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    d_a = np.zeros((4, 4))
    d_a[0, 3] = ct
    d_a[1, 3] = st
    d_d = np.zeros((4, 4))
    d_d[2, 3] = 1.0
    return LinkPartials(d_alpha, d_theta, d_a, d_d)


def position_jacobian(params: DHParams, q, rig: MeasurementRig) -> np.ndarray:
    """3x24 derivative of the tool point (base frame) w.r.t. the flattened parameters."""
    q = joint_config(q)
    mats = [dh_transform(link, qi).matrix for link, qi in zip(params.links, q)]
    prefix = [np.eye(4)]
    for M in mats[:-1]:
        prefix.append(prefix[-1] @ M)
    suffix = [None] * N_LINKS
    v = np.append(rig.tool_offset, 1.0)
    for i in range(N_LINKS - 1, -1, -1):
        suffix[i] = v
        v = mats[i] @ v

    J = np.zeros((3, N_PARAMS))
    for i, (link, qi) in enumerate(zip(params.links, q)):
        for block, dT in enumerate(link_partials(link, qi).by_block()):
            J[:, block * N_LINKS + i] = (prefix[i] @ (dT @ suffix[i]))[:3]
    return J


def cable_jacobian(params: DHParams, q, rig: MeasurementRig,
                   min_length: float = DEFAULT_MIN_LENGTH) -> np.ndarray:
    """Gradient of the wire length w.r.t. the flattened parameters (24-vector)."""
    p = forward_kinematics(params, q).apply(rig.tool_offset)
    diff = p - rig.base_point
    length = np.linalg.norm(diff)
    if length <= min_length:
        raise DegenerateGeometryError(
            f"tool point is {length:.3g} mm from the wire anchor; direction undefined")
    return (diff / length) @ position_jacobian(params, q, rig)


def fd_jacobian(f, params, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``f(DHParams)`` w.r.t. the 24 flattened parameters.

    Always returns an (m, 24) matrix; a scalar ``f`` gives m = 1.
    """
    if not step > 0:
        raise InvalidArgumentError("finite-difference step must be positive")
    g0 = _as_flat(params)
    cols = []
    for k in range(N_PARAMS):
        gp = g0.copy()
        gm = g0.copy()
        gp[k] += step
        gm[k] -= step
        fp = np.atleast_1d(np.asarray(f(DHParams.from_flat(gp)), dtype=float)).ravel()
        fm = np.atleast_1d(np.asarray(f(DHParams.from_flat(gm)), dtype=float)).ravel()
        cols.append((fp - fm) / (2.0 * step))
    return np.stack(cols, axis=1)


def pose_error(reference: DHParams, params: DHParams, q) -> PoseError:
    """Difference of the end-effector pose of ``params`` against ``reference``."""
    T0 = forward_kinematics(reference, q)
    T1 = forward_kinematics(params, q)
    return PoseError(T1.rotation - T0.rotation, T1.translation - T0.translation)


def orientation_error(reference: DHParams, params: DHParams, q) -> np.ndarray:
    """Axis-angle vector of ``R_refᵀ R`` (radians); zero when orientations agree."""
    R0 = forward_kinematics(reference, q).rotation
    R1 = forward_kinematics(params, q).rotation
    return Rotation.from_matrix(R0.T @ R1).as_rotvec()


# --- batched evaluation -------------------------------------------------------

def batch_position_jacobian(params, Q, rig: MeasurementRig):
    """Tool points (n, 3) and position Jacobians (n, 3, 24) for every configuration."""
    g = _as_flat(params)
    points, frames, (ca, sa, ct, st) = batch_chain_points(g, Q, rig.tool_offset)
    T, _ = batch_link_matrices(g, Q)
    n = points.shape[0]
    a = g[6:12]

    # rotation of the frame preceding each link
    R = np.empty((n, N_LINKS, 3, 3))
    R[:, 0] = np.eye(3)
    for i in range(1, N_LINKS):
        R[:, i] = R[:, i - 1] @ T[:, i - 1, :3, :3]

    J = np.zeros((n, 3, 4, N_LINKS))
    for i, (x, y, z) in enumerate(frames):
        local = np.zeros((n, 3, 4))
        syz = sa[i] * y + ca[i] * z
        local[:, 0, 0] = st[i] * syz
        local[:, 1, 0] = -ct[i] * syz
        local[:, 2, 0] = ca[i] * y - sa[i] * z
        local[:, 0, 1] = ct[i]
        local[:, 1, 1] = st[i]
        local[:, 2, 2] = 1.0
        local[:, 0, 3] = -st[i] * x - ct[i] * ca[i] * y + ct[i] * sa[i] * z - a[i] * st[i]
        local[:, 1, 3] = ct[i] * x - st[i] * ca[i] * y + st[i] * sa[i] * z + a[i] * ct[i]
        J[..., i] = R[:, i] @ local
    return points, J.reshape(n, 3, N_PARAMS)


def batch_cable_jacobian(params, Q, rig: MeasurementRig,
                         min_length: float = DEFAULT_MIN_LENGTH):
    """Wire lengths (n,) and their gradients (n, 24) for every configuration.

    Works componentwise: the unit wire direction is carried forward through the
    link rotations and dotted with each link's local point derivatives.
    """
    g = _as_flat(params)
    points, frames, (ca, sa, ct, st) = batch_chain_points(g, Q, rig.tool_offset)
    a = g[6:12]
    diff = points - rig.base_point
    lengths = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)
    if np.any(lengths <= min_length):
        bad = int(np.argmin(lengths))
        raise DegenerateGeometryError(
            f"configuration {bad}: tool point is {lengths[bad]:.3g} mm from the wire anchor")

    n = points.shape[0]
    G = np.empty((4, N_LINKS, n))
    w0, w1, w2 = (diff / lengths[:, None]).T
    for i, (x, y, z) in enumerate(frames):
        # w holds the wire direction in the frame preceding link i
        syz = sa[i] * y + ca[i] * z
        cyz = ca[i] * y - sa[i] * z
        G[0, i] = (w0 * st[i] - w1 * ct[i]) * syz + w2 * cyz
        G[1, i] = w0 * ct[i] + w1 * st[i]
        G[2, i] = w2
        G[3, i] = w0 * (-st[i] * x - ct[i] * cyz - a[i] * st[i]) + w1 * (ct[i] * x - st[i] * cyz + a[i] * ct[i])
        # rotate into the next link's frame: Rx(-alpha) Rz(-theta) w
        p0 = ct[i] * w0 + st[i] * w1
        p1 = -st[i] * w0 + ct[i] * w1
        w0, w1, w2 = p0, ca[i] * p1 + sa[i] * w2, -sa[i] * p1 + ca[i] * w2
    return lengths, G.reshape(N_PARAMS, n).T
