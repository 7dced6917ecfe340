"""Slow, independent reference computations used to cross-check the fast paths.

None of these share code with the modules they check: the forward-kinematics
oracle builds rotations with scipy and integrates the soft arc numerically,
the visibility oracle rasterizes pixel-centre rays, and the t-distribution
oracle integrates the density with adaptive quadrature.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.spatial.transform import Rotation

from .kinematics import LimbModel
from .vision import CameraIntrinsics


def _bend_rotation(angle_rad: float) -> np.ndarray:
    # tipping +x toward +z is a negative rotation about +y
    return Rotation.from_rotvec([0.0, -angle_rad, 0.0]).as_matrix()


def integrated_tip(joints, model: LimbModel, steps: int = 1000) -> np.ndarray:
    """Tip position from midpoint integration of the soft arc in ``steps`` pieces."""
    yaw, pitch, wrist, curl = np.radians(np.asarray(joints, dtype=float))
    r_shoulder = Rotation.from_rotvec([0.0, 0.0, yaw]).as_matrix() @ _bend_rotation(pitch)
    p = np.array([0.0, 0.0, model.base_height])
    p = p + r_shoulder @ np.array([model.rigid_link_length, 0.0, 0.0])
    r_wrist = r_shoulder @ _bend_rotation(wrist)
    mid_angles = curl * (np.arange(steps) + 0.5) / steps
    local = Rotation.from_rotvec(np.outer(-mid_angles, [0.0, 1.0, 0.0])).apply([1.0, 0.0, 0.0])
    ds = model.soft_section_length / steps
    return p + r_wrist @ (local.sum(axis=0) * ds)


def rasterized_visible(local_point, intr: CameraIntrinsics) -> bool:
    """Visibility of a camera-local point by matching it to the nearest pixel-centre ray.

    The camera looks along +x with image u growing toward -y and v toward -z.
    Each pixel column (row) owns the angular interval within half a pixel pitch
    of its centre ray; the point is visible when both its angles fall inside
    some column's and some row's interval and its depth is in range.
    """
    x, y, z = (float(c) for c in local_point)
    if not intr.near < x <= intr.far:
        return False
    f = intr.focal_length
    cx, cy = intr.principal_point
    return (_nearest_ray_hit(math.atan2(-y, x), intr.image_width, cx, f)
            and _nearest_ray_hit(math.atan2(-z, x), intr.image_height, cy, f))


def _nearest_ray_hit(angle: float, pixels: int, centre: float, f: float) -> bool:
    centres = np.arctan((np.arange(pixels) + 0.5 - centre) / f)
    i = int(np.argmin(np.abs(centres - angle)))
    pitch = (centres[1] - centres[0] if i == 0
             else centres[i] - centres[i - 1] if angle < centres[i] or i == pixels - 1
             else centres[i + 1] - centres[i])
    return abs(angle - centres[i]) <= 0.5 * pitch


def t_density(x: float, df: float) -> float:
    log_norm = (math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
                - 0.5 * math.log(df * math.pi))
    return math.exp(log_norm - (df + 1) / 2 * math.log1p(x * x / df))


def t_two_sided_p_quadrature(t: float, df: float) -> float:
    """Two-sided p-value by integrating the t density from 0 to |t|."""
    inner, _ = integrate.quad(t_density, 0.0, abs(t), args=(df,), epsabs=1e-13, epsrel=1e-12, limit=200)
    return max(0.0, 1.0 - 2.0 * inner)
