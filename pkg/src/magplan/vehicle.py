"""Ground-truth unicycle, magnetometer synthesis and Stanley path tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_path, as_position, check_positive
from .gridfield import GridField, interpolate
from .localization import MotionNoise, Pose, SensorNoise, unicycle_step, wrap_angle


@dataclass(frozen=True)
class StanleyConfig:
    k_s: float = 0.001
    v: float = 0.15
    omega_max: float = 1.0

    def __post_init__(self):
        check_positive("k_s", self.k_s, strict=False)
        check_positive("v", self.v)
        check_positive("omega_max", self.omega_max)


def step_truth(pose: Pose, u, dt: float, noise: MotionNoise, rng: np.random.Generator) -> Pose:
    """One noisy unicycle step; draws three normals (x, y, theta) from ``rng``."""
    dt = check_positive("dt", dt)
    v, omega = u
    eps = rng.standard_normal((1, 3)) * noise.sigmas
    x, y, theta = unicycle_step(pose.as_array()[None, :], v, omega, dt, eps)[0]
    return Pose(x, y, theta)


def measure(field: GridField, pose: Pose, noise: SensorNoise, rng: np.random.Generator) -> float:
    """Map value at the pose plus one Gaussian draw; raises off the map."""
    return interpolate(field, pose.x, pose.y) + noise.sigma * float(rng.standard_normal())


@dataclass(frozen=True)
class PathPoint:
    index: int
    point: np.ndarray
    cross_track: float
    heading: float


def nearest_path_point(path, p) -> PathPoint:
    """Closest point on the polyline ``path`` to ``p``.

    ``cross_track`` is signed, positive when ``p`` lies to the left of the
    owning segment's direction.  Zero-length segments are skipped and ties
    go to the lowest segment index.
    """
    pts = as_path(path, min_points=2)
    p = as_position(p)
    a, b = pts[:-1], pts[1:]
    ab = b - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    valid = len2 > 0
    if not valid.any():
        raise ValueError("path has no segment of nonzero length")
    ap = p - a
    t = np.clip(np.einsum("ij,ij->i", ap, ab) / np.where(valid, len2, 1.0), 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = np.hypot(*(p - proj).T)
    d[~valid] = np.inf
    k = int(np.argmin(d))
    cross = ab[k, 0] * ap[k, 1] - ab[k, 1] * ap[k, 0]
    signed = math.copysign(float(d[k]), cross) if cross != 0 else 0.0
    heading = math.atan2(ab[k, 1], ab[k, 0])
    return PathPoint(k, proj[k], signed, heading)


def stanley_control(est: Pose, path, cfg: StanleyConfig = StanleyConfig()) -> float:
    """Yaw-rate command ``theta_e + atan(k_s * e / v)``, saturated.

    ``theta_e`` is the path tangent heading minus the estimated heading and
    ``e`` is the lateral offset of the path from the robot, i.e. minus the
    left-positive cross-track, so a robot left of the path turns right.
    """
    near = nearest_path_point(path, est.xy)
    heading_error = wrap_angle(near.heading - est.theta)
    omega = heading_error + math.atan(cfg.k_s * -near.cross_track / cfg.v)
    return float(np.clip(omega, -cfg.omega_max, cfg.omega_max))
