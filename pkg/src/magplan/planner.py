"""Attractive potential-field planner over low-entropy points.

The potential is a goal term ``0.5 * xi_G(rho_G) * rho_G`` with
``xi_G = 10 * exp(1 / rho_G)`` plus one term ``0.5 * xi_H * rho_H`` per active
entropy point.  The path follows the negative gradient with the scale
factors held fixed at the current position, in steps of constant length.
Points are deactivated once the path comes within ``capture_radius`` of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_path, as_position, check_int, check_odd, check_positive
from .entropy import EntropyPoint, select_low_entropy_points
from .exceptions import DataError
from .gridfield import GridField

# exp(700) is still finite in float64
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class PlannerConfig:
    step_size: float = 0.05
    goal_tolerance: float = 0.1
    max_iterations: int = 20000
    capture_radius: float = 0.3
    rho_floor: float = 1e-3
    smoothing_window: int = 9
    k_sigma: float = 5.0
    max_points: int = 64

    def __post_init__(self):
        check_positive("step_size", self.step_size)
        check_positive("goal_tolerance", self.goal_tolerance)
        check_int("max_iterations", self.max_iterations, minimum=0)
        check_positive("capture_radius", self.capture_radius)
        if self.capture_radius < self.step_size:
            raise ValueError("capture_radius must be >= step_size")
        check_positive("rho_floor", self.rho_floor)
        check_odd("smoothing_window", self.smoothing_window)
        check_positive("k_sigma", self.k_sigma, strict=False)
        check_int("max_points", self.max_points, minimum=0)


@dataclass
class PlanResult:
    """Outcome of a descent.

    ``path`` is the smoothed waypoint array (n, 2); ``raw_path`` the
    unsmoothed descent iterates.  ``consumed_points`` is in visit order.
    """

    path: np.ndarray
    converged: bool
    iterations: int
    consumed_points: list = field(default_factory=list)
    raw_path: np.ndarray = None

    def metadata(self) -> str:
        return (
            f"converged={'true' if self.converged else 'false'}\n"
            f"iterations={self.iterations}\n"
            f"consumed_points={len(self.consumed_points)}\n"
            f"waypoints={len(self.path)}\n"
        )


def goal_weight(rho_goal: float, rho_floor: float = 1e-3) -> float:
    """``10 * exp(1 / rho)`` with rho floored at ``rho_floor``."""
    rho = max(float(rho_goal), rho_floor)
    return 10.0 * math.exp(min(1.0 / rho, _MAX_EXPONENT))


def goal_potential(q, goal, rho_floor: float = 1e-3) -> float:
    rho = float(np.linalg.norm(as_position(q) - as_position(goal)))
    return 0.5 * goal_weight(rho, rho_floor) * rho


def _point_arrays(points):
    if len(points) == 0:
        return np.empty((0, 2)), np.empty(0)
    xy = np.array([[p.x, p.y] for p in points], dtype=float)
    w = np.array([p.weight for p in points], dtype=float)
    return xy, w


def entropy_potential(q, points) -> float:
    """Sum of ``0.5 * weight * distance`` over the points (0 if none)."""
    xy, w = _point_arrays(points)
    if len(w) == 0:
        return 0.0
    rho = np.linalg.norm(xy - as_position(q), axis=1)
    return float(np.sum(0.5 * w * rho))


def frozen_potential(q_eval, q_frozen, goal, points, rho_floor: float = 1e-3) -> float:
    """Total potential at ``q_eval`` with the goal scale factor taken at
    ``q_frozen``.  Its gradient at ``q_frozen`` is what the descent follows."""
    q_eval = as_position(q_eval)
    goal = as_position(goal)
    xi_g = goal_weight(np.linalg.norm(as_position(q_frozen) - goal), rho_floor)
    return 0.5 * xi_g * float(np.linalg.norm(q_eval - goal)) + entropy_potential(q_eval, points)


def _direction(q, goal, xy, w, rho_floor):
    to_q = q - goal
    rho_g = math.hypot(to_q[0], to_q[1])
    grad = np.zeros(2)
    if rho_g > rho_floor:
        grad += 0.5 * goal_weight(rho_g, rho_floor) * to_q / rho_g
    if len(w):
        diff = q - xy
        rho = np.hypot(diff[:, 0], diff[:, 1])
        keep = rho > rho_floor
        if np.any(keep):
            grad += (0.5 * w[keep] / rho[keep]) @ diff[keep]
    norm = math.hypot(grad[0], grad[1])
    if norm > 0:
        return -grad / norm
    if rho_g > 0:
        return -to_q / rho_g
    return np.zeros(2)


def descent_direction(q, goal, points, rho_floor: float = 1e-3) -> np.ndarray:
    """Unit vector along the negative frozen-weight gradient at ``q``.

    Falls back to the bearing of the goal if the attractions cancel, and to
    the zero vector if ``q`` sits on the goal with nothing else active.
    """
    xy, w = _point_arrays(points)
    return _direction(as_position(q), as_position(goal), xy, w, rho_floor)


def smooth_path(path, window: int) -> np.ndarray:
    """Centred moving average of the waypoints.

    The window shrinks symmetrically near the ends so the first and last
    waypoints are kept exactly.
    """
    window = check_odd("window", window)
    pts = as_path(path, min_points=1)
    n = len(pts)
    if window == 1 or n < 3:
        return pts.copy()
    csum = np.vstack([np.zeros((1, 2)), np.cumsum(pts, axis=0)])
    k = np.arange(n)
    half = np.minimum(np.minimum(window // 2, k), n - 1 - k)
    lo, hi = k - half, k + half + 1
    out = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    out[0], out[-1] = pts[0], pts[-1]
    return out


def descend(start, goal, points, cfg: PlannerConfig = PlannerConfig()) -> PlanResult:
    """Run the potential-field descent from ``start`` to ``goal``.

    When the iterates oscillate (``|q_k - q_{k-2}| < step_size / 10``) the
    descent heads straight for the nearest active point until it is
    captured, which guarantees every point is eventually consumed.
    """
    start = as_position(start, "start")
    goal = as_position(goal, "goal")
    xy, w = _point_arrays(points)
    points = list(points)
    active = np.ones(len(points), dtype=bool)
    consumed = []

    def _capture(q):
        if not active.any():
            return
        d = np.hypot(*(xy - q).T)
        hit = np.flatnonzero(active & (d <= cfg.capture_radius))
        for k in hit[np.argsort(d[hit], kind="stable")]:
            active[k] = False
            consumed.append(points[k])

    q = start.copy()
    raw = [q.copy()]
    _capture(q)
    converged = float(np.linalg.norm(q - goal)) <= cfg.goal_tolerance
    forced = None
    iterations = 0
    while not converged and iterations < cfg.max_iterations:
        if forced is not None:
            delta = xy[forced] - q
            direction = delta / np.linalg.norm(delta)
        else:
            direction = _direction(q, goal, xy[active], w[active], cfg.rho_floor)
        step = cfg.step_size
        if not active.any():
            step = min(step, float(np.linalg.norm(q - goal)))
        q = q + step * direction
        raw.append(q.copy())
        iterations += 1
        _capture(q)
        if forced is not None and not active[forced]:
            forced = None
        if float(np.linalg.norm(q - goal)) <= cfg.goal_tolerance:
            converged = True
            break
        if forced is None and active.any() and len(raw) >= 3:
            if np.linalg.norm(raw[-1] - raw[-3]) < cfg.step_size / 10:
                idx = np.flatnonzero(active)
                dist = np.hypot(*(xy[idx] - q).T)
                forced = int(idx[np.argmin(dist)])

    raw = np.array(raw)
    if converged and not np.array_equal(raw[-1], goal):
        raw = np.vstack([raw, goal])
    return PlanResult(
        path=smooth_path(raw, cfg.smoothing_window),
        converged=converged,
        iterations=iterations,
        consumed_points=consumed,
        raw_path=raw,
    )


def _check_inside(p, emap, name):
    x0, x1, y0, y1 = emap.extent
    if not (x0 <= p[0] <= x1 and y0 <= p[1] <= y1):
        raise DataError(
            f"{name} ({float(p[0])!r}, {float(p[1])!r}) outside map extent x=[{x0!r}, {x1!r}] y=[{y0!r}, {y1!r}]"
        )


def plan_path(start, goal, emap: GridField, cfg: PlannerConfig = PlannerConfig()) -> PlanResult:
    """Select the low-entropy points of ``emap`` and descend from start to goal."""
    start = as_position(start, "start")
    goal = as_position(goal, "goal")
    _check_inside(start, emap, "start")
    _check_inside(goal, emap, "goal")
    points = select_low_entropy_points(emap, cfg.k_sigma, cfg.max_points)
    return descend(start, goal, points, cfg)


def path_length(path) -> float:
    pts = np.asarray(path, dtype=float)
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def save_path(path) -> str:
    lines = ["x,y"]
    for x, y in as_path(path):
        lines.append(f"{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def load_path(text: str) -> np.ndarray:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "x,y":
        raise DataError("path CSV must start with header x,y")
    pts = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError(f"line {lineno}: expected 2 columns, found {len(parts)}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric waypoint") from None
    return np.array(pts, dtype=float).reshape(-1, 2)

