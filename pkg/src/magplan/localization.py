"""Monte Carlo localization against a scalar field map.

Particles carry planar poses ``(x, y, theta)``; the motion model is the
discrete unicycle with additive Gaussian noise and the measurement model is
a Gaussian on the total-field reading at the particle position.  Every
operation returns a new :class:`ParticleSet` that shares the parent's random
generator, so a chain of calls consumes one reproducible stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive
from .gridfield import GridField, interpolate_many

OUT_OF_BOUNDS_LIKELIHOOD = 1e-300


def wrap_angle(a):
    """Wrap angles into (-pi, pi]; values already inside are returned as is."""
    a = np.asarray(a, dtype=float)
    wrapped = math.pi - np.mod(math.pi - a, 2 * math.pi)
    out = np.where((a > math.pi) | (a <= -math.pi), wrapped, a)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"pose {name} must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class MotionNoise:
    """Per-step standard deviations of the additive unicycle noise."""

    sigma_x: float = 0.01
    sigma_y: float = 0.01
    sigma_theta: float = math.radians(0.01745)

    def __post_init__(self):
        for name in ("sigma_x", "sigma_y", "sigma_theta"):
            check_positive(name, getattr(self, name), strict=False)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([self.sigma_x, self.sigma_y, self.sigma_theta])


@dataclass(frozen=True)
class SensorNoise:
    """Standard deviation of the magnetometer reading, nT."""

    sigma: float = 100.0

    def __post_init__(self):
        check_positive("sigma", self.sigma)


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """``states`` is (n, 3) of x, y, theta; ``weights`` sum to one."""

    states: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class PoseEstimate:
    mean: Pose
    covariance: np.ndarray
    cov_det: float


def unicycle_step(states, v, omega, dt, eps):
    """Advance poses one step: ``x += v cos(theta) dt + eps_x`` and so on.

    ``states`` and ``eps`` are (n, 3).  Shared by the filter and the
    ground-truth simulator so both apply identical kinematics.
    """
    states = np.asarray(states, dtype=float)
    theta = states[:, 2]
    out = np.empty_like(states)
    out[:, 0] = states[:, 0] + v * np.cos(theta) * dt + eps[:, 0]
    out[:, 1] = states[:, 1] + v * np.sin(theta) * dt + eps[:, 1]
    out[:, 2] = wrap_angle(theta + omega * dt + eps[:, 2])
    return out


def init_particles(pose: Pose, spread: MotionNoise, n: int, seed: int) -> ParticleSet:
    """Gaussian cloud of ``n`` particles around ``pose`` with uniform weights."""
    n = check_int("n", n, minimum=1)
    rng = np.random.default_rng(seed)
    states = pose.as_array() + rng.standard_normal((n, 3)) * spread.sigmas
    states[:, 2] = wrap_angle(states[:, 2])
    return ParticleSet(states, np.full(n, 1.0 / n), rng)


def predict(ps: ParticleSet, u, dt: float, noise: MotionNoise) -> ParticleSet:
    """Propagate every particle through the noisy unicycle model.

    ``u`` is ``(v, omega)``.  Noise is drawn as an (n, 3) block in particle
    order from the set's generator.
    """
    dt = check_positive("dt", dt)
    v, omega = u
    eps = ps.rng.standard_normal((len(ps), 3)) * noise.sigmas
    return ParticleSet(unicycle_step(ps.states, v, omega, dt, eps), ps.weights, ps.rng)


def update_weights(ps: ParticleSet, z: float, field: GridField, noise: SensorNoise) -> ParticleSet:
    """Multiply weights by the Gaussian likelihood of reading ``z``.

    Computed in the log domain.  Particles off the map get likelihood
    ``1e-300``.  The set is reset to uniform weights if every particle is off
    the map (the reading then says nothing about any of them) or if every
    weight underflows.
    """
    if not math.isfinite(z):
        raise ValueError(f"measurement must be finite, got {z!r}")
    expected, inside = interpolate_many(field, ps.states[:, 0], ps.states[:, 1])
    loglik = -0.5 * ((z - expected) / noise.sigma) ** 2
    loglik[~inside] = math.log(OUT_OF_BOUNDS_LIKELIHOOD)
    with np.errstate(divide="ignore"):
        logw = np.log(ps.weights) + loglik
    top = logw.max()
    if not inside.any() or not np.isfinite(top):
        w = np.full(len(ps), 1.0 / len(ps))
    else:
        w = np.exp(logw - top)
        w /= w.sum()
    return ParticleSet(ps.states, w, ps.rng)


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def systematic_indices(weights, u0: float) -> np.ndarray:
    """Ancestor indices from a comb at ``u0 + k/n`` over the cumulative weights."""
    w = np.asarray(weights, dtype=float)
    n = len(w)
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    positions = u0 + np.arange(n) / n
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def resample(ps: ParticleSet, ess_threshold_fraction: float = 0.5) -> ParticleSet:
    """Systematic resampling when ESS drops below ``fraction * n``.

    One uniform number is drawn on every call, whether or not resampling
    happens, so the generator stream does not depend on the weights.
    """
    fraction = check_positive("ess_threshold_fraction", ess_threshold_fraction)
    if fraction > 1:
        raise ValueError("ess_threshold_fraction must be <= 1")
    n = len(ps)
    u0 = ps.rng.uniform(0.0, 1.0 / n)
    # relative slack so that rounding in sum(w^2) never triggers a resample
    # of uniform weights
    if effective_sample_size(ps.weights) >= fraction * n * (1 - 1e-9):
        return ps
    idx = systematic_indices(ps.weights, u0)
    return ParticleSet(ps.states[idx], np.full(n, 1.0 / n), ps.rng)


def estimate(ps: ParticleSet) -> PoseEstimate:
    """Weighted mean pose (circular mean for heading) and 3x3 covariance."""
    w = ps.weights
    s = ps.states
    # moments relative to the first particle: identical particles give
    # exactly zero residuals
    ref = s[0]
    mean_xy = ref[:2] + w @ (s[:, :2] - ref[:2])
    dtheta = s[:, 2] - ref[2]
    theta = wrap_angle(ref[2] + math.atan2(float(w @ np.sin(dtheta)), float(w @ np.cos(dtheta))))
    resid = np.empty_like(s)
    resid[:, :2] = s[:, :2] - mean_xy
    resid[:, 2] = wrap_angle(s[:, 2] - theta)
    cov = (resid * w[:, None]).T @ resid
    cov = 0.5 * (cov + cov.T)
    return PoseEstimate(Pose(mean_xy[0], mean_xy[1], theta), cov, float(np.linalg.det(cov)))
