"""Closed-loop experiment runner.

One experiment: build the entropy map, plan (or take the straight
start-goal segment), then drive a noisy unicycle along the path with a
Stanley controller fed by the particle-filter estimate, logging truth,
estimate and uncertainty at every step.

Random draws all come from one generator seeded with the master seed, in a
fixed order per step: truth motion noise (3), sensor noise (1), filter
motion noise (3 per particle), resampling offset (1).  Step 0 has no motion,
so it only draws the sensor noise and the resampling offset.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .entropy import EntropyConfig, entropy_map
from .exceptions import ConfigError, DataError, OutOfBoundsError
from .gridfield import GridField, SynthSpec, interpolate, load_grid, parse_synth_spec, synth_map, upsample
from .localization import (
    MotionNoise,
    ParticleSet,
    Pose,
    SensorNoise,
    effective_sample_size,
    estimate,
    init_particles,
    predict,
    resample,
    unicycle_step,
    update_weights,
)
from .planner import PlannerConfig, PlanResult, path_length, plan_path
from .vehicle import StanleyConfig, measure, stanley_control, step_truth

REFERENCE_MAP = "reference"


class Mode(str, enum.Enum):
    ENTROPY_PLANNER = "entropy_planner"
    STRAIGHT_LINE = "straight_line"


def reference_spec() -> SynthSpec:
    """The bundled reference map.

    A 7 m x 4.25 m workspace at 50000 nT with two compact features north of
    the start-goal line, each a broad 6000 nT depression with a narrow
    5500 nT peak at its centre.  The steep flanks of the peaks produce the
    low-entropy points; the rest of the map is nearly flat.
    """
    text = resources.files("magplan").joinpath("data/reference_map.txt").read_text()
    return parse_synth_spec(text)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that defines one closed-loop run.

    ``map_source`` is either :data:`REFERENCE_MAP`, a path to a grid-CSV file,
    or a :class:`SynthSpec`.  The run stops once the true position is within
    ``arrival_tolerance`` of the goal.

    ``motion_noise`` is the filter's process noise; ``truth_noise`` drives the
    simulated robot.  The filter noise is deliberately the larger of the two.
    """

    map_source: object = REFERENCE_MAP
    upsample_factor: int = 1
    entropy: EntropyConfig = EntropyConfig()
    planner: PlannerConfig = PlannerConfig()
    stanley: StanleyConfig = StanleyConfig()
    motion_noise: MotionNoise = MotionNoise()
    truth_noise: MotionNoise = MotionNoise(0.002, 0.002, math.radians(0.01745))
    sensor_noise: SensorNoise = SensorNoise()
    init_spread: MotionNoise = MotionNoise(0.02, 0.02, math.radians(1.0))
    n_particles: int = 1000
    ess_fraction: float = 0.5
    arrival_tolerance: float = 0.35
    start: Pose = Pose(-2.75, -1.25, math.radians(60.0))
    goal: tuple = (2.5, 0.0)
    dt: float = 0.1
    max_steps: int = 3000
    seed: int = 0
    mode: Mode = Mode.ENTROPY_PLANNER

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.n_particles < 1:
            raise ConfigError("particles must be >= 1")
        if not 0 < self.ess_fraction <= 1:
            raise ConfigError("ess_fraction must be in (0, 1]")
        if self.upsample_factor < 1:
            raise ConfigError("upsample must be >= 1")
        if not self.arrival_tolerance > 0:
            raise ConfigError("arrival_tolerance must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "goal", tuple(float(g) for g in self.goal))


TRAJECTORY_COLUMNS = (
    "step", "t", "truth_x", "truth_y", "truth_theta", "est_x", "est_y", "est_theta",
    "cov_det", "z_nT", "ess", "entropy_bits", "cmd_v", "cmd_omega",
)


@dataclass(eq=False)
class TrajectoryLog:
    """Per-step table with :data:`TRAJECTORY_COLUMNS` as columns.

    ``reached_goal`` and ``left_map`` describe how the run ended.
    """

    rows: np.ndarray
    reached_goal: bool = False
    left_map: bool = False

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        return self.rows[:, TRAJECTORY_COLUMNS.index(name)]

    def __eq__(self, other):
        return (isinstance(other, TrajectoryLog)
                and self.reached_goal == other.reached_goal
                and self.left_map == other.left_map
                and np.array_equal(self.rows, other.rows))

    def to_csv(self) -> str:
        lines = [",".join(TRAJECTORY_COLUMNS)]
        for row in self.rows:
            lines.append(",".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrajectoryLog":
        lines = text.splitlines()
        if not lines or tuple(lines[0].split(",")) != TRAJECTORY_COLUMNS:
            raise DataError("trajectory CSV header does not match the expected columns")
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != len(TRAJECTORY_COLUMNS):
                raise DataError(f"line {lineno}: expected {len(TRAJECTORY_COLUMNS)} columns, found {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric entry") from None
        return cls(np.array(rows, dtype=float))


@dataclass(frozen=True)
class Prepared:
    field: GridField
    emap: GridField
    plan: PlanResult
    path: np.ndarray


def load_map(source, upsample_factor: int = 1) -> GridField:
    if isinstance(source, SynthSpec):
        field_ = synth_map(source)
    elif source == REFERENCE_MAP:
        field_ = synth_map(reference_spec())
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise DataError(f"cannot read map {source}: {exc.strerror}") from None
        field_ = load_grid(text)
    return upsample(field_, upsample_factor)


@lru_cache(maxsize=16)
def _prepare_cached(source, upsample_factor, ecfg, pcfg, start_xy, goal, mode):
    field_ = load_map(source, upsample_factor)
    for name, p in (("start", start_xy), ("goal", goal)):
        if not field_.contains(*p):
            x0, x1, y0, y1 = field_.bounds
            raise DataError(f"{name} ({float(p[0])!r}, {float(p[1])!r}) outside map bounds "
                            f"x=[{x0!r}, {x1!r}] y=[{y0!r}, {y1!r}]")
    emap = entropy_map(field_, ecfg)
    if mode is Mode.STRAIGHT_LINE:
        path = np.array([start_xy, goal], dtype=float)
        plan = PlanResult(path=path, converged=True, iterations=0, raw_path=path)
    else:
        plan = plan_path(start_xy, goal, emap, pcfg)
        path = plan.path
    if len(path) < 2:
        path = np.array([start_xy, goal], dtype=float)
    return Prepared(field_, emap, plan, path)


def prepare(cfg: ExperimentConfig) -> Prepared:
    """Map, entropy map and path for ``cfg``; cached across seeds."""
    source = cfg.map_source if isinstance(cfg.map_source, SynthSpec) else str(cfg.map_source)
    return _prepare_cached(source, cfg.upsample_factor, cfg.entropy, cfg.planner,
                           (cfg.start.x, cfg.start.y), cfg.goal, cfg.mode)


def run_experiment(cfg: ExperimentConfig) -> tuple[PlanResult, TrajectoryLog]:
    """Plan and follow the path in closed loop; see the module docstring for
    the random draw order."""
    prep = prepare(cfg)
    field_, emap, path = prep.field, prep.emap, prep.path
    goal = np.array(cfg.goal)
    tol = cfg.arrival_tolerance

    ps = init_particles(cfg.start, cfg.init_spread, cfg.n_particles, cfg.seed)
    rng = ps.rng
    truth = cfg.start
    u = (0.0, 0.0)
    rows = []
    reached = left = False
    for k in range(cfg.max_steps):
        try:
            if k > 0:
                truth = step_truth(truth, u, cfg.dt, cfg.truth_noise, rng)
            z = measure(field_, truth, cfg.sensor_noise, rng)
        except OutOfBoundsError:
            left = True
            break
        if k > 0:
            ps = predict(ps, u, cfg.dt, cfg.motion_noise)
        ps = update_weights(ps, z, field_, cfg.sensor_noise)
        ess = effective_sample_size(ps.weights)
        ps = resample(ps, cfg.ess_fraction)
        est = estimate(ps)

        reached = float(np.hypot(truth.x - goal[0], truth.y - goal[1])) <= tol
        if reached:
            u = (0.0, 0.0)
        else:
            u = (cfg.stanley.v, stanley_control(est.mean, path, cfg.stanley))
        h = interpolate(emap, *emap.clamp(truth.x, truth.y))
        rows.append((k, k * cfg.dt, truth.x, truth.y, truth.theta, est.mean.x, est.mean.y,
                     est.mean.theta, est.cov_det, z, ess, h, u[0], u[1]))
        if reached:
            break
    return prep.plan, TrajectoryLog(np.array(rows, dtype=float), reached_goal=reached, left_map=left)


def _mean(a) -> float:
    # offset by the first sample so a constant series returns that constant
    return float(a[0] + np.mean(a - a[0]))


def summarize(log: TrajectoryLog) -> dict:
    """Scalar metrics of a run.

    ``steps_to_goal`` is the step index at which the goal was reached, or
    ``None`` if it never was.
    """
    if len(log) == 0:
        raise DataError("cannot summarise an empty trajectory log")
    cov = log.column("cov_det")
    ent = log.column("entropy_bits")
    err = np.hypot(log.column("est_x") - log.column("truth_x"),
                   log.column("est_y") - log.column("truth_y"))
    truth_xy = np.column_stack([log.column("truth_x"), log.column("truth_y")])
    return {
        "steps": len(log),
        "mean_cov_det": _mean(cov),
        "max_cov_det": float(np.max(cov)),
        "mean_entropy_bits": _mean(ent),
        "median_entropy_bits": float(np.median(ent)),
        "rms_position_error": float(np.sqrt(np.mean(err * err))),
        "path_length": path_length(truth_xy),
        "steps_to_goal": int(log.rows[-1, 0]) if log.reached_goal else None,
        "success": bool(log.reached_goal),
        "left_map": bool(log.left_map),
    }


def format_summary(metrics: dict, plan: PlanResult | None = None) -> str:
    items = dict(metrics)
    if plan is not None:
        items["plan_converged"] = plan.converged
        items["plan_iterations"] = plan.iterations
        items["plan_consumed_points"] = len(plan.consumed_points)
    lines = []
    for key, value in items.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif value is None:
            value = "none"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# flat key=value config files

CONFIG_DEFAULTS = {
    "map": REFERENCE_MAP,
    "synth": "",
    "upsample": "1",
    "bin_size": "0.2",
    "window_size": "2",
    "probability_floor": "1e-12",
    "k_sigma": "5",
    "max_points": "64",
    "step_size": "0.05",
    "goal_tolerance": "0.1",
    "max_iterations": "20000",
    "capture_radius": "0.3",
    "rho_floor": "0.001",
    "smoothing_window": "9",
    "k_s": "0.001",
    "speed": "0.15",
    "omega_max": "1.0",
    "sigma_x": "0.01",
    "sigma_y": "0.01",
    "sigma_theta_deg": "0.01745",
    "sensor_sigma": "100",
    "truth_sigma_x": "0.002",
    "truth_sigma_y": "0.002",
    "truth_sigma_theta_deg": "0.01745",
    "init_sigma_x": "0.02",
    "init_sigma_y": "0.02",
    "init_sigma_theta_deg": "1.0",
    "particles": "1000",
    "ess_fraction": "0.5",
    "arrival_tolerance": "0.35",
    "start_x": "-2.75",
    "start_y": "-1.25",
    "start_yaw_deg": "60",
    "goal_x": "2.5",
    "goal_y": "0.0",
    "dt": "0.1",
    "max_steps": "3000",
    "seed": "0",
    "mode": Mode.ENTROPY_PLANNER.value,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of strings.  ``#`` comments
    and blank lines are ignored; unknown or repeated keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def config_from_mapping(values: dict, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from string values, filling in
    :data:`CONFIG_DEFAULTS`.  Relative map paths resolve against ``base_dir``."""
    v = {**CONFIG_DEFAULTS, **values}

    def num(key, kind=float):
        try:
            return kind(v[key])
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {v[key]!r} as {kind.__name__}") from None

    try:
        if v["synth"]:
            try:
                spec_text = (Path(base_dir) / v["synth"]).read_text()
            except OSError as exc:
                raise DataError(f"cannot read synth spec {v['synth']}: {exc.strerror}") from None
            source = parse_synth_spec(spec_text)
        elif v["map"] == REFERENCE_MAP:
            source = REFERENCE_MAP
        else:
            source = str(Path(base_dir) / v["map"])
        return ExperimentConfig(
            map_source=source,
            upsample_factor=num("upsample", int),
            entropy=EntropyConfig(num("bin_size"), num("window_size", int), num("probability_floor")),
            planner=PlannerConfig(
                step_size=num("step_size"),
                goal_tolerance=num("goal_tolerance"),
                max_iterations=num("max_iterations", int),
                capture_radius=num("capture_radius"),
                rho_floor=num("rho_floor"),
                smoothing_window=num("smoothing_window", int),
                k_sigma=num("k_sigma"),
                max_points=num("max_points", int),
            ),
            stanley=StanleyConfig(num("k_s"), num("speed"), num("omega_max")),
            motion_noise=MotionNoise(num("sigma_x"), num("sigma_y"),
                                     math.radians(num("sigma_theta_deg"))),
            truth_noise=MotionNoise(num("truth_sigma_x"), num("truth_sigma_y"),
                                    math.radians(num("truth_sigma_theta_deg"))),
            sensor_noise=SensorNoise(num("sensor_sigma")),
            init_spread=MotionNoise(num("init_sigma_x"), num("init_sigma_y"),
                                    math.radians(num("init_sigma_theta_deg"))),
            n_particles=num("particles", int),
            ess_fraction=num("ess_fraction"),
            arrival_tolerance=num("arrival_tolerance"),
            start=Pose(num("start_x"), num("start_y"), math.radians(num("start_yaw_deg"))),
            goal=(num("goal_x"), num("goal_y")),
            dt=num("dt"),
            max_steps=num("max_steps", int),
            seed=num("seed", int),
            mode=Mode(v["mode"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}") from None
    return config_from_mapping(parse_config_text(text), path.parent)


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return dataclasses.replace(cfg, seed=seed)


def dead_reckoning_trial(field: GridField, start: Pose, u, steps: int, seed: int, *,
                         noise: MotionNoise = MotionNoise(),
                         sensor_noise: SensorNoise = SensorNoise(),
                         init_spread: MotionNoise = MotionNoise(0.02, 0.02, math.radians(1.0)),
                         n_particles: int = 1000, dt: float = 0.1,
                         ess_fraction: float = 0.5) -> tuple[float, float]:
    """RMS position error of the filter and of dead reckoning on one run.

    The truth follows constant control ``u`` with ``noise``.  Dead reckoning
    is a second particle cloud that receives exactly the same motion noise
    as the filter but is never weighted or resampled, so the two differ
    only by the use of the measurements.  Returns ``(filter_rms, dr_rms)``.
    """
    ps = init_particles(start, init_spread, n_particles, seed)
    rng = ps.rng
    dr_states = ps.states.copy()
    truth = start
    f_err, d_err = [], []
    for k in range(steps):
        if k > 0:
            truth = step_truth(truth, u, dt, noise, rng)
        z = measure(field, truth, sensor_noise, rng)
        if k > 0:
            eps = rng.standard_normal((n_particles, 3)) * noise.sigmas
            ps = ParticleSet(unicycle_step(ps.states, u[0], u[1], dt, eps), ps.weights, rng)
            dr_states = unicycle_step(dr_states, u[0], u[1], dt, eps)
        ps = update_weights(ps, z, field, sensor_noise)
        ps = resample(ps, ess_fraction)
        est = estimate(ps).mean
        dr = dr_states[:, :2].mean(axis=0)
        f_err.append(math.hypot(est.x - truth.x, est.y - truth.y))
        d_err.append(math.hypot(dr[0] - truth.x, dr[1] - truth.y))
    return (float(np.sqrt(np.mean(np.square(f_err)))),
            float(np.sqrt(np.mean(np.square(d_err)))))
