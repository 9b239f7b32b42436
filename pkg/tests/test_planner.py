import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magplan.entropy import EntropyPoint
from magplan.exceptions import DataError
from magplan.gridfield import GridField, Unit
from magplan.planner import (
    PlannerConfig,
    descend,
    descent_direction,
    entropy_potential,
    frozen_potential,
    goal_potential,
    goal_weight,
    load_path,
    path_length,
    plan_path,
    save_path,
    smooth_path,
)

from oracles import central_difference_gradient


def flat_emap(x0=-3.0, y0=-2.0, nx=31, ny=21, spacing=0.2):
    # uniform spread has no 5-sigma outliers, so no points are selected
    values = np.random.default_rng(99).uniform(1.9, 2.0, (ny, nx))
    return GridField(x0, y0, spacing, spacing, values, Unit.BITS)


def angle_between(u, v):
    return abs(math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1]))


class TestPotentials:
    def test_goal_weight_values(self):
        assert goal_weight(1.0) == pytest.approx(10 * math.e, rel=1e-15)
        assert goal_weight(1e6) == pytest.approx(10.00001, rel=1e-9)
        assert math.isfinite(goal_weight(0.0))
        assert goal_weight(0.0) == goal_weight(1e-3)

    def test_goal_weight_non_increasing(self):
        rho = np.linspace(0, 20, 2001)
        w = [goal_weight(r) for r in rho]
        assert all(a >= b for a, b in zip(w, w[1:]))

    def test_goal_potential(self):
        assert goal_potential((1, 1), (1, 1)) == 0.0
        assert goal_potential((1, 0), (0, 0)) == pytest.approx(13.591409, rel=1e-6)
        assert goal_potential((10, 0), (0, 0)) == pytest.approx(55.2585, rel=1e-4)

    def test_entropy_potential(self):
        p = EntropyPoint(1.0, 0.0, 0.5, 2.0)
        assert entropy_potential((0, 0), []) == 0.0
        assert entropy_potential((0, 0), [p]) == 1.0
        assert entropy_potential((0.3, 0.2), [p, p]) == 2 * entropy_potential((0.3, 0.2), [p])


class TestDirection:
    def test_single_goal(self):
        d = descent_direction((3.0, 0.0), (1.0, 0.0), [])
        assert d.tolist() == [-1.0, 0.0]

    def test_bisector(self):
        # goal weight at distance 1 is 10e; give the point the same weight
        p = EntropyPoint(0.0, 1.0, 0.5, goal_weight(1.0))
        d = descent_direction((0.0, 0.0), (1.0, 0.0), [p])
        np.testing.assert_allclose(d, [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-15)

    def test_cancelling_attractions_fall_back_to_goal(self):
        p = EntropyPoint(-1.0, 0.0, 0.5, goal_weight(1.0))
        d = descent_direction((0.0, 0.0), (1.0, 0.0), [p])
        assert d.tolist() == [1.0, 0.0]

    def test_at_goal_without_points(self):
        assert descent_direction((1.0, 1.0), (1.0, 1.0), []).tolist() == [0.0, 0.0]

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            goal = rng.uniform(-3, 3, 2)
            q = rng.uniform(-3, 3, 2)
            pts = [EntropyPoint(*rng.uniform(-3, 3, 2), 0.7, float(rng.uniform(0.1, 50)))
                   for _ in range(rng.integers(0, 6))]
            d = descent_direction(q, goal, pts)
            g = central_difference_gradient(lambda z: frozen_potential(z, q, goal, pts), q)
            assert angle_between(d, -g / np.linalg.norm(g)) < 1e-6


class TestSmoothing:
    def test_window_one_identity(self):
        p = np.random.default_rng(1).normal(size=(10, 2))
        assert np.array_equal(smooth_path(p, 1), p)

    def test_collinear_unchanged(self):
        t = np.sort(np.random.default_rng(2).uniform(0, 1, 30))
        p = np.column_stack([t, 2 * t + 1])
        s = smooth_path(p, 9)
        np.testing.assert_allclose(s[:, 1], 2 * s[:, 0] + 1, atol=1e-12)

    def test_zigzag_three_point_mean(self):
        p = np.array([[0, 0], [1, 1], [2, 0], [3, 1], [4, 0]], dtype=float)
        s = smooth_path(p, 3)
        for k in range(1, 4):
            np.testing.assert_allclose(s[k], p[k - 1:k + 2].mean(axis=0), atol=1e-15)

    def test_endpoints_and_bounding_box(self):
        p = np.random.default_rng(3).normal(size=(40, 2))
        s = smooth_path(p, 9)
        assert np.array_equal(s[0], p[0]) and np.array_equal(s[-1], p[-1])
        assert np.all(s.min(axis=0) >= p.min(axis=0)) and np.all(s.max(axis=0) <= p.max(axis=0))

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            smooth_path(np.zeros((3, 2)), 4)


class TestDescent:
    def test_straight_line_without_points(self):
        r = descend((0.0, 0.0), (2.0, 0.0), [])
        assert r.converged
        assert path_length(r.raw_path) == pytest.approx(2.0, rel=1e-2)
        assert np.array_equal(r.path[0], [0, 0]) and np.array_equal(r.path[-1], [2, 0])
        np.testing.assert_allclose(r.path[:, 1], 0.0, atol=1e-15)

    def test_diagonal_length_within_one_percent(self):
        r = descend((-2.75, -1.25), (2.5, 0.0), [])
        straight = math.hypot(5.25, 1.25)
        assert abs(path_length(r.raw_path) - straight) / straight < 1e-2
        assert abs(path_length(r.path) - straight) / straight < 1e-2

    def test_start_equals_goal(self):
        r = descend((1.0, 1.0), (1.0, 1.0), [])
        assert r.converged and r.iterations == 0 and len(r.path) == 1

    def test_deviates_toward_heavy_point(self):
        p = EntropyPoint(1.0, 0.5, 0.3, 60.0)
        r = descend((0.0, 0.0), (2.0, 0.0), [p])
        assert r.converged
        assert r.consumed_points == [p]
        assert r.raw_path[:, 1].max() > 0.2

    def test_every_consumed_point_was_approached(self):
        rng = np.random.default_rng(4)
        cfg = PlannerConfig()
        for _ in range(20):
            pts = [EntropyPoint(*rng.uniform(-2, 2, 2), 0.7, float(rng.uniform(1, 80)))
                   for _ in range(5)]
            r = descend((-2.5, -2.5), (2.5, 2.5), pts, cfg)
            assert r.converged
            for p in r.consumed_points:
                d = np.hypot(r.raw_path[:, 0] - p.x, r.raw_path[:, 1] - p.y)
                assert d.min() <= cfg.capture_radius

    def test_monotone_progress_after_all_consumed(self):
        pts = [EntropyPoint(0.0, 1.0, 0.5, 40.0), EntropyPoint(1.0, -1.0, 0.5, 40.0)]
        r = descend((-2.0, 0.0), (2.0, 0.0), pts)
        assert len(r.consumed_points) == 2
        last = max(int(np.argmin(np.hypot(r.raw_path[:, 0] - p.x, r.raw_path[:, 1] - p.y)))
                   for p in pts)
        tail = np.hypot(r.raw_path[last:, 0] - 2.0, r.raw_path[last:, 1])
        assert np.all(np.diff(tail) < 0)

    def test_oscillation_escape_terminates(self):
        # two heavy points pulling in opposite directions trap plain descent
        pts = [EntropyPoint(0.0, 1.5, 0.1, 1000.0), EntropyPoint(0.0, -1.5, 0.1, 1000.0)]
        r = descend((0.0, 0.0), (3.0, 0.0), pts)
        assert r.converged
        assert len(r.consumed_points) == 2

    def test_iteration_limit_flags_non_convergence(self):
        r = descend((0.0, 0.0), (5.0, 0.0), [], PlannerConfig(max_iterations=10))
        assert not r.converged and r.iterations == 10

    def test_deterministic(self):
        pts = [EntropyPoint(0.3, 0.7, 0.5, 9.0)]
        a = descend((0, 0), (2, 1), pts)
        b = descend((0, 0), (2, 1), pts)
        assert np.array_equal(a.path, b.path) and a.iterations == b.iterations

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-2.5, 2.5), st.floats(-1.5, 1.5), st.floats(-2.5, 2.5), st.floats(-1.5, 1.5))
    def test_path_invariants(self, sx, sy, gx, gy):
        r = descend((sx, sy), (gx, gy), [EntropyPoint(0.0, 0.0, 0.5, 5.0)])
        assert np.array_equal(r.path[0], [sx, sy])
        if r.converged:
            assert math.hypot(r.path[-1][0] - gx, r.path[-1][1] - gy) <= PlannerConfig().goal_tolerance


class TestPlanPath:
    def test_flat_map_gives_straight_path(self):
        r = plan_path((-2.75, -1.25), (2.5, 0.0), flat_emap())
        assert r.converged and r.consumed_points == []
        straight = math.hypot(5.25, 1.25)
        assert abs(path_length(r.path) - straight) / straight < 1e-2

    def test_goal_outside_extent(self):
        with pytest.raises(DataError, match="goal"):
            plan_path((0, 0), (9, 0), flat_emap())

    def test_start_outside_extent(self):
        with pytest.raises(DataError, match="start"):
            plan_path((-9, 0), (0, 0), flat_emap())

    @pytest.mark.parametrize("bad", [dict(step_size=0), dict(capture_radius=0.01),
                                     dict(smoothing_window=4), dict(goal_tolerance=-1)])
    def test_config_validation(self, bad):
        with pytest.raises((ValueError, TypeError)):
            PlannerConfig(**bad)


class TestPathCsv:
    def test_round_trip(self):
        p = np.random.default_rng(5).normal(size=(17, 2))
        text = save_path(p)
        assert text.startswith("x,y\n")
        assert np.array_equal(load_path(text), p)

    @pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "x,y\n1,2,3\n", "x,y\n1,zz\n"])
    def test_malformed(self, text):
        with pytest.raises(DataError):
            load_path(text)

    def test_metadata_block(self):
        r = descend((0, 0), (1, 0), [])
        meta = dict(line.split("=") for line in r.metadata().splitlines())
        assert meta == {"converged": "true", "iterations": str(r.iterations),
                        "consumed_points": "0", "waypoints": str(len(r.path))}
