"""Estimator-style wrappers around the entropy and planning functions.

These follow the scikit-learn conventions (constructor stores parameters
verbatim, ``fit`` validates and learns trailing-underscore attributes,
``get_params``/``set_params`` for cloning), with a :class:`GridField` in
place of the usual feature matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_position
from .entropy import EntropyConfig, entropy_map, select_low_entropy_points
from .gridfield import GridField, Unit
from .planner import PlannerConfig, PlanResult, descend, plan_path


def _check_grid(X, name="X") -> GridField:
    if not isinstance(X, GridField):
        raise TypeError(f"{name} must be a GridField, got {type(X).__name__}")
    return X


class EntropyMap(TransformerMixin, BaseEstimator):
    """Turn a scalar field into its sliding-window entropy map.

    Parameters
    ----------
    bin_size : float, default=0.2
        Side of the square averaging bins, in map units.
    window_size : int, default=2
        Window side in bins.
    probability_floor : float, default=1e-12
        Lower bound applied to normalised bin values before they are turned
        into window probabilities.
    k_sigma : float, default=5.0
        Selection threshold for :attr:`points_`, in standard deviations
        below the mean entropy.
    max_points : int, default=64
        Cap on the number of selected points.

    Attributes
    ----------
    entropy_map_ : GridField
        Entropy of the fitted field, in bits.
    points_ : list of EntropyPoint
        Low-entropy points of ``entropy_map_``, lowest first.
    """

    def __init__(self, bin_size=0.2, window_size=2, probability_floor=1e-12,
                 k_sigma=5.0, max_points=64):
        self.bin_size = bin_size
        self.window_size = window_size
        self.probability_floor = probability_floor
        self.k_sigma = k_sigma
        self.max_points = max_points

    def _config(self) -> EntropyConfig:
        return EntropyConfig(self.bin_size, self.window_size, self.probability_floor)

    def fit(self, X, y=None):
        field = _check_grid(X)
        self.entropy_map_ = entropy_map(field, self._config())
        self.points_ = select_low_entropy_points(self.entropy_map_, self.k_sigma,
                                                 self.max_points)
        return self

    def transform(self, X):
        """Entropy map of ``X`` computed with the fitted parameters."""
        check_is_fitted(self, "entropy_map_")
        return entropy_map(_check_grid(X), self._config())

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).entropy_map_


class PotentialFieldPlanner(BaseEstimator):
    """Attractive potential-field planner over low-entropy points.

    ``fit`` takes an entropy map (unit ``bits``) and selects its attraction
    points; ``plan`` then descends from a start to a goal.  Parameters have
    the same meaning and defaults as :class:`PlannerConfig`.

    Attributes
    ----------
    entropy_map_ : GridField
    points_ : list of EntropyPoint
    """

    def __init__(self, step_size=0.05, goal_tolerance=0.1, max_iterations=20000,
                 capture_radius=0.3, rho_floor=1e-3, smoothing_window=9,
                 k_sigma=5.0, max_points=64):
        self.step_size = step_size
        self.goal_tolerance = goal_tolerance
        self.max_iterations = max_iterations
        self.capture_radius = capture_radius
        self.rho_floor = rho_floor
        self.smoothing_window = smoothing_window
        self.k_sigma = k_sigma
        self.max_points = max_points

    def _config(self) -> PlannerConfig:
        return PlannerConfig(**self.get_params())

    def fit(self, X, y=None):
        emap = _check_grid(X, "entropy map")
        if emap.unit is not Unit.BITS:
            raise ValueError(f"expected an entropy map in bits, got unit {emap.unit.value!r}")
        cfg = self._config()
        self.entropy_map_ = emap
        self.points_ = select_low_entropy_points(emap, cfg.k_sigma, cfg.max_points)
        return self

    def plan(self, start, goal) -> PlanResult:
        check_is_fitted(self, "points_")
        return plan_path(start, goal, self.entropy_map_, self._config())

    def predict(self, X):
        """Planned paths for rows ``(start_x, start_y, goal_x, goal_y)``.

        Returns a list of (n_i, 2) waypoint arrays, one per row.
        """
        check_is_fitted(self, "points_")
        rows = np.atleast_2d(np.asarray(X, dtype=float))
        if rows.ndim != 2 or rows.shape[1] != 4:
            raise ValueError(f"X must have shape (m, 4), got {np.shape(X)}")
        return [self.plan(r[:2], r[2:]).path for r in rows]

    def descend(self, start, goal) -> PlanResult:
        """Descent against the fitted points without the extent check."""
        check_is_fitted(self, "points_")
        return descend(as_position(start, "start"), as_position(goal, "goal"),
                       self.points_, self._config())

