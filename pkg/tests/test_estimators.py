import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from magplan.entropy import EntropyConfig, entropy_map, select_low_entropy_points
from magplan.estimators import EntropyMap, PotentialFieldPlanner
from magplan.harness import load_map
from magplan.planner import PlannerConfig, plan_path


@pytest.fixture(scope="module")
def field():
    return load_map("reference")


class TestEntropyMap:
    def test_matches_functions(self, field):
        est = EntropyMap(bin_size=0.2, window_size=2).fit(field)
        ref = entropy_map(field, EntropyConfig(0.2, 2))
        assert est.entropy_map_ == ref
        assert est.points_ == select_low_entropy_points(ref, 5.0, 64)
        assert est.transform(field) == ref
        assert EntropyMap().fit_transform(field) == ref

    def test_params_and_clone(self):
        est = EntropyMap(window_size=3, k_sigma=4.0)
        assert est.get_params()["window_size"] == 3
        c = clone(est)
        assert c.get_params() == est.get_params() and c is not est
        assert est.set_params(bin_size=0.4).bin_size == 0.4

    def test_not_fitted(self, field):
        with pytest.raises(NotFittedError):
            EntropyMap().transform(field)

    def test_rejects_arrays(self):
        with pytest.raises(TypeError):
            EntropyMap().fit(np.zeros((5, 5)))

    def test_invalid_parameter_surfaces_at_fit(self, field):
        with pytest.raises(ValueError):
            EntropyMap(window_size=1).fit(field)


class TestPlanner:
    def test_plan_matches_function(self, field):
        emap = EntropyMap().fit_transform(field)
        est = PotentialFieldPlanner().fit(emap)
        a = est.plan((-2.75, -1.25), (2.5, 0.0))
        b = plan_path((-2.75, -1.25), (2.5, 0.0), emap, PlannerConfig())
        assert np.array_equal(a.path, b.path)
        paths = est.predict([[-2.75, -1.25, 2.5, 0.0], [0.0, 0.0, 1.0, 1.0]])
        assert len(paths) == 2 and np.array_equal(paths[0], a.path)

    def test_descend_uses_fitted_points(self, field):
        emap = EntropyMap().fit_transform(field)
        est = PotentialFieldPlanner().fit(emap)
        assert est.descend((-2.75, -1.25), (2.5, 0.0)).iterations == est.plan((-2.75, -1.25), (2.5, 0.0)).iterations

    def test_requires_entropy_map(self, field):
        with pytest.raises(ValueError, match="bits"):
            PotentialFieldPlanner().fit(field)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            PotentialFieldPlanner().plan((0, 0), (1, 1))

    def test_predict_shape_checked(self, field):
        est = PotentialFieldPlanner().fit(EntropyMap().fit_transform(field))
        with pytest.raises(ValueError):
            est.predict([[0, 0, 1]])

    def test_clone(self):
        est = PotentialFieldPlanner(step_size=0.02, smoothing_window=5)
        assert clone(est).get_params() == est.get_params()
