import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tilekit.estimator import GraphTiler, as_region, resolve_tileset
from tilekit.geom import GeometryError


@pytest.fixture(scope="module")
def fitted():
    est = GraphTiler(tileset="square_domino", rings=3, layers=2, channels=8,
                     epochs=1, train_shapes=8, val_shapes=3, runs=2, crops=1,
                     random_state=0)
    return est.fit()


class TestSklearnProtocol:
    def test_get_set_params_roundtrip(self):
        est = GraphTiler(layers=3, runs=5)
        params = est.get_params()
        assert params["layers"] == 3
        est.set_params(runs=7)
        assert est.get_params()["runs"] == 7

    def test_clone(self):
        est = GraphTiler(channels=16, random_state=3)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted_error(self):
        with pytest.raises(NotFittedError):
            GraphTiler().predict([[0, 0], [3, 0], [3, 3], [0, 3]])


class TestValidationHelpers:
    def test_as_region_from_array(self):
        region = as_region([[0, 0], [2, 0], [2, 2], [0, 2]])
        assert region.shapely.area == pytest.approx(4.0)

    def test_as_region_rejects_bad_shapes(self):
        with pytest.raises(GeometryError):
            as_region([[0, 0], [1, 1]])
        with pytest.raises(GeometryError):
            as_region([[0, 0], [1, 1], [1, 0], [0, 1]])  # self-intersecting

    def test_resolve_bundled_names(self):
        ts = resolve_tileset("square")
        assert ts.name == "square"
        with pytest.raises(FileNotFoundError):
            resolve_tileset("no-such-tileset")


class TestFitPredict:
    def test_fit_attributes(self, fitted):
        assert hasattr(fitted, "model_")
        assert hasattr(fitted, "superset_")
        assert fitted.train_result_.iterations > 0

    def test_predict_single_region(self, fitted):
        sol = fitted.predict([[0, 0], [3, 0], [3, 3], [0, 3]])
        assert sol.metrics["coverage"] > 0
        assert len(sol.placements) > 0

    def test_predict_proba_shapes(self, fitted):
        probs = fitted.predict_proba([[0, 0], [3, 0], [3, 3], [0, 3]])
        assert probs.ndim == 1
        assert len(probs) > 0
        assert np.all((probs > 0) & (probs < 1))

    def test_score_in_unit_interval(self, fitted):
        score = fitted.score([[[0, 0], [3, 0], [3, 3], [0, 3]]])
        assert 0.0 <= score <= 1.0

    def test_fit_with_explicit_shapes(self):
        shapes = [[[0, 0], [3, 0], [3, 2.5], [0, 2.5]],
                  [[0, 0], [2.5, 0], [2.5, 3], [0, 3]],
                  [[-1, -1], [3, -1], [3, 3], [-1, 3]]]
        est = GraphTiler(tileset="square", rings=3, layers=2, channels=8,
                         epochs=1, runs=1, crops=1, random_state=1)
        est.fit(shapes)
        assert est.train_result_.iterations > 0
