import numpy as np
import pytest
from sklearn.base import clone
from sklearn.model_selection import KFold, cross_val_score
from sklearn.pipeline import make_pipeline

from plumetomo import GasTomography, WindCompensator
from plumetomo.estimator import array_to_beams, beams_to_array
from plumetomo.forward import NoiseModel, perimeter_plan, simulate_measurements
from plumetomo.grid import make_grid
from plumetomo.solver import SolverConfig, assemble, solve
from plumetomo.wind import CompensationConfig, WindSeries

from conftest import smooth_scene

GRID = make_grid(-10, -8, 1, 26, 16)
WIND = WindSeries.constant((2, 0), -20, 200)


@pytest.fixture(scope="module")
def data():
    beams = simulate_measurements(smooth_scene(center=(0, 0)).with_wind(WIND),
                                  perimeter_plan((-2, 14, -8, 8), 5, 6, 5), NoiseModel(0.0))
    return beams_to_array(beams)


def test_params_and_clone():
    est = GasTomography(grid=GRID, dt_s=2.5, lambda_smooth=0.3)
    params = est.get_params()
    assert params["dt_s"] == 2.5 and params["grid"] is GRID
    copy = clone(est).set_params(dt_s=4.0)
    assert copy.dt_s == 4.0 and est.dt_s == 2.5


def test_array_round_trip(data):
    X, y = data
    X2, y2 = beams_to_array(array_to_beams(X, y))
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)


def test_fit_matches_functional_api(data):
    X, y = data
    est = GasTomography(grid=GRID, wind=WIND, dt_s=3.0, max_iters=400).fit(X, y)
    system = assemble(GRID, array_to_beams(X, y), WIND, CompensationConfig(3.0))
    field, _ = solve(system, SolverConfig(1.0, 400))
    np.testing.assert_array_equal(est.field_.values, field.values)
    assert est.compensated_
    np.testing.assert_allclose(est.predict(X), system.matrix @ field.values)


def test_pipeline_equivalent_to_builtin_compensation(data):
    X, y = data
    pipe = make_pipeline(WindCompensator(WIND, 3.0), GasTomography(grid=GRID, max_iters=300)).fit(X, y)
    direct = GasTomography(grid=GRID, wind=WIND, dt_s=3.0, max_iters=300).fit(X, y)
    np.testing.assert_allclose(pipe[-1].field_.values, direct.field_.values, rtol=1e-12, atol=1e-9)


def test_cross_val_score_runs(data):
    X, y = data
    scores = cross_val_score(GasTomography(grid=GRID, wind=WIND, max_iters=200), X, y, cv=KFold(3))
    assert np.all(np.isfinite(scores))


def test_rejects_bad_input(data):
    X, y = data
    with pytest.raises(ValueError):
        GasTomography(grid=GRID).fit(X[:, :6], y)
    with pytest.raises(ValueError):
        GasTomography(grid=None).fit(X, y)
    with pytest.raises(ValueError):
        GasTomography(grid=GRID).fit(X, y[:-1])
