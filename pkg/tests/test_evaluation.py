import math

import numpy as np
import pytest

from plumetomo.evaluation import (InSituDetection, block_average, detection_agreement, interleaved_folds,
                                  localization_error, resolution_stability, sample_map, sweep_dt)
from plumetomo.exceptions import InsufficientDataError, UndefinedArgmaxError
from plumetomo.forward import NoiseModel, perimeter_plan, simulate_measurements
from plumetomo.grid import ConcentrationField, make_grid
from plumetomo.plume import GasSource, Scene, field_at
from plumetomo.solver import SolverConfig
from plumetomo.wind import WindSeries


def ramp_field():
    g = make_grid(0, 0, 1, 4, 3)
    return ConcentrationField(g, np.arange(12, dtype=float) * 10)


def test_sample_uniform():
    g = make_grid(0, 0, 1, 4, 4)
    out = sample_map(ConcentrationField(g, np.full(16, 400.0)), [(0.1, 0.1), (2.2, 3.9), (4, 4)])
    np.testing.assert_allclose(out, 400)


def test_sample_at_centres_and_midpoint():
    f = ramp_field()
    np.testing.assert_allclose(sample_map(f, f.grid.cell_centers()), f.values)
    g = make_grid(0, 0, 1, 2, 1)
    assert sample_map(ConcentrationField(g, [100.0, 300.0]), (1.0, 0.5))[0] == pytest.approx(200)


def test_sample_outside_is_nan_and_edge_clamped():
    f = ramp_field()
    out = sample_map(f, [(-0.1, 1), (0.2, 0.5), (4.0, 3.0)])
    assert math.isnan(out[0])
    assert out[1] == f.values[0]
    assert out[2] == f.values[-1]


def detections_from(field, points):
    values = sample_map(field, points)
    return [InSituDetection(0.0, x, y, 1.5, float(v)) for (x, y), v in zip(points, values)]


def test_agreement_self_consistency():
    f = ramp_field()
    rng = np.random.default_rng(0)
    pts = rng.uniform((0.5, 0.5), (3.5, 2.5), size=(20, 2))
    metrics = detection_agreement(f, detections_from(f, pts))
    assert metrics.rank_correlation == pytest.approx(1.0)
    assert metrics.n_used == 20


def test_hit_rate_at_maximum():
    f = ramp_field()
    top = f.grid.cell_centers()[np.argsort(f.values)[-3:]]
    assert detection_agreement(f, detections_from(f, top), 75).hit_rate == 1.0


def test_agreement_needs_three_inside():
    f = ramp_field()
    dets = detections_from(f, [(1, 1), (2, 2)]) + [InSituDetection(0, 50, 50, 1.5, 400)]
    with pytest.raises(InsufficientDataError):
        detection_agreement(f, dets)


def test_insitu_range():
    with pytest.raises(ValueError):
        InSituDetection(0, 0, 0, 1.5, 2500)


def test_localization_examples():
    g = make_grid(0, 0, 1, 8, 1)
    values = np.zeros(8)
    values[4] = 10
    f = ConcentrationField(g, values)
    assert localization_error(f, [(4.5, 0.5)]) == 0
    assert localization_error(f, [(6.5, 0.5)]) == pytest.approx(2.0)
    with pytest.raises(UndefinedArgmaxError):
        localization_error(ConcentrationField(g, np.ones(8)), [(0, 0)])


def test_interleaved_folds_partition():
    folds = interleaved_folds(11, 3)
    held = np.sort(np.concatenate([test for _, test in folds]))
    np.testing.assert_array_equal(held, np.arange(11))
    for train, test in folds:
        assert not set(train) & set(test)


def test_block_average():
    g = make_grid(0, 0, 1, 4, 2)
    f = ConcentrationField(g, [1, 2, 3, 4, 5, 6, 7, 8.0])
    np.testing.assert_allclose(block_average(f, 2), [3.5, 5.5])


@pytest.fixture(scope="module")
def calm_data():
    scene = Scene((GasSource(0, 0, 200, 2.5),), 420)
    plan = perimeter_plan((-8, 8, -8, 8), 5, 8, 5)
    beams = simulate_measurements(scene, plan, NoiseModel(0.0))
    return beams, make_grid(-8, -8, 1, 16, 16)


def test_sweep_zero_wind_ties_to_smallest(calm_data):
    beams, g = calm_data
    calm = WindSeries.constant((0, 0), -20, 200)
    result = sweep_dt(beams, calm, g, SolverConfig(1.0, 300), [0, 1, 2, 3], 4)
    assert np.ptp(result.cv_rms) == 0
    assert result.best_dt == 0


def test_sweep_single_candidate(calm_data):
    beams, g = calm_data
    result = sweep_dt(beams, WindSeries.constant((2, 0), -20, 200), g, SolverConfig(1.0, 200), [3], 3)
    assert result.best_dt == 3 and result.cv_rms.shape == (1,)


def test_sweep_argument_errors(calm_data):
    beams, g = calm_data
    calm = WindSeries.constant((0, 0), -20, 200)
    with pytest.raises(ValueError):
        sweep_dt(beams, calm, g, SolverConfig(), [0], 1)
    with pytest.raises(InsufficientDataError):
        sweep_dt(beams[:9], calm, g, SolverConfig(), [0], 5)


def test_sweep_deterministic_across_threads(calm_data):
    beams, g = calm_data
    gust = WindSeries.constant((1, 0.5), -20, 200)
    a = sweep_dt(beams, gust, g, SolverConfig(1.0, 100), [0, 2], 3, threads=1)
    b = sweep_dt(beams, gust, g, SolverConfig(1.0, 100), [0, 2], 3, threads=4)
    np.testing.assert_array_equal(a.cv_rms, b.cv_rms)


def test_resolution_constant_field():
    scene = Scene((), 420)
    beams = simulate_measurements(scene, perimeter_plan((-8, 8, -8, 8), 5, 6, 5), NoiseModel(0.0))
    gap = resolution_stability(beams, SolverConfig(1.0, 3000, 1e-12), 8, (-8, -8, 16))
    assert gap < 1e-3


def test_resolution_rejects_tiny_grid():
    with pytest.raises(ValueError):
        resolution_stability([], SolverConfig(), 2, (0, 0, 1))


def test_truth_field_localises_itself():
    g = make_grid(-8, -8, 1, 16, 16)
    f = field_at(Scene((GasSource(2.5, -1.5, 300, 2),), 420), g, 0)
    assert localization_error(f, [(2.5, -1.5)]) <= 0.5
