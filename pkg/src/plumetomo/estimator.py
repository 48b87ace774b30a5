"""scikit-learn compatible front end.

Beams are passed as an ``(n_samples, 7)`` array with columns
``t, sensor_x, sensor_y, sensor_z, reflector_x, reflector_y, reflector_z``
and the path integrals (ppm*m) as ``y``. This lets the reconstruction sit in
pipelines, be cloned with different ``dt_s`` and be cross-validated.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .exceptions import DegenerateBeamError
from .grid import BeamMeasurement, GridSpec, beam_row
from .solver import SolverConfig, assemble, residuals, solve
from .wind import DEFAULT_DT_S, CompensationConfig, compensate_beam

BEAM_COLUMNS = ("t", "sensor_x", "sensor_y", "sensor_z", "reflector_x", "reflector_y", "reflector_z")


def beams_to_array(beams):
    """Split measurements into the ``(X, y)`` layout used by the estimators."""
    beams = list(beams)
    X = np.array([(b.t, *b.sensor, *b.reflector) for b in beams], dtype=float).reshape(-1, 7)
    y = np.array([b.value for b in beams], dtype=float)
    return X, y


def array_to_beams(X, y=None):
    X = check_beam_array(X)
    if y is None:
        y = np.zeros(X.shape[0])
    return [BeamMeasurement(row[0], row[1:4], row[4:7], v) for row, v in zip(X, y)]


def check_beam_array(X):
    """Validate an ``(n, 7)`` finite float beam array."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != len(BEAM_COLUMNS):
        raise ValueError(f"beam arrays need {len(BEAM_COLUMNS)} columns {BEAM_COLUMNS}, got {X.shape[1]}")
    return X


def check_beams(X, y=None):
    """Accept either a beam array with ``y`` or a sequence of :class:`BeamMeasurement`."""
    if y is None and len(X) and isinstance(X[0], BeamMeasurement):
        return list(X)
    X = check_beam_array(X)
    if y is None:
        raise ValueError("y (path integrals) is required with an array of beams")
    y = check_array(y, ensure_2d=False, dtype=np.float64)
    check_consistent_length(X, y)
    return array_to_beams(X, y)


class WindCompensator(TransformerMixin, BaseEstimator):
    """Shift beam endpoints against the wind averaged over ``[t - dt_s, t]``.

    Parameters
    ----------
    wind : WindSeries
        Anemometer log covering the beam timestamps.
    dt_s : float, default=3.0
        Transport lag in seconds.
    """

    def __init__(self, wind=None, dt_s=DEFAULT_DT_S):
        self.wind = wind
        self.dt_s = dt_s

    def fit(self, X, y=None):
        check_beam_array(X)
        if self.wind is None:
            raise ValueError("WindCompensator needs a wind series")
        self.config_ = CompensationConfig(float(self.dt_s))
        self.n_features_in_ = len(BEAM_COLUMNS)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_beam_array(X)
        out = X.copy()
        for k, beam in enumerate(array_to_beams(X)):
            moved = compensate_beam(beam, self.wind, self.config_)
            out[k, 1:4] = moved.sensor
            out[k, 4:7] = moved.reflector
        return out


class GasTomography(RegressorMixin, BaseEstimator):
    """Gas concentration map from open-path measurements.

    ``fit`` reconstructs the map; ``predict`` returns the path integrals the
    map implies for new beams, which is what cross-validation scores.

    Parameters
    ----------
    grid : GridSpec
        Reconstruction grid.
    wind : WindSeries or None, default=None
        Wind log. Beams are compensated only when this is given and ``dt_s > 0``.
    dt_s : float, default=3.0
        Transport lag used for wind compensation.
    lambda_smooth : float, default=1.0
        Smoothness weight, see :class:`~plumetomo.solver.SolverConfig`.
    max_iters, tol, nonneg
        Solver settings.
    threads : int or None
        Worker threads for assembly; ``None`` reads ``PLUMETOMO_THREADS``.

    Attributes
    ----------
    field_ : ConcentrationField
    report_ : SolveReport
    system_ : SparseSystem
        The assembled training system.
    """

    def __init__(self, grid=None, wind=None, dt_s=DEFAULT_DT_S, lambda_smooth=1.0,
                 max_iters=2000, tol=1e-8, nonneg=True, threads=None):
        self.grid = grid
        self.wind = wind
        self.dt_s = dt_s
        self.lambda_smooth = lambda_smooth
        self.max_iters = max_iters
        self.tol = tol
        self.nonneg = nonneg
        self.threads = threads

    def _compensation(self):
        if self.wind is None or not self.dt_s:
            return None
        return CompensationConfig(float(self.dt_s))

    def fit(self, X, y=None):
        if not isinstance(self.grid, GridSpec):
            raise ValueError(f"grid must be a GridSpec, got {self.grid!r}")
        beams = check_beams(X, y)
        cfg = self._compensation()
        self.system_ = assemble(self.grid, beams, self.wind if cfg else None, cfg, threads=self.threads)
        self.field_, self.report_ = solve(self.system_, SolverConfig(
            self.lambda_smooth, self.max_iters, self.tol, self.nonneg))
        self.compensated_ = cfg is not None
        self.n_features_in_ = len(BEAM_COLUMNS)
        return self

    def predict(self, X):
        """Modelled path integrals (ppm*m); beams that miss the grid get 0."""
        check_is_fitted(self, "field_")
        beams = array_to_beams(X) if not (len(X) and isinstance(X[0], BeamMeasurement)) else list(X)
        cfg = self._compensation()
        out = np.zeros(len(beams))
        for k, beam in enumerate(beams):
            if cfg is not None:
                beam = compensate_beam(beam, self.wind, cfg)
            try:
                row = beam_row(self.grid, beam.sensor, beam.reflector)
            except DegenerateBeamError:
                continue
            out[k] = float(np.sum(row.weights * self.field_.values[row.indices]))
        return out

    def rms_residual(self, X, y=None):
        """RMS of ``predict - y`` over beams that cross the grid."""
        check_is_fitted(self, "field_")
        beams = check_beams(X, y)
        cfg = self._compensation()
        system = assemble(self.grid, beams, self.wind if cfg else None, cfg, threads=self.threads)
        return residuals(system, self.field_)[1]
