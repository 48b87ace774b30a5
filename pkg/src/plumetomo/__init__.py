"""Wind-compensated open-path gas tomography on a horizontal measurement plane."""

from .estimator import GasTomography, WindCompensator, array_to_beams, beams_to_array
from .evaluation import (DtSweepResult, InSituDetection, detection_agreement, localization_error,
                         resolution_stability, sample_map, sweep_dt)
from .exceptions import (DegenerateBeamError, EmptySystemError, InsufficientDataError, InvalidGridError,
                         ParseError, PlumeTomoError, SystemMismatchError, UndefinedArgmaxError,
                         ValidationError, VerticalBeamError, WindGapError)
from .forward import (AcquisitionPlan, NoiseModel, Station, integrate, path_integral_quadrature,
                      perimeter_plan, simulate_measurements)
from .grid import (BeamMeasurement, ConcentrationField, GridSpec, Position3, SparseRow, beam_row,
                   make_grid, traverse)
from .plume import GasSource, Scene, concentration_at, field_at, random_scene
from .solver import SolveReport, SolverConfig, SparseSystem, assemble, residuals, smoothness_operator, solve
from .wind import CompensationConfig, WindSeries, average_wind, compensate, compensate_beam

__version__ = "0.1.0"

__all__ = [
    "GasTomography",
    "WindCompensator",
    "array_to_beams",
    "beams_to_array",
    "DtSweepResult",
    "InSituDetection",
    "detection_agreement",
    "localization_error",
    "resolution_stability",
    "sample_map",
    "sweep_dt",
    "DegenerateBeamError",
    "EmptySystemError",
    "InsufficientDataError",
    "InvalidGridError",
    "ParseError",
    "PlumeTomoError",
    "SystemMismatchError",
    "UndefinedArgmaxError",
    "ValidationError",
    "VerticalBeamError",
    "WindGapError",
    "AcquisitionPlan",
    "NoiseModel",
    "Station",
    "integrate",
    "path_integral_quadrature",
    "perimeter_plan",
    "simulate_measurements",
    "BeamMeasurement",
    "ConcentrationField",
    "GridSpec",
    "Position3",
    "SparseRow",
    "beam_row",
    "make_grid",
    "traverse",
    "GasSource",
    "Scene",
    "concentration_at",
    "field_at",
    "random_scene",
    "SolveReport",
    "SolverConfig",
    "SparseSystem",
    "assemble",
    "residuals",
    "smoothness_operator",
    "solve",
    "CompensationConfig",
    "WindSeries",
    "average_wind",
    "compensate",
    "compensate_beam",
]
