"""Reconstruction quality metrics and the transport-lag sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr
from sklearn.base import clone

from ._parallel import ordered_map
from .estimator import GasTomography
from .exceptions import EmptySystemError, InsufficientDataError, UndefinedArgmaxError
from .grid import BeamMeasurement, ConcentrationField, GridSpec
from .solver import SolverConfig, assemble, residuals
from .wind import CompensationConfig, WindSeries, average_wind, compensate

#: sensor range of the in-situ CO2 probe (ppm)
INSITU_RANGE_PPM = (0.0, 2000.0)


@dataclass(frozen=True)
class InSituDetection:
    t: float
    x: float
    y: float
    z: float
    concentration: float

    def __post_init__(self):
        lo, hi = INSITU_RANGE_PPM
        if not (lo <= self.concentration <= hi):
            raise ValueError(f"in-situ concentration {self.concentration} ppm outside sensor range [{lo}, {hi}]")


@dataclass(frozen=True)
class AgreementMetrics:
    rank_correlation: float
    hit_rate: float
    threshold: float
    n_used: int
    n_outside: int

    def as_dict(self):
        return {"rank_correlation": self.rank_correlation, "hit_rate": self.hit_rate,
                "hit_threshold_ppm": self.threshold, "n_detections_used": self.n_used,
                "n_detections_outside": self.n_outside}


@dataclass(frozen=True)
class DtSweepResult:
    candidates: np.ndarray
    cv_rms: np.ndarray
    best_dt: float
    k_folds: int

    @property
    def best_rms(self) -> float:
        return float(self.cv_rms[list(self.candidates).index(self.best_dt)])


def sample_map(field: ConcentrationField, points) -> np.ndarray:
    """Bilinear interpolation between cell centres.

    Points between the outermost cell centres and the grid edge take the
    clamped edge value; points outside the grid give NaN.
    """
    g = field.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    img = field.as_image()
    xmin, xmax, ymin, ymax = g.bounds
    inside = (pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)

    u = np.clip((pts[:, 0] - g.origin_x) / g.cell_size - 0.5, 0.0, g.nx - 1)
    v = np.clip((pts[:, 1] - g.origin_y) / g.cell_size - 0.5, 0.0, g.ny - 1)
    i0 = np.clip(np.floor(u).astype(int), 0, max(g.nx - 2, 0))
    j0 = np.clip(np.floor(v).astype(int), 0, max(g.ny - 2, 0))
    i1 = np.minimum(i0 + 1, g.nx - 1)
    j1 = np.minimum(j0 + 1, g.ny - 1)
    fu = u - i0
    fv = v - j0
    out = ((1 - fu) * (1 - fv) * img[j0, i0] + fu * (1 - fv) * img[j0, i1]
           + (1 - fu) * fv * img[j1, i0] + fu * fv * img[j1, i1])
    out[~inside] = np.nan
    return out


def detection_agreement(field: ConcentrationField, detections: Sequence[InSituDetection], pctl: float = 75.0,
                        *, wind: WindSeries | None = None, delta_t: float | None = None) -> AgreementMetrics:
    """Ordinal agreement between a map and point detections.

    Detections are compared where they were taken unless ``wind`` and
    ``delta_t`` are given, in which case they are moved upwind like the beams.

    Raises
    ------
    InsufficientDataError
        If fewer than three detections fall inside the grid.
    """
    pts = np.array([(d.x, d.y) for d in detections], dtype=float).reshape(-1, 2)
    conc = np.array([d.concentration for d in detections], dtype=float)
    if wind is not None and delta_t:
        for k, d in enumerate(detections):
            w = average_wind(wind, d.t, delta_t)
            pts[k] = compensate((d.x, d.y, d.z), w, delta_t)[:2]
    sampled = sample_map(field, pts) if len(pts) else np.empty(0)
    ok = ~np.isnan(sampled)
    if np.count_nonzero(ok) < 3:
        raise InsufficientDataError(
            f"need at least 3 detections inside the grid, got {int(np.count_nonzero(ok))}")
    rho = spearmanr(conc[ok], sampled[ok]).statistic
    threshold = float(np.percentile(field.values, pctl))
    hit_rate = float(np.mean(sampled[ok] > threshold))
    return AgreementMetrics(float(rho), hit_rate, threshold, int(np.count_nonzero(ok)), int(np.count_nonzero(~ok)))


def localization_error(field: ConcentrationField, true_sources) -> float:
    """Distance (m) from the centre of the map's peak cell to the nearest true source."""
    srcs = np.atleast_2d(np.asarray(true_sources, dtype=float))
    if srcs.size == 0:
        raise ValueError("need at least one true source")
    if np.ptp(field.values) == 0:
        raise UndefinedArgmaxError("map is constant; peak location undefined")
    peak = field.grid.cell_centers()[int(np.argmax(field.values))]
    return float(np.min(np.hypot(*(srcs - peak).T)))


def interleaved_folds(n: int, k_folds: int):
    """``(train, test)`` index pairs with sample ``i`` held out in fold ``i % k_folds``."""
    idx = np.arange(n)
    return [(idx[idx % k_folds != k], idx[idx % k_folds == k]) for k in range(k_folds)]


def sweep_dt(beams: Sequence[BeamMeasurement], wind: WindSeries, grid: GridSpec, solver_cfg: SolverConfig,
             candidates: Sequence[float], k_folds: int = 5, *, threads: int | None = None) -> DtSweepResult:
    """Cross-validated choice of the transport lag.

    For every candidate lag the beams are compensated, the map is fitted on
    ``k - 1`` interleaved folds and the RMS residual is pooled over all
    held-out beams. Ties go to the smallest lag.
    """
    beams = list(beams)
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ValueError("need at least one candidate lag")
    if k_folds < 2:
        raise ValueError(f"k_folds must be >= 2, got {k_folds}")
    if len(beams) < 2 * k_folds:
        raise InsufficientDataError(f"{len(beams)} beams cannot fill {k_folds} folds of two")

    base = GasTomography(grid=grid, wind=wind, lambda_smooth=solver_cfg.lambda_smooth,
                         max_iters=solver_cfg.max_iters, tol=solver_cfg.tol, nonneg=solver_cfg.nonneg,
                         threads=1)
    folds = interleaved_folds(len(beams), k_folds)

    def evaluate(task):
        dt, (train, test) = task
        model = clone(base).set_params(dt_s=dt).fit([beams[k] for k in train])
        cfg = CompensationConfig(dt) if dt > 0 else None
        try:
            held_out = assemble(grid, [beams[k] for k in test], wind if cfg else None, cfg, threads=1)
        except EmptySystemError:
            return np.empty(0)
        return residuals(held_out, model.field_)[0]

    tasks = [(dt, fold) for dt in candidates for fold in folds]
    fold_res = ordered_map(evaluate, tasks, threads)
    cv_rms = []
    for c in range(len(candidates)):
        res = np.concatenate(fold_res[c * k_folds:(c + 1) * k_folds])
        cv_rms.append(math.sqrt(float(np.sum(res * res)) / res.size) if res.size else math.inf)
    cv_rms = np.array(cv_rms)
    best = min(range(len(candidates)), key=lambda c: (cv_rms[c], candidates[c]))
    return DtSweepResult(np.array(candidates), cv_rms, candidates[best], k_folds)


def block_average(field: ConcentrationField, factor: int) -> np.ndarray:
    img = field.as_image()
    ny, nx = img.shape
    return img.reshape(ny // factor, factor, nx // factor, factor).mean(axis=(1, 3)).ravel()


def resolution_stability(beams: Sequence[BeamMeasurement], solver_cfg: SolverConfig, n_coarse: int,
                         extent, *, plane_height: float = 1.5, wind: WindSeries | None = None,
                         delta_t: float | None = None, threads: int | None = None) -> float:
    """Relative L2 gap between an ``n x n`` map and a ``2n x 2n`` map averaged down.

    ``extent`` is ``(origin_x, origin_y, side_m)`` of the square area mapped
    at both resolutions.
    """
    if n_coarse < 4:
        raise ValueError(f"n_coarse must be >= 4, got {n_coarse}")
    ox, oy, side = map(float, extent)
    coarse_grid = GridSpec(ox, oy, side / n_coarse, n_coarse, n_coarse, plane_height)
    maps = []
    for grid in (coarse_grid, coarse_grid.refined(2)):
        model = GasTomography(grid=grid, wind=wind, dt_s=delta_t or 0.0,
                              lambda_smooth=solver_cfg.lambda_smooth, max_iters=solver_cfg.max_iters,
                              tol=solver_cfg.tol, nonneg=solver_cfg.nonneg, threads=threads)
        maps.append(model.fit(list(beams)).field_)
    coarse = maps[0].values
    fine = block_average(maps[1], 2)
    return float(np.linalg.norm(coarse - fine) / np.linalg.norm(coarse))
