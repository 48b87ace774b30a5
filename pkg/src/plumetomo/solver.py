"""Sparse tomographic system and its non-negative, smoothness-regularised solution."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ._parallel import ordered_map
from .exceptions import DegenerateBeamError, EmptySystemError, SystemMismatchError
from .grid import BeamMeasurement, ConcentrationField, GridSpec, SparseRow, beam_row
from .wind import CompensationConfig, WindSeries, compensate_beam

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
BACKTRACK_SHRINK = 0.5
MAX_BACKTRACKS = 60
#: iterations over which the relative objective decrease is compared with ``tol``
STALL_ITERS = 3
#: reference length (m) that turns the cell-unit Laplacian into physical units
SMOOTH_REF_LENGTH_M = 1.0
#: relative curvature below which a cell is treated as unconstrained and left alone
HESS_FLOOR = 1e-14


def _dot(a, b):
    # pairwise summation; bit-reproducible regardless of BLAS threading
    return float(np.sum(a * b))


@dataclass(frozen=True)
class SolverConfig:
    """Regularisation and stopping parameters of :func:`solve`.

    ``lambda_smooth`` weights the squared discrete Laplacian. It is scaled
    internally by the mean number of rows per cell and by
    ``(1 m / cell_size) ** 4`` so that one value behaves alike across data
    volumes and grid resolutions.
    """

    lambda_smooth: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-8
    nonneg: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.lambda_smooth) and self.lambda_smooth >= 0):
            raise ValueError(f"lambda_smooth must be >= 0, got {self.lambda_smooth}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if not (self.tol > 0):
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass
class SparseSystem:
    """Rows ``A`` (chord lengths, m), data ``y`` (ppm*m) and sample times."""

    grid: GridSpec
    rows: list[SparseRow]
    y: np.ndarray
    times: np.ndarray
    n_dropped: int = 0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.times = np.asarray(self.times, dtype=float).ravel()
        if not (len(self.rows) == self.y.size == self.times.size):
            raise SystemMismatchError(
                f"{len(self.rows)} rows, {self.y.size} values, {self.times.size} timestamps")
        for k, row in enumerate(self.rows):
            if len(row) == 0:
                raise SystemMismatchError(f"row {k} is empty")
            if row.indices.min() < 0 or row.indices.max() >= self.grid.n_cells:
                raise SystemMismatchError(f"row {k} references a cell outside the grid")

    def __len__(self):
        return len(self.rows)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        indptr = np.concatenate([[0], np.cumsum([len(r) for r in self.rows])])
        indices = np.concatenate([r.indices for r in self.rows]) if self.rows else np.empty(0, np.int64)
        data = np.concatenate([r.weights for r in self.rows]) if self.rows else np.empty(0)
        return sp.csr_matrix((data, indices, indptr), shape=(len(self.rows), self.grid.n_cells))

    @property
    def row_totals(self) -> np.ndarray:
        return np.array([r.total_weight for r in self.rows])

    def observed_cells(self) -> np.ndarray:
        mask = np.zeros(self.grid.n_cells, dtype=bool)
        for r in self.rows:
            mask[r.indices] = True
        return mask

    def subset(self, index) -> "SparseSystem":
        index = np.asarray(index)
        return SparseSystem(self.grid, [self.rows[k] for k in index], self.y[index], self.times[index], 0)


@dataclass
class SolveReport:
    iterations: int
    objective: float
    relative_residual: float
    objective_history: list[float]
    converged: bool
    lambda_effective: float
    unobserved: np.ndarray = field(repr=False)

    @property
    def n_unobserved(self) -> int:
        return int(np.count_nonzero(self.unobserved))


def _row_for(grid, beam, wind, cfg):
    if wind is not None and cfg is not None:
        beam = compensate_beam(beam, wind, cfg)
    try:
        return beam_row(grid, beam.sensor, beam.reflector)
    except DegenerateBeamError as exc:
        logger.warning("dropping beam at t=%s: %s", beam.t, exc)
        return None


def assemble(grid: GridSpec, beams: Sequence[BeamMeasurement], wind: WindSeries | None = None,
             cfg: CompensationConfig | None = None, *, threads: int | None = None) -> SparseSystem:
    """Build the linear system, compensating beams for wind when both ``wind`` and ``cfg`` are given.

    Beams that miss the grid (or have no horizontal extent) are dropped and
    counted in ``n_dropped``.

    Raises
    ------
    EmptySystemError
        If no beam crosses the grid.
    WindGapError
        If a beam's timestamp is not covered by ``wind``.
    """
    beams = list(beams)
    if not beams:
        raise EmptySystemError("no beams to assemble")
    rows = ordered_map(lambda b: _row_for(grid, b, wind, cfg), beams, threads)
    keep = [k for k, r in enumerate(rows) if r is not None and len(r) > 0]
    n_dropped = len(beams) - len(keep)
    if n_dropped:
        logger.info("dropped %d of %d beams that miss the grid", n_dropped, len(beams))
    if not keep:
        raise EmptySystemError(f"all {len(beams)} beams miss the grid")
    return SparseSystem(grid, [rows[k] for k in keep],
                        [beams[k].value for k in keep], [beams[k].t for k in keep], n_dropped)


def smoothness_operator(grid: GridSpec) -> sp.csr_matrix:
    """5-point graph Laplacian with Neumann boundary (missing neighbours dropped)."""
    nx, ny = grid.nx, grid.ny
    idx = np.arange(grid.n_cells).reshape(ny, nx)
    pairs = [(idx[:, :-1].ravel(), idx[:, 1:].ravel()),
             (idx[:-1, :].ravel(), idx[1:, :].ravel())]
    a = np.concatenate([p[0] for p in pairs])
    b = np.concatenate([p[1] for p in pairs])
    adj = sp.coo_matrix((np.ones(a.size), (a, b)), shape=(grid.n_cells,) * 2)
    adj = (adj + adj.T).tocsr()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    return (sp.diags(degree) - adj).tocsr()


def effective_lambda(system: SparseSystem, lambda_smooth: float) -> float:
    rows_per_cell = len(system) / system.grid.n_cells
    return lambda_smooth * rows_per_cell * (SMOOTH_REF_LENGTH_M / system.grid.cell_size) ** 4


def solve(system: SparseSystem, cfg: SolverConfig | None = None) -> tuple[ConcentrationField, SolveReport]:
    """Projected-gradient minimiser of ``|W(Ax - y)|^2 + lam * |Lx|^2``, ``x >= 0``.

    ``W`` divides every row by its total chord length, turning each equation
    into "mean concentration along the beam". Iterations start at zero and
    step along the Jacobi-scaled negative gradient, projected onto the
    non-negative orthant, with a Barzilai-Borwein trial step and Armijo
    backtracking; the objective therefore never increases. Hitting
    ``max_iters`` is reported through ``SolveReport.converged`` rather than
    raised.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if len(system) == 0:
        raise EmptySystemError("cannot solve an empty system")
    n = system.grid.n_cells
    totals = system.row_totals
    wa = (sp.diags(1.0 / totals) @ system.matrix).tocsr()
    wat = wa.T.tocsr()
    wy = system.y / totals
    lam = effective_lambda(system, cfg.lambda_smooth)
    lap = smoothness_operator(system.grid) if lam > 0 else None

    hess_diag = 2.0 * np.asarray(wa.multiply(wa).sum(axis=0)).ravel()
    if lap is not None:
        hess_diag += 2.0 * lam * np.asarray(lap.multiply(lap).sum(axis=0)).ravel()
    # cells with negligible curvature (unobserved, vanishing lambda) are not moved
    curved = hess_diag > HESS_FLOOR * hess_diag.max()
    scale = np.divide(1.0, hess_diag, out=np.zeros(n), where=curved)
    project = (lambda v: np.maximum(v, 0.0)) if cfg.nonneg else (lambda v: v)

    def objective(r, lx):
        f = _dot(r, r)
        if lap is not None:
            f += lam * _dot(lx, lx)
        return f

    def gradient(r, lx):
        g = 2.0 * (wat @ r)
        if lap is not None:
            g += 2.0 * lam * (lap @ lx)
        return g

    x = np.zeros(n)
    r = -wy
    lx = np.zeros(n)
    f = objective(r, lx)
    g = gradient(r, lx)
    history = [f]
    step = 1.0
    converged = f == 0.0
    iters = 0
    while iters < cfg.max_iters and f > 0.0:
        alpha = step
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            d = project(x - alpha * scale * g) - x
            if not np.any(d):
                break
            # exact change of the quadratic; differencing two objective
            # values would drown it in rounding near the optimum
            ad = wa @ d
            change = 2.0 * _dot(r, ad) + _dot(ad, ad)
            if lap is not None:
                ld = lap @ d
                change += lam * (2.0 * _dot(lx, ld) + _dot(ld, ld))
            if change <= ARMIJO_C * _dot(g, d):
                accepted = True
                break
            alpha *= BACKTRACK_SHRINK
        if not accepted:
            # no representable descent step left
            converged = True
            break

        iters += 1
        x = x + d
        r = wa @ x - wy
        if lap is not None:
            lx = lap @ x
        g_new = gradient(r, lx)
        yv = g_new - g
        sy = _dot(d, yv)
        step = _dot(d, np.divide(d, scale, out=np.zeros(n), where=scale > 0)) / sy if sy > 0 else 1.0
        if not math.isfinite(step):
            step = 1.0
        g = g_new
        f_prev = f
        f_true = objective(r, lx)
        # recomputation can wobble by rounding near the optimum; the
        # recorded sequence must not
        f = min(f_true, f_prev)
        history.append(f)

        # Barzilai-Borwein steps alternate long and short, so judge progress
        # over a window rather than a single iteration
        stalled = len(history) > STALL_ITERS and (
            history[-1 - STALL_ITERS] - f <= cfg.tol * history[-1 - STALL_ITERS])
        if stalled or f_true == 0.0:
            converged = True
            break

    wy_norm = math.sqrt(_dot(wy, wy))
    rel_res = math.sqrt(_dot(r, r)) / wy_norm if wy_norm > 0 else math.sqrt(_dot(r, r))
    unobserved = ~system.observed_cells()
    report = SolveReport(iters, f, rel_res, history, converged, lam, unobserved)
    return ConcentrationField(system.grid, x, unobserved), report


def residuals(system: SparseSystem, field: ConcentrationField) -> tuple[np.ndarray, float]:
    """Per-beam residuals ``A x - y`` (ppm*m) and their RMS."""
    if field.grid != system.grid:
        raise SystemMismatchError("field grid does not match system grid")
    res = system.matrix @ field.values - system.y
    rms = math.sqrt(_dot(res, res) / res.size) if res.size else 0.0
    return res, rms
