"""Reconstruction grid and exact ray/cell intersection on the measurement plane.

Cells are square, indexed ``(i, j)`` with ``i`` along x (east) and ``j``
along y (north). The linear index is ``j * nx + i`` everywhere in the
package, including serialized maps and systems.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import DegenerateBeamError, InvalidGridError, SystemMismatchError, VerticalBeamError

#: chords shorter than this (m) are dropped from traversals
MIN_CHORD = 1e-12
#: shortest 3D beam (m) accepted by :func:`beam_row`
MIN_PATH_3D = 1e-9


class Position3(NamedTuple):
    """Point in a local east-north-up frame, in metres."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class GridSpec:
    """Square-cell discretisation of the horizontal measurement plane.

    Parameters
    ----------
    origin_x, origin_y : float
        Lower-left (south-west) corner of the grid in metres.
    cell_size : float
        Edge length of a cell in metres.
    nx, ny : int
        Number of cells along x and y.
    plane_height : float
        Height of the plane above ground in metres.
    """

    origin_x: float
    origin_y: float
    cell_size: float
    nx: int
    ny: int
    plane_height: float = 1.5

    def __post_init__(self):
        for name in ("origin_x", "origin_y", "cell_size", "plane_height"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise InvalidGridError(f"{name} must be a finite number, got {value!r}")
        if self.cell_size <= 0:
            raise InvalidGridError(f"cell_size must be positive, got {self.cell_size!r}")
        for name in ("nx", "ny"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
                raise InvalidGridError(f"{name} must be an integer >= 1, got {value!r}")
        # normalise numpy scalars so equality and repr are stable
        object.__setattr__(self, "origin_x", float(self.origin_x))
        object.__setattr__(self, "origin_y", float(self.origin_y))
        object.__setattr__(self, "cell_size", float(self.cell_size))
        object.__setattr__(self, "plane_height", float(self.plane_height))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def width(self) -> float:
        return self.nx * self.cell_size

    @property
    def height(self) -> float:
        return self.ny * self.cell_size

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """``(xmin, xmax, ymin, ymax)`` of the grid in metres."""
        return (self.origin_x, self.origin_x + self.width,
                self.origin_y, self.origin_y + self.height)

    def linear_index(self, i: int, j: int) -> int:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise SystemMismatchError(f"cell ({i}, {j}) outside {self.nx}x{self.ny} grid")
        return j * self.nx + i

    def cell_of(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_cells:
            raise SystemMismatchError(f"linear index {index} outside grid of {self.n_cells} cells")
        return index % self.nx, index // self.nx

    def cell_centers(self) -> np.ndarray:
        """Cell-centre coordinates, shape ``(n_cells, 2)``, in linear-index order."""
        xs = self.origin_x + (np.arange(self.nx) + 0.5) * self.cell_size
        ys = self.origin_y + (np.arange(self.ny) + 0.5) * self.cell_size
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def contains(self, x: float, y: float) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def refined(self, factor: int) -> "GridSpec":
        """Same extent with each cell split into ``factor`` x ``factor`` cells."""
        return GridSpec(self.origin_x, self.origin_y, self.cell_size / factor,
                        self.nx * factor, self.ny * factor, self.plane_height)


def make_grid(origin_x, origin_y, cell_size, nx, ny, plane_height=1.5) -> GridSpec:
    """Build a validated :class:`GridSpec`.

    Raises
    ------
    InvalidGridError
        If ``cell_size`` is not positive or a cell count is below one.
    """
    return GridSpec(origin_x, origin_y, cell_size, nx, ny, plane_height)


@dataclass(frozen=True)
class SparseRow:
    """Chord lengths of one beam, keyed by linear cell index."""

    indices: np.ndarray
    weights: np.ndarray
    total_path_length_3d: float

    def __len__(self):
        return len(self.indices)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))


@dataclass
class ConcentrationField:
    """Per-cell concentration in ppm over a grid, stored in linear-index order."""

    grid: GridSpec
    values: np.ndarray
    unobserved: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.shape != (self.grid.n_cells,):
            raise SystemMismatchError(
                f"field has {values.size} values, grid has {self.grid.n_cells} cells")
        if not np.all(np.isfinite(values)):
            raise ValueError("concentration values must be finite")
        self.values = values

    def as_image(self) -> np.ndarray:
        """Values as an ``(ny, nx)`` array; row 0 is the southernmost row."""
        return self.values.reshape(self.grid.ny, self.grid.nx)


@dataclass(frozen=True)
class BeamMeasurement:
    """One open-path sample: endpoints at time ``t`` (s) and path integral in ppm*m."""

    t: float
    sensor: Position3
    reflector: Position3
    value: float

    def __post_init__(self):
        object.__setattr__(self, "sensor", Position3(*map(float, self.sensor)))
        object.__setattr__(self, "reflector", Position3(*map(float, self.reflector)))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "value", float(self.value))

    @property
    def length(self) -> float:
        return math.dist(self.sensor, self.reflector)


def _clip_parameters(x0, y0, dx, dy, width, height):
    # Liang-Barsky clip of p0 + s*(dx, dy), s in [0, 1], against [0, width] x [0, height]
    s_lo, s_hi = 0.0, 1.0
    for start, delta, extent in ((x0, dx, width), (y0, dy, height)):
        if delta == 0.0:
            if start < 0.0 or start > extent:
                return None
            continue
        a = (0.0 - start) / delta
        b = (extent - start) / delta
        if a > b:
            a, b = b, a
        s_lo = max(s_lo, a)
        s_hi = min(s_hi, b)
    if s_hi <= s_lo:
        return None
    return s_lo, s_hi


def _traverse_arrays(grid: GridSpec, p0, p1):
    """Linear indices and chord lengths of a 2D segment, ordered from ``p0``."""
    x0 = float(p0[0]) - grid.origin_x
    y0 = float(p0[1]) - grid.origin_y
    dx = float(p1[0]) - float(p0[0])
    dy = float(p1[1]) - float(p0[1])
    length = math.hypot(dx, dy)
    if not math.isfinite(length) or not (math.isfinite(x0) and math.isfinite(y0)):
        raise DegenerateBeamError("segment endpoints must be finite")
    if length <= MIN_CHORD:
        raise DegenerateBeamError(f"segment endpoints coincide ({p0!r} -> {p1!r})")

    empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=float))
    clipped = _clip_parameters(x0, y0, dx, dy, grid.width, grid.height)
    if clipped is None:
        return empty
    s_lo, s_hi = clipped
    if (s_hi - s_lo) * length < MIN_CHORD:
        return empty

    h = grid.cell_size
    crossings = [np.array([s_lo, s_hi])]
    for start, delta, n in ((x0, dx, grid.nx), (y0, dy, grid.ny)):
        if delta == 0.0:
            continue
        # a near-parallel segment overflows to inf, which the filter drops
        with np.errstate(over="ignore"):
            s = (np.arange(1, n) * h - start) / delta
        crossings.append(s[(s > s_lo) & (s < s_hi)])
    s = np.sort(np.concatenate(crossings))

    chords = np.diff(s) * length
    mids = 0.5 * (s[:-1] + s[1:])
    keep = chords >= MIN_CHORD
    chords, mids = chords[keep], mids[keep]
    i = np.clip(np.floor((x0 + mids * dx) / h).astype(np.int64), 0, grid.nx - 1)
    j = np.clip(np.floor((y0 + mids * dy) / h).astype(np.int64), 0, grid.ny - 1)
    idx = j * grid.nx + i

    # rounding near cell corners can split one cell's chord in two; merge runs
    if idx.size > 1:
        starts = np.concatenate([[True], idx[1:] != idx[:-1]])
        if not starts.all():
            group = np.cumsum(starts) - 1
            chords = np.bincount(group, weights=chords)
            idx = idx[starts]
    return idx, chords


def traverse(grid: GridSpec, p0: Sequence[float], p1: Sequence[float]) -> list[tuple[tuple[int, int], float]]:
    """Exact chord lengths of the segment ``p0 -> p1`` through the grid cells.

    Returns ``[((i, j), chord_m), ...]`` ordered from ``p0`` to ``p1``.
    Portions of the segment outside the grid are omitted, so the chords sum
    to the length of the segment clipped to the grid bounds.

    Raises
    ------
    DegenerateBeamError
        If ``p0`` and ``p1`` coincide to within 1e-12 m.
    """
    idx, chords = _traverse_arrays(grid, p0, p1)
    return [((int(k % grid.nx), int(k // grid.nx)), float(c)) for k, c in zip(idx, chords)]


def beam_row(grid: GridSpec, sensor: Sequence[float], reflector: Sequence[float]) -> SparseRow:
    """Sparse row for a 3D open path projected onto the plane.

    Chords of the horizontal projection are scaled by ``L3D / L2D`` so the row
    integrates a height-independent concentration along the true beam length.
    """
    s = np.asarray(sensor, dtype=float)
    r = np.asarray(reflector, dtype=float)
    if s.shape != (3,) or r.shape != (3,) or not (np.all(np.isfinite(s)) and np.all(np.isfinite(r))):
        raise DegenerateBeamError("sensor and reflector must be finite 3D points")
    length_3d = math.dist(s, r)
    if length_3d <= MIN_PATH_3D:
        raise DegenerateBeamError(f"zero-length beam at {tuple(s)}")
    length_2d = math.hypot(r[0] - s[0], r[1] - s[1])
    if length_2d <= MIN_CHORD:
        raise VerticalBeamError(f"beam from {tuple(s)} to {tuple(r)} is vertical")
    idx, chords = _traverse_arrays(grid, s[:2], r[:2])
    return SparseRow(idx, chords * (length_3d / length_2d), length_3d)
