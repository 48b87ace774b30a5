"""Open-path measurement synthesis.

Simulated values come from midpoint quadrature of the continuous scene along
each beam, never from the grid, so reconstructions are not tested against
their own discretisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .exceptions import SystemMismatchError
from .grid import BeamMeasurement, ConcentrationField, Position3, SparseRow
from .plume import Scene, concentration_at

MAX_RATE_HZ = 100.0
DEFAULT_NOISE_PPM_M = 50.0
SIM_QUADRATURE_POINTS = 256


@dataclass(frozen=True)
class Station:
    """Fixed sensor aiming at a reflector that is static or walks along ``reflector`` waypoints.

    The reflector moves at constant speed along the polyline over the dwell,
    reaching the last waypoint on the last sample.
    """

    sensor: Position3
    reflector: np.ndarray
    dwell: float = 20.0
    rate: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "sensor", Position3(*map(float, self.sensor)))
        path = np.array(self.reflector, dtype=float).reshape(-1, 3)
        if path.shape[0] == 0 or not np.all(np.isfinite(path)):
            raise ValueError("reflector path needs at least one finite waypoint")
        path.flags.writeable = False
        object.__setattr__(self, "reflector", path)
        if not (math.isfinite(self.dwell) and self.dwell > 0):
            raise ValueError(f"dwell must be > 0, got {self.dwell}")
        if not (0 < self.rate <= MAX_RATE_HZ):
            raise ValueError(f"rate must be in (0, {MAX_RATE_HZ}] Hz, got {self.rate}")

    @property
    def n_samples(self) -> int:
        return max(1, int(round(self.dwell * self.rate)))

    def reflector_positions(self) -> np.ndarray:
        path = self.reflector
        n = self.n_samples
        if path.shape[0] == 1:
            return np.repeat(path, n, axis=0)
        seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        frac = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
        s = frac * arc[-1]
        return np.column_stack([np.interp(s, arc, path[:, k]) for k in range(3)])


@dataclass(frozen=True)
class AcquisitionPlan:
    """Stations visited in order, starting at ``t0`` with ``gap_s`` between stations."""

    stations: tuple[Station, ...]
    t0: float = 0.0
    gap_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        if not self.stations:
            raise ValueError("acquisition plan needs at least one station")
        if self.gap_s < 0:
            raise ValueError("gap_s must be >= 0")

    def samples(self):
        """``(t, sensor, reflector)`` for every sample in acquisition order."""
        out = []
        t_start = self.t0
        for st in self.stations:
            n = st.n_samples
            for i, refl in enumerate(st.reflector_positions()):
                out.append((t_start + i / st.rate, st.sensor, Position3(*refl)))
            t_start += n / st.rate + self.gap_s
        return out

    @property
    def duration(self) -> float:
        return sum(st.n_samples / st.rate for st in self.stations) + self.gap_s * (len(self.stations) - 1)


@dataclass(frozen=True)
class NoiseModel:
    sigma_abs: float = DEFAULT_NOISE_PPM_M
    clamp_nonneg: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.sigma_abs) and self.sigma_abs >= 0):
            raise ValueError(f"sigma_abs must be >= 0, got {self.sigma_abs}")


def perimeter_plan(bounds, n_stations=5, dwell_s=20.0, rate_hz=5.0, height=1.5,
                   inset=0.01, margin=0.05) -> AcquisitionPlan:
    """Sensors spaced around a rectangle, each sweeping the reflector around the rest of it.

    ``bounds`` is ``(xmin, xmax, ymin, ymax)``. The rectangle is shrunk by
    ``inset`` times its shorter side so every beam lies strictly inside
    ``bounds``; ``margin`` (fraction of the perimeter) keeps the reflector
    away from its own sensor.
    """
    xmin, xmax, ymin, ymax = map(float, bounds)
    pad = inset * min(xmax - xmin, ymax - ymin)
    xmin, xmax, ymin, ymax = xmin + pad, xmax - pad, ymin + pad, ymax - pad
    corners = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
    side = np.linalg.norm(np.diff(np.vstack([corners, corners[:1]]), axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(side)])
    perimeter = arc[-1]

    def point(s):
        s = s % perimeter
        k = min(int(np.searchsorted(arc, s, side="right")) - 1, 3)
        a, b = corners[k], corners[(k + 1) % 4]
        return a + (b - a) * (s - arc[k]) / side[k]

    stations = []
    # offset so no sensor sits exactly on a corner
    offsets = (np.arange(n_stations) + 0.3) * perimeter / n_stations
    for s0 in offsets:
        s_start, s_stop = s0 + margin * perimeter, s0 + (1 - margin) * perimeter
        knots = [s_start]
        for base in (0.0, perimeter, 2 * perimeter):
            for c in arc[:-1] + base:
                if s_start < c < s_stop:
                    knots.append(c)
        knots.append(s_stop)
        knots = sorted(knots)
        path = np.array([[*point(s), height] for s in knots])
        sensor = Position3(*point(s0), height)
        stations.append(Station(sensor, path, dwell_s, rate_hz))
    return AcquisitionPlan(tuple(stations))


def integrate(field: ConcentrationField, row: SparseRow) -> float:
    """Discrete path integral ``sum(weight * concentration)`` in ppm*m."""
    idx = np.asarray(row.indices)
    if idx.size and (idx.min() < 0 or idx.max() >= field.grid.n_cells):
        raise SystemMismatchError(
            f"row references cell {int(idx.max())} but grid has {field.grid.n_cells} cells")
    return float(np.dot(row.weights, field.values[idx]))


def path_integral_quadrature(scene: Scene, sensor, reflector, t: float, n_points: int = SIM_QUADRATURE_POINTS) -> float:
    """Composite midpoint rule for the scene's concentration along a 3D beam (ppm*m).

    The field is taken as constant in z, so only the horizontal position of each
    quadrature node matters; the step is the full 3D length over ``n_points``.
    """
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    a = np.asarray(sensor, dtype=float)
    b = np.asarray(reflector, dtype=float)
    length = float(np.linalg.norm(b - a))
    s = (np.arange(n_points) + 0.5) / n_points
    nodes = a[:2] + s[:, None] * (b[:2] - a[:2])
    return float(np.sum(concentration_at(scene, nodes, t))) * length / n_points


def simulate_measurements(scene: Scene, plan: AcquisitionPlan, noise: NoiseModel | None = None,
                          seed: int = 0, *, n_points: int = SIM_QUADRATURE_POINTS,
                          threads: int | None = None) -> list[BeamMeasurement]:
    """Noisy open-path samples of ``scene`` following ``plan``.

    Noise for sample ``k`` is the ``k``-th draw of a generator seeded with
    ``seed``, so output is independent of ``threads``.
    """
    noise = NoiseModel() if noise is None else noise
    samples = plan.samples()
    clean = ordered_map(
        lambda smp: path_integral_quadrature(scene, smp[1], smp[2], smp[0], n_points),
        samples, threads)
    rng = np.random.default_rng(seed)
    values = np.asarray(clean) + rng.normal(0.0, 1.0, size=len(samples)) * noise.sigma_abs
    if noise.clamp_nonneg:
        values = np.maximum(values, 0.0)
    return [BeamMeasurement(t, s, r, float(v)) for (t, s, r), v in zip(samples, values)]
