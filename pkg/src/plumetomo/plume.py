"""Synthetic ground truth: Gaussian gas blobs advected by a uniform wind.

Each source's blob keeps its shape and is displaced by the wind averaged over
the source's transport lag, matching a no-diffusion Lagrangian picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import ConcentrationField, GridSpec
from .wind import WindSeries, average_wind

AMBIENT_CO2_PPM = 420.0


@dataclass(frozen=True)
class GasSource:
    sx: float
    sy: float
    amplitude: float
    sigma: float
    transport_lag: float = 3.0

    def __post_init__(self):
        for name in ("sx", "sy", "amplitude", "sigma", "transport_lag"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.transport_lag < 0:
            raise ValueError(f"transport_lag must be >= 0, got {self.transport_lag}")

    @property
    def location(self) -> tuple[float, float]:
        return (self.sx, self.sy)


@dataclass(frozen=True)
class Scene:
    """Sources over an ambient background. ``wind=None`` means still air."""

    sources: tuple[GasSource, ...] = ()
    background: float = AMBIENT_CO2_PPM
    wind: WindSeries | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not math.isfinite(self.background) or self.background < 0:
            raise ValueError(f"background must be finite and >= 0, got {self.background}")

    def with_wind(self, wind: WindSeries | None) -> "Scene":
        return Scene(self.sources, self.background, wind, self.seed)


def _plume_centers(scene: Scene, t: float) -> np.ndarray:
    centers = np.empty((len(scene.sources), 2))
    for k, src in enumerate(scene.sources):
        centers[k] = (src.sx, src.sy)
        if scene.wind is not None:
            centers[k] += average_wind(scene.wind, t, src.transport_lag) * src.transport_lag
    return centers


def concentration_at(scene: Scene, x, t: float):
    """Concentration (ppm) at plane point(s) ``x`` and time ``t``.

    ``x`` is a single ``(x, y)`` pair or an ``(n, 2)`` array; the return value
    is a float or an ``(n,)`` array to match.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.full(pts.shape[0], scene.background, dtype=float)
    for src, center in zip(scene.sources, _plume_centers(scene, t)):
        r2 = np.sum((pts - center) ** 2, axis=1)
        out += src.amplitude * np.exp(-r2 / (2.0 * src.sigma ** 2))
    return float(out[0]) if single else out


def field_at(scene: Scene, grid: GridSpec, t: float) -> ConcentrationField:
    """Scene concentration sampled at every cell centre."""
    return ConcentrationField(grid, concentration_at(scene, grid.cell_centers(), t))


def random_scene(seed: int, n_sources: int, area: Sequence[float] | GridSpec,
                 amp_range=(50.0, 500.0), sigma_range=(1.0, 4.0), *,
                 transport_lag: float = 3.0, background: float = AMBIENT_CO2_PPM,
                 wind: WindSeries | None = None) -> Scene:
    """Scene with ``n_sources`` sources drawn uniformly inside ``area``.

    ``area`` is ``(xmin, xmax, ymin, ymax)`` or a grid whose bounds are used.
    """
    if isinstance(area, GridSpec):
        area = area.bounds
    xmin, xmax, ymin, ymax = map(float, area)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate area {area!r}")
    if not (0 <= amp_range[0] <= amp_range[1]):
        raise ValueError(f"invalid amplitude range {amp_range!r}")
    if not (0 < sigma_range[0] <= sigma_range[1]):
        raise ValueError(f"invalid sigma range {sigma_range!r}")
    if n_sources < 0:
        raise ValueError("n_sources must be >= 0")

    rng = np.random.default_rng(seed)
    sources = []
    for _ in range(n_sources):
        sx, sy = rng.uniform((xmin, ymin), (xmax, ymax))
        sources.append(GasSource(float(sx), float(sy),
                                 float(rng.uniform(*amp_range)),
                                 float(rng.uniform(*sigma_range)),
                                 transport_lag))
    return Scene(tuple(sources), background, wind, seed)
