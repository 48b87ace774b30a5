"""Lagrangian wind compensation under a spatially uniform, diffusion-free wind.

Gas measured on the plane at time ``t`` left the ground ``dt`` seconds earlier
and has since been advected by the wind. Shifting both beam endpoints by
``-w_t * dt`` attributes the measurement to where the gas was emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .exceptions import WindGapError
from .grid import BeamMeasurement, Position3

DEFAULT_DT_S = 3.0
#: fallback horizon (s) for :func:`average_wind` when the window holds no sample
MAX_GAP_S = 10.0


@dataclass(frozen=True)
class WindSeries:
    """Anemometer log: strictly increasing times ``t`` (s) and vectors ``w`` (m/s), shape (n, 2)."""

    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).ravel()
        w = np.array(self.w, dtype=float).reshape(-1, 2)
        if t.size == 0:
            raise ValueError("wind series must contain at least one sample")
        if t.size != w.shape[0]:
            raise ValueError(f"{t.size} timestamps but {w.shape[0]} wind vectors")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValueError("wind samples must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("wind timestamps must be strictly ascending")
        t.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.t.size

    def __eq__(self, other):
        if not isinstance(other, WindSeries):
            return NotImplemented
        return np.array_equal(self.t, other.t) and np.array_equal(self.w, other.w)

    __hash__ = None

    @classmethod
    def constant(cls, w, t_start, t_stop, rate_hz=1.0):
        """Time-constant wind sampled at ``rate_hz`` over ``[t_start, t_stop]``."""
        n = int(math.floor((t_stop - t_start) * rate_hz + 1e-9)) + 1
        t = t_start + np.arange(max(n, 1)) / rate_hz
        return cls(t, np.tile(np.asarray(w, dtype=float), (t.size, 1)))


@dataclass(frozen=True)
class CompensationConfig:
    delta_t: float = DEFAULT_DT_S

    def __post_init__(self):
        if not math.isfinite(self.delta_t) or self.delta_t < 0:
            raise ValueError(f"delta_t must be finite and >= 0, got {self.delta_t!r}")


def average_wind(series: WindSeries, t: float, delta_t: float, max_gap: float = MAX_GAP_S) -> np.ndarray:
    """Arithmetic mean of the samples with timestamps in ``[t - delta_t, t]``.

    An empty window falls back to the nearest sample (earlier one on ties)
    if it lies within ``max_gap`` seconds of ``t``.

    Raises
    ------
    WindGapError
        If the window is empty and no sample lies within ``max_gap``.
    """
    if not math.isfinite(delta_t) or delta_t < 0:
        raise ValueError(f"delta_t must be finite and >= 0, got {delta_t!r}")
    ts = series.t
    lo = np.searchsorted(ts, t - delta_t, side="left")
    hi = np.searchsorted(ts, t, side="right")
    if hi > lo:
        return series.w[lo:hi].mean(axis=0)

    # empty window: candidates are the neighbours of the insertion point
    candidates = [k for k in (lo - 1, lo) if 0 <= k < ts.size]
    best = min(candidates, key=lambda k: (abs(ts[k] - t), ts[k]))
    if abs(ts[best] - t) > max_gap:
        raise WindGapError(
            f"no wind sample within {max_gap} s of t={t} (nearest at t={ts[best]})")
    return series.w[best].copy()


def compensate(position: Sequence[float], w: Sequence[float], delta_t: float) -> Position3:
    """Offset a location against the wind: ``x - w * delta_t`` horizontally, z unchanged."""
    x, y, z = map(float, position)
    wx, wy = map(float, w)
    if not all(map(math.isfinite, (x, y, z, wx, wy, delta_t))):
        raise ValueError("compensate requires finite inputs")
    return Position3(x - wx * delta_t, y - wy * delta_t, z)


def compensate_beam(beam: BeamMeasurement, series: WindSeries, cfg: CompensationConfig) -> BeamMeasurement:
    """Shift both endpoints of ``beam`` by the wind averaged over its lag window."""
    if cfg.delta_t == 0:
        return beam
    w = average_wind(series, beam.t, cfg.delta_t)
    return replace(beam,
                   sensor=compensate(beam.sensor, w, cfg.delta_t),
                   reflector=compensate(beam.reflector, w, cfg.delta_t))
