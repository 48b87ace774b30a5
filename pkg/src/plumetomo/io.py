"""Readers and writers for the on-disk formats.

All CSVs are UTF-8 with LF newlines. The first non-comment line must be the
exact header; comment lines (``# ...``, e.g. ``# epoch=2024-05-01T10:00:00Z``)
may precede it and are ignored. Floats are written as the shortest decimal
that round-trips, so ``write(read(f))`` reproduces a file written here
byte for byte.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .evaluation import INSITU_RANGE_PPM, InSituDetection
from .exceptions import ParseError, ValidationError
from .grid import BeamMeasurement, ConcentrationField, GridSpec
from .plume import GasSource, Scene
from .wind import WindSeries

MEASUREMENTS_HEADER = ("t_s,sensor_x_m,sensor_y_m,sensor_z_m,"
                       "reflector_x_m,reflector_y_m,reflector_z_m,value_ppm_m")
WIND_HEADER = "t_s,wind_x_ms,wind_y_ms"
INSITU_HEADER = "t_s,x_m,y_m,z_m,co2_ppm"
MAP_KEYS = ("origin_x_m", "origin_y_m", "cell_size_m", "nx", "ny", "plane_height_m", "units")
#: span (s) given to a constant scene wind when no explicit span is requested
DEFAULT_WIND_SPAN_S = (-60.0, 3600.0)

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def fmt(value: float) -> str:
    return repr(float(value))


def _parse_float(text, path, lineno, column):
    if not _NUMBER.fullmatch(text):
        raise ParseError(f"column {column!r}: not a number: {text!r}", path, lineno)
    value = float(text)
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: value out of range: {text!r}", path, lineno)
    return value


def _read_lines(path):
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", path) from None
    if "\r" in text:
        raise ParseError("CR characters found; files must use LF newlines", path)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _read_table(path, header):
    """Yield ``(lineno, values)`` for each data row of a numeric CSV."""
    lines = _read_lines(path)
    columns = header.split(",")
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        k += 1
    if k == len(lines):
        raise ParseError(f"missing header, expected {header!r}", path, k + 1 if lines else 1)
    if lines[k] != header:
        raise ParseError(f"bad header {lines[k]!r}, expected {header!r}", path, k + 1)
    rows = []
    for lineno, line in enumerate(lines[k + 1:], start=k + 2):
        fields = line.split(",")
        if len(fields) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, found {len(fields)}", path, lineno)
        rows.append((lineno, [_parse_float(f, path, lineno, c) for f, c in zip(fields, columns)]))
    return rows


def _write_table(path, header, rows, epoch=None):
    out = []
    if epoch is not None:
        out.append(f"# epoch={epoch}")
    out.append(header)
    out.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_bytes(("\n".join(out) + "\n").encode("utf-8"))


def read_measurements(path, strict: bool = True) -> list[BeamMeasurement]:
    """Parse a measurements CSV; with ``strict`` negative path integrals are rejected."""
    beams = []
    for lineno, v in _read_table(path, MEASUREMENTS_HEADER):
        if strict and v[7] < 0:
            raise ValidationError(f"negative path integral {v[7]}", path, lineno)
        if v[1:4] == v[4:7]:
            raise ValidationError("sensor and reflector coincide", path, lineno)
        beams.append(BeamMeasurement(v[0], v[1:4], v[4:7], v[7]))
    return beams


def write_measurements(beams, path, epoch=None):
    _write_table(path, MEASUREMENTS_HEADER,
                 ((b.t, *b.sensor, *b.reflector, b.value) for b in beams), epoch)


def read_wind(path) -> WindSeries:
    """Parse a wind log, sorting by time; duplicate timestamps are rejected."""
    rows = _read_table(path, WIND_HEADER)
    if not rows:
        raise ValidationError("wind file has no samples", path)
    seen = {}
    for lineno, v in rows:
        if v[0] in seen:
            raise ValidationError(f"duplicate timestamp {v[0]} (first on line {seen[v[0]]})", path, lineno)
        seen[v[0]] = lineno
    rows.sort(key=lambda r: r[1][0])
    arr = np.array([v for _, v in rows])
    return WindSeries(arr[:, 0], arr[:, 1:3])


def write_wind(series: WindSeries, path, epoch=None):
    _write_table(path, WIND_HEADER, ((t, *w) for t, w in zip(series.t, series.w)), epoch)


def read_insitu(path) -> list[InSituDetection]:
    lo, hi = INSITU_RANGE_PPM
    out = []
    for lineno, v in _read_table(path, INSITU_HEADER):
        if not lo <= v[4] <= hi:
            raise ValidationError(f"CO2 {v[4]} ppm outside sensor range [{lo}, {hi}]", path, lineno)
        out.append(InSituDetection(*v))
    return out


def write_insitu(detections, path, epoch=None):
    _write_table(path, INSITU_HEADER, ((d.t, d.x, d.y, d.z, d.concentration) for d in detections), epoch)


def write_map(field: ConcentrationField, path):
    g = field.grid
    meta = (fmt(g.origin_x), fmt(g.origin_y), fmt(g.cell_size), str(g.nx), str(g.ny),
            fmt(g.plane_height), "ppm")
    lines = [f"# {k}={v}" for k, v in zip(MAP_KEYS, meta)]
    img = field.as_image()
    lines.extend(",".join(fmt(v) for v in row) for row in img)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_map(path) -> ConcentrationField:
    lines = _read_lines(path)
    if len(lines) < len(MAP_KEYS):
        raise ParseError(f"expected {len(MAP_KEYS)} header lines", path, len(lines) + 1)
    meta = {}
    for lineno, (line, key) in enumerate(zip(lines, MAP_KEYS), start=1):
        prefix = f"# {key}="
        if not line.startswith(prefix):
            raise ParseError(f"expected '{prefix}...'", path, lineno)
        meta[key] = line[len(prefix):]
    if meta["units"] != "ppm":
        raise ParseError(f"unsupported units {meta['units']!r}", path, 7)
    try:
        nx, ny = int(meta["nx"]), int(meta["ny"])
    except ValueError:
        raise ParseError("nx and ny must be integers", path, 4) from None
    nums = [_parse_float(meta[k], path, i + 1, k) for i, k in enumerate(MAP_KEYS) if k not in ("nx", "ny", "units")]
    try:
        grid = GridSpec(nums[0], nums[1], nums[2], nx, ny, nums[3])
    except ValueError as exc:
        raise ParseError(str(exc), path, 3) from None

    values = []
    for lineno, line in enumerate(lines[len(MAP_KEYS):], start=len(MAP_KEYS) + 1):
        fields = line.split(",")
        if len(fields) != nx:
            raise ParseError(f"expected {nx} values, found {len(fields)}", path, lineno)
        values.extend(_parse_float(f, path, lineno, "value") for f in fields)
    if len(values) != nx * ny:
        raise ParseError(f"header declares {nx}x{ny}={nx * ny} values, file has {len(values)}",
                         path, len(lines) + 1)
    return ConcentrationField(grid, np.array(values))


def write_pgm(field: ConcentrationField, path, vmin: float, vmax: float):
    """16-bit binary PGM, linear from ``vmin`` (black) to ``vmax`` (white); north at the top."""
    if not vmax > vmin:
        raise ValueError(f"vmax ({vmax}) must exceed vmin ({vmin})")
    img = field.as_image()[::-1]
    scaled = np.rint(np.clip((img - vmin) / (vmax - vmin), 0.0, 1.0) * 65535).astype(">u2")
    header = f"P5\n{field.grid.nx} {field.grid.ny}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + scaled.tobytes())


def read_pgm(path) -> np.ndarray:
    """Pixel array (row 0 = north) of a PGM written by :func:`write_pgm`."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5" or parts[2] != b"65535":
        raise ParseError("not a 16-bit P5 file", path, 1)
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2", count=w * h).reshape(h, w).astype(np.int64)


def read_scene(path, wind_span=DEFAULT_WIND_SPAN_S) -> Scene:
    """Parse a ``key=value`` scene file.

    Keys: ``background``, ``seed``, repeated ``source=sx,sy,amplitude,sigma,lag``,
    and either ``wind=wx,wy`` (constant wind, sampled at 1 Hz over
    ``wind_span``) or ``wind_file=<wind.csv path relative to the scene>``.
    """
    path = Path(path)
    background, seed, sources, wind = 420.0, 0, [], None
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected key=value", path, lineno)
        if key == "background":
            background = _parse_float(value, path, lineno, key)
        elif key == "seed":
            if not re.fullmatch(r"[+-]?\d+", value):
                raise ParseError(f"seed must be an integer: {value!r}", path, lineno)
            seed = int(value)
        elif key == "source":
            parts = value.split(",")
            if len(parts) != 5:
                raise ParseError("source needs sx,sy,amplitude,sigma,lag", path, lineno)
            try:
                sources.append(GasSource(*(_parse_float(p, path, lineno, key) for p in parts)))
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ValidationError(str(exc), path, lineno) from None
        elif key == "wind":
            parts = value.split(",")
            if len(parts) != 2:
                raise ParseError("wind needs wx,wy", path, lineno)
            w = [_parse_float(p, path, lineno, key) for p in parts]
            wind = WindSeries.constant(w, wind_span[0], wind_span[1], 1.0)
        elif key == "wind_file":
            wind = read_wind(path.parent / value)
        else:
            raise ParseError(f"unknown key {key!r}", path, lineno)
    try:
        return Scene(tuple(sources), background, wind, seed)
    except ValueError as exc:
        raise ValidationError(str(exc), path) from None


def write_scene(scene: Scene, path):
    """Write a scene; a time-varying wind goes to ``<stem>.wind.csv`` beside it."""
    path = Path(path)
    lines = [f"background={fmt(scene.background)}", f"seed={scene.seed}"]
    for s in scene.sources:
        lines.append("source=" + ",".join(fmt(v) for v in (s.sx, s.sy, s.amplitude, s.sigma, s.transport_lag)))
    if scene.wind is not None:
        w = scene.wind.w
        if np.all(w == w[0]):
            lines.append(f"wind={fmt(w[0, 0])},{fmt(w[0, 1])}")
        else:
            wind_path = path.with_name(path.stem + ".wind.csv")
            write_wind(scene.wind, wind_path)
            lines.append(f"wind_file={wind_path.name}")
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_report(metrics: dict, txt_path=None, csv_path=None) -> str:
    """Flat ``key: value`` text (returned, optionally written) plus a ``key,value`` CSV."""
    def show(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return fmt(v)
        return str(v)

    text = "".join(f"{k}: {show(v)}\n" for k, v in metrics.items())
    if txt_path is not None:
        Path(txt_path).write_bytes(text.encode("utf-8"))
    if csv_path is not None:
        body = "key,value\n" + "".join(f"{k},{show(v)}\n" for k, v in metrics.items())
        Path(csv_path).write_bytes(body.encode("utf-8"))
    return text
