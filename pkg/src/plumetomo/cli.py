"""``plumetomo`` command line: simulate, reconstruct, evaluate, sweep-dt.

Exit status: 0 success, 2 bad input or arguments, 3 no beam crosses the
grid, 4 not enough data for the requested metric.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .evaluation import detection_agreement, localization_error, sweep_dt
from .exceptions import EmptySystemError, InsufficientDataError, PlumeTomoError
from .forward import NoiseModel, perimeter_plan, simulate_measurements
from .grid import GridSpec
from .plume import field_at
from .solver import SolverConfig, assemble, residuals, solve
from .wind import DEFAULT_DT_S, CompensationConfig, WindSeries

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_INSUFFICIENT = 0, 2, 3, 4
DEFAULT_GRID = "-8,-8,1,16,16,1.5"


class ArgumentError(PlumeTomoError):
    pass


GRID_FLAGS = (("origin_x_m", "origin_x"), ("origin_y_m", "origin_y"), ("cell_size_m", "cell_size"),
              ("nx", "nx"), ("ny", "ny"), ("plane_height_m", "plane_height"))


def parse_grid(text: str) -> GridSpec:
    parts = text.split(",")
    if len(parts) != 6:
        raise ArgumentError(f"--grid needs origin_x,origin_y,cell_size,nx,ny,plane_h; got {text!r}")
    try:
        ox, oy, cs, ph = (float(parts[k]) for k in (0, 1, 2, 5))
        nx, ny = int(parts[3]), int(parts[4])
    except ValueError:
        raise ArgumentError(f"--grid: cannot parse {text!r}") from None
    return GridSpec(ox, oy, cs, nx, ny, ph)


def parse_candidates(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ArgumentError(f"--candidates range must be start:stop:step, got {text!r}")
        try:
            start, stop, step = map(float, parts)
        except ValueError:
            raise ArgumentError(f"--candidates: cannot parse {text!r}") from None
        if step <= 0 or stop < start:
            raise ArgumentError(f"--candidates: empty range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentError(f"--candidates: cannot parse {text!r}") from None


def _parse_area(text: str):
    try:
        xmin, xmax, ymin, ymax = (float(v) for v in text.split(","))
    except ValueError:
        raise ArgumentError(f"--area needs xmin,xmax,ymin,ymax; got {text!r}") from None
    if not (xmax > xmin and ymax > ymin):
        raise ArgumentError(f"--area is empty: {text!r}")
    return xmin, xmax, ymin, ymax


def _grid(args) -> GridSpec:
    grid = parse_grid(args.grid)
    overrides = {field: getattr(args, flag) for flag, field in GRID_FLAGS if getattr(args, flag) is not None}
    return replace(grid, **overrides) if overrides else grid


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(args.lambda_smooth, args.max_iters, args.tol, not args.no_nonneg)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    grid = _grid(args)
    area = grid.bounds if args.area is None else _parse_area(args.area)
    plan = perimeter_plan(area, args.stations, args.dwell_s, args.rate_hz, grid.plane_height)
    if args.gap_s:
        plan = replace(plan, gap_s=args.gap_s)
    scene_probe = io.read_scene(args.scene)
    max_lag = max((s.transport_lag for s in scene_probe.sources), default=0.0)
    span = (plan.t0 - max_lag - 10.0, plan.t0 + plan.duration + 10.0)
    scene = io.read_scene(args.scene, wind_span=span)
    if scene.wind is None:
        scene = scene.with_wind(WindSeries.constant((0.0, 0.0), *span))

    beams = simulate_measurements(scene, plan, NoiseModel(args.noise_sigma_ppm_m), args.seed)
    out = _out_dir(args)
    io.write_measurements(beams, out / "measurements.csv")
    io.write_wind(scene.wind, out / "wind.csv")
    truth = field_at(scene, grid, plan.t0 + plan.duration / 2)
    io.write_map(truth, out / "truth_map.csv")
    print(f"wrote {len(beams)} measurements to {out / 'measurements.csv'}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    grid = _grid(args)
    beams = io.read_measurements(args.measurements)
    wind = io.read_wind(args.wind) if args.wind else None
    dt = args.dt_s if args.dt_s is not None else DEFAULT_DT_S
    compensate = wind is not None and dt > 0
    system = assemble(grid, beams, wind if compensate else None,
                      CompensationConfig(dt) if compensate else None)
    field, report = solve(system, _solver_cfg(args))
    _, rms = residuals(system, field)

    out = _out_dir(args)
    io.write_map(field, out / "map.csv")
    lo, hi = float(field.values.min()), float(field.values.max())
    io.write_pgm(field, out / "map.pgm", lo, hi if hi > lo else lo + 1.0)
    metrics = {
        "compensation": "on" if compensate else "off",
        "dt_s": dt if compensate else 0.0,
        "converged": report.converged,
        "iterations": report.iterations,
        "objective": report.objective,
        "relative_residual": report.relative_residual,
        "rms_residual_ppm_m": rms,
        "n_beams": len(beams),
        "n_beams_used": len(system),
        "dropped_beams": system.n_dropped,
        "unobserved_cells": report.n_unobserved,
        "lambda_effective": report.lambda_effective,
        "map_min_ppm": lo,
        "map_max_ppm": hi,
    }
    sys.stdout.write(io.write_report(metrics, out / "report.txt", out / "report.csv"))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    field = io.read_map(args.map)
    detections = io.read_insitu(args.insitu)
    kwargs = {}
    if args.compensate_detections:
        if not args.wind:
            raise ArgumentError("--compensate-detections needs --wind")
        kwargs = {"wind": io.read_wind(args.wind),
                  "delta_t": args.dt_s if args.dt_s is not None else DEFAULT_DT_S}
    agreement = detection_agreement(field, detections, args.pctl, **kwargs)
    metrics = agreement.as_dict()
    if args.scene:
        scene = io.read_scene(args.scene)
        if scene.sources:
            metrics["localization_error_m"] = localization_error(field, [s.location for s in scene.sources])
    out = _out_dir(args) if args.out else None
    sys.stdout.write(io.write_report(metrics, out / "evaluation.txt" if out else None,
                                     out / "evaluation.csv" if out else None))
    return EXIT_OK


def cmd_sweep_dt(args) -> int:
    if args.k_folds < 2:
        raise ArgumentError(f"--k-folds must be >= 2, got {args.k_folds}")
    grid = _grid(args)
    candidates = parse_candidates(args.candidates)
    beams = io.read_measurements(args.measurements)
    wind = io.read_wind(args.wind)
    result = sweep_dt(beams, wind, grid, _solver_cfg(args), candidates, args.k_folds)
    out = _out_dir(args)
    lines = ["dt_s,cv_rms_ppm_m"] + [f"{io.fmt(d)},{io.fmt(r)}" for d, r in zip(result.candidates, result.cv_rms)]
    (out / "sweep.csv").write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"best_dt_s={io.fmt(result.best_dt)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plumetomo", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of default flag values (flags override)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def grid_flags(p):
        p.add_argument("--grid", default=DEFAULT_GRID, help="origin_x,origin_y,cell_size,nx,ny,plane_h (m)")
        p.add_argument("--origin-x-m", type=float)
        p.add_argument("--origin-y-m", type=float)
        p.add_argument("--cell-size-m", type=float)
        p.add_argument("--nx", type=int)
        p.add_argument("--ny", type=int)
        p.add_argument("--plane-height-m", type=float)

    def solver_flags(p):
        p.add_argument("--lambda-smooth", type=float, default=1.0)
        p.add_argument("--max-iters", type=int, default=2000)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--no-nonneg", action="store_true", help="allow negative concentrations")

    p = sub.add_parser("simulate", help="synthesise measurements, wind log and truth map from a scene")
    p.add_argument("--scene", required=True)
    grid_flags(p)
    p.add_argument("--area", help="xmin,xmax,ymin,ymax (m) walked by the stations; default: grid extent")
    p.add_argument("--stations", type=int, default=5)
    p.add_argument("--dwell-s", type=float, default=20.0)
    p.add_argument("--rate-hz", type=float, default=5.0)
    p.add_argument("--gap-s", type=float, default=0.0)
    p.add_argument("--noise-sigma-ppm-m", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a concentration map")
    p.add_argument("--measurements", required=True)
    p.add_argument("--wind")
    grid_flags(p)
    p.add_argument("--dt-s", type=float, default=None, help=f"transport lag (default {DEFAULT_DT_S} with --wind)")
    solver_flags(p)
    p.add_argument("--seed", type=int, default=0, help="accepted for interface symmetry; reconstruction is deterministic")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="compare a map with in-situ detections")
    p.add_argument("--map", required=True)
    p.add_argument("--insitu", required=True)
    p.add_argument("--scene")
    p.add_argument("--pctl", type=float, default=75.0)
    p.add_argument("--wind")
    p.add_argument("--dt-s", type=float, default=None)
    p.add_argument("--compensate-detections", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-dt", help="cross-validated transport-lag sweep")
    p.add_argument("--measurements", required=True)
    p.add_argument("--wind", required=True)
    grid_flags(p)
    p.add_argument("--candidates", default="0:6:0.5")
    p.add_argument("--k-folds", type=int, default=5)
    solver_flags(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep_dt)
    return parser


def _apply_config(parser, argv):
    pre, _ = parser.parse_known_args(argv)
    if not pre.config:
        return parser.parse_args(argv)
    try:
        config = json.loads(Path(pre.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ArgumentError(f"--config: {exc}") from None
    if not isinstance(config, dict):
        raise ArgumentError("--config must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in config.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in {a.dest for a in sp._actions}})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except EmptySystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
