"""Command-line frontend: modal, frf, plan and deform subcommands.

Exit codes: 0 success, 2 config error, 3 computation error, 64 usage
error. All outputs are deterministic for fixed inputs; the only RNG use
is the deform --noise-sigma option, which requires --seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import compensation, config as config_mod, modal, pathplan
from .errors import ConfigError, TwinmillError
from .stiffness import Wrench

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_USAGE = 64

CONFIG_ENV_VAR = "TWINMILL_CONFIG"


class _UsageError(Exception):
    pass


def _load_config(path_arg):
    path = path_arg or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        raise _UsageError(f"no config given (use --config or ${CONFIG_ENV_VAR})")
    return config_mod.load_config(path)


def _parse_tensions(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise _UsageError(f"bad tension list {text!r}: {exc}") from exc
    if not values:
        raise _UsageError("tension list is empty")
    return values


def _tension_wrench(magnitude, axis):
    force = np.zeros(3)
    force["xyz".index(axis)] = magnitude
    return Wrench(force)


def cmd_modal(args):
    cfg = _load_config(args.config)
    tensions = _parse_tensions(args.tensions)
    model = cfg.modal_models[args.axis]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmax = model.f0 + abs(model.sensitivity) * max(tensions) + 200.0
    grid = np.arange(1.0, fmax, args.df)
    points = []
    for T in tensions:
        frf = modal.frf_synthesize(model, T, grid)
        (out / f"frf_{args.axis}_{T:g}N.csv").write_text(modal.frf_to_csv(frf))
        peaks = modal.peak_pick(frf, grid[0], grid[-1], prominence_factor=3.0)
        if not peaks:
            raise TwinmillError(f"no compliance peak found at tension {T:g} N")
        points.append((T, peaks[0][0]))
    fit = modal.fit_shift(points, scope="global")
    (out / f"shift_fit_{args.axis}.csv").write_text(modal.shift_fit_to_csv(points, fit))
    print(f"wrote {len(tensions)} FRF file(s) and shift fit to {out}")
    print(f"slope={fit.slope:.6g} Hz/N intercept={fit.intercept:.6g} Hz")
    return EXIT_OK


def cmd_frf(args):
    records = [modal.impact_record_from_csv(Path(p).read_text()) for p in args.impacts]
    frf = modal.h1_estimate(records, nfft=args.nfft)
    Path(args.out).write_text(modal.frf_to_csv(frf))
    print(f"wrote H1 FRF ({frf.frequencies.size} bins) to {args.out}")
    return EXIT_OK


def _read_path(path_file, work_offset_mm=None):
    text = Path(path_file).read_text()
    if path_file.endswith(".json"):
        path = pathplan.path_from_json(text)
    else:
        path = pathplan.parse_gcode(text)
    if work_offset_mm:
        try:
            offset = np.array([float(x) for x in work_offset_mm.split(",")], dtype=float)
        except ValueError as exc:
            raise _UsageError(f"bad work offset {work_offset_mm!r}: {exc}") from exc
        if offset.shape != (3,):
            raise _UsageError("work offset needs exactly three values")
        path = pathplan.translate_path(path, offset * 1e-3)
    return path


def cmd_plan(args):
    cfg = _load_config(args.config)
    path = _read_path(args.path_file, args.work_offset_mm)
    tension = _tension_wrench(args.tension, args.tension_axis)
    d = cfg.defaults
    program = pathplan.plan_sync(
        cfg.system,
        path,
        tension,
        (cfg.ik_seed1, cfg.ik_seed2),
        chord_tol=d["chord_tol_m"],
        max_step=d["max_step_m"],
        workspace_box=cfg.workspace_box,
        joint_jump_max=d["joint_jump_max_rad"],
        tol_pos=d["tol_pos_m"],
        tol_rot=d["tol_rot_rad"],
        max_iter=d["max_iter"],
    )
    Path(args.out).write_text(pathplan.program_to_csv(program))
    print(f"planned {len(program.pairs)} synchronized setpoints to {args.out}")
    return EXIT_OK


def cmd_deform(args):
    cfg = _load_config(args.config)
    program = pathplan.program_from_csv(Path(args.program).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reference = compensation.nominal_trace(program)
    measured = compensation.simulate_deformation(cfg.system, program)
    if args.noise_sigma > 0:
        if args.seed is None:
            raise _UsageError("--noise-sigma requires --seed for reproducibility")
        rng = np.random.default_rng(args.seed)
        measured = compensation.PathTrace(
            measured.points + rng.normal(0.0, args.noise_sigma, measured.points.shape),
            label=measured.label,
            tension=measured.tension,
            noise_sigma=args.noise_sigma,
        )
    (out / "reference.csv").write_text(compensation.trace_to_csv(reference))
    (out / "deformed.csv").write_text(compensation.trace_to_csv(measured))
    before = compensation.residual_report(reference, measured)
    (out / "residual_before.csv").write_text(compensation.report_to_csv(before))
    print(f"deformation RMS {before.rms * 1e3:.4f} mm (max {before.max_norm * 1e3:.4f} mm)")
    if args.compensate:
        transform = compensation.fit_rigid(reference, measured)
        comped = compensation.compensate(measured, transform)
        after = compensation.residual_report(reference, comped)
        (out / "compensated.csv").write_text(compensation.trace_to_csv(comped))
        (out / "residual_after.csv").write_text(compensation.report_to_csv(after))
        print(f"residual RMS after compensation {after.rms * 1e3:.4f} mm")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="twinmill",
        description="Dual-robot coupled milling: modal analysis, tensioned path planning "
        "and deformation compensation.",
    )
    parser.add_argument(
        "--config",
        help=f"system config JSON (falls back to ${CONFIG_ENV_VAR})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modal", help="synthesize FRFs over tensions and fit the frequency shift")
    p.add_argument("--tensions", required=True, help="comma-separated tension forces in N")
    p.add_argument("--axis", choices=modal.AXES, default="x")
    p.add_argument("--df", type=float, default=0.25, help="frequency grid step in Hz")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_modal, needs_config=True)

    p = sub.add_parser("frf", help="H1 FRF estimate from impact-test CSV files")
    p.add_argument("impacts", nargs="+", help="impact record CSV files")
    p.add_argument("--nfft", type=int, default=None)
    p.add_argument("--out", required=True, help="output FRF CSV file")
    p.set_defaults(func=cmd_frf, needs_config=False)

    p = sub.add_parser("plan", help="plan a synchronized dual-robot program for a toolpath")
    p.add_argument("path_file", help="G-code (.nc/.gcode) or native JSON path file")
    p.add_argument("--tension", type=float, default=0.0, help="tension force magnitude in N")
    p.add_argument("--tension-axis", choices=("x", "y", "z"), default="x")
    p.add_argument(
        "--work-offset-mm",
        default=None,
        help="x,y,z work offset in mm added to all path coordinates",
    )
    p.add_argument("--out", required=True, help="output program CSV file")
    p.set_defaults(func=cmd_plan, needs_config=True)

    p = sub.add_parser("deform", help="simulate tension deformation of a planned program")
    p.add_argument("program", help="SyncProgram CSV from 'plan'")
    p.add_argument("--compensate", action="store_true", help="also fit and remove a rigid transform")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="tracker noise sigma in m")
    p.add_argument("--seed", type=int, default=None, help="RNG seed for --noise-sigma")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_deform, needs_config=True)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap to the documented 64.
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TwinmillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
