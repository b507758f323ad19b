"""Command-line interface: ``pme-inverse {forward,invert,curve,table,profile}``.

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage error.
Every command that writes a file also writes ``<file>.manifest`` with the full
resolved parameter set; ``pme-inverse $(manifest argv)`` reproduces the run.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as pio
from .fem import NORMS, PoissonSolver, SolverError, assemble_lumped_mass
from .forward import ForwardConfig, ForwardError, solve_forward
from .inversion import EndpointMinimumError, InversionConfig, recover_gamma, sample_curve
from .mesh import build_unit_square_mesh
from .profile import ProfileNotConverged, solve_profile

NUMERIC_ERRORS = (SolverError, ForwardError, ProfileNotConverged, EndpointMinimumError, FloatingPointError)


class UsageError(Exception):
    pass


def _float_list(text: str) -> list:
    try:
        items = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    return items


def _add_inversion_flags(p):
    p.add_argument("--gamma-max", type=float, default=20.0, help="upper end gamma_c of the search (default 20)")
    p.add_argument("--alpha-min", type=float, default=1.001)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--refine-tol", type=float, default=1e-4)
    p.add_argument("--norm", choices=NORMS, default="l1")
    p.add_argument("--no-clamp", action="store_true", help="reject negative measurements instead of clamping")


def _inversion_config(args) -> InversionConfig:
    try:
        return InversionConfig(
            alpha_min=args.alpha_min,
            gamma_c=args.gamma_max,
            grid_step=args.grid_step,
            refine_tol=args.refine_tol,
            norm=args.norm,
            clamp_negative_measurements=not args.no_clamp,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def _inversion_params(args) -> dict:
    return {
        "gamma_max": float(args.gamma_max),
        "alpha_min": float(args.alpha_min),
        "grid_step": float(args.grid_step),
        "refine_tol": float(args.refine_tol),
        "norm": args.norm,
        "no_clamp": bool(args.no_clamp),
    }


def _forward_config(gamma, T, n, dt, u0) -> ForwardConfig:
    try:
        return ForwardConfig(gamma=gamma, n=n, T=T, dt=dt, u0_spec=u0)
    except ValueError as exc:
        raise UsageError(str(exc))


def _load_measurement(args):
    try:
        field, header = pio.read_field_with_header(args.input)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read field file {args.input}: {exc}")
    T = args.T if args.T is not None else header.get("T")
    if T is None:
        raise UsageError("--T is required (the field file does not record T)")
    return field, float(T)


def cmd_forward(args) -> int:
    t0 = time.perf_counter()
    config = _forward_config(args.gamma, args.T, args.N, args.dt, args.u0)
    try:
        mesh = build_unit_square_mesh(config.n)
        from .forward import initial_field

        u0 = initial_field(mesh, config.u0_spec, config.gamma)
    except ValueError as exc:
        raise UsageError(str(exc))
    result = solve_forward(config, mesh=mesh, u0=u0)
    pio.write_field(args.out, result.u_T, gamma=config.gamma, T=config.T, dt=config.dt, u0=config.u0_spec)
    pio.write_manifest(
        args.out, "forward",
        {"gamma": config.gamma, "T": config.T, "N": config.n, "dt": config.dt, "u0": config.u0_spec},
        {}, {"out": args.out}, time.perf_counter() - t0,
        {"step_count": result.step_count, "max_u_T": float(result.u_T.values.max())},
    )
    print(f"steps: {result.step_count}")
    print(f"max u_T: {pio.fmt(result.u_T.values.max())}")
    return 0


def cmd_invert(args) -> int:
    t0 = time.perf_counter()
    u_T, T = _load_measurement(args)
    config = _inversion_config(args)
    try:
        report = recover_gamma(u_T, T, config)
    except EndpointMinimumError as exc:
        print(f"error: {exc}; increase --gamma-max", file=sys.stderr)
        return 1
    except ValueError as exc:
        raise UsageError(str(exc))
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    lo, hi = report.bracket
    items = {
        "gamma_m": report.gamma_m,
        "objective_at_min": report.objective_at_min,
        "norm": report.norm_used,
        "T": report.T,
        "N": u_T.mesh.n,
        "alpha_min": config.alpha_min,
        "gamma_c": config.gamma_c,
        "grid_step": config.grid_step,
        "refine_tol": config.refine_tol,
        "clamp_negative_measurements": config.clamp_negative_measurements,
        "bracket_lo": float(lo),
        "bracket_hi": float(hi),
        "coarse_samples": len(report.curve),
        "refinement_probes": len(report.probes),
        "w_norm": float(np.dot(assemble_lumped_mass(u_T.mesh), np.abs(report.w_field.values))),
        "warnings": "; ".join(report.warnings) or "none",
    }
    pio.write_keyvalue(args.out, items)
    outputs = {"out": args.out}
    if args.curve_out:
        pio.write_curve(args.curve_out, report.curve)
        outputs["curve_out"] = args.curve_out
    params = {"T": T, **_inversion_params(args)}
    pio.write_manifest(args.out, "invert", params, {"in": args.input}, outputs,
                       time.perf_counter() - t0, {"gamma_m": report.gamma_m})
    print(f"gamma_m: {pio.fmt(report.gamma_m)}")
    return 0


def cmd_curve(args) -> int:
    t0 = time.perf_counter()
    u_T, T = _load_measurement(args)
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    if not 1.0 < args.alpha_min <= args.alpha_max:
        raise UsageError("need 1 < --alpha-min <= --alpha-max")
    u_T = u_T.with_values(np.maximum(u_T.values, 0.0))
    solver = PoissonSolver(u_T.mesh)
    w = solver.solve(u_T)
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.samples) if args.samples > 1 else [args.alpha_min]
    curve = sample_curve(u_T, w, T, alphas, solver.mass, args.norm)
    pio.write_curve(args.out, curve)
    params = {"T": T, "alpha_min": float(args.alpha_min), "alpha_max": float(args.alpha_max),
              "samples": args.samples, "norm": args.norm}
    pio.write_manifest(args.out, "curve", params, {"in": args.input}, {"out": args.out},
                       time.perf_counter() - t0)
    best = min(curve, key=lambda p: p[1])
    print(f"samples: {len(curve)}  sampled minimum at alpha = {pio.fmt(best[0])}")
    return 0


def table_row(gamma, times, n, dt, u0, inv_config) -> list:
    """gamma_m for one gamma at every requested time; failed cells hold the error text."""
    config = ForwardConfig(gamma=gamma, n=n, T=max(times), dt=dt, u0_spec=u0, snapshot_times=tuple(times))
    result = solve_forward(config)
    solver = PoissonSolver(result.u_T.mesh)
    row = []
    for T in times:
        snap = result.snapshots[float(T)]
        try:
            row.append(recover_gamma(snap, T, inv_config, solver=solver).gamma_m)
        except NUMERIC_ERRORS as exc:
            row.append(str(exc))
    return row


def _safe_row(job):
    try:
        return table_row(*job)
    except NUMERIC_ERRORS as exc:
        return [str(exc)] * len(job[1])


def cmd_table(args) -> int:
    t0 = time.perf_counter()
    if not args.gammas or not args.times:
        raise UsageError("--gammas and --times must be non-empty")
    dt = args.dt if args.dt is not None else 1.0 / args.N
    for g in args.gammas:
        for T in args.times:
            _forward_config(g, T, args.N, dt, args.u0)
    inv = _inversion_config(args)
    jobs = [(g, sorted(args.times), args.N, dt, args.u0, inv) for g in args.gammas]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_safe_row, jobs))
    else:
        rows = [_safe_row(job) for job in jobs]
    order = sorted(args.times)
    cols = [order.index(T) for T in args.times]

    header = "gamma," + ",".join(f"T={T:g}" for T in args.times)
    lines = ["# gamma_m", header]
    err_lines = ["# abs_error", header]
    failed = False
    for g, row in zip(args.gammas, rows):
        cells, errs = [], []
        for c in cols:
            val = row[c]
            if isinstance(val, str):
                failed = True
                print(f"error: gamma={g:g} T={order[c]:g}: {val}", file=sys.stderr)
                cells.append("ERR")
                errs.append("ERR")
            else:
                cells.append(pio.fmt(val))
                errs.append(pio.fmt(abs(val - g)))
        lines.append(f"{g:g}," + ",".join(cells))
        err_lines.append(f"{g:g}," + ",".join(errs))
    text = "\n".join(lines + [""] + err_lines) + "\n"
    print(text, end="")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        params = {"gammas": [float(g) for g in args.gammas], "times": [float(t) for t in args.times],
                  "N": args.N, "dt": dt, "u0": args.u0, **_inversion_params(args)}
        pio.write_manifest(args.out, "table", params, {}, {"out": args.out}, time.perf_counter() - t0)
    return 1 if failed else 0


def cmd_profile(args) -> int:
    t0 = time.perf_counter()
    if not args.gamma > 1.0:
        raise UsageError(f"--gamma must exceed 1, got {args.gamma}")
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    mesh = build_unit_square_mesh(args.N)
    prof = solve_profile(mesh, args.gamma, tol=args.tol, max_iter=args.max_iter)
    pio.write_field(args.out, prof.f, gamma=float(args.gamma))
    pio.write_manifest(
        args.out, "profile",
        {"gamma": float(args.gamma), "N": args.N, "tol": float(args.tol), "max_iter": args.max_iter},
        {}, {"out": args.out}, time.perf_counter() - t0,
        {"iterations": prof.iterations, "relative_defect": prof.residual, "last_change": prof.change},
    )
    center = prof.f.values[mesh.node_index(args.N // 2, args.N // 2)] if args.N % 2 == 0 else math.nan
    print(f"iterations: {prof.iterations}  defect: {prof.residual:.3e}  f(0.5,0.5): {pio.fmt(center)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pme-inverse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="solve the porous medium equation up to time T")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--dt", type=float, default=None, help="time step (default 1/N)")
    p.add_argument("--u0", default="poly_bump(10)", help='e.g. "poly_bump(10)", "scaled_profile(1)", "file:u0.csv"')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", help="recover gamma from a late-time field")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--T", type=float, default=None, help="measurement time (default: read from the field header)")
    _add_inversion_flags(p)
    p.add_argument("--out", required=True, help="report path")
    p.add_argument("--curve-out", default=None, help="optional coarse-scan curve (CSV)")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("curve", help="sample |F(alpha)| on a uniform alpha grid")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--alpha-min", type=float, default=1.001)
    p.add_argument("--alpha-max", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--norm", choices=NORMS, default="linf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("table", help="gamma_m for every (gamma, T) pair")
    p.add_argument("--gammas", type=_float_list, required=True)
    p.add_argument("--times", type=_float_list, required=True)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--u0", default="poly_bump(10)")
    _add_inversion_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("profile", help="stationary profile f for a given gamma")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "N", 1) is not None and getattr(args, "N", 1) < 1:
        parser.error("--N must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
