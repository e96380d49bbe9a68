"""Command-line interface: mesh/element info, verification, solving, studies.

Exit codes: 0 success, 1 verification failure, 2 solver failure, 3 invalid
configuration.  A key=value config file may supply defaults; explicit flags
win.  The environment variable TETCOMPLEX_LOG sets the log level (errors
and progress go to standard error; results go to stdout or files).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

log = logging.getLogger("tetcomplex")

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3


def _setup_logging():
    level = os.environ.get("TETCOMPLEX_LOG", "warning").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _apply_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _load_config_file(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _merge_config(args, parser_defaults):
    if not getattr(args, "config", None):
        return args
    file_values = _load_config_file(args.config)
    for key, raw in file_values.items():
        if not hasattr(args, key):
            continue
        current = getattr(args, key)
        default = parser_defaults.get(key)
        if current == default:  # flag not set explicitly: config wins
            cast = type(default) if default is not None else str
            if cast is bool:
                setattr(args, key, raw.lower() in ("1", "true", "yes"))
            elif cast in (int, float):
                setattr(args, key, cast(raw))
            else:
                setattr(args, key, raw)
    return args


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tetcomplex",
        description="Grad-curl conforming tetrahedral elements and discrete Stokes complexes",
    )
    parser.add_argument("--config", help="key=value config file (flags win)")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread budget (results are order-independent)")
    sub = parser.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = mesh.add_subparsers(dest="subcommand", required=True)
    mesh_info = mesh_sub.add_parser("info", help="entity counts and Euler check")
    mesh_info.add_argument("--N", type=int, required=True)
    mesh_info.add_argument("--out", help="optional path for the mesh text export")

    element = sub.add_parser("element", help="element utilities")
    el_sub = element.add_subparsers(dest="subcommand", required=True)
    el_info = el_sub.add_parser("info", help="dimensions, DOF counts, exactness ranks")
    el_info.add_argument("--r", type=int, required=True)
    el_info.add_argument("--k", type=int, required=True)

    verify = sub.add_parser("verify", help="run structural verification claims")
    verify.add_argument(
        "group",
        choices=["all", "bubbles", "exactness", "unisolvence", "commuting", "rates"],
    )
    verify.add_argument("--r", type=int, default=None)
    verify.add_argument("--k", type=int, default=None)
    verify.add_argument("--N", type=int, default=None)
    verify.add_argument("--out", help="JSON report path")

    solve = sub.add_parser("solve", help="solve a model problem at one level")
    solve.add_argument("problem", choices=["quadcurl", "stokes"])
    solve.add_argument("--N", type=int, required=True)
    solve.add_argument("--r", type=int, default=None)
    solve.add_argument("--k", type=int, required=True)
    solve.add_argument("--tol", type=float, default=1e-10)
    solve.add_argument("--quad-degree", type=int, default=None)
    solve.add_argument("--solver", default="direct", choices=["direct", "cg", "cg-diagonal"])
    solve.add_argument("--out", help="CSV output path")

    conv = sub.add_parser("convergence", help="multi-level convergence study")
    conv.add_argument("--problem", default="quadcurl", choices=["quadcurl", "interpolation"])
    conv.add_argument("--levels", required=True, help="comma-separated mesh levels, e.g. 2,4,8")
    conv.add_argument("--r", type=int, required=True)
    conv.add_argument("--k", type=int, required=True)
    conv.add_argument("--tol", type=float, default=1e-10)
    conv.add_argument("--quad-degree", type=int, default=None)
    conv.add_argument("--solver", default="direct", choices=["direct", "cg", "cg-diagonal"])
    conv.add_argument("--out", help="CSV output path")
    conv.add_argument("--json", dest="json_out", help="JSON output path")
    return parser


def cmd_mesh_info(args):
    from .mesh import build_structured_cube

    if args.N < 1:
        raise ValueError("mesh level must be >= 1")
    mesh = build_structured_cube(args.N)
    info = mesh.info()
    info["N"] = args.N
    if args.out:
        mesh.export_text(args.out)
        info["exported"] = args.out
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_element_info(args):
    from .elements import element_info

    info = element_info(args.r, args.k)
    print(json.dumps(info, indent=2, default=str))
    return EXIT_OK


def cmd_verify(args):
    from .verify import DEFAULT_CONFIGS, verify_all

    groups = None if args.group == "all" else [args.group]
    configs = DEFAULT_CONFIGS
    if args.r is not None and args.k is not None:
        configs = ((args.r, args.k),)
    levels = (args.N,) if args.N is not None else None
    report = verify_all(groups, configs, levels=levels)
    if args.out:
        report.to_json(args.out)
    print(report.table())
    return EXIT_OK if report.ok else EXIT_VERIFICATION


def cmd_solve(args):
    from .problems import QuadCurlProblem, StokesProblem, solve_quadcurl, solve_stokes

    if args.problem == "quadcurl":
        r = args.r if args.r is not None else args.k
        problem = QuadCurlProblem(
            n=args.N, r=r, k=args.k, tol=args.tol,
            quad_degree=args.quad_degree, solver=args.solver,
        )
        _, row = solve_quadcurl(problem)
        columns = ["N", "dofs", "l2", "hcurl", "gradcurl", "residual", "seconds"]
    else:
        problem = StokesProblem(n=args.N, k=args.k, quad_degree=args.quad_degree)
        _, _, row = solve_stokes(problem)
        columns = ["N", "dofs", "velocity_l2", "pressure_l2", "div_norm", "seconds"]
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(",".join(columns) + "\n")
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    print(json.dumps({c: row[c] for c in columns}, indent=2))
    return EXIT_OK


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6e}"
    return str(v)


def cmd_convergence(args):
    from .problems import interpolation_study, run_convergence

    levels = [int(t) for t in args.levels.split(",") if t]
    if not levels or any(n < 1 for n in levels):
        raise ValueError("levels must be positive integers")
    if args.problem == "interpolation":
        report = interpolation_study(levels, args.r, args.k, quad_degree=args.quad_degree)
    else:
        report = run_convergence(
            "quadcurl", levels, args.r, args.k,
            tol=args.tol, solver=args.solver, quad_degree=args.quad_degree,
        )
    if args.out:
        report.to_csv(args.out)
    payload = report.to_json(args.json_out)
    if not args.out and not args.json_out:
        print(json.dumps(payload, indent=2))
    else:
        for row in report.rows:
            log.info("N=%s l2=%.3e", row.get("N"), row.get("l2"))
    return EXIT_OK


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    defaults = {a.dest: a.default for a in parser._actions}
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    _apply_threads(args.threads)
    try:
        args = _merge_config(args, defaults)
        if args.command == "mesh":
            return cmd_mesh_info(args)
        if args.command == "element":
            return cmd_element_info(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "convergence":
            return cmd_convergence(args)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # solver and verification failures
        from .problems import ConfigError, SolverFailure

        if isinstance(exc, ConfigError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(exc, SolverFailure):
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        raise


if __name__ == "__main__":
    sys.exit(main())
