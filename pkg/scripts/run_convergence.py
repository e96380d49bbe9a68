#!/usr/bin/env python3
"""Convergence study driver with CSV/JSON output.

Examples:

    python scripts/run_convergence.py --levels 2,4,8 --r 2 --k 1 --out t2.csv
    python scripts/run_convergence.py --problem interpolation --levels 4,8 --r 1 --k 1
"""

import argparse
import sys

from tetcomplex.problems import interpolation_study, run_convergence


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--problem", default="quadcurl", choices=["quadcurl", "interpolation"])
    parser.add_argument("--levels", required=True)
    parser.add_argument("--r", type=int, required=True)
    parser.add_argument("--k", type=int, required=True)
    parser.add_argument("--quad-degree", type=int, default=None)
    parser.add_argument("--solver", default="direct")
    parser.add_argument("--out", help="CSV path")
    parser.add_argument("--json", dest="json_out", help="JSON path")
    args = parser.parse_args()

    levels = [int(t) for t in args.levels.split(",") if t]
    if args.problem == "interpolation":
        report = interpolation_study(levels, args.r, args.k, quad_degree=args.quad_degree)
    else:
        report = run_convergence(
            "quadcurl", levels, args.r, args.k,
            solver=args.solver, quad_degree=args.quad_degree,
        )
    if args.out:
        report.to_csv(args.out)
    payload = report.to_json(args.json_out)
    for row in payload["rows"]:
        rate = row.get("gradcurl_rate")
        print(
            f"N={row['N']:>3}  l2={row['l2']:.4e}  hcurl={row['hcurl']:.4e}  "
            f"gradcurl={row['gradcurl']:.4e}"
            + (f"  gradcurl_rate={rate:.3f}" if rate is not None else "")
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
