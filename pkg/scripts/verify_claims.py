#!/usr/bin/env python3
"""Run the full structural verification and print the claim table.

Equivalent to `tetcomplex verify all`; writes the JSON report next to the
table when an output path is given.
"""

import argparse
import sys

from tetcomplex.verify import verify_all


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", help="JSON report path")
    args = parser.parse_args()
    report = verify_all()
    if args.out:
        report.to_json(args.out)
    print(report.table())
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
