#!/usr/bin/env python3
"""Run every CLI suite at its default size and collect the reports in one directory.

Prints one line per suite with its exit code and wall time.
"""

import argparse
import pathlib
import time

from orbitsep.cli import run

SUITES = {
    "invariance_conjugation_n4": ["invariance", "--n", "4"],
    "separation_conjugation_n3": ["separation", "--n", "3"],
    "separation_conjugation_n4": ["separation", "--n", "4"],
    "galois_n3": ["galois-check", "--n", "3"],
    "galois_n4": ["galois-check", "--n", "4"],
    "badset_n3": ["badset", "--n", "3"],
    "veronese_n4_j2": ["veronese", "--n", "4", "--j", "2"],
    "veronese_n5_j2": ["veronese", "--n", "5", "--j", "2"],
    "sortsep_n4_d2": ["sortsep", "--n", "4", "--d", "2"],
    "pointcloud_d3_n5": ["pointcloud", "--d", "3", "--n", "5"],
    "mra_default": ["mra"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="suite_reports")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", nargs="*", help="subset of suite names")
    args = ap.parse_args()
    out = pathlib.Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, argv in SUITES.items():
        if args.only and name not in args.only:
            continue
        t0 = time.perf_counter()
        code = run([*argv, "--seed", str(args.seed), "--workers", str(args.workers),
                    "--out", str(out / f"{name}.csv")])
        print(f"{name:28s} exit={code} {time.perf_counter() - t0:7.1f}s", flush=True)


if __name__ == "__main__":
    main()
