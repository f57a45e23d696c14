"""Command-line entry point: ``orbitsep <suite> [flags]``.

Exit codes: 0 all checks passed, 1 the suite ran and found violations
(witnesses are in the report), 2 usage or configuration error, 3 a resource
cap was hit (group too large to enumerate, sample budget exhausted).
"""

from __future__ import annotations

import argparse
import sys
import threading
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .galois import BadSetScanner, fixer_subgroup
from .groups import (
    DimensionMismatch,
    GroupTooLarge,
    InvalidDimension,
    ProductGroupElement,
    embedded_symmetric,
    enumerate_group,
    pair_count,
)
from .invariants import (
    conjugation_map,
    diag_offdiag_map,
    f_star_map,
    fourier_map,
    gcd_coprime,
    raw_diag_map,
    sample_sort_separators,
    veronese_map,
)
from .mra import MraConfig, read_kv_file, sample_complexity_sweep
from .pointcloud import (
    PointCloudAction,
    best_alignment,
    cloud_invariants,
    cloud_map,
    gram,
    center,
    read_cloud_csv,
)
from .report import FORMATS, Report, check_writable, emit_report, write_manifest
from .rng import make_rng
from .separation import (
    ConjugationAction,
    CyclicAction,
    ProductAction,
    RowPermutationAction,
    ScalarRootAction,
    collision_search,
    features_equal,
    invariance_test,
    separation_test,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3

WITNESS_COLUMNS = ["type", "trial", "kind", "in_bad_set", "x1_in_bad_set", "x2_in_bad_set",
                   "x1", "x2", "f1", "f2", "element"]

FAMILIES = ("conjugation", "fstar", "diag-offdiag", "raw-diag", "fourier", "veronese", "sort", "cloud")


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------- #
# bad-set certification


class _LazyChecker:
    """Bad-set membership of the f* bad set, built on first use.

    Returns None (uncertified) when the ambient group is too large to
    enumerate.  ``to_packed`` maps a suite input to a packed symmetric matrix.
    """

    def __init__(self, n: int, to_packed=lambda x: np.asarray(x, dtype=float), seed: int = 0):
        self.n, self.to_packed, self.seed = n, to_packed, seed
        self._scanner = None
        self._failed = False
        self._lock = threading.Lock()

    def _get(self):
        with self._lock:
            if self._scanner is None and not self._failed:
                try:
                    G = enumerate_group("product", self.n)
                    self._scanner = BadSetScanner([f_star_map(self.n)], G, seed=self.seed)
                except GroupTooLarge:
                    self._failed = True
            return self._scanner

    def __call__(self, x):
        scanner = self._get()
        if scanner is None:
            return None
        member, _ = scanner.scan(self.to_packed(x)[None])
        return bool(member[0])


def _cloud_packed(x):
    return gram(center(x)).packed


# --------------------------------------------------------------------------- #
# families


def _family(args, name: str):
    """(feature map, action, bad-set checker or None) for a family name."""
    n, d = args.n, args.d
    if name == "conjugation":
        return conjugation_map(n), ConjugationAction(n), _LazyChecker(n, seed=args.seed)
    if name == "fstar":
        return f_star_map(n), ConjugationAction(n), None
    if name == "diag-offdiag":
        return diag_offdiag_map(n), ProductAction(n), None
    if name == "raw-diag":
        return raw_diag_map(n), ConjugationAction(n), None
    if name == "fourier":
        return fourier_map(n), CyclicAction(n), None
    if name == "veronese":
        return veronese_map(n, args.j), ScalarRootAction(n), None
    if name == "sort":
        return sample_sort_separators(n, d, args.count, seed=args.seed), RowPermutationAction(n, d), None
    if name == "cloud":
        return cloud_map(d, n), PointCloudAction(d, n), _LazyChecker(n, _cloud_packed, seed=args.seed)
    raise UsageError(f"unknown family {name!r}")


def _witness_rows(rep) -> list:
    rows = []
    for kind, items in (("split", rep.false_splits), ("merge", rep.false_merges)):
        for w in items:
            rows.append({"type": kind, **w})
    return sorted(rows, key=lambda r: r["trial"])


def _check_trials(args, default: int) -> int:
    t = default if args.trials is None else args.trials
    if t < 1:
        raise UsageError("--trials must be >= 1")
    return t


# --------------------------------------------------------------------------- #
# subcommands


def cmd_invariance(args):
    f, action, _ = _family(args, args.family)
    tol = 1e-9 if args.tol is None else args.tol
    rep = invariance_test(f, action, _check_trials(args, 1000), tol, seed=args.seed,
                          workers=args.workers, only=args.replay_trial)
    rows = [{"type": "invariance", **w} for w in rep.false_splits]
    summary = {**rep.summary(), "violations": len(rep.false_splits)}
    return Report("invariance", WITNESS_COLUMNS, rows, summary), EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_separation(args):
    f, action, checker = _family(args, args.family)
    tol = 1e-9 if args.tol is None else args.tol
    rep = separation_test(f, action, _check_trials(args, 10_000), tol, badset_checker=checker,
                          seed=args.seed, workers=args.workers, only=args.replay_trial)
    report = Report("separation", WITNESS_COLUMNS, _witness_rows(rep), rep.summary())
    return report, EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_galois_check(args):
    n = args.n
    G = enumerate_group("product", n)
    H = set(embedded_symmetric(n))
    rep = fixer_subgroup(f_star_map(n), G, trials=_check_trials(args, 32), seed=args.seed)
    fixed = set(rep.fixers)
    rows = [
        {"index": int(i), "sigma": list(g.sigma.image), "tau": list(g.tau.image), "embedded": g in H}
        for i, g in enumerate(G) if rep.mask[i]
    ]
    missing = sorted((h for h in H if h not in fixed), key=lambda h: (h.sigma.image, h.tau.image))
    for h in missing:
        rows.append({"index": G.index(h), "sigma": list(h.sigma.image), "tau": list(h.tau.image),
                     "embedded": True, "missing": True})
    summary = {
        "n": n,
        "group_size": rep.group_size,
        "fixers": len(rep.fixers),
        "embedded_size": len(H),
        "equal_to_embedded": fixed == H,
        "pit_trials": rep.trials_per_element,
        "seed": args.seed,
    }
    cols = ["index", "sigma", "tau", "embedded", "missing"]
    return Report("galois-check", cols, rows, summary), EXIT_OK if fixed == H else EXIT_VIOLATION


def cmd_badset(args):
    n = args.n
    trials = _check_trials(args, 100_000)
    rtol = 1e-9 if args.tol is None else args.tol
    G = enumerate_group("product", n)
    scanner = BadSetScanner([f_star_map(n)], G, rtol=rtol, seed=args.seed)
    L = n + pair_count(n)
    block = 2048
    rows, min_margin = [], np.inf
    for b, lo in enumerate(range(0, trials, block)):
        size = min(block, trials - lo)
        data = make_rng(args.seed, b).standard_normal((size, L))
        member, margin = scanner.scan(data)
        min_margin = min(min_margin, float(margin.min()))
        for k in np.flatnonzero(member):
            v = scanner.verdict(data[k])
            rows.append({"trial": lo + int(k), "x": data[k], "margin": float(margin[k]),
                         "witnesses": [[{"sigma": list(g.sigma.image), "tau": list(g.tau.image)}, j, r]
                                       for g, j, r in v.witnesses]})
    summary = {"n": n, "samples": trials, "members": len(rows), "rtol": rtol,
               "min_margin": min_margin, "seed": args.seed}
    report = Report("badset", ["trial", "margin", "x", "witnesses"], rows, summary)
    return report, EXIT_OK if not rows else EXIT_VIOLATION


def cmd_veronese(args):
    n, j = args.n, args.j
    f = veronese_map(n, j)
    action = ScalarRootAction(n)
    tol = 1e-9 if args.tol is None else args.tol
    rep = separation_test(f, action, _check_trials(args, 10_000), tol, seed=args.seed,
                          workers=args.workers, only=args.replay_trial)
    rows = _witness_rows(rep)
    hit = None
    if args.budget > 0 and args.replay_trial is None:
        hit = collision_search(f, action, budget=args.budget, seed=args.seed, tol=tol)
        if hit is not None:
            # certified: the brute-force oracle has already put x1 and x2 in distinct orbits
            rows.append({"type": "collision", **hit, "in_bad_set": False})
    summary = {**rep.summary(), "n": n, "j": j, "coprime": gcd_coprime(j, n),
               "budget": args.budget, "collision_found": hit is not None}
    ok = rep.passed and hit is None
    return Report("veronese", WITNESS_COLUMNS, rows, summary), EXIT_OK if ok else EXIT_VIOLATION


def cmd_sortsep(args):
    n, d = args.n, args.d
    f = sample_sort_separators(n, d, args.count, seed=args.seed)
    action = RowPermutationAction(n, d)
    trials = _check_trials(args, 10_000)
    tol = 1e-9 if args.tol is None else args.tol
    inv = invariance_test(f, action, trials, 0.0, seed=args.seed, workers=args.workers, only=args.replay_trial)
    sep = separation_test(f, action, trials, tol, seed=args.seed, workers=args.workers, only=args.replay_trial)
    rows = [{"type": "invariance", **w} for w in inv.false_splits] + _witness_rows(sep)
    summary = {**sep.summary(), "count": f.output_len, "invariance_violations": len(inv.false_splits)}
    ok = inv.passed and not sep.false_merges and not sep.false_splits
    return Report("sortsep", WITNESS_COLUMNS, rows, summary), EXIT_OK if ok else EXIT_VIOLATION


def cmd_pointcloud(args):
    if args.cloud:
        return _compare_clouds(args)
    f, action, checker = _family(args, "cloud")
    tol = 1e-8 if args.tol is None else args.tol
    inv_trials = args.invariance_trials
    inv = invariance_test(f, action, inv_trials, tol, seed=args.seed, workers=args.workers,
                          only=args.replay_trial)
    sep = separation_test(f, action, _check_trials(args, 10_000), tol, badset_checker=checker,
                          seed=args.seed, workers=args.workers, only=args.replay_trial)
    rows = [{"type": "invariance", **w} for w in inv.false_splits] + _witness_rows(sep)
    summary = {**sep.summary(), "d": args.d, "n": args.n, "invariance_trials": inv.trials,
               "invariance_violations": len(inv.false_splits)}
    ok = inv.passed and sep.passed
    return Report("pointcloud", WITNESS_COLUMNS, rows, summary), EXIT_OK if ok else EXIT_VIOLATION


def _compare_clouds(args):
    P1, P2 = (read_cloud_csv(p) for p in args.cloud)
    if P1.coords.shape != P2.coords.shape:
        raise DimensionMismatch(f"clouds of shape {P1.coords.shape} and {P2.coords.shape}")
    tol = 1e-8 if args.tol is None else args.tol
    f1, f2 = cloud_invariants(P1), cloud_invariants(P2)
    al = best_alignment(P1, P2)
    same = al.relative_residual <= 1e-6
    equal = features_equal(f1, f2, tol)
    rows = [{"cloud": str(p), "features": f} for p, f in zip(args.cloud, (f1, f2))]
    summary = {"features_equal": equal, "same_orbit": same, "relative_residual": al.relative_residual,
               "rotation": al.rotation, "permutation": list(al.permutation.image),
               "translation": al.translation, "tolerance": tol}
    return Report("pointcloud", ["cloud", "features"], rows, summary), EXIT_OK if equal == same else EXIT_VIOLATION


MRA_COLUMNS = ["sigma", "trial", "N_required", "censored", "mean_err", "power_err", "bispec_err",
               "align_err", "slope"]


def _mra_config(args) -> MraConfig:
    kv = read_kv_file(args.config) if args.config else {}
    flags = {"n": args.n, "sigmas": args.sigmas, "target_error": args.target_error,
             "max_samples": args.max_samples, "trials": args.trials}
    for k, v in flags.items():
        if v is not None:
            kv.pop("sigma_grid" if k == "sigmas" else k, None)
            kv[k] = v
    if args.seed_given or "seed" not in kv:
        kv["seed"] = args.seed
    return MraConfig.from_mapping({k: str(v) for k, v in kv.items()})


def cmd_mra(args):
    cfg = _mra_config(args)
    res = sample_complexity_sweep(cfg)
    rows = [{**vars(r), "slope": None} for r in res.rows]
    rows.append({"sigma": None, "trial": "summary", "N_required": None, "censored": bool(res.censored),
                 "slope": res.slope})
    lo, hi = args.slope_band
    summary = {"config": vars(cfg), "signal": res.signal, "slope": res.slope, "intercept": res.intercept,
               "censored_sigmas": list(res.censored), "monotone": res.monotone(), "slope_band": [lo, hi]}
    if res.censored:
        code = EXIT_CAP
    else:
        code = EXIT_OK if lo <= res.slope <= hi and res.monotone() else EXIT_VIOLATION
    return Report("mra", MRA_COLUMNS, rows, summary), code


# --------------------------------------------------------------------------- #
# argument parsing


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_float(s: str) -> float:
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {s}")
    return v


def _band(s: str):
    try:
        lo, hi = (float(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {s}") from None
    return lo, hi


class _SeedAction(argparse.Action):
    def __call__(self, parser, ns, values, option_string=None):
        setattr(ns, self.dest, values)
        ns.seed_given = True


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, action=_SeedAction)
    common.add_argument("--trials", type=int, default=None, help="suite-specific default")
    common.add_argument("--tol", type=_nonneg_float, default=None, help="suite-specific default")
    common.add_argument("--out", default=None, help="report path (stdout when omitted)")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--workers", type=_positive_int, default=1)

    p = argparse.ArgumentParser(prog="orbitsep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="SUITE")

    def add(name, fn, n=3, d=2, help=None):
        s = sub.add_parser(name, parents=[common], help=help)
        s.add_argument("--n", type=int, default=n)
        s.add_argument("--d", type=int, default=d)
        s.set_defaults(func=fn)
        return s

    def replay(s):
        s.add_argument("--replay-trial", type=int, default=None, metavar="T",
                       help="rerun only trial T (witness replay)")

    for name, fn in (("invariance", cmd_invariance), ("separation", cmd_separation)):
        s = add(name, fn, help=f"{name} suite for one invariant family")
        s.add_argument("--family", choices=FAMILIES, default="conjugation")
        s.add_argument("--j", type=int, default=1)
        s.add_argument("--count", type=int, default=None)
        replay(s)

    add("galois-check", cmd_galois_check, help="fixer subgroup of f* inside S_n x S_{n(n-1)/2}")
    add("badset", cmd_badset, help="bad-set membership of random symmetric matrices")

    s = add("veronese", cmd_veronese, n=4, help="scalar root action separators")
    s.add_argument("--j", type=int, default=1)
    s.add_argument("--budget", type=int, default=100_000)
    replay(s)

    s = add("sortsep", cmd_sortsep, n=4, help="sort-based separators for row permutations")
    s.add_argument("--count", type=int, default=None, help="number of features (default 2nd+1)")
    replay(s)

    s = add("pointcloud", cmd_pointcloud, n=4, help="point clouds modulo rigid motions and relabeling")
    s.add_argument("--invariance-trials", type=_positive_int, default=1000)
    s.add_argument("--cloud", nargs=2, metavar=("A.csv", "B.csv"), help="compare two clouds instead")
    replay(s)

    s = sub.add_parser("mra", parents=[common], help="sample-complexity sweep for multi-reference alignment")
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--sigmas", default=None, help="comma-separated noise levels")
    s.add_argument("--target-error", type=float, default=None)
    s.add_argument("--max-samples", type=int, default=None)
    s.add_argument("--config", default=None, help="flat key=value file; flags take precedence")
    s.add_argument("--slope-band", type=_band, default=(4.5, 7.5), metavar="LO,HI")
    s.set_defaults(func=cmd_mra)
    return p


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    args.seed_given = getattr(args, "seed_given", False)
    started, t0 = _now(), time.perf_counter()
    try:
        if args.out is not None and args.out != "-":
            check_writable(args.out)
        report, code = args.func(args)
        emit_report(report, args.format, args.out)
    except GroupTooLarge as e:
        print(f"orbitsep: resource cap: {e}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, InvalidDimension, DimensionMismatch, ValueError, OSError) as e:
        print(f"orbitsep: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "seed_given")}
    manifest = {
        "subcommand": args.command,
        "flags": flags,
        "seed": args.seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "elapsed_seconds": time.perf_counter() - t0,
        "outputs": [args.out] if args.out else [],
        "exit_code": code,
        "summary": report.summary,
    }
    write_manifest(manifest, args.out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
