"""Command line front end: ``n3lars {select,screen,synth,red,bench}``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .data import generate_synthetic, load_dataset, standardize
from .kernels import KernelConfig
from .metrics import redundancy_rate
from .parallel import DEFAULT_CACHE_BYTES, ScoringEngine, resolve_workers
from .screening import export_ranking, mr_rank, screen_path
from .solver import lars_path

log = logging.getLogger("n3lars")

# exact mode holds one n x n matrix per feature; beyond this n it needs --force
EXACT_N_LIMIT = 2000


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _add_data_args(p):
    p.add_argument("--input", required=True, help="dataset path")
    p.add_argument("--format", choices=["csv", "libsvm"], default="csv")
    p.add_argument("--task", choices=["regression", "classification"], default="regression")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--n-features", type=_positive_int, default=None,
                   help="LIBSVM feature count (default: highest index seen)")


def _add_kernel_args(p):
    p.add_argument("--mode", choices=["nystrom", "exact"], default="nystrom")
    p.add_argument("--sigma2-x", type=float, default=1.0)
    p.add_argument("--sigma2-y", type=float, default=1.0)
    p.add_argument("--basis-size", type=_positive_int, default=20)
    p.add_argument("--basis-low", type=float, default=-5.0)
    p.add_argument("--basis-high", type=float, default=5.0)
    p.add_argument("--eps", type=float, default=1e-10,
                   help="eigenvalue floor relative to the largest basis eigenvalue")
    p.add_argument("--measure", choices=["nhsic", "hsic"], default="nhsic",
                   help="hsic (unnormalized) is exact mode only")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--workers", type=int, default=1, help="0 = all cores")
    p.add_argument("--cache-bytes", type=int, default=DEFAULT_CACHE_BYTES)
    p.add_argument("--force", action="store_true", help="allow exact mode on large n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="suppress progress lines")
    parser = argparse.ArgumentParser(prog="n3lars", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", parents=[common], help="select m features along the LARS path")
    _add_data_args(p)
    _add_kernel_args(p)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("screen", parents=[common],
                       help="MR ranking, optionally followed by LARS on the top m")
    _add_data_args(p)
    _add_kernel_args(p)
    p.add_argument("--m", type=_positive_int, required=True, help="screen size")
    p.add_argument("--m-final", type=_positive_int, default=None)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("synth", parents=[common], help="write the synthetic regression dataset")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d-base", type=_positive_int, required=True)
    p.add_argument("--d-redundant", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--independent-noise", action="store_true",
                   help="draw separate noise for every copy and the target")
    p.add_argument("--output", default="synth.csv")

    p = sub.add_parser("red", parents=[common], help="redundancy rate of a feature list")
    _add_data_args(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--features", type=_int_list)
    g.add_argument("--features-file", help="selected.json written by select/screen")

    p = sub.add_parser("bench", parents=[common],
                       help="time selection over a grid of sizes and workers")
    p.add_argument("--grid", nargs="+", default=["n=100,200", "d=100,200"],
                   help="axis specs such as n=100,200 d=100,200")
    p.add_argument("--p", type=_int_list, default=[1], help="worker counts")
    p.add_argument("--m", type=_positive_int, default=5)
    p.add_argument("--mode", choices=["nystrom", "exact"], default="nystrom")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="timing.csv")
    return parser


def _kernel_config(args) -> KernelConfig:
    return KernelConfig(args.sigma2_x, args.sigma2_y, args.basis_size, args.basis_low,
                        args.basis_high, args.eps, args.measure)


def _load(args):
    return load_dataset(args.input, args.format, args.task, header=args.header,
                        n_features=args.n_features)


def _check_exact(args, ds) -> bool:
    if args.mode == "exact" and ds.n > EXACT_N_LIMIT:
        gib = ds.d * ds.n * ds.n * 8 / 2**30
        print(f"warning: exact mode needs O(n^2) memory per feature "
              f"(n={ds.n}, up to {gib:.1f} GiB for all features)", file=sys.stderr)
        if not args.force:
            print("error: rerun with --force to proceed in exact mode", file=sys.stderr)
            return False
    return True


def _write_selection(path, ds, args, cfg, out_dir: Path, extra=None):
    final = path.final_alpha
    features = []
    for rank, k in enumerate(path.selected, start=1):
        features.append({"index": k, "name": ds.feature_name(k), "rank": rank,
                         "lambda_enter": path.lambda_enter(k), "alpha_final": final.get(k, 0.0)})
    doc = {
        "mode": path.mode,
        "m": path.m,
        "features": features,
        "lambda_convention": "lambda = 2 * common correlation (loss without a 1/2 factor)",
        "config": {
            "input": str(args.input), "task": ds.task, "n": ds.n, "d": ds.d,
            "sigma2_x": cfg.sigma2_x, "sigma2_y": cfg.sigma2_y, "basis_size": cfg.basis_size,
            "basis_low": cfg.basis_low, "basis_high": cfg.basis_high, "eps": cfg.eps,
            "measure": cfg.measure, "tol": args.tol, **(extra or {}),
        },
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "selected.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    path.to_csv(out_dir / "path.csv")


def _summary(path, elapsed: float) -> str:
    lams = path.lambdas
    return (f"selected {len(path.selected)} of m={path.m}: {path.selected}; "
            f"lambda {lams.max():.6g} -> {lams.min():.6g}; wall time {elapsed:.3f}s")


def cmd_select(args) -> int:
    t0 = time.perf_counter()
    ds = _load(args)
    if not _check_exact(args, ds):
        return 1
    ds = standardize(ds)
    cfg = _kernel_config(args)
    with ScoringEngine(ds, args.mode, cfg, resolve_workers(args.workers),
                       args.cache_bytes) as engine:
        scores = engine.step1_score_all()
        path = lars_path(scores, args.m, tol=args.tol, engine=engine, mode=args.mode)
    out = Path(args.out_dir)
    _write_selection(path, ds, args, cfg, out)
    print(_summary(path, time.perf_counter() - t0))
    return 0


def cmd_screen(args) -> int:
    t0 = time.perf_counter()
    ds = _load(args)
    if not _check_exact(args, ds):
        return 1
    ds = standardize(ds)
    cfg = _kernel_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with ScoringEngine(ds, args.mode, cfg, resolve_workers(args.workers),
                       args.cache_bytes) as engine:
        scores = engine.step1_score_all()
        if args.m_final is None:
            ranking = mr_rank(scores, args.m)
            path = None
        else:
            ranking, path = screen_path(scores, args.m, args.m_final, engine=engine,
                                        tol=args.tol, mode=args.mode)
    export_ranking(scores, ranking, out / "ranking.csv")
    if path is None:
        print(f"MR top-{args.m}: {ranking}; wall time {time.perf_counter() - t0:.3f}s")
        return 0
    _write_selection(path, ds, args, cfg, out, extra={"screen_m": args.m})
    print(_summary(path, time.perf_counter() - t0))
    return 0


def cmd_synth(args) -> int:
    ds = generate_synthetic(args.n, args.d_base, args.d_redundant, args.noise, args.seed,
                            shared_noise=not args.independent_noise)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([ds.X.T, ds.y])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in data:
            w.writerow([repr(float(v)) for v in row])
    manifest = {
        "generator": "x0 * exp(x1) + x2 + noise * e",
        "n": args.n, "d_base": args.d_base, "d_redundant": args.d_redundant,
        "d": ds.d, "noise": args.noise, "seed": args.seed,
        "shared_noise": not args.independent_noise,
        "columns": ds.feature_names + ["y"],
        "layout": "one sample per line, features then output, no header",
    }
    with open(out.with_name(out.name + ".manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {out} (n={ds.n}, d={ds.d})")
    return 0


def cmd_red(args) -> int:
    ds = _load(args)
    if args.features_file:
        with open(args.features_file) as fh:
            doc = json.load(fh)
        features = [f["index"] for f in doc["features"]]
    else:
        features = args.features
    for k in features:
        if not 0 <= k < ds.d:
            raise ValueError(f"feature index {k} out of range [0, {ds.d})")
    print(float(redundancy_rate(ds, features)))
    return 0


def _parse_grid(specs) -> dict[str, list[int]]:
    axes = {}
    for spec in specs:
        key, _, vals = spec.partition("=")
        if key not in ("n", "d") or not vals:
            raise argparse.ArgumentTypeError(f"bad grid axis {spec!r}; use n=... or d=...")
        axes[key] = _int_list(vals)
    return axes


def cmd_bench(args) -> int:
    axes = _parse_grid(args.grid)
    ns, ds_ = axes.get("n", [100]), axes.get("d", [100])
    rows = []
    for n, d, p in itertools.product(ns, ds_, args.p):
        d_red = d // 2
        data = standardize(generate_synthetic(n, d - d_red, d_red, 0.1, args.seed))
        m = min(args.m, d)
        with ScoringEngine(data, args.mode, KernelConfig(), p) as engine:
            t0 = time.perf_counter()
            scores = engine.step1_score_all()
            t1 = time.perf_counter()
            path = lars_path(scores, m, engine=engine, mode=args.mode)
            t2 = time.perf_counter()
        iters = max(len(path.events) - 1, 1)
        rows.append({"n": n, "d": d, "workers": p, "mode": args.mode, "m": m,
                     "step1_ms": 1e3 * (t1 - t0), "lars_ms": 1e3 * (t2 - t1),
                     "per_iter_ms": 1e3 * (t2 - t1) / iters, "total_ms": 1e3 * (t2 - t0)})
        log.info("bench n=%d d=%d P=%d total_ms=%.1f", n, d, p, rows[-1]["total_ms"])
    with open(args.output, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {args.output} ({len(rows)} rows)")
    return 0


COMMANDS = {"select": cmd_select, "screen": cmd_screen, "synth": cmd_synth,
            "red": cmd_red, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth":
        if args.d_base < 3:
            parser.error("--d-base must be at least 3 (the target uses three features)")
        if not 0 <= args.d_redundant <= args.d_base:
            parser.error("--d-redundant must lie in [0, d-base]")
        if args.n < 2:
            parser.error("--n must be at least 2")
    if args.command == "bench":
        try:
            _parse_grid(args.grid)
        except argparse.ArgumentTypeError as exc:
            parser.error(str(exc))
    if args.command == "screen" and args.m_final is not None and args.m_final > args.m:
        parser.error("--m-final must not exceed --m")

    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
