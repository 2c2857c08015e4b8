"""Command-line front end: ``ppcd <command> [options]``.

Exit codes: 0 success, 1 usage or I/O error, 2 precondition violation,
3 release refused by the ledger policy.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .clustering import (INIT_STRATEGIES, ClusteringError, KMeansConfig, clustering_from_labels, kmeans,
                         load_assignments, save_clustering, warm_start_merge)
from .dataset import (NORMALIZATION_METHODS, Dataset, DatasetError, apply_normalizer, fit_normalizer,
                      gen_synthetic, load_csv, pad_to_even, save_csv)
from .ledger import LedgerError, ReleaseLedger
from .rotation import normalize_angle
from .transform import (ClientSecrets, TransformError, TransformedDataset, arbt_client_release, derive_seeds,
                        mrbt, rbt, server_unify)

log = logging.getLogger("ppcd")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PRECONDITION = 2
EXIT_REFUSED = 3


class CLIError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CLIError(f"{self.prog}: {message}", EXIT_USAGE)


def _read_dataset(path) -> Dataset:
    try:
        return load_csv(path)
    except DatasetError as exc:
        raise CLIError(str(exc), EXIT_USAGE) from exc


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _is_within(path: Path, directory: Path) -> bool:
    try:
        path.resolve().relative_to(directory.resolve())
        return True
    except ValueError:
        return False


# -- commands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    d = gen_synthetic(args.n, args.a, args.mu, args.var, args.seed)
    save_csv(d, args.out)
    log.info("wrote %d x %d dataset to %s", d.n, d.a, args.out)
    return EXIT_OK


def cmd_normalize(args) -> int:
    d = _read_dataset(args.input)
    spec = fit_normalizer(d, args.method)
    save_csv(apply_normalizer(spec, d), args.out)
    return EXIT_OK


def cmd_transform(args) -> int:
    d = _read_dataset(args.input)
    if d.a % 2:
        log.info("padding %d attributes to %d with a zero attribute", d.a, d.a + 1)
        d = pad_to_even(d)
    out = Path(args.out)
    secrets_path = Path(args.secrets) if args.secrets else out.with_name(out.name + ".secrets.json")
    if _is_within(secrets_path, out):
        raise CLIError(f"secrets file {secrets_path} must not be inside the output directory {out}")

    if args.scheme == "rbt":
        if args.m != 1:
            raise CLIError("--m applies to mrbt and arbt only")
        seeds = derive_seeds(args.seed, 1)
        y = rbt(d, seeds[0])
        secrets = ClientSecrets.from_seeds(seeds)
    else:
        y, secrets = mrbt(d, args.m, derive_seeds(args.seed, args.m))
    y.save(out)
    secrets.save(secrets_path)
    if args.scheme == "arbt":
        ledger_path = Path(args.ledger) if args.ledger else secrets_path.with_suffix(".ledger")
        ReleaseLedger(secrets.m).save(ledger_path)
        print(f"ledger: {ledger_path}")
    print(f"{args.scheme}: {y.m} block(s), widths {min(y.widths)}..{max(y.widths)}, secrets: {secrets_path}")
    return EXIT_OK


def cmd_release(args) -> int:
    if args.i == args.j:
        raise CLIError(f"cannot release a unification angle for subset {args.i} with itself", EXIT_USAGE)
    try:
        secrets = ClientSecrets.load(args.secrets)
    except (KeyError, ValueError) as exc:
        raise CLIError(f"{args.secrets}: malformed secrets file ({exc})") from exc
    ledger_path = Path(args.ledger)
    ledger = ReleaseLedger.load(ledger_path) if ledger_path.exists() else ReleaseLedger(secrets.m)
    decision = arbt_client_release(secrets, args.i, args.j, ledger)
    if not decision.granted:
        print(f"refused: {decision.reason}", file=sys.stderr)
        return EXIT_REFUSED
    ledger.save(ledger_path)
    print(repr(decision.theta))
    return EXIT_OK


def _cluster_config(args) -> KMeansConfig:
    return KMeansConfig(k=args.k, init=args.init, max_iterations=args.max_iter, epsilon=args.epsilon,
                        rng_seed=args.seed)


def cmd_cluster(args) -> int:
    d = _read_dataset(args.input)
    start = time.perf_counter()
    c = kmeans(d.values, _cluster_config(args))
    elapsed = (time.perf_counter() - start) * 1e3
    centroids = args.centroids or str(Path(args.out).with_suffix("")) + "_centroids.csv"
    save_clustering(c, args.out, centroids)
    print(f"iterations={c.iterations_used} wcss={c.wcss:.10g} time_ms={elapsed:.3f}")
    return EXIT_OK


def cmd_unify(args) -> int:
    y = TransformedDataset.load(args.blocks)
    theta = normalize_angle(args.theta)
    unified = server_unify(y, args.i, args.j, theta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "unified.csv", unified.merged.T, delimiter=",", fmt="%.17g")
    if args.k is None:
        print(f"unified subsets {args.i} -> {args.j}: {unified.merged.shape[1]} records")
        return EXIT_OK

    cfg = _cluster_config(args)
    start = time.perf_counter()
    if args.warm_start:
        labels_i, labels_j = (load_assignments(p) for p in args.warm_start)
        ci = clustering_from_labels(unified.left, labels_i, cfg.k)
        cj = clustering_from_labels(unified.right, labels_j, cfg.k)
        c = warm_start_merge(ci, cj, unified, cfg.max_iterations, cfg.epsilon)
        mode = "warm"
    else:
        c = kmeans(unified.merged, cfg)
        mode = "cold"
    elapsed = (time.perf_counter() - start) * 1e3
    save_clustering(c, out / "clustering.csv", out / "centroids.csv")
    print(f"mode={mode} iterations={c.iterations_used} wcss={c.wcss:.10g} time_ms={elapsed:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    ladder = bench.default_ladder(args.ladder_count, args.ladder_step, args.attributes)
    report = bench.BenchReport()
    done = set()
    for exp in args.experiment:
        # experiments 6 and 7 come out of the same runs
        key = "6" if exp in ("6", "7") else exp
        if key not in done:
            bench.run_experiment(exp, args.repetitions, ladder, args.seed, report)
            done.add(key)
    report.save(args.out)
    for r in report.rows:
        extra = "" if r.iterations is None else f" iterations={r.iterations:.4f}"
        print(f"exp {r.experiment:>2} {r.label:>9} n={r.n:<8} {r.scheme:<10} mean={r.mean_ms:.3f} ms "
              f"std={r.std_ms:.3f} outliers={r.outliers}{extra}")
    if "1" in args.experiment:
        rows = report.find("1", "rbt")
        _, _, r2 = bench.linear_fit([r.n for r in rows], [r.mean_ms for r in rows])
        print(f"exp 1 linear fit R^2 = {r2:.4f}")
    for exp in ("3", "4"):
        if exp in args.experiment:
            print(f"exp {exp} MRBT overhead over RBT = {100 * bench.overhead(report, exp):.2f}%")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ppcd", description="Rotation-based privacy-preserving clustering toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic Gaussian dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--a", type=int, required=True)
    g.add_argument("--mu", type=float, default=100.0)
    g.add_argument("--var", type=_positive_float, default=100.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    nz = sub.add_parser("normalize", help="normalize each attribute of a dataset")
    nz.add_argument("--in", dest="input", required=True)
    nz.add_argument("--out", required=True)
    nz.add_argument("--method", choices=NORMALIZATION_METHODS, default="min_max")
    nz.set_defaults(func=cmd_normalize)

    t = sub.add_parser("transform", help="rotate a dataset (client side)")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True, help="output directory for block CSVs and manifest")
    t.add_argument("--scheme", choices=("rbt", "mrbt", "arbt"), default="rbt")
    t.add_argument("--m", type=int, default=1)
    t.add_argument("--seed", type=int, required=True, help="master seed")
    t.add_argument("--secrets", help="client-side secrets file (default: <out>.secrets.json)")
    t.add_argument("--ledger", help="arbt: release ledger file (default: next to the secrets)")
    t.set_defaults(func=cmd_transform)

    r = sub.add_parser("release", help="release a unification angle if the ledger allows it")
    r.add_argument("--secrets", required=True)
    r.add_argument("--ledger", required=True)
    r.add_argument("--i", type=int, required=True)
    r.add_argument("--j", type=int, required=True)
    r.set_defaults(func=cmd_release)

    def clustering_flags(sp, default_k):
        sp.add_argument("--k", type=int, default=default_k)
        sp.add_argument("--init", choices=INIT_STRATEGIES, default="random")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-iter", type=int, default=100)
        sp.add_argument("--epsilon", type=float, default=0.0)

    c = sub.add_parser("cluster", help="k-means on a dataset or block CSV")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", required=True, help="clustering CSV (record,cluster)")
    c.add_argument("--centroids", help="centroids CSV (default: <out>_centroids.csv)")
    clustering_flags(c, 7)
    c.set_defaults(func=cmd_cluster)

    u = sub.add_parser("unify", help="unify two transformed blocks and optionally cluster them (server side)")
    u.add_argument("--blocks", required=True, help="directory written by 'transform'")
    u.add_argument("--i", type=int, required=True)
    u.add_argument("--j", type=int, required=True)
    u.add_argument("--theta", type=float, required=True, help="released unification angle in degrees")
    u.add_argument("--out", required=True, help="output directory")
    u.add_argument("--warm-start", nargs=2, metavar=("CLUSTERING_I", "CLUSTERING_J"),
                   help="clustering CSVs of blocks i and j to merge instead of clustering cold")
    clustering_flags(u, None)
    u.set_defaults(func=cmd_unify)

    b = sub.add_parser("bench", help="run timing experiments")
    b.add_argument("--experiment", nargs="+", choices=bench.EXPERIMENTS, required=True)
    b.add_argument("--repetitions", type=int, help="repetitions (experiment 10: trials)")
    b.add_argument("--ladder-count", type=int, default=15)
    b.add_argument("--ladder-step", type=int, default=bench.LADDER_STEP)
    b.add_argument("--attributes", type=int, default=4)
    b.add_argument("--seed", type=int, default=1)
    b.add_argument("--out", required=True, help="report CSV")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CLIError as exc:
        print(exc, file=sys.stderr)
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, TransformError, ClusteringError, LedgerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
