"""Timing harness for the transformation and clustering experiments.

All measured sections run on the calling thread.  Times are wall-clock
milliseconds from :func:`time.perf_counter`.  Seeds and angles are derived
before the clock starts, so the transform timings cover the rotation of the
data only.
"""

from __future__ import annotations

import csv
import ctypes
import ctypes.util
import functools
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .clustering import KMeansConfig, kmeans, warm_start_merge
from .dataset import Dataset, gen_synthetic, partition_widths
from .ledger import ReleaseLedger
from .rotation import seed_to_angle
from .transform import (TransformedDataset, arbt_client_release, derive_seeds, mrbt, server_unify,
                        transform_values)

OUTLIER_FACTOR = 3.0
LADDER_STEP = 3125


class BenchError(ValueError):
    pass


@functools.lru_cache(maxsize=None)
def pin_allocator() -> bool:
    """Keep glibc from returning large buffers to the OS between calls.

    Otherwise arrays above the (adaptive) mmap threshold are page-faulted
    afresh on every call and the per-record cost jumps between two regimes
    depending on allocation history.  No-op off glibc.
    """
    name = ctypes.util.find_library("c")
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError, TypeError):
        return False
    M_TRIM_THRESHOLD, M_MMAP_THRESHOLD = -1, -3
    return bool(mallopt(M_MMAP_THRESHOLD, 256 << 20)) and bool(mallopt(M_TRIM_THRESHOLD, 512 << 20))


def default_ladder(count: int = 15, step: int = LADDER_STEP, attributes: int = 4) -> list[tuple[str, int, int]]:
    return [(f"s{i}", i * step, attributes) for i in range(1, count + 1)]


def outlier_filter(timings) -> tuple[list[float], int]:
    """Replace measurements above ``3 * median`` with the mean of the rest."""
    timings = [float(t) for t in timings]
    if len(timings) < 3:
        raise BenchError(f"outlier filtering needs at least 3 measurements, got {len(timings)}")
    limit = OUTLIER_FACTOR * statistics.median(timings)
    kept = [t for t in timings if t <= limit]
    if len(kept) == len(timings):
        return timings, 0
    fill = statistics.fmean(kept)
    return [t if t <= limit else fill for t in timings], len(timings) - len(kept)


def time_call(fn: Callable[[], object], repetitions: int, warmup: int = 3) -> list[float]:
    for _ in range(warmup):
        fn()
    out = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        out.append((time.perf_counter() - start) * 1e3)
    return out


@dataclass
class BenchRow:
    experiment: str
    label: str
    n: int
    scheme: str
    repetitions: int
    raw_ms: list
    mean_ms: float = 0.0
    std_ms: float = 0.0
    outliers: int = 0
    iterations: Optional[float] = None

    @classmethod
    def from_timings(cls, experiment, label, n, scheme, raw, iterations=None) -> "BenchRow":
        filtered, count = outlier_filter(raw) if len(raw) >= 3 else (list(raw), 0)
        std = statistics.pstdev(filtered) if len(filtered) > 1 else 0.0
        return cls(experiment, label, n, scheme, len(raw), list(raw), statistics.fmean(filtered), std, count,
                   iterations)


FIELDS = ["experiment", "label", "n", "scheme", "repetitions", "mean_ms", "std_ms", "outliers", "iterations",
          "raw_ms"]


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def add(self, row: BenchRow) -> BenchRow:
        self.rows.append(row)
        return row

    def find(self, experiment, scheme, label=None) -> list[BenchRow]:
        return [r for r in self.rows
                if r.experiment == experiment and r.scheme == scheme and (label is None or r.label == label)]

    def save(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FIELDS)
            for r in self.rows:
                w.writerow([r.experiment, r.label, r.n, r.scheme, r.repetitions, f"{r.mean_ms:.6f}",
                            f"{r.std_ms:.6f}", r.outliers, "" if r.iterations is None else r.iterations,
                            ";".join(f"{t:.6f}" for t in r.raw_ms)])

    @classmethod
    def load(cls, path) -> "BenchReport":
        rows = []
        with Path(path).open(newline="") as fh:
            for rec in csv.DictReader(fh):
                raw = [float(t) for t in rec["raw_ms"].split(";") if t]
                rows.append(BenchRow(rec["experiment"], rec["label"], int(rec["n"]), rec["scheme"],
                                     int(rec["repetitions"]), raw, float(rec["mean_ms"]), float(rec["std_ms"]),
                                     int(rec["outliers"]), float(rec["iterations"]) if rec["iterations"] else None))
        return cls(rows)


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares ``y = slope * x + intercept``; returns (slope, intercept, r_squared)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def overhead(report: BenchReport, experiment: str, label: Optional[str] = None) -> float:
    """Relative MRBT overhead over RBT, ``mrbt_mean / rbt_mean - 1``."""
    (r,) = report.find(experiment, "rbt", label)
    (m,) = report.find(experiment, "mrbt", label)
    return m.mean_ms / r.mean_ms - 1.0


# -- experiments -------------------------------------------------------------------

def _angles(seed, m):
    return [seed_to_angle(s) for s in derive_seeds(seed, m)]


def _rbt_vs_mrbt(report, experiment, label, d: Dataset, m, repetitions, warmup, seed):
    pin_allocator()
    angles = _angles(seed, m)
    widths = partition_widths(d.n, m)
    v = d.values
    rbt_fn = lambda: transform_values(v, angles[:1], [d.n])  # noqa: E731
    mrbt_fn = lambda: transform_values(v, angles, widths)  # noqa: E731
    for _ in range(warmup):
        rbt_fn()
        mrbt_fn()
    # interleave the two schemes so slow drifts of the machine hit both alike
    raw_r, raw_m = [], []
    for _ in range(repetitions):
        raw_r += time_call(rbt_fn, 1, warmup=0)
        raw_m += time_call(mrbt_fn, 1, warmup=0)
    report.add(BenchRow.from_timings(experiment, label, d.n, "rbt", raw_r))
    report.add(BenchRow.from_timings(experiment, label, d.n, "mrbt", raw_m))


def experiment_1(report, ladder, repetitions=50, warmup=3, seed=1):
    """RBT time over the dataset ladder.

    Sizes are measured round-robin, one call each per round, so that drift
    in machine load spreads evenly over the ladder.
    """
    pin_allocator()
    datasets = [gen_synthetic(n, a, 100.0, 100.0, seed) for _, n, a in ladder]
    angle = [seed_to_angle(seed)]
    calls = [functools.partial(transform_values, d.values, angle, [d.n]) for d in datasets]
    raw = [[] for _ in calls]
    for _ in range(warmup):
        for fn in calls:
            fn()
    for _ in range(repetitions):
        for times, fn in zip(raw, calls):
            times += time_call(fn, 1, warmup=0)
    for (label, n, _), times in zip(ladder, raw):
        report.add(BenchRow.from_timings("1", label, n, "rbt", times))
    return report


def experiment_2(report, n=10 * LADDER_STEP, m=100, repetitions=500, warmup=3, seed=1):
    """Many MRBT rounds on one dataset; the row keeps raw and filtered statistics."""
    pin_allocator()
    d = gen_synthetic(n, 4, 100.0, 100.0, seed)
    angles = _angles(seed, m)
    widths = partition_widths(n, m)
    raw = time_call(lambda: transform_values(d.values, angles, widths), repetitions, warmup)
    report.add(BenchRow.from_timings("2", "s10", n, "mrbt", raw))
    return report


def experiment_3(report, n=10 * LADDER_STEP, m=100, repetitions=50, warmup=3, seed=1):
    d = gen_synthetic(n, 4, 100.0, 100.0, seed)
    _rbt_vs_mrbt(report, "3", "s10", d, m, repetitions, warmup, seed)
    return report


def experiment_4(report, n=10**6, a=10, m=100, repetitions=10, warmup=1, seed=1, data: Optional[Dataset] = None):
    d = data if data is not None else gen_synthetic(n, a, 100.0, 100.0, seed)
    _rbt_vs_mrbt(report, "4", "synthetic", d, m, repetitions, warmup, seed)
    return report


def experiment_5(report, n=10 * LADDER_STEP, m=2, repetitions=50, warmup=3, seed=1):
    """ARBT client cost: MRBT of the data, then the unifying rotation of one subset."""
    d = gen_synthetic(n, 4, 100.0, 100.0, seed)
    seeds = derive_seeds(seed, m)
    angles = [seed_to_angle(s) for s in seeds]
    widths = partition_widths(n, m)
    raw = time_call(lambda: transform_values(d.values, angles, widths), repetitions, warmup)
    report.add(BenchRow.from_timings("5", "s10", n, "mrbt", raw))

    y, secrets = mrbt(d, m, seeds)
    decision = arbt_client_release(secrets, 1, 2, ReleaseLedger(m))
    raw = time_call(lambda: server_unify(y, 1, 2, decision.theta), repetitions, warmup)
    report.add(BenchRow.from_timings("5", "s10", widths[0], "unify", raw))
    return report


def experiment_6_7(report, ladder, k=7, repetitions=1, seed=1, max_iterations=100):
    """Random vs sequential initial centroids: iterations (6) and time (7)."""
    for label, n, a in ladder:
        d = gen_synthetic(n, a, 100.0, 100.0, seed)
        for init in ("random", "sequential"):
            cfg = KMeansConfig(k=k, init=init, max_iterations=max_iterations, rng_seed=seed)
            iters = []

            def run():
                iters.append(kmeans(d.values, cfg).iterations_used)

            raw = time_call(run, repetitions, warmup=0)
            report.add(BenchRow("6", label, n, init, repetitions, [], 0.0, 0.0, 0, statistics.fmean(iters)))
            report.add(BenchRow.from_timings("7", label, n, init, raw, statistics.fmean(iters)))
    return report


def warm_vs_cold(values_i, values_j, theta_ij, k, seed, max_iterations=100):
    """One paired run: cluster both subsets, then merge warm or re-cluster cold.

    ``values_i`` is still in its own frame; ``theta_ij`` moves it into the
    frame of ``values_j``.  Returns ``(warm, cold, warm_ms, cold_ms)``.
    """
    y = TransformedDataset(np.hstack([values_i, values_j]), (values_i.shape[1], values_j.shape[1]), (1, 2))
    cfg = KMeansConfig(k=k, init="random", max_iterations=max_iterations, rng_seed=seed)
    ci = kmeans(values_i, cfg)
    cj = kmeans(values_j, cfg)
    unified = server_unify(y, 1, 2, theta_ij)

    start = time.perf_counter()
    warm = warm_start_merge(ci, cj, unified, max_iterations)
    warm_ms = (time.perf_counter() - start) * 1e3
    start = time.perf_counter()
    cold = kmeans(unified.merged, cfg)
    cold_ms = (time.perf_counter() - start) * 1e3
    return warm, cold, warm_ms, cold_ms


def experiment_10(report, n=10 * LADDER_STEP, k=7, trials=5, seed=1):
    """Warm-start merge vs cold k-means on an ARBT-unified pair."""
    warm_ms, cold_ms, warm_it, cold_it = [], [], [], []
    for t in range(trials):
        d = gen_synthetic(n, 4, 100.0, 100.0, seed + t)
        y, secrets = mrbt(d, 2, derive_seeds(seed + t, 2))
        theta = arbt_client_release(secrets, 1, 2, ReleaseLedger(2)).theta
        warm, cold, w_ms, c_ms = warm_vs_cold(y.block(1), y.block(2), theta, k, seed + t)
        warm_ms.append(w_ms)
        cold_ms.append(c_ms)
        warm_it.append(warm.iterations_used)
        cold_it.append(cold.iterations_used)
    report.add(BenchRow.from_timings("10", "s10", n, "warm", warm_ms, statistics.fmean(warm_it)))
    report.add(BenchRow.from_timings("10", "s10", n, "cold", cold_ms, statistics.fmean(cold_it)))
    return report


EXPERIMENTS = ("1", "2", "3", "4", "5", "6", "7", "10")


def run_experiment(exp: str, repetitions: Optional[int] = None, ladder=None, seed: int = 1,
                   report: Optional[BenchReport] = None) -> BenchReport:
    if exp not in EXPERIMENTS:
        raise BenchError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    report = report if report is not None else BenchReport()
    ladder = ladder if ladder is not None else default_ladder()
    kw = {} if repetitions is None else {"repetitions": repetitions}
    if exp == "1":
        return experiment_1(report, ladder, seed=seed, **kw)
    if exp == "2":
        return experiment_2(report, seed=seed, **kw)
    if exp == "3":
        return experiment_3(report, seed=seed, **kw)
    if exp == "4":
        return experiment_4(report, seed=seed, **kw)
    if exp == "5":
        return experiment_5(report, seed=seed, **kw)
    if exp in ("6", "7"):
        return experiment_6_7(report, ladder, seed=seed, **kw)
    return experiment_10(report, seed=seed, **({} if repetitions is None else {"trials": repetitions}))
