"""Exit criteria of the toolkit, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
Timing criteria compare ratios and shapes, never absolute milliseconds.
"""

import random
import statistics
import time

import numpy as np
import pytest

from ppcd import bench
from ppcd.clustering import KMeansConfig, kmeans, label_agreement
from ppcd.dataset import Dataset, gen_blobs, gen_synthetic
from ppcd.ledger import ReleaseLedger, difference_rank
from ppcd.rotation import apply, build_rotation, compose
from ppcd.transform import (TransformedDataset, arbt_client_release, derive_seeds, inner_product_blocks, mrbt,
                            server_unify)

from test_ledger import row_reduce_rank

CENTERS = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]


def dist_matrix(values):
    diff = values.T[:, None, :] - values.T[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def detail(request, text):
    request.node.acceptance_detail = text


@pytest.mark.acceptance(1, "isometry: 1000 random RBT instances keep all distances within 1e-9 relative, < 10 s")
def test_isometry_suite(request):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        a = int(rng.choice([2, 4, 6, 10]))
        n = int(rng.integers(2, 201))
        x = rng.normal(scale=rng.uniform(0.1, 100), size=(a, n))
        y = apply(build_rotation(rng.uniform(0, 360), a), x)
        before, after = dist_matrix(x), dist_matrix(y)
        off = ~np.eye(n, dtype=bool)
        rel = np.abs(after[off] - before[off]) / before[off]
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - start
    detail(request, f"max rel err {worst:.2e}, {elapsed:.1f} s")
    assert worst <= 1e-9
    assert elapsed < 10


@pytest.mark.acceptance(2, "composition: 1000 angle pairs, f(t1) f(t2) == f((t1+t2) mod 360) within 1e-12")
def test_composition_suite(request):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        t1, t2 = rng.uniform(0, 360, 2)
        dim = int(rng.choice([2, 4, 6, 10]))
        target = build_rotation((t1 + t2) % 360, dim).matrix
        dense = build_rotation(t1, dim).matrix @ build_rotation(t2, dim).matrix
        composed = compose(build_rotation(t1, dim), build_rotation(t2, dim)).matrix
        worst = max(worst, np.abs(dense - target).max(), np.abs(composed - target).max())
    detail(request, f"max abs err {worst:.2e}")
    assert worst <= 1e-12


@pytest.mark.acceptance(3, "unification: 50 MRBT instances, every accepted pair restores plaintext distances")
def test_unification_equivalence(request):
    rng = np.random.default_rng(3)
    released = witnesses = 0
    worst = 0.0
    for inst in range(50):
        m = int(rng.integers(2, 9))
        a = int(rng.choice([2, 4, 6]))
        c = a + 1 + int(rng.integers(0, 20))
        d = Dataset(rng.normal(size=(a, m * c)))
        y, secrets = mrbt(d, m, derive_seeds(inst, m))
        ledger = ReleaseLedger(m)
        plain_blocks = {i + 1: d.values[:, i * c:(i + 1) * c] for i in range(m)}
        for _ in range(3 * m):
            i, j = (int(v) for v in rng.choice(np.arange(1, m + 1), 2, replace=False))
            decision = arbt_client_release(secrets, i, j, ledger)
            if not decision.granted:
                continue
            released += 1
            plain = dist_matrix(np.hstack([plain_blocks[i], plain_blocks[j]]))
            raw = dist_matrix(np.hstack([y.block(i), y.block(j)]))
            if np.abs(raw[:c, c:] - plain[:c, c:]).max() > 1e-6:
                witnesses += 1
            unified = dist_matrix(server_unify(y, i, j, decision.theta).merged)
            off = ~np.eye(2 * c, dtype=bool)
            worst = max(worst, float((np.abs(unified - plain)[off] / plain[off]).max()))
    # a constructed witness: identical records in two blocks rotated 0 and 90 degrees apart
    x = np.zeros((2, 6))
    x[0, 0] = x[0, 3] = 1.0
    from ppcd.transform import transform_values
    t = transform_values(x, [0.0, 90.0], [3, 3])
    constructed = np.linalg.norm(t[:, 0] - t[:, 3]) - np.linalg.norm(x[:, 0] - x[:, 3])
    detail(request, f"{released} releases, {witnesses} cross-subset witnesses, max rel err {worst:.2e}")
    assert constructed > 1.0
    assert witnesses > 0
    assert released >= 50 and worst <= 1e-9


@pytest.mark.acceptance(4, "clustering equivalence: 20 blob datasets, plaintext vs ARBT-unified agreement 1.0")
def test_clustering_equivalence(request):
    agreements = []
    for seed in range(20):
        d, _ = gen_blobs(CENTERS, 100, seed=100 + seed)
        y, secrets = mrbt(d, 2, derive_seeds(seed, 2))
        theta = arbt_client_release(secrets, 1, 2, ReleaseLedger(2)).theta
        unified = server_unify(y, 1, 2, theta)
        cfg = KMeansConfig(k=3, init="random", rng_seed=seed)
        plain = kmeans(d.values, cfg)
        rotated = kmeans(unified.merged, cfg)
        agreements.append(label_agreement(plain, rotated))
    detail(request, f"min agreement {min(agreements)}")
    assert all(a == 1.0 for a in agreements)


@pytest.mark.acceptance(5, "ledger policy: triangle refused; 1000 random sequences per m keep a forest, rank < m")
def test_ledger_policy(request):
    ledger = ReleaseLedger(3)
    assert ledger.can_release(1, 2)[0]
    ledger.record_release(1, 2, 1.0)
    assert ledger.can_release(1, 3)[0]
    ledger.record_release(1, 3, 2.0)
    ok, reason = ledger.can_release(2, 3)
    assert not ok and "cycle" in reason

    rnd = random.Random(5)
    sequences = 0
    for m in range(3, 11):
        for _ in range(1000):
            ledger = ReleaseLedger(m)
            for _ in range(2 * m):
                i, j = rnd.sample(range(1, m + 1), 2)
                if ledger.can_release(i, j)[0]:
                    ledger.record_release(i, j, rnd.uniform(0, 360))
            edges = list(ledger.edges)
            assert len(edges) <= m - 1
            assert difference_rank(m, edges) == len(edges)  # no cycle: every edge independent
            assert ledger.attacker_rank() < m
            sequences += 1
        assert row_reduce_rank(m, edges) == len(edges)
    detail(request, f"{sequences} sequences")


@pytest.mark.acceptance(6, "block-Gram: diagonal blocks of Y_A^T Y_B match plaintext within 1e-9, 100 instances")
def test_block_gram(request):
    rng = np.random.default_rng(6)
    worst = 0.0
    for inst in range(100):
        m = int(rng.integers(1, 6))
        a = int(rng.choice([2, 4, 6]))
        c = a + 1 + int(rng.integers(0, 10))
        A = Dataset(rng.normal(size=(a, m * c)))
        B = Dataset(rng.normal(size=(a, m * c)))
        seeds = derive_seeds(inst, m)
        ya, _ = mrbt(A, m, seeds)
        yb, _ = mrbt(B, m, seeds)
        gram = inner_product_blocks(ya, yb)
        for i in range(m):
            plain = A.values[:, i * c:(i + 1) * c].T @ B.values[:, i * c:(i + 1) * c]
            scale = np.abs(plain).max()
            worst = max(worst, float(np.abs(gram[i][i] - plain).max() / scale))
    detail(request, f"max rel err {worst:.2e}")
    assert worst <= 1e-9


@pytest.mark.acceptance(7, "linearity: RBT time over the 15-step ladder fits a line with R^2 >= 0.95, < 2 min")
def test_linearity(request):
    start = time.perf_counter()
    report = bench.experiment_1(bench.BenchReport(), bench.default_ladder(), repetitions=50)
    rows = report.find("1", "rbt")
    _, _, r2 = bench.linear_fit([r.n for r in rows], [r.mean_ms for r in rows])
    elapsed = time.perf_counter() - start
    detail(request, f"R^2 = {r2:.4f}, {elapsed:.1f} s")
    assert r2 >= 0.95
    assert elapsed < 120


@pytest.mark.acceptance(8, "MRBT overhead: n=31250, m=100, 50 filtered reps, MRBT < 1.10 x RBT")
def test_mrbt_overhead(request):
    report = bench.experiment_3(bench.BenchReport(), n=31_250, m=100, repetitions=50)
    ratio = bench.overhead(report, "3")
    detail(request, f"overhead {100 * ratio:.2f}%")
    assert ratio < 0.10


@pytest.mark.acceptance(9, "warm start: <= cold iterations in >= 80% of 50 trials, median time saving >= 10%")
def test_warm_start_benefit(request):
    not_worse, savings = 0, []
    for seed in range(50):
        d, _ = gen_blobs(CENTERS, 1000, seed=900 + seed)
        y, secrets = mrbt(d, 2, derive_seeds(seed, 2))
        theta = arbt_client_release(secrets, 1, 2, ReleaseLedger(2)).theta
        warm, cold, warm_ms, cold_ms = bench.warm_vs_cold(y.block(1), y.block(2), theta, k=3, seed=seed)
        not_worse += warm.iterations_used <= cold.iterations_used
        savings.append(1 - warm_ms / cold_ms)
    median_saving = statistics.median(savings)
    detail(request, f"{not_worse}/50 trials not worse, median saving {100 * median_saving:.1f}%")
    assert not_worse >= 40
    assert median_saving >= 0.10


@pytest.mark.acceptance(10, "synthetic 10^6 x 10, mu = var = 100: moments in range, MRBT overhead < 5%, < 60 s")
def test_synthetic_generator(request):
    start = time.perf_counter()
    d = gen_synthetic(10**6, 10, 100.0, 100.0, seed=4)
    mean, var = float(d.values.mean()), float(d.values.var())
    report = bench.experiment_4(bench.BenchReport(), m=100, repetitions=10, data=d)
    ratio = bench.overhead(report, "4")
    total_rbt = report.find("4", "rbt")[0].mean_ms
    elapsed = time.perf_counter() - start
    detail(request, f"mean {mean:.3f}, var {var:.3f}, RBT {total_rbt:.1f} ms, overhead {100 * ratio:.2f}%, "
                    f"{elapsed:.1f} s")
    assert 99 <= mean <= 101
    assert 95 <= var <= 105
    assert ratio < 0.05
    assert elapsed < 60


@pytest.mark.acceptance(11, "outlier filter: the three tabulated examples")
def test_outlier_examples():
    filtered, count = bench.outlier_filter([20, 21, 20, 200])
    assert count == 1 and filtered[:3] == [20, 21, 20] and filtered[3] == pytest.approx(61 / 3)
    assert bench.outlier_filter([7, 7, 7, 7]) == ([7, 7, 7, 7], 0)
    assert bench.outlier_filter([1, 1, 1, 3]) == ([1, 1, 1, 3], 0)
