"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest

from stepal.exceptions import FormatError, ShapeMismatch, VersionError
from stepal.harness import ExperimentConfig, compare_strategies, results_csv, selections_csv, summary_csv
from stepal.learner import LinearModel, grad_check, infer
from stepal.manifest import decode, encode
from stepal.metrics import evaluate, report_from_confusion
from stepal.pool import DatasetPool
from stepal.step_repr import build_repr, global_average, index_sets, step_prototype
from stepal.synthgen import benchmark_suite, generate
from stepal.uncertainty import clip_entropy, softmax
from stepal.wkmeans import WeightedPoint, nearest_to_centers, weighted_kmeans

from conftest import make_video
from test_manifest import assert_pools_equal
from test_metrics import naive_scores
from test_wkmeans import plain_kmeans

RESULTS = []

AL_STRATEGIES = ["random", "entropy", "kmeans", "ewc", "me-kmeans", "stepal"]
AL_SEEDS = tuple(range(10))


def verdict(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def onehot_video(rng, vid, T, C, D):
    labels = rng.integers(0, C, size=T)
    logits = np.full((T, C), -5.0)
    logits[np.arange(T), labels] = 5.0
    return make_video(vid, rng.normal(size=(T, D)) * rng.uniform(0.01, 5), logits=logits), labels


def brute_force(X, w, k):
    """Vectorised exhaustive weighted k-means optimum over all k^n labelings."""
    n = X.shape[0]
    labelings = np.array(list(itertools.product(range(k), repeat=n)))
    total = np.zeros(len(labelings))
    for j in range(k):
        m = (labelings == j) * w  # (L, n)
        mass = m.sum(1)
        safe = np.where(mass > 0, mass, 1.0)
        centers = (m @ X) / safe[:, None]
        d2 = ((X[None, :, :] - centers[:, None, :]) ** 2).sum(-1)
        total += (m * d2).sum(1)
    return float(total.min())


@pytest.fixture(scope="module")
def al_comparison():
    cfg = ExperimentConfig(gen=benchmark_suite("default"), cycles=1, seeds=AL_SEEDS)
    start = time.perf_counter()
    cmp = compare_strategies(cfg, AL_STRATEGIES)
    return cfg, cmp, time.perf_counter() - start


def test_criterion_1_entropy_softmax():
    start = time.perf_counter()
    errs = [abs(clip_entropy(np.full(C, 1.0 / C), 1e-8) - math.log(C)) for C in (2, 4, 13)]
    hot = max(abs(clip_entropy(np.eye(C)[0], 1e-8)) for C in (2, 4, 13))
    rng = np.random.default_rng(1)
    shift = 0.0
    for _ in range(500):
        z = rng.uniform(-50, 50, size=rng.integers(2, 14))
        shift = max(shift, float(np.abs(softmax(z + rng.uniform(-100, 100)) - softmax(z)).max()))
    elapsed = time.perf_counter() - start
    ok = max(errs) < 1e-6 and hot <= 2e-8 and shift <= 1e-12 and elapsed < 1
    verdict(1, "entropy / softmax identities", ok, f"ln C err {max(errs):.1e}, one-hot {hot:.1e}, shift {shift:.1e}, {elapsed:.2f}s")


def test_criterion_2_step_repr():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    norm_ok = perm_ok = fallback_ok = True
    fallbacks = 0
    for i in range(1000):
        T, C, D = int(rng.integers(1, 51)), int(rng.integers(2, 14)), int(rng.integers(1, 65))
        video, labels = onehot_video(rng, f"v{i}", T, C, D)
        rep = build_repr(video, C)
        norms = rep.block_norms
        big = rep.raw_norms >= 1e-3
        norm_ok &= bool(np.all(norms <= 1.0) and np.all(norms[big] >= 1 - 1e-4))
        perm = rng.permutation(T)
        shuffled = make_video(f"v{i}", video.features[perm], logits=video.logits[perm])
        perm_ok &= np.array_equal(build_repr(shuffled, C).flattened, rep.flattened)
        sets = index_sets(video, C)
        g = global_average(video)
        for c in rep.fallback_steps:
            fallbacks += 1
            fallback_ok &= np.array_equal(step_prototype(video, sets, c), g)
            fallback_ok &= np.array_equal(rep.blocks[c], rep.blocks[rep.fallback_steps[0]])
            # the normalised block only up to rounding: norm reductions differ by an ulp
            fallback_ok &= bool(np.abs(rep.blocks[c] - g / (np.linalg.norm(g) + 1e-8)).max() <= 1e-15)
    elapsed = time.perf_counter() - start
    ok = norm_ok and perm_ok and fallback_ok and fallbacks > 0 and elapsed < 10
    verdict(2, "step-aware representation", ok, f"norms {norm_ok}, permutation {perm_ok}, fallback {fallback_ok} ({fallbacks} blocks), {elapsed:.2f}s")


def test_criterion_3_weighted_kmeans():
    start = time.perf_counter()
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 4))
        n = int(rng.integers(k, 9))
        X = rng.normal(size=(n, 2))
        w = rng.integers(1, 6, size=n).astype(float)
        pts = [WeightedPoint(f"p{i}", x, wi) for i, (x, wi) in enumerate(zip(X, w))]
        got = weighted_kmeans(pts, k, seed=seed, restarts=10).objective
        hits += got <= 1.05 * brute_force(X, w, k) + 1e-12

    uniform_gap = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        X = rng.normal(size=(15, 3))
        pts = [WeightedPoint(f"p{i}", x, 1.0) for i, x in enumerate(X)]
        ours = weighted_kmeans(pts, 3, seed=seed).objective
        uniform_gap = max(uniform_gap, abs(ours - plain_kmeans(X, 3, seed)))

    scale_ok = True
    for seed in range(20):
        rng = np.random.default_rng(200 + seed)
        X = rng.normal(size=(25, 4))
        w = rng.uniform(0.1, 2.0, size=25)
        picks = []
        for lam in (1.0, 0.5, 3.0):
            pts = [WeightedPoint(f"p{i:02d}", x, lam * wi) for i, (x, wi) in enumerate(zip(X, w))]
            model = weighted_kmeans(pts, 4, seed=seed)
            picks.append(nearest_to_centers(model, pts, {p.id for p in pts}))
        scale_ok &= picks[0] == picks[1] == picks[2]
    elapsed = time.perf_counter() - start
    ok = hits >= 95 and uniform_gap <= 1e-9 and scale_ok and elapsed < 30
    verdict(3, "weighted k-means oracle", ok, f"{hits}/100 within 5%, uniform gap {uniform_gap:.1e}, scaling {scale_ok}, {elapsed:.2f}s")


def test_criterion_4_gradient():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        C, D, n = int(rng.integers(2, 9)), int(rng.integers(1, 17)), int(rng.integers(1, 33))
        model = LinearModel(rng.normal(size=(C, D)), rng.normal(size=C))
        X = rng.normal(size=(n, D))
        y = rng.integers(0, C, size=n)
        worst = max(worst, grad_check(model, X, y, l2=float(rng.uniform(0, 0.01))))
    elapsed = time.perf_counter() - start
    verdict(4, "gradient check", worst < 1e-4 and elapsed < 5, f"max relative error {worst:.2e}, {elapsed:.2f}s")


def test_criterion_5_metrics():
    rng = np.random.default_rng(5)
    exact = 0
    for i in range(200):
        C = int(rng.integers(2, 10))
        n = int(rng.integers(1, 80))
        y = rng.integers(0, C, size=n)
        pred = rng.integers(0, C, size=n)
        # Features are one-hot predictions and W = I, so the model predicts ``pred``.
        video = make_video(f"t{i}", np.eye(C)[pred], steps=y)
        pool = DatasetPool.from_videos([video], C)
        r = evaluate(pool, LinearModel(np.eye(C), np.zeros(C)))
        exact += (r.accuracy, r.macro_precision, r.macro_recall, r.macro_jaccard) == naive_scores(y, pred, C)
    hand = report_from_confusion([[3, 1], [2, 4]])
    ok = exact == 200 and abs(hand.accuracy - 0.7) < 1e-9 and abs(hand.macro_jaccard - 0.5357142857142857) < 1e-9
    verdict(5, "metrics oracle", ok, f"{exact}/200 exact, [[3,1],[2,4]] acc {hand.accuracy}, mJ {hand.macro_jaccard:.10f}")


def test_criterion_6_stepal_beats_baselines(al_comparison):
    _, cmp, elapsed = al_comparison
    means = {s: cmp.mean_metric(s, 1) for s in AL_STRATEGIES}
    stepal, random_ = cmp.per_seed("stepal", 1), cmp.per_seed("random", 1)
    wins = sum(stepal[k] > random_[k] for k in AL_SEEDS)
    gap = means["stepal"] - means["random"]
    ok = (
        gap >= 0.02
        and all(means["stepal"] >= means[s] for s in ("entropy", "kmeans", "ewc"))
        and wins >= 8
        and not cmp.errors
        and elapsed < 300
    )
    table = ", ".join(f"{s} {means[s]:.4f}" for s in AL_STRATEGIES)
    verdict(6, "step-aware selection beats baselines at r=1", ok, f"{table}; gap {gap * 100:.2f} pts, wins {wins}/10, {elapsed:.1f}s")


def test_criterion_7_ablation_order(al_comparison):
    _, cmp, _ = al_comparison
    m = {s: cmp.mean_metric(s, 1) for s in ("me-kmeans", "kmeans", "stepal", "ewc")}
    ok = m["me-kmeans"] >= m["kmeans"] and m["stepal"] >= m["ewc"]
    verdict(7, "ablation ordering at r=1", ok, ", ".join(f"{s} {v:.4f}" for s, v in m.items()))


def test_criterion_8_determinism(al_comparison):
    cfg, first, _ = al_comparison
    start = time.perf_counter()
    again = compare_strategies(cfg, AL_STRATEGIES)
    parallel = compare_strategies(ExperimentConfig(**{**cfg.__dict__, "workers": 2}), AL_STRATEGIES)
    elapsed = time.perf_counter() - start

    def csvs(c):
        return results_csv(c.reports), summary_csv(c), selections_csv(c.reports)

    same = csvs(first) == csvs(again) == csvs(parallel)
    verdict(8, "byte-identical CSVs across runs and worker counts", same, f"3 runs (workers 1, 1, 2), {elapsed:.1f}s")


def test_criterion_9_manifest():
    pool = generate(benchmark_suite("default"))
    pool = pool.with_states(pool.ids[:12])
    rng = np.random.default_rng(9)
    pool = infer(LinearModel(rng.normal(size=(8, 32)), rng.normal(size=8)), pool, ids=pool.ids[:60])
    data = encode(pool)
    back = decode(data)
    try:
        assert_pools_equal(back, pool)
        round_trip = len(back) == 120
    except AssertionError:
        round_trip = False

    errors = {}
    try:
        decode(data[: len(data) - 100])
    except ShapeMismatch as exc:
        errors["truncated"] = exc.offset is not None
    bumped = bytearray(data)
    bumped[4] = 2
    try:
        decode(bytes(bumped))
    except VersionError as exc:
        errors["version"] = exc.offset == 4
    try:
        decode(b"XXXX" + data[4:])
    except FormatError:
        errors["magic"] = True
    ok = round_trip and errors == {"truncated": True, "version": True, "magic": True}
    verdict(9, "manifest round trip and corruption errors", ok, f"{len(data)} bytes, round trip {round_trip}, errors {errors}")
