"""Acceptance checks, one test per criterion.

Each test records its criterion name and a short measurement; the summary
hook in conftest prints one PASS/FAIL line per criterion at the end of the
run (``pytest tests/test_acceptance.py`` is enough, no ``-s`` needed).
"""

import itertools
import math
import time
import tracemalloc
from fractions import Fraction

import numpy as np
import pytest

from quor import GroupSample, brute_force_confidence, quor_confidence, quor_confidence_pair
from quor.baselines import holm_bonferroni, ks_test, t_test, u_test
from quor.binom import build_cache, interval_prob, lower_tail, upper_tail
from quor.core import OrderWitness, evaluate_witness
from quor.dataset import FeatureMatrix
from quor.evalharness import CVConfig, run_cv
from quor.ranking import baseline_rejections, rank_features, threshold_summary

from conftest import random_groups, separated


@pytest.fixture
def criterion(record_property):
    def note(name, detail=""):
        record_property("criterion", name)
        record_property("detail", detail)
        print(f"{name}: {detail}")

    return note


def _same_log(x, y, tol):
    if math.isinf(x) or math.isinf(y):
        return x == y
    return abs(x - y) <= tol


def test_oracle_equivalence(criterion):
    rng = np.random.default_rng(1)
    worst, mismatches, count = 0.0, 0, 0
    start = time.perf_counter()
    for n in (2, 3, 4):
        for _ in range(170):
            groups = random_groups(rng, n, m_max=8)
            fast = quor_confidence(groups).log_confidence
            slow = brute_force_confidence(groups).log_confidence
            count += 1
            if not _same_log(fast, slow, 1e-10):
                mismatches += 1
            elif math.isfinite(fast):
                worst = max(worst, abs(fast - slow))
    elapsed = time.perf_counter() - start
    criterion("C1 oracle equivalence",
              f"{count} instances, {mismatches} mismatches, max |diff| {worst:.1e}, {elapsed:.1f}s")
    assert count >= 500 and mismatches == 0 and elapsed < 30.0


def test_separated_closed_form(criterion):
    worst = 0.0
    for m in range(1, 21):
        low, high = separated(m)
        got = quor_confidence_pair(low, high).confidence
        worst = max(worst, abs(got - (1.0 - 2.0**-m) ** 2))
    low, high = separated(1)
    # direct product with the witness (0;1),(1;2): Pr(K <= 0) * Pr(K >= 1)
    direct = math.exp(evaluate_witness([low, high], OrderWitness(((0, 1), (1, 2)))))
    criterion("C2 separated-pair closed form", f"max |diff| {worst:.1e} for m=1..20, m=1 direct {direct}")
    assert worst <= 1e-12
    assert direct == 0.25 and quor_confidence_pair(low, high).confidence == 0.25


def test_cancellation_free_interval(criterion):
    worst_bracket = 0.0
    sizes = list(range(0, 41)) + list(range(50, 201, 25))
    for m in sizes:
        for q in (0.05, 0.25, 0.5, 0.75, 0.95):
            c = build_cache(m, q)
            for j in range(m + 2):
                up = upper_tail(c, j)
                for jp in range(m + 2):
                    bracket = max(0.0, lower_tail(c, jp) + up - 1.0)
                    worst_bracket = max(worst_bracket, abs(interval_prob(c, j, jp) - bracket))
    worst_exact = 0.0
    for m in range(0, 31):
        for q in (0.1, 0.25, 0.5, 0.75, 0.9):
            c = build_cache(m, q)
            qf = Fraction(q)
            prefix = [Fraction(0)]
            for k in range(m + 1):
                prefix.append(prefix[-1] + math.comb(m, k) * qf**k * (1 - qf) ** (m - k))
            for j in range(m + 2):
                for jp in range(j, m + 2):
                    exact = prefix[jp] - prefix[j]
                    worst_exact = max(worst_exact, abs(float(Fraction(interval_prob(c, j, jp)) - exact)))
    criterion("C3 cancellation-free interval",
              f"bracket max |diff| {worst_bracket:.1e} (m<=200), rational max |diff| {worst_exact:.1e} (m<=30)")
    assert worst_bracket <= 1e-12 and worst_exact <= 1e-13


def test_performance(criterion):
    rng = np.random.default_rng(2)
    a = GroupSample.from_unsorted(rng.normal(0.0, 1.0, 10_000), 0.5, "A")
    b = GroupSample.from_unsorted(rng.normal(0.1, 1.0, 10_000), 0.5, "B")
    build_cache.cache_clear()
    start = time.perf_counter()
    quor_confidence_pair(a, b)
    quor_confidence_pair(b, a)
    pair_ms = (time.perf_counter() - start) * 1e3

    def peak(m):
        groups = [GroupSample.from_unsorted(rng.normal(i * 0.1, size=m), 0.5) for i in range(3)]
        for g in groups:
            build_cache(g.m, g.q)
        tracemalloc.start()
        quor_confidence(groups)
        _, top = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        return top

    ratio = peak(2000) / peak(500)

    X = rng.normal(size=(20_000, 68))
    matrix = FeatureMatrix.from_array(X, ["case"] * 34 + ["ctrl"] * 34)
    start = time.perf_counter()
    ranking = rank_features(matrix, "quor")
    rank_s = time.perf_counter() - start
    criterion("C4 performance",
              f"m=10000 feature {pair_ms:.1f} ms (both directions, cold cache), "
              f"DP peak memory ratio m x4 -> {ratio:.2f}x, 20000x68 ranking {rank_s:.2f}s")
    assert pair_ms < 50.0
    assert ratio < 6.0
    assert len(ranking) == 20_000 and rank_s < 10.0


def _scores(ranking):
    return {e.feature_id: (e.score, e.direction, e.rank) for e in ranking}


def test_invariance_suite(criterion):
    rng = np.random.default_rng(3)
    checks, failures = 0, 0
    for _ in range(5):
        X = rng.normal(size=(60, 24))
        X[:10, 12:] += rng.uniform(0.5, 3.0, size=(10, 1))
        labels = ["A"] * 12 + ["B"] * 12
        base = _scores(rank_features(FeatureMatrix.from_array(X, labels), "quor"))
        for transform in (np.exp, lambda x: 2.0 * x + 7.0, lambda x: 1000.0 * x, np.arctan):
            other = _scores(rank_features(FeatureMatrix.from_array(transform(X), labels), "quor"))
            failures += other != base
            checks += 1
    for _ in range(300):
        a, b = random_groups(rng, 2, m_max=12)
        fwd = quor_confidence_pair(a, b).log_confidence
        na = GroupSample(-a.values[::-1], 1.0 - a.q, "A")
        nb = GroupSample(-b.values[::-1], 1.0 - b.q, "B")
        mirrored = quor_confidence_pair(nb, na).log_confidence
        general = quor_confidence([nb, na]).log_confidence
        failures += not (fwd == mirrored == general)
        checks += 1
    criterion("C5 invariance suite", f"{checks} exact checks (monotone, scaling, negate-and-swap), {failures} failed")
    assert failures == 0


def test_baseline_oracles(criterion):
    # a tie-free input is determined, up to monotone transforms, by which
    # pooled ranks belong to the first sample, so every arrangement is run
    cases, failures = 0, 0
    for total in range(2, 13):
        for na in range(1, total):
            placements = list(itertools.combinations(range(total), na))
            u_values = [sum(i > k for i in a_pos for k in range(total) if k not in a_pos) for a_pos in placements]
            for a_pos, u in zip(placements, u_values):
                lower = sum(v <= u for v in u_values)
                upper = sum(v >= u for v in u_values)
                oracle = min(1.0, 2.0 * min(lower, upper) / len(placements))
                a = [float(i) for i in a_pos]
                b = [float(k) for k in range(total) if k not in a_pos]
                res = u_test(a, b)
                failures += not (res.exact and res.statistic == u and res.p_value == pytest.approx(oracle, rel=1e-15, abs=0))
                cases += 1
    holm = holm_bonferroni([0.01, 0.04, 0.03])
    same = [1.0, 2.0, 3.0, 4.0]
    t_p, ks_d = t_test(same, same).p_value, ks_test(same, same).statistic
    criterion("C6 baseline oracles",
              f"{cases} exact U p-values vs enumeration, {failures} failed; Holm {holm.tolist()}; "
              f"identical samples t p={t_p}, ks D={ks_d}")
    assert failures == 0
    assert np.allclose(holm, [0.03, 0.06, 0.06], rtol=0, atol=1e-15)
    assert t_p == 1.0 and ks_d == 0.0


def test_cv_harness(criterion):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 30))
    X[:10, 15:] += 20.0
    separable = FeatureMatrix.from_array(X, ["neg"] * 15 + ["pos"] * 15)
    sep = run_cv(separable, CVConfig(seed=7))
    noise = FeatureMatrix.from_array(rng.normal(size=(200, 40)), ["a"] * 20 + ["b"] * 20)
    cfg = CVConfig(seed=11, repeats=5)
    noisy = run_cv(noise, cfg)
    again = run_cv(noise, cfg)
    sep_acc = {m: r.mean_accuracy for m, r in sep.methods.items()}
    noise_acc = {m: round(r.mean_accuracy, 3) for m, r in noisy.methods.items()}
    criterion("C7 CV harness", f"separable {sep_acc}, noise {noise_acc}, reproducible={noisy.to_json() == again.to_json()}")
    assert all(v == 1.0 for v in sep_acc.values()) and len(sep_acc) == 4
    assert all(0.35 <= r.mean_accuracy <= 0.65 for r in noisy.methods.values())
    assert noisy.to_json() == again.to_json()


def test_workflow_shape(criterion):
    # Published figures need the original datasets; only the workflow is checked.
    rng = np.random.default_rng(6)
    X = rng.normal(size=(500, 40))
    X[:15, 20:] += 3.0
    X[15:25, 20:] -= 3.0
    matrix = FeatureMatrix.from_array(X, ["ctrl"] * 20 + ["case"] * 20)
    summary = threshold_summary(rank_features(matrix, "quor"), 0.95)
    counts = baseline_rejections(matrix, summary["feature_ids"])
    planted = {f"f{i:03d}" for i in range(25)}
    criterion("C8 workflow shape (synthetic; published numbers not reproduced)",
              f"{summary['selected']} selected, {summary['by_direction']}, "
              f"t rejects {counts['t']['no_correction']['reject']} raw / {counts['t']['holm']['reject']} Holm")
    assert planted <= set(summary["feature_ids"])
    ranking = {e.feature_id: e.direction for e in rank_features(matrix, "quor")}
    assert all(ranking[f"f{i:03d}"] == "Q_ctrl<Q_case" for i in range(15))
    assert all(ranking[f"f{i:03d}"] == "Q_case<Q_ctrl" for i in range(15, 25))
    assert summary["by_direction"]["Q_ctrl<Q_case"] >= 15 and summary["by_direction"]["Q_case<Q_ctrl"] >= 10
    for method in ("t", "u"):
        raw, holm = counts[method]["no_correction"], counts[method]["holm"]
        assert raw["reject"] + raw["non_reject"] == summary["selected"]
        assert holm["reject"] <= raw["reject"]
