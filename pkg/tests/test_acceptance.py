"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the measured
numbers; the assertions alone carry the gate.  The end-to-end criterion
compares against tests/baselines/e2e_baseline.json, regenerated via
scripts/refresh_baseline.py when the pipeline intentionally changes.
"""

import json
import time
from itertools import product
from math import ceil, comb, log2
from pathlib import Path

import numpy as np
import pytest

from densecsp.cli import effective_degree
from densecsp.decide import decide_csp
from densecsp.exact import brute_opt
from densecsp.instances import (
    KcspInstance,
    gen_planted_nae3,
    gen_random_nae3,
    val_assignment,
)
from densecsp.localdist import (
    from_global,
    pd_check,
    pd_condition,
    pd_fix,
    pd_val,
    uniform_pd,
)
from densecsp.relaxation import build_sa_lp, lp_to_pd, solve_lp
from densecsp.rounding import (
    RoundingConfig,
    bounded_increase_check,
    count_fixable,
    delta_transfer_diag,
    lp_class_values,
    round_pd,
    scale_of,
    threshold_candidates,
)
from densecsp.twosat import (
    induce_2sat,
    kprt_round,
    metric_check,
    pd_to_metric,
    twosat_brute,
    twosat_val,
    twosat_violations,
)
from densecsp.instances import UNFIXED

BASELINE = Path(__file__).parent / "baselines" / "e2e_baseline.json"


# ---------------------------------------------------------------- fixtures


@pytest.fixture(scope="module")
def lp_suite():
    """200 seeded complete instances with solved and decoded relaxations."""
    rows = []
    for seed in range(200):
        n = 6 + seed % 7
        degree = 4 if (n <= 9 and seed % 2 == 0) else 3
        inst = gen_random_nae3(n, seed)
        prob = build_sa_lp(inst, degree)
        sol = solve_lp(prob)
        mu = lp_to_pd(prob, sol)
        _, opt = brute_opt(inst)
        rows.append({"inst": inst, "degree": degree, "sol": sol, "mu": mu, "opt": opt})
    return rows


def planted_state(n, seed, w_size, flip_weight=1 / 128, flips=3):
    """A rounding state: satisfiable instance, dyadic family, integral rest.

    The family mixes the planted assignment with single-bit flips of
    variables inside the window, so every variable outside it is integral
    and the violation level stays near flips * flip_weight.
    """
    pl = gen_planted_nae3(n, 0.0, seed)
    rng = np.random.default_rng(seed + 10_000)
    W = np.sort(rng.choice(n, size=w_size, replace=False))
    flip_vars = rng.choice(W, size=flips, replace=False)
    points = [pl.planted]
    for v in flip_vars:
        q = pl.planted.copy()
        q[v] ^= 1
        points.append(q)
    weights = np.array([1 - flips * flip_weight] + [flip_weight] * flips)
    mu = from_global(n, 3, np.array(points, dtype=np.uint8), weights)
    return pl.instance, mu, W


@pytest.fixture(scope="module")
def threshold_states():
    states = []
    sizes = (8, 10, 12, 14)
    for seed in range(25):
        for n in sizes:
            w_size = n if seed % 2 == 0 else n - 2
            inst, mu, W = planted_state(n, seed * 4 + sizes.index(n), w_size)
            tau = scale_of(n, 2.0) ** 2
            delta = pd_val(inst, mu, W)
            assert delta <= 1 / (10 * tau), "construction must stay near-satisfiable"
            states.append((inst, mu, W, tau, delta))
    return states


def random_kcsp(n, k, seed, p_zero=0.35):
    rng = np.random.default_rng(seed)
    m = comb(n, k)
    tables = (rng.random((m, 2**k)) > p_zero).astype(np.uint8)
    rows = np.where(tables.sum(axis=1) == 2**k)[0]
    tables[rows, rng.integers(0, 2**k, size=rows.size)] = 0
    return KcspInstance.create(n, k, tables)


def enumerate_satisfiable(inst):
    """Vectorized exhaustive check, independent of the decision procedure."""
    from densecsp.subsets import assignment_index, subset_array

    n, k = inst.n, inst.k
    idx = np.arange(1 << n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    subs = subset_array(n, k)
    cols = assignment_index(bits[:, subs])  # (2^n, m)
    sat = inst.tables[np.arange(inst.m)[None, :], cols].all(axis=1)
    return bool(sat.any()), int(sat.sum())


@pytest.fixture(scope="module")
def decide_suite():
    """Verdict comparisons and survivor statistics for criteria 7 and 8."""
    rows = []
    for i in range(300):
        n = 5 + i % 8  # 5..12
        inst = random_kcsp(n, 3, 20_000 + i, p_zero=0.25 + 0.2 * ((i // 8) % 3))
        res = decide_csp(inst)
        truth, _ = enumerate_satisfiable(inst)
        rows.append(
            {
                "k": 3,
                "n": n,
                "verdict": res.satisfiable,
                "truth": truth,
                "survivors": res.survivor_counts,
            }
        )
    for i in range(100):
        n = (12, 14, 16)[i % 3]
        inst = random_kcsp(n, 2, 40_000 + i, p_zero=0.12)
        res = decide_csp(inst)
        truth, _ = enumerate_satisfiable(inst)
        rows.append(
            {
                "k": 2,
                "n": n,
                "verdict": res.satisfiable,
                "truth": truth,
                "survivors": res.survivor_counts,
            }
        )
    return rows


@pytest.fixture(scope="module")
def e2e_rows():
    rows = []
    for n, p, seed in product((20, 30, 40), (0.01, 0.05), (0, 1)):
        inst = gen_planted_nae3(n, p, seed).instance
        degree = effective_degree(n, 6, 400_000)
        t0 = time.perf_counter()
        prob = build_sa_lp(inst, degree)
        sol = solve_lp(prob)
        mu = lp_to_pd(prob, sol)
        cfg = RoundingConfig.for_instance(n, seed=seed)
        alpha, trace = round_pd(inst, mu, cfg)
        wall = time.perf_counter() - t0
        val = val_assignment(inst, alpha)
        ratio = val / max(sol.objective, 1.0 / inst.m)
        rows.append(
            {
                "n": n,
                "p": p,
                "seed": seed,
                "degree_effective": degree,
                "lp": sol.objective,
                "val": val,
                "ratio": ratio,
                "stages": trace.depth,
                "wall_time_s": wall,
            }
        )
    return rows


# ---------------------------------------------------------------- criteria


def test_c01_relaxation_soundness(lp_suite):
    worst = max(r["sol"].objective - r["opt"] for r in lp_suite)
    for r in lp_suite:
        assert r["sol"].objective <= r["opt"] + 1e-6
    print(f"C01 relaxation-soundness: PASS (200 instances, worst LP-OPT slack {worst:.3e})")


def test_c02_pseudodistribution_algebra(lp_suite):
    for r in lp_suite:
        assert pd_check(r["mu"]).passed(1e-6)

    # exact dyadic fixtures for the algebraic identities
    checked = 0
    for seed in range(100):
        n = 5 + seed % 4
        rng = np.random.default_rng(seed)
        size = int(rng.integers(2, 7))
        points = rng.integers(0, 2, size=(size, n)).astype(np.uint8)
        cuts = np.sort(rng.integers(1, 64, size=size - 1))
        weights = np.diff(np.concatenate([[0], cuts, [64]])) / 64
        mu = from_global(n, 4, points, weights)

        v = int(rng.integers(0, n))
        p1 = float(mu.singles()[v, 1])
        if min(p1, 1 - p1) > 1e-9:
            mu0 = pd_condition(mu, (v,), (0,))
            mu1 = pd_condition(mu, (v,), (1,))
            probe = tuple(sorted(rng.choice([u for u in range(n) if u != v], 2, replace=False)))
            mixed = (1 - p1) * mu0.local(probe) + p1 * mu1.local(probe)
            assert np.abs(mixed - mu.local(probe)).max() <= 1e-9

        fix_vars = tuple(sorted(int(u) for u in rng.choice(n, 2, replace=False)))
        bits = rng.integers(0, 2, size=2)
        fixed = pd_fix(mu, fix_vars, bits)
        others = [u for u in range(n) if u not in fix_vars]
        assert np.abs(fixed.singles()[others] - mu.singles()[others]).max() <= 1e-9
        checked += 1
    assert checked == 100
    print("C02 pseudodistribution-algebra: PASS (200 decodes at 1e-6, 100 exact fixtures at 1e-9)")


def test_c03_threshold_exists(threshold_states):
    checked = 0
    for inst, mu, W, tau, delta in threshold_states:
        cands = threshold_candidates(mu, W, tau, delta)
        assert len(cands) <= len(W) + 3
        assert any(
            bounded_increase_check(inst, mu, W, theta, tau, delta, 2.0) for theta in cands
        ), f"no passing threshold among {len(cands)} candidates"
        checked += 1
    print(f"C03 threshold-existence: PASS ({checked} states, zero failures)")


def test_c04_transfer_diagnostics(threshold_states):
    checked = 0
    for inst, mu, W, tau, delta in threshold_states:
        lpv = lp_class_values(inst, mu, W)
        cap3 = lpv.lp3 + 6 * tau * delta * comb(len(W), 3)
        for theta in threshold_candidates(mu, W, tau, delta):
            assert theta <= 0.2 + 1e-12  # 2*tau*delta <= 1/5 by construction
            D = delta_transfer_diag(inst, mu, W, theta, tau)
            assert D[1, 0] <= 2 * lpv.lp1 + 1e-9
            assert D[2, 0] <= 2 * lpv.lp2 + 1e-9
            for i in range(4):
                assert D[3, i] <= cap3 + 1e-9
            checked += 1
    print(f"C04 transfer-diagnostics: PASS ({checked} (state, threshold) pairs, zero violations)")


def test_c05_fixable_count():
    checked = 0
    for seed in range(30):
        # two-point complement support: satisfiable, so xi sits at the floor
        pl = gen_planted_nae3(10 + (seed % 3) * 2, 0.0, 500 + seed)
        n = pl.instance.n
        points = np.array([pl.planted, 1 - pl.planted], dtype=np.uint8)
        mu = from_global(n, 3, points, np.array([0.5, 0.5]))
        W = np.arange(n)
        xi = max(pd_val(pl.instance, mu, W), 1e-6)
        assert xi <= 0.25
        got = count_fixable(pl.instance, mu, W, 2 * xi, 1 / 12, 1 / 24)
        assert got >= ceil(len(W) / 24)
        checked += 1
    for seed in range(20):
        inst, mu, W = planted_state(10 + (seed % 3) * 2, 700 + seed, 10 + (seed % 3) * 2)
        xi = max(pd_val(inst, mu, W), 1e-6)
        assert xi <= 0.25
        got = count_fixable(inst, mu, W, 2 * xi, 1 / 12, 1 / 24)
        assert got >= ceil(len(W) / 24)
        checked += 1
    for seed in range(10):
        # LP decodes of random instances: non-dyadic, val well under 1/4
        inst = gen_random_nae3(8, 800 + seed)
        prob = build_sa_lp(inst, 3)
        mu = lp_to_pd(prob, solve_lp(prob))
        W = np.arange(8)
        xi = max(pd_val(inst, mu, W), 1e-6)
        if xi > 0.25:
            continue
        got = count_fixable(inst, mu, W, 2 * xi, 1 / 12, 1 / 24)
        assert got >= ceil(len(W) / 24)
        checked += 1
    assert checked >= 50
    print(f"C05 fixable-count: PASS ({checked} families, all at least |W|/24)")


def test_c06_min2sat_pipeline():
    feasible_checked = 0
    constant_worst = 0.0
    bounded_checked = 0
    for seed in range(40):
        n = 8 + seed % 3
        pl = gen_planted_nae3(n, 0.0, 1_500 + seed)
        rng = np.random.default_rng(seed)
        n_fixed = int(rng.integers(2, 5))
        fixed = np.sort(rng.choice(n, size=n_fixed, replace=False))
        W = [v for v in range(n) if v not in fixed]
        alpha = np.full(n, UNFIXED)
        alpha[fixed] = pl.planted[fixed].astype(float)

        ts = induce_2sat(pl.instance, W, alpha)
        if seed % 2 == 0:
            points = np.array([pl.planted, 1 - pl.planted], dtype=np.uint8)
            mu = from_global(n, 3, points, np.array([0.5, 0.5]))
        else:
            mu = uniform_pd(n, 3)

        met = pd_to_metric(ts, mu)
        assert metric_check(met).passed(1e-9)
        assert met.objective <= ts.num_clauses * twosat_val(ts, mu) + 1e-12
        feasible_checked += 1

        if ts.num_clauses == 0:
            continue
        out = kprt_round(ts, met, np.random.default_rng(seed))
        assert out.shape == (ts.m,)
        assert set(np.unique(out)) <= {0, 1}

    # quantitative bound on purpose-built small instances (clause count <= 12)
    from densecsp.twosat import TwoSatInstance

    for seed in range(25):
        rng = np.random.default_rng(9_000 + seed)
        n_vars = int(rng.integers(3, 7))
        n_cl = int(rng.integers(2, 13))
        rows = []
        for _ in range(n_cl):
            v, w = np.sort(rng.choice(n_vars, size=2, replace=False))
            rows.append((v, w, rng.integers(0, 2), rng.integers(0, 2)))
        ts = TwoSatInstance.create(n_vars, np.array(rows, dtype=np.int64))

        size = int(rng.integers(2, 6))
        points = rng.integers(0, 2, size=(size, n_vars)).astype(np.uint8)
        cuts = np.sort(rng.integers(1, 64, size=size - 1))
        weights = np.diff(np.concatenate([[0], cuts, [64]])) / 64
        mu = from_global(n_vars, 3, points, weights)

        met = pd_to_metric(ts, mu)
        assert metric_check(met).passed(1e-9)
        assert met.objective <= ts.num_clauses * twosat_val(ts, mu) + 1e-12
        out = kprt_round(ts, met, np.random.default_rng(seed))
        got = twosat_violations(ts, out)
        _, best = twosat_brute(ts)
        scale = log2(2 * ts.num_clauses) ** 2 * (best + 1)
        assert got <= 10 * scale
        constant_worst = max(constant_worst, got / scale)
        bounded_checked += 1
    assert feasible_checked == 40
    assert bounded_checked == 25
    print(
        f"C06 min-2sat: PASS ({feasible_checked} metrics exact at 1e-9, "
        f"{bounded_checked} small instances, measured constant {constant_worst:.3f} <= 10)"
    )


def test_c07_decision_equivalence(decide_suite):
    k3 = [r for r in decide_suite if r["k"] == 3]
    k2 = [r for r in decide_suite if r["k"] == 2]
    assert len(k3) >= 300 and len(k2) >= 100
    disagreements = sum(r["verdict"] != r["truth"] for r in decide_suite)
    assert disagreements == 0

    inst = KcspInstance.from_nae(gen_random_nae3(50, 0))
    t0 = time.perf_counter()
    decide_csp(inst)
    dt = time.perf_counter() - t0
    assert dt <= 1.0
    print(
        f"C07 decision-equivalence: PASS ({len(k3)} 3-CSP + {len(k2)} 2-CSP verdicts agree, "
        f"n=50 decide in {dt * 1000:.0f} ms)"
    )


def test_c08_survivor_growth(decide_suite):
    worst = 0.0
    for r in decide_suite:
        k = r["k"]
        for step, count in enumerate(r["survivors"], start=k):
            ratio = count / step ** (k - 1)
            worst = max(worst, ratio)
            assert count <= 64 * step ** (k - 1)
    print(f"C08 survivor-growth: PASS (max survivors / i^(k-1) = {worst:.2f} <= 64)")


def test_c09_end_to_end_regression(e2e_rows):
    for row in e2e_rows:
        expected_degree = {20: 4, 30: 3, 40: 3}[row["n"]]
        assert row["degree_effective"] == expected_degree
        assert row["stages"] <= row["n"]
    median = float(np.median([r["ratio"] for r in e2e_rows]))
    baseline = json.loads(BASELINE.read_text())
    allowed = baseline["median_ratio"] * 1.25
    assert median <= allowed, f"median ratio {median:.4f} exceeds baseline allowance {allowed:.4f}"
    total_wall = sum(r["wall_time_s"] for r in e2e_rows)
    print(
        f"C09 end-to-end: PASS (12 runs, median ratio {median:.4f} vs baseline "
        f"{baseline['median_ratio']:.4f}, total {total_wall / 60:.1f} min)"
    )


def test_c10_small_scale_exactness():
    checked = 0
    for n in (6, 8, 10, 12, 13, 14):
        for seed in (0, 1):
            inst = gen_random_nae3(n, 3_000 + n * 10 + seed)
            prob = build_sa_lp(inst, 3)
            mu = lp_to_pd(prob, solve_lp(prob))
            cfg = RoundingConfig.for_instance(n, seed=seed)
            alpha, trace = round_pd(inst, mu, cfg)
            _, opt = brute_opt(inst)
            assert val_assignment(inst, alpha) == opt
            assert trace.stages[-1].branch == "bruteforce"
            checked += 1
    print(f"C10 small-scale-exactness: PASS ({checked} pipeline runs equal the optimum exactly)")
