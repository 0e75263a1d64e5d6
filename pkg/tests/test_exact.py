from itertools import product
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densecsp.errors import InputError
from densecsp.exact import (
    brute_opt,
    completion_opt,
    instance_hash,
    ratio_report,
)
from densecsp.instances import (
    UNFIXED,
    gen_planted_nae3,
    gen_random_nae3,
    val_assignment,
)


def naive_opt(inst):
    best_val, best = 2.0, None
    for bits in product((0, 1), repeat=inst.n):
        alpha = np.array(bits, dtype=np.uint8)
        v = val_assignment(inst, alpha)
        if v < best_val:
            best_val, best = v, alpha
    return best, best_val


@given(st.integers(min_value=4, max_value=7), st.integers(min_value=0, max_value=10**6))
@settings(max_examples=25)
def test_brute_opt_matches_naive_scan(n, seed):
    inst = gen_random_nae3(n, seed)
    got_alpha, got = brute_opt(inst)
    want_alpha, want = naive_opt(inst)
    assert got == want
    # itertools.product counts up with the first variable as MSB, matching
    # the lex-smallest tie-break contract
    assert np.array_equal(got_alpha, want_alpha)


def test_planted_zero_gives_opt_zero():
    pl = gen_planted_nae3(10, 0.0, 1)
    _, opt = brute_opt(pl.instance)
    assert opt == 0.0


def test_opt_bounded_by_planted_value():
    for seed in range(5):
        pl = gen_planted_nae3(9, 0.25, seed)
        _, opt = brute_opt(pl.instance)
        assert opt <= pl.violated_count / pl.instance.m


def test_complement_symmetry_of_value():
    for seed in range(50):
        inst = gen_random_nae3(np.random.default_rng(seed).integers(4, 11), seed)
        alpha, opt = brute_opt(inst)
        assert val_assignment(inst, 1 - alpha) == opt


def test_completion_with_nothing_unfixed_returns_input():
    inst = gen_random_nae3(6, 3)
    alpha = np.array([1, 0, 0, 1, 1, 0], dtype=float)
    got, v = completion_opt(inst, alpha)
    assert np.array_equal(got, alpha.astype(np.uint8))
    assert v == val_assignment(inst, got)


def test_completion_with_everything_unfixed_is_brute_opt():
    inst = gen_random_nae3(7, 11)
    free = np.full(7, UNFIXED)
    got, v = completion_opt(inst, free)
    ref, opt = brute_opt(inst)
    assert v == opt
    assert np.array_equal(got, ref)


def test_completion_matches_filtered_scan():
    inst = gen_random_nae3(12, 5)
    rng = np.random.default_rng(8)
    alpha = np.full(12, UNFIXED)
    fixed = rng.choice(12, size=6, replace=False)
    alpha[fixed] = rng.integers(0, 2, size=6).astype(float)
    got, v = completion_opt(inst, alpha)
    # filtered exhaustive reference
    best_val = 2.0
    for bits in product((0, 1), repeat=12):
        cand = np.array(bits, dtype=np.uint8)
        if not np.array_equal(cand[fixed], alpha[fixed].astype(np.uint8)):
            continue
        best_val = min(best_val, val_assignment(inst, cand))
    assert v == best_val
    assert np.array_equal(got[fixed], alpha[fixed].astype(np.uint8))


def test_brute_opt_cap():
    with pytest.raises(InputError):
        brute_opt(gen_random_nae3(25, 0))


def test_instance_hash_tracks_content():
    a = gen_random_nae3(6, 1)
    b = gen_random_nae3(6, 1)
    c = gen_random_nae3(6, 2)
    assert instance_hash(a) == instance_hash(b)
    assert instance_hash(a) != instance_hash(c)


def test_ratio_report_conventions():
    pl = gen_planted_nae3(6, 0.0, 0)
    inst = pl.instance
    report = ratio_report(inst, 0.0, {"perfect": pl.planted}, seed=0)
    out = report["outputs"]["perfect"]
    assert out["val"] == 0.0
    assert out["ratio_lp"] == 1.0  # 0/0 convention
    assert out["ratio_opt"] == 1.0
    assert report["opt"] == 0.0
    assert report["instance"]["hash"] == instance_hash(inst)

    # a positive value over a zero denominator must be null, not a number
    bad = np.zeros(6, dtype=np.uint8)
    if val_assignment(inst, bad) == 0.0:
        bad[0] = 1  # nudge until it violates something
    report2 = ratio_report(inst, 0.0, {"worse": bad}, seed=0)
    if report2["outputs"]["worse"]["val"] > 0:
        assert report2["outputs"]["worse"]["ratio_lp"] is None


def test_ratio_report_omits_opt_when_large():
    inst = gen_random_nae3(21, 0)
    report = ratio_report(inst, 0.1, {"x": np.zeros(21, np.uint8)}, opt_cap=20)
    assert report["opt"] is None
    assert report["outputs"]["x"]["ratio_opt"] is None


def test_val_over_lp_at_least_one_when_lp_positive():
    for seed in range(10):
        inst = gen_random_nae3(7, seed + 70)
        from densecsp.relaxation import build_sa_lp, solve_lp

        sol = solve_lp(build_sa_lp(inst, 3))
        _, opt = brute_opt(inst)
        if sol.objective > 1e-9:
            assert opt / sol.objective >= 1.0 - 1e-6
