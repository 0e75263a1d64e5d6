from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densecsp.errors import InputError, InstanceFormatError
from densecsp.instances import (
    KcspInstance,
    Nae3Instance,
    densify_reduction,
    eval_nae,
    gen_planted_nae3,
    gen_random_nae3,
    read_instance,
    val_assignment,
    val_kcsp,
    violated_mask,
    write_instance,
)


def test_eval_nae_truth_table():
    inst = Nae3Instance.create(3, np.array([[0, 1, 2]]), np.array([[0, 0, 0]]))
    # all-positive clause: violated exactly on the two constant assignments
    for bits in range(8):
        b = [(bits >> 2) & 1, (bits >> 1) & 1, bits & 1]
        sat = eval_nae(inst, (0, 1, 2), b)
        assert sat == (bits not in (0, 7))


def test_negation_flips_the_violating_pair():
    # negating the middle literal moves the violating patterns to {010, 101}
    inst = Nae3Instance.create(3, np.array([[0, 1, 2]]), np.array([[0, 1, 0]]))
    for bits in range(8):
        b = [(bits >> 2) & 1, (bits >> 1) & 1, bits & 1]
        assert eval_nae(inst, (0, 1, 2), b) == (bits not in (2, 5))


def test_create_rejects_duplicate_triples():
    trips = np.array([[0, 1, 2], [0, 1, 2]])
    neg = np.zeros((2, 3), dtype=np.uint8)
    with pytest.raises(InputError, match="0, 1, 2"):
        Nae3Instance.create(3, trips, neg)


def test_create_sorts_rows_lexicographically():
    trips = np.array([[1, 2, 3], [0, 1, 2]])
    neg = np.array([[0, 0, 1], [1, 0, 0]], dtype=np.uint8)
    inst = Nae3Instance.create(4, trips, neg)
    assert inst.triples[0].tolist() == [0, 1, 2]
    assert inst.neg[0].tolist() == [1, 0, 0]


def test_val_assignment_counts_fraction():
    inst = gen_random_nae3(6, 0)
    alpha = np.zeros(6, dtype=np.uint8)
    direct = sum(
        not eval_nae(inst, tuple(t), alpha[t]) for t in inst.triples
    ) / inst.m
    assert val_assignment(inst, alpha) == direct
    assert violated_mask(inst, alpha).mean() == direct


@given(st.integers(min_value=4, max_value=9), st.integers(min_value=0, max_value=10**6))
@settings(max_examples=40)
def test_val_is_complement_invariant(n, seed):
    inst = gen_random_nae3(n, seed)
    rng = np.random.default_rng(seed + 1)
    alpha = rng.integers(0, 2, size=n, dtype=np.uint8)
    assert val_assignment(inst, alpha) == val_assignment(inst, 1 - alpha)


def test_gen_random_is_deterministic():
    a = gen_random_nae3(9, 42)
    b = gen_random_nae3(9, 42)
    assert np.array_equal(a.neg, b.neg)
    assert a.complete and a.m == comb(9, 3)


def test_planted_violation_count_is_exact():
    for seed in range(6):
        pl = gen_planted_nae3(10, 0.2, seed)
        recount = int(violated_mask(pl.instance, pl.planted).sum())
        assert recount == pl.violated_count


def test_planted_p_zero_is_satisfied():
    pl = gen_planted_nae3(12, 0.0, 3)
    assert pl.violated_count == 0
    assert val_assignment(pl.instance, pl.planted) == 0.0


def test_planted_p_one_violates_everything():
    pl = gen_planted_nae3(8, 1.0, 5)
    assert pl.violated_count == pl.instance.m


def test_kcsp_from_nae_preserves_values():
    inst = gen_random_nae3(7, 4)
    kcsp = KcspInstance.from_nae(inst)
    rng = np.random.default_rng(0)
    for _ in range(20):
        alpha = rng.integers(0, 2, size=7, dtype=np.uint8)
        assert val_kcsp(kcsp, alpha) == val_assignment(inst, alpha)


def test_kcsp_rejects_unsatisfiable_table():
    tables = np.ones((comb(4, 2), 4), dtype=np.uint8)
    tables[2, :] = 0
    with pytest.raises(InputError):
        KcspInstance.create(4, 2, tables)


def test_write_read_round_trip_nae():
    inst = gen_random_nae3(8, 17)
    back = read_instance(write_instance(inst))
    assert isinstance(back, Nae3Instance)
    assert np.array_equal(back.triples, inst.triples)
    assert np.array_equal(back.neg, inst.neg)
    assert back.complete


def test_write_read_round_trip_kcsp():
    kcsp = KcspInstance.from_nae(gen_random_nae3(6, 2))
    back = read_instance(write_instance(kcsp))
    assert isinstance(back, KcspInstance)
    assert back.k == 3
    assert np.array_equal(back.tables, kcsp.tables)


def test_read_reports_line_numbers():
    text = "p nae3 4 1\nc fine\n1 2 nonsense 1 1 1\n"
    with pytest.raises(InstanceFormatError) as err:
        read_instance(text)
    assert err.value.line == 3


def test_read_rejects_wrong_count():
    text = "p nae3 4 2\n1 2 3 1 1 1\n"
    with pytest.raises(InstanceFormatError):
        read_instance(text)


def test_read_allows_incomplete_nae():
    text = "p nae3 5 2\n1 2 3 1 1 1\n2 3 4 0 1 1\n"
    inst = read_instance(text)
    assert isinstance(inst, Nae3Instance)
    assert not inst.complete and inst.m == 2


def test_polarity_convention_on_disk_is_one_for_positive():
    inst = Nae3Instance.create(3, np.array([[0, 1, 2]]), np.array([[0, 1, 0]]))
    line = write_instance(inst).splitlines()[1]
    assert line == "1 2 3 1 0 1"


def test_densify_preserves_optimal_count():
    # two clauses over four variables; check OPT carries over exactly
    trips = np.array([[0, 1, 2], [1, 2, 3]])
    neg = np.array([[0, 0, 0], [0, 1, 0]], dtype=np.uint8)
    dense = densify_reduction(4, trips, neg, 5e-4, max_n=10)

    from densecsp.exact import brute_opt

    best, opt = brute_opt(dense)
    # the sparse instance is NAE-satisfiable, so the padded one must be too
    assert opt == 0.0
    sparse = Nae3Instance.create(4, trips, neg)
    assert val_assignment(sparse, best[:4]) == 0.0


def test_densify_rejects_large_eps():
    with pytest.raises(InputError):
        densify_reduction(3, np.empty((0, 3), int), np.empty((0, 3), np.uint8), 0.5)
