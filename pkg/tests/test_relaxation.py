from math import comb

import numpy as np
import pytest

from densecsp.errors import DecodeError, SizeBudgetError
from densecsp.exact import brute_opt
from densecsp.instances import Nae3Instance, gen_planted_nae3, gen_random_nae3
from densecsp.localdist import pd_check, pd_val
from densecsp.relaxation import (
    LpSolution,
    build_sa_lp,
    lp_to_pd,
    relaxation_cells,
    solve_lp,
    write_lp_text,
)


def test_variable_count_smallest_case():
    # n=3, d=3: one table per subset size, 1 + 3*2 + 3*4 + 1*8 = 27 cells
    inst = Nae3Instance.complete_from_neg(3, np.zeros((1, 3), np.uint8))
    prob = build_sa_lp(inst, 3)
    assert prob.num_vars == 27
    # the budget metric rounds every table up to 2^d cells on purpose
    assert relaxation_cells(3, 3) == 8 * 8


def test_degree_below_three_rejected():
    inst = gen_random_nae3(5, 0)
    from densecsp.errors import InputError

    with pytest.raises(InputError):
        build_sa_lp(inst, 2)


def test_budget_overflow_raises_with_size():
    inst = gen_random_nae3(30, 0)
    with pytest.raises(SizeBudgetError) as err:
        build_sa_lp(inst, 4, max_cells=1000)
    assert err.value.computed_size == relaxation_cells(30, 4)


def test_empty_set_row_pins_normalization():
    inst = gen_random_nae3(5, 1)
    prob = build_sa_lp(inst, 3)
    sol = solve_lp(prob)
    assert abs(sol.x[0] - 1.0) < 1e-9


def test_lp_lower_bounds_opt():
    for seed in range(12):
        inst = gen_random_nae3(8, seed)
        sol = solve_lp(build_sa_lp(inst, 3))
        _, opt = brute_opt(inst)
        assert sol.objective <= opt + 1e-6


def test_higher_degree_never_loosens():
    for seed in range(6):
        inst = gen_random_nae3(7, seed + 30)
        low = solve_lp(build_sa_lp(inst, 3)).objective
        high = solve_lp(build_sa_lp(inst, 4)).objective
        assert high >= low - 1e-7


def test_satisfiable_instance_has_zero_lp():
    pl = gen_planted_nae3(9, 0.0, 4)
    sol = solve_lp(build_sa_lp(pl.instance, 3))
    assert sol.objective < 1e-8


def test_decode_passes_consistency_and_matches_objective():
    for seed in range(8):
        inst = gen_random_nae3(8, seed + 60)
        prob = build_sa_lp(inst, 3)
        sol = solve_lp(prob)
        mu = lp_to_pd(prob, sol)
        assert pd_check(mu).passed(1e-6)
        assert abs(pd_val(inst, mu) - sol.objective) < 1e-5


def test_decode_rejects_corrupt_solution():
    inst = gen_random_nae3(6, 2)
    prob = build_sa_lp(inst, 3)
    sol = solve_lp(prob)
    bad = sol.x.copy()
    bad[5] -= 0.2
    corrupt = LpSolution(x=bad, objective=sol.objective, status=sol.status, residual=sol.residual)
    with pytest.raises(DecodeError):
        lp_to_pd(prob, corrupt)


def test_residual_reported_small():
    inst = gen_random_nae3(7, 8)
    sol = solve_lp(build_sa_lp(inst, 3))
    assert sol.residual < 1e-7


def test_lp_text_dump_mentions_every_size():
    inst = Nae3Instance.complete_from_neg(4, np.zeros((comb(4, 3), 3), np.uint8))
    text = write_lp_text(build_sa_lp(inst, 3))
    assert "minimize" in text.lower()
    assert text.count("=") >= 1 + 4 + comb(4, 2) * 2


def test_incomplete_instances_are_solvable_too():
    trips = np.array([[0, 1, 2], [1, 2, 3], [0, 2, 4]])
    neg = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], np.uint8)
    inst = Nae3Instance.create(5, trips, neg)
    sol = solve_lp(build_sa_lp(inst, 3))
    assert sol.objective < 1e-8  # three clauses over five vars: satisfiable
