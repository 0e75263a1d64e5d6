from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densecsp.subsets import (
    assignment_index,
    drop_rows,
    index_bits,
    pair_rank,
    subset_array,
    subset_row,
    subsets_within,
    triple_rank,
)


def test_subset_array_is_lex_sorted():
    for n, s in ((5, 2), (7, 3), (9, 4)):
        arr = subset_array(n, s)
        assert arr.shape == (comb(n, s), s)
        expected = np.array(list(combinations(range(n), s)))
        assert np.array_equal(arr, expected)


def test_subset_array_is_readonly():
    arr = subset_array(6, 3)
    with pytest.raises(ValueError):
        arr[0, 0] = 99


@given(st.integers(min_value=3, max_value=14), st.data())
@settings(max_examples=60)
def test_triple_rank_matches_position(n, data):
    a = data.draw(st.integers(0, n - 3))
    b = data.draw(st.integers(a + 1, n - 2))
    c = data.draw(st.integers(b + 1, n - 1))
    arr = subset_array(n, 3)
    r = int(triple_rank(n, np.array([[a, b, c]]))[0])
    assert arr[r].tolist() == [a, b, c]


@given(st.integers(min_value=2, max_value=20), st.data())
@settings(max_examples=60)
def test_pair_rank_matches_position(n, data):
    a = data.draw(st.integers(0, n - 2))
    b = data.draw(st.integers(a + 1, n - 1))
    arr = subset_array(n, 2)
    r = int(pair_rank(n, np.array([a]), np.array([b]))[0])
    assert arr[r].tolist() == [a, b]


def test_subset_row_inverts_subset_array():
    n, s = 8, 3
    arr = subset_array(n, s)
    for i in range(arr.shape[0]):
        assert subset_row(n, tuple(int(v) for v in arr[i])) == i


def test_drop_rows_identifies_children():
    n, s = 7, 3
    parents = subset_array(n, s)
    children = subset_array(n, s - 1)
    table = drop_rows(n, s)
    for j in range(s):
        kept = np.delete(parents, j, axis=1)
        assert np.array_equal(children[table[:, j]], kept)


def test_assignment_index_msb_is_first_variable():
    bits = np.array([[1, 0, 0], [0, 0, 1], [1, 1, 1]])
    assert assignment_index(bits).tolist() == [4, 1, 7]
    # single vector form
    assert int(assignment_index(np.array([1, 0]))) == 2


def test_index_bits_round_trip():
    s = 4
    idx = np.arange(2**s)
    bits = index_bits(idx, s)
    assert np.array_equal(assignment_index(bits), idx)


def test_subsets_within_enumerates_sub_subsets():
    within = (1, 3, 4, 6)
    got = subsets_within(within, 2)
    assert [tuple(int(v) for v in row) for row in got] == list(combinations(within, 2))
    assert subsets_within(within, 0).shape == (1, 0)
