"""Subset enumeration and ranking utilities.

Everything in the toolkit that is indexed by a variable subset uses the same
conventions: subsets are sorted tuples of 0-based variable indices, stored in
lexicographic order, and an assignment to a subset of size s is packed into
an integer whose most significant bit belongs to the smallest variable.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def subset_array(n: int, s: int) -> np.ndarray:
    """All size-s subsets of range(n) in lexicographic order, shape (C(n,s), s).

    The returned array is read-only and shared between callers.
    """
    if s == 0:
        out = np.zeros((1, 0), dtype=np.int64)
    else:
        out = np.fromiter(
            (v for combo in combinations(range(n), s) for v in combo),
            dtype=np.int64,
            count=comb(n, s) * s,
        ).reshape(-1, s)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _row_lookup(n: int, s: int) -> dict[tuple[int, ...], int]:
    return {tuple(combo): i for i, combo in enumerate(combinations(range(n), s))}


def subset_row(n: int, subset: tuple[int, ...]) -> int:
    """Lexicographic rank of a sorted subset among all subsets of its size."""
    return _row_lookup(n, len(subset))[subset]


@lru_cache(maxsize=None)
def drop_rows(n: int, s: int) -> np.ndarray:
    """Rank of each subset with one element removed.

    Entry [r, j] is the rank (among size s-1 subsets) of the size-s subset of
    rank r with its j-th smallest element dropped.  This is the navigation
    table behind both consistency checking and relaxation constraints.
    """
    subs = subset_array(n, s)
    child = _row_lookup(n, s - 1)
    out = np.empty(subs.shape, dtype=np.int64)
    for r, combo in enumerate(map(tuple, subs)):
        for j in range(s):
            out[r, j] = child[combo[:j] + combo[j + 1 :]]
    out.flags.writeable = False
    return out


def pair_rank(n: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized lexicographic rank of pairs a < b."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    return a * n - (a * (a + 1)) // 2 + (b - a - 1)


def triple_rank(n: int, triples: np.ndarray) -> np.ndarray:
    """Vectorized lexicographic rank of rows (a < b < c) among C(n,3) triples."""
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    # Sum of C(n-1-x, 2) for x < a, via the hockey-stick identity.
    before_a = comb(n, 3) - _comb_vec(n - a, 3)
    before_b = _comb_vec(n - 1 - a, 2) - _comb_vec(n - b, 2)
    return before_a + before_b + (c - b - 1)


def _comb_vec(m: np.ndarray, k: int) -> np.ndarray:
    m = np.maximum(m, 0)
    if k == 2:
        return m * (m - 1) // 2
    if k == 3:
        return m * (m - 1) * (m - 2) // 6
    raise ValueError(f"unsupported k={k}")


def assignment_index(bits: np.ndarray) -> np.ndarray:
    """Pack assignment bits (last axis, smallest variable first) into integers."""
    bits = np.asarray(bits)
    s = bits.shape[-1]
    if s == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = 1 << np.arange(s - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def index_bits(idx: np.ndarray, s: int) -> np.ndarray:
    """Unpack integers into s assignment bits, smallest variable first."""
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(s - 1, -1, -1, dtype=np.int64)
    return (idx[..., None] >> shifts) & 1


def subsets_within(vars_sorted: tuple[int, ...], s: int) -> np.ndarray:
    """All size-s subsets drawn from an ordered variable pool, lex order."""
    pool = np.asarray(vars_sorted, dtype=np.int64)
    if s == 0:
        return np.zeros((1, 0), dtype=np.int64)
    local = subset_array(len(pool), s)
    return pool[local]
