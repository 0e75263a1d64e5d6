"""Bounded-degree families of consistent local distributions.

A degree-d pseudodistribution over n binary variables stores one probability
vector per subset of size at most d, indexed by packed assignments (most
significant bit = smallest variable).  Consistency means every stored vector
marginalizes to the stored vector of each subset one element smaller; true
global distributions satisfy this, and relaxation solutions satisfy it up to
solver tolerance.

All arrays inside a PseudoDistribution are frozen.  Operations return new
objects, so holding a reference across a rounding stage is always safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, InputError, UnsupportedConditioningError
from .instances import Nae3Instance
from .subsets import (
    assignment_index,
    drop_rows,
    subset_array,
    subset_row,
    subsets_within,
)

TOL_SOLVER = 1e-6
TOL_EXACT = 1e-9
EPS_SUPPORT = 1e-9
_CLAMP_FLOOR = -1e-9


class PseudoDistribution:
    """Immutable container of local distributions up to a degree cap."""

    __slots__ = ("n", "degree", "_locals")

    def __init__(self, n: int, degree: int, locals_: Sequence[np.ndarray]):
        if degree < 0 or degree > n:
            raise InputError(f"degree {degree} out of range for n={n}")
        if len(locals_) != degree + 1:
            raise InputError(f"need {degree + 1} local tables, got {len(locals_)}")
        frozen = []
        for s, arr in enumerate(locals_):
            arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
            want = (subset_array(n, s).shape[0], 2**s)
            if arr.shape != want:
                raise InputError(f"size-{s} table must have shape {want}, got {arr.shape}")
            arr.flags.writeable = False
            frozen.append(arr)
        self.n = n
        self.degree = degree
        self._locals = tuple(frozen)

    def table(self, s: int) -> np.ndarray:
        """The full probability table for all subsets of one size (read-only)."""
        return self._locals[s]

    def local(self, subset: Iterable[int]) -> np.ndarray:
        """Probability vector of one subset, length 2**|subset| (read-only)."""
        sub = tuple(int(v) for v in subset)
        if len(sub) > self.degree:
            raise InputError(f"subset {sub} exceeds degree {self.degree}")
        return self._locals[len(sub)][subset_row(self.n, sub)]

    def singles(self) -> np.ndarray:
        """Shape (n, 2): marginal of every variable."""
        return self._locals[1]


@dataclass(frozen=True)
class LocalDistribution:
    """A single subset together with its probability vector."""

    subset: tuple[int, ...]
    probs: np.ndarray


@dataclass(frozen=True)
class PdCheckReport:
    max_sum_dev: float
    max_consistency_dev: float
    worst_subset: tuple[int, ...]
    worst_pair: tuple[tuple[int, ...], tuple[int, ...], int] | None

    def passed(self, tol: float) -> bool:
        return self.max_sum_dev <= tol and self.max_consistency_dev <= tol


def _marginalize_position(table: np.ndarray, s: int, j: int) -> np.ndarray:
    """Sum out bit position j (0 = most significant) from packed vectors."""
    m = table.shape[0]
    shaped = table.reshape(m, 2**j, 2, 2 ** (s - 1 - j))
    return shaped.sum(axis=2).reshape(m, 2 ** (s - 1))


def pd_check(mu: PseudoDistribution, tol: float = TOL_SOLVER) -> PdCheckReport:
    """Measure how far ``mu`` is from being a consistent local family.

    Reports the largest deviation of any stored vector's sum from 1, the
    largest single-entry deviation between a stored vector and the
    marginalization of any stored superset one element larger, and where the
    worst consistency deviation occurs (superset, subset, packed assignment).
    """
    worst_sum = 0.0
    worst_sum_subset: tuple[int, ...] = ()
    worst_cons = 0.0
    worst_pair = None
    for s in range(mu.degree + 1):
        sums = np.abs(mu.table(s).sum(axis=1) - 1.0)
        r = int(np.argmax(sums))
        if sums[r] > worst_sum:
            worst_sum = float(sums[r])
            worst_sum_subset = tuple(int(v) for v in subset_array(mu.n, s)[r])
    for s in range(1, mu.degree + 1):
        table = mu.table(s)
        children = drop_rows(mu.n, s)
        child_table = mu.table(s - 1)
        for j in range(s):
            marg = _marginalize_position(table, s, j)
            dev = np.abs(marg - child_table[children[:, j]])
            r, a = np.unravel_index(int(np.argmax(dev)), dev.shape)
            if dev[r, a] > worst_cons:
                worst_cons = float(dev[r, a])
                sup = tuple(int(v) for v in subset_array(mu.n, s)[r])
                sub = sup[:j] + sup[j + 1 :]
                worst_pair = (sup, sub, int(a))
    return PdCheckReport(worst_sum, worst_cons, worst_sum_subset, worst_pair)


def pd_marginal(mu: PseudoDistribution, subset: Iterable[int]) -> LocalDistribution:
    """The stored local distribution of one subset."""
    sub = tuple(int(v) for v in subset)
    return LocalDistribution(sub, mu.local(sub).copy())


def _cleanup(vec: np.ndarray) -> np.ndarray:
    """Clamp float dust and renormalize; reject genuinely negative mass."""
    low = vec.min(initial=0.0)
    if low < _CLAMP_FLOOR:
        raise ContractError(f"probability mass {low} below clamp floor")
    vec = np.maximum(vec, 0.0)
    total = vec.sum()
    if abs(total - 1.0) > 1e-12 and total > 0:
        vec = vec / total
    return vec


def pd_condition(
    mu: PseudoDistribution, subset: Iterable[int], beta: Iterable[int]
) -> PseudoDistribution:
    """Condition on the event that ``subset`` takes the bits ``beta``.

    Returns a pseudodistribution of degree reduced by |subset|.  Each new
    local is the old local of the union, sliced at beta and renormalized;
    entries conflicting with beta on overlapping variables are zero.
    """
    S = tuple(int(v) for v in subset)
    beta = tuple(int(b) for b in beta)
    if len(S) != len(beta):
        raise InputError("conditioning bits must match the subset length")
    if sorted(set(S)) != list(S):
        raise InputError(f"conditioning subset must be sorted and duplicate-free, got {S}")
    if len(S) > mu.degree - 1:
        raise InputError(
            f"conditioning on {len(S)} variables needs degree at least {len(S) + 1}"
        )
    p_event = float(mu.local(S)[assignment_index(np.asarray(beta))])
    if p_event <= EPS_SUPPORT:
        raise UnsupportedConditioningError(
            f"event {S}={beta} has probability {p_event:.3e}, below support floor"
        )
    d_new = mu.degree - len(S)
    beta_of = dict(zip(S, beta))
    out: list[np.ndarray] = []
    for t in range(d_new + 1):
        subs = subset_array(mu.n, t)
        table = np.empty((subs.shape[0], 2**t))
        for r, T in enumerate(map(tuple, subs)):
            U = tuple(sorted(set(S) | set(T)))
            probs_U = mu.local(U)
            u = len(U)
            pos = {v: i for i, v in enumerate(U)}
            idx = np.zeros(2**t, dtype=np.int64)
            ok = np.ones(2**t, dtype=bool)
            alphas = np.arange(2**t)
            for i, v in enumerate(T):
                bit = (alphas >> (t - 1 - i)) & 1
                if v in beta_of:
                    ok &= bit == beta_of[v]
                idx |= bit << (u - 1 - pos[v])
            for v, b in beta_of.items():
                if v not in T:
                    idx |= b << (u - 1 - pos[v])
            vec = np.where(ok, probs_U[idx] / p_event, 0.0)
            table[r] = _cleanup(vec)
        out.append(table)
    return PseudoDistribution(mu.n, d_new, out)


@lru_cache(maxsize=None)
def _fix_matrix(s: int, mask: int, target: int) -> np.ndarray:
    """Transfer matrix moving all mass onto ``target`` at the masked positions.

    Row a (the old assignment) contributes to the single new assignment that
    keeps a's bits off-mask and takes target's bits on-mask.
    """
    size = 2**s
    T = np.zeros((size, size))
    for a in range(size):
        T[a, (a & ~mask) | target] = 1.0
    T.flags.writeable = False
    return T


def pd_fix(
    mu: PseudoDistribution, subset: Iterable[int], beta: Iterable[int]
) -> PseudoDistribution:
    """Collapse the named variables onto fixed bits without losing degree.

    Every local involving a fixed variable has its mass moved onto the slice
    agreeing with beta; locals not meeting ``subset`` are unchanged, and the
    single-variable marginals of unfixed variables are preserved exactly.
    """
    S = tuple(int(v) for v in subset)
    beta_arr = np.asarray(list(beta), dtype=np.int64)
    if len(S) != beta_arr.shape[0]:
        raise InputError("fixing bits must match the subset length")
    if sorted(set(S)) != list(S):
        raise InputError(f"fixing subset must be sorted and duplicate-free, got {S}")
    bit_lookup = np.zeros(mu.n, dtype=np.int64)
    bit_lookup[list(S)] = beta_arr
    out = [mu.table(0).copy()]
    for s in range(1, mu.degree + 1):
        subs = subset_array(mu.n, s)
        hit = np.isin(subs, np.asarray(S, dtype=np.int64))
        table = mu.table(s).copy()
        if hit.any():
            weights = 1 << np.arange(s - 1, -1, -1, dtype=np.int64)
            masks = (hit * weights).sum(axis=1)
            targets = ((bit_lookup[subs] * hit) * weights).sum(axis=1)
            key = masks * (2**s) + targets
            for k in np.unique(key[masks > 0]):
                rows = np.flatnonzero(key == k)
                mask_k = int(k) // (2**s)
                target_k = int(k) % (2**s)
                T = _fix_matrix(s, mask_k, target_k)
                table[rows] = mu.table(s)[rows] @ T
        out.append(table)
    return PseudoDistribution(mu.n, mu.degree, out)


def pd_restrict(mu: PseudoDistribution, keep: Iterable[int]) -> PseudoDistribution:
    """Forget every subset not contained in ``keep``; variables re-index.

    Position i of the result is the i-th smallest kept variable.  Because
    re-indexing preserves relative order, packed assignments carry over
    without bit shuffling.
    """
    W = tuple(sorted(int(v) for v in keep))
    if len(set(W)) != len(W):
        raise InputError("restriction set contains duplicates")
    if W and (W[0] < 0 or W[-1] >= mu.n):
        raise InputError("restriction set out of range")
    m = len(W)
    d_new = min(mu.degree, m)
    out = []
    for s in range(d_new + 1):
        subs = subsets_within(W, s)
        rows = np.fromiter(
            (subset_row(mu.n, tuple(int(v) for v in row)) for row in subs),
            dtype=np.int64,
            count=subs.shape[0],
        )
        out.append(mu.table(s)[rows].copy())
    return PseudoDistribution(m, d_new, out)


def triple_violation_probs(
    inst: Nae3Instance, mu: PseudoDistribution
) -> np.ndarray:
    """Probability each constraint is violated, one entry per constraint row.

    The two assignments a not-all-equal constraint rejects are the polarity
    pattern itself and its complement, so each probability is a sum of two
    entries of the triple's local distribution.
    """
    if mu.degree < 3:
        raise InputError(f"need degree at least 3, have {mu.degree}")
    from .subsets import triple_rank

    table = mu.table(3)
    rows = np.arange(inst.m) if inst.complete else triple_rank(mu.n, inst.triples)
    idx0 = assignment_index(inst.neg)
    return table[rows, idx0] + table[rows, 7 - idx0]


def pd_val(
    inst: Nae3Instance, mu: PseudoDistribution, within: Iterable[int] | None = None
) -> float:
    """Expected violated fraction, optionally over constraints inside a set.

    With ``within`` given, only constraints whose three variables all lie in
    the set count, and the average is over those constraints; if none exist
    the value is 0.
    """
    if mu.n != inst.n:
        raise InputError("instance and pseudodistribution disagree on n")
    viol = triple_violation_probs(inst, mu)
    if within is None:
        return float(viol.mean()) if viol.size else 0.0
    member = np.zeros(inst.n, dtype=bool)
    member[list(within)] = True
    sel = member[inst.triples].all(axis=1)
    if not sel.any():
        return 0.0
    return float(viol[sel].mean())


def pd_correlation_diag(mu: PseudoDistribution, subset: Iterable[int]) -> float:
    """Divergence of one local from the product of its single marginals.

    Natural-log Kullback-Leibler divergence; returns +inf when the local
    puts mass where the product does not.  A small value certifies the
    subset's variables are nearly independent under ``mu``.
    """
    T = tuple(int(v) for v in subset)
    if len(T) < 2:
        raise InputError("correlation diagnostic needs at least two variables")
    joint = mu.local(T)
    t = len(T)
    prod = np.ones(2**t)
    alphas = np.arange(2**t)
    for i, v in enumerate(T):
        bit = (alphas >> (t - 1 - i)) & 1
        pv = mu.local((v,))
        prod *= np.where(bit == 1, pv[1], pv[0])
    kl = 0.0
    for p, q in zip(joint, prod):
        if p <= 0.0:
            continue
        if q <= 0.0:
            return math.inf
        kl += p * math.log(p / q)
    return float(kl)


# ---------------------------------------------------------------------------
# Constructors


def from_global(
    n: int, degree: int, assignments: np.ndarray, weights: np.ndarray
) -> PseudoDistribution:
    """Exact local family of a finitely supported global distribution.

    ``assignments`` has one row per support point.  Weights must sum to 1;
    with dyadic weights every stored probability is float-exact, which the
    nearby tests lean on.
    """
    assignments = np.asarray(assignments, dtype=np.int64).reshape(-1, n)
    weights = np.asarray(weights, dtype=np.float64)
    if assignments.shape[0] != weights.shape[0]:
        raise InputError("one weight per support assignment required")
    if abs(weights.sum() - 1.0) > 1e-9 or (weights < 0).any():
        raise InputError("weights must be a probability vector")
    out = []
    for s in range(degree + 1):
        subs = subset_array(n, s)
        idx = assignment_index(assignments[:, subs])  # (support, rows)
        table = np.zeros((subs.shape[0], 2**s))
        np.add.at(table, (np.arange(subs.shape[0])[None, :], idx), weights[:, None])
        out.append(table)
    return PseudoDistribution(n, degree, out)


def product_pd(n: int, degree: int, p_one: np.ndarray) -> PseudoDistribution:
    """Independent product family with Pr[v = 1] = p_one[v]."""
    p_one = np.asarray(p_one, dtype=np.float64)
    if p_one.shape != (n,):
        raise InputError(f"need one probability per variable, got shape {p_one.shape}")
    out = []
    for s in range(degree + 1):
        subs = subset_array(n, s)
        table = np.ones((subs.shape[0], 2**s))
        alphas = np.arange(2**s)
        for i in range(s):
            bit = (alphas >> (s - 1 - i)) & 1
            pv = p_one[subs[:, i]]
            table *= np.where(bit[None, :] == 1, pv[:, None], 1.0 - pv[:, None])
        out.append(table)
    return PseudoDistribution(n, degree, out)


def uniform_pd(n: int, degree: int) -> PseudoDistribution:
    return product_pd(n, degree, np.full(n, 0.5))


def point_mass_pd(n: int, degree: int, alpha: np.ndarray) -> PseudoDistribution:
    alpha = np.asarray(alpha, dtype=np.int64)
    return from_global(n, degree, alpha[None, :], np.array([1.0]))
