"""Weighted two-literal clauses, their literal metric, and region rounding.

When the rounding engine finds the residual expected violation already
large, the one- and two-unfixed-variable constraints reduce to clauses on
pairs of literals.  A pseudodistribution induces a distance between ordered
literal pairs, d(l1, l2) = Pr[l1 true and l2 false]; consistency of the
family makes these distances obey every triangle inequality and puts the
total clause violation mass exactly at the metric objective.  Rounding then
grows balls in the implication graph and cuts them at random radii below
one half, the classical region-growing recipe.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log2

import numpy as np

from .errors import ContractError, InputError, MetricError
from .instances import Nae3Instance, PartialAssignment, UNFIXED
from .localdist import PseudoDistribution
from .subsets import pair_rank

BRUTE_CAP = 20


@dataclass(frozen=True)
class TwoSatInstance:
    """A multiset of two-literal clauses over re-indexed variables.

    ``clauses`` rows are (v, w, q1, q2): local variable indices and negation
    flags, the literal being the variable itself when the flag is 0 and its
    complement when 1.  A clause with v == w is a unit clause.
    ``orig_vars`` maps local indices back to the variables of the instance
    the clauses came from; ``dropped`` counts constraints discarded during
    induction because their fixed part already decided them.
    """

    m: int
    clauses: np.ndarray
    orig_vars: np.ndarray
    dropped: int = 0

    @property
    def num_clauses(self) -> int:
        return self.clauses.shape[0]

    @staticmethod
    def create(
        m: int, clauses: np.ndarray, orig_vars: np.ndarray | None = None, dropped: int = 0
    ) -> "TwoSatInstance":
        clauses = np.ascontiguousarray(np.asarray(clauses, dtype=np.int64).reshape(-1, 4))
        if clauses.size:
            if clauses[:, :2].min() < 0 or clauses[:, :2].max() >= m:
                raise InputError("clause variable out of range")
            if not np.isin(clauses[:, 2:], (0, 1)).all():
                raise InputError("negation flags must be 0 or 1")
        if orig_vars is None:
            orig_vars = np.arange(m, dtype=np.int64)
        orig_vars = np.asarray(orig_vars, dtype=np.int64)
        if orig_vars.shape != (m,):
            raise InputError("orig_vars must list one original variable per local index")
        clauses.flags.writeable = False
        orig_vars.flags.writeable = False
        return TwoSatInstance(m, clauses, orig_vars, dropped)

    def to_dimacs(self) -> str:
        """DIMACS-style text; unit clauses appear as single-literal lines."""
        lines = [f"p cnf {self.m} {self.num_clauses}"]
        for v, w, q1, q2 in self.clauses:
            l1 = (int(v) + 1) * (1 if q1 == 0 else -1)
            l2 = (int(w) + 1) * (1 if q2 == 0 else -1)
            lines.append(f"{l1} 0" if (v == w and q1 == q2) else f"{l1} {l2} 0")
        return "\n".join(lines) + "\n"


def induce_2sat(
    inst: Nae3Instance, unfixed: np.ndarray, alpha: PartialAssignment
) -> TwoSatInstance:
    """Project constraints with one or two unfixed variables onto clauses.

    A constraint with two fixed variables whose mapped bits differ is
    already satisfied and gets dropped (counted).  With two fixed mapped
    bits equal to b, the remaining variable must not map to b: a unit
    clause.  With one fixed mapped bit b, the two unfixed variables must not
    both map to b: a two-literal clause.  Variables outside ``unfixed`` must
    be integral in ``alpha``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    W = np.asarray(sorted(int(v) for v in unfixed), dtype=np.int64)
    member = np.zeros(inst.n, dtype=bool)
    member[W] = True
    outside = ~member
    if not np.isin(alpha[outside], (0.0, 1.0)).all():
        raise InputError("every variable outside the unfixed set must be 0 or 1")
    local = np.full(inst.n, -1, dtype=np.int64)
    local[W] = np.arange(len(W))

    unf = member[inst.triples]
    cnt = unf.sum(axis=1)
    clauses: list[tuple[int, int, int, int]] = []
    dropped = 0
    for r in np.flatnonzero(cnt == 1):
        tri = inst.triples[r]
        neg = inst.neg[r]
        fixed_pos = np.flatnonzero(~unf[r])
        free_pos = int(np.flatnonzero(unf[r])[0])
        bits = alpha[tri[fixed_pos]].astype(np.int64) ^ neg[fixed_pos]
        if bits[0] != bits[1]:
            dropped += 1
            continue
        b = int(bits[0])
        x = int(local[tri[free_pos]])
        q = b ^ int(neg[free_pos])
        clauses.append((x, x, q, q))
    for r in np.flatnonzero(cnt == 2):
        tri = inst.triples[r]
        neg = inst.neg[r]
        fixed_pos = int(np.flatnonzero(~unf[r])[0])
        free_pos = np.flatnonzero(unf[r])
        b = int(alpha[tri[fixed_pos]]) ^ int(neg[fixed_pos])
        v, w = (int(local[tri[p]]) for p in free_pos)
        q1, q2 = (b ^ int(neg[p]) for p in free_pos)
        clauses.append((v, w, q1, q2))
    arr = np.asarray(clauses, dtype=np.int64).reshape(-1, 4)
    return TwoSatInstance.create(len(W), arr, W, dropped)


@dataclass(frozen=True)
class MetricSolution:
    """Distances between ordered literal pairs plus the clause objective.

    Literal 2*v is variable v itself, literal 2*v+1 its complement.
    """

    dist: np.ndarray
    objective: float

    @property
    def num_literals(self) -> int:
        return self.dist.shape[0]


def twosat_val(ts: TwoSatInstance, mu: PseudoDistribution) -> float:
    """Average probability, over clauses, that both literals come out false."""
    if ts.num_clauses == 0:
        return 0.0
    total = 0.0
    for v, w, q1, q2 in ts.clauses:
        total += _joint_prob(mu, int(ts.orig_vars[v]), int(q1), int(ts.orig_vars[w]), int(q2))
    return total / ts.num_clauses


def _joint_prob(mu: PseudoDistribution, va: int, ba: int, vb: int, bb: int) -> float:
    """Pr[sigma_va = ba and sigma_vb = bb] under the family's pair local."""
    if va == vb:
        return float(mu.local((va,))[ba]) if ba == bb else 0.0
    lo, hi = (va, vb) if va < vb else (vb, va)
    blo, bhi = (ba, bb) if va < vb else (bb, ba)
    return float(mu.local((lo, hi))[blo * 2 + bhi])


def pd_to_metric(ts: TwoSatInstance, mu: PseudoDistribution) -> MetricSolution:
    """Distances d(l1, l2) = Pr[l1 true, l2 false] read from pair locals.

    Needs family degree at least 3: the pairwise numbers alone come from
    degree 2, but their triangle inequalities are inherited from consistent
    triples.  The objective equals the number of clauses times the family's
    clause violation value.
    """
    if mu.degree < 3:
        raise InputError(f"metric construction needs degree at least 3, have {mu.degree}")
    m = ts.m
    n_lit = 2 * m
    dist = np.zeros((n_lit, n_lit))
    for a in range(n_lit):
        va, qa = int(ts.orig_vars[a >> 1]), a & 1
        for b in range(n_lit):
            vb, qb = int(ts.orig_vars[b >> 1]), b & 1
            # literal a true: sigma_va = 1 - qa; literal b false: sigma_vb = qb
            dist[a, b] = _joint_prob(mu, va, 1 - qa, vb, qb)
    objective = 0.0
    for v, w, q1, q2 in ts.clauses:
        l1 = 2 * int(v) + int(q1)
        l2 = 2 * int(w) + int(q2)
        objective += 0.5 * (dist[l1 ^ 1, l2] + dist[l2 ^ 1, l1])
    dist.flags.writeable = False
    return MetricSolution(dist, float(objective))


@dataclass(frozen=True)
class MetricCheckReport:
    max_negative: float
    max_antipodal_shortfall: float
    max_triangle_violation: float

    def passed(self, tol: float) -> bool:
        return (
            self.max_negative <= tol
            and self.max_antipodal_shortfall <= tol
            and self.max_triangle_violation <= tol
        )


def metric_check(metric: MetricSolution) -> MetricCheckReport:
    """Exhaustive feasibility measurement of a literal metric."""
    D = metric.dist
    n_lit = D.shape[0]
    neg = float(np.maximum(-D, 0.0).max(initial=0.0))
    idx = np.arange(0, n_lit, 2)
    antipodal = D[idx, idx + 1] + D[idx + 1, idx]
    shortfall = float(np.maximum(1.0 - antipodal, 0.0).max(initial=0.0))
    tri = D[:, None, :] - D[:, :, None] - D[None, :, :]
    return MetricCheckReport(neg, shortfall, float(tri.max(initial=0.0)))


def kprt_round(
    ts: TwoSatInstance, metric: MetricSolution, rng: np.random.Generator
) -> np.ndarray:
    """Round a literal metric to a total assignment by region growing.

    Builds the implication graph (each clause contributes both implications,
    with the metric's ordered distances as lengths), then repeatedly grows a
    ball around the more-likely-true literal of the lowest unassigned
    variable, cutting at an exponentially distributed radius below one half.
    Literals inside the cut ball are set true and their complements false;
    when a ball captures both literals of a variable the one nearer the
    center wins, ties ruling 0.  Every variable is eventually a center, so
    the output is always total and literal-consistent.
    """
    rep = metric_check(metric)
    if not rep.passed(1e-6):
        raise MetricError(
            f"metric infeasible: neg {rep.max_negative:.2e}, "
            f"antipodal {rep.max_antipodal_shortfall:.2e}, "
            f"triangle {rep.max_triangle_violation:.2e}"
        )
    m = ts.m
    n_lit = 2 * m
    if metric.num_literals != n_lit:
        raise InputError("metric size does not match the clause instance")
    E = np.full((n_lit, n_lit), np.inf)
    np.fill_diagonal(E, 0.0)
    for v, w, q1, q2 in ts.clauses:
        l1 = 2 * int(v) + int(q1)
        l2 = 2 * int(w) + int(q2)
        E[l1 ^ 1, l2] = min(E[l1 ^ 1, l2], metric.dist[l1 ^ 1, l2])
        E[l2 ^ 1, l1] = min(E[l2 ^ 1, l1], metric.dist[l2 ^ 1, l1])
    for k in range(n_lit):
        np.minimum(E, E[:, k, None] + E[None, k, :], out=E)

    lam = 2.0 * max(1.0, log2(n_lit))
    sigma = np.full(m, -1, dtype=np.int64)
    for v in range(m):
        if sigma[v] >= 0:
            continue
        pos, neg_ = 2 * v, 2 * v + 1
        center = pos if metric.dist[pos, neg_] >= metric.dist[neg_, pos] else neg_
        radius = min(float(rng.exponential(1.0 / lam)), 0.499999)
        ball = E[center] <= radius
        for u in range(m):
            if sigma[u] >= 0:
                continue
            in_pos, in_neg = ball[2 * u], ball[2 * u + 1]
            if in_pos and in_neg:
                d_pos, d_neg = E[center, 2 * u], E[center, 2 * u + 1]
                if d_pos < d_neg:
                    sigma[u] = 1
                elif d_neg < d_pos:
                    sigma[u] = 0
                else:
                    sigma[u] = 0
            elif in_pos:
                sigma[u] = 1
            elif in_neg:
                sigma[u] = 0
    if (sigma < 0).any():
        raise ContractError("region growing left a variable unassigned")
    return sigma.astype(np.uint8)


def twosat_violations(ts: TwoSatInstance, sigma: np.ndarray) -> int:
    """Number of clauses with both literals false under a total assignment."""
    sigma = np.asarray(sigma, dtype=np.int64)
    if sigma.shape != (ts.m,):
        raise InputError(f"assignment must have length {ts.m}")
    if ts.num_clauses == 0:
        return 0
    c = ts.clauses
    false1 = sigma[c[:, 0]] == c[:, 2]
    false2 = sigma[c[:, 1]] == c[:, 3]
    return int((false1 & false2).sum())


def twosat_brute(ts: TwoSatInstance, cap: int = BRUTE_CAP) -> tuple[np.ndarray, int]:
    """Exact minimum violation by enumeration, lexicographically smallest winner."""
    if ts.m > cap:
        raise InputError(f"{ts.m} variables exceed the enumeration cap {cap}")
    idx = np.arange(2**ts.m, dtype=np.int64)
    counts = np.zeros(idx.shape[0], dtype=np.int64)
    for v, w, q1, q2 in ts.clauses:
        bit_v = (idx >> (ts.m - 1 - int(v))) & 1
        bit_w = (idx >> (ts.m - 1 - int(w))) & 1
        counts += ((bit_v == q1) & (bit_w == q2)).astype(np.int64)
    best = int(np.argmin(counts))
    sigma = (best >> (ts.m - 1 - np.arange(ts.m))) & 1
    return sigma.astype(np.uint8), int(counts[best])
