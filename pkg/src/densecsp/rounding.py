"""Staged rounding of a pseudodistribution into a single assignment.

Each stage looks at the still-unfixed variables and takes one of three
routes.  If few enough remain, enumerate the completions outright.  If the
residual expected violation is already large, hand the one- and two-unfixed
constraints to the metric two-clause solver and finish there.  Otherwise,
optionally condition on a small sampled tuple to break correlations, pick a
bias threshold whose induced fixing provably keeps an aggregate potential
almost non-increasing, and collapse every variable whose marginal clears the
threshold.  A stage that would fix nothing falls back to fixing the single
most biased variable, so the unfixed set strictly shrinks and the whole
process ends within n stages.

The aggregate potential weights constraints by how many unfixed variables
they still contain: with L the working scale (log of n, floored), a
constraint with i unfixed variables carries weight L**i, and the fully
unfixed class an extra factor tau.  All bookkeeping done per stage is
written into the trace, one record per stage, with stable field names.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import comb, log2
from typing import Optional

import numpy as np

from .errors import ContractError, DegreeBudgetError, InputError, UnsupportedConditioningError
from .exact import completion_opt
from .instances import (
    Assignment,
    Nae3Instance,
    PartialAssignment,
    UNFIXED,
    unfixed_vars,
)
from .localdist import (
    PseudoDistribution,
    pd_condition,
    pd_fix,
    pd_val,
    triple_violation_probs,
)
from .subsets import assignment_index, pair_rank


def scale_of(n: int, log_floor: float = 2.0) -> float:
    """The working scale L: binary log of n, never below the floor."""
    return max(log2(n), log_floor)


@dataclass(frozen=True)
class RoundingConfig:
    """Knobs of the staged rounding engine.

    ``tau`` weights the fully-unfixed constraint class in the aggregate;
    ``epsilon`` is the slack allowed on the aggregate when accepting a
    conditioning tuple; a stage whose residual value exceeds
    1/(delta_2sat_threshold_factor * tau) exits through the two-clause
    solver; below ``n_bruteforce`` unfixed variables the stage enumerates.
    """

    tau: float
    epsilon: float
    t_pairs: int = 2
    r_max: int = 4
    samples_per_stage: int = 200
    n_bruteforce: int = 15
    delta_2sat_threshold_factor: float = 10.0
    log_floor: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.tau < 1.0:
            raise InputError(f"tau must be at least 1, got {self.tau}")
        if not 0.0 < self.epsilon < 1.0:
            raise InputError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if self.t_pairs < 1:
            raise InputError(f"t_pairs must be at least 1, got {self.t_pairs}")
        if self.n_bruteforce < 3:
            raise InputError(f"n_bruteforce must be at least 3, got {self.n_bruteforce}")

    @staticmethod
    def for_instance(n: int, log_floor: float = 2.0, **overrides) -> "RoundingConfig":
        """Defaults scaled to the instance: tau = L**2, epsilon = 1/(10 L)."""
        ell = scale_of(n, log_floor)
        params = {"tau": ell**2, "epsilon": 1.0 / (10.0 * ell), "log_floor": log_floor}
        params.update(overrides)
        return RoundingConfig(**params)


@dataclass(frozen=True)
class LpClassValues:
    """Summed violation probabilities split by unfixed-variable count."""

    lp0: float
    lp1: float
    lp2: float
    lp3: float

    def total(self) -> float:
        return self.lp0 + self.lp1 + self.lp2 + self.lp3

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lp0, self.lp1, self.lp2, self.lp3)


@dataclass
class StageRecord:
    stage: int
    n_unfixed: int
    delta: float
    cond_size: int
    fixed_count: int
    theta: float
    lp0_before: float
    lp1_before: float
    lp2_before: float
    lp3_before: float
    lp0_after: float
    lp1_after: float
    lp2_after: float
    lp3_after: float
    aggregate_before: float
    aggregate_after: float
    branch: str


@dataclass
class RoundingTrace:
    stages: list[StageRecord] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.stages)

    def to_dict(self) -> dict:
        return {"depth": self.depth, "stages": [asdict(r) for r in self.stages]}


def fixed_set(
    mu: PseudoDistribution, within: np.ndarray, xi: float
) -> tuple[np.ndarray, np.ndarray]:
    """Variables of ``within`` whose smaller marginal mass is at most xi.

    Returns the qualifying variables and their ruling bits (the bit holding
    mass at least 1 - xi; an exact half-half marginal only qualifies when
    xi >= 1/2 and then rules 0).
    """
    W = np.asarray(within, dtype=np.int64)
    singles = mu.singles()[W]
    minb = singles.min(axis=1)
    mask = minb <= xi
    return W[mask], singles[mask].argmax(axis=1).astype(np.int64)


def lp_class_values(
    inst: Nae3Instance, mu: PseudoDistribution, unfixed: np.ndarray
) -> LpClassValues:
    """Split the summed violation probabilities by unfixed-variable count."""
    member = np.zeros(inst.n, dtype=bool)
    member[np.asarray(unfixed, dtype=np.int64)] = True
    cnt = member[inst.triples].sum(axis=1)
    viol = triple_violation_probs(inst, mu)
    sums = np.zeros(4)
    np.add.at(sums, cnt, viol)
    return LpClassValues(*(float(x) for x in sums))


def aggregate_value(
    lpv: LpClassValues, tau: float, n: int, log_floor: float = 2.0
) -> float:
    """Potential tau*L^3*lp3 + L^2*lp2 + L*lp1 + lp0 at scale L."""
    ell = scale_of(n, log_floor)
    return tau * ell**3 * lpv.lp3 + ell**2 * lpv.lp2 + ell * lpv.lp1 + lpv.lp0


def threshold_candidates(
    mu: PseudoDistribution, unfixed: np.ndarray, tau: float, delta: float
) -> np.ndarray:
    """The candidate thresholds: tau*delta, 2*tau*delta, and every unfixed
    variable's smaller marginal mass falling in that closed interval.

    Sorted ascending without duplicates; at most |unfixed| + 2 entries, so a
    scan over them is cheap.
    """
    W = np.asarray(unfixed, dtype=np.int64)
    t = tau * delta
    biases = mu.singles()[W].min(axis=1)
    inside = biases[(biases >= t) & (biases <= 2 * t)]
    return np.unique(np.concatenate([[t, 2 * t], inside]))


_FREE_SUM = {}


def _free_sum_matrix(mask: int) -> np.ndarray:
    """8x8 matrix folding a triple's local onto its unfixed bit pattern.

    Entry [a, v] is 1 when assignments a and v agree off ``mask``; right
    multiplication gives, for each packed v, the total old mass that lands
    on v once the masked positions collapse.
    """
    M = _FREE_SUM.get(mask)
    if M is None:
        M = np.zeros((8, 8))
        for a in range(8):
            for v in range(8):
                if (a & ~mask & 7) == (v & ~mask & 7):
                    M[a, v] = 1.0
        M.flags.writeable = False
        _FREE_SUM[mask] = M
    return M


def _viol_after_fix(
    inst: Nae3Instance,
    mu: PseudoDistribution,
    fix_vars: np.ndarray,
    fix_bits: np.ndarray,
) -> np.ndarray:
    """Per-constraint violation probabilities of the family fixed at (vars, bits).

    Computed directly on the triple locals, without materializing the fixed
    family: collapse each local onto its non-fixed positions, then read off
    the two rejected assignments consistent with the fixed bits.
    """
    from .subsets import triple_rank

    bit_lookup = np.zeros(inst.n, dtype=np.int64)
    in_fix = np.zeros(inst.n, dtype=bool)
    in_fix[fix_vars] = True
    bit_lookup[fix_vars] = fix_bits
    hit = in_fix[inst.triples]
    weights = np.array([4, 2, 1], dtype=np.int64)
    masks = (hit * weights).sum(axis=1)
    targets = ((bit_lookup[inst.triples] * hit) * weights).sum(axis=1)

    rows = np.arange(inst.m) if inst.complete else triple_rank(inst.n, inst.triples)
    locals3 = mu.table(3)[rows]
    idx0 = assignment_index(inst.neg)
    viol = np.zeros(inst.m)
    for mask in np.unique(masks):
        sel = masks == mask
        folded = locals3[sel] @ _free_sum_matrix(int(mask))
        v0 = idx0[sel]
        t = targets[sel]
        ok0 = (v0 & mask) == t
        ok1 = ((7 - v0) & mask) == t
        r = np.arange(sel.sum())
        viol[sel] = np.where(ok0, folded[r, v0], 0.0) + np.where(ok1, folded[r, 7 - v0], 0.0)
    return viol


def _classes_from_viol(
    inst: Nae3Instance, viol: np.ndarray, unfixed: np.ndarray
) -> LpClassValues:
    member = np.zeros(inst.n, dtype=bool)
    member[np.asarray(unfixed, dtype=np.int64)] = True
    cnt = member[inst.triples].sum(axis=1)
    sums = np.zeros(4)
    np.add.at(sums, cnt, viol)
    return LpClassValues(*(float(x) for x in sums))


def bounded_increase_check(
    inst: Nae3Instance,
    mu: PseudoDistribution,
    unfixed: np.ndarray,
    theta: float,
    tau: float,
    delta: float,
    ell: float,
) -> bool:
    """Whether fixing at threshold ``theta`` keeps the aggregate nearly flat.

    Accepts when the re-partitioned aggregate after fixing exceeds the
    current one by at most (6/L) of it plus 12*tau*delta*L^2*C(|unfixed|,3).
    """
    W = np.asarray(unfixed, dtype=np.int64)
    before = aggregate_value_at(lp_class_values(inst, mu, W), tau, ell)
    F, omega = fixed_set(mu, W, theta)
    viol_after = _viol_after_fix(inst, mu, F, omega)
    remaining = np.setdiff1d(W, F)
    after = aggregate_value_at(_classes_from_viol(inst, viol_after, remaining), tau, ell)
    allowance = (6.0 / ell) * before + 12.0 * tau * delta * ell**2 * comb(len(W), 3)
    return after - before <= allowance + 1e-12


def aggregate_value_at(lpv: LpClassValues, tau: float, ell: float) -> float:
    """Aggregate potential at an explicit scale (internal variant)."""
    return tau * ell**3 * lpv.lp3 + ell**2 * lpv.lp2 + ell * lpv.lp1 + lpv.lp0


def delta_transfer_diag(
    inst: Nae3Instance,
    mu: PseudoDistribution,
    unfixed: np.ndarray,
    theta: float,
    tau: float,
) -> np.ndarray:
    """4x4 matrix of violation mass moving between unfixed-count classes.

    Entry [j, i] sums, over constraints with j unfixed variables now and i
    after fixing at threshold ``theta``, the violation probability under the
    fixed family.  Lower triangular because fixing only shrinks the unfixed
    set; row sums reproduce the post-fix class values.  ``tau`` is part of
    the stage signature for call-site symmetry; the matrix itself does not
    depend on it.
    """
    del tau
    W = np.asarray(unfixed, dtype=np.int64)
    F, omega = fixed_set(mu, W, theta)
    member_before = np.zeros(inst.n, dtype=bool)
    member_before[W] = True
    member_after = member_before.copy()
    member_after[F] = False
    cnt_before = member_before[inst.triples].sum(axis=1)
    cnt_after = member_after[inst.triples].sum(axis=1)
    viol = _viol_after_fix(inst, mu, F, omega)
    D = np.zeros((4, 4))
    np.add.at(D, (cnt_before, cnt_after), viol)
    return D


def _conditioned_stats(
    inst: Nae3Instance,
    mu: PseudoDistribution,
    cond: tuple[int, ...],
    gamma: tuple[int, ...],
    unfixed: np.ndarray,
) -> tuple[np.ndarray, LpClassValues] | None:
    """Unfixed-variable marginals and class values after conditioning.

    Returns None when the conditioning event has no usable support.  Avoids
    building the conditioned family: every needed quantity lives in locals
    of (cond union {v}) or (cond union triple).
    """
    p_event = float(mu.local(cond)[int(assignment_index(np.asarray(gamma)))])
    if p_event <= 1e-9:
        return None
    gamma_of = dict(zip(cond, gamma))
    W = np.asarray(unfixed, dtype=np.int64)
    singles = np.empty((len(W), 2))
    for i, v in enumerate(W):
        v = int(v)
        if v in gamma_of:
            b = gamma_of[v]
            singles[i] = (1.0 - b, float(b))
            continue
        U = tuple(sorted(set(cond) | {v}))
        vec = mu.local(U)
        u = len(U)
        pos = {x: k for k, x in enumerate(U)}
        base = 0
        for x, b in gamma_of.items():
            base |= b << (u - 1 - pos[x])
        p1 = vec[base | (1 << (u - 1 - pos[v]))] / p_event
        p0 = vec[base] / p_event
        singles[i] = (p0, p1)

    member = np.zeros(inst.n, dtype=bool)
    member[W] = True
    viol = np.empty(inst.m)
    for r in range(inst.m):
        S = tuple(int(x) for x in inst.triples[r])
        U = tuple(sorted(set(cond) | set(S)))
        vec = mu.local(U)
        u = len(U)
        pos = {x: k for k, x in enumerate(U)}
        base = 0
        ok = True
        for x, b in gamma_of.items():
            base |= b << (u - 1 - pos[x])
        total = 0.0
        neg = inst.neg[r]
        for e in (0, 1):
            idx = base
            consistent = True
            for c in range(3):
                v = S[c]
                bit = int(neg[c]) ^ e
                if v in gamma_of:
                    if gamma_of[v] != bit:
                        consistent = False
                        break
                else:
                    idx |= bit << (u - 1 - pos[v])
            if consistent:
                total += vec[idx] / p_event
        viol[r] = total
    cnt = member[inst.triples].sum(axis=1)
    sums = np.zeros(4)
    np.add.at(sums, cnt, viol)
    return singles, LpClassValues(*(float(x) for x in sums))


def condition_search(
    inst: Nae3Instance,
    mu: PseudoDistribution,
    unfixed: np.ndarray,
    cfg: RoundingConfig,
    rng: np.random.Generator,
) -> Optional[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Sample small tuples looking for a conditioning that unlocks fixing.

    Draws up to ``samples_per_stage`` tuples of unfixed variables (size
    cycling from 2*t_pairs up to 2*t_pairs + r_max as degree allows) and for
    each a joint value from its local.  Accepts immediately when the
    conditioned family would let the tau*delta threshold fix at least 1% of
    the unfixed variables while the aggregate grows by at most a (1+epsilon)
    factor; otherwise returns the aggregate-respecting candidate that fixes
    the most, or None when none qualifies.  Raises
    :class:`DegreeBudgetError` when even the smallest tuple would eat the
    degree needed by later stages.
    """
    W = np.asarray(unfixed, dtype=np.int64)
    base_size = 2 * cfg.t_pairs
    room = mu.degree - 3
    if room < base_size:
        raise DegreeBudgetError(
            f"conditioning needs degree at least {base_size + 3}, have {mu.degree}"
        )
    max_extra = min(cfg.r_max, room - base_size)
    delta = pd_val(inst, mu, W)
    xi = cfg.tau * delta
    lpv = lp_class_values(inst, mu, W)
    a_before = aggregate_value(lpv, cfg.tau, inst.n, cfg.log_floor)
    need = len(W) / 100.0
    ell = scale_of(inst.n, cfg.log_floor)

    best: tuple[int, tuple[tuple[int, ...], tuple[int, ...]]] | None = None
    for i in range(cfg.samples_per_stage):
        size = base_size + (i % (max_extra + 1))
        drawn = rng.choice(W, size=size, replace=True)
        C = tuple(sorted(set(int(v) for v in drawn)))
        local = np.maximum(mu.local(C), 0.0)
        total = local.sum()
        if total <= 0:
            continue
        gidx = int(rng.choice(local.shape[0], p=local / total))
        gamma = tuple(int((gidx >> (len(C) - 1 - k)) & 1) for k in range(len(C)))
        stats = _conditioned_stats(inst, mu, C, gamma, W)
        if stats is None:
            continue
        singles, lpv_c = stats
        a_after = aggregate_value_at(lpv_c, cfg.tau, ell)
        if a_after > (1.0 + cfg.epsilon) * a_before + 1e-12:
            continue
        fix_count = int((singles.min(axis=1) <= xi).sum())
        if fix_count >= need:
            return C, gamma
        if best is None or fix_count > best[0]:
            best = (fix_count, (C, gamma))
    return best[1] if best is not None else None


def _stall_pick(mu: PseudoDistribution, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The single most decided unfixed variable and its majority bit."""
    singles = mu.singles()[W]
    minb = singles.min(axis=1)
    v = int(np.argmin(minb))
    return W[v : v + 1], np.array([int(singles[v].argmax())], dtype=np.int64)


def round_pd(
    inst: Nae3Instance, mu_star: PseudoDistribution, cfg: RoundingConfig
) -> tuple[Assignment, RoundingTrace]:
    """Round a pseudodistribution to a total assignment, stage by stage.

    Returns the assignment and the per-stage trace.  The input family is
    never mutated; each stage works on the fixed family from the one before.
    """
    if mu_star.degree < 3:
        raise InputError(f"rounding needs degree at least 3, have {mu_star.degree}")
    rng = np.random.default_rng(cfg.seed)
    ell = scale_of(inst.n, cfg.log_floor)
    alpha: PartialAssignment = np.full(inst.n, UNFIXED)
    mu = mu_star
    trace = RoundingTrace()

    for stage in range(inst.n + 1):
        W = unfixed_vars(alpha)
        if len(W) == 0:
            break
        lpv = lp_class_values(inst, mu, W)
        a_before = aggregate_value_at(lpv, cfg.tau, ell)
        if len(W) < cfg.n_bruteforce:
            final, _ = completion_opt(inst, alpha)
            trace.stages.append(
                StageRecord(
                    stage, len(W), pd_val(inst, mu, W), 0, len(W), 0.0,
                    *lpv.as_tuple(), *lpv.as_tuple(), a_before, a_before, "bruteforce",
                )
            )
            return final, trace

        delta = pd_val(inst, mu, W)
        if delta > 1.0 / (cfg.delta_2sat_threshold_factor * cfg.tau):
            from .twosat import induce_2sat, kprt_round, pd_to_metric, twosat_brute

            ts = induce_2sat(inst, W, alpha)
            if ts.m <= 20:
                sub, _ = twosat_brute(ts)
            else:
                sub = kprt_round(ts, pd_to_metric(ts, mu), rng)
            assert (alpha[ts.orig_vars] == UNFIXED).all()
            alpha[ts.orig_vars] = sub
            trace.stages.append(
                StageRecord(
                    stage, len(W), delta, 0, len(W), 0.0,
                    *lpv.as_tuple(), *lpv.as_tuple(), a_before, a_before, "min2sat",
                )
            )
            return alpha.astype(np.uint8), trace

        cond: Optional[tuple[tuple[int, ...], tuple[int, ...]]] = None
        try:
            cond = condition_search(inst, mu, W, cfg, rng)
        except DegreeBudgetError:
            cond = None
        mu_t = mu
        cond_size = 0
        if cond is not None:
            C, gamma = cond
            try:
                mu_t = pd_condition(mu, C, gamma)
                cond_size = len(C)
            except UnsupportedConditioningError:
                mu_t = mu

        theta = 0.0
        for cand in threshold_candidates(mu_t, W, cfg.tau, delta)[::-1]:
            if bounded_increase_check(inst, mu_t, W, float(cand), cfg.tau, delta, ell):
                theta = float(cand)
                break
        F, omega = fixed_set(mu_t, W, theta)
        branch = "threshold"
        if len(F) == 0:
            F, omega = _stall_pick(mu_t, W)
            branch = "stall"
        mu = pd_fix(mu_t, tuple(int(v) for v in F), omega)
        assert (alpha[F] == UNFIXED).all(), "a ruled variable was already fixed"
        alpha[F] = omega
        remaining = unfixed_vars(alpha)
        lpv_after = lp_class_values(inst, mu, remaining)
        trace.stages.append(
            StageRecord(
                stage, len(W), delta, cond_size, len(F), theta,
                *lpv.as_tuple(), *lpv_after.as_tuple(),
                a_before, aggregate_value_at(lpv_after, cfg.tau, ell), branch,
            )
        )
    else:
        raise ContractError("rounding failed to terminate within n stages")
    return alpha.astype(np.uint8), trace


def round_simple(
    inst: Nae3Instance, mu_star: PseudoDistribution, cfg: RoundingConfig
) -> Assignment:
    """Ablation rounder: one random conditioning pair per stage, no search.

    Keeps the tau*delta fixing rule but drops the threshold scan, the
    aggregate bookkeeping, and the far-from-satisfiable exit.  Useful as a
    baseline when measuring what the full engine buys.
    """
    if mu_star.degree < 3:
        raise InputError(f"rounding needs degree at least 3, have {mu_star.degree}")
    rng = np.random.default_rng(cfg.seed)
    alpha: PartialAssignment = np.full(inst.n, UNFIXED)
    mu = mu_star
    for _ in range(inst.n + 1):
        W = unfixed_vars(alpha)
        if len(W) == 0:
            break
        delta = pd_val(inst, mu, W)
        if mu.degree >= 5 and len(W) >= 2:
            pair = tuple(sorted(int(v) for v in rng.choice(W, size=2, replace=False)))
            local = np.maximum(mu.local(pair), 0.0)
            if local.sum() > 0:
                gidx = int(rng.choice(4, p=local / local.sum()))
                try:
                    mu = pd_condition(mu, pair, ((gidx >> 1) & 1, gidx & 1))
                except UnsupportedConditioningError:
                    pass
        F, omega = fixed_set(mu, W, cfg.tau * delta)
        if len(F) == 0:
            F, omega = _stall_pick(mu, W)
        mu = pd_fix(mu, tuple(int(v) for v in F), omega)
        alpha[F] = omega
    else:
        raise ContractError("rounding failed to terminate within n stages")
    return alpha.astype(np.uint8)


def count_fixable(
    inst: Nae3Instance,
    mu: PseudoDistribution,
    within: np.ndarray,
    gamma_unsat: float,
    gamma_fix: float,
    gamma_rate: float,
) -> int:
    """How many variables have enough barely-violated, polarity-agreeing pairs.

    A variable u counts when, among pairs {v, w} of the other variables of
    ``within``, the fraction satisfying both conditions on the constraint
    {u, v, w} reaches ``gamma_rate``: violation probability at most
    ``gamma_unsat``, and the two mapped literals of v and w agreeing with
    probability at least ``gamma_fix`` under the pair's local distribution.
    """
    W = np.asarray(sorted(int(v) for v in within), dtype=np.int64)
    k = len(W)
    if k < 3:
        return 0
    from .subsets import subsets_within, triple_rank

    trips = subsets_within(tuple(int(v) for v in W), 3)
    if inst.complete:
        rows = triple_rank(inst.n, trips)
    else:
        want = triple_rank(inst.n, trips)
        have = triple_rank(inst.n, inst.triples)
        pos = np.searchsorted(have, want)
        ok = (pos < inst.m) & (have[np.minimum(pos, inst.m - 1)] == want)
        trips, rows = trips[ok], pos[ok]
    viol = triple_violation_probs(inst, mu)[rows]
    cond_unsat = viol <= gamma_unsat

    pair_table = mu.table(2)
    qual_count = np.zeros(inst.n, dtype=np.int64)
    others = ((1, 2), (0, 2), (0, 1))
    for p, (q, r) in enumerate(others):
        pv, pw = trips[:, q], trips[:, r]
        prow = pair_rank(inst.n, pv, pw)
        locals2 = pair_table[prow]
        same_pol = (inst.neg[rows, q] ^ inst.neg[rows, r]) == 0
        eq = np.where(
            same_pol, locals2[:, 0] + locals2[:, 3], locals2[:, 1] + locals2[:, 2]
        )
        qualifying = cond_unsat & (eq >= gamma_fix)
        np.add.at(qual_count, trips[:, p], qualifying.astype(np.int64))
    frac = qual_count[W] / comb(k - 1, 2)
    return int((frac >= gamma_rate).sum())
