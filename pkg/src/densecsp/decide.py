"""Exact decision and counting for complete k-ary instances.

Completeness makes satisfying assignments scarce: every prefix of variables
is fully constrained among itself, so extending partial assignments one
variable at a time and discarding violators keeps the survivor set
polynomial (on the order of i**(k-1) after i variables).  The procedure
below exploits that: it is exact, and the survivor bound is enforced as a
hard cap so a blowup surfaces as an error instead of a hang.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError, SurvivorCapError
from .instances import KcspInstance
from .subsets import subset_row

DEFAULT_CAP_MULTIPLE = 64.0
_CELL_CHUNK = 1 << 22


@dataclass(frozen=True)
class DecideResult:
    satisfiable: bool
    assignments: np.ndarray
    survivor_counts: list[int]
    order: np.ndarray

    @property
    def count(self) -> int:
        return self.assignments.shape[0]


@dataclass(frozen=True)
class CountResult:
    count: int
    max_survivors: int
    ratios: list[float]


def _all_bits(width: int) -> np.ndarray:
    if width == 0:
        return np.zeros((1, 0), dtype=np.uint8)
    idx = np.arange(2**width, dtype=np.int64)
    return ((idx[:, None] >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)


def decide_csp(
    inst: KcspInstance,
    order: np.ndarray | None = None,
    seed: int | None = None,
    incremental: bool = True,
    cap_multiple: float = DEFAULT_CAP_MULTIPLE,
) -> DecideResult:
    """All satisfying assignments of a complete instance, by prefix extension.

    Starts from every assignment of the first k-1 variables (nothing
    constrains them yet) and extends one variable at a time, keeping a
    candidate only if every constraint inside the extended prefix holds.
    ``incremental`` checks just the constraints involving the new variable;
    that is equivalent to re-checking everything, because older constraints
    were checked when their own last variable arrived, and the slower full
    re-check variant exists so tests can confirm the equivalence.

    ``order`` permutes the processing order; passing ``seed`` instead draws
    a uniformly random order.  The survivor set is capped at
    ``cap_multiple * i**(k-1)`` after i variables; blowing through the cap
    raises :class:`SurvivorCapError`, since on complete instances that means
    a broken invariant rather than a hard input.

    Returned assignments are indexed by original variable and sorted
    lexicographically, so results are comparable across orders.
    """
    n, k = inst.n, inst.k
    if order is not None:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(n)):
            raise InputError("order must be a permutation of range(n)")
    elif seed is not None:
        order = np.random.default_rng(seed).permutation(n)
    else:
        order = np.arange(n, dtype=np.int64)

    pos_in_prefix = np.full(n, -1, dtype=np.int64)
    for i, v in enumerate(order):
        pos_in_prefix[v] = i
    powers = 1 << np.arange(k - 1, -1, -1, dtype=np.int64)

    survivors = _all_bits(k - 1)
    counts: list[int] = []
    for t in range(k - 1, n):
        x = int(order[t])
        s = survivors.shape[0]
        ext = np.empty((2 * s, t + 1), dtype=np.uint8)
        ext[0::2, :t] = survivors
        ext[1::2, :t] = survivors
        ext[0::2, t] = 0
        ext[1::2, t] = 1

        prefix = order[: t + 1].tolist()
        if incremental:
            subsets = [tuple(sorted(c + (x,))) for c in combinations(prefix[:t], k - 1)]
        else:
            subsets = [tuple(sorted(c)) for c in combinations(prefix, k)]
        if subsets and ext.shape[0]:
            rows = np.array([subset_row(n, sub) for sub in subsets], dtype=np.int64)
            cols = np.array(
                [[pos_in_prefix[v] for v in sub] for sub in subsets], dtype=np.int64
            )
            keep = np.ones(ext.shape[0], dtype=bool)
            step = max(1, _CELL_CHUNK // max(1, rows.shape[0] * k))
            for lo in range(0, ext.shape[0], step):
                blk = ext[lo : lo + step]
                idx = (blk[:, cols].astype(np.int64) * powers).sum(axis=2)
                sat = inst.tables[rows[None, :], idx]
                keep[lo : lo + blk.shape[0]] = sat.all(axis=1)
            ext = ext[keep]
        survivors = ext
        counts.append(survivors.shape[0])
        cap = cap_multiple * float(t + 1) ** (k - 1)
        if survivors.shape[0] > cap:
            raise SurvivorCapError(
                f"{survivors.shape[0]} survivors after {t + 1} variables "
                f"exceeds the cap {cap:.0f} = {cap_multiple} * {t + 1}**{k - 1}",
                step=t + 1,
                survivors=survivors.shape[0],
                cap=int(cap),
            )

    out = np.empty((survivors.shape[0], n), dtype=np.uint8)
    out[:, order] = survivors
    if out.shape[0] > 1:
        out = out[np.lexsort(tuple(out[:, c] for c in range(n - 1, -1, -1)))]
    return DecideResult(out.shape[0] > 0, out, counts, order)


def count_satisfying(
    inst: KcspInstance,
    order: np.ndarray | None = None,
    seed: int | None = None,
    cap_multiple: float = DEFAULT_CAP_MULTIPLE,
) -> CountResult:
    """Exact satisfying-assignment count with survivor-growth statistics.

    The ratio list holds survivors / i**(k-1) after each prefix length i,
    the quantity the survivor cap is stated in.
    """
    res = decide_csp(inst, order=order, seed=seed, cap_multiple=cap_multiple)
    ratios = [
        c / float(i) ** (inst.k - 1)
        for c, i in zip(res.survivor_counts, range(inst.k, inst.n + 1))
    ]
    return CountResult(res.count, max(res.survivor_counts, default=0), ratios)
