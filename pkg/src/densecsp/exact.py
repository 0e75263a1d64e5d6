"""Exhaustive reference solvers and the comparison report.

These exist so everything else can be measured against ground truth.  They
enumerate assignments outright, chunked to keep memory flat, and they break
ties toward the lexicographically smallest assignment so results are stable
across runs and platforms.
"""

from __future__ import annotations

import hashlib
import time
from math import comb

import numpy as np

from . import __version__
from .errors import InputError
from .instances import (
    Assignment,
    Nae3Instance,
    PartialAssignment,
    UNFIXED,
    unfixed_vars,
    val_assignment,
    write_instance,
)

MAX_BRUTE_VARS = 24
_CHUNK = 1 << 14


def brute_opt(inst: Nae3Instance, cap: int = MAX_BRUTE_VARS) -> tuple[Assignment, float]:
    """Exact optimum by full enumeration.

    Returns the lexicographically smallest minimizer and the optimal violated
    fraction.  Refuses instances with more than ``cap`` variables.
    """
    alpha = np.full(inst.n, UNFIXED)
    return completion_opt(inst, alpha, cap=cap)


def completion_opt(
    inst: Nae3Instance, alpha: PartialAssignment, cap: int = MAX_BRUTE_VARS
) -> tuple[Assignment, float]:
    """Best total extension of a partial assignment, by enumeration.

    Fixed coordinates of ``alpha`` are kept; all completions of the rest are
    scored.  Ties break toward the lexicographically smallest completion
    (with the most significant position being the smallest free variable,
    this is the first minimum of the violation table).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (inst.n,):
        raise InputError(f"partial assignment must have length {inst.n}")
    free = unfixed_vars(alpha)
    f = free.shape[0]
    if f > cap:
        raise InputError(f"{f} free variables exceed the enumeration cap {cap}")
    base = np.zeros(inst.n, dtype=np.uint8)
    fixed = alpha != UNFIXED
    base[fixed] = alpha[fixed].astype(np.uint8)
    if f == 0:
        return base, val_assignment(inst, base)

    pos_of = np.full(inst.n, -1, dtype=np.int64)
    pos_of[free] = np.arange(f)
    touches = ~fixed[inst.triples].all(axis=1)
    fixed_rows = np.flatnonzero(~touches)
    base_violations = 0
    if fixed_rows.size:
        mapped = base[inst.triples[fixed_rows]] ^ inst.neg[fixed_rows]
        base_violations = int(
            ((mapped[:, 0] == mapped[:, 1]) & (mapped[:, 1] == mapped[:, 2])).sum()
        )

    live = np.flatnonzero(touches)
    counts = np.zeros(2**f, dtype=np.int64)
    pos = pos_of[inst.triples[live]]
    shifts = np.where(pos >= 0, f - 1 - pos, 0)
    is_free = pos >= 0
    const_bits = (base[inst.triples[live]] ^ inst.neg[live]).astype(np.int64)
    neg_live = inst.neg[live].astype(np.int64)
    # Two-level chunking (assignments x constraint blocks) keeps peak memory
    # near _CHUNK * _CBLOCK machine words regardless of instance size.
    _CBLOCK = 256
    for lo in range(0, 2**f, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, 2**f), dtype=np.int64)
        acc = np.zeros(idx.shape[0], dtype=np.int64)
        for b in range(0, live.shape[0], _CBLOCK):
            sl = slice(b, min(b + _CBLOCK, live.shape[0]))
            lit = []
            for c in range(3):
                bit = (idx[:, None] >> shifts[None, sl, c]) & 1
                lit.append(
                    np.where(is_free[None, sl, c], bit ^ neg_live[None, sl, c], const_bits[None, sl, c])
                )
            violated = (lit[0] == lit[1]) & (lit[1] == lit[2])
            acc += violated.sum(axis=1)
        counts[lo : lo + idx.shape[0]] = acc
    best = int(np.argmin(counts))
    out = base.copy()
    out[free] = (best >> (f - 1 - np.arange(f))) & 1
    total = base_violations + int(counts[best])
    return out, total / inst.m if inst.m else 0.0


def instance_hash(inst) -> str:
    """Stable content hash of an instance's canonical serialization."""
    return hashlib.sha256(write_instance(inst).encode()).hexdigest()


def ratio_report(
    inst: Nae3Instance,
    lp_value: float,
    outputs: dict[str, Assignment],
    seed: int | None = None,
    opt_cap: int = 20,
    extra: dict | None = None,
) -> dict:
    """Comparison record for one instance: relaxation value, optimum, ratios.

    The exact optimum is included only when the instance is small enough to
    enumerate.  Ratio conventions: 0/0 counts as 1, and a positive value over
    a zero denominator is reported as null rather than inventing a number.
    """
    t0 = time.perf_counter()
    opt_val: float | None = None
    if inst.n <= opt_cap:
        _, opt_val = brute_opt(inst)

    def ratio(num: float, den: float | None) -> float | None:
        if den is None:
            return None
        if den > 0:
            return num / den
        return 1.0 if num == 0 else None

    out_block = {}
    for name, alpha in outputs.items():
        v = val_assignment(inst, np.asarray(alpha))
        out_block[name] = {
            "val": v,
            "ratio_lp": ratio(v, lp_value),
            "ratio_opt": ratio(v, opt_val),
        }
    report = {
        "schema_version": 1,
        "toolkit_version": __version__,
        "instance": {
            "hash": instance_hash(inst),
            "n": inst.n,
            "m": inst.m,
            "complete": inst.complete,
        },
        "seed": seed,
        "lp_value": lp_value,
        "opt": opt_val,
        "outputs": out_block,
        "wall_time_s": time.perf_counter() - t0,
    }
    if extra:
        report.update(extra)
    return report
