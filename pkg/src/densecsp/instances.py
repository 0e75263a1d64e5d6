"""Not-all-equal constraint instances and their k-ary truth-table relatives.

The central object is :class:`Nae3Instance`: a collection of ternary
constraints, one per listed variable triple, where each constraint applies a
polarity (identity or complement) to each of its three variables and is
satisfied whenever the three mapped bits are not all equal.  An instance is
*complete* when it carries exactly one constraint on every triple; most of
the toolkit's guarantees are stated for complete instances, so generators
produce them by default and the solver refuses incomplete input unless
explicitly overridden.

:class:`KcspInstance` is the general k-ary form: one truth table per
k-subset, with the table bit for an assignment packed most-significant-bit
first by variable order.  The decision procedures in :mod:`densecsp.decide`
work on this representation.

Values are always fractions of violated constraints, so 0.0 means satisfied
everywhere and 1.0 means everything violated.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import IntEnum
from itertools import combinations
from math import ceil, comb
from typing import Sequence

import numpy as np

from .errors import InputError, InstanceFormatError
from .subsets import assignment_index, subset_array, triple_rank

# An Assignment is a length-n array of {0,1}; a PartialAssignment is a
# length-n float array over {0.0, 0.5, 1.0} where 0.5 marks an unfixed
# variable.  Plain arrays keep the numerics code free of wrapper types.
Assignment = np.ndarray
PartialAssignment = np.ndarray

UNFIXED = 0.5


class Polarity(IntEnum):
    """How a constraint reads one of its variables.

    ``positive`` passes the bit through; ``negative`` complements it.
    Applying either twice is the identity, which is what makes the global
    complement symmetry of not-all-equal constraints work.
    """

    positive = 0
    negative = 1

    def apply(self, bit: int) -> int:
        return bit ^ int(self)


def unfixed_vars(alpha: PartialAssignment) -> np.ndarray:
    """Indices still at the undecided marker value."""
    return np.flatnonzero(np.asarray(alpha) == UNFIXED)


def fixed_vars(alpha: PartialAssignment) -> np.ndarray:
    return np.flatnonzero(np.asarray(alpha) != UNFIXED)


@dataclass(frozen=True)
class Nae3Instance:
    """Ternary not-all-equal instance over variables 0..n-1.

    ``triples`` holds one sorted row (u < v < w) per constraint in
    lexicographic order; ``neg`` holds the matching polarity flags with 1
    meaning complement.  ``complete`` records whether every triple of
    range(n) appears exactly once; it is computed, not trusted from input.
    """

    n: int
    triples: np.ndarray
    neg: np.ndarray
    complete: bool

    @property
    def m(self) -> int:
        return self.triples.shape[0]

    @staticmethod
    def create(n: int, triples: np.ndarray, neg: np.ndarray) -> "Nae3Instance":
        if n < 3:
            raise InputError(f"need at least 3 variables, got n={n}")
        triples = np.ascontiguousarray(np.asarray(triples, dtype=np.int64).reshape(-1, 3))
        neg = np.ascontiguousarray(np.asarray(neg, dtype=np.uint8).reshape(-1, 3))
        if triples.shape != neg.shape:
            raise InputError("polarity array shape does not match triple array")
        if triples.size:
            if triples.min() < 0 or triples.max() >= n:
                raise InputError("variable index out of range")
            if not (triples[:, 0] < triples[:, 1]).all() or not (triples[:, 1] < triples[:, 2]).all():
                raise InputError("each constraint triple must be strictly ascending")
            order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
            triples = triples[order]
            neg = neg[order]
            ranks = triple_rank(n, triples)
            dup = np.flatnonzero(ranks[1:] == ranks[:-1])
            if dup.size:
                t = tuple(int(x) for x in triples[dup[0]])
                raise InputError(f"duplicate constraint on triple {t}")
        complete = triples.shape[0] == comb(n, 3)
        triples.flags.writeable = False
        neg.flags.writeable = False
        return Nae3Instance(n, triples, neg, complete)

    @staticmethod
    def complete_from_neg(n: int, neg: np.ndarray) -> "Nae3Instance":
        """Complete instance with the given per-triple polarity flags."""
        return Nae3Instance.create(n, subset_array(n, 3), neg)

    def row_of(self, triple: tuple[int, int, int]) -> int:
        """Constraint row of a sorted triple; raises if the triple is absent."""
        r = int(triple_rank(self.n, np.asarray(triple)[None, :])[0])
        if self.complete:
            return r
        pos = int(np.searchsorted(triple_rank(self.n, self.triples), r))
        if pos >= self.m or tuple(self.triples[pos]) != tuple(triple):
            raise InputError(f"no constraint on triple {tuple(triple)}")
        return pos


def eval_nae(inst: Nae3Instance, triple: Sequence[int], bits: Sequence[int]) -> bool:
    """Whether the constraint on ``triple`` is satisfied by the given bits.

    ``bits`` are the values of the three variables in ascending variable
    order.  Satisfied means the mapped literals are not all equal.
    """
    row = inst.row_of(tuple(int(v) for v in triple))
    mapped = np.asarray(bits, dtype=np.uint8) ^ inst.neg[row]
    return not (mapped[0] == mapped[1] == mapped[2])


def val_assignment(inst: Nae3Instance, alpha: Assignment) -> float:
    """Fraction of constraints ``alpha`` violates."""
    alpha = np.asarray(alpha, dtype=np.uint8)
    if alpha.shape != (inst.n,):
        raise InputError(f"assignment must have length {inst.n}")
    mapped = alpha[inst.triples] ^ inst.neg
    violated = (mapped[:, 0] == mapped[:, 1]) & (mapped[:, 1] == mapped[:, 2])
    return float(violated.mean()) if inst.m else 0.0


def violated_mask(inst: Nae3Instance, alpha: Assignment) -> np.ndarray:
    """Per-constraint violation indicators for a total assignment."""
    alpha = np.asarray(alpha, dtype=np.uint8)
    mapped = alpha[inst.triples] ^ inst.neg
    return (mapped[:, 0] == mapped[:, 1]) & (mapped[:, 1] == mapped[:, 2])


@dataclass(frozen=True)
class KcspInstance:
    """Complete k-ary instance given by one truth table per k-subset.

    ``tables`` has shape (C(n,k), 2**k) in lexicographic subset order; entry
    [r, j] is 1 when the constraint on the r-th subset accepts the
    assignment whose bits, most significant first by variable order, spell
    j.  Every table must reject at least one assignment.
    """

    n: int
    k: int
    tables: np.ndarray

    @property
    def m(self) -> int:
        return self.tables.shape[0]

    @staticmethod
    def create(n: int, k: int, tables: np.ndarray) -> "KcspInstance":
        if k < 1 or k > n:
            raise InputError(f"arity k={k} out of range for n={n}")
        tables = np.ascontiguousarray(np.asarray(tables, dtype=np.uint8))
        want = (comb(n, k), 2**k)
        if tables.shape != want:
            raise InputError(f"table array must have shape {want}, got {tables.shape}")
        if tables.max(initial=0) > 1:
            raise InputError("table entries must be 0 or 1")
        if tables.size and tables.all(axis=1).any():
            bad = int(np.flatnonzero(tables.all(axis=1))[0])
            raise InputError(f"constraint {bad} accepts every assignment; tables need a 0 bit")
        tables.flags.writeable = False
        return KcspInstance(n, k, tables)

    @staticmethod
    def from_nae(inst: Nae3Instance) -> "KcspInstance":
        """Truth-table form of a complete not-all-equal instance."""
        if not inst.complete:
            raise InputError("truth-table conversion is defined for complete instances")
        patterns = np.arange(8, dtype=np.uint8)
        bits = np.stack([(patterns >> 2) & 1, (patterns >> 1) & 1, patterns & 1], axis=1)
        mapped = bits[None, :, :] ^ inst.neg[:, None, :]
        all_equal = (mapped[:, :, 0] == mapped[:, :, 1]) & (mapped[:, :, 1] == mapped[:, :, 2])
        return KcspInstance.create(inst.n, 3, (~all_equal).astype(np.uint8))


def val_kcsp(inst: KcspInstance, alpha: Assignment) -> float:
    """Fraction of truth-table constraints ``alpha`` violates."""
    alpha = np.asarray(alpha, dtype=np.uint8)
    if alpha.shape != (inst.n,):
        raise InputError(f"assignment must have length {inst.n}")
    subs = subset_array(inst.n, inst.k)
    idx = assignment_index(alpha[subs])
    sat = inst.tables[np.arange(inst.m), idx]
    # count violations rather than subtracting a satisfaction mean, so the
    # result is bit-identical to the clause-representation val
    return int(inst.m - sat.sum()) / inst.m if inst.m else 0.0


def gen_random_nae3(n: int, seed: int) -> Nae3Instance:
    """Complete instance with polarities drawn independently and uniformly.

    Byte-identical output for equal (n, seed).
    """
    rng = np.random.default_rng(seed)
    neg = rng.integers(0, 2, size=(comb(n, 3), 3), dtype=np.uint8)
    return Nae3Instance.complete_from_neg(n, neg)


@dataclass(frozen=True)
class PlantedInstance:
    """A planted complete instance together with its generation record."""

    instance: Nae3Instance
    planted: Assignment
    violated_count: int


def gen_planted_nae3(n: int, p: float, seed: int) -> PlantedInstance:
    """Complete instance planted around a hidden assignment.

    A hidden assignment is drawn uniformly; each triple independently, with
    probability 1-p, receives a polarity pattern drawn uniformly from the six
    the hidden assignment satisfies, and otherwise from the two it violates.
    ``violated_count`` is exactly the number of corrupted triples.
    """
    if not 0.0 <= p <= 1.0:
        raise InputError(f"corruption probability must lie in [0,1], got {p}")
    rng = np.random.default_rng(seed)
    planted = rng.integers(0, 2, size=n, dtype=np.uint8)
    m = comb(n, 3)
    trips = subset_array(n, 3)
    bits = planted[trips]
    # The two polarity patterns a given triple assignment violates are the
    # assignment itself and its complement; the other six satisfy it.
    v_lo = assignment_index(bits)
    v_hi = 7 - v_lo
    lo = np.minimum(v_lo, v_hi)
    hi = np.maximum(v_lo, v_hi)
    corrupt = rng.random(m) < p
    pick_bad = rng.integers(0, 2, size=m)
    pick_good = rng.integers(0, 6, size=m)
    good = pick_good + (pick_good >= lo)
    good = good + (good >= hi)
    pattern = np.where(corrupt, np.where(pick_bad == 0, v_lo, v_hi), good)
    neg = np.stack([(pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1], axis=1).astype(np.uint8)
    inst = Nae3Instance.complete_from_neg(n, neg)
    return PlantedInstance(inst, planted, int(corrupt.sum()))


def densify_reduction(
    n0: int, triples: np.ndarray, neg: np.ndarray, eps: float, max_n: int = 200
) -> Nae3Instance:
    """Pad a sparse clause list with dummy variables until it is nearly complete.

    Appends a block of dummy variables after the original n0 and adds, for
    every dummy triple and for every (original variable, dummy pair), one
    constraint whose polarity complements the lexicographically largest
    member.  Setting all dummies to 1 satisfies every added constraint, so
    optimal violation counts transfer between the two instances.

    The original clause list is taken raw (it may be empty, and n0 may be
    as small as 1).  The nominal dummy count ceil(3n/eps) always dwarfs what
    fits in memory for admissible eps, so the block is clamped to ``max_n``
    total variables; the output is therefore dense rather than
    (1-eps)-complete at this scale.
    """
    if not 0.0 < eps < 1e-3:
        raise InputError(f"eps must lie strictly between 0 and 1/1000, got {eps}")
    if n0 < 1:
        raise InputError(f"need at least one original variable, got n0={n0}")
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    neg = np.asarray(neg, dtype=np.uint8).reshape(-1, 3)
    if triples.size and triples.max() >= n0:
        raise InputError("original clause mentions a variable outside range(n0)")
    nominal = ceil(3 * n0 / eps)
    n_d = min(nominal, max_n - n0)
    if n_d < 2:
        raise InputError(f"max_n={max_n} leaves no room for dummy variables after n={n0}")
    n = n0 + n_d
    dummies = np.arange(n0, n, dtype=np.int64)

    rows = [triples]
    negs = [neg]

    dt = np.fromiter(
        (v for c in combinations(range(n0, n), 3) for v in c), dtype=np.int64
    ).reshape(-1, 3)
    rows.append(dt)
    negs.append(np.tile(np.array([0, 0, 1], dtype=np.uint8), (dt.shape[0], 1)))

    pair_i, pair_j = np.triu_indices(n_d, k=1)
    d1, d2 = dummies[pair_i], dummies[pair_j]
    for v in range(n0):
        vt = np.column_stack([np.full(d1.shape, v, dtype=np.int64), d1, d2])
        rows.append(vt)
        negs.append(np.tile(np.array([0, 0, 1], dtype=np.uint8), (vt.shape[0], 1)))

    return Nae3Instance.create(n, np.vstack(rows), np.vstack(negs))


def write_instance(inst: Nae3Instance | KcspInstance) -> str:
    """Canonical text form; the inverse of :func:`read_instance`.

    Variables are 1-based on disk and a polarity digit of 1 means positive,
    matching the header conventions documented in the README.
    """
    out = io.StringIO()
    if isinstance(inst, Nae3Instance):
        out.write(f"p nae3 {inst.n} {inst.m}\n")
        pos = 1 - inst.neg.astype(np.int64)
        for (u, v, w), (pu, pv, pw) in zip(inst.triples + 1, pos):
            out.write(f"{u} {v} {w} {pu} {pv} {pw}\n")
    elif isinstance(inst, KcspInstance):
        out.write(f"p kcsp {inst.n} {inst.k}\n")
        subs = subset_array(inst.n, inst.k)
        for row, sub in enumerate(subs + 1):
            table = "".join(str(int(b)) for b in inst.tables[row])
            out.write(" ".join(str(int(v)) for v in sub) + f" {table}\n")
    else:
        raise InputError(f"cannot serialize {type(inst).__name__}")
    return out.getvalue()


def read_instance(text: str) -> Nae3Instance | KcspInstance:
    """Parse the text form produced by :func:`write_instance`.

    Comment lines starting with ``c`` and blank lines are ignored.  Errors
    carry the 1-based line number.  A not-all-equal instance that does not
    cover every triple parses fine and is flagged incomplete; a truth-table
    instance must be complete.
    """
    header = None
    body_nae: list[list[int]] = []
    kcsp_rows: dict[tuple[int, ...], tuple[int, np.ndarray]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if header is not None:
                raise InstanceFormatError("second problem header", lineno)
            if len(parts) != 4 or parts[1] not in ("nae3", "kcsp"):
                raise InstanceFormatError(f"bad problem header {line!r}", lineno)
            try:
                header = (parts[1], int(parts[2]), int(parts[3]))
            except ValueError:
                raise InstanceFormatError(f"bad problem header {line!r}", lineno) from None
            continue
        if header is None:
            raise InstanceFormatError("constraint before problem header", lineno)
        if header[0] == "nae3":
            if len(parts) != 6:
                raise InstanceFormatError("expected 6 fields: u v w pu pv pw", lineno)
            try:
                vals = [int(x) for x in parts]
            except ValueError:
                raise InstanceFormatError(f"non-integer field in {line!r}", lineno) from None
            u, v, w, pu, pv, pw = vals
            n = header[1]
            if not (1 <= u < v < w <= n):
                raise InstanceFormatError(
                    f"variables must be 1-based and strictly ascending, got {u} {v} {w}", lineno
                )
            if not all(b in (0, 1) for b in (pu, pv, pw)):
                raise InstanceFormatError("polarity digits must be 0 or 1", lineno)
            body_nae.append([u - 1, v - 1, w - 1, 1 - pu, 1 - pv, 1 - pw])
        else:
            _, n, k = header
            if len(parts) != k + 1:
                raise InstanceFormatError(f"expected {k} variables and a table", lineno)
            try:
                subset = tuple(int(x) - 1 for x in parts[:k])
            except ValueError:
                raise InstanceFormatError(f"non-integer variable in {line!r}", lineno) from None
            if any(not 0 <= v < n for v in subset) or any(
                subset[i] >= subset[i + 1] for i in range(k - 1)
            ):
                raise InstanceFormatError("subset must be 1-based and strictly ascending", lineno)
            table = parts[k]
            if len(table) != 2**k or any(ch not in "01" for ch in table):
                raise InstanceFormatError(f"table must be {2**k} binary digits", lineno)
            if subset in kcsp_rows:
                prev = kcsp_rows[subset][0]
                raise InstanceFormatError(
                    f"duplicate table for subset {tuple(v + 1 for v in subset)} (first at line {prev})",
                    lineno,
                )
            kcsp_rows[subset] = (lineno, np.frombuffer(table.encode(), dtype=np.uint8) - ord("0"))
    if header is None:
        raise InstanceFormatError("missing problem header", None)
    kind, n, third = header
    if kind == "nae3":
        arr = np.asarray(body_nae, dtype=np.int64).reshape(-1, 6)
        if arr.shape[0] != third:
            raise InstanceFormatError(
                f"header announced {third} constraints, found {arr.shape[0]}", None
            )
        return Nae3Instance.create(n, arr[:, :3], arr[:, 3:])
    k = third
    subs = [tuple(int(v) for v in row) for row in subset_array(n, k)]
    missing = [s for s in subs if s not in kcsp_rows]
    if missing:
        s = tuple(v + 1 for v in missing[0])
        raise InstanceFormatError(
            f"truth-table instance must be complete; no table for subset {s}", None
        )
    tables = np.stack([kcsp_rows[s][1] for s in subs])
    return KcspInstance.create(n, k, tables)
