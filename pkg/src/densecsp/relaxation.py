"""Linear relaxation over bounded-degree local distributions.

One LP variable per (subset, packed assignment) with subset size up to the
degree; the constraints say the empty-subset variable is 1 and every vector
marginalizes onto each one-smaller vector.  The objective averages, over all
constraints, the probability mass the triple's local vector puts on the two
rejected assignments.  Optima therefore lower-bound the instance optimum,
and tightening the degree can only raise them.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import DecodeError, InfeasibleRelaxationError, InputError, SizeBudgetError
from .instances import Nae3Instance
from .localdist import TOL_SOLVER, PseudoDistribution, pd_check
from .subsets import assignment_index, drop_rows, subset_array, triple_rank

DEFAULT_MAX_CELLS = 400_000


def relaxation_cells(n: int, degree: int) -> int:
    """The budget metric: number of subsets up to the degree, times 2**degree."""
    return sum(comb(n, s) for s in range(degree + 1)) * 2**degree


@dataclass(frozen=True)
class SaLpProblem:
    """A built relaxation: sparse equality system plus objective.

    Variables are laid out size by size, each size in lexicographic subset
    order, each subset in packed-assignment order; ``offsets[s]`` is where
    size s starts.  This fixed order is what makes solves reproducible.
    """

    n: int
    degree: int
    offsets: tuple[int, ...]
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    c: np.ndarray

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.a_eq.shape[0]

    def var_index(self, subset: tuple[int, ...], alpha: int) -> int:
        s = len(subset)
        from .subsets import subset_row

        return self.offsets[s] + subset_row(self.n, subset) * 2**s + alpha


def build_sa_lp(
    inst: Nae3Instance, degree: int = 6, max_cells: int = DEFAULT_MAX_CELLS
) -> SaLpProblem:
    """Assemble the degree-``degree`` relaxation of an instance.

    Raises :class:`SizeBudgetError` (carrying the computed cell count) when
    the relaxation would not fit the configured budget, so callers can lower
    the degree instead of thrashing.
    """
    if degree < 3:
        raise InputError(f"degree must be at least 3, got {degree}")
    if degree > inst.n:
        raise InputError(f"degree {degree} exceeds variable count {inst.n}")
    n = inst.n
    cells = relaxation_cells(n, degree)
    if cells > max_cells:
        raise SizeBudgetError(
            f"degree-{degree} relaxation over n={n} needs {cells} cells, budget is {max_cells}",
            cells,
        )
    sizes = [comb(n, s) * 2**s for s in range(degree + 1)]
    offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(sizes)]))
    num_vars = offsets[-1]

    rows_i: list[np.ndarray] = []
    cols_i: list[np.ndarray] = []
    vals_i: list[np.ndarray] = []
    row_counter = 0

    # Normalization: the empty-subset variable equals 1.
    rows_i.append(np.array([0]))
    cols_i.append(np.array([0]))
    vals_i.append(np.array([1.0]))
    row_counter = 1

    for s in range(1, degree + 1):
        subs_count = comb(n, s)
        children = drop_rows(n, s)
        half = 2 ** (s - 1)
        alphas = np.arange(half, dtype=np.int64)
        for j in range(s):
            hi = alphas >> (s - 1 - j)
            lo = alphas & ((1 << (s - 1 - j)) - 1)
            parent0 = (hi << (s - j)) | lo
            parent1 = parent0 | (1 << (s - 1 - j))
            rows_block = row_counter + np.arange(subs_count * half).reshape(subs_count, half)
            child_cols = (
                offsets[s - 1] + children[:, j : j + 1] * half + alphas[None, :]
            )
            parent_base = offsets[s] + np.arange(subs_count)[:, None] * 2**s
            for cols, val in (
                (child_cols, 1.0),
                (parent_base + parent0[None, :], -1.0),
                (parent_base + parent1[None, :], -1.0),
            ):
                rows_i.append(rows_block.ravel())
                cols_i.append(cols.ravel())
                vals_i.append(np.full(subs_count * half, val))
            row_counter += subs_count * half

    a_eq = sp.coo_matrix(
        (np.concatenate(vals_i), (np.concatenate(rows_i), np.concatenate(cols_i))),
        shape=(row_counter, num_vars),
    ).tocsr()
    b_eq = np.zeros(row_counter)
    b_eq[0] = 1.0

    c = np.zeros(num_vars)
    rows3 = np.arange(inst.m) if inst.complete else triple_rank(n, inst.triples)
    idx0 = assignment_index(inst.neg)
    weight = 1.0 / inst.m
    np.add.at(c, offsets[3] + rows3 * 8 + idx0, weight)
    np.add.at(c, offsets[3] + rows3 * 8 + (7 - idx0), weight)
    return SaLpProblem(n, degree, offsets, a_eq, b_eq, c)


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    residual: float


def solve_lp(problem: SaLpProblem, tol: float = TOL_SOLVER) -> LpSolution:
    """Minimize the built objective over the feasible polytope.

    The relaxation is feasible by construction (any product distribution
    satisfies it), so an infeasible status is treated as an internal error.
    Identical problems yield identical solutions.
    """
    res = linprog(
        problem.c,
        A_eq=problem.a_eq,
        b_eq=problem.b_eq,
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": min(tol, 1e-7),
            "dual_feasibility_tolerance": min(tol, 1e-7),
        },
    )
    if res.status == 2:
        raise InfeasibleRelaxationError(
            "relaxation reported infeasible; it admits the uniform distribution"
        )
    if res.status != 0 or res.x is None:
        raise InfeasibleRelaxationError(f"relaxation solve failed: {res.message}")
    x = np.asarray(res.x)
    residual = float(np.abs(problem.a_eq @ x - problem.b_eq).max())
    return LpSolution(x, float(res.fun), "optimal", residual)


def lp_to_pd(problem: SaLpProblem, solution: LpSolution) -> PseudoDistribution:
    """Decode a solution vector into a pseudodistribution.

    Entries in [-1e-9, 0) are solver dust and get clamped, then each vector
    is renormalized; anything worse fails the decode.  The result must pass
    the consistency check at solver tolerance.
    """
    x = solution.x
    if x.shape != (problem.num_vars,):
        raise DecodeError(f"solution has {x.shape[0]} entries, problem has {problem.num_vars}")
    low = float(x.min(initial=0.0))
    if low < -1e-9:
        raise DecodeError(f"solution entry {low} is negative beyond clamp tolerance")
    tables = []
    for s in range(problem.degree + 1):
        block = x[problem.offsets[s] : problem.offsets[s + 1]].reshape(-1, 2**s)
        block = np.maximum(block, 0.0)
        sums = block.sum(axis=1)
        if np.abs(sums - 1.0).max(initial=0.0) > 10 * TOL_SOLVER:
            raise DecodeError(
                f"size-{s} vectors sum as far as {np.abs(sums - 1.0).max():.3e} from 1"
            )
        tables.append(block / sums[:, None])
    mu = PseudoDistribution(problem.n, problem.degree, tables)
    report = pd_check(mu, TOL_SOLVER)
    if not report.passed(TOL_SOLVER):
        raise DecodeError(
            f"decoded family fails consistency: sum dev {report.max_sum_dev:.3e}, "
            f"marginal dev {report.max_consistency_dev:.3e}"
        )
    return mu


def write_lp_text(problem: SaLpProblem) -> str:
    """Plain-text LP interchange form (minimize section, equalities, bounds).

    Mainly for eyeballing small relaxations or feeding an external solver;
    variable y{i} is position i of the packed layout.
    """
    lines = ["Minimize", " obj:"]
    terms = np.flatnonzero(problem.c)
    lines.append(
        "  " + " + ".join(f"{problem.c[i]:.12g} y{i}" for i in terms)
    )
    lines.append("Subject To")
    a_coo = problem.a_eq.tocoo()
    by_row: dict[int, list[str]] = {}
    for r, c_, v in zip(a_coo.row, a_coo.col, a_coo.data):
        by_row.setdefault(int(r), []).append(f"{'+' if v >= 0 else '-'} {abs(v):.12g} y{c_}")
    for r in range(problem.num_constraints):
        lhs = " ".join(by_row.get(r, ["0 y0"])).lstrip("+ ")
        lines.append(f" e{r}: {lhs} = {problem.b_eq[r]:.12g}")
    lines.append("Bounds")
    lines.append(" 0 <= y0")
    lines.append("End")
    return "\n".join(lines) + "\n"
