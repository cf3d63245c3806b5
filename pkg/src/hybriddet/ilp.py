"""Small dense integer linear programming solver.

Equality-constrained problems with nonnegative lower bounds and optional
finite upper bounds are solved by a two-phase bounded-variable simplex
(Dantzig pricing with a Bland's-rule fallback against cycling) wrapped in
a best-first branch-and-bound.  Instance sizes here are tiny, so the
basis inverse is refactored from scratch each pivot.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

__all__ = [
    "SolveStatus",
    "IlpProblem",
    "LpResult",
    "IlpSolution",
    "solve_lp_relaxation",
    "solve_ilp",
    "PIVOT_TOL",
    "INT_TOL",
]

#: Default numerical tolerances; overridable per call.
PIVOT_TOL = 1e-9
INT_TOL = 1e-6
_BLAND_AFTER = 40  # degenerate iterations before switching to Bland's rule


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class IlpProblem:
    """Minimize ``cost @ x`` over integer ``x`` with ``eq_matrix @ x == eq_rhs``
    and ``lower <= x <= upper`` (upper may be ``inf``)."""

    cost: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cost", np.asarray(self.cost, dtype=float))
        object.__setattr__(self, "eq_matrix", np.atleast_2d(np.asarray(self.eq_matrix, dtype=float)))
        object.__setattr__(self, "eq_rhs", np.asarray(self.eq_rhs, dtype=float))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        n = self.cost.size
        m, cols = self.eq_matrix.shape
        if cols != n or self.eq_rhs.size != m:
            raise ValueError("inconsistent constraint dimensions")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must match the variable count")
        if np.any(self.lower < 0):
            raise ValueError("lower bounds must be nonnegative")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bounds must not exceed upper bounds")
        if not np.all(np.isfinite(self.lower)):
            raise ValueError("lower bounds must be finite")

    @property
    def n_vars(self) -> int:
        return self.cost.size


class LpResult(NamedTuple):
    x: np.ndarray | None
    objective: float
    status: SolveStatus


@dataclass(frozen=True)
class IlpSolution:
    x: np.ndarray | None
    objective: float
    status: SolveStatus
    nodes_explored: int


class _SimplexState:
    """Mutable tableau-free simplex state over the extended variable set."""

    def __init__(self, A, b, lower, upper, x, basis, where):
        self.A = A
        self.b = b
        self.lower = lower
        self.upper = upper
        self.x = x
        self.basis = basis        # row -> variable index
        self.where = where        # -1 at lower, +1 at upper, 0 basic


def _run_simplex(state: _SimplexState, cost: np.ndarray, tol: float) -> SolveStatus:
    """Minimize ``cost @ x`` from a basic feasible point; mutates ``state``."""
    A, lower, upper = state.A, state.lower, state.upper
    m, n = A.shape
    degenerate_steps = 0
    last_obj = float(cost @ state.x)
    for _ in range(20000):
        basis = state.basis
        B = A[:, basis]
        y = np.linalg.solve(B.T, cost[basis])
        reduced = cost - A.T @ y
        use_bland = degenerate_steps > _BLAND_AFTER

        movable = upper > lower  # fixed variables can never enter
        cand_low = (state.where == -1) & movable & (reduced < -tol)
        cand_up = (state.where == 1) & movable & (reduced > tol)
        candidates = np.where(cand_low | cand_up)[0]
        if candidates.size == 0:
            return SolveStatus.OPTIMAL
        if use_bland:
            enter = int(candidates[0])
        else:
            enter = int(candidates[np.argmax(np.abs(reduced[candidates]))])
        sigma = 1.0 if state.where[enter] == -1 else -1.0

        w = np.linalg.solve(B, A[:, enter])
        # Ratio test: basic variables move by -sigma * t * w; the entering
        # variable may also flip straight to its other bound.
        t_best = upper[enter] - lower[enter]
        leave_row = -1  # -1 encodes the bound flip
        leave_to = 0
        for i in range(m):
            delta = sigma * w[i]
            bi = basis[i]
            if delta > tol:
                limit = (state.x[bi] - lower[bi]) / delta
                to = -1
            elif delta < -tol:
                if not math.isfinite(upper[bi]):
                    continue
                limit = (upper[bi] - state.x[bi]) / (-delta)
                to = 1
            else:
                continue
            if limit < t_best - tol or (
                limit < t_best + tol
                and leave_row >= 0
                and bi < basis[leave_row]
            ):
                t_best = limit
                leave_row = i
                leave_to = to
        if not math.isfinite(t_best):
            return SolveStatus.UNBOUNDED
        t = max(t_best, 0.0)

        state.x[basis] -= sigma * t * w
        if leave_row < 0:
            # Bound flip: entering variable crosses to its other bound.
            state.x[enter] = upper[enter] if sigma > 0 else lower[enter]
            state.where[enter] = 1 if sigma > 0 else -1
        else:
            leaving = basis[leave_row]
            state.x[leaving] = lower[leaving] if leave_to == -1 else upper[leaving]
            state.where[leaving] = leave_to
            start = lower[enter] if sigma > 0 else upper[enter]
            state.x[enter] = start + sigma * t
            state.basis[leave_row] = enter
            state.where[enter] = 0

        obj = float(cost @ state.x)
        if obj >= last_obj - 1e-12:
            degenerate_steps += 1
        else:
            degenerate_steps = 0
        last_obj = obj
    raise RuntimeError("simplex failed to terminate")


def solve_lp_relaxation(problem: IlpProblem, tol: float = PIVOT_TOL) -> LpResult:
    """Solve the continuous relaxation with integrality dropped.

    Phase 1 introduces one artificial per row to find a basic feasible
    point; a positive phase-1 optimum means the system is infeasible.
    Artificials are then frozen at zero and the true cost is optimized.
    """
    n = problem.n_vars
    m = problem.eq_matrix.shape[0]
    structural = problem.eq_matrix.copy()
    b = problem.eq_rhs.copy()
    x0 = problem.lower.copy()
    resid = b - structural @ x0
    flip = resid < 0
    structural[flip, :] *= -1.0
    b[flip] *= -1.0
    resid = np.abs(resid)
    A = np.hstack([structural, np.eye(m)])

    lower = np.concatenate([problem.lower, np.zeros(m)])
    upper = np.concatenate([problem.upper, np.full(m, np.inf)])
    x = np.concatenate([x0, resid])
    basis = np.arange(n, n + m)
    where = np.concatenate([-np.ones(n, dtype=np.int8), np.zeros(m, dtype=np.int8)])
    state = _SimplexState(A, b, lower, upper, x, basis, where)

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    status = _run_simplex(state, phase1_cost, tol)
    if status is not SolveStatus.OPTIMAL or float(phase1_cost @ state.x) > 1e-7:
        return LpResult(None, math.nan, SolveStatus.INFEASIBLE)

    # Freeze artificials at zero for phase 2 (basic ones stay degenerate).
    state.upper[n:] = 0.0
    state.x[n:] = 0.0
    phase2_cost = np.concatenate([problem.cost, np.zeros(m)])
    status = _run_simplex(state, phase2_cost, tol)
    if status is SolveStatus.UNBOUNDED:
        return LpResult(None, -math.inf, SolveStatus.UNBOUNDED)
    xs = state.x[:n].copy()
    return LpResult(xs, float(problem.cost @ xs), SolveStatus.OPTIMAL)


def solve_ilp(
    problem: IlpProblem,
    int_tol: float = INT_TOL,
    prune_tol: float = 1e-9,
) -> IlpSolution:
    """Globally optimal integer solution via best-first branch and bound.

    Nodes are ordered by their parent's relaxation objective; branching
    picks the variable farthest from integrality (lowest index on ties)
    and splits on floor/ceil bounds.  A node is pruned when its relaxation
    cannot improve the incumbent by more than ``prune_tol``.
    """
    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (-math.inf, counter, problem.lower.copy(), problem.upper.copy()))
    incumbent_x: np.ndarray | None = None
    incumbent_obj = math.inf
    nodes = 0

    while heap:
        bound, _, lo, up = heapq.heappop(heap)
        if bound >= incumbent_obj - prune_tol:
            continue
        if np.any(lo > up):
            continue
        sub = IlpProblem(problem.cost, problem.eq_matrix, problem.eq_rhs, lo, up)
        rel = solve_lp_relaxation(sub)
        nodes += 1
        if rel.status is SolveStatus.INFEASIBLE:
            continue
        if rel.status is SolveStatus.UNBOUNDED:
            if incumbent_x is None and nodes == 1:
                return IlpSolution(None, -math.inf, SolveStatus.UNBOUNDED, nodes)
            raise RuntimeError("unbounded subproblem below a bounded root")
        if rel.objective >= incumbent_obj - prune_tol:
            continue
        frac = np.abs(rel.x - np.round(rel.x))
        worst = int(np.argmax(frac))
        if frac[worst] <= int_tol:
            xi = np.round(rel.x)
            obj = float(problem.cost @ xi)
            if obj < incumbent_obj:
                incumbent_obj = obj
                incumbent_x = xi
            continue
        for child_lo, child_up in _branch(lo, up, worst, rel.x[worst]):
            counter += 1
            heapq.heappush(heap, (rel.objective, counter, child_lo, child_up))

    if incumbent_x is None:
        return IlpSolution(None, math.nan, SolveStatus.INFEASIBLE, nodes)
    return IlpSolution(
        incumbent_x.astype(np.int64),
        incumbent_obj,
        SolveStatus.OPTIMAL,
        nodes,
    )


def _branch(lo, up, var, value):
    left_lo, left_up = lo.copy(), up.copy()
    left_up[var] = math.floor(value)
    right_lo, right_up = lo.copy(), up.copy()
    right_lo[var] = math.ceil(value)
    return (left_lo, left_up), (right_lo, right_up)
