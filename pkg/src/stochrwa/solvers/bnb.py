"""Branch-and-bound for mixed-binary models, with lazy-cut callbacks.

Nodes are explored best-bound-first; branching picks the most fractional
integer column (lowest index on ties).  A callback, when given, is invoked
with every node relaxation solution and its integrality flag and may return
violated rows; these are added to the model globally and the node re-solved,
so an integral point only becomes incumbent once the callback accepts it.
The search is deterministic: no randomization anywhere, FIFO tie-breaks.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..lpmodel import LpModel, RowKey
from .types import LpSolution, MipSolution, SolveStatus, SolverConfig, SolverError
from . import simplex


@dataclass(frozen=True)
class CutRow:
    """A lazy row returned by a callback (sense fixed to <=)."""

    key: RowKey
    coeffs: tuple[tuple[int, float], ...]
    rhs: float
    family: str = "cut"


@dataclass
class NodeSolution:
    """What a callback sees: the node relaxation solution."""

    values: np.ndarray
    objective: float
    is_integral: bool
    depth: int


CutCallback = Callable[[NodeSolution], Sequence[CutRow]]
LpSolveFn = Callable[..., LpSolution]


@dataclass(order=True)
class _Node:
    sort_key: tuple = field(compare=True)
    bound: float = field(compare=False, default=math.inf)
    depth: int = field(compare=False, default=0)
    lower: np.ndarray = field(compare=False, default=None)
    upper: np.ndarray = field(compare=False, default=None)


def solve_mip(
    model: LpModel,
    config: SolverConfig | None = None,
    callback: CutCallback | None = None,
    lp_solve: LpSolveFn = simplex.solve_lp,
) -> MipSolution:
    """Solve ``model`` to the configured gap, honoring lazy cuts.

    Integer columns must carry finite bounds.  Returns the incumbent with
    the best remaining bound; on hitting the time limit the current
    incumbent and gap are reported (status ``TIME_LIMIT``).
    """
    config = config or SolverConfig()
    t0 = time.monotonic()
    int_cols = np.flatnonzero(model.integer_mask())
    lower0, upper0 = model.bound_arrays()
    for j in int_cols:
        if not (math.isfinite(lower0[j]) and math.isfinite(upper0[j])):
            raise SolverError(f"integer column {model.var_key(int(j))} lacks finite bounds")

    serial = itertools.count()
    incumbent: np.ndarray | None = None
    incumbent_obj = -math.inf
    node_count = 0
    cut_counts: dict[str, int] = {}
    heap: list[_Node] = []
    heapq.heappush(heap, _Node((-math.inf, next(serial)), math.inf, 0, lower0, upper0))
    timed_out = False
    stopped_bound = -math.inf

    def rel_gap(bound: float) -> float:
        if incumbent is None:
            return math.inf
        return (bound - incumbent_obj) / max(1.0, abs(incumbent_obj))

    while heap:
        if time.monotonic() - t0 > config.time_limit_seconds:
            timed_out = True
            break
        node = heapq.heappop(heap)
        if incumbent is not None and rel_gap(node.bound) <= config.tol_obj:
            # Best-bound order: nothing left can improve beyond tolerance.
            stopped_bound = node.bound
            heap.clear()
            break

        sol = lp_solve(model, config, var_bounds=(node.lower, node.upper))
        node_count += 1
        if sol.status is SolveStatus.INFEASIBLE:
            continue
        if sol.status is SolveStatus.UNBOUNDED:
            return MipSolution(SolveStatus.UNBOUNDED, math.inf, None, math.inf, node_count)
        if sol.status is SolveStatus.ITERATION_LIMIT:
            raise SolverError("LP iteration limit inside branch and bound")

        # Lazy-cut loop: re-solve until the callback accepts this node.
        while True:
            if incumbent is not None and rel_gap(sol.objective) <= config.tol_obj:
                break
            frac_j = _most_fractional(sol.primal, int_cols, config.tol_int)
            if callback is None:
                break
            cuts = callback(
                NodeSolution(sol.primal, sol.objective, frac_j is None, node.depth)
            )
            if not cuts:
                break
            for cut in cuts:
                model.add_row(cut.key, cut.coeffs, "<=", cut.rhs)
                cut_counts[cut.family] = cut_counts.get(cut.family, 0) + 1
            if time.monotonic() - t0 > config.time_limit_seconds:
                timed_out = True
                break
            sol = lp_solve(model, config, var_bounds=(node.lower, node.upper))
            if sol.status is SolveStatus.INFEASIBLE:
                break
            if sol.status is not SolveStatus.OPTIMAL:
                raise SolverError(f"unexpected LP status {sol.status} after cuts")
        if timed_out:
            # The last relaxation objective still bounds this subtree.
            back = min(node.bound, sol.objective) if sol.status is SolveStatus.OPTIMAL else node.bound
            heapq.heappush(heap, _Node((-back, next(serial)), back, node.depth, node.lower, node.upper))
            break
        if sol.status is SolveStatus.INFEASIBLE:
            continue
        if incumbent is not None and rel_gap(sol.objective) <= config.tol_obj:
            continue

        frac_j = _most_fractional(sol.primal, int_cols, config.tol_int)
        if frac_j is None:
            if sol.objective > incumbent_obj:
                incumbent = sol.primal.copy()
                incumbent_obj = sol.objective
            continue

        value = sol.primal[frac_j]
        for lo_add, hi_add in ((math.ceil(value), None), (None, math.floor(value))):
            lo = node.lower.copy()
            hi = node.upper.copy()
            if lo_add is not None:
                lo[frac_j] = lo_add
            if hi_add is not None:
                hi[frac_j] = hi_add
            if lo[frac_j] > hi[frac_j]:
                continue
            heapq.heappush(
                heap, _Node((-sol.objective, next(serial)), sol.objective, node.depth + 1, lo, hi)
            )
        if config.node_limit is not None and node_count >= config.node_limit:
            timed_out = True
            break

    elapsed = time.monotonic() - t0
    open_bound = max((n.bound for n in heap), default=-math.inf)
    open_bound = max(open_bound, stopped_bound)
    if incumbent is None:
        status = SolveStatus.TIME_LIMIT if timed_out else SolveStatus.INFEASIBLE
        return MipSolution(status, -math.inf, None, open_bound, node_count, cut_counts, elapsed)
    bound = max(incumbent_obj, open_bound)
    status = SolveStatus.TIME_LIMIT if timed_out else SolveStatus.OPTIMAL
    return MipSolution(status, incumbent_obj, incumbent, bound, node_count, cut_counts, elapsed)


def _most_fractional(values: np.ndarray, int_cols: np.ndarray, tol_int: float) -> int | None:
    """Most fractional integer column, lowest index on ties; None if integral."""
    if int_cols.size == 0:
        return None
    vals = values[int_cols]
    frac = np.abs(vals - np.round(vals))
    offenders = frac > tol_int
    if not np.any(offenders):
        return None
    score = np.where(offenders, np.abs(frac - 0.5), math.inf)
    best = np.min(score)
    pick = np.flatnonzero(score <= best + 1e-12)[0]
    return int(int_cols[pick])
