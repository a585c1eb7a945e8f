"""LP adapter over scipy.optimize.linprog (HiGHS).

Same contract as the in-tree simplex, including the maximization dual
convention; useful as a faster engine for large runs and as an independent
cross-check of the reference implementation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog

from ..lpmodel import LpModel
from .types import LpSolution, SolveStatus, SolverConfig, SolverError


def solve_lp(
    model: LpModel,
    config: SolverConfig | None = None,
    *,
    var_bounds: tuple[np.ndarray, np.ndarray] | None = None,
) -> LpSolution:
    config = config or SolverConfig()
    a, rhs, senses = model.constraint_matrix()
    c = model.objective_vector()
    lower, upper = model.bound_arrays() if var_bounds is None else var_bounds
    if np.any(lower > upper):
        return LpSolution(SolveStatus.INFEASIBLE, -math.inf, np.zeros(model.num_cols), np.zeros(model.num_rows), np.zeros(model.num_cols))

    ub_rows = [i for i, s in enumerate(senses) if s == "<="]
    ge_rows = [i for i, s in enumerate(senses) if s == ">="]
    eq_rows = [i for i, s in enumerate(senses) if s == "="]
    a_csr = a.tocsr()
    a_ub = None
    b_ub = None
    if ub_rows or ge_rows:
        import scipy.sparse as sp

        blocks = []
        if ub_rows:
            blocks.append(a_csr[ub_rows])
        if ge_rows:
            blocks.append(-a_csr[ge_rows])
        a_ub = sp.vstack(blocks, format="csr")
        b_ub = np.concatenate([rhs[ub_rows], -rhs[ge_rows]])
    a_eq = a_csr[eq_rows] if eq_rows else None
    b_eq = rhs[eq_rows] if eq_rows else None

    bounds = [
        (lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None)
        for lo, hi in zip(lower.tolist(), upper.tolist())
    ]
    res = linprog(
        -c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={"presolve": True},
    )
    status_map = {
        0: SolveStatus.OPTIMAL,
        1: SolveStatus.ITERATION_LIMIT,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
    }
    status = status_map.get(res.status)
    if status is None:
        raise SolverError(f"linprog numerical failure: {res.message}")
    if status is not SolveStatus.OPTIMAL:
        obj = math.inf if status is SolveStatus.UNBOUNDED else -math.inf
        return LpSolution(status, obj, np.zeros(model.num_cols), np.zeros(model.num_rows), np.zeros(model.num_cols))

    duals = np.zeros(model.num_rows)
    if ub_rows or ge_rows:
        marg = np.asarray(res.ineqlin.marginals, dtype=float)
        n_le = len(ub_rows)
        for k, i in enumerate(ub_rows):
            duals[i] = -marg[k]
        for k, i in enumerate(ge_rows):
            duals[i] = marg[n_le + k]
    if eq_rows:
        eq_marg = np.asarray(res.eqlin.marginals, dtype=float)
        for k, i in enumerate(eq_rows):
            duals[i] = -eq_marg[k]
    primal = np.asarray(res.x, dtype=float)
    reduced = c - (a_csr.T @ duals)
    return LpSolution(SolveStatus.OPTIMAL, float(c @ primal), primal, duals, reduced)
