"""Bounded-variable revised simplex with dual values.

Maximizes over the model's columns subject to sparse rows.  Every row gets a
logical column (nonnegative for <=, nonpositive for >=, fixed at zero for =),
so the constraint system is ``A x + s = b`` with simple bounds on everything.
Infeasibility of the initial logical basis is repaired in a phase-1 run that
adds one artificial column per violated row and maximizes the negated total
violation.  Pricing is Dantzig with a permanent switch to Bland's rule after
a stall, which guarantees termination on degenerate models.  The basis
inverse is kept dense with periodic refactorization; this targets the
small-to-medium models built here (coefficients are unit-scale, so there is
no presolve and a guard rejects entries above 1e9).
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from ..lpmodel import INF, LpModel
from .types import LpSolution, SolveStatus, SolverConfig, SolverError

# Internal pivot tolerances; model-level feasibility uses SolverConfig.tol_feas.
_TOL_REDUCED = 1e-9
_TOL_PIVOT = 1e-10
_TOL_RATIO = 1e-9
_STALL_LIMIT = 300
_REFACTOR_EVERY = 64
_SCALE_LIMIT = 1e9

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FREE = 3


class _Workspace:
    """Mutable simplex state over structural + logical + artificial columns."""

    def __init__(self, model: LpModel, var_bounds: tuple[np.ndarray, np.ndarray] | None):
        self.n_struct = model.num_cols
        self.m = model.num_rows
        if self.n_struct < 1:
            raise SolverError("model has no variables")
        a_csr, rhs, senses = model.constraint_matrix()
        self.A = a_csr.tocsc()
        self.b = rhs
        self.c_struct = model.objective_vector()
        lower, upper = model.bound_arrays()
        if var_bounds is not None:
            lower, upper = var_bounds[0].copy(), var_bounds[1].copy()
        _check_scale(self.A, self.b, self.c_struct, lower, upper)

        n, m = self.n_struct, self.m
        self.lower = np.concatenate([lower, np.empty(m)])
        self.upper = np.concatenate([upper, np.empty(m)])
        for i, sense in enumerate(senses):
            if sense == "<=":
                self.lower[n + i], self.upper[n + i] = 0.0, INF
            elif sense == ">=":
                self.lower[n + i], self.upper[n + i] = -INF, 0.0
            else:
                self.lower[n + i], self.upper[n + i] = 0.0, 0.0
        self.ncols = n + m
        # Artificial columns (phase 1 only) live past index n + m.
        self.art_rows: list[int] = []
        self.values = np.zeros(self.ncols)
        self.status = np.full(self.ncols, _AT_LOWER, dtype=np.int8)
        for j in range(self.ncols):
            lo, hi = self.lower[j], self.upper[j]
            if lo > -INF:
                self.status[j], self.values[j] = _AT_LOWER, lo
            elif hi < INF:
                self.status[j], self.values[j] = _AT_UPPER, hi
            else:
                self.status[j], self.values[j] = _FREE, 0.0
        self.basis = np.arange(n, n + m, dtype=np.int64)
        self.status[self.basis] = _BASIC
        self.binv = np.eye(m)
        self.costs = np.zeros(self.ncols)

    # -- column access (structural from the matrix, logical/artificial unit) --

    def col_dense_times_binv(self, j: int) -> np.ndarray:
        """Return Binv @ A_j."""
        if j < self.n_struct:
            start, end = self.A.indptr[j], self.A.indptr[j + 1]
            rows = self.A.indices[start:end]
            vals = self.A.data[start:end]
            return self.binv[:, rows] @ vals
        return self.binv[:, self._unit_row(j)].copy()

    def _unit_row(self, j: int) -> int:
        if j < self.n_struct + self.m:
            return j - self.n_struct
        return self.art_rows[j - self.n_struct - self.m]

    def price_all(self, y: np.ndarray) -> np.ndarray:
        """Reduced costs for every column: c - y^T A."""
        d = self.costs.copy()
        d[: self.n_struct] -= self.A.T @ y
        d[self.n_struct : self.n_struct + self.m] -= y
        for k, row in enumerate(self.art_rows):
            d[self.n_struct + self.m + k] -= y[row]
        return d

    def add_artificial(self, row: int, residual: float) -> int:
        j = len(self.values)
        self.art_rows.append(row)
        self.values = np.append(self.values, residual)
        self.lower = np.append(self.lower, min(0.0, residual))
        self.upper = np.append(self.upper, max(0.0, residual))
        self.costs = np.append(self.costs, 0.0)
        self.status = np.append(self.status, _BASIC)
        return j

    def nonbasic_rhs_residual(self) -> np.ndarray:
        """b minus the contribution of all nonbasic columns at their values."""
        xn = self.values.copy()
        xn[self.basis] = 0.0
        r = self.b - self.A @ xn[: self.n_struct]
        r -= xn[self.n_struct : self.n_struct + self.m]
        for k, row in enumerate(self.art_rows):
            r[row] -= xn[self.n_struct + self.m + k]
        return r

    def refactorize(self) -> None:
        m = self.m
        dense = np.zeros((m, m))
        for pos, j in enumerate(self.basis):
            if j < self.n_struct:
                start, end = self.A.indptr[j], self.A.indptr[j + 1]
                dense[self.A.indices[start:end], pos] = self.A.data[start:end]
            else:
                dense[self._unit_row(j), pos] = 1.0
        try:
            self.binv = np.linalg.inv(dense)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis during refactorization") from exc
        self.values[self.basis] = self.binv @ self.nonbasic_rhs_residual()


def _check_scale(a: sp.csc_matrix, b: np.ndarray, c: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
    worst = 0.0
    if a.nnz:
        worst = max(worst, float(np.max(np.abs(a.data))))
    for v in (b, c):
        if v.size:
            worst = max(worst, float(np.max(np.abs(v))))
    finite_lo = lo[np.isfinite(lo)]
    finite_hi = hi[np.isfinite(hi)]
    if finite_lo.size:
        worst = max(worst, float(np.max(np.abs(finite_lo))))
    if finite_hi.size:
        worst = max(worst, float(np.max(np.abs(finite_hi))))
    if worst > _SCALE_LIMIT:
        raise SolverError(f"coefficient magnitude {worst:.3g} exceeds scale guard {_SCALE_LIMIT:.0e}")


def solve_lp(
    model: LpModel,
    config: SolverConfig | None = None,
    *,
    var_bounds: tuple[np.ndarray, np.ndarray] | None = None,
) -> LpSolution:
    """Solve the LP relaxation of ``model`` (integrality is ignored).

    ``var_bounds`` optionally overrides the column bounds, which is how the
    branch-and-bound driver imposes node-local bound changes without copying
    the model.
    """
    config = config or SolverConfig()
    ws = _Workspace(model, var_bounds)
    if np.any(ws.lower > ws.upper):
        return _empty_solution(ws, SolveStatus.INFEASIBLE)

    iterations = 0
    if ws.m > 0:
        # Initial logical basis; repair out-of-bound basic values in phase 1.
        ws.values[ws.basis] = ws.nonbasic_rhs_residual()
        needs_phase1 = False
        for pos in range(ws.m):
            j = ws.basis[pos]
            val = ws.values[j]
            lo, hi = ws.lower[j], ws.upper[j]
            clamped = min(max(val, lo), hi)
            residual = val - clamped
            if abs(residual) > config.tol_feas:
                needs_phase1 = True
                ws.values[j] = clamped
                ws.status[j] = _AT_LOWER if clamped == lo else _AT_UPPER
                art = ws.add_artificial(pos, residual)
                ws.basis[pos] = art
        if needs_phase1:
            ws.costs[:] = 0.0
            for k in range(len(ws.art_rows)):
                j = ws.n_struct + ws.m + k
                ws.costs[j] = -1.0 if ws.values[j] > 0 else 1.0
            status, iterations = _iterate(ws, config, iterations, phase_one=True)
            if status is not SolveStatus.OPTIMAL:
                return _empty_solution(ws, status if status is SolveStatus.ITERATION_LIMIT else SolveStatus.INFEASIBLE, iterations)
            infeasibility = -float(ws.costs @ ws.values)
            if infeasibility > 10 * config.tol_feas * (1.0 + float(np.max(np.abs(ws.b), initial=0.0))):
                return _empty_solution(ws, SolveStatus.INFEASIBLE, iterations)
            # Pin artificials at zero for phase 2.
            for k in range(len(ws.art_rows)):
                j = ws.n_struct + ws.m + k
                ws.lower[j] = ws.upper[j] = 0.0
                if ws.status[j] != _BASIC:
                    ws.values[j] = 0.0

    ws.costs[:] = 0.0
    ws.costs[: ws.n_struct] = ws.c_struct
    status, iterations = _iterate(ws, config, iterations, phase_one=False)

    primal = ws.values[: ws.n_struct].copy()
    y = ws.costs[ws.basis] @ ws.binv if ws.m else np.zeros(0)
    d = ws.price_all(y) if ws.m else ws.costs.copy()
    return LpSolution(
        status=status,
        objective=math.inf if status is SolveStatus.UNBOUNDED else float(ws.c_struct @ primal),
        primal=primal,
        duals=np.asarray(y, dtype=float),
        reduced_costs=np.asarray(d[: ws.n_struct], dtype=float),
        iterations=iterations,
    )


def _empty_solution(ws: _Workspace, status: SolveStatus, iterations: int = 0) -> LpSolution:
    return LpSolution(
        status=status,
        objective=-math.inf,
        primal=ws.values[: ws.n_struct].copy(),
        duals=np.zeros(ws.m),
        reduced_costs=np.zeros(ws.n_struct),
        iterations=iterations,
    )


def _iterate(
    ws: _Workspace, config: SolverConfig, iterations: int, phase_one: bool
) -> tuple[SolveStatus, int]:
    """Run simplex pivots until optimal/unbounded/limits."""
    if ws.m == 0:
        # Pure bound problem: push every column to its favorable bound.
        for j in range(ws.n_struct):
            if ws.costs[j] > 0 and ws.upper[j] < INF:
                ws.values[j], ws.status[j] = ws.upper[j], _AT_UPPER
            elif ws.costs[j] > 0:
                return SolveStatus.UNBOUNDED, iterations
            elif ws.costs[j] < 0 and ws.lower[j] > -INF:
                ws.values[j], ws.status[j] = ws.lower[j], _AT_LOWER
            elif ws.costs[j] < 0:
                return SolveStatus.UNBOUNDED, iterations
        return SolveStatus.OPTIMAL, iterations

    bland = False
    stall = 0
    last_obj = -math.inf
    pivots_since_refactor = 0
    while True:
        if iterations >= config.iteration_limit:
            return SolveStatus.ITERATION_LIMIT, iterations
        y = ws.costs[ws.basis] @ ws.binv
        d = ws.price_all(y)

        nonbasic = ws.status != _BASIC
        eligible = nonbasic & (
            ((ws.status == _AT_LOWER) & (d > _TOL_REDUCED))
            | ((ws.status == _AT_UPPER) & (d < -_TOL_REDUCED))
            | ((ws.status == _FREE) & (np.abs(d) > _TOL_REDUCED))
        )
        candidates = np.flatnonzero(eligible)
        if candidates.size == 0:
            if pivots_since_refactor > 0:
                # Guard against drift: refactorize and re-price once.
                ws.refactorize()
                pivots_since_refactor = 0
                continue
            return SolveStatus.OPTIMAL, iterations

        if bland:
            q = int(candidates[0])
        else:
            q = int(candidates[np.argmax(np.abs(d[candidates]))])
        sigma = 1.0 if (ws.status[q] == _AT_LOWER or (ws.status[q] == _FREE and d[q] > 0)) else -1.0

        alpha = ws.col_dense_times_binv(q)
        step = sigma * alpha  # basic values move by -step * t

        t_best = INF
        if ws.lower[q] > -INF and ws.upper[q] < INF:
            t_best = ws.upper[q] - ws.lower[q]
        leaving_pos = -1  # -1 means bound flip of the entering column

        basic_lower = ws.lower[ws.basis]
        basic_upper = ws.upper[ws.basis]
        basic_vals = ws.values[ws.basis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_low = np.where(step > _TOL_PIVOT, (basic_vals - basic_lower) / step, INF)
            t_up = np.where(step < -_TOL_PIVOT, (basic_upper - basic_vals) / (-step), INF)
        ratios = np.minimum(np.maximum(t_low, 0.0), np.maximum(t_up, 0.0))
        if ratios.size:
            t_rows = float(np.min(ratios))
            if t_rows < t_best - _TOL_RATIO:
                blocking = np.flatnonzero(ratios <= t_rows + _TOL_RATIO)
                if bland:
                    leaving_pos = int(blocking[np.argmin(ws.basis[blocking])])
                else:
                    leaving_pos = int(blocking[np.argmax(np.abs(step[blocking]))])
                t_best = max(ratios[leaving_pos], 0.0)

        if t_best == INF:
            return (SolveStatus.OPTIMAL if phase_one else SolveStatus.UNBOUNDED), iterations

        # Apply the step.
        ws.values[ws.basis] = basic_vals - step * t_best
        ws.values[q] = ws.values[q] + sigma * t_best
        if leaving_pos < 0:
            ws.status[q] = _AT_UPPER if ws.status[q] == _AT_LOWER else _AT_LOWER
        else:
            leave = int(ws.basis[leaving_pos])
            hit_lower = step[leaving_pos] > 0
            ws.values[leave] = ws.lower[leave] if hit_lower else ws.upper[leave]
            ws.status[leave] = _AT_LOWER if hit_lower else _AT_UPPER
            ws.basis[leaving_pos] = q
            ws.status[q] = _BASIC
            _update_binv(ws.binv, alpha, leaving_pos)
            pivots_since_refactor += 1
            if pivots_since_refactor >= _REFACTOR_EVERY:
                ws.refactorize()
                pivots_since_refactor = 0

        iterations += 1
        obj = float(ws.costs @ ws.values)
        if obj > last_obj + 1e-12 * (1.0 + abs(last_obj)):
            last_obj = obj
            if bland:
                bland = False
            stall = 0
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True


def _update_binv(binv: np.ndarray, alpha: np.ndarray, r: int) -> None:
    """Product-form update after replacing basis position ``r``."""
    pivot = alpha[r]
    if abs(pivot) < _TOL_PIVOT:
        raise SolverError("numerically singular pivot")
    binv[r, :] /= pivot
    others = alpha.copy()
    others[r] = 0.0
    binv -= np.outer(others, binv[r, :])
