"""Reference simplex: statuses, objectives, duals, and edge cases.

The workhorse check is differential: random bounded LPs solved by both the
in-tree simplex and scipy's HiGHS must agree on status and objective, and
the simplex's duals must satisfy sign conventions, complementary slackness,
and strong duality on their own.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import linprog

from stochrwa.lpmodel import INF, LpModel, RowKey, VarKey
from stochrwa.solvers import SolveStatus, SolverConfig, SolverError
from stochrwa.solvers.simplex import solve_lp


def random_lp(seed: int, n_hi: int = 10, m_hi: int = 12, integral_data: bool = False) -> LpModel:
    r = np.random.default_rng(seed)
    n = int(r.integers(1, n_hi))
    m = int(r.integers(0, m_hi))
    model = LpModel(name=f"rand{seed}")
    lows = r.uniform(-5, 0, n)
    for j in range(n):
        hi = lows[j] + r.uniform(0, 8) if r.random() < 0.8 else INF
        model.add_col(VarKey("x", arc=j), lows[j], hi, float(r.normal()))
    for i in range(m):
        nnz = int(r.integers(1, n + 1))
        cols = r.choice(n, nnz, replace=False)
        if integral_data:
            coeffs = {int(j): float(r.integers(-3, 4)) for j in cols}
            rhs = float(r.integers(-3, 4))
        else:
            coeffs = {int(j): float(r.normal()) for j in cols}
            rhs = float(r.normal() * 3)
        coeffs = {j: a for j, a in coeffs.items() if a != 0.0} or {int(cols[0]): 1.0}
        model.add_row(RowKey("r", serial=i), coeffs, str(r.choice(["<=", "=", ">="])), rhs)
    return model


def scipy_reference(model: LpModel):
    c = model.objective_vector()
    mat, rhs, senses = model.constraint_matrix()
    dense = mat.toarray()
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for i, sense in enumerate(senses):
        if sense == "<=":
            a_ub.append(dense[i]); b_ub.append(rhs[i])
        elif sense == ">=":
            a_ub.append(-dense[i]); b_ub.append(-rhs[i])
        else:
            a_eq.append(dense[i]); b_eq.append(rhs[i])
    lo, hi = model.bound_arrays()
    bounds = [(l if math.isfinite(l) else None, u if math.isfinite(u) else None) for l, u in zip(lo, hi)]
    return linprog(
        -c,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )


@pytest.mark.parametrize("seed", range(250))
def test_matches_scipy_on_random_lps(seed):
    model = random_lp(seed)
    ours = solve_lp(model, SolverConfig())
    ref = scipy_reference(model)
    if ref.status == 0:
        assert ours.status is SolveStatus.OPTIMAL
        assert ours.objective == pytest.approx(-ref.fun, rel=1e-6, abs=1e-6)
    elif ref.status == 2:
        assert ours.status is SolveStatus.INFEASIBLE
    elif ref.status == 3:
        assert ours.status is SolveStatus.UNBOUNDED


@pytest.mark.parametrize("seed", range(300, 450))
def test_dual_invariants_on_degenerate_lps(seed):
    model = random_lp(seed, integral_data=True)
    sol = solve_lp(model, SolverConfig())
    if sol.status is not SolveStatus.OPTIMAL:
        return
    mat, rhs, senses = model.constraint_matrix()
    lo, hi = model.bound_arrays()
    x, y, d = sol.primal, sol.duals, sol.reduced_costs
    ax = mat @ x
    tol = 1e-6
    for i, sense in enumerate(senses):
        if sense == "<=":
            assert ax[i] <= rhs[i] + tol
            assert y[i] >= -tol  # nonnegative duals on <= rows (max convention)
        elif sense == ">=":
            assert ax[i] >= rhs[i] - tol
            assert y[i] <= tol
        else:
            assert ax[i] == pytest.approx(rhs[i], abs=tol)
        if sense != "=" and abs(y[i]) > tol:
            assert ax[i] == pytest.approx(rhs[i], abs=1e-5)  # complementary slackness
    assert np.all(x >= lo - tol)
    assert np.all(x <= np.where(np.isfinite(hi), hi, np.inf) + tol)
    dual_obj = float(y @ rhs)
    for j in range(model.num_cols):
        if d[j] > tol:
            dual_obj += d[j] * hi[j]
        elif d[j] < -tol:
            dual_obj += d[j] * lo[j]
    assert dual_obj == pytest.approx(sol.objective, rel=1e-5, abs=1e-5)  # strong duality


def test_single_row_dual_is_one():
    model = LpModel()
    x = model.add_col(VarKey("x", arc=0), 0, 2, 1.0)
    model.add_row(RowKey("r", serial=0), {x: 1.0}, "<=", 1.0)
    sol = solve_lp(model)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(1.0)
    assert sol.duals[0] == pytest.approx(1.0)


def test_infeasible_zero_row():
    model = LpModel()
    model.add_col(VarKey("x", arc=0), 0, 1, 1.0)
    model.add_row(RowKey("r", serial=0), {}, ">=", 1.0)  # 0 >= 1
    assert solve_lp(model).status is SolveStatus.INFEASIBLE


def test_unbounded_detection():
    model = LpModel()
    model.add_col(VarKey("x", arc=0), 0, INF, 1.0)
    sol = solve_lp(model)
    assert sol.status is SolveStatus.UNBOUNDED
    assert sol.objective == math.inf


def test_bound_only_problems():
    model = LpModel()
    model.add_col(VarKey("x", arc=0), -3, 5, 2.0)
    model.add_col(VarKey("x", arc=1), -3, 5, -1.0)
    sol = solve_lp(model)
    assert sol.objective == pytest.approx(13.0)


def test_iteration_limit_reported():
    model = random_lp(77, n_hi=9, m_hi=11)
    config = SolverConfig(iteration_limit=1)
    sol = solve_lp(model, config)
    assert sol.status in (SolveStatus.ITERATION_LIMIT, SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE)


def test_scale_guard():
    model = LpModel()
    x = model.add_col(VarKey("x", arc=0), 0, 1, 1.0)
    model.add_row(RowKey("r", serial=0), {x: 2e9}, "<=", 1.0)
    with pytest.raises(SolverError, match="scale guard"):
        solve_lp(model)


def test_model_without_variables_rejected():
    with pytest.raises(SolverError, match="no variables"):
        solve_lp(LpModel())


def test_equality_rows_force_phase_one():
    # x + y = 3 with x,y in [0,2]: slack basis starts infeasible.
    model = LpModel()
    x = model.add_col(VarKey("x", arc=0), 0, 2, 1.0)
    y = model.add_col(VarKey("x", arc=1), 0, 2, 0.0)
    model.add_row(RowKey("r", serial=0), {x: 1.0, y: 1.0}, "=", 3.0)
    sol = solve_lp(model)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(2.0)


def test_var_bounds_override():
    model = LpModel()
    x = model.add_col(VarKey("x", arc=0), 0, 10, 1.0)
    model.add_row(RowKey("r", serial=0), {x: 1.0}, "<=", 8.0)
    tight = solve_lp(model, var_bounds=(np.array([2.0]), np.array([3.0])))
    assert tight.objective == pytest.approx(3.0)
    empty = solve_lp(model, var_bounds=(np.array([4.0]), np.array([3.0])))
    assert empty.status is SolveStatus.INFEASIBLE
