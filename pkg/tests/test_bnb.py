"""Branch and bound: optimality, callbacks, determinism, limits."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from stochrwa.lpmodel import LpModel, RowKey, VarKey
from stochrwa.solvers import CutRow, SolveStatus, SolverConfig, solve_mip
from stochrwa.solvers import simplex
from stochrwa.solvers.highs import solve_lp as highs_lp


def random_bip(seed: int) -> LpModel:
    r = np.random.default_rng(seed + 777)
    n = int(r.integers(2, 10))
    m = int(r.integers(1, 8))
    model = LpModel(name=f"bip{seed}")
    for j in range(n):
        model.add_col(VarKey("x", arc=j), 0, 1, float(r.integers(-5, 8)), is_integer=True)
    for i in range(m):
        nnz = int(r.integers(1, n + 1))
        cols = r.choice(n, nnz, replace=False)
        coeffs = {int(j): float(r.integers(-3, 4)) for j in cols}
        coeffs = {j: a for j, a in coeffs.items() if a != 0.0} or {int(cols[0]): 1.0}
        model.add_row(
            RowKey("r", serial=i), coeffs, str(r.choice(["<=", ">=", "="])), float(r.integers(-2, 6))
        )
    return model


def scipy_milp_reference(model: LpModel):
    c = model.objective_vector()
    mat, rhs, senses = model.constraint_matrix()
    lb = np.array([rhs[i] if s in (">=", "=") else -np.inf for i, s in enumerate(senses)])
    ub = np.array([rhs[i] if s in ("<=", "=") else np.inf for i, s in enumerate(senses)])
    return milp(
        -c,
        constraints=LinearConstraint(mat.toarray(), lb, ub),
        integrality=np.ones(len(c)),
        bounds=Bounds(0, 1),
    )


@pytest.mark.parametrize("seed", range(120))
def test_matches_scipy_milp(seed):
    model = random_bip(seed)
    ours = solve_mip(model, SolverConfig())
    ref = scipy_milp_reference(model)
    if ref.status == 0:
        assert ours.status is SolveStatus.OPTIMAL
        assert ours.objective == pytest.approx(-ref.fun, abs=1e-6)
        assert ours.gap <= 1e-6
    elif ref.status == 2:
        assert ours.status is SolveStatus.INFEASIBLE


@pytest.mark.parametrize("lp_solve", [simplex.solve_lp, highs_lp], ids=["simplex", "highs"])
def test_fractional_knapsack_rounds_down(lp_solve):
    model = LpModel()
    a = model.add_col(VarKey("x", arc=0), 0, 1, 1.0, True)
    b = model.add_col(VarKey("x", arc=1), 0, 1, 1.0, True)
    model.add_row(RowKey("r", serial=0), {a: 1.0, b: 1.0}, "<=", 1.5)
    sol = solve_mip(model, SolverConfig(), lp_solve=lp_solve)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(1.0)


def test_integrality_tolerance_and_incumbent_integrality():
    model = random_bip(5)
    sol = solve_mip(model, SolverConfig())
    if sol.incumbent is not None:
        ints = model.integer_mask()
        frac = np.abs(sol.incumbent[ints] - np.round(sol.incumbent[ints]))
        assert np.all(frac <= 1e-6)


def test_deterministic_node_counts():
    model_a = random_bip(17)
    model_b = random_bip(17)
    sol_a = solve_mip(model_a, SolverConfig())
    sol_b = solve_mip(model_b, SolverConfig())
    assert sol_a.node_count == sol_b.node_count
    assert sol_a.objective == sol_b.objective
    if sol_a.incumbent is not None:
        assert np.array_equal(sol_a.incumbent, sol_b.incumbent)


def test_callback_with_no_cuts_equals_plain_search():
    for seed in (3, 9, 21, 40):
        plain = solve_mip(random_bip(seed), SolverConfig())
        with_cb = solve_mip(random_bip(seed), SolverConfig(), callback=lambda node: [])
        assert plain.objective == pytest.approx(with_cb.objective, abs=1e-9)
        assert plain.node_count == with_cb.node_count


def test_lazy_cuts_block_bad_incumbents():
    # max 10y + x subject to lazily-added y <= x; optimum flips to x=1.
    model = LpModel()
    x = model.add_col(VarKey("x", arc=0), 0, 1, 1.0, True)
    y = model.add_col(VarKey("eta"), 0, 5, 10.0, False)
    seen_violations = []

    def callback(node):
        if node.values[y] > node.values[x] + 1e-6:
            seen_violations.append(node.values[y])
            return [CutRow(RowKey("cut", serial=len(seen_violations)), ((y, 1.0), (x, -1.0)), 0.0, "test")]
        return []

    sol = solve_mip(model, SolverConfig(), callback=callback)
    assert seen_violations, "callback never saw the violated point"
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(11.0)
    assert sol.incumbent[x] == pytest.approx(1.0)
    assert sol.cut_counts == {"test": 1}


def test_bound_never_below_incumbent():
    for seed in (2, 8, 33):
        sol = solve_mip(random_bip(seed), SolverConfig())
        if sol.incumbent is not None:
            assert sol.bound >= sol.objective - 1e-9


def test_time_limit_reports_partial_result():
    model = random_bip(1)
    sol = solve_mip(model, SolverConfig(time_limit_seconds=0.0))
    assert sol.status is SolveStatus.TIME_LIMIT


def test_integer_columns_need_finite_bounds_in_mip():
    from stochrwa.lpmodel import INF
    from stochrwa.solvers import SolverError

    model = LpModel()
    model.add_col(VarKey("x", arc=0), 0, 1, 1.0, True)
    model.cols[0].upper = INF  # bypass the model-level guard
    with pytest.raises(SolverError, match="finite bounds"):
        solve_mip(model, SolverConfig())
