import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opfproxy.netcase import build_dc_model, parse_case
from opfproxy.opf import assemble_dcopf, solve_opf
from opfproxy.qp import check_feasible, kkt_residuals, solve_qp
from oracles import grid_search_opf

# Reference costs for the 5-bus case from an independent conic solver
# (cvxpy/Clarabel on the bus-angle formulation, tolerances 1e-12).
CASE5_NOMINAL_COST = 18571.909631001585


def test_two_bus_structure(model2):
    p = assemble_dcopf(model2, [0.0, 1.0])
    assert p.n == 1
    assert p.n_equalities == 1
    assert p.C.shape[0] == 2  # one flow row, one generator row
    assert p.n_inequalities == 4  # each row bounded on both sides


def test_five_bus_structure(model5):
    p = assemble_dcopf(model5, [0.0, 3.0, 3.0, 4.0, 0.0])
    assert (p.n, p.n_equalities, p.n_inequalities) == (5, 1, 6 * 2 + 5 * 2)


def test_negative_load_rejected(model2):
    with pytest.raises(ValueError, match=">= 0"):
        assemble_dcopf(model2, [0.0, -1.0])


def test_load_dimension_rejected(model2):
    with pytest.raises(ValueError, match="length 2"):
        solve_opf(model2, [1.0])


def test_two_bus_hand_value(model2):
    out = solve_opf(model2, [0.0, 1.0])
    assert out.feasible
    assert out.cost == pytest.approx(11.0, abs=1e-6)
    np.testing.assert_allclose(out.dispatch, [1.0], atol=1e-7)
    assert out.solve_time > 0


def test_zero_load_zero_cost(model2):
    out = solve_opf(model2, [0.0, 0.0])
    assert out.feasible
    assert out.cost == pytest.approx(0.0, abs=1e-8)


def test_capacity_exceeded(model2):
    out = solve_opf(model2, [0.0, 3.0])
    assert not out.feasible
    assert out.cost is None and out.dispatch is None


def test_feasibility_examples(model2):
    assert check_feasible(assemble_dcopf(model2, [0.0, 1.0]))
    assert not check_feasible(assemble_dcopf(model2, [0.0, 3.0]))


def test_line_limit_blocks_transfer():
    text = """
[buses]
1, 0.0, 1
2, 1.0, 0
[branches]
1, 2, 0.1, 0.5
[generators]
1, 0.0, 2.0, 1.0, 10.0, 0.0
"""
    model = build_dc_model(parse_case(text))
    assert not check_feasible(assemble_dcopf(model, [0.0, 1.0]))
    assert check_feasible(assemble_dcopf(model, [0.0, 0.5]))


def test_five_bus_matches_conic_reference(model5):
    out = solve_opf(model5, [0.0, 3.0, 3.0, 4.0, 0.0])
    assert out.cost == pytest.approx(CASE5_NOMINAL_COST, rel=1e-8)


def test_five_bus_cheapest_unit_covers_light_load(model5):
    # Total 3 pu fits in the bus-5 unit, whose marginal cost 40p + 1000 stays
    # below every other unit's: 20 * 9 + 1000 * 3 = 3180.
    out = solve_opf(model5, [0.0, 1.0, 1.0, 1.0, 0.0])
    assert out.cost == pytest.approx(3180.0, rel=1e-8)
    np.testing.assert_allclose(out.dispatch, [0, 0, 0, 0, 3.0], atol=1e-6)


def test_five_bus_congested_load_infeasible(model5):
    assert not solve_opf(model5, [0.0, 2.0, 5.0, 7.0, 0.0]).feasible


@pytest.mark.parametrize(
    "load, expected",
    [((0, 0.5, 1.5), 38.25), ((0, 0.2, 0.3), 11.87), ((0, 0.9, 0.6), 25.47), ((0, 1.0, 2.0), None)],
)
def test_three_bus_against_grid_oracle(model3, case3, load, expected):
    oracle = grid_search_opf(case3, load)
    out = solve_opf(model3, np.array(load, dtype=float))
    if expected is None:
        assert oracle is None and not out.feasible
        return
    assert oracle == pytest.approx(expected, rel=1e-9)
    assert out.cost == pytest.approx(oracle, rel=1e-6)


def test_three_bus_random_loads_against_oracle(model3, case3, rng):
    for _ in range(50):
        load = np.array([0.0, *rng.uniform(0.1, 1.6, size=2)])
        oracle = grid_search_opf(case3, load)
        out = solve_opf(model3, load)
        assert out.feasible == (oracle is not None)
        if oracle is not None:
            assert out.cost == pytest.approx(oracle, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.6, 8.0), min_size=3, max_size=3))
def test_kkt_on_five_bus(model5, values):
    load = np.array([0.0, *values[:2], values[2], 0.0])
    problem = assemble_dcopf(model5, load)
    sol = solve_qp(problem)
    if sol.status == "infeasible":
        return
    r = kkt_residuals(problem, sol)
    assert r["stationarity"] <= 1e-6 and r["complementarity"] <= 1e-6 and r["primal"] <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.6, 8.0), min_size=6, max_size=6))
def test_value_function_convex(model5, values):
    l1 = np.array([0.0, *values[:3], 0.0])
    l2 = np.array([0.0, *values[3:], 0.0])
    a, b = solve_opf(model5, l1), solve_opf(model5, l2)
    if not (a.feasible and b.feasible):
        return
    mid = solve_opf(model5, 0.5 * (l1 + l2))
    assert mid.feasible
    assert mid.cost <= 0.5 * (a.cost + b.cost) + 1e-6


def test_deterministic(model5):
    load = np.array([0.0, 2.5, 3.5, 4.5, 0.0])
    a, b = solve_opf(model5, load), solve_opf(model5, load)
    assert a.cost == b.cost and np.array_equal(a.dispatch, b.dispatch)
