import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from tieline.errors import NodeLimitError
from tieline.lp_core import LpProblem
from tieline.milp_core import MilpProblem, solve_milp


def enumerate_fixings(c, A, b, nbin, ncont):
    """Best value over all 0/1 assignments of the first ``nbin`` variables, by HiGHS."""
    best, arg = np.inf, None
    for bits in itertools.product((0, 1), repeat=nbin):
        bounds = [(v, v) for v in bits] + [(None, None)] * ncont
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status == 0 and res.fun < best:
            best, arg = res.fun, bits
    return best, arg


def random_instance(seed, nbin=8, ncont=4, rows=10):
    rng = np.random.default_rng(seed)
    n = nbin + ncont
    box = np.zeros((2 * ncont, n))
    box[np.arange(ncont), nbin + np.arange(ncont)] = 1.0
    box[ncont + np.arange(ncont), nbin + np.arange(ncont)] = -1.0
    cuts = rng.standard_normal((rows, n))
    A = np.vstack([box, cuts])
    # w = 0, x = 0 stays feasible
    b = np.concatenate([np.ones(2 * ncont), rng.uniform(0.2, 2.0, rows)])
    return rng.standard_normal(n), A, b


def test_separable_toy():
    q = np.array([2.0, -1.0, 3.0])
    p = MilpProblem(LpProblem(-q, np.zeros((0, 3)), np.zeros(0)), (0, 1, 2))
    sol = solve_milp(p)
    assert sol.value == pytest.approx(-5.0)
    assert sol.binaries == (1, 0, 1)


def test_integral_relaxation_needs_only_the_root():
    # x0 + x1 = 1 with x0 forced to 1 by the cost
    A = np.array([[1.0, 1.0]])
    p = MilpProblem(LpProblem([-1.0, 0.0], A, [1.0], [True]), (0, 1))
    sol = solve_milp(p)
    assert sol.nodes == 1
    assert sol.binaries == (1, 0)


def test_branching_is_needed_for_a_knapsack():
    # max 5a + 4b + 3c  s.t. 2a + 3b + c <= 4 : LP optimum is fractional
    A = np.array([[2.0, 3.0, 1.0]])
    p = MilpProblem(LpProblem([-5.0, -4.0, -3.0], A, [4.0]), (0, 1, 2))
    sol = solve_milp(p)
    assert sol.value == pytest.approx(-8.0)
    assert sol.binaries == (1, 0, 1)
    assert sol.nodes > 1


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_random_instance_matches_enumeration(seed):
    c, A, b = random_instance(seed)
    sol = solve_milp(MilpProblem(LpProblem(c, A, b), tuple(range(8))))
    ref, _ = enumerate_fixings(c, A, b, 8, 4)
    assert sol.optimal
    assert sol.value == pytest.approx(ref, rel=1e-7, abs=1e-7)
    assert all(v in (0, 1) for v in sol.binaries)


@pytest.mark.parametrize("rule", ["bland", "dantzig"])
def test_pivot_rules_agree(rule):
    c, A, b = random_instance(11)
    ref, _ = enumerate_fixings(c, A, b, 8, 4)
    sol = solve_milp(MilpProblem(LpProblem(c, A, b), tuple(range(8))), rule=rule)
    assert sol.value == pytest.approx(ref, rel=1e-7, abs=1e-7)


def test_node_limit_reports_the_bound():
    c, A, b = random_instance(11)
    with pytest.raises(NodeLimitError) as info:
        solve_milp(MilpProblem(LpProblem(c, A, b), tuple(range(8))), max_nodes=2)
    assert info.value.bound is not None


def test_infeasible_integer_program():
    # 0.4 <= x <= 0.6 has no binary point
    p = MilpProblem(LpProblem([1.0], [[1.0], [-1.0]], [0.6, -0.4]), (0,))
    assert solve_milp(p).status == "infeasible"


def test_infeasible_relaxation():
    p = MilpProblem(LpProblem([1.0], [[1.0], [-1.0]], [0.0, -1.0]), (0,))
    assert solve_milp(p).status == "infeasible"


def test_bad_binary_index():
    with pytest.raises(ValueError):
        MilpProblem(LpProblem([1.0], np.zeros((0, 1)), np.zeros(0)), (1,))
