import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import toy_case, toy_doc
from tieline.casefile import case_from_dict
from tieline.coordinator import make_operators, solve_deterministic
from tieline.errors import NetworkError
from tieline.harness.cases import random_case_doc
from tieline.netmodel import assemble, dispatch_cost, nominal_xi, y_index
from tieline.robust import make_robust_operators, solve_robust


def residual(area, x, xi, y):
    return area.A_x @ x + area.A_xi @ xi + area.A_y @ y - area.b


def test_toy_dimensions(toy):
    areas, Y = toy
    for a in areas:
        assert (a.n, a.nbar, a.m) == (1, 1, 12)
        assert a.A_x.shape == (12, 4) and a.A_xi.shape == (12, 3) and a.A_y.shape == (12, 1)
    assert Y.dim == 1


def test_tie_capacity_row(toy):
    _, Y = toy
    # |(theta_A - theta_B) / 0.25| <= 100 MW / 100 MVA, slack angle zero
    np.testing.assert_allclose(np.abs(Y.G[:Y.n_tie_rows, 0]), [4.0, 4.0])
    np.testing.assert_allclose(Y.h[:Y.n_tie_rows], [1.0, 1.0])
    assert np.isfinite(Y.box()).all()


def test_balance_rows_encode_dc_flow(toy):
    areas, _ = toy
    a = areas[1]
    b = 1.0 / 0.1
    theta, y = 0.03, 0.01
    inj = b * (theta - y)                      # injection at i1 leaving towards b1
    tie = (y - 0.0) / 0.25                     # flow b1 -> A1/b1
    x = np.array([inj + 0.2, 0.0, 0.2, theta])
    xi = np.array([0.0, 0.0, 0.5])
    r = residual(a, x, xi, np.array([y]))
    np.testing.assert_allclose(r[0], 0.0, atol=1e-12)
    np.testing.assert_allclose(r[1], 0.0, atol=1e-12)
    # boundary balance holds only when the tie carries what the branch brings
    assert abs(inj - tie) > 1e-3
    assert max(r[2], r[3]) > 1e-3
    x_bal = x.copy()
    x_bal[3] = y + tie / b
    x_bal[0] = b * (x_bal[3] - y) + 0.2
    r = residual(a, x_bal, xi, np.array([y]))
    np.testing.assert_allclose(r[:4], 0.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n_areas=st.sampled_from([2, 3]))
def test_row_count_and_box(seed, n_areas):
    case = case_from_dict(random_case_doc(seed, n_areas=n_areas))
    areas, Y = assemble(case)
    for spec, a in zip(case.areas, areas):
        n, nbar = len(spec.internal), len(spec.boundary)
        assert a.m == 2 * (n + nbar) + 6 * n + 2 * len(spec.branches)
        assert (a.xi_lo <= a.xi_hi).all()
    lo, hi = Y.box()
    assert np.isfinite(lo).all() and np.isfinite(hi).all()
    assert Y.dim == y_index(case)[1]


def test_dispatch_cost_matches_direct_formula():
    case = toy_case(wind=(15.0, 25.0), demand_range=(0.98, 1.02))
    areas, _ = assemble(case)
    rng = np.random.default_rng(0)
    bus = case.areas[0].buses[0]
    base = case.base_mva
    a = areas[0]
    assert dispatch_cost(a, np.zeros(4), np.zeros(3)) == pytest.approx(a.c0)
    for _ in range(10):
        x = rng.uniform(0, 1, 4)
        xi = rng.uniform(0, 1, 3)
        g, w, d = x[:3]
        direct = base * (bus.price_gen * g + bus.price_wind * (xi[0] - w) + bus.price_demand * (xi[2] - d))
        assert dispatch_cost(a, x, xi) == pytest.approx(direct, rel=1e-12)
        # zero wind price: cost ignores the wind dispatch
        x2 = x.copy()
        x2[1] += 0.3
        assert dispatch_cost(a, x2, xi) == pytest.approx(dispatch_cost(a, x, xi), rel=1e-12)
    with pytest.raises(ValueError):
        dispatch_cost(a, np.zeros(3), np.zeros(3))


def test_nominal_points(toy):
    a = toy[0][0]
    np.testing.assert_allclose(nominal_xi(a, "mid"), 0.5 * (a.xi_lo + a.xi_hi))
    np.testing.assert_allclose(nominal_xi(a, "low"), a.xi_lo)


def test_fixed_uncertainty_det_and_robust_coincide():
    case = toy_case()
    areas, Y = assemble(case)
    assert all((a.xi_lo == a.xi_hi).all() for a in areas)
    opts = case.options
    det = solve_deterministic(make_operators(areas, Y, [a.xi_lo for a in areas], opts), Y, opts)
    rob = solve_robust(make_robust_operators(areas, Y, opts), Y, opts)
    assert rob.J_rob == pytest.approx(det.J_star, rel=1e-9)
    assert len(rob.bounds) == 1


def test_disconnected_area_rejected():
    doc = toy_doc()
    doc["areas"][0]["buses"].insert(1, {"id": "i2", "kind": "internal", "demand_max": [1.0, 1.0]})
    with pytest.raises(NetworkError):
        assemble(case_from_dict(doc))
