import functools
import time

import numpy as np
import pytest

from tieline.casefile import case_from_dict
from tieline.harness.cases import random_case, shipped_case
from tieline.netmodel import AreaModel, CouplingPolytope, assemble

# acceptance lines, printed once at the end of the session
ACCEPTANCE_LINES = []
RUNTIME_BUDGET = 120.0
_session_start = []


def pytest_sessionstart(session):
    _session_start.append(time.perf_counter())


def pytest_sessionfinish(session, exitstatus):
    if not ACCEPTANCE_LINES:
        return
    spent = time.perf_counter() - _session_start[0]
    ok = spent < RUNTIME_BUDGET
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] suite runtime: {spent:.1f} s (budget {RUNTIME_BUDGET:.0f} s)")
    if not ok and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def toy_doc(cap=100.0, price_a=20.0, price_b=40.0, load_a=150.0, load_b=150.0, demand_range=None,
            wind=None):
    """Two areas, one internal and one boundary bus each, joined by one tie-line."""
    def area(name, price, load):
        dmax = [load, load] if demand_range is None else [load * demand_range[0], load * demand_range[1]]
        bus = {"id": "i1", "kind": "internal", "gen_min": 0.0, "gen_max": 200.0, "price_gen": price,
               "demand_min": [0.0, 0.0], "demand_max": dmax, "price_demand": 100.0}
        if wind is not None:
            bus["wind_max"] = list(wind)
        return {"id": name, "buses": [bus, {"id": "b1", "kind": "boundary"}],
                "branches": [{"from": "i1", "to": "b1", "x": 0.1, "cap": 300.0}]}
    return {"base_mva": 100.0, "areas": [area("A1", price_a, load_a), area("A2", price_b, load_b)],
            "tielines": [{"from": ["A1", "b1"], "to": ["A2", "b1"], "x": 0.25, "cap": cap}],
            "slack": ["A1", "b1"]}


def toy_case(**kw):
    return case_from_dict(toy_doc(**kw))


def line_area():
    """``min x  s.t.  x >= y, x >= 0`` over ``y in [-1, 1]``; value ``max(y, 0)``."""
    area = AreaModel(
        name="line", n=0, nbar=0,
        A_x=np.array([[-1.0], [-1.0]]), A_xi=np.zeros((2, 1)), A_y=np.array([[1.0], [0.0]]),
        b=np.zeros(2), c0=0.0, c_x=np.array([1.0]), c_xi=np.zeros(1),
        xi_lo=np.zeros(1), xi_hi=np.zeros(1))
    coupling = CouplingPolytope(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]), ("hi", "lo"), 0)
    return area, coupling


@functools.lru_cache(maxsize=None)
def cached_random_case(seed, **kw):
    return random_case(seed, **kw)


@functools.lru_cache(maxsize=None)
def cached_shipped(name):
    return shipped_case(name)


@pytest.fixture
def toy():
    return assemble(toy_case())


@pytest.fixture(params=["tiny2", "small2", "tri3"])
def shipped(request):
    return request.param, cached_shipped(request.param)
