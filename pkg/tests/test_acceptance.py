"""End-to-end acceptance checks, one test per criterion.

Each test appends one PASS/FAIL line to ``ACCEPTANCE_LINES``; the lines are
printed together at the end of the session.  Runs shared between criteria are
cached at module level.
"""

import dataclasses
import functools

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from conftest import ACCEPTANCE_LINES, cached_random_case, cached_shipped
from tieline.casefile import emit_report
from tieline.coordinator import make_operators, solve_deterministic, validate_transcript
from tieline.harness.cases import SHIPPED
from tieline.harness.oracles import box_vertices, oracle_joint, oracle_robust_enum
from tieline.harness.runner import run_check, run_det, run_robust, run_sample
from tieline.lp_core import solve_parametric_point
from tieline.mplp import sample_region
from tieline.netmodel import assemble, nominal_xi
from tieline.robust import UncertaintyBox, make_robust_operators, solve_robust, solve_worst_case

TOL = 1e-6

DET_SEEDS = range(25)
ROBUST_SEEDS = range(100, 112)


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / (1.0 + abs(b))


# --- shared runs -----------------------------------------------------------

def det_case(seed):
    return cached_random_case(seed, n_areas=2 + seed % 2, max_internal=6, max_boundary=2)


def robust_case(seed):
    # every other case prices spilled wind, which makes the worst case bite
    priced = seed % 2 == 0
    n_areas = 3 if seed % 3 == 2 else 2
    return cached_random_case(seed, n_areas=n_areas, max_internal=5, max_boundary=2, uncertain=8,
                              wind_price=30.0 if priced else 0.0, wind_scale=5.0 if priced else 1.0)


@dataclasses.dataclass
class DetRun:
    label: str
    areas: list
    coupling: object
    result: object
    oracle: float
    operators: list


@dataclasses.dataclass
class RobustRun:
    label: str
    areas: list
    coupling: object
    result: object
    oracle: float
    operators: list


@functools.lru_cache(maxsize=None)
def det_runs():
    cases = [(f"random-{s}", det_case(s)) for s in DET_SEEDS] + [(n, cached_shipped(n)) for n in SHIPPED]
    out = []
    for label, case in cases:
        areas, Y = assemble(case)
        xis = [nominal_xi(a, "mid") for a in areas]
        ops = make_operators(areas, Y, xis, case.options)
        res = solve_deterministic(ops, Y, case.options)
        out.append(DetRun(label, areas, Y, res, oracle_joint(areas, Y, xis)[0], ops))
    return out


@functools.lru_cache(maxsize=None)
def robust_runs():
    cases = [(f"random-{s}", robust_case(s)) for s in ROBUST_SEEDS] + [(n, cached_shipped(n)) for n in SHIPPED]
    out = []
    for label, case in cases:
        areas, Y = assemble(case)
        ops = make_robust_operators(areas, Y, case.options)
        res = solve_robust(ops, Y, case.options)
        out.append(RobustRun(label, areas, Y, res, oracle_robust_enum(areas, Y)[0], ops))
    return out


def batched_values(area, Z, xi):
    """``J(z, xi)`` for every row of ``Z`` from one block-diagonal HiGHS solve."""
    k = len(Z)
    A = sp.kron(sp.identity(k, format="csr"), sp.csr_matrix(area.A_x), format="csr")
    rhs = np.concatenate([area.b - area.A_xi @ xi - area.A_y @ z for z in Z])
    res = linprog(np.tile(area.c_x, k), A_ub=A, b_ub=rhs, bounds=(None, None), method="highs")
    assert res.status == 0, res.message
    x = res.x.reshape(k, -1)
    return x @ area.c_x + area.c0 + area.c_xi @ xi


# --- criteria --------------------------------------------------------------

def test_1_deterministic_matches_the_joint_oracle():
    runs = det_runs()
    gaps = [rel(r.result.J_star, r.oracle) for r in runs]
    rounds = max(len(r.result.ledger) for r in runs)
    n_random = sum(r.label.startswith("random") for r in runs)
    sizes_ok = all(max(len(a.bus_ids) for a in r.areas) <= 10 and r.coupling.n_tie_rows // 2 <= 4 for r in runs)
    ok = max(gaps) <= TOL and n_random >= 25 and sizes_ok
    report(1, "deterministic vs joint oracle", ok,
           f"{len(runs)} cases ({n_random} random), max rel gap {max(gaps):.1e}, max rounds {rounds}")


def test_2_robust_matches_the_enumeration_oracle():
    runs = robust_runs()
    gaps = [rel(r.result.J_rob, r.oracle) for r in runs]
    outer = [len(r.result.bounds) for r in runs]
    coords = [sum(int((a.xi_hi > a.xi_lo).sum()) for a in r.areas) for r in runs]
    n_random = sum(r.label.startswith("random") for r in runs)
    ok = max(gaps) <= TOL and max(outer) <= 10 and max(coords) <= 10 and n_random >= 10
    report(2, "robust vs enumeration oracle", ok,
           f"{len(runs)} cases ({n_random} random), max rel gap {max(gaps):.1e}, "
           f"outer iterations {dict(sorted((k, outer.count(k)) for k in set(outer)))}")


def test_3_bound_sandwich():
    bad = 0
    final = 0.0
    for r in robust_runs():
        for b in r.result.bounds:
            if b["lower"] > b["upper"] + 1e-7 * (1 + abs(b["lower"])):
                bad += 1
        last = r.result.bounds[-1]
        final = max(final, (last["upper"] - last["lower"]) / (1 + abs(last["lower"])))
    ok = bad == 0 and final <= 1e-7
    report(3, "bound sandwich", ok, f"{bad} broken iterations, max final relative gap {final:.1e}")


def test_4_subgradient_invariant():
    det = sum(r.result.events["subgradient_check_violations"] for r in det_runs())
    rob = sum(r.result.events["subgradient_check_violations"] for r in robust_runs())
    report(4, "descent direction invariant", det + rob == 0, f"{det + rob} violations")


def _slice_convexity():
    case = cached_shipped("small2")
    areas, Y = assemble(case)
    xis = [nominal_xi(a, "mid") for a in areas]
    lo, hi = Y.box()
    center = 0.5 * (lo + hi)
    e = np.zeros((2, Y.dim))
    e[0, 0], e[1, 1] = 1.0, 1.0
    half = 0.5 * (hi - lo)[:2]
    steps = np.linspace(-1.0, 1.0, 9)
    grid = {}
    for i, s in enumerate(steps):
        for j, t in enumerate(steps):
            z = center + s * half[0] * e[0] + t * half[1] * e[1]
            if Y.contains(z):
                grid[i, j] = z
    keys = sorted(grid)
    Z = np.array([grid[k] for k in keys])
    J = sum(batched_values(a, Z, xi) for a, xi in zip(areas, xis))
    val = dict(zip(keys, J))
    checks = bad = 0
    for (i, j) in keys:
        for (k, l) in keys:
            if (i, j) >= (k, l) or (i - k) % 2 or (j - l) % 2:
                continue
            mid = ((i + k) // 2, (j + l) // 2)
            if mid not in val:
                continue
            checks += 1
            avg = 0.5 * (val[i, j] + val[k, l])
            if val[mid] > avg + TOL * (1 + abs(avg)):
                bad += 1
    return checks, bad


def test_5_critical_region_fidelity():
    rng = np.random.default_rng(0)
    regions = samples = 0
    worst = 0.0
    for run in list(det_runs()) + list(robust_runs()):
        for op in run.operators:
            area = op._area
            for y, scenario, region in op.regions:
                V = scenario if isinstance(scenario, list) else [scenario]
                Z = np.array(sample_region(region, 100, rng, start=y))
                J = np.max([batched_values(area, Z, xi) for xi in V], axis=0)
                pred = Z @ region.alpha + region.beta
                worst = max(worst, float((np.abs(J - pred) / (1 + np.abs(J))).max()))
                regions += 1
                samples += len(Z)
    checks, bad = _slice_convexity()
    ok = worst <= TOL and bad == 0 and checks > 0
    report(5, "critical region fidelity", ok,
           f"{regions} regions, {samples} samples, max rel error {worst:.1e}; "
           f"{checks} midpoint checks on a 2-D slice, {bad} failures")


def _milp_pairs(limit=20, max_coords=8):
    pairs = []
    for run in robust_runs():
        for a in run.areas:
            box = UncertaintyBox.of(a)
            if 0 < box.free.size <= max_coords:
                pairs.append((a, run.result.y_star))
            if len(pairs) == limit:
                return pairs
    return pairs


def test_6_worst_case_milp_equals_enumeration():
    pairs = _milp_pairs()
    worst = moved = 0.0
    tol_opt = 1e-7
    for a, y in pairs:
        box = UncertaintyBox.of(a)
        wc = solve_worst_case(a, y, box, tol_opt=tol_opt)
        ref = max(solve_parametric_point(a, y, xi).value for xi in box_vertices(a))
        worst = max(worst, abs(wc.milp_value - ref) / (1 + abs(ref)), abs(wc.J_opt - ref) / (1 + abs(ref)))
        wide = solve_worst_case(a, y, box, big_m=10.0 * max(wc.big_m, 1.0), tol_opt=tol_opt)
        moved = max(moved, abs(wide.milp_value - wc.milp_value) / (1 + abs(ref)))
    ok = len(pairs) >= 20 and worst <= tol_opt and moved < tol_opt
    report(6, "worst-case MILP vs enumeration", ok,
           f"{len(pairs)} pairs, max rel gap {worst:.1e}, tenfold-M change {moved:.1e}")


def test_7_sampling_order_on_small2():
    rec, s = run_sample(cached_shipped("small2"), 200, 7)
    ok = s.violations == 0 and len(s.p1) == 200
    report(7, "sampled costs ordered below the robust bound", ok,
           f"{len(s.p1)} samples, {s.violations} violations, max sampled {s.max_p2:.6g} <= J_rob {s.J_rob:.6g}")


ALLOWED = {"CrQuery": {"type", "area", "y"}, "CrResponse": {"type", "area", "D", "d", "alpha", "beta"},
           "WorstCaseQuery": {"type", "area", "y"}, "WorstCaseReply": {"type", "area", "J_opt"}}


def test_8_transcripts_are_private():
    det = next(r for r in det_runs() if r.label == "small2").result.transcript
    rob = next(r for r in robust_runs() if r.label == "small2").result.transcript
    counts, stray = [], 0
    for t in (det, rob):
        counts.append(validate_transcript(t.dumps()))
        for msg in t.messages:
            stray += set(msg) != ALLOWED[msg["type"]]
    kinds = {m["type"] for m in rob.messages}
    ok = stray == 0 and kinds == set(ALLOWED) and all(counts)
    report(8, "transcript schema and privacy", ok,
           f"{counts[0]} deterministic and {counts[1]} robust messages valid, {stray} with extra fields")


def test_9_reports_are_byte_identical():
    case = cached_shipped("small2")
    tiny = cached_shipped("tiny2")
    runs = {
        "det": lambda: emit_report(run_det(case)[0]),
        "robust": lambda: emit_report(run_robust(case)[0]),
        "sample": lambda: emit_report(run_sample(tiny, 20, 3)[0]),
        "check": lambda: emit_report(run_check(tiny)[0]),
    }
    same = {name: fn() == fn() for name, fn in runs.items()}
    ok = all(same.values())
    report(9, "byte-identical repeat reports", ok, ", ".join(f"{k} {'same' if v else 'DIFFERENT'}"
                                                               for k, v in same.items()))
