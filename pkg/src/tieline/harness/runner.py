"""One function per run mode, each returning a :class:`RunRecord`.

Reports hold no wall-clock data unless ``timings=True``, so that repeated runs
with the same inputs produce byte-identical output.
"""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np

from ..casefile import RunRecord, case_digest
from ..coordinator import Transcript, make_operators, solve_deterministic
from ..netmodel import assemble, nominal_xi
from ..robust import make_robust_operators, solve_robust
from .oracles import oracle_joint, oracle_robust_enum
from .sampling import sample_and_compare


class _Clock:
    def __init__(self, enabled):
        self.enabled = enabled
        self.spent = {}

    @contextmanager
    def step(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            if self.enabled:
                self.spent[name] = self.spent.get(name, 0.0) + time.perf_counter() - start


def det_scenarios(areas):
    """Scenario used by deterministic runs: the midpoint of every box."""
    return [nominal_xi(a, "mid") for a in areas]


def run_det(case, opts=None, timings=False):
    """Coordinator run at the box midpoints.  Returns ``(record, DetResult)``."""
    opts = opts or case.options
    clock = _Clock(timings)
    areas, coupling = assemble(case)
    with clock.step("solve"):
        res = solve_deterministic(make_operators(areas, coupling, det_scenarios(areas), opts), coupling, opts,
                                  transcript=Transcript())
    rec = RunRecord(case_digest(case), "det", res.ledger, res.y_star, res.J_star, [], clock.spent, res.events,
                    {"area_costs": res.area_costs})
    return rec, res


def run_robust(case, opts=None, timings=False):
    """Min-max run.  Returns ``(record, RobustResult)``."""
    opts = opts or case.options
    clock = _Clock(timings)
    areas, coupling = assemble(case)
    with clock.step("solve"):
        res = solve_robust(make_robust_operators(areas, coupling, opts), coupling, opts, transcript=Transcript())
    rec = RunRecord(case_digest(case), "robust", res.ledger, res.y_star, res.J_rob, res.bounds, clock.spent,
                    res.events, {"vertex_counts": res.vertex_counts, "outer_iterations": len(res.bounds)})
    return rec, res


def run_oracle(case, mode, timings=False):
    """Central reference solve; ``mode`` is ``"det"`` or ``"robust"``."""
    clock = _Clock(timings)
    areas, coupling = assemble(case)
    with clock.step("solve"):
        if mode == "det":
            value, y, _ = oracle_joint(areas, coupling, det_scenarios(areas))
        elif mode == "robust":
            value, y = oracle_robust_enum(areas, coupling)
        else:
            raise ValueError(f"unknown oracle mode {mode!r}")
    return RunRecord(case_digest(case), f"oracle-{mode}", [], y, value, [], clock.spent)


def run_sample(case, count, seed, opts=None, timings=False):
    """Robust run followed by ``count`` seeded samples at its schedule."""
    opts = opts or case.options
    clock = _Clock(timings)
    rec, res = run_robust(case, opts)
    areas, coupling = assemble(case)
    with clock.step("sample"):
        s = sample_and_compare(areas, coupling, res.y_star, res.J_rob, count, seed)
    extra = {"seed": seed, "samples": count, "p1": s.p1, "p2": s.p2, "max_p2": s.max_p2,
             "violations": s.violations, "histogram": s.histogram}
    return RunRecord(case_digest(case), "sample", rec.iterations, res.y_star, res.J_rob, rec.bounds,
                     clock.spent, rec.events, extra), s


def relative_gap(a, b):
    return abs(a - b) / (1.0 + abs(b))


def run_check(case, opts=None, tol=1e-6, enum_cap=12):
    """Cross-check both solvers against their oracles.  Returns ``(record, ok)``.

    The robust check is skipped (and reported as such) when the uncertainty
    has more coordinates than the enumeration oracle accepts.
    """
    opts = opts or case.options
    areas, coupling = assemble(case)
    checks = []
    det_rec, det = run_det(case, opts)
    ref = oracle_joint(areas, coupling, det_scenarios(areas))[0]
    checks.append({"name": "det_vs_oracle", "value": det.J_star, "oracle": ref,
                   "gap": relative_gap(det.J_star, ref), "ok": relative_gap(det.J_star, ref) <= tol})
    coords = sum(int((a.xi_hi > a.xi_lo).sum()) for a in areas)
    rob_rec, rob = run_robust(case, opts)
    sandwich = all(b["sandwich_ok"] for b in rob.bounds)
    checks.append({"name": "bound_sandwich", "ok": sandwich})
    if coords <= enum_cap:
        ref = oracle_robust_enum(areas, coupling, enum_cap)[0]
        checks.append({"name": "robust_vs_oracle", "value": rob.J_rob, "oracle": ref,
                       "gap": relative_gap(rob.J_rob, ref), "ok": relative_gap(rob.J_rob, ref) <= tol})
    else:
        checks.append({"name": "robust_vs_oracle", "skipped": f"{coords} uncertain coordinates", "ok": True})
    ok = all(c["ok"] for c in checks)
    events = {"det_" + k: v for k, v in det.events.items()}
    events.update({"robust_" + k: v for k, v in rob.events.items()})
    rec = RunRecord(case_digest(case), "check", [], rob.y_star, rob.J_rob, rob.bounds, {}, events,
                    {"checks": checks, "ok": ok, "det_y_star": np.asarray(det.y_star)})
    return rec, ok
