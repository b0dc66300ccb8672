"""Uniform scenario sampling around a robust schedule.

For each sample ``xi`` drawn uniformly from every area's box:

* ``J_P1`` is the best joint dispatch cost with ``y`` free (central LP);
* ``J_P2`` is the cost of the per-area re-dispatch with ``y`` fixed at the
  robust schedule.

Since the robust schedule is feasible for the joint problem and the robust
cost bounds every scenario's cost at that schedule, each sample satisfies
``J_P1 <= J_P2 <= J_rob`` up to tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lp_core import solve_parametric_point
from .oracles import oracle_joint


@dataclass
class SampleRecord:
    J_rob: float
    y_star: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    tol: float
    violations: int
    histogram: dict = field(default_factory=dict)

    @property
    def max_p2(self):
        return float(self.p2.max()) if self.p2.size else float("nan")


def draw_scenarios(areas, count, seed):
    """``count`` samples; each is a list with one uncertainty vector per area."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        out.append([rng.uniform(a.xi_lo, a.xi_hi) for a in areas])
    return out


def sample_and_compare(areas, coupling, y_star, J_rob, count, seed, tol_rel=1e-6, bins=20, tol_feas=1e-8):
    """Evaluate ``count`` seeded samples and count violations of ``J_P1 <= J_P2 <= J_rob``."""
    y_star = np.asarray(y_star, dtype=float)
    p1, p2 = [], []
    for xis in draw_scenarios(areas, count, seed):
        p1.append(oracle_joint(areas, coupling, xis)[0])
        p2.append(sum(solve_parametric_point(a, y_star, xi, tol_feas).value for a, xi in zip(areas, xis)))
    p1, p2 = np.array(p1), np.array(p2)
    tol = tol_rel * (1.0 + abs(J_rob))
    bad = (p1 > p2 + tol_rel * (1.0 + np.abs(p2))) | (p2 > J_rob + tol)
    hist = {}
    if count:
        counts, edges = np.histogram(p2, bins=bins)
        hist = {"counts": counts.tolist(), "edges": edges.tolist()}
    return SampleRecord(float(J_rob), y_star, p1, p2, tol, int(bad.sum()), hist)
