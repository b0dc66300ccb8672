"""Best-first branch-and-bound for LPs with binary variables.

Minimization form.  Binaries are bounded to [0, 1] in every relaxation and
fixed by equality rows when branched on.  Node order is deterministic: the
heap key is (relaxation bound, creation counter), branching picks the lowest
fractional index, and the down branch is created before the up branch.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import NodeLimitError
from .lp_core import OPTIMAL, UNBOUNDED, LpProblem, solve


@dataclass(frozen=True)
class MilpProblem:
    relaxation: LpProblem
    binary: tuple

    def __post_init__(self):
        n = self.relaxation.c.size
        b = tuple(int(j) for j in self.binary)
        if any(j < 0 or j >= n for j in b) or len(set(b)) != len(b):
            raise ValueError("binary indices out of range or repeated")
        object.__setattr__(self, "binary", b)


@dataclass(frozen=True)
class MilpSolution:
    status: str
    z: np.ndarray = None
    value: float = None
    binaries: tuple = ()
    nodes: int = 0
    gap: float = None

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _with_fixings(base_A, base_b, base_eq, n, fix):
    if not fix:
        return LpProblem(np.zeros(n), base_A, base_b, base_eq)
    idx = sorted(fix)
    F = np.zeros((len(idx), n))
    F[np.arange(len(idx)), idx] = 1.0
    vals = np.array([float(fix[j]) for j in idx])
    return LpProblem(np.zeros(n), np.vstack([base_A, F]), np.concatenate([base_b, vals]),
                     np.concatenate([base_eq, np.ones(len(idx), dtype=bool)]))


def solve_milp(p: MilpProblem, gap: float = 0.0, tol_opt: float = 1e-7, tol_feas: float = 1e-8,
               tol_int: float = 1e-6, max_nodes: int = 20000, rule: str = "dantzig") -> MilpSolution:
    """Global minimum of ``p`` within ``gap`` (relative) plus ``tol_opt`` slack.

    Children start from their parent's optimal basis.
    """
    lp = p.relaxation
    n = lp.c.size
    bins = np.array(p.binary, dtype=int)
    B = np.zeros((2 * bins.size, n))
    B[np.arange(bins.size), bins] = 1.0
    B[bins.size + np.arange(bins.size), bins] = -1.0
    A = np.vstack([lp.A, B])
    b = np.concatenate([lp.b, np.ones(bins.size), np.zeros(bins.size)])
    eq = np.concatenate([lp.eq, np.zeros(2 * bins.size, dtype=bool)])

    def relax(fix, parent=None):
        q = _with_fixings(A, b, eq, n, fix)
        warm = None if parent is None else parent.info.get("warm")
        return solve(LpProblem(lp.c, q.A, q.b, q.eq), tol_feas, rule, warm=warm)

    def slack(value):
        return tol_opt * (1.0 + abs(value)) + gap * abs(value)

    inc_z, inc_val, inc_bits = None, np.inf, ()
    counter = 0
    nodes = 0

    def try_incumbent(bits, parent=None):
        nonlocal inc_z, inc_val, inc_bits
        fix = {int(j): int(v) for j, v in zip(bins, bits)}
        sol = relax(fix, parent)
        if sol.optimal and sol.value < inc_val - slack(sol.value):
            inc_z, inc_val, inc_bits = sol.z, sol.value, tuple(int(v) for v in bits)
        return sol

    root = relax({})
    nodes += 1
    if root.status == UNBOUNDED:
        return MilpSolution(UNBOUNDED, nodes=nodes)
    if not root.optimal:
        return MilpSolution(root.status, nodes=nodes)
    if bins.size:
        try_incumbent(np.round(root.z[bins]).clip(0, 1), root)
    heap = [(root.value, counter, {}, root)]
    while heap:
        bound, _, fix, sol = heapq.heappop(heap)
        if bound >= inc_val - slack(inc_val):
            heap.clear()
            break
        frac = np.abs(sol.z[bins] - np.round(sol.z[bins])) > tol_int if bins.size else np.zeros(0, bool)
        if not frac.any():
            try_incumbent(np.round(sol.z[bins]).clip(0, 1) if bins.size else (), sol)
            if not bins.size:
                inc_z, inc_val, inc_bits = sol.z, sol.value, ()
            continue
        j = int(bins[np.flatnonzero(frac)[0]])
        for v in (0, 1):
            child_fix = dict(fix)
            child_fix[j] = v
            if nodes >= max_nodes:
                lo = min([bound] + [h[0] for h in heap])
                raise NodeLimitError(f"branch-and-bound exceeded {max_nodes} nodes",
                                     incumbent=None if inc_z is None else inc_val, bound=lo)
            child = relax(child_fix, sol)
            nodes += 1
            if child.status == UNBOUNDED:
                return MilpSolution(UNBOUNDED, nodes=nodes)
            if not child.optimal or child.value >= inc_val - slack(inc_val):
                continue
            counter += 1
            heapq.heappush(heap, (max(child.value, bound), counter, child_fix, child))
    if inc_z is None:
        return MilpSolution("infeasible", nodes=nodes)
    return MilpSolution(OPTIMAL, inc_z, float(inc_val), inc_bits, nodes, 0.0)
