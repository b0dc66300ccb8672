"""Worst-case uncertainty by MILP, and the min-max scenario loop.

For fixed ``y`` the area cost is the LP dual

    J(y, xi) = max_{lam >= 0, c_x + A_x^T lam = 0}  c0 + c_xi^T xi + (A_xi xi + A_y y - b)^T lam,

which is convex in ``xi``, so its maximum over a box is attained at a vertex
``xi = xi_lo + Delta w`` with ``w`` binary.  The bilinear terms
``w_j * q_j(lam)``, ``q_j = Delta_j (c_xi + A_xi^T lam)_j``, are linearized
with a big-M pair, giving a MILP in (w, rho, lam).  The binary ``w`` is called
the vertex selector here, to keep it apart from the wind dispatch ``w`` of the
network model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coordinator import AreaOperator, Transcript, WorstCaseQuery, WorstCaseReply, solve_deterministic
from .errors import IterationLimitError, NumericalError
from .lp_core import LpProblem, solve, solve_parametric_point
from .milp_core import MilpProblem, solve_milp

BIG_M_SAFETY = 2.0
BIG_M_FLOOR = 1.0
MAX_M_ESCALATIONS = 4


@dataclass(frozen=True)
class UncertaintyBox:
    xi_lo: np.ndarray
    xi_hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.xi_lo, dtype=float)
        hi = np.asarray(self.xi_hi, dtype=float)
        if lo.shape != hi.shape or (hi < lo).any():
            raise ValueError("uncertainty box needs xi_lo <= xi_hi of equal shape")
        object.__setattr__(self, "xi_lo", lo)
        object.__setattr__(self, "xi_hi", hi)

    @classmethod
    def of(cls, area):
        return cls(area.xi_lo, area.xi_hi)

    @property
    def delta(self):
        return self.xi_hi - self.xi_lo

    @property
    def free(self):
        return np.flatnonzero(self.delta > 0)

    def contains(self, xi, tol=1e-12):
        xi = np.asarray(xi, dtype=float)
        return bool(((xi >= self.xi_lo - tol) & (xi <= self.xi_hi + tol)).all())


def recover_xi(w, box: UncertaintyBox):
    """The box vertex named by selector ``w``."""
    w = np.asarray(w, dtype=float)
    return box.xi_lo + box.delta * np.round(w)


def initial_selector(area):
    """Least wind, highest demand floor and ceiling."""
    n = area.n
    return np.concatenate([np.zeros(n), np.ones(2 * n)])


@dataclass(frozen=True)
class WorstCaseMilp:
    problem: MilpProblem
    const: float
    k: int
    m: int
    q_lo: np.ndarray
    q_hi: np.ndarray


def _as_bounds(big_m, k):
    """Per-coordinate ``(q_lo, q_hi)`` from a scalar M or an explicit pair."""
    if np.isscalar(big_m):
        return np.full(k, -float(big_m)), np.full(k, float(big_m))
    lo, hi = (np.asarray(v, dtype=float) for v in big_m)
    if lo.shape != (k,) or hi.shape != (k,) or not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("big-M bounds must be two finite arrays, one entry per uncertain coordinate")
    return lo, hi


def build_worstcase_milp(area, y, box: UncertaintyBox, big_m) -> WorstCaseMilp:
    """MILP whose minimum is ``-(max_xi J(y, xi)) + const``; variables ``(w, rho, lam)``.

    ``big_m`` is a scalar M (bounds ``-M <= q_j <= M``) or a pair of arrays
    ``(q_lo, q_hi)``.  The product ``rho_j = w_j q_j`` is relaxed by
    ``rho_j <= q_hi_j w_j`` and ``rho_j <= q_j - q_lo_j (1 - w_j)``.  A
    coordinate whose bounds fix the sign of ``q_j`` gets its selector fixed.
    """
    y = np.asarray(y, dtype=float)
    k, m = box.delta.size, area.m
    q_lo, q_hi = _as_bounds(big_m, k)
    nv = 2 * k + m
    L = slice(2 * k, nv)
    delta = box.delta
    g_lam = area.A_xi @ box.xi_lo + area.A_y @ y - area.b
    c = np.zeros(nv)
    c[k:2 * k] = -1.0
    c[L] = -g_lam
    rows, rhs, eq = [], [], []

    def add(row, r, is_eq):
        rows.append(row)
        rhs.append(r)
        eq.append(is_eq)

    # stationarity  A_x^T lam = -c_x
    for r in range(area.A_x.shape[1]):
        row = np.zeros(nv)
        row[L] = area.A_x[:, r]
        add(row, -area.c_x[r], True)
    binary = []
    for j in range(k):
        row = np.zeros(nv)
        row[k + j] = 1.0
        row[j] = -q_hi[j]
        add(row, 0.0, False)
        row = np.zeros(nv)
        row[k + j] = 1.0
        row[j] = -q_lo[j]
        row[L] = -delta[j] * area.A_xi[:, j]
        add(row, -q_lo[j] + delta[j] * area.c_xi[j], False)
        fixed = 0.0 if (delta[j] == 0 or q_hi[j] <= 0) else (1.0 if q_lo[j] >= 0 else None)
        if fixed is None:
            binary.append(j)
        else:
            row = np.zeros(nv)
            row[j] = 1.0
            add(row, fixed, True)
    for i in range(m):
        row = np.zeros(nv)
        row[2 * k + i] = -1.0
        add(row, 0.0, False)
    lp = LpProblem(c, np.array(rows), np.array(rhs), np.array(eq))
    const = float(area.c0 + area.c_xi @ box.xi_lo)
    return WorstCaseMilp(MilpProblem(lp, tuple(binary)), const, k, m, q_lo, q_hi)


def _dual_polyhedron(area):
    m = area.m
    A = np.vstack([area.A_x.T, -np.eye(m)])
    b = np.concatenate([-area.c_x, np.zeros(m)])
    eq = np.concatenate([np.ones(area.A_x.shape[1], dtype=bool), np.zeros(m, dtype=bool)])
    return A, b, eq


def coordinate_bounds(area, box: UncertaintyBox):
    """Range of each ``q_j`` over the dual polyhedron; ``nan`` marks an unbounded side.

    Fixed coordinates get ``(0, 0)``.
    """
    A, b, eq = _dual_polyhedron(area)
    k = box.delta.size
    lo, hi = np.zeros(k), np.zeros(k)
    for j in box.free:
        for sign, out in ((1.0, hi), (-1.0, lo)):
            sol = solve(LpProblem(-sign * area.A_xi[:, j], A, b, eq))
            if sol.status == "infeasible":
                raise NumericalError(f"area {area.name}: dual polyhedron is empty (primal unbounded below)")
            if sol.status == "unbounded":
                out[j] = np.nan
            else:
                out[j] = box.delta[j] * (area.c_xi[j] - sign * sol.value)
    return lo, hi


def choose_big_m(area, box: UncertaintyBox, fallback=1e6, bounds=None):
    """``(M, fell_back)``: twice the largest |q_j| over the dual polyhedron.

    If any bound is unbounded the configured ``fallback`` is returned with
    ``fell_back=True``.
    """
    lo, hi = coordinate_bounds(area, box) if bounds is None else bounds
    if np.isnan(lo).any() or np.isnan(hi).any():
        return fallback, True
    best = float(np.abs(np.concatenate([lo, hi])).max(initial=0.0))
    return max(BIG_M_SAFETY * best, BIG_M_FLOOR), False


def estimate_big_m(area, y, box: UncertaintyBox, tol_feas=1e-8):
    """Twice the largest |q_j| seen at the LP duals of a few box vertices.

    Probed vertices: all-low, all-high, the initial scenario, and each single
    flip of the initial scenario.  Used for sides the dual polyhedron leaves
    unbounded.
    """
    w0 = initial_selector(area)
    if w0.size != box.delta.size:
        w0 = np.ones(box.delta.size)
    probes = [np.zeros(box.delta.size), np.ones(box.delta.size), w0]
    for j in box.free:
        w = w0.copy()
        w[j] = 1.0 - w[j]
        probes.append(w)
    best = 0.0
    for w in probes:
        sol = solve_parametric_point(area, y, recover_xi(w, box), tol_feas)
        q = box.delta * (area.c_xi + area.A_xi.T @ sol.duals)
        best = max(best, float(np.abs(q).max(initial=0.0)))
    return max(BIG_M_SAFETY * best, BIG_M_FLOOR)


@dataclass
class WorstCase:
    J_opt: float
    xi: np.ndarray
    selector: tuple
    milp_value: float
    big_m: float
    fell_back: bool
    escalations: int
    nodes: int


def _run_milp(area, y, box, bounds, tol_opt, tol_feas):
    wc = build_worstcase_milp(area, y, box, bounds)
    sol = solve_milp(wc.problem, tol_opt=tol_opt, tol_feas=tol_feas)
    if not sol.optimal:
        raise NumericalError(f"area {area.name}: worst-case MILP is {sol.status}")
    w = np.zeros(wc.k)
    for j in range(wc.k):
        w[j] = sol.z[j]
    return wc.const - sol.value, np.round(w).clip(0, 1), sol.nodes


def solve_worst_case(area, y, box: UncertaintyBox, big_m="auto", fallback="estimate", tol_opt=1e-7,
                     tol_feas=1e-8, bounds=None):
    """Maximize ``J(y, .)`` over the box; ``J_opt`` is the LP value at the recovered vertex.

    For any valid-or-not bounds the MILP value is a lower bound on the true
    maximum, since each relaxed product stays at or below ``w_j q_j``, and
    widening the bounds never lowers it.  In ``"auto"`` mode the sides of
    ``q_j`` that the dual polyhedron bounds are used exactly; an unbounded side
    takes ``fallback`` (a number, or ``"estimate"`` for :func:`estimate_big_m`)
    and the solve is repeated with those sides widened tenfold until the value
    stops moving.  ``bounds`` passes precomputed :func:`coordinate_bounds`.
    """
    y = np.asarray(y, dtype=float)
    k = box.delta.size
    if big_m == "auto":
        lo, hi = coordinate_bounds(area, box) if bounds is None else bounds
        open_lo, open_hi = np.isnan(lo), np.isnan(hi)
        fell_back = bool(open_lo.any() or open_hi.any())
        if not fell_back:
            M = 0.0
        else:
            M = estimate_big_m(area, y, box, tol_feas) if fallback == "estimate" else float(fallback)
        lo, hi = np.where(open_lo, -M, lo), np.where(open_hi, M, hi)
    else:
        M = float(big_m)
        lo, hi = np.full(k, -M), np.full(k, M)
        open_lo = open_hi = np.zeros(k, dtype=bool)
        fell_back = False
    value, w, nodes = _run_milp(area, y, box, (lo, hi), tol_opt, tol_feas)
    escalations = 0
    while fell_back and fallback == "estimate":
        lo10, hi10 = np.where(open_lo, 10.0 * lo, lo), np.where(open_hi, 10.0 * hi, hi)
        value10, w10, n10 = _run_milp(area, y, box, (lo10, hi10), tol_opt, tol_feas)
        nodes += n10
        if value10 <= value + tol_opt * (1.0 + abs(value)):
            break
        if escalations >= MAX_M_ESCALATIONS:
            raise NumericalError(f"area {area.name}: worst-case value still moving after {escalations} escalations")
        lo, hi, value, w = lo10, hi10, value10, w10
        escalations += 1
    xi = recover_xi(w, box)
    J = solve_parametric_point(area, y, xi, tol_feas).value
    if value > J + tol_opt * (1.0 + abs(J)):
        raise NumericalError(f"area {area.name}: MILP value {value} exceeds the LP value {J} at its own vertex")
    used = float(np.abs(np.concatenate([lo, hi])).max(initial=0.0))
    return WorstCase(J, xi, tuple(int(v) for v in w), value, used, fell_back, escalations, nodes)


# --- min-max loop ----------------------------------------------------------

class RobustOperator(AreaOperator):
    """Operator that also keeps a private vertex set and answers worst-case queries."""

    def __init__(self, area, coupling, box, opts):
        V = [recover_xi(initial_selector(area), box)]
        super().__init__(area, coupling, V, opts.tol_feas, opts.tol_opt)
        self._box = box
        self._opts = opts
        self.events = {"big_m_fallbacks": 0, "big_m_escalations": 0, "milp_nodes": 0}
        self.last_selector = None
        self.last_growth = False
        self._bounds = None

    def worst_case(self, query: WorstCaseQuery) -> WorstCaseReply:
        o = self._opts
        if self._bounds is None and o.big_m == "auto":
            self._bounds = coordinate_bounds(self._area, self._box)
        wc = solve_worst_case(self._area, np.asarray(query.y), self._box, o.big_m, o.big_m_fallback,
                              o.tol_opt, o.tol_feas, bounds=self._bounds)
        self.events["big_m_fallbacks"] += int(wc.fell_back)
        self.events["big_m_escalations"] += wc.escalations
        self.events["milp_nodes"] += wc.nodes
        self.last_selector = wc.selector
        self.last_growth = not any(np.array_equal(wc.xi, v) for v in self.scenario)
        if self.last_growth:
            self.scenario = self.scenario + [wc.xi]
        return WorstCaseReply(self.name, float(wc.J_opt))


@dataclass
class RobustResult:
    y_star: np.ndarray
    J_rob: float
    ledger: list
    bounds: list
    vertex_counts: list
    events: dict
    inner: list = field(default_factory=list, repr=False)
    transcript: Transcript = field(default=None, repr=False)


def solve_robust(operators, coupling, opts, transcript=None):
    """Alternate the coordinator's minimization with each operator's worst case.

    ``operators`` are :class:`RobustOperator` instances.  Terminates when the
    summed worst-case costs at ``y*`` do not exceed the min step's value.
    """
    transcript = transcript if transcript is not None else Transcript()
    ledger, bounds, inner = [], [], []
    events = {"epsilon_halvings": 0, "subgradient_check_violations": 0, "big_m_fallbacks": 0,
              "big_m_escalations": 0}
    y0 = None
    for outer in range(opts.max_outer_iters):
        det = solve_deterministic(operators, coupling, opts, y0=y0, transcript=transcript)
        inner.append(det)
        events["epsilon_halvings"] += det.events["epsilon_halvings"]
        events["subgradient_check_violations"] += det.events["subgradient_check_violations"]
        y_star, J_star = det.y_star, det.J_star
        ledger.append({"outer": outer, "step": "min", "cost": J_star, "rounds": len(det.ledger)})
        replies = []
        for op in operators:
            q = transcript.record(WorstCaseQuery(op.name, tuple(y_star.tolist())))
            replies.append(transcript.record(op.worst_case(q)))
        upper = float(sum(r.J_opt for r in replies))
        ledger.append({"outer": outer, "step": "max", "cost": upper,
                       "per_area": [r.J_opt for r in replies]})
        tol = opts.tol_opt * (1.0 + abs(J_star))
        bounds.append({"outer": outer, "lower": J_star, "upper": upper, "sandwich_ok": J_star <= upper + tol})
        if J_star > upper + tol:
            raise NumericalError(f"bound ledger broken at outer iteration {outer}: {J_star} > {upper}")
        if upper <= J_star + tol:
            break
        if not any(op.last_growth for op in operators):
            raise NumericalError("worst case exceeds the min step's value but no vertex set grew; "
                                 "tolerances are inconsistent")
        y0 = y_star
    else:
        raise IterationLimitError(f"robust loop did not close in {opts.max_outer_iters} iterations", ledger)
    for op in operators:
        for key in ("big_m_fallbacks", "big_m_escalations"):
            events[key] += op.events[key]
    return RobustResult(y_star, float(J_star), ledger, bounds, [len(op.scenario) for op in operators],
                        events, inner, transcript)


def make_robust_operators(areas, coupling, opts):
    return [RobustOperator(a, coupling, UncertaintyBox.of(a), opts) for a in areas]
