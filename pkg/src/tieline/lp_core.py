"""Dense linear programming with duals, active sets and a lexicographic rule.

Problems are stated in inequality form with free variables::

    minimize  c^T z   subject to   A z <= b   (rows flagged in ``eq`` hold with equality)

and are solved by a two-phase tableau simplex applied to the dual standard
form ``min b^T lam  s.t.  A^T lam = -c, lam >= 0``.  Working on the dual makes
an optimal basis a set of primal rows whose coefficient block is square and
invertible, which is exactly what critical-region construction needs: the
basis rows determine the optimal vertex, the remaining rows describe where
that vertex stays feasible.

Bland's rule is the default pivot rule, so runs are deterministic and cannot
cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleAreaError, NumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIV_TOL = 1e-9
_RC_TOL = 1e-10
_P1_TOL = 1e-9


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    eq: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(-1, c.size) if A.size else np.zeros((0, c.size))
        b = np.asarray(self.b, dtype=float).ravel()
        eq = np.zeros(b.size, dtype=bool) if self.eq is None else np.asarray(self.eq, dtype=bool).ravel()
        if A.shape != (b.size, c.size) or eq.size != b.size:
            raise ValueError(f"inconsistent LP dimensions: A{A.shape}, b({b.size}), c({c.size}), eq({eq.size})")
        if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "eq", eq)

    @property
    def dims(self):
        return self.c.size, self.b.size


@dataclass(frozen=True)
class LpSolution:
    status: str
    z: np.ndarray = None
    value: float = None
    duals: np.ndarray = None
    active_set: tuple = ()
    basis: tuple = ()
    pivots: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


# --- tableau simplex on  min f^T x  s.t.  M x = r, x >= 0 -------------------

def _pivot(T, i, j):
    T[i] /= T[i, j]
    col = T[:, j]
    rows = np.flatnonzero(col)
    rows = rows[rows != i]
    T[rows] -= col[rows, None] * T[i]


def _choose_entering(d, ncols, rule):
    cand = np.flatnonzero(d[:ncols] < -_RC_TOL)
    if cand.size == 0:
        return -1
    if rule == "bland":
        return int(cand[0])
    return int(cand[np.argmin(d[cand])])


def _choose_leaving(T, j, basis):
    col = T[:-1, j]
    rows = np.flatnonzero(col > _PIV_TOL)
    if rows.size == 0:
        return -1
    ratios = T[rows, -1] / col[rows]
    best = ratios.min()
    ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
    return int(ties[np.argmin(basis[ties])])


def _run(T, basis, ncols, rule, max_pivots, stats):
    """Pivot until optimal (returns True) or unbounded (returns False)."""
    degenerate = 0
    while True:
        use = "bland" if (rule == "bland" or degenerate > 20) else rule
        j = _choose_entering(T[-1], ncols, use)
        if j < 0:
            return True
        i = _choose_leaving(T, j, basis)
        if i < 0:
            return False
        degenerate = degenerate + 1 if T[i, -1] <= 1e-12 else 0
        _pivot(T, i, j)
        basis[i] = j
        stats["pivots"] += 1
        if stats["pivots"] > max_pivots:
            raise NumericalError(f"simplex exceeded {max_pivots} pivots")


def _reinvert(M, r, f, basis):
    """Rebuild the phase-2 tableau from scratch for the given basis."""
    B = M[:, basis]
    body = np.linalg.solve(B, np.column_stack([M, r]))
    T = np.zeros((len(basis) + 1, M.shape[1] + 1))
    T[:-1] = body
    fb = f[basis]
    T[-1, :-1] = f - fb @ body[:, :-1]
    T[-1, -1] = -fb @ body[:, -1]
    return T


def _standard_simplex(M, r, f, rule="bland", max_pivots=20000):
    """Two-phase simplex.  Returns (status, basis, kept_rows, stats)."""
    m, ncols = M.shape
    stats = {"pivots": 0}
    sign = np.where(r < 0, -1.0, 1.0)
    M = M * sign[:, None]
    r = r * sign
    T = np.zeros((m + 1, ncols + m + 1))
    T[:m, :ncols] = M
    T[:m, ncols:ncols + m] = np.eye(m)
    T[:m, -1] = r
    T[-1, :ncols] = -M.sum(axis=0)
    T[-1, -1] = -r.sum()
    basis = np.arange(ncols, ncols + m)
    _run(T, basis, ncols, rule, max_pivots, stats)
    if -T[-1, -1] > _P1_TOL * (1.0 + np.abs(r).sum()):
        return INFEASIBLE, None, None, stats

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] < ncols:
            continue
        row = T[i, :ncols]
        cand = np.flatnonzero(np.abs(row) > 1e-7)
        if cand.size:
            j = int(cand[np.argmax(np.abs(row[cand]))])
            _pivot(T, i, j)
            basis[i] = j
        else:
            keep[i] = False
    M = M[keep]
    r = r[keep]
    basis = basis[keep]
    if basis.size == 0:
        return OPTIMAL, basis, keep, stats

    status = _phase2(M, r, f, basis, ncols, rule, max_pivots, stats)
    return status, basis, keep, stats


def _phase2(M, r, f, basis, ncols, rule, max_pivots, stats):
    T = _reinvert(M, r, f, basis)
    for attempt in range(50):
        ok = _run(T, basis, ncols, rule, max_pivots, stats)
        if not ok:
            return UNBOUNDED
        T = _reinvert(M, r, f, basis)
        if (T[-1, :ncols] >= -_RC_TOL).all() and (T[:-1, -1] >= -1e-9).all():
            return OPTIMAL
        T[:-1, -1] = np.maximum(T[:-1, -1], 0.0)
    raise NumericalError("simplex failed to settle after reinversion")


def _warm_simplex(M, r, f, basis, rule="bland", max_pivots=20000):
    """Phase 2 from a given feasible basis; ``None`` when the basis does not fit."""
    m, ncols = M.shape
    basis = np.asarray(basis, dtype=int)
    if basis.size != m:
        return None
    try:
        xb = np.linalg.solve(M[:, basis], r)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(xb).all() or (xb < -1e-9 * (1.0 + np.abs(xb).max())).any():
        return None
    stats = {"pivots": 0}
    status = _phase2(M, r, f, basis, ncols, rule, max_pivots, stats)
    return status, basis, np.ones(m, dtype=bool), stats


# --- public API ----------------------------------------------------------------

def _prepare(p):
    """Row-scale the problem; return scaled data and bookkeeping."""
    scale = np.abs(p.A).max(axis=1) if p.A.size else np.zeros(p.b.size)
    zero = scale == 0
    if zero.any():
        bz = p.b[zero]
        eqz = p.eq[zero]
        if (bz[~eqz] < -1e-12).any() or (np.abs(bz[eqz]) > 1e-12).any():
            return None
    rows = np.flatnonzero(~zero)
    As = p.A[rows] / scale[rows, None]
    bs = p.b[rows] / scale[rows]
    return rows, scale, As, bs


def solve(p: LpProblem, tol_feas: float = 1e-8, rule: str = "bland", warm=None) -> LpSolution:
    """Solve ``p``; on optimality the solution carries duals and active set.

    Duals satisfy ``c + A^T duals = 0`` with ``duals >= 0`` on inequality rows.
    ``warm`` is ``info["warm"]`` of an earlier solution of a problem with the
    same columns, the same objective and at least the same rows; its basis
    starts phase 2 directly.  Adding rows keeps that basis feasible, which is
    what branch-and-bound children rely on.
    """
    n, m = p.dims
    prep = _prepare(p)
    if prep is None:
        return LpSolution(INFEASIBLE)
    rows, scale, As, bs = prep
    eqs = p.eq[rows]
    gamma = max(np.abs(p.c).max(initial=0.0), 1e-300)
    cs = p.c / gamma if np.abs(p.c).max(initial=0.0) > 0 else p.c.copy()

    # dual columns: one per scaled row, plus a negated copy for equality rows
    col_row = np.concatenate([np.arange(rows.size), np.flatnonzero(eqs)])
    col_sign = np.concatenate([np.ones(rows.size), -np.ones(int(eqs.sum()))])
    M = (As[col_row] * col_sign[:, None]).T
    f = bs[col_row] * col_sign
    if n == 0:
        feas = (bs[~eqs] >= -tol_feas).all() and (np.abs(bs[eqs]) <= tol_feas).all()
        if not feas:
            return LpSolution(INFEASIBLE)
        return LpSolution(OPTIMAL, np.zeros(0), 0.0, np.zeros(m), tuple(int(i) for i in rows), ())

    warm_res = None
    if warm is not None:
        pos = np.full(m, -1)
        pos[rows] = np.arange(rows.size)
        eq_pos = np.full(m, -1)
        eq_pos[rows[eqs]] = rows.size + np.arange(int(eqs.sum()))
        cols = [pos[r] if sg > 0 else eq_pos[r] for r, sg in warm if r < m]
        if len(cols) == len(warm) and min(cols, default=0) >= 0:
            warm_res = _warm_simplex(M, -cs, f, cols, rule=rule)
    if warm_res is not None:
        status, basis, keep, stats = warm_res
    else:
        status, basis, keep, stats = _standard_simplex(M, -cs, f, rule=rule)
    if status == INFEASIBLE:
        # dual infeasible: primal is unbounded or infeasible
        if np.abs(cs).max(initial=0.0) == 0:
            return LpSolution(INFEASIBLE, pivots=stats["pivots"])
        feas = solve(LpProblem(np.zeros(n), p.A, p.b, p.eq), tol_feas, rule)
        return LpSolution(UNBOUNDED if feas.optimal else INFEASIBLE, pivots=stats["pivots"])
    if status == UNBOUNDED:
        return LpSolution(INFEASIBLE, pivots=stats["pivots"])

    brow = col_row[basis]
    uniq = np.unique(brow)
    Ab = As[uniq]
    if Ab.shape[0] == n:
        z = np.linalg.solve(Ab, bs[uniq])
    else:
        z = np.linalg.lstsq(Ab, bs[uniq], rcond=None)[0]
    Mb = M[keep][:, basis]
    if Mb.shape[0] == Mb.shape[1]:
        lam_b = np.linalg.solve(Mb, -cs[keep])
    else:
        lam_b = np.linalg.lstsq(Mb, -cs[keep], rcond=None)[0]
    mu = np.zeros(rows.size)
    np.add.at(mu, col_row[basis], lam_b * col_sign[basis])

    resid = As @ z - bs
    viol = np.maximum(resid[~eqs], 0.0).max(initial=0.0)
    viol = max(viol, np.abs(resid[eqs]).max(initial=0.0))
    if viol > 1e3 * tol_feas:
        raise NumericalError(f"primal residual {viol:.3e} after simplex")
    if (mu[~eqs] < -1e-7).any():
        raise NumericalError("negative dual on an inequality row")
    mu[~eqs] = np.maximum(mu[~eqs], 0.0)

    duals = np.zeros(m)
    duals[rows] = gamma * mu / scale[rows]
    active = rows[np.abs(resid) <= tol_feas]
    info = {}
    if keep.all():
        info["warm"] = tuple((int(rows[col_row[j]]), int(col_sign[j])) for j in basis)
    return LpSolution(
        OPTIMAL, z, float(p.c @ z), duals,
        tuple(int(i) for i in np.sort(active)),
        tuple(int(i) for i in np.sort(rows[uniq])),
        stats["pivots"],
        info,
    )


def _snap_vertex(p, z, tol):
    """Recompute ``z`` from a maximal independent set of its active rows."""
    n = p.c.size
    scale = np.abs(p.A).max(axis=1)
    scale[scale == 0] = 1.0
    resid = np.abs(p.A @ z - p.b) / scale
    act = np.flatnonzero(resid <= tol)
    if act.size < n:
        return None
    Aa = p.A[act] / scale[act, None]
    chosen = []
    Q = np.zeros((n, 0))
    for k in np.argsort(resid[act], kind="stable"):
        v = Aa[k] - Q @ (Q.T @ Aa[k])
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            Q = np.column_stack([Q, v / nv])
            chosen.append(int(act[k]))
            if len(chosen) == n:
                break
    if len(chosen) < n:
        return None
    chosen = sorted(chosen)
    zv = np.linalg.solve(p.A[chosen], p.b[chosen])
    return zv, tuple(chosen)


def solve_lex_smallest(p: LpProblem, tol_feas: float = 1e-8) -> LpSolution:
    """Lexicographically smallest optimizer, by n sequential re-solves.

    After each solve the optimal face is pinned exactly: by complementary
    slackness it is the feasible set with every positive-dual row held at
    equality.  Then z_1, z_2, ... are minimized in turn over the shrinking
    face.  The final point is snapped onto the vertex cut out by its active
    rows so that the result is an exact vertex of the original polyhedron.
    """
    base = solve(p, tol_feas)
    if not base.optimal:
        return base
    n = p.c.size
    eq = p.eq.copy()
    sol = base
    for k in range(n + 1):
        lam = sol.duals
        eq |= lam > 1e-9 * (1.0 + np.abs(lam).max(initial=0.0))
        if k == n:
            break
        ek = np.zeros(n)
        ek[k] = 1.0
        sol = solve(LpProblem(ek, p.A, p.b, eq), tol_feas)
        if not sol.optimal:
            raise NumericalError(f"lexicographic pass {k} returned {sol.status}")
    z = sol.z
    basis = ()
    snapped = _snap_vertex(p, z, 1e-7)
    if snapped is not None:
        zv, rows = snapped
        scale = np.abs(p.A).max(axis=1)
        scale[scale == 0] = 1.0
        feasible = ((p.A @ zv - p.b) / scale <= 10 * tol_feas).all()
        close = np.linalg.norm(zv - z) <= 1e-6 * (1.0 + np.linalg.norm(z))
        if feasible and close:
            z, basis = zv, rows
    scale = np.abs(p.A).max(axis=1)
    scale[scale == 0] = 1.0
    active = np.flatnonzero(np.abs(p.A @ z - p.b) / scale <= tol_feas)
    return replace(base, z=z, value=float(p.c @ z), active_set=tuple(int(i) for i in active),
                   basis=basis, info={"lex_snapped": bool(basis)})


def area_problem(area, y, xi) -> LpProblem:
    """The per-area dispatch LP at fixed boundary angles and uncertainty."""
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    rhs = area.b - area.A_xi @ xi - area.A_y @ y
    return LpProblem(area.c_x, area.A_x, rhs)


def solve_parametric_point(area, y, xi, tol_feas: float = 1e-8) -> LpSolution:
    """Optimal dispatch of one area; ``value`` is the full dispatch cost J_i*."""
    sol = solve(area_problem(area, y, xi), tol_feas)
    if sol.status == INFEASIBLE:
        raise InfeasibleAreaError(f"area {area.name} infeasible at y={np.round(y, 6).tolist()}")
    if not sol.optimal:
        raise NumericalError(f"area {area.name} LP is {sol.status}")
    const = area.c0 + area.c_xi @ np.asarray(xi, dtype=float)
    return replace(sol, value=float(sol.value + const))
