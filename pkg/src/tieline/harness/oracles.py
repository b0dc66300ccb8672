"""Reference solutions computed centrally with HiGHS.

These never touch the package's own simplex, region or MILP code, so they can
serve as independent ground truth for the distributed solvers.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import bmat, csr_matrix

from ..errors import NumericalError, TielineError


class OracleError(TielineError):
    pass


def _linprog(c, A, b):
    res = linprog(c, A_ub=A, b_ub=b, bounds=(None, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9})
    if res.status == 2:
        raise OracleError("oracle LP is infeasible")
    if res.status == 3:
        raise OracleError("oracle LP is unbounded")
    if res.status != 0:
        raise NumericalError(f"HiGHS failed: {res.message}")
    return res


def _scenario_lp(blocks, coupling, n_epi):
    """Assemble ``min sum t + const`` over y, per-block x, epigraph t.

    ``blocks`` holds tuples ``(area, xi, epi)``: the area's constraints at
    ``xi`` with a private copy of x, tied to epigraph variable ``epi`` (or
    ``None`` when the block's cost enters the objective directly).
    """
    dim = coupling.dim
    nx = [a.A_x.shape[1] for a, _, _ in blocks]
    off = np.concatenate([[0], np.cumsum(nx)]) + dim
    nvar = int(off[-1]) + n_epi
    c = np.zeros(nvar)
    const = 0.0
    rows, rhs = [], []
    rows.append(bmat([[csr_matrix(coupling.G), csr_matrix((coupling.G.shape[0], nvar - dim))]]))
    rhs.append(coupling.h)
    for k, (a, xi, epi) in enumerate(blocks):
        m = a.m
        parts = [csr_matrix(a.A_y)]
        if off[k] > dim:
            parts.append(csr_matrix((m, int(off[k]) - dim)))
        parts.append(csr_matrix(a.A_x))
        tail = nvar - int(off[k + 1])
        if tail:
            parts.append(csr_matrix((m, tail)))
        rows.append(bmat([parts]))
        rhs.append(a.b - a.A_xi @ xi)
        fixed = a.c0 + a.c_xi @ xi
        if epi is None:
            c[off[k]:off[k + 1]] = a.c_x
            const += fixed
        else:
            # c_x^T x + fixed <= t_epi
            row = np.zeros(nvar)
            row[off[k]:off[k + 1]] = a.c_x
            row[int(off[-1]) + epi] = -1.0
            rows.append(csr_matrix(row[None, :]))
            rhs.append([-fixed])
    if n_epi:
        c[int(off[-1]):] = 1.0
    A = bmat([[r] for r in rows]).tocsr()
    return c, A, np.concatenate([np.ravel(r) for r in rhs]), const, off


def oracle_joint(areas, coupling, xis):
    """Centralized LP over all areas; returns ``(value, y, [x_i])``."""
    blocks = [(a, np.asarray(xi, dtype=float), None) for a, xi in zip(areas, xis)]
    c, A, b, const, off = _scenario_lp(blocks, coupling, 0)
    res = _linprog(c, A, b)
    z = res.x
    return float(res.fun + const), z[:coupling.dim], [z[off[k]:off[k + 1]] for k in range(len(areas))]


def box_vertices(area):
    """All vertices of the area's uncertainty box (only varying coordinates flip)."""
    lo, hi = area.xi_lo, area.xi_hi
    free = np.flatnonzero(hi > lo)
    out = []
    for bits in itertools.product((0, 1), repeat=free.size):
        xi = lo.copy()
        xi[free] = np.where(np.array(bits, dtype=bool), hi[free], lo[free])
        out.append(xi)
    return out


def oracle_robust_enum(areas, coupling, cap=12):
    """Robust optimum by a scenario-replicated epigraph LP over all box vertices.

    ``min_y sum_i max_{xi in vertices_i} J_i(y, xi)`` equals the LP with one
    copy of each area's dispatch per vertex and one epigraph variable per
    area.  Returns ``(value, y)``.
    """
    total = sum(int((a.xi_hi > a.xi_lo).sum()) for a in areas)
    if total > cap:
        raise OracleError(f"{total} uncertain coordinates exceed the enumeration cap {cap}")
    blocks = []
    for i, a in enumerate(areas):
        for xi in box_vertices(a):
            blocks.append((a, xi, i))
    c, A, b, const, off = _scenario_lp(blocks, coupling, len(areas))
    res = _linprog(c, A, b)
    return float(res.fun + const), res.x[:coupling.dim]


def area_value(area, y, xi):
    """J_i(y, xi) by HiGHS."""
    rhs = area.b - area.A_xi @ xi - area.A_y @ np.asarray(y, dtype=float)
    res = _linprog(area.c_x, area.A_x, rhs)
    return float(res.fun + area.c0 + area.c_xi @ xi)


def worst_case_enum(area, y):
    """Max over box vertices of J_i(y, .) and the maximizing vertex."""
    best, arg = -np.inf, None
    for xi in box_vertices(area):
        v = area_value(area, y, xi)
        if v > best:
            best, arg = v, xi
    return best, arg
