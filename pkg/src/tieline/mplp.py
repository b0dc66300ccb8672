"""Critical regions of the per-area parametric LP in the coupling variable y.

For a fixed uncertainty value the area problem is

    J(y) = min_x  c0 + c_xi^T xi + c_x^T x   s.t.  A_x x <= b - A_xi xi - A_y y.

An optimal basis ``B`` (rows of ``A_x`` forming an invertible square block)
stays optimal for every ``y`` at which the basic point
``x(y) = A_x[B]^{-1} (b_B - A_xi_B xi - A_y_B y)`` is feasible, and on that
set ``J`` is affine.  Because the basis dual is independent of ``y``, the
affine piece is also a global minorant of ``J`` (weak duality), so its slope
is a subgradient of ``J`` wherever the piece touches it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RegionError
from .lp_core import LpProblem, area_problem, solve

_ZERO_ROW = 1e-11


@dataclass(frozen=True, eq=False)
class CriticalRegion:
    """Polytope ``{z : D z <= d}`` on which the value is ``alpha^T z + beta``.

    Rows are normalized to unit Euclidean norm, so containment tolerances
    are distances.
    """

    D: np.ndarray
    d: np.ndarray
    alpha: np.ndarray
    beta: float
    active_fingerprint: tuple = ()
    flags: tuple = field(default=())

    @property
    def dim(self):
        return self.alpha.size

    def contains(self, z, tol=1e-8):
        z = np.asarray(z, dtype=float)
        return bool((self.D @ z - self.d <= tol).all())

    def value(self, z):
        return float(self.alpha @ np.asarray(z, dtype=float) + self.beta)


def whole_region(coupling, alpha=None, beta=0.0):
    """The region ``Y`` itself with the given affine value (zero by default)."""
    D, d = _normalize(coupling.G, coupling.h)
    a = np.zeros(coupling.dim) if alpha is None else np.asarray(alpha, dtype=float)
    return CriticalRegion(D, d, a, float(beta), ())


def _normalize(D, d, tol=1e-8):
    """Scale rows to unit norm and drop identically-zero rows."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    d = np.asarray(d, dtype=float).ravel()
    norms = np.linalg.norm(D, axis=1)
    zero = norms <= _ZERO_ROW * max(1.0, np.abs(D).max(initial=0.0))
    if (d[zero] < -tol).any():
        raise RegionError("region is empty: a constant row is violated")
    keep = ~zero
    return D[keep] / norms[keep, None], d[keep] / norms[keep]


def _dedupe(D, d, decimals=10):
    """Keep one row per direction, the tightest."""
    best = {}
    for j, key in enumerate(map(tuple, np.round(D, decimals))):
        if key not in best or d[j] < d[best[key]]:
            best[key] = j
    idx = np.array(sorted(best.values()), dtype=int)
    return D[idx], d[idx]


def remove_redundant(D, d, tol=1e-8, box=None):
    """Drop rows implied by the others.

    Row ``j`` is redundant when ``max D_j z`` over the remaining rows is at
    most ``d_j + tol``.  ``box = (lo, hi)``, if given, is a bounding box known
    to contain the region and is used as a cheap pre-filter.
    Raises :class:`RegionError` if the rows describe an empty set.
    """
    D, d = _normalize(D, d, tol)
    if D.shape[0] == 0:
        return D, d
    D, d = _dedupe(D, d)
    keep = np.ones(D.shape[0], dtype=bool)
    if box is not None:
        lo, hi = box
        boxmax = np.where(D > 0, D * hi, D * lo).sum(axis=1)
        box_rows = np.zeros(D.shape[0], dtype=bool)
        # rows that are themselves box faces must survive the pre-filter
        for j in range(D.shape[0]):
            nz = np.flatnonzero(np.abs(D[j]) > 1e-12)
            box_rows[j] = nz.size == 1
        keep &= ~((boxmax <= d + tol) & ~box_rows)
    for j in range(D.shape[0]):
        if not keep[j]:
            continue
        others = keep.copy()
        others[j] = False
        if not others.any():
            continue
        sol = solve(LpProblem(-D[j], D[others], d[others] + 0.0))
        if sol.status == "infeasible":
            raise RegionError("region is empty")
        if sol.optimal and -sol.value <= d[j] + tol:
            keep[j] = False
    rows = np.flatnonzero(keep)
    sol = solve(LpProblem(np.zeros(D.shape[1]), D[rows], d[rows]))
    if not sol.optimal:
        raise RegionError("region is empty")
    return D[rows], d[rows]


def _basis_pieces(area, y, xi, tol_feas):
    """Optimal basis at (y, xi) and the affine map it induces."""
    sol = solve(area_problem(area, y, xi), tol_feas)
    if not sol.optimal:
        raise RegionError(f"area {area.name} LP is {sol.status} at the query point")
    B = np.array(sol.basis, dtype=int)
    n = area.A_x.shape[1]
    flags = ()
    if B.size != n:
        raise RegionError(f"area {area.name}: basis has {B.size} rows for {n} variables")
    AB = area.A_x[B]
    try:
        S = np.linalg.solve(AB, area.A_y[B])
        s0 = np.linalg.solve(AB, area.b[B] - area.A_xi[B] @ xi)
    except np.linalg.LinAlgError:
        raise RegionError(f"area {area.name}: singular basis block") from None
    if np.linalg.cond(AB) > 1e12:
        flags = ("ill-conditioned basis",)
    return sol, B, S, s0, flags


def area_region(area, coupling, y, xi, tol_feas=1e-8, prune=True) -> CriticalRegion:
    """Critical region of ``area`` containing ``y`` at uncertainty ``xi``.

    The region comes from the solver's deterministic optimal basis.  When
    ``y`` sits on a facet shared by several regions, this is one of them.
    """
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    sol, B, S, s0, flags = _basis_pieces(area, y, xi, tol_feas)
    N = np.setdiff1d(np.arange(area.m), B)
    D = area.A_y[N] - area.A_x[N] @ S
    d = area.b[N] - area.A_xi[N] @ xi - area.A_x[N] @ s0
    alpha = -(area.c_x @ S)
    beta = float(area.c0 + area.c_xi @ xi + area.c_x @ s0)
    D = np.vstack([D, coupling.G])
    d = np.concatenate([d, coupling.h])
    if prune:
        D, d = remove_redundant(D, d, tol_feas, box=coupling.box())
    else:
        D, d = _normalize(D, d, tol_feas)
    return CriticalRegion(D, d, alpha, beta, tuple(int(i) for i in B), flags)


def combine(regions, tol_feas=1e-8, box=None) -> CriticalRegion:
    """Intersection of ``regions`` carrying the summed affine value."""
    if not regions:
        raise ValueError("nothing to combine")
    D = np.vstack([r.D for r in regions])
    d = np.concatenate([r.d for r in regions])
    alpha = np.sum([r.alpha for r in regions], axis=0)
    beta = float(np.sum([r.beta for r in regions]))
    D, d = remove_redundant(D, d, tol_feas, box=box)
    flags = tuple(sorted({f for r in regions for f in r.flags}))
    return CriticalRegion(D, d, alpha, beta, tuple(r.active_fingerprint for r in regions), flags)


def max_over_vertices_region(area, coupling, y, V, tol_feas=1e-8, tol_opt=1e-7):
    """Affine piece of ``F(z) = max_{xi in V} J(z, xi)`` that is active at ``y``.

    Returns ``(region, k)`` where ``k`` indexes the maximizing vertex; ties at
    ``y`` go to the lowest index.  The region intersects every vertex's own
    critical region (so each ``J(., xi)`` is known to be affine there) with
    the half-spaces on which vertex ``k`` dominates.
    """
    if len(V) == 0:
        raise ValueError("vertex set is empty")
    y = np.asarray(y, dtype=float)
    if len(V) == 1:
        return area_region(area, coupling, y, V[0], tol_feas), 0
    pieces = [area_region(area, coupling, y, xi, tol_feas, prune=False) for xi in V]
    vals = np.array([p.value(y) for p in pieces])
    top = vals.max()
    k = int(np.flatnonzero(vals >= top - tol_opt * (1.0 + abs(top)))[0])
    rows_D = [p.D for p in pieces]
    rows_d = [p.d for p in pieces]
    for j, p in enumerate(pieces):
        if j != k:
            rows_D.append((p.alpha - pieces[k].alpha)[None, :])
            rows_d.append([pieces[k].beta - p.beta])
    D, d = remove_redundant(np.vstack(rows_D), np.concatenate(rows_d), tol_feas, box=coupling.box())
    flags = tuple(sorted({f for p in pieces for f in p.flags}))
    fp = tuple((j, p.active_fingerprint) for j, p in enumerate(pieces)) + (("argmax", k),)
    return CriticalRegion(D, d, pieces[k].alpha.copy(), pieces[k].beta, fp, flags), k


def chebyshev_center(region):
    """Center and radius of the largest ball inside ``region``."""
    n = region.dim
    norms = np.linalg.norm(region.D, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.vstack([np.column_stack([region.D, norms]), np.eye(1, n + 1, n)])
    b = np.concatenate([region.d, [1e3]])
    sol = solve(LpProblem(c, A, b))
    if not sol.optimal:
        raise RegionError(f"Chebyshev LP is {sol.status}")
    return sol.z[:n], float(sol.z[-1])


def sample_region(region, count, rng, start=None, burn=10):
    """``count`` points of ``region`` by hit-and-run from its Chebyshev center.

    Thin regions (zero radius) yield points on the region itself, possibly all
    equal to the start point.
    """
    z = chebyshev_center(region)[0] if start is None else np.asarray(start, dtype=float).copy()
    out = []
    n = region.dim
    for step in range(burn + count):
        u = rng.standard_normal(n)
        u /= np.linalg.norm(u)
        Du = region.D @ u
        slack = np.maximum(region.d - region.D @ z, 0.0)
        with np.errstate(divide="ignore"):
            t = slack / Du
        hi = t[Du > 1e-14].min(initial=np.inf)
        lo = t[Du < -1e-14].max(initial=-np.inf)
        if np.isfinite(hi) and np.isfinite(lo) and hi > lo:
            z = z + rng.uniform(lo, hi) * u
        if step >= burn:
            out.append(z.copy())
    return np.array(out)
