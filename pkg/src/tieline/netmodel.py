"""DC network assembly: per-area constraint/cost data and the coupling polytope.

For area ``i`` with internal buses ``1..n`` the decision vector is
``x = (g, w, d, theta)`` (generation, wind, served demand, internal angles;
``4n`` entries) and the uncertain vector is ``xi = (wind_max, demand_min,
demand_max)`` (``3n`` entries).  The boundary angles of all areas, minus the
slack bus, form the coupling vector ``y``.  Everything is per-unit on the
case's base MVA; prices are converted to $/h per p.u.

Each area's constraints are ``A_x x + A_xi xi + A_y y <= b`` with equalities
written as pairs of opposite inequalities.  Row layout, in order:

* power balance at each internal bus (pair),
* power balance at each boundary bus owned by the area, tie-line terms
  entering through ``A_y`` (pair),
* box limits on ``g``, ``w``, ``d`` (two rows each),
* internal branch limits (two rows each).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .casefile import CaseSpec
from .errors import NetworkError


@dataclass(frozen=True, eq=False)
class AreaModel:
    name: str
    n: int
    nbar: int
    A_x: np.ndarray
    A_xi: np.ndarray
    A_y: np.ndarray
    b: np.ndarray
    c0: float
    c_x: np.ndarray
    c_xi: np.ndarray
    xi_lo: np.ndarray
    xi_hi: np.ndarray
    bus_ids: tuple = ()
    row_labels: tuple = field(default=(), repr=False)

    @property
    def m(self):
        return self.b.size

    @property
    def ydim(self):
        return self.A_y.shape[1]

    @property
    def delta(self):
        return self.xi_hi - self.xi_lo

    def xi_labels(self):
        return tuple(f"{kind}[{bus}]" for kind in ("wind_max", "demand_min", "demand_max") for bus in self.bus_ids)


@dataclass(frozen=True, eq=False)
class CouplingPolytope:
    """``Y = {y : G y <= h}``; the first ``2 * #ties`` rows are tie capacities."""

    G: np.ndarray
    h: np.ndarray
    labels: tuple = ()
    n_tie_rows: int = 0

    @property
    def dim(self):
        return self.G.shape[1]

    def contains(self, y, tol=1e-8):
        return bool((self.G @ np.asarray(y, dtype=float) - self.h <= tol).all())

    def box(self):
        """Per-coordinate (low, high) bounds read from the box rows."""
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for g, h in zip(self.G[self.n_tie_rows:], self.h[self.n_tie_rows:]):
            j = int(np.flatnonzero(g)[0])
            if g[j] > 0:
                hi[j] = min(hi[j], h / g[j])
            else:
                lo[j] = max(lo[j], h / g[j])
        return lo, hi


def _check_connected(area):
    ids = [bus.id for bus in area.buses]
    adj = {i: set() for i in ids}
    for br in area.branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(ids):
        missing = sorted(set(ids) - seen)
        raise NetworkError(f"area {area.id} is disconnected: no path from {ids[0]} to {', '.join(missing)}")


def _angle_bounds(case: CaseSpec):
    """Largest possible |angle| per bus: shortest path to slack, each line
    weighted by the angle drop it carries at full capacity."""
    base = case.base_mva
    adj = {}
    for area in case.areas:
        for bus in area.buses:
            adj[(area.id, bus.id)] = []
        for br in area.branches:
            w = br.cap / base * br.x
            adj[(area.id, br.from_bus)].append(((area.id, br.to_bus), w))
            adj[(area.id, br.to_bus)].append(((area.id, br.from_bus), w))
    for t in case.tielines:
        w = t.cap / base * t.x
        adj[t.a].append((t.b, w))
        adj[t.b].append((t.a, w))
    dist = {case.slack: 0.0}
    heap = [(0.0, case.slack)]
    while heap:
        dk, node = heapq.heappop(heap)
        if dk > dist.get(node, np.inf):
            continue
        for nb, w in adj[node]:
            nd = dk + w
            if nd < dist.get(nb, np.inf):
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))
    if len(dist) != len(adj):
        raise NetworkError("network is disconnected from the slack bus")
    return dist


def y_index(case: CaseSpec):
    """Map (area id, boundary bus id) to its column in ``y``; slack maps to None."""
    idx = {}
    k = 0
    for area in case.areas:
        for bus in area.boundary:
            key = (area.id, bus.id)
            if key == case.slack:
                idx[key] = None
            else:
                idx[key] = k
                k += 1
    return idx, k


def assemble(case: CaseSpec):
    """Build ``(list of AreaModel, CouplingPolytope)`` for ``case``."""
    base = case.base_mva
    yidx, ydim = y_index(case)
    for area in case.areas:
        _check_connected(area)
    bounds = _angle_bounds(case)

    areas = []
    for area in case.areas:
        internal = area.internal
        boundary = area.boundary
        n, nbar = len(internal), len(boundary)
        ipos = {bus.id: k for k, bus in enumerate(internal)}
        rows_x, rows_xi, rows_y, rhs, labels = [], [], [], [], []

        def add(ax, axi, ay, bb, label):
            rows_x.append(ax)
            rows_xi.append(axi)
            rows_y.append(ay)
            rhs.append(bb)
            labels.append(label)

        def add_pair(ax, axi, ay, bb, label):
            add(ax, axi, ay, bb, label + "<=")
            add(-ax, -axi, -ay, -bb, label + ">=")

        def angle_term(bus_id, coef, ax, ay):
            """Add ``coef * theta[bus_id]`` to the row vectors."""
            if bus_id in ipos:
                ax[3 * n + ipos[bus_id]] += coef
            else:
                col = yidx[(area.id, bus_id)]
                if col is not None:
                    ay[col] += coef

        incident = {bus.id: [] for bus in area.buses}
        for br in area.branches:
            incident[br.from_bus].append((br.to_bus, 1.0 / br.x))
            incident[br.to_bus].append((br.from_bus, 1.0 / br.x))

        for k, bus in enumerate(internal):
            ax, axi, ay = np.zeros(4 * n), np.zeros(3 * n), np.zeros(ydim)
            for other, sus in incident[bus.id]:
                angle_term(bus.id, sus, ax, ay)
                angle_term(other, -sus, ax, ay)
            ax[k] -= 1.0
            ax[n + k] -= 1.0
            ax[2 * n + k] += 1.0
            add_pair(ax, axi, ay, 0.0, f"balance[{bus.id}]")
        for bus in boundary:
            ax, axi, ay = np.zeros(4 * n), np.zeros(3 * n), np.zeros(ydim)
            for other, sus in incident[bus.id]:
                angle_term(bus.id, sus, ax, ay)
                angle_term(other, -sus, ax, ay)
            for t in case.tielines:
                for near, far in ((t.a, t.b), (t.b, t.a)):
                    if near == (area.id, bus.id):
                        sus = 1.0 / t.x
                        if yidx[near] is not None:
                            ay[yidx[near]] += sus
                        if yidx[far] is not None:
                            ay[yidx[far]] -= sus
            add_pair(ax, axi, ay, 0.0, f"balance[{bus.id}]")

        for k, bus in enumerate(internal):
            e = np.zeros(4 * n)
            z3, zy = np.zeros(3 * n), np.zeros(ydim)
            e[k] = 1.0
            add(e.copy(), z3.copy(), zy.copy(), bus.gen_max / base, f"gen_max[{bus.id}]")
            add(-e, z3.copy(), zy.copy(), -bus.gen_min / base, f"gen_min[{bus.id}]")
        for k, bus in enumerate(internal):
            e = np.zeros(4 * n)
            e[n + k] = 1.0
            xi = np.zeros(3 * n)
            xi[k] = -1.0
            add(e.copy(), xi, np.zeros(ydim), 0.0, f"wind_max[{bus.id}]")
            add(-e, np.zeros(3 * n), np.zeros(ydim), 0.0, f"wind_min[{bus.id}]")
        for k, bus in enumerate(internal):
            e = np.zeros(4 * n)
            e[2 * n + k] = 1.0
            xi_hi = np.zeros(3 * n)
            xi_hi[2 * n + k] = -1.0
            xi_lo = np.zeros(3 * n)
            xi_lo[n + k] = 1.0
            add(e.copy(), xi_hi, np.zeros(ydim), 0.0, f"demand_max[{bus.id}]")
            add(-e, xi_lo, np.zeros(ydim), 0.0, f"demand_min[{bus.id}]")
        for br in area.branches:
            ax, axi, ay = np.zeros(4 * n), np.zeros(3 * n), np.zeros(ydim)
            angle_term(br.from_bus, 1.0 / br.x, ax, ay)
            angle_term(br.to_bus, -1.0 / br.x, ax, ay)
            cap = br.cap / base
            add(ax, axi, ay, cap, f"flow[{br.from_bus}-{br.to_bus}]<=")
            add(-ax, -axi, -ay, cap, f"flow[{br.from_bus}-{br.to_bus}]>=")

        pg = np.array([bus.price_gen for bus in internal]) * base
        pw = np.array([bus.price_wind for bus in internal]) * base
        pd = np.array([bus.price_demand for bus in internal]) * base
        c_x = np.concatenate([pg, -pw, -pd, np.zeros(n)])
        c_xi = np.concatenate([pw, np.zeros(n), pd])
        xi_lo = np.concatenate([[b.wind_max[0] for b in internal], [b.demand_min[0] for b in internal],
                                [b.demand_max[0] for b in internal]]) / base
        xi_hi = np.concatenate([[b.wind_max[1] for b in internal], [b.demand_min[1] for b in internal],
                                [b.demand_max[1] for b in internal]]) / base
        areas.append(AreaModel(
            name=area.id, n=n, nbar=nbar,
            A_x=np.array(rows_x), A_xi=np.array(rows_xi), A_y=np.array(rows_y).reshape(len(rhs), ydim),
            b=np.array(rhs, dtype=float), c0=0.0, c_x=c_x, c_xi=c_xi,
            xi_lo=xi_lo, xi_hi=xi_hi, bus_ids=tuple(b.id for b in internal), row_labels=tuple(labels),
        ))

    G, h, labels = [], [], []
    for t in case.tielines:
        row = np.zeros(ydim)
        sus = 1.0 / t.x
        if yidx[t.a] is not None:
            row[yidx[t.a]] += sus
        if yidx[t.b] is not None:
            row[yidx[t.b]] -= sus
        cap = t.cap / base
        G += [row, -row]
        h += [cap, cap]
        labels += [f"tie[{t.a[0]}/{t.a[1]}-{t.b[0]}/{t.b[1]}]<=", f"tie[{t.a[0]}/{t.a[1]}-{t.b[0]}/{t.b[1]}]>="]
    n_tie = len(G)
    for key, col in yidx.items():
        if col is None:
            continue
        bound = bounds[key] * case.angle_box_scale
        e = np.zeros(ydim)
        e[col] = 1.0
        G += [e, -e]
        h += [bound, bound]
        labels += [f"angle[{key[0]}/{key[1]}]<=", f"angle[{key[0]}/{key[1]}]>="]
    coupling = CouplingPolytope(np.array(G).reshape(len(h), ydim), np.array(h, dtype=float), tuple(labels), n_tie)
    return areas, coupling


def dispatch_cost(area: AreaModel, x, xi) -> float:
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape != area.c_x.shape or xi.shape != area.c_xi.shape:
        raise ValueError(f"dimension mismatch: x{x.shape} vs {area.c_x.shape}, xi{xi.shape} vs {area.c_xi.shape}")
    return float(area.c0 + area.c_x @ x + area.c_xi @ xi)


def nominal_xi(area: AreaModel, where="high"):
    """A point of the uncertainty box: ``"low"``, ``"high"`` or ``"mid"``."""
    if where == "low":
        return area.xi_lo.copy()
    if where == "high":
        return area.xi_hi.copy()
    return 0.5 * (area.xi_lo + area.xi_hi)
