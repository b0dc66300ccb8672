"""Synthetic multi-area test cases and the shipped case files.

Conventions follow common DC-OPF test practice: tie-lines of 100 MW at
0.25 p.u. reactance, demand floors of zero with ceilings varying between 98%
and 102% of nominal, wind availability between 15 and 25 MW, and a value of
lost load of 100 $/MWh that exceeds every generator price.

Every generated case is made feasible for all boundary angles in Y: the
angle box is shrunk until each area's LP is feasible at every vertex of Y
under the tightest uncertainty value (least wind, largest forced demand,
smallest demand ceiling), which implies feasibility across the whole box.
"""

from __future__ import annotations

import itertools
import json
from importlib import resources

import numpy as np
from scipy.optimize import linprog

from ..casefile import case_from_dict, case_to_dict, dump_case
from ..netmodel import assemble

SHIPPED = ("tiny2", "small2", "tri3")
VOLL = 100.0


def _r(x):
    return round(float(x), 2)


def _area_doc(rng, name, n_int, n_bnd, wind_price, wind_scale, cheap):
    buses, branches = [], []
    loads = rng.uniform(20.0, 80.0, n_int)
    # buses hosting a boundary bus get a generator: their angle is pinned by y,
    # so their net injection must be able to take either sign
    hosts = rng.choice(n_int, n_bnd, replace=False)
    has_gen = rng.random(n_int) < 0.6
    has_gen[hosts] = True
    has_wind = rng.random(n_int) < 0.4
    total_load = loads.sum()
    gen_caps = np.where(has_gen, rng.uniform(0.5, 1.5, n_int), 0.0)
    gen_caps *= (1.4 * total_load + 150.0) / gen_caps.sum()
    base_price = 15.0 if cheap else 40.0
    for k in range(n_int):
        bus = {"id": f"i{k + 1}", "kind": "internal",
               "demand_min": [0.0, 0.0],
               "demand_max": [_r(0.98 * loads[k]), _r(1.02 * loads[k])],
               "price_demand": VOLL}
        if has_gen[k]:
            bus.update(gen_min=0.0, gen_max=_r(gen_caps[k]), price_gen=_r(base_price + rng.uniform(0.0, 30.0)))
        if has_wind[k]:
            bus.update(wind_max=[_r(15.0 * wind_scale), _r(25.0 * wind_scale)], price_wind=wind_price)
        buses.append(bus)
    for k in range(n_bnd):
        buses.append({"id": f"b{k + 1}", "kind": "boundary"})
    # spanning tree over internal buses, boundary buses hang off internal ones
    for k in range(1, n_int):
        j = int(rng.integers(k))
        branches.append({"from": f"i{j + 1}", "to": f"i{k + 1}", "x": _r(rng.uniform(0.1, 0.3)),
                         "cap": _r(rng.uniform(150.0, 300.0))})
    if n_int >= 3 and rng.random() < 0.5:
        a, b = sorted(rng.choice(n_int, 2, replace=False))
        pair = {(br["from"], br["to"]) for br in branches}
        if (f"i{a + 1}", f"i{b + 1}") not in pair:
            branches.append({"from": f"i{a + 1}", "to": f"i{b + 1}", "x": _r(rng.uniform(0.1, 0.3)),
                             "cap": _r(rng.uniform(150.0, 300.0))})
    # distinct attachment points: two zero-injection boundary buses on one
    # internal bus would pin its angle twice
    for k, j in enumerate(hosts):
        branches.append({"from": f"i{j + 1}", "to": f"b{k + 1}", "x": _r(rng.uniform(0.1, 0.3)),
                         "cap": _r(rng.uniform(200.0, 300.0))})
    return {"id": name, "buses": buses, "branches": branches}


def _limit_uncertainty(doc, budget, rng):
    """Freeze uncertain coordinates until at most ``budget`` remain."""
    coords = []
    for a in doc["areas"]:
        for bus in a["buses"]:
            for key in ("wind_max", "demand_min", "demand_max"):
                if key in bus and bus[key][0] < bus[key][1]:
                    coords.append((bus, key))
    order = rng.permutation(len(coords))
    for idx in order[budget:] if budget is not None else ():
        bus, key = coords[idx]
        mid = _r(0.5 * (bus[key][0] + bus[key][1]))
        bus[key] = [mid, mid]


def random_case_doc(seed, n_areas=2, max_internal=5, max_boundary=2, uncertain=None,
                    wind_price=0.0, wind_scale=1.0, tie_cap=100.0, tie_x=0.25, min_internal=2):
    """A random case as a JSON-compatible dict (before the feasibility shrink)."""
    rng = np.random.default_rng(seed)
    areas = []
    nb = []
    for k in range(n_areas):
        n_int = int(rng.integers(min_internal, max_internal + 1))
        n_bnd = int(rng.integers(1, max_boundary + 1))
        nb.append(n_bnd)
        areas.append(_area_doc(rng, f"A{k + 1}", n_int, n_bnd, wind_price, wind_scale, cheap=(k == 0)))
    ties = []
    if n_areas == 2:
        for j in range(max(nb)):
            ties.append({"from": ["A1", f"b{min(j, nb[0] - 1) + 1}"], "to": ["A2", f"b{min(j, nb[1] - 1) + 1}"],
                         "x": tie_x, "cap": tie_cap})
    else:
        for k in range(n_areas):
            nxt = (k + 1) % n_areas
            ties.append({"from": [f"A{k + 1}", "b1"], "to": [f"A{nxt + 1}", f"b{nb[nxt]}"],
                         "x": tie_x, "cap": tie_cap})
    doc = {"base_mva": 100.0, "angle_box_scale": 1.0, "areas": areas, "tielines": ties,
           "slack": ["A1", "b1"], "options": {}}
    _limit_uncertainty(doc, uncertain, rng)
    return doc


def coupling_vertices(coupling, tol=1e-9):
    """All vertices of Y by solving every square subsystem of its rows."""
    G, h = coupling.G, coupling.h
    n = coupling.dim
    combos = np.array(list(itertools.combinations(range(G.shape[0]), n)), dtype=int)
    out = []
    for chunk in np.array_split(combos, max(1, len(combos) // 4096 + 1)):
        if chunk.size == 0:
            continue
        A = G[chunk]
        rhs = h[chunk]
        det = np.linalg.det(A)
        ok = np.abs(det) > 1e-10
        if not ok.any():
            continue
        z = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
        feas = (z @ G.T <= h + tol * (1 + np.abs(h))).all(axis=1)
        out.extend(z[feas])
    if not out:
        return np.zeros((0, n))
    pts = np.unique(np.round(np.array(out), 10), axis=0)
    return pts


def tight_xi(area):
    """Uncertainty value whose feasible set is contained in every other's."""
    n = area.n
    xi = area.xi_hi.copy()
    xi[:n] = area.xi_lo[:n]            # least wind
    xi[2 * n:] = area.xi_lo[2 * n:]    # lowest demand ceiling
    return xi


def feasible_on_Y(areas, coupling):
    """True if every area LP is feasible at every vertex of Y for every box value."""
    verts = coupling_vertices(coupling)
    for a in areas:
        xi = tight_xi(a)
        for y in verts:
            rhs = a.b - a.A_xi @ xi - a.A_y @ y
            res = linprog(np.zeros(a.A_x.shape[1]), A_ub=a.A_x, b_ub=rhs, bounds=(None, None), method="highs")
            if res.status != 0:
                return False
    return True


def make_feasible(doc, shrink=0.7, max_rounds=40):
    """Shrink the angle box until :func:`feasible_on_Y` holds; returns a CaseSpec."""
    doc = json.loads(json.dumps(doc))
    for _ in range(max_rounds):
        case = case_from_dict(doc)
        areas, coupling = assemble(case)
        if feasible_on_Y(areas, coupling):
            return case
        doc["angle_box_scale"] = round(doc["angle_box_scale"] * shrink, 8)
    raise ValueError("could not make the case feasible over Y")


def random_case(seed, **kw):
    return make_feasible(random_case_doc(seed, **kw))


# (generator arguments, seed) behind each shipped case
SHIPPED_RECIPES = {
    "tiny2": (dict(n_areas=2, max_internal=2, max_boundary=1, uncertain=None), 3),
    "small2": (dict(n_areas=2, min_internal=5, max_internal=6, max_boundary=2, uncertain=8,
                    wind_price=30.0, wind_scale=5.0), 16),
    "tri3": (dict(n_areas=3, max_internal=4, max_boundary=2, uncertain=6, wind_price=30.0, wind_scale=5.0), 5),
}


def build_shipped(name):
    kw, seed = SHIPPED_RECIPES[name]
    return random_case(seed, **kw)


def shipped_case(name):
    """Load a shipped case from the package data directory."""
    from ..casefile import parse_case

    if name not in SHIPPED:
        raise KeyError(f"unknown shipped case {name!r}; choose from {', '.join(SHIPPED)}")
    text = resources.files("tieline.harness").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return parse_case(text)


def write_shipped(directory):
    """Regenerate the shipped case files into ``directory``."""
    from pathlib import Path

    out = Path(directory)
    for name in SHIPPED:
        (out / f"{name}.json").write_text(dump_case(build_shipped(name)), encoding="utf-8")


__all__ = ["random_case", "random_case_doc", "make_feasible", "shipped_case", "write_shipped",
           "coupling_vertices", "feasible_on_Y", "tight_xi", "case_to_dict"]
