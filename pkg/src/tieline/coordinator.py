"""Coordinator loop over critical regions, and the operator-side endpoints.

The coordinator only ever sees boundary-angle queries and, per area, a
polytope ``{z : D z <= d}`` with an affine value ``alpha^T z + beta``.  Each
:class:`AreaOperator` keeps its model and uncertainty data to itself.

Loop outline (one round per iteration):

1. query every operator at the probe ``y`` and intersect the answers;
2. minimize the aggregate affine value over that region, taking the
   lexicographically smallest minimizer ``y_opt``;
3. if it improves on the incumbent, move the incumbent there and restart the
   slope set; otherwise add the region's slope to the set;
4. find the minimum-norm element ``v`` of conv(slopes) + normal cone of Y at
   the incumbent; stop when it is zero, else probe a short step along ``-v``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .direction_qp import NormalCone, SubgradientSet, min_norm_direction, project_onto_polytope
from .errors import IterationLimitError, ProtocolError, RegionError
from .lp_core import LpProblem, solve_lex_smallest, solve_parametric_point
from .mplp import CriticalRegion, area_region, combine, max_over_vertices_region

MAX_HALVINGS = 20
_IMPROVE_REL = 1e-9


# --- messages ----------------------------------------------------------------

@dataclass(frozen=True)
class CrQuery:
    area: str
    y: tuple

    def to_json(self):
        return {"type": "CrQuery", "area": self.area, "y": list(self.y)}


@dataclass(frozen=True)
class CrResponse:
    area: str
    D: tuple
    d: tuple
    alpha: tuple
    beta: float

    def to_json(self):
        return {"type": "CrResponse", "area": self.area, "D": [list(r) for r in self.D],
                "d": list(self.d), "alpha": list(self.alpha), "beta": self.beta}

    def region(self):
        dim = len(self.alpha)
        D = np.array(self.D, dtype=float).reshape(len(self.d), dim)
        return CriticalRegion(D, np.array(self.d, dtype=float), np.array(self.alpha, dtype=float), float(self.beta))


@dataclass(frozen=True)
class WorstCaseQuery:
    area: str
    y: tuple

    def to_json(self):
        return {"type": "WorstCaseQuery", "area": self.area, "y": list(self.y)}


@dataclass(frozen=True)
class WorstCaseReply:
    area: str
    J_opt: float

    def to_json(self):
        return {"type": "WorstCaseReply", "area": self.area, "J_opt": self.J_opt}


_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM}


def _msg(name, props):
    props = {"type": {"const": name}, "area": {"type": "string"}, **props}
    return {"type": "object", "properties": props, "required": sorted(props), "additionalProperties": False}


TRANSCRIPT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "oneOf": [
        _msg("CrQuery", {"y": _VEC}),
        _msg("CrResponse", {"D": {"type": "array", "items": _VEC}, "d": _VEC, "alpha": _VEC, "beta": _NUM}),
        _msg("WorstCaseQuery", {"y": _VEC}),
        _msg("WorstCaseReply", {"J_opt": _NUM}),
    ],
}


class Transcript:
    """Every message exchanged with the operators, in order."""

    def __init__(self):
        self.messages = []

    def record(self, msg):
        self.messages.append(msg.to_json())
        return msg

    def dumps(self):
        return "".join(json.dumps(m, sort_keys=True) + "\n" for m in self.messages)


def validate_transcript(text):
    """Check every line of a dumped transcript against :data:`TRANSCRIPT_SCHEMA`."""
    import jsonschema

    validator = jsonschema.Draft202012Validator(TRANSCRIPT_SCHEMA)
    count = 0
    for line in text.splitlines():
        if line.strip():
            validator.validate(json.loads(line))
            count += 1
    return count


# --- operator side -----------------------------------------------------------

def so_answer_cr(area, coupling, xi_or_V, y, tol_feas=1e-8, tol_opt=1e-7):
    """Region and affine piece of the area's cost at ``y``.

    ``xi_or_V`` is either one uncertainty vector or a list of them; for a
    list the cost is the pointwise maximum over the list.
    """
    y = np.asarray(y, dtype=float)
    if isinstance(xi_or_V, (list, tuple)):
        region, _ = max_over_vertices_region(area, coupling, y, list(xi_or_V), tol_feas, tol_opt)
    else:
        region = area_region(area, coupling, y, xi_or_V, tol_feas)
    return CrResponse(area.name, tuple(map(tuple, region.D.tolist())), tuple(region.d.tolist()),
                      tuple(region.alpha.tolist()), float(region.beta)), region


class AreaOperator:
    """One area's system operator.  Holds the private model and scenario data."""

    def __init__(self, area, coupling, scenario, tol_feas=1e-8, tol_opt=1e-7):
        self._area = area
        self._coupling = coupling
        self.scenario = scenario
        self.tol_feas = tol_feas
        self.tol_opt = tol_opt
        self.regions = []  # kept locally for diagnostics; never sent

    @property
    def name(self):
        return self._area.name

    def answer(self, query: CrQuery) -> CrResponse:
        resp, region = so_answer_cr(self._area, self._coupling, self.scenario, query.y, self.tol_feas, self.tol_opt)
        self.regions.append((np.array(query.y), self.scenario, region))
        return resp

    def dispatch(self, y):
        """Own optimal dispatch at the final schedule (worst listed scenario when several)."""
        scen = self.scenario if isinstance(self.scenario, (list, tuple)) else [self.scenario]
        sols = [solve_parametric_point(self._area, y, xi, self.tol_feas) for xi in scen]
        k = int(np.argmax([s.value for s in sols]))
        return sols[k].z, sols[k].value


# --- coordinator -------------------------------------------------------------

@dataclass
class DetResult:
    y_star: np.ndarray
    J_star: float
    x: list
    area_costs: list
    ledger: list
    events: dict
    transcript: Transcript = field(repr=False, default=None)


def _validate_response(resp, query, dim, tol):
    if len(resp.alpha) != dim or any(len(r) != dim for r in resp.D) or len(resp.D) != len(resp.d):
        raise ProtocolError(f"response from {resp.area} has wrong dimensions")
    vals = np.concatenate([np.ravel(resp.D), resp.d, resp.alpha, [resp.beta]])
    if not np.isfinite(vals).all():
        raise ProtocolError(f"response from {resp.area} has non-finite entries")
    region = resp.region()
    if not region.contains(query.y, tol):
        raise ProtocolError(f"region from {resp.area} does not contain the query point")
    return region


def _region_key(alphas_betas, scale):
    return tuple((tuple(np.round(a / scale, 7)), round(b / scale, 7)) for a, b in alphas_betas)


def solve_deterministic(operators, coupling, opts, y0=None, transcript=None, tol_contain=1e-7):
    """Run the region-exploration loop; ``operators`` answer :class:`CrQuery`.

    Returns a :class:`DetResult`.  The ledger has one row per round.
    """
    transcript = transcript if transcript is not None else Transcript()
    dim = coupling.dim
    box = coupling.box()
    y = np.zeros(dim) if y0 is None else np.asarray(y0, dtype=float)
    y = project_onto_polytope(coupling.G, coupling.h, y)
    y_star, J_star = None, np.inf
    S = None
    visited = set()
    ledger = []
    events = {"epsilon_halvings": 0, "subgradient_check_violations": 0, "projections": 0, "regions": 0}
    halvings = 0
    v = None
    for it in range(opts.max_inner_iters):
        queries = [transcript.record(CrQuery(op.name, tuple(y.tolist()))) for op in operators]
        regions = []
        for op, q in zip(operators, queries):
            resp = op.answer(q)
            transcript.record(resp)
            regions.append(_validate_response(resp, q, dim, tol_contain))
        events["regions"] += 1
        region = combine(regions, opts.tol_feas, box=box)
        scale = 1.0 + np.abs(region.beta) + np.linalg.norm(region.alpha)
        key = _region_key([(r.alpha, r.beta) for r in regions], scale)

        sol = solve_lex_smallest(LpProblem(region.alpha, region.D, region.d), opts.tol_feas)
        if not sol.optimal:
            raise RegionError(f"minimizing over the region returned {sol.status}")
        y_opt = sol.z
        J_opt = region.value(y_opt)
        row = {"iter": it, "y": y.tolist(), "J_opt": J_opt, "y_opt": y_opt.tolist()}

        if y_star is None or J_opt < J_star - _IMPROVE_REL * (1.0 + abs(J_star)):
            y_star, J_star = y_opt, J_opt
            S = SubgradientSet(y_star.copy(), [], J_star)
            S.add(region.alpha)
            visited = {key}
            halvings = 0
            row["action"] = "improve"
        else:
            touches = region.contains(y_star, tol_contain) and (
                region.value(y_star) >= J_star - opts.tol_opt * (1.0 + abs(J_star)))
            if touches and key not in visited:
                S.add(region.alpha)
                visited.add(key)
                halvings = 0
                row["action"] = "extend"
            else:
                halvings += 1
                events["epsilon_halvings"] += 1
                row["action"] = "halve"
                if halvings > MAX_HALVINGS:
                    raise IterationLimitError(
                        f"probe kept missing new regions after {MAX_HALVINGS} step halvings", ledger + [row])
                eps = opts.epsilon * 0.5 ** halvings
                y = _probe(coupling, y_star, v, eps, events)
                row.update(J_star=J_star, v_norm=float(np.linalg.norm(v)), epsilon=eps, n_slopes=len(S.alphas))
                ledger.append(row)
                continue

        N = NormalCone.at(coupling, y_star, opts.tol_feas)
        v, cert = min_norm_direction(S, N, opts.tol_v)
        row.update(J_star=J_star, v_norm=cert.norm, v_scaled=cert.scaled_norm, n_slopes=len(S.alphas))
        if cert.is_zero:
            row["epsilon"] = 0.0
            ledger.append(row)
            break
        if min(float(a @ v) for a in S.alphas) <= 0.0:
            events["subgradient_check_violations"] += 1
        eps = opts.epsilon * 0.5 ** halvings
        row["epsilon"] = eps
        ledger.append(row)
        y = _probe(coupling, y_star, v, eps, events)
    else:
        raise IterationLimitError(f"no convergence in {opts.max_inner_iters} rounds", ledger)

    xs, costs = [], []
    for op in operators:
        x, c = op.dispatch(y_star)
        xs.append(x)
        costs.append(c)
    return DetResult(y_star, float(J_star), xs, costs, ledger, events, transcript)


def _probe(coupling, y_star, v, eps, events):
    step = y_star - eps * v / np.linalg.norm(v)
    y = project_onto_polytope(coupling.G, coupling.h, step)
    if not np.array_equal(y, step):
        events["projections"] += 1
    return y


def make_operators(areas, coupling, scenarios, opts):
    return [AreaOperator(a, coupling, s, opts.tol_feas, opts.tol_opt) for a, s in zip(areas, scenarios)]
