"""Case and run-report documents.

A case is a single JSON document::

    {
      "base_mva": 100.0,
      "angle_box_scale": 1.0,
      "areas": [
        {"id": "A1",
         "buses": [
           {"id": "1", "kind": "internal", "gen_min": 0, "gen_max": 150,
            "wind_max": [15, 25], "demand_min": [0, 0], "demand_max": [49, 51],
            "price_gen": 20, "price_wind": 0, "price_demand": 100},
           {"id": "b1", "kind": "boundary"}],
         "branches": [{"from": "1", "to": "b1", "x": 0.1, "cap": 100}]}],
      "tielines": [{"from": ["A1", "b1"], "to": ["A2", "c1"], "x": 0.25, "cap": 100}],
      "slack": ["A1", "b1"],
      "options": {"epsilon": 1e-5}
    }

Powers are in MW, reactances in p.u. on ``base_mva``, prices in $/MWh.
Uncertain quantities (``wind_max``, ``demand_min``, ``demand_max``) are given
as ``[low, high]`` ranges; a plain number means a fixed value.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Any

from .errors import CaseSemanticError, CaseSyntaxError

Range = tuple  # (low, high)


@dataclass(frozen=True)
class SolverOptions:
    epsilon: float = 1e-5
    tol_opt: float = 1e-7
    tol_feas: float = 1e-8
    tol_v: float = 1e-7
    big_m: Any = "auto"
    big_m_fallback: Any = "estimate"
    max_outer_iters: int = 50
    max_inner_iters: int = 500
    lex_tiebreak: str = "lexicographic"
    seed: int = 0

    def __post_init__(self):
        for name in ("epsilon", "tol_opt", "tol_feas", "tol_v"):
            if not getattr(self, name) > 0:
                raise CaseSemanticError("nonpositive tolerance", name)
        fb = self.big_m_fallback
        if fb != "estimate" and not (isinstance(fb, (int, float)) and not isinstance(fb, bool) and fb > 0):
            raise CaseSemanticError("bad option", f"big_m_fallback must be 'estimate' or a positive number, got {fb!r}")
        if self.big_m != "auto" and not (isinstance(self.big_m, (int, float)) and self.big_m > 0):
            raise CaseSemanticError("bad option", f"big_m must be 'auto' or a positive number, got {self.big_m!r}")
        if self.lex_tiebreak != "lexicographic":
            raise CaseSemanticError("bad option", "lex_tiebreak is fixed to 'lexicographic'")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise CaseSemanticError("bad option", "iteration caps must be positive")


@dataclass(frozen=True)
class BusSpec:
    id: str
    kind: str  # "internal" | "boundary"
    gen_min: float = 0.0
    gen_max: float = 0.0
    wind_max: Range = (0.0, 0.0)
    demand_min: Range = (0.0, 0.0)
    demand_max: Range = (0.0, 0.0)
    price_gen: float = 0.0
    price_wind: float = 0.0
    price_demand: float = 0.0


@dataclass(frozen=True)
class BranchSpec:
    from_bus: str
    to_bus: str
    x: float
    cap: float


@dataclass(frozen=True)
class AreaSpec:
    id: str
    buses: tuple
    branches: tuple

    @property
    def internal(self):
        return tuple(b for b in self.buses if b.kind == "internal")

    @property
    def boundary(self):
        return tuple(b for b in self.buses if b.kind == "boundary")


@dataclass(frozen=True)
class TieLineSpec:
    a: tuple  # (area id, bus id)
    b: tuple
    x: float
    cap: float


@dataclass(frozen=True)
class CaseSpec:
    areas: tuple
    tielines: tuple
    slack: tuple
    options: SolverOptions = field(default_factory=SolverOptions)
    base_mva: float = 100.0
    angle_box_scale: float = 1.0

    def area(self, area_id):
        for a in self.areas:
            if a.id == area_id:
                return a
        raise KeyError(area_id)


_TOP_KEYS = {"base_mva", "angle_box_scale", "areas", "tielines", "slack", "options"}
_AREA_KEYS = {"id", "buses", "branches"}
_INTERNAL_KEYS = {"id", "kind", "gen_min", "gen_max", "wind_max", "demand_min",
                  "demand_max", "price_gen", "price_wind", "price_demand"}
_BOUNDARY_KEYS = {"id", "kind"}
_BRANCH_KEYS = {"from", "to", "x", "cap"}
_TIE_KEYS = {"from", "to", "x", "cap"}
_OPTION_KEYS = set(SolverOptions.__dataclass_fields__)


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise CaseSemanticError("wrong type", f"{where} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise CaseSemanticError("unknown field", f"{where}: {', '.join(unknown)}")
    for key in required:
        if key not in obj:
            raise CaseSemanticError("missing field", f"{where}: {key}")


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseSemanticError("wrong type", f"{where} must be a number")
    return float(value)


def _range(value, where):
    if isinstance(value, list):
        if len(value) != 2:
            raise CaseSemanticError("wrong type", f"{where} must be [low, high]")
        return (_number(value[0], where), _number(value[1], where))
    v = _number(value, where)
    return (v, v)


def _endpoint(value, where):
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(s, str) for s in value)):
        raise CaseSemanticError("wrong type", f"{where} must be [area id, bus id]")
    return (value[0], value[1])


def _parse_bus(raw, where):
    kind = raw.get("kind") if isinstance(raw, dict) else None
    if kind == "boundary":
        extra = set(raw) - _BOUNDARY_KEYS
        if extra & _INTERNAL_KEYS:
            raise CaseSemanticError("boundary bus has assets", f"{where}: {', '.join(sorted(extra & _INTERNAL_KEYS))}")
        _check_keys(raw, _BOUNDARY_KEYS, where, required=("id",))
        return BusSpec(id=str(raw["id"]), kind="boundary")
    if kind != "internal":
        raise CaseSemanticError("wrong type", f"{where}: kind must be 'internal' or 'boundary'")
    _check_keys(raw, _INTERNAL_KEYS, where, required=("id",))
    return BusSpec(
        id=str(raw["id"]),
        kind="internal",
        gen_min=_number(raw.get("gen_min", 0.0), f"{where}.gen_min"),
        gen_max=_number(raw.get("gen_max", 0.0), f"{where}.gen_max"),
        wind_max=_range(raw.get("wind_max", 0.0), f"{where}.wind_max"),
        demand_min=_range(raw.get("demand_min", 0.0), f"{where}.demand_min"),
        demand_max=_range(raw.get("demand_max", 0.0), f"{where}.demand_max"),
        price_gen=_number(raw.get("price_gen", 0.0), f"{where}.price_gen"),
        price_wind=_number(raw.get("price_wind", 0.0), f"{where}.price_wind"),
        price_demand=_number(raw.get("price_demand", 0.0), f"{where}.price_demand"),
    )


def case_from_dict(doc) -> CaseSpec:
    """Build and validate a :class:`CaseSpec` from decoded JSON."""
    _check_keys(doc, _TOP_KEYS, "case", required=("areas", "tielines", "slack"))
    areas = []
    for k, raw_area in enumerate(doc["areas"]):
        where = f"areas[{k}]"
        _check_keys(raw_area, _AREA_KEYS, where, required=("id", "buses", "branches"))
        buses = tuple(_parse_bus(rb, f"{where}.buses[{j}]") for j, rb in enumerate(raw_area["buses"]))
        branches = []
        for j, rbr in enumerate(raw_area["branches"]):
            w = f"{where}.branches[{j}]"
            _check_keys(rbr, _BRANCH_KEYS, w, required=("from", "to", "x", "cap"))
            branches.append(BranchSpec(str(rbr["from"]), str(rbr["to"]),
                                       _number(rbr["x"], f"{w}.x"), _number(rbr["cap"], f"{w}.cap")))
        areas.append(AreaSpec(id=str(raw_area["id"]), buses=buses, branches=tuple(branches)))
    ties = []
    for j, rt in enumerate(doc["tielines"]):
        w = f"tielines[{j}]"
        _check_keys(rt, _TIE_KEYS, w, required=("from", "to", "x", "cap"))
        ties.append(TieLineSpec(_endpoint(rt["from"], f"{w}.from"), _endpoint(rt["to"], f"{w}.to"),
                                _number(rt["x"], f"{w}.x"), _number(rt["cap"], f"{w}.cap")))
    raw_opts = doc.get("options", {})
    _check_keys(raw_opts, _OPTION_KEYS, "options")
    options = SolverOptions(**raw_opts)
    case = CaseSpec(
        areas=tuple(areas),
        tielines=tuple(ties),
        slack=_endpoint(doc["slack"], "slack"),
        options=options,
        base_mva=_number(doc.get("base_mva", 100.0), "base_mva"),
        angle_box_scale=_number(doc.get("angle_box_scale", 1.0), "angle_box_scale"),
    )
    validate_case(case)
    return case


def validate_case(case: CaseSpec) -> None:
    """Raise :class:`CaseSemanticError` on the first violated invariant."""
    if case.base_mva <= 0:
        raise CaseSemanticError("nonpositive base", str(case.base_mva))
    if case.angle_box_scale <= 0:
        raise CaseSemanticError("nonpositive angle box scale", str(case.angle_box_scale))
    if len(case.areas) < 2:
        raise CaseSemanticError("too few areas", "a case needs at least two areas")
    seen = set()
    for area in case.areas:
        if area.id in seen:
            raise CaseSemanticError("duplicate id", f"area {area.id}")
        seen.add(area.id)
        bus_ids = set()
        for bus in area.buses:
            if bus.id in bus_ids:
                raise CaseSemanticError("duplicate id", f"bus {bus.id} in area {area.id}")
            bus_ids.add(bus.id)
            if bus.kind != "internal":
                continue
            name = f"bus {bus.id} in area {area.id}"
            if bus.gen_min > bus.gen_max:
                raise CaseSemanticError("generation limits inverted", name)
            for label in ("wind_max", "demand_min", "demand_max"):
                lo, hi = getattr(bus, label)
                if lo > hi:
                    raise CaseSemanticError("uncertainty range inverted", f"{name} ({label})")
                if lo < 0:
                    raise CaseSemanticError("negative uncertainty", f"{name} ({label})")
            if bus.demand_min[1] > bus.demand_max[0]:
                raise CaseSemanticError("demand range overlap", name)
        if not area.internal:
            raise CaseSemanticError("no internal bus", f"area {area.id}")
        if not area.boundary:
            raise CaseSemanticError("no boundary bus", f"area {area.id}")
        pairs = set()
        for br in area.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in bus_ids:
                    raise CaseSemanticError("branch endpoint unknown", f"{end} in area {area.id}")
            if br.from_bus == br.to_bus:
                raise CaseSemanticError("branch is a self loop", f"{br.from_bus} in area {area.id}")
            key = frozenset((br.from_bus, br.to_bus))
            if key in pairs:
                raise CaseSemanticError("duplicate id", f"parallel branch {br.from_bus}-{br.to_bus} in area {area.id}")
            pairs.add(key)
            if br.x <= 0:
                raise CaseSemanticError("nonpositive reactance", f"branch {br.from_bus}-{br.to_bus} in area {area.id}")
            if br.cap <= 0:
                raise CaseSemanticError("nonpositive capacity", f"branch {br.from_bus}-{br.to_bus} in area {area.id}")
    if not case.tielines:
        raise CaseSemanticError("no tie-lines", "")
    tie_pairs = set()
    for t in case.tielines:
        for end in (t.a, t.b):
            try:
                area = case.area(end[0])
            except KeyError:
                raise CaseSemanticError("tie endpoint unknown", f"{end[0]}/{end[1]}") from None
            kinds = {b.id: b.kind for b in area.buses}
            if end[1] not in kinds:
                raise CaseSemanticError("tie endpoint unknown", f"{end[0]}/{end[1]}")
            if kinds[end[1]] != "boundary":
                raise CaseSemanticError("tie endpoint not boundary", f"{end[0]}/{end[1]}")
        if t.a[0] == t.b[0]:
            raise CaseSemanticError("tie within one area", f"{t.a} - {t.b}")
        key = frozenset((t.a, t.b))
        if key in tie_pairs:
            raise CaseSemanticError("duplicate id", f"parallel tie-line {t.a} - {t.b}")
        tie_pairs.add(key)
        if t.x <= 0:
            raise CaseSemanticError("nonpositive reactance", f"tie-line {t.a} - {t.b}")
        if t.cap <= 0:
            raise CaseSemanticError("nonpositive capacity", f"tie-line {t.a} - {t.b}")
    first = case.areas[0]
    if case.slack[0] != first.id or case.slack[1] not in {b.id for b in first.boundary}:
        raise CaseSemanticError("slack not boundary of first area", f"{case.slack[0]}/{case.slack[1]}")


def parse_case(text: str) -> CaseSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return case_from_dict(doc)


def load_case(path) -> CaseSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_case(fh.read())


def case_to_dict(case: CaseSpec) -> dict:
    areas = []
    for area in case.areas:
        buses = []
        for b in area.buses:
            if b.kind == "boundary":
                buses.append({"id": b.id, "kind": "boundary"})
            else:
                buses.append({
                    "id": b.id, "kind": "internal",
                    "gen_min": b.gen_min, "gen_max": b.gen_max,
                    "wind_max": list(b.wind_max), "demand_min": list(b.demand_min),
                    "demand_max": list(b.demand_max), "price_gen": b.price_gen,
                    "price_wind": b.price_wind, "price_demand": b.price_demand,
                })
        branches = [{"from": br.from_bus, "to": br.to_bus, "x": br.x, "cap": br.cap} for br in area.branches]
        areas.append({"id": area.id, "buses": buses, "branches": branches})
    return {
        "base_mva": case.base_mva,
        "angle_box_scale": case.angle_box_scale,
        "areas": areas,
        "tielines": [{"from": list(t.a), "to": list(t.b), "x": t.x, "cap": t.cap} for t in case.tielines],
        "slack": list(case.slack),
        "options": asdict(case.options),
    }


def dump_case(case: CaseSpec) -> str:
    return json.dumps(case_to_dict(case), indent=2, sort_keys=True) + "\n"


def case_digest(case: CaseSpec) -> str:
    canon = json.dumps(case_to_dict(case), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# --- run reports -----------------------------------------------------------

REPORT_MODES = ("det", "robust", "oracle-det", "oracle-robust", "sample", "check")


@dataclass
class RunRecord:
    """Outcome of one CLI/harness run, serializable via :func:`emit_report`."""

    case_digest: str
    mode: str
    iterations: list = field(default_factory=list)
    y_star: list = field(default_factory=list)
    cost: float | None = None
    bounds: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in REPORT_MODES:
            raise ValueError(f"unknown run mode {self.mode!r}")


def _plain(value):
    """Convert numpy scalars/arrays nested in ``value`` into JSON-native types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return _plain(value.tolist())
    if isinstance(value, float) and value != value:
        raise ValueError("NaN cannot be written to a report")
    return value


def emit_report(run: RunRecord) -> str:
    doc = {
        "case_digest": run.case_digest,
        "mode": run.mode,
        "iterations": _plain(run.iterations),
        "y_star": _plain(run.y_star),
        "cost": _plain(run.cost),
        "bounds": _plain(run.bounds),
        "timings": _plain(run.timings),
        "events": _plain(run.events),
        "extra": _plain(run.extra),
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse_report(text: str) -> RunRecord:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    allowed = set(RunRecord.__dataclass_fields__)
    _check_keys(doc, allowed, "report", required=("case_digest", "mode"))
    return RunRecord(**doc)
