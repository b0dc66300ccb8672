import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import toy_doc
from tieline.casefile import (RunRecord, SolverOptions, case_digest, case_from_dict, dump_case, emit_report,
                              parse_case, parse_report)
from tieline.errors import CaseSemanticError, CaseSyntaxError


def semantic_code(doc):
    with pytest.raises(CaseSemanticError) as info:
        case_from_dict(doc)
    return info.value


def test_minimal_case_parses():
    case = parse_case(json.dumps(toy_doc()))
    assert len(case.tielines) == 1
    assert [a.id for a in case.areas] == ["A1", "A2"]
    assert case.options == SolverOptions()


def test_tie_to_internal_bus_rejected():
    doc = toy_doc()
    doc["tielines"][0]["to"] = ["A2", "i1"]
    assert semantic_code(doc).code == "tie endpoint not boundary"


def test_inverted_uncertainty_names_the_bus():
    doc = toy_doc()
    doc["areas"][1]["buses"][0]["wind_max"] = [5.0, 1.0]
    err = semantic_code(doc)
    assert err.code == "uncertainty range inverted"
    assert "i1" in err.detail and "A2" in err.detail


def test_syntax_error_reports_position():
    with pytest.raises(CaseSyntaxError) as info:
        parse_case('{\n  "areas": [,]\n}')
    assert info.value.line == 2


@pytest.mark.parametrize("mutate, code", [
    (lambda d: d.update(slack=["A2", "b1"]), "slack not boundary of first area"),
    (lambda d: d["areas"][0]["buses"][1].update(gen_max=5.0), "boundary bus has assets"),
    (lambda d: d["tielines"][0].update(x=0.0), "nonpositive reactance"),
    (lambda d: d["tielines"][0].update(to=["A1", "b1"]), "tie within one area"),
    (lambda d: d["areas"][1].update(id="A1"), "duplicate id"),
    (lambda d: d["areas"][0]["branches"][0].update(cap=-1.0), "nonpositive capacity"),
    (lambda d: d.update(options={"nonsense": 1}), "unknown field"),
    (lambda d: d.update(options={"big_m_fallback": "huge"}), "bad option"),
    (lambda d: d["areas"][0]["buses"][0].update(gen_min=300.0), "generation limits inverted"),
])
def test_named_semantic_errors(mutate, code):
    doc = toy_doc()
    mutate(doc)
    assert semantic_code(doc).code == code


def test_case_round_trip_and_digest():
    case = case_from_dict(toy_doc(demand_range=(0.98, 1.02), wind=(15.0, 25.0)))
    again = parse_case(dump_case(case))
    assert again == case
    assert case_digest(again) == case_digest(case)
    other = case_from_dict(toy_doc(cap=50.0))
    assert case_digest(other) != case_digest(case)


def test_empty_ledger_report():
    text = emit_report(RunRecord("abc", "det"))
    assert json.loads(text)["iterations"] == []


def test_report_rejects_unknown_mode_and_nan():
    with pytest.raises(ValueError):
        RunRecord("abc", "bogus")
    with pytest.raises(ValueError):
        emit_report(RunRecord("abc", "det", cost=float("nan")))


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(ledger=st.lists(st.fixed_dictionaries({"iter": st.integers(0, 100), "cost": finite,
                                              "y": st.lists(finite, max_size=4)}), max_size=5),
       y=st.lists(finite, max_size=4), cost=finite)
def test_report_round_trip_is_byte_identical(ledger, y, cost):
    text = emit_report(RunRecord("d", "robust", ledger, y, cost, [{"outer": 0, "lower": cost, "upper": cost}]))
    assert emit_report(parse_report(text)) == text
