import json

import pytest

from advmc.attack import synthesize_attack
from advmc.models.chain import Dtmc, Mdp
from advmc.models.results import AttackReport
from advmc.models.threat import ThreatKind, ThreatModel
from advmc.services.case_studies import GridSpec, random_gridworld
from advmc.services.model_io import (
    load_model,
    load_policy,
    load_report,
    load_threat,
    load_threat_template,
    store_model,
    store_report,
    store_threat,
)
from advmc.services.properties import parse_property
from advmc.utils.errors import ParseError, RowSumViolation


def write(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_store_load_store_is_byte_identical(tmp_path, protocol):
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    store_model(protocol, first)
    store_model(load_model(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_mdp_round_trip_keeps_policy(tmp_path):
    mdp, policy = random_gridworld(GridSpec.table(3, seed=4))
    path = tmp_path / "grid.json"
    store_model(mdp, path, policy)
    loaded = load_model(path)
    assert isinstance(loaded, Mdp)
    assert loaded.transitions == mdp.transitions
    assert load_policy(path) == policy


def test_loaded_model_is_validated(tmp_path):
    path = write(tmp_path / "bad.json", {
        "type": "dtmc", "n": 2, "init": 0,
        "transitions": [{"from": 0, "to": 1, "p": 0.7}, {"from": 1, "to": 1, "p": 1.0}],
    })
    with pytest.raises(RowSumViolation):
        load_model(path)


def test_minimal_dtmc_file(tmp_path):
    path = write(tmp_path / "m.json", {
        "type": "dtmc", "n": 2, "init": 0, "atoms": ["goal"], "labels": {"1": ["goal"]},
        "transitions": [{"from": 0, "to": 1, "p": 1.0}, {"from": 1, "to": 1, "p": 1.0}],
    })
    model = load_model(path)
    assert isinstance(model, Dtmc)
    assert model.states_with("goal") == frozenset({1})


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "type": "dtmc",\n  "n": 2,,\n}', encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_model(path)
    assert info.value.line == 3


def test_schema_error_reports_field(tmp_path):
    path = write(tmp_path / "m.json", {"type": "dtmc", "n": 2, "init": 0, "transitions": [{"from": 0, "p": 1.0}]})
    with pytest.raises(ParseError) as info:
        load_model(path)
    assert info.value.field == "transitions.0.to"


@pytest.mark.parametrize("payload,field", [
    ({"type": "dtmc", "n": 1, "init": 0, "atoms": ["U"], "transitions": [{"from": 0, "to": 0, "p": 1.0}]}, "atoms"),
    ({"type": "dtmc", "n": 1, "init": 0, "transitions": [{"from": 0, "to": 3, "p": 1.0}]}, "transitions.0"),
    ({"type": "dtmc", "n": 1, "init": 0,
      "transitions": [{"from": 0, "to": 0, "p": 0.5}, {"from": 0, "to": 0, "p": 0.5}]}, "transitions.1"),
    ({"type": "mdp", "n": 1, "init": 0, "transitions": [{"from": 0, "to": 0, "p": 1.0}]}, "transitions.0.action"),
])
def test_structural_file_errors(tmp_path, payload, field):
    with pytest.raises(ParseError) as info:
        load_model(write(tmp_path / "m.json", payload))
    assert info.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_model(tmp_path / "absent.json")


def test_threat_round_trip(tmp_path):
    tm = ThreatModel(kind=ThreatKind.ST, epsilon=0.05, vulnerable_transitions=((0, 1), (0, 2)))
    path = tmp_path / "threat.json"
    store_threat(tm, path)
    assert load_threat(path) == tm
    assert json.loads(path.read_text())["vulnerable_transitions"] == [[0, 1], [0, 2]]


def test_threat_template_without_epsilon(tmp_path):
    path = write(tmp_path / "t.json", {"kind": "SPSS", "vulnerable_states": [1]})
    template = load_threat_template(path)
    assert template.epsilon is None
    assert template.to_threat(0.2).epsilon == 0.2
    with pytest.raises(ParseError):
        load_threat(path)
    assert load_threat(path, epsilon=0.1).vulnerable_states == (1,)


def test_threat_kind_and_set_must_match(tmp_path):
    path = write(tmp_path / "t.json", {"kind": "SS", "epsilon": 0.1, "vulnerable_transitions": [[0, 1]]})
    with pytest.raises(ParseError):
        load_threat(path)


def test_report_round_trip(tmp_path, four_state):
    tm = ThreatModel(kind=ThreatKind.SPSS, epsilon=0.1, vulnerable_states=(1,))
    prop = "P=? [ s!=2 U<=10 s=3 ]"
    result = synthesize_attack(four_state, tm, parse_property(prop))
    path = tmp_path / "report.json"
    store_report(AttackReport.from_result(result, tm, prop), path)
    report = load_report(path)
    assert report.delta_star == result.delta_star
    assert report.threat == tm
    assert report.property == prop
    assert {(s, t) for s, t, _ in report.x_star} == set(result.x_star.as_dict())


def test_probabilities_read_back_exactly(tmp_path):
    third = 1 / 3
    model = Dtmc.from_rows([[(0, third), (1, 1 - third)], [(1, 0.1 + 0.2), (0, 1 - (0.1 + 0.2))]])
    path = tmp_path / "m.json"
    store_model(model, path)
    text = path.read_text()
    assert "0.3333333333333333" in text
    assert "0.30000000000000004" in text
    assert load_model(path).rows == model.rows
