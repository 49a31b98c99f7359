import csv
import io
import json

import numpy as np
import pytest

from advmc.attack import synthesize_attack
from advmc.main import main
from advmc.models.results import OptimizerOptions
from advmc.models.threat import ThreatKind, ThreatModel
from advmc.services.model_io import load_model, store_model, store_threat
from advmc.services.properties import parse_property
from advmc.tools.registry import CommandRegistry

BOUNDED = "P=? [ s!=2 U<=10 s=3 ]"


@pytest.fixture
def four_state_files(tmp_path, four_state):
    model = tmp_path / "chain.json"
    threat = tmp_path / "threat.json"
    store_model(four_state, model)
    store_threat(ThreatModel(kind=ThreatKind.SPSS, epsilon=0.1, vulnerable_states=(1,)), threat)
    return model, threat


def test_registry_lists_every_command():
    names = [c["name"] for c in CommandRegistry().list_commands()]
    assert names == [
        "validate", "satprob", "attack", "verify", "max-delta",
        "sweep", "component-sweep", "bench", "idtmc", "casestudy",
    ]


def test_unknown_command_is_rejected():
    with pytest.raises(ValueError):
        CommandRegistry().call_command("deploy", None)


def test_casestudy_then_satprob(tmp_path, capsys):
    path = tmp_path / "simple.json"
    assert main(["casestudy", "simple", "--out", str(path)]) == 0
    assert main(["validate", str(path)]) == 0
    assert main(["satprob", str(path), "--prop", "P=? [ F<=10 delivered ]"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "ok"
    assert float(lines[1]) == pytest.approx(1 - 0.2 ** 5, abs=1e-12)


def test_casestudy_prints_model(capsys):
    assert main(["casestudy", "zeroconf", "--n", "2", "--p", "0.5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["type"] == "dtmc"
    assert payload["n"] == 6


def test_attack_report(four_state_files, capsys):
    model, threat = four_state_files
    assert main(["attack", str(model), "--prop", BOUNDED, "--threat", str(threat)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["delta_star"] == pytest.approx(0.0330611492, abs=1e-6)


def test_verify_exit_codes(tmp_path, four_state_files, capsys):
    model, threat = four_state_files
    base = ["verify", str(model), "--prop", BOUNDED, "--threat", str(threat)]
    assert main(base + ["--delta", "0.05"]) == 0
    witness = tmp_path / "witness.json"
    assert main(base + ["--delta", "0.01", "--out", str(witness)]) == 3
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "robust"
    assert out[2] == "not robust"
    assert load_model(witness).dense()[1][0] == pytest.approx(0.2, abs=1e-6)


def test_sweep_csv(tmp_path, capsys):
    path = tmp_path / "simple.json"
    main(["casestudy", "simple", "--out", str(path)])
    code = main(["sweep", str(path), "--prop", "P=? [ F<=10 delivered ]", "--kind", "SPSS",
                 "--states", "1", "--epsilons", "0,0.1"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [float(r["epsilon"]) for r in rows] == [0.0, 0.1]
    assert float(rows[1]["delta_star"]) == pytest.approx(0.3 ** 5 - 0.2 ** 5, abs=1e-6)


def test_usage_error_exits_with_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["attack"])
    assert info.value.code == 2
    assert "error:" in capsys.readouterr().err


def test_domain_error_returns_one(tmp_path, capsys):
    assert main(["satprob", str(tmp_path / "absent.json"), "--prop", "P=? [ F s=1 ]"]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_property_syntax_error_returns_one(four_state_files, capsys):
    model, _ = four_state_files
    assert main(["satprob", str(model), "--prop", "P=? [ F<= s=3 ]"]) == 1
    assert "error:" in capsys.readouterr().err


def test_verify_exit_code_follows_the_attack(four_state, four_state_files):
    model, threat = four_state_files
    tm = ThreatModel(kind=ThreatKind.SPSS, epsilon=0.1, vulnerable_states=(1,))
    delta_star = synthesize_attack(four_state, tm, parse_property(BOUNDED),
                                   opts=OptimizerOptions(seed=42, starts=1)).delta_star
    rng = np.random.default_rng(11)
    checked = 0
    for delta in rng.uniform(0.0, 0.1, size=100):
        if abs(delta - delta_star) < 1e-6:
            continue
        code = main(["verify", str(model), "--prop", BOUNDED, "--threat", str(threat),
                     "--delta", repr(float(delta)), "--seed", "42", "--starts", "1"])
        assert code == (0 if delta >= delta_star - 1e-9 else 3)
        checked += 1
    assert checked > 90


@pytest.mark.parametrize("argv", [
    ["sweep", "{model}", "--prop", BOUNDED, "--epsilons", "0,0.1"],
    ["casestudy", "gridworld"],
    ["casestudy", "zeroconf", "--n", "2"],
], ids=["sweep-without-threat", "gridworld-without-size", "zeroconf-without-p"])
def test_incomplete_arguments_are_usage_errors(four_state_files, argv, capsys):
    model, _ = four_state_files
    with pytest.raises(SystemExit) as info:
        main([arg.format(model=model) for arg in argv])
    assert info.value.code == 2
    assert "error:" in capsys.readouterr().err
