import csv
import json

import numpy as np
import pytest

from coboundary import field as fieldmod
from coboundary.cli import main
from coboundary.nashmoser import CSV_COLUMNS
from coboundary.scenario import ScenarioConfig

C = [[0.0, 0.1], [0.0, 0.0]]  # max row-sum norm 0.1


def write_config(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def load(path):
    return json.loads(path.read_text())


def test_solve_default_scenario(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == 0
    rep = load(tmp_path / "report.json")
    assert rep["status"] == "ok" and rep["final_defect"] <= 1e-8
    for name in ("family.json", "phi.json", "report.csv", "timing.json"):
        assert (tmp_path / name).exists()
    rows = list(csv.reader((tmp_path / "report.csv").open()))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == len(rep["iteration"]["steps"]) + 1
    phi = fieldmod.load(tmp_path / "phi.json")
    assert phi.nonzero_orders()[0] == 0


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--out", str(a), "--seed", "4"]) == 0
    assert main(["solve", "--out", str(b), "--seed", "4"]) == 0
    for name in ("report.json", "report.csv", "family.json", "phi.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "total" in load(a / "timing.json")


def test_identity_scenario(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"family": {"kind": "identity"}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = load(tmp_path / "o" / "report.json")
    assert rep["iteration"]["steps"] == []


def test_poc_failure_has_witness(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"family": {"kind": "perturbed", "C": C, "phi": {"kind": "random"}}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    rep = load(tmp_path / "o" / "report.json")
    assert rep["status"] == "condition_failure"
    assert set(rep["poc"]["argmax_witness"]) == {"ell", "N", "theta", "eps"}
    assert main(["check-poc", "--config", cfg, "--out", str(tmp_path / "p")]) == 2


def test_lie_mode(tmp_path):
    # the exponential family needs a small disk to be resolved at K = 8, M = 33
    cfg = write_config(tmp_path / "c.json", {"spec": {"eps_radius": 0.125}, "family": {"kind": "coboundary", "phi": {
        "kind": "trig", "exp": True, "terms": [{"order": 1, "k": [1], "kind": "sin", "matrix": [[0, 1], [-1, 0]]}]}}})
    assert main(["solve", "--config", cfg, "--mode", "lie", "--tol", "1e-6", "--out", str(tmp_path / "o")]) == 0
    rep = load(tmp_path / "o" / "report.json")
    assert rep["iteration"]["mode"] == "lie" and rep["final_defect"] <= 1e-6


def test_checks_and_generate(tmp_path):
    assert main(["check-poc", "--out", str(tmp_path / "poc")]) == 0
    assert main(["check-fc", "--out", str(tmp_path / "fc"), "--nmax", "6"]) == 0
    rep = load(tmp_path / "fc" / "report.json")
    assert rep["order"] == 1 and rep["cpoc"]["Nmax"] == 6
    assert main(["solve-commutative", "--out", str(tmp_path / "sc")]) == 0
    assert (tmp_path / "sc" / "alpha.json").exists()
    assert main(["generate", "--out", str(tmp_path / "g"), "--seed", "2"]) == 0
    assert (tmp_path / "g" / "phi_star.json").exists()
    fam = fieldmod.load(tmp_path / "g" / "family.json")
    eta, _ = ScenarioConfig.from_dict({"seed": 2}).build_family()
    assert np.array_equal(fam.coeffs, eta.coeffs)


def test_check_fc_detects_violation(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"family": {"kind": "perturbed", "C": C, "phi": {"kind": "random"}}})
    assert main(["check-fc", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert main(["solve-commutative", "--config", cfg, "--out", str(tmp_path / "s")]) == 2


def test_schedule(tmp_path):
    assert main(["schedule", "--out", str(tmp_path)]) == 0
    rep = load(tmp_path / "report.json")
    assert rep["found"] and rep["verdict"] and rep["Gamma0"] > 0
    assert not rep["perturbed"]["verdict"] or rep["perturbed"]["diverged"]
    assert rep["table"][0]["L_n"] == 8


@pytest.mark.parametrize("content", ["{not json", json.dumps({"bogus": 1}), json.dumps({"tol": -1}),
                                     json.dumps({"spec": {"d": 7}}), json.dumps({"mode": "group"})])
def test_config_errors(tmp_path, content):
    path = tmp_path / "c.json"
    path.write_text(content)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_missing_config(tmp_path):
    assert main(["check-poc", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 1


def test_bad_flag():
    with pytest.raises(SystemExit):
        main(["solve", "--mode", "group"])
