import csv
import json
import subprocess
import sys

import pytest

from unijunction.cli import main, run

FAST = ["--t-transient", "5", "--t-record", "5"]


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def test_derive_params(tmp_path, capsys):
    circuit = tmp_path / "paper.circuit"
    circuit.write_text("[circuit]\nv_s = 7\nv_bias = 4.67\nr = 12.6e3\nr2 = 677\nrb2 = 2.5e3\n"
                       "cap = 49.73e-9\nind = 0.2e-3\n")
    out = tmp_path / "o"
    assert main(["derive-params", "--circuit", str(circuit), "--out", str(out)]) == 0
    doc = read_json(out / "derived_params.json")
    assert doc["a1"] == pytest.approx(0.7925, abs=1e-3)
    (note,) = doc["discrepancies"]
    assert note["name"] == "a0" and note["reference"] == 26.0
    assert note["computed"] == pytest.approx(20.2, abs=0.05)
    assert json.loads(capsys.readouterr().out)["k"] == doc["k"]
    assert (out / "resolved_config.ini").exists() and (out / "resolved_config.json").exists()


def test_simulate_is_reproducible_from_snapshot(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--m", "0.3", "--seed", "4", "--out", str(a), *FAST]) == 0
    assert main(["simulate", "--config", str(a / "resolved_config.ini"), "--out", str(b)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    snap = read_json(b / "resolved_config.json")
    assert snap["params"]["m"] == 0.3 and snap["seed"] == 4
    assert snap["integrator"]["t_transient"] == 5.0
    rows = list(csv.reader(open(a / "trajectory.csv")))
    assert rows[0] == ["t", "x", "y", "z", "u"] and len(rows) == 1002
    assert read_json(a / "simulate.json")["maxima_count"] >= 0


def test_lyapunov_reports_reference(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["lyapunov", "--m", "0.3", "--total-time", "2", "--out", str(out), *FAST])
    assert code == 0
    doc = read_json(out / "lyapunov.json")
    assert len(doc["spectrum"]) == 4 and len(doc["sign_pattern"]) == 4
    assert doc["total_time"] == 2.0 and doc["m"] == 0.3
    ref = doc["reference"]
    assert ref["spectrum"] == [0.25, 0.0, -1.5, -212.24] and ref["sign_pattern"] == "+0--"
    assert isinstance(ref["sign_pattern_agrees"], bool)
    assert doc["settings"]["integrator"]["t_transient"] == 5.0
    assert (out / "lyapunov_history.csv").exists()
    assert doc["class"] in capsys.readouterr().out


def test_lyapunov_without_reference(tmp_path):
    out = tmp_path / "o"
    assert main(["lyapunov", "--m", "0.31", "--total-time", "1", "--out", str(out),
                 *FAST]) == 0
    assert read_json(out / "lyapunov.json")["reference"] is None


def test_equilibria(tmp_path):
    out = tmp_path / "o"
    assert main(["equilibria", "--points", "11", "--out", str(out)]) == 0
    doc = read_json(out / "equilibria.json")
    assert doc["points"] == 11 and doc["max_char_residual"] < 1e-8
    rows = list(csv.reader(open(out / "equilibria.csv")))
    assert len(rows) == 12


def test_bifurcate(tmp_path):
    out = tmp_path / "o"
    assert main(["bifurcate", "--m-from", "0", "--m-to", "0.5", "--points", "3", "--out",
                 str(out), *FAST]) == 0
    rows = list(csv.reader(open(out / "bifurcation.csv")))
    assert rows[0] == ["m", "u_max"]
    assert [r["m"] for r in read_json(out / "bifurcation_summary.json")] == [0.0, 0.25, 0.5]


def test_fit_synthetic(tmp_path):
    out = tmp_path / "o"
    assert main(["fit", "--synthetic", "50", "--noise", "0.01", "--seed", "3", "--out",
                 str(out)]) == 0
    doc = read_json(out / "fit.json")
    assert doc["converged"] and doc["r_squared"] > 0.99 and doc["points"] == 50
    # the saved data reproduce the fit
    out2 = tmp_path / "o2"
    assert main(["fit", "--data", str(out / "fit_data.csv"), "--out", str(out2)]) == 0
    assert read_json(out2 / "fit.json")["coeffs"] == doc["coeffs"]


def test_poincare_and_hysteresis(tmp_path):
    out = tmp_path / "p"
    assert main(["poincare", "--m", "0.57", "--out", str(out), *FAST]) == 0
    doc = read_json(out / "poincare.json")
    assert doc["structure"] in {"point", "cluster", "curve", "scatter", "sparse"}
    out = tmp_path / "h"
    assert main(["hysteresis", "--samples-per-period", "400", "--out", str(out)]) == 0
    doc = read_json(out / "hysteresis.json")
    assert doc["drive_freq"] == pytest.approx(12.566, abs=1e-3) and doc["loop_area"] > 0
    out = tmp_path / "h2"
    assert main(["hysteresis", "--freq-hz", "20000", "--samples-per-period", "400",
                 "--out", str(out)]) == 0
    assert read_json(out / "hysteresis.json")["drive_freq"] == doc["drive_freq"]


@pytest.mark.parametrize("argv", [
    ["lyapunov", "--bogus"],
    ["nosuchcommand"],
    [],
    ["simulate", "--m", "abc"],
])
def test_usage_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "o")] if argv else argv) == 2


def test_bad_override_is_usage_error(tmp_path):
    assert main(["equilibria", "--set", "params.nope=1", "--out", str(tmp_path)]) == 2


def test_missing_input_file(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2
    assert main(["derive-params", "--circuit", str(tmp_path / "nope"), "--out",
                 str(tmp_path)]) == 2


def test_domain_error_leaves_marker(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["equilibria", "--set", "params.a0=-5", "--points", "3", "--out", str(out)])
    assert code == 1
    marker = (out / "FAILED").read_text()
    assert "NoPositiveRootError" in marker and "m=0.0" in marker
    assert "NoPositiveRootError" in capsys.readouterr().err
    # a later successful run clears the marker
    assert main(["equilibria", "--points", "3", "--out", str(out)]) == 0
    assert not (out / "FAILED").exists()


def test_blow_up_is_domain_error(tmp_path):
    out = tmp_path / "o"
    code = main(["simulate", "--set", "integrator.blowup_bound=10", "--out", str(out), *FAST])
    assert code == 1
    assert "BlowUpError" in (out / "FAILED").read_text()


def test_sweep_failure_names_m(tmp_path):
    out = tmp_path / "o"
    code = main(["bifurcate", "--points", "2", "--set", "integrator.blowup_bound=10", "--out",
                 str(out), *FAST])
    assert code == 1
    text = (out / "FAILED").read_text()
    assert "m=0" in text and "m=1" in text
    assert (out / "bifurcation.csv").exists()


def test_run_helper(tmp_path):
    assert run("equilibria", ["--points", "2", "--out", str(tmp_path)]) == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "unijunction", "equilibria", "--points", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "unijunction", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "derive-params" in proc.stdout
