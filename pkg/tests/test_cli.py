import csv
import json

import pytest

from conftest import DATA
from imprecise_hitting.cli import run_command


def run(tmp_path, *argv):
    out = tmp_path / "result.json"
    code = run_command([*argv, "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def model(name):
    return str(DATA / f"fix-{name}.json")


def test_solve_trap_upper_time(tmp_path):
    code, doc = run(tmp_path, "solve", "--quantity", "time", "--bound", "upper",
                    "--model", model("trap"))
    assert code == 0
    assert doc["values"] == {"g": 0.0, "m": "inf", "t": "inf"}
    assert doc["command"] == "solve" and len(doc["model_digest"]) == 64


def test_classify_half(tmp_path):
    code, doc = run(tmp_path, "classify", "--model", model("half"))
    assert code == 0
    c = doc["classification"]
    assert (c["B"], c["U"], c["Z"], c["C"]) == (["t"], ["u"], ["g"], ["t"])


def test_oracle_brute_geo(tmp_path):
    code, doc = run(tmp_path, "oracle", "--mode", "brute", "--model", model("geo"))
    assert code == 0
    assert all(doc["flags"].values())


@pytest.mark.parametrize("mode", ["tree", "mc"])
def test_oracle_other_modes(tmp_path, mode):
    code, doc = run(tmp_path, "oracle", "--mode", mode, "--horizon", "4", "--samples", "2000",
                    "--model", model("trap"))
    assert code == 0 and all(doc["flags"].values())


def test_exact_with_witness(tmp_path):
    code, doc = run(tmp_path, "solve", "--quantity", "prob", "--bound", "upper", "--exact",
                    "--witness", "--model", model("trap"))
    assert code == 0
    assert doc["witness"]["kind"] == "lambda"
    assert doc["configuration"]["lambda_schedule"][0] == 0.5
    code, doc = run(tmp_path, "solve", "--quantity", "time", "--bound", "lower", "--witness",
                    "--model", model("geo"))
    assert doc["witness"]["matrix"]["s"] == {"g": 0.75, "s": 0.25}


def test_trace_file(tmp_path):
    trace = tmp_path / "trace.csv"
    code, _ = run(tmp_path, "solve", "--quantity", "time", "--bound", "upper",
                  "--trace", str(trace), "--model", model("geo"))
    assert code == 0
    rows = list(csv.DictReader(trace.read_text().splitlines()))
    assert any(r["iteration"] == "2" and r["state"] == "s" and r["value"] == "2.3125"
               for r in rows)


def test_not_converged_exit(tmp_path):
    code, doc = run(tmp_path, "solve", "--quantity", "time", "--bound", "upper",
                    "--max-iter", "3", "--model", model("geo"))
    assert code == 1 and doc is None


def test_validation_exit(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"states": ["a"], "target": ["b"], "rows": {"a": {"vertices": [[1]]}}}))
    assert run_command(["classify", "--model", str(bad)]) == 2
    bad.write_text("[")
    assert run_command(["classify", "--model", str(bad)]) == 2
    assert run_command(["solve", "--model", model("geo")]) == 2


def test_disagreement_exit(tmp_path, monkeypatch):
    from imprecise_hitting import oracle

    def fake(chain, target, *args, **kwargs):
        report = oracle.EnvelopeReport(chain.labels)
        report.flags = {"min_time": False}
        return report

    monkeypatch.setattr(oracle, "brute_force_envelope", fake)
    code, doc = run(tmp_path, "oracle", "--mode", "brute", "--model", model("geo"))
    assert code == 3 and doc["flags"] == {"min_time": False}


def test_deterministic_output(tmp_path):
    argv = ["oracle", "--mode", "mc", "--samples", "500", "--seed", "4", "--model", model("ruin")]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_command([*argv, "--out", str(a)])
    run_command([*argv, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_stdout(capsys):
    assert run_command(["classify", "--model", model("geo")]) == 0
    assert json.loads(capsys.readouterr().out)["classification"]["Z"] == ["g", "s"]


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "imprecise_hitting", "classify", "--model",
                           model("trap")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["classification"]["B"] == ["m", "t"]
