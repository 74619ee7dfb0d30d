import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from qpencil.cli import main, spin_z_from_records, ConfigError

SPECS = Path(__file__).resolve().parents[1] / "specs"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_mqv_writes_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, err = run(["verify", "--spec", str(SPECS / "one_arrow_21.json"), "--suite", "mqv",
                        "--points", "4", "--seed", "7", "--out", str(out)], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["seed"] == 7 and report["points"] == 4
    assert report["model"]["dims"] == {"1": 2, "2": 1}
    names = {c["name"]: c for c in report["checks"]}
    assert names["mqv:quasi-poisson"]["status"] == "pass"
    assert all(c["elapsed_ms"] is None for c in report["checks"])
    assert "pass  mqv:moment-map" in err


def test_reports_are_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run(["verify", "--spec", str(SPECS / "one_loop.json"), "--suite", "mqv", "--points", "3",
                    "--out", str(p)], capsys)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_timing_flag(capsys):
    code, out, _ = run(["verify", "--spec", str(SPECS / "one_loop.json"), "--suite", "mqv", "--points", "2",
                        "--timing"], capsys)
    assert code == 0
    assert all(isinstance(c["elapsed_ms"], float) for c in json.loads(out)["checks"])


def test_verify_nc_words(capsys):
    code, out, _ = run(["verify", "--suite", "nc", "--points", "3", "--words", "v1 v1*", "v2 v2*"], capsys)
    assert code == 0
    checks = {c["name"]: c["status"] for c in json.loads(out)["checks"]}
    assert checks["nc:rep-morphism[z0=1]"] == "pass"


def test_verify_pencil_with_z_file(capsys):
    code, out, _ = run(["verify", "--spec", str(SPECS / "q2.json"), "--suite", "pencil", "--points", "2",
                        "--z", str(SPECS / "z_q2.json")], capsys)
    assert code == 0


def test_missing_dims_is_a_config_error(tmp_path, capsys):
    spec = json.loads((SPECS / "q2.json").read_text())
    del spec["dims"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(["verify", "--spec", str(path), "--suite", "mqv"], capsys)
    assert code == 2 and "dims" in err


@pytest.mark.parametrize("argv", [
    ["verify", "--suite", "bogus"],
    ["verify", "--points", "0"],
    ["verify", "--spec", "/nonexistent.json", "--suite", "mqv"],
    ["verify", "--suite", "spinrs", "--q", "abc"],
    ["verify", "--suite", "mqv", "--unknown-flag"],
    ["flow", "--n", "2", "--q", "-1"],
    ["flow", "--dt", "0"],
])
def test_config_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_spin_z_records():
    z = spin_z_from_records([{"a": "v2", "b": "v1", "value": "1/2"}, {"a": 1, "b": 3, "value": 2}], 3)
    assert z == {(1, 2): -0.5, (1, 3): 2}
    for bad in ([{"a": "v1", "b": "v1", "value": 1}], [{"a": "v1", "b": "v9", "value": 1}],
                [{"a": "v1", "b": "v2"}], {"a": 1}):
        with pytest.raises(ConfigError):
            spin_z_from_records(bad, 3)


def test_flow_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _, err = run(["flow", "--n", "2", "--d", "2", "--t-end", "0.1", "--dt", "1e-3", "--record-every", "10",
                        "--z", str(SPECS / "z_spin3.json"), "--d", "3", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0][:3] == ["t", "x1", "x2"] and rows[0][-1] == "tr(Zcal_3^3)"
    assert len(rows) == 12
    summary = json.loads(err.strip().splitlines()[-1])
    assert float(summary["max_drift"]) <= 1e-8


def test_flow_drift_tolerance_gates_exit_code(capsys):
    assert run(["flow", "--n", "2", "--d", "2", "--t-end", "0.2", "--tol", "1e-30"], capsys)[0] == 1


def test_controls_suite(capsys):
    code, out, _ = run(["verify", "--suite", "controls"], capsys)
    assert code == 0
    assert all(c["status"] == "fail" and c["witness"] for c in json.loads(out)["checks"])


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qpencil", "verify", "--spec", str(SPECS / "one_loop.json"),
                           "--suite", "mqv", "--points", "2", "--out", str(tmp_path / "r.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
