import csv
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

import hrlab.cli as cli
from hrlab.cli import EXIT_INVALID, EXIT_NONCONVERGENCE, main, resolve_settings
from hrlab.solver import NonConvergence


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    header, *body = text.splitlines()
    assert header.startswith("# hrlab-csv v1 ")
    return header, list(csv.DictReader(body))


def test_constants_json(capsys):
    code, out, _ = run_cli(capsys, "constants", "--p", "2", "--N", "3")
    doc = json.loads(out)
    assert code == 0
    assert doc["schema"] == "hrlab-json v1" and doc["table"] == "constants"
    assert doc["lambda_p"] == 0.25 and doc["p_star_star"] is None


def test_sweep_csv_rows_decrease(capsys):
    code, out, _ = run_cli(capsys, "sharpness-sweep", "--p", "2", "--eps", "0.2,0.1,0.05")
    header, rows = parse_csv(out)
    assert code == 0 and "table=sharpness-sweep" in header
    q = [float(r["Q_H"]) for r in rows]
    assert len(q) == 3 and q[0] > q[1] > q[2] > 0.25


def test_output_is_byte_identical_across_runs(capsys):
    argv = ("lemma-fuzz", "--p", "1.5,3", "--samples", "3000", "--seed", "11")
    first = run_cli(capsys, *argv)[1]
    assert run_cli(capsys, *argv)[1] == first
    other = run_cli(capsys, "lemma-fuzz", "--p", "1.5,3", "--samples", "3000", "--seed", "12")[1]
    assert other != first


@pytest.mark.parametrize("argv", [
    ("constants", "--bogus", "1"),
    ("solve", "--lambda", "0.5", "--p", "2", "--N", "5", "--q", "3"),
    ("solve", "--p", "1.0"),
    ("sharpness-sweep", "--eps", "0.1,0.2"),
    ("verify-inequality", "--domain", "annulus", "--inequality", "hrr"),
    ("nonsense",),
])
def test_invalid_input_exits_2(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == EXIT_INVALID and out == "" and err


def test_config_file_is_overridden_by_flags(tmp_path):
    cfg = tmp_path / "lab.json"
    cfg.write_text(json.dumps({"N": 5, "solve": {"p": 2.0, "q": 3.0, "nodes": 123}}))
    s = resolve_settings(["solve", "--config", str(cfg), "--nodes", "77"])
    assert (s["N"], s["p"], s["q"], s["nodes"]) == (5, 2.0, 3.0, 77)
    assert s["tol"] == cli.DEFAULTS["solve"]["tol"]


def test_config_domain_block(tmp_path):
    cfg = tmp_path / "dom.json"
    cfg.write_text(json.dumps({"subcommand": "sharpness-sweep",
                               "domain": {"kind": "box", "lo": [0, 0], "hi": [3, 1]}}))
    s = resolve_settings(["--config", str(cfg)])
    assert s["subcommand"] == "sharpness-sweep" and s["domain"] == "box" and s["hi"] == [3, 1]


@pytest.mark.parametrize("payload", [{"solve": {"nodez": 3}}, {"frobnicate": 1}, [1, 2]])
def test_unknown_config_keys_exit_2(capsys, tmp_path, payload):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(payload))
    assert run_cli(capsys, "solve", "--config", str(cfg))[0] == EXIT_INVALID


def test_missing_config_file_exits_2(capsys, tmp_path):
    assert run_cli(capsys, "constants", "--config", str(tmp_path / "none.json"))[0] == EXIT_INVALID


def test_nonconvergence_exits_3(capsys, monkeypatch):
    def stuck(spec, mesh, tol=1e-10, **kw):
        raise NonConvergence("residual stalled at 1e-3")

    monkeypatch.setattr(cli, "direct_minimize", stuck)
    code, out, err = run_cli(capsys, "solve")
    assert code == EXIT_NONCONVERGENCE and "did not converge" in err and out == ""


def test_solve_writes_profile_and_out(capsys, tmp_path):
    out, prof = tmp_path / "sol.json", tmp_path / "u.csv"
    code, stdout, _ = run_cli(capsys, "solve", "--nodes", "120", "--out", str(out), "--profile", str(prof))
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert doc["table"] == "solve" and doc["solution"]["kind"] == "minimizer"
    assert doc["solution"]["energy"] < 0
    header, rows = parse_csv(prof.read_text())
    assert "table=radial-profile" in header and len(rows) == 121 and float(rows[-1]["u"]) == 0


def test_pohozaev_reports_shrinking_imbalance(capsys):
    code, out, _ = run_cli(capsys, "pohozaev", "--nodes", "150", "--refine", "1")
    doc = json.loads(out)
    assert code == 0 and [m["nodes"] for m in doc["meshes"]] == [150, 300] and doc["shrinking"]


def test_verify_json_reports(capsys):
    code, out, _ = run_cli(capsys, "verify-inequality", "--inequality", "hessian", "--field", "all",
                           "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["rows"] and all(r["holds"] for r in doc["rows"])


def test_nonfinite_numbers_are_strings():
    assert json.loads(cli.render_json({"x": float("inf"), "y": [float("nan")]}, "t"))["x"] == "inf"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hrlab", "constants", "--p", "3", "--N", "2"],
                         capture_output=True, text=True, timeout=60)
    assert res.returncode == 0 and json.loads(res.stdout)["lambda_p"] == pytest.approx(8 / 27)
    res = subprocess.run([sys.executable, "-m", "hrlab", "--version"], capture_output=True, text=True,
                         timeout=60)
    assert res.returncode == 0 and res.stdout.startswith("hrlab ")


SCHEMA_PATH = Path(__file__).resolve().parent.parent / "docs" / "hrlab-output.schema.json"


@pytest.mark.parametrize("argv", [
    ("constants", "--p", "2", "--N", "5"),
    ("constants", "--p", "3", "--N", "2"),
    ("sharpness-sweep", "--eps", "0.2,0.1", "--format", "json"),
    ("verify-inequality", "--field", "radial_wide", "--format", "json"),
    ("solve", "--nodes", "100"),
    ("solve", "--N", "5", "--p", "2", "--q", "3", "--nodes", "100"),
    ("solve", "--N", "5", "--p", "2", "--q", "12", "--lambda", "-0.1", "--nodes", "100"),
    ("pohozaev", "--nodes", "100", "--refine", "1"),
    ("lemma-fuzz", "--samples", "500", "--format", "json"),
], ids=lambda a: " ".join(a[:3]))
def test_json_output_matches_documented_schema(capsys, argv):
    schema = json.loads(SCHEMA_PATH.read_text())
    code, out, _ = run_cli(capsys, *argv)
    assert code == 0
    jsonschema.validate(json.loads(out), schema)


def test_schema_rejects_a_wrong_envelope():
    schema = json.loads(SCHEMA_PATH.read_text())
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"schema": "hrlab-json v2", "table": "constants", "version": "x"}, schema)
