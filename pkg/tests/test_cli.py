import csv
import io
import json
import math
import subprocess
import sys

import pytest

from polsim.cli import flatten, main, parse_grid, UsageError
from polsim.detection import from_csv
from polsim.netlist import corpus_path


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cnot_table_defaults_ideal(capsys):
    code, out, _ = run_cli(capsys, "cnot-table")
    assert code == 0
    doc = json.loads(out)
    assert list(doc) == ["experiment", "noise", "tables", "curves", "summary"]
    assert doc["summary"]["fidelity"] == 1.0
    assert doc["summary"]["herald_prob"] == 0.25


def test_check_undeclared_exits_2(capsys):
    code, _, err = run_cli(capsys, "check", "bad/undeclared.net")
    assert code == 2
    assert "UndeclaredLine" in err
    assert "bad/undeclared.net:3:10:" in err


def test_check_every_bad_file(capsys):
    for path in sorted((corpus_path() / "bad").glob("*.net")):
        code, _, err = run_cli(capsys, "check", str(path))
        assert code == 2
        assert err.startswith(f"{path}:")


def test_check_good_file(capsys):
    code, out, _ = run_cli(capsys, "check", "cnot.net")
    assert code == 0 and "9 pipeline steps" in out


def test_run_netlist_csv_and_json_agree(capsys):
    _, out_csv, _ = run_cli(capsys, "run", "entangle.net", "--format", "csv")
    _, out_json, _ = run_cli(capsys, "run", "entangle.net")
    rows = from_csv(out_csv)
    doc = json.loads(out_json)
    flat = [(r["angle_deg"], k, v) for r in doc["results"] for k, v in r["probabilities"].items()]
    assert rows == flat
    assert len(rows) == 37


def test_usage_errors_exit_1(capsys):
    assert run_cli(capsys, "cnot-table", "--grid", "0:180")[0] == 1
    assert run_cli(capsys, "entangle-fringe", "--grid", "0:180:1")[0] == 1
    assert run_cli(capsys, "cnot-table", "--lambda23", "1.5")[0] == 1
    assert run_cli(capsys, "frobnicate")[0] == 1
    assert run_cli(capsys)[0] == 1
    assert run_cli(capsys, "run", "does-not-exist.net")[0] == 1
    assert run_cli(capsys, "classical-baseline", "--samples", "0")[0] == 1


def test_zero_probability_exit_3(capsys, tmp_path):
    net = tmp_path / "dark.net"
    net.write_text("source single 1 pol=H\nelem polarizer 1 theta=90\ndet hv 1\n")
    code, _, err = run_cli(capsys, "run", str(net))
    assert code == 3 and "zero-probability" in err


def test_grid_parsing():
    assert parse_grid("0:180:37") == (0.0, 180.0, 37)
    for bad in ("0:180", "a:b:c", "0:180:1", "0:inf:5"):
        with pytest.raises(UsageError):
            parse_grid(bad)


def test_entangle_grid_end_inclusive(capsys):
    _, out, _ = run_cli(capsys, "entangle-fringe", "--grid", "0:90:4")
    doc = json.loads(out)
    assert doc["curves"]["fringe"]["angle_deg"] == [0.0, 30.0, 60.0, 90.0]


@pytest.mark.parametrize("command", ["cnot-table", "entangle-fringe", "teleport"])
def test_csv_and_json_encode_same_numbers(capsys, command):
    _, out_json, _ = run_cli(capsys, command, "--mu", "0.05", "--lambda45", "0.9")
    _, out_csv, _ = run_cli(capsys, command, "--mu", "0.05", "--lambda45", "0.9",
                            "--format", "csv")
    flat = dict(flatten(json.loads(out_json)))
    rows = list(csv.reader(io.StringIO(out_csv)))
    assert rows[0] == ["key", "value"]
    assert len(rows) - 1 == len(flat)
    for key, text in rows[1:]:
        ref = flat[key]
        if ref is None:
            assert text == ""
        elif isinstance(ref, str):
            assert text == ref
        else:
            assert float(text) == ref


def test_output_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["classical-baseline", "--samples", "5000", "--seed", "3",
                     "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, x, _ = run_cli(capsys, "teleport", "--format", "csv")
    _, y, _ = run_cli(capsys, "teleport", "--format", "csv")
    assert x == y


def test_classical_baseline_command(capsys):
    _, out, _ = run_cli(capsys, "classical-baseline")
    assert json.loads(out)["summary"]["fidelity"] == 2 / 3
    _, out, _ = run_cli(capsys, "classical-baseline", "--samples", "100000", "--seed", "1")
    assert abs(json.loads(out)["summary"]["fidelity"] - 2 / 3) < 0.01


def test_teleport_command_reports_branches(capsys):
    _, out, _ = run_cli(capsys, "teleport")
    doc = json.loads(out)
    assert set(doc["tables"]["branches"]) == {"psi-", "psi+", "phi+", "phi-"}
    assert doc["summary"]["fidelity"] == pytest.approx(1.0)
    assert doc["tables"]["feedforward"]["average_fidelity"] == pytest.approx(1.0)


def test_console_script_module_entry():
    proc = subprocess.run([sys.executable, "-m", "polsim.cli", "check", "teleport.net"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
