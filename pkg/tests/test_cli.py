import json
import subprocess
import sys

import pytest

from calmtier.bundle import data_dir
from calmtier.cli import main

TASKS = data_dir() / "tasks"


def call(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_budget_exit_code(capsys):
    code, out, _ = call(capsys, "classify", TASKS / "budget_allocation.json")
    assert code == 20 and "tier NM" in out


def test_classify_json(capsys):
    code, out, _ = call(capsys, "classify", TASKS / "strategy_pillars.json", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == 1 and doc["results"][0]["tier"] == "M"


def test_classify_several_reports_highest_tier(capsys):
    code, _, _ = call(capsys, "classify", TASKS / "strategy_pillars.json",
                      TASKS / "stage_gate.json")
    assert code == 10


@pytest.mark.parametrize("argv", [
    ["classify", "missing.json"],
    ["classify"],
    ["tax", "--f", "2", "--c", "3"],
    ["tax", "--f", "0.2", "--c-range", "4"],
    ["simulate", "--task", "missing.json"],
    ["frobnicate"],
])
def test_errors_are_one_line(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 2
    assert err.startswith("error: ") and err.count("\n") == 1


def test_bad_spec_is_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"id": "x", "surprise": 1}')
    code, _, err = call(capsys, "classify", bad)
    assert code == 2 and "surprise" in err


def test_simulate_all_modes(tmp_path, capsys):
    out = tmp_path / "runs.json"
    code, _, _ = call(capsys, "simulate", "--task", TASKS / "budget_allocation.json",
                      "--mode", "all", "--runs", "3", "--out", out)
    doc = json.loads(out.read_text())
    assert code == 0 and doc["schema"] == 1 and len(doc["runs"]) == 9
    assert doc["summary"]["uncoordinated"]["validity_rate"] == 0
    assert doc["summary"]["orchestrated"]["validity_rate"] == 1
    assert doc["summary"]["c_ratio"] > 1


def test_simulate_exhaustive_json(capsys):
    code, out, _ = call(capsys, "simulate", "--task", TASKS / "strategy_pillars.json",
                        "--mode", "uncoordinated", "--exhaustive", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["uncoordinated"]["runs"] == 24


def test_simulate_with_partition(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"partitions": [{"start": 0, "end": 5, "agents": ["p3"]}]}))
    code, out, _ = call(capsys, "simulate", "--task", TASKS / "strategy_pillars.json",
                        "--mode", "causal", "--partition", plan, "--format", "json")
    assert code == 0 and json.loads(out)["summary"]["causal"]["validity_rate"] == 1


def test_tax_text_and_json(capsys):
    _, out, _ = call(capsys, "tax", "--f", "0.26", "--c-range", "2.3:4.4")
    assert "[42%, 57%]" in out
    _, out, _ = call(capsys, "tax", "--portfolio", data_dir() / "apqc_portfolio.csv",
                     "--c", "4", "--format", "json")
    doc = json.loads(out)
    assert doc["schema"] == 1 and doc["n"] == 65 and doc["T_exact"] == "36/65"


def test_reproduce_tax_only(capsys):
    code, out, _ = call(capsys, "reproduce", "--tax-only")
    assert code == 0
    assert "T(0.26, 2.3) = 42%" in out and "T(0.26, 4.4) = 57%" in out


def test_reproduce_tables(capsys):
    code, out, _ = call(capsys, "reproduce", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == 1
    tiers = [c["tier"] for c in doc["classification"]]
    assert (tiers.count("M"), tiers.count("M-O"), tiers.count("NM")) == (4, 2, 4)
    for row in doc["simulation"]:
        if row["tier"] == "NM":
            assert row["modes"]["uncoordinated"]["validity_rate"] == 0
            assert row["modes"]["orchestrated"]["validity_rate"] == 1
    assert {row["task"] for row in doc["simulation"]} == {c["task"] for c in doc["classification"]}


def test_reproduce_writes_both_files(tmp_path, capsys):
    assert call(capsys, "reproduce", "--out", tmp_path)[0] == 0
    assert (tmp_path / "report.txt").read_text().startswith("calmtier")
    assert json.loads((tmp_path / "report.json").read_text())["schema"] == 1


def test_data_override(tmp_path, monkeypatch, capsys):
    (tmp_path / "tasks").mkdir()
    (tmp_path / "apqc_portfolio.csv").write_text("task_id,category,tier\na,X,M\nb,X,NM\n")
    monkeypatch.setenv("CALMTIER_DATA", str(tmp_path))
    code, out, _ = call(capsys, "reproduce", "--tax-only", "--format", "json")
    assert code == 0 and json.loads(out)["tax"][0]["f"] == 0.5


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "calmtier", "classify",
                           str(TASKS / "stage_gate.json")], capture_output=True, text=True)
    assert proc.returncode == 10 and "M-O" in proc.stdout
