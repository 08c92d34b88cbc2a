import json

import pytest

from guidebook.cli import main
from guidebook.scenario import dump_scenario, scenario_to_dict

from .conftest import two_clip_document, write_catalog


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_sample_catalog(capsys, sample_catalog_path):
    code, out, _ = run_cli(capsys, "validate", str(sample_catalog_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["ok"] is True
    assert summary["rooms"] == 3
    assert summary["clips"] == 51
    assert summary["duration_histogram"]["59000"] == 1
    assert summary["duration_histogram"]["5500_27000"] == 50
    assert summary["duration_histogram"]["other"] == 0
    assert len(summary["checksum"]) == 64


def test_validate_rejects_bad_catalog(capsys, tmp_path):
    doc = two_clip_document()
    doc["clips"][0]["duration_ms"] = -5
    path = write_catalog(tmp_path, doc)
    code, out, _ = run_cli(capsys, "validate", str(path))
    assert code == 1
    assert json.loads(out)["ok"] is False


def scenario_file(tmp_path, catalog_name="catalog.json", **overrides):
    doc = two_clip_document()
    write_catalog(tmp_path, doc, catalog_name)
    scenario = {
        "catalog_ref": catalog_name,
        "network": {"seed": 5},
        "protocol": {},
        "mode": "eavesdrop",
        "end_ms": 32000,
        "events": [
            {"at_ms": 0, "device": "A",
             "action": {"kind": "tap", "wall_id": "w1", "x": 100, "y": 100}},
            {"at_ms": 2000, "device": "B",
             "action": {"kind": "tap", "wall_id": "w1", "x": 400, "y": 100}},
        ],
    }
    scenario.update(overrides)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario), encoding="utf-8")
    return path


def test_run_prints_timeline_jsonl(capsys, tmp_path):
    path = scenario_file(tmp_path)
    code, out, _ = run_cli(capsys, "run", str(path))
    assert code == 0
    lines = [json.loads(line) for line in out.strip().splitlines()]
    assert all({"t_ms", "device", "state"} <= set(entry) for entry in lines)
    kinds = {entry["state"]["kind"] for entry in lines}
    assert kinds == {"silence", "playing"}
    join = [e for e in lines if e["device"] == "A" and e["t_ms"] == 10000]
    assert join and join[0]["state"]["position_ms"] == 8000


def test_run_writes_file_and_stats(capsys, tmp_path):
    path = scenario_file(tmp_path)
    out_path = tmp_path / "timeline.jsonl"
    code, out, _ = run_cli(capsys, "run", str(path), "--out", str(out_path), "--stats")
    assert code == 0
    assert out_path.exists()
    stats = json.loads(out.strip().splitlines()[-1])
    assert stats["mutual_eavesdrop_fraction"] == 1.0
    assert stats["simultaneous_listening_ms"] == 21000


def test_run_invalid_scenario_exits_1(capsys, tmp_path):
    path = scenario_file(tmp_path)
    path.write_text(json.dumps({"end_ms": -1}), encoding="utf-8")
    code, _, err = run_cli(capsys, "run", str(path))
    assert code == 1
    assert "error" in err


def test_oracle_check_passes(capsys, tmp_path):
    path = scenario_file(tmp_path)
    code, out, _ = run_cli(capsys, "oracle-check", str(path), "--step-ms", "10")
    assert code == 0
    assert json.loads(out)["ok"] is True


def test_fuzz_clean_run(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out, _ = run_cli(capsys, "fuzz", "--runs", "40", "--seed", "123")
    assert code == 0
    assert json.loads(out)["runs"] == 40
