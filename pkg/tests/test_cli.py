from __future__ import annotations

import json

import pytest

import helpers
from iacforge.cli import main
from iacforge.curate import GenRecord, MutnRecord, load_records, write_jsonl
from iacforge.repair import RecordingClient, ScriptedClient, run_repair_loop
from iacforge.repair.templates import example_slots
from iacforge.verify import plan_text, validate_text


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for var in ("IACFORGE_CONFIG", "IACFORGE_BACKEND", "IACFORGE_LLM_URL"):
        monkeypatch.delenv(var, raising=False)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_validate(tmp_path, capsys):
    assert main(["validate", str(helpers.FIXTURES / "bucket_container.tf")]) == 0
    assert capsys.readouterr().out.startswith("PASS")
    assert main(["validate", _write(tmp_path, "bad.tf", helpers.UNCOMPILABLE), "--json"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_plan_cycle_and_out(tmp_path, capsys):
    cyclic = ('resource "null_resource" "a" {\n  depends_on = [null_resource.b]\n}\n'
              'resource "null_resource" "b" {\n  depends_on = [null_resource.a]\n}\n')
    assert main(["plan", _write(tmp_path, "c.tf", cyclic)]) == 1
    assert "CYCLE" in capsys.readouterr().out
    assert main(["plan", str(helpers.FIXTURES / "bucket_container.tf"), "--out", str(tmp_path / "plan.json")]) == 0
    assert "docker_container.c" in json.loads((tmp_path / "plan.json").read_text())["resources"]


def test_reward_and_policy_eval(tmp_path, capsys):
    policy = _write(tmp_path, "p.json", helpers.k_of_n_policy(3, 4).to_json())
    cfg = _write(tmp_path, "main.tf", helpers.DEPLOYABLE)
    assert main(["reward", "--config", cfg, "--policy", policy, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["reward"] == 1.75
    assert main(["policy-eval", "--policy", policy, "--config", cfg]) == 1
    capsys.readouterr()
    passing = _write(tmp_path, "ok.json", helpers.k_of_n_policy(2, 2).to_json())
    assert main(["policy-eval", "--policy", passing, "--config", cfg]) == 0


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["validate"], ["validate", "missing.tf"], ["plan", "x", "--backend", "cloud"]])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_repair_needs_an_llm(tmp_path):
    assert main(["repair", _write(tmp_path, "m.tf", helpers.COMPILABLE_ONLY)]) == 2


def test_repair_from_replay_log(tmp_path, capsys):
    path = _write(tmp_path, "m.tf", helpers.COMPILABLE_ONLY)
    fixed = helpers.add_defaults(helpers.COMPILABLE_ONLY)
    log = tmp_path / "replay.jsonl"
    recorder = RecordingClient(ScriptedClient([f"<corrected_terraform_config>{fixed}</corrected_terraform_config>"]), log)
    run_repair_loop(helpers.COMPILABLE_ONLY, lambda a: plan_text(a)[0], recorder, slots=example_slots())
    out = tmp_path / "fixed.tf"
    code = main(["repair", path, "--replay", str(log), "--out", str(out), "--transcript", str(tmp_path / "t.json"), "--json"])
    assert code == 0
    assert json.loads(capsys.readouterr().out) == {"outcome": "REPAIRED", "turns_used": 1}
    assert validate_text(out.read_text())[0].passed
    assert json.loads((tmp_path / "t.json").read_text())["outcome"] == "REPAIRED"


def test_split_and_eval(tmp_path, capsys):
    policy = helpers.k_of_n_policy(1, 1)
    recs = [GenRecord(f"g{i}", "p", helpers.DEPLOYABLE, policy, f"r{i}", "m") for i in range(4)]
    write_jsonl(tmp_path / "tfgen.jsonl", recs)
    assert main(["split", str(tmp_path / "tfgen.jsonl"), "--test-size", "1", "--out", str(tmp_path / "s")]) == 0
    assert len(load_records(tmp_path / "s" / "tfgen.test.jsonl")) == 1
    (tmp_path / "cand.jsonl").write_text("".join(json.dumps({"id": r.id, "config": r.target}) + "\n" for r in recs))
    assert main(["eval", "--dataset", str(tmp_path / "tfgen.jsonl"), "--candidates", str(tmp_path / "cand.jsonl"),
                 "--out", str(tmp_path / "e")]) == 0
    assert "Correctness" in capsys.readouterr().out
    assert json.loads((tmp_path / "e" / "report.json").read_text())["correctness"] == 100.0


def test_mutation_stats(tmp_path, capsys):
    policy = helpers.k_of_n_policy(1, 1)
    recs = [MutnRecord(f"m{i}", "p", "a", "a" + "b" * d, policy, policy, f"r{i}", "m") for i, d in enumerate([10, 500, 5000])]
    write_jsonl(tmp_path / "tfmutn.jsonl", recs)
    assert main(["mutation-stats", str(tmp_path / "tfmutn.jsonl"), "--out", str(tmp_path / "o"), "--csv"]) == 0
    doc = json.loads((tmp_path / "o" / "complexity.json").read_text())
    assert doc["counts"] == {"Low": 1, "Medium": 1, "High": 1}
    assert (tmp_path / "o" / "distances.csv").read_text().splitlines()[0] == "id,distance,class"
