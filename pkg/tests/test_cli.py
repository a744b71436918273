import csv
import io
import json

import pytest

from safla.cli import parse_grid, run
from safla.flowmodel import serialize_flow_tables
from safla.intentstore import save_repository
from safla.nskg import dump_nskg
from safla.simnet import ScenarioSpec, build_scenario, inject_hijack


@pytest.fixture
def files(tmp_path):
    net, I = build_scenario(ScenarioSpec({"kind": "Star", "hosts": 6}, 4, seed=1))
    paths = {"topology": tmp_path / "topo.json", "tables": tmp_path / "tables.json",
             "intents": tmp_path / "intents.json", "state": tmp_path / "state.json"}
    paths["topology"].write_bytes(dump_nskg(net.nskg))
    paths["tables"].write_bytes(serialize_flow_tables(net.all_tables()))
    paths["intents"].write_bytes(save_repository(I))
    inject_hijack(net, I, 25, 1)
    paths["state"].write_text(json.dumps(net.to_obj()))
    paths["hijacked_tables"] = tmp_path / "hijacked.json"
    paths["hijacked_tables"].write_bytes(serialize_flow_tables(net.all_tables()))
    return {k: str(v) for k, v in paths.items()}


def test_grid():
    assert parse_grid("10..100", 10) == list(range(10, 101, 10))
    assert parse_grid("1,50,100") == [1, 50, 100]


def test_extract(files, capsys):
    assert run(["extract", "--tables", files["tables"], "--topology", files["topology"]]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["G"]) == 4 and out["diagnostics"] == []


def test_check_consistent(files, capsys):
    code = run(["check", "--tables", files["tables"], "--topology", files["topology"],
                "--intents", files["intents"]])
    assert code == 0 and json.loads(capsys.readouterr().out)["consistent"] is True


def test_check_inconsistent(files, capsys):
    code = run(["check", "--tables", files["hijacked_tables"], "--topology", files["topology"],
                "--intents", files["intents"]])
    rep = json.loads(capsys.readouterr().out)
    assert code == 2 and rep["extraneous"] and rep["missing"]


def test_check_error_exit(files, capsys):
    assert run(["check", "--tables", files["tables"]]) == 1
    assert "missing" in capsys.readouterr().err
    assert run(["check", "--tables", "/nonexistent", "--topology", files["topology"],
                "--intents", files["intents"]]) == 1


def test_remediate(files, tmp_path, capsys):
    out = tmp_path / "state2.json"
    assert run(["remediate", "--state", files["state"], "--intents", files["intents"],
                "--state-out", str(out)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["applied"] and rep["post_check"]["consistent"]
    assert run(["remediate", "--state", str(out), "--intents", files["intents"]]) == 0
    assert json.loads(capsys.readouterr().out)["applied"] is False


def test_assure_no_faults_no_mutations(files, capsys):
    assert run(["assure", "--tables", files["tables"], "--topology", files["topology"],
                "--intents", files["intents"], "--cycles", "3"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [l["cycle"] for l in lines] == [0, 1, 2]
    assert all(not l["applied"] and l["steps"] == [] for l in lines)


def test_sim_run(tmp_path, capsys):
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"name": "demo", "topology": {"kind": "Star", "hosts": 11},
                                "intents": 9, "faults": [{"kind": "Hijack", "intensity": 30, "at": 1}],
                                "steps": 3}))
    figs = tmp_path / "figs"
    log = tmp_path / "log.jsonl"
    args = ["sim", "run", "--scenario", str(scen), "--seed", "4", "--log", str(log),
            "--figures", str(figs)]
    assert run(args) == 0
    first = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(first)))
    assert list(rows[0]) == ["scenario", "seed", "step", "metric", "value"]
    assert {r["seed"] for r in rows} == {"4"}
    assert (figs / "demo_timeline.png").stat().st_size > 0
    assert log.read_text()
    run(args)
    assert capsys.readouterr().out == first


def test_bench_extraction_rows(capsys):
    assert run(["bench", "extraction", "--intents", "10..100", "--step", "10", "--repeat", "1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [int(r["intents"]) for r in rows] == list(range(10, 101, 10))


def test_bench_recovery_rows(capsys, tmp_path):
    assert run(["bench", "recovery", "--switches", "1,50,100,200,400", "--intents", "60",
                "--repeat", "1", "--figures", str(tmp_path)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [int(r["switches"]) for r in rows] == [1, 50, 100, 200, 400]
    assert (tmp_path / "bench_recovery.png").exists()


def test_sweep_json(capsys, tmp_path):
    assert run(["sim", "sweep", "--experiment", "completeness", "--seeds", "1",
                "--format", "json", "--figures", str(tmp_path)]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["completeness"] for r in rows] == [40, 50, 60, 70, 80, 90, 100]
    assert (tmp_path / "survival_vs_completeness.png").exists()


def test_usage_error():
    assert run(["frobnicate"]) == 1
