import hashlib
import json
import shutil
import subprocess
import sys

import pytest

from ptosched import pipeline
from ptosched.cli import main


def _write_cfg(tmp_path, **sections):
    path = tmp_path / "cfg.json"
    d = {"out": str(tmp_path / "out"), "evaluation": {"start": "2024-03", "n_months": 1}}
    for k, v in sections.items():
        d.setdefault(k, {}).update(v)
    path.write_text(json.dumps(d))
    return path


def _digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_print_config_lists_every_default(capsys):
    assert main(["run", "--print-config"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert set(d) == {"out", "sim", "classifier", "predictor", "optimizer", "evaluation"}
    assert d["sim"]["seed"] == 42 and d["sim"]["n_clinicians"] == 10
    assert d["evaluation"]["n_months"] == 6


def test_overrides_reach_effective_config(capsys, tmp_path):
    assert main(["run", "--print-config", "--seed", "7", "--months", "2024-01..2024-04",
                 "--out", str(tmp_path)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["sim"]["seed"] == 7 and d["out"] == str(tmp_path)
    assert d["evaluation"] == {**d["evaluation"], "start": "2024-01", "n_months": 4}


def test_printed_config_round_trips(capsys, tmp_path):
    main(["run", "--print-config"])
    path = tmp_path / "c.json"
    path.write_text(capsys.readouterr().out)
    assert pipeline.load_config(path).to_dict() == pipeline.PipelineConfig().to_dict()


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sim": {"note_rate": 3}}))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"
    assert main(["simulate", "--months", "2024-05..2024-01"]) == 2
    bad.write_text("{ not json")
    assert main(["simulate", "--config", str(bad)]) == 2


def test_missing_upstream_artifacts_exit_4(tmp_path, capsys):
    assert main(["evaluate", "--out", str(tmp_path / "empty")]) == 4
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "dependency" and "simulate" in err["message"]


def test_evaluate_without_optimize_names_the_missing_stage(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert main(["evaluate", "--config", str(cfg)]) == 4
    assert "optimize" in json.loads(capsys.readouterr().err)["message"]


def test_infeasible_instance_exits_3(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, sim={"cfte_range": [0.05, 0.06]})
    assert main(["run", "--config", str(cfg)]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "infeasible"
    assert err["report"][0]["condition"] == "capacity_below_demand"
    # stages before the failure kept their artifacts; the failed stage left nothing behind
    out = tmp_path / "out"
    assert (out / "predict").is_dir()
    assert not (out / "optimize").exists()
    assert not list(out.rglob("*.partial"))


def test_single_month_run_and_stage_idempotence(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "optimize" / "2024-03.csv").is_file()
    assert (out / "config.effective.json").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(pipeline.STAGES) <= set(manifest["stages"])
    first = _digest(out)
    assert main(["optimize", "--config", str(cfg)]) == 0
    assert main(["evaluate", "--config", str(cfg)]) == 0
    assert _digest(out) == first
    # deleting a downstream stage does not disturb upstream ones
    shutil.rmtree(out / "evaluate")
    assert main(["evaluate", "--config", str(cfg)]) == 0
    assert _digest(out) == first


def test_rerun_from_effective_config_reproduces(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    eff = json.loads((out / "config.effective.json").read_text())
    eff["out"] = str(tmp_path / "again")
    again = tmp_path / "again.json"
    again.write_text(json.dumps(eff))
    assert main(["run", "--config", str(again)]) == 0
    strip = lambda root: {str(p.relative_to(root)): p.read_bytes() for p in root.rglob("*")
                          if p.is_file() and p.name not in ("manifest.json", "config.effective.json")}
    assert strip(out) == strip(tmp_path / "again")


@pytest.mark.skipif(shutil.which("pto-sched") is None, reason="console script not installed")
def test_console_script_entry_point():
    res = subprocess.run(["pto-sched", "simulate", "--print-config"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["sim"]["seed"] == 42
    res = subprocess.run([sys.executable, "-m", "ptosched.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "optimize" in res.stdout
