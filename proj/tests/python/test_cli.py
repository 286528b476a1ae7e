import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("FLOWLAB_CLI")
CONFIGS = Path(os.environ.get("FLOWLAB_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))

pytestmark = pytest.mark.skipif(not CLI, reason="FLOWLAB_CLI not set")


def run(*args, **kw):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, **kw)


def test_list_presets():
    r = run("list-presets")
    assert r.returncode == 0
    assert "step-drift-1d" in r.stdout


def test_audit_passes(tmp_path):
    r = run("run", CONFIGS / "audit_example1.json", "--out-dir", tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["verdict"] == "pass"
    assert report["exit_code"] == 0
    assert (tmp_path / "provenance.json").exists()


def test_unknown_preset_is_a_config_error(tmp_path):
    r = run("run", CONFIGS / "unknown_preset.json", "--out-dir", tmp_path)
    assert r.returncode == 3
    assert "lorenz" in r.stderr


def test_malformed_config_names_the_line(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "version": 1,\n  "kind": "audit",\n  oops\n}\n')
    r = run("run", bad, "--out-dir", tmp_path / "out")
    assert r.returncode == 3
    assert "line 4" in r.stderr


def test_unknown_field_is_rejected(tmp_path):
    cfg = json.loads((CONFIGS / "audit_example1.json").read_text())
    cfg["simulaton"] = {}
    path = tmp_path / "typo.json"
    path.write_text(json.dumps(cfg))
    r = run("run", path, "--out-dir", tmp_path / "out")
    assert r.returncode == 3
    assert "simulaton" in r.stderr


def test_failing_expectation_exits_one(tmp_path):
    cfg = json.loads((CONFIGS / "taming_example1.json").read_text())
    cfg["simulation"]["paths"] = 200
    cfg["params"]["expect"] = {"tamed-euler": "explodes"}
    cfg["params"]["schemes"] = ["tamed-euler"]
    path = tmp_path / "fail.json"
    path.write_text(json.dumps(cfg))
    r = run("run", path, "--out-dir", tmp_path / "out")
    assert r.returncode == 1, r.stderr


def test_unresolved_hitting_exits_two(tmp_path):
    cfg = json.loads((CONFIGS / "girsanov_bm1.json").read_text())
    cfg["simulation"].update({"paths": 100, "dt": 0.01})
    cfg["params"].update({"y0": 10, "a": 0.1, "method": "naive"})
    path = tmp_path / "far.json"
    path.write_text(json.dumps(cfg))
    r = run("run", path, "--out-dir", tmp_path / "out")
    assert r.returncode == 2, r.stderr


def test_report_is_thread_independent(tmp_path):
    cfg = CONFIGS / "witness_example1.json"
    a = run("run", cfg, "--paths-override", 256, "--threads", 1, "--out-dir", tmp_path / "a")
    b = run("run", cfg, "--paths-override", 256, "--threads", 8, "--out-dir", tmp_path / "b")
    assert a.returncode == b.returncode
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_plot_rerenders(tmp_path):
    cfg = json.loads((CONFIGS / "taming_example1.json").read_text())
    cfg["simulation"]["paths"] = 100
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    assert run("run", path, "--out-dir", tmp_path / "out").returncode in (0, 1)
    svgs = sorted(p.name for p in (tmp_path / "out").glob("*.svg"))
    assert svgs
    r = run("plot", tmp_path / "out" / "report.json", "--out-dir", tmp_path / "re")
    assert r.returncode == 0, r.stderr
    for name in svgs:
        assert (tmp_path / "re" / name).read_bytes() == (tmp_path / "out" / name).read_bytes()
