import json
import math

import numpy as np
import pytest

import flowlab


def test_presets_listed():
    ids = flowlab.preset_ids()
    assert "bm(d)" in ids and "ou(d)" in ids and "example1(beta)" in ids
    assert "example1" in flowlab.preset_table()


def test_example1_drift_value():
    assert flowlab.drift("example1(0.4)", 0.0, [2.0]) == [-33.0]


def test_unknown_preset_raises():
    with pytest.raises(ValueError, match="preset_not_found"):
        flowlab.drift("lorenz(3)", 0.0, [0.0])


def test_philox_known_answer():
    assert flowlab.philox4x32([0, 0, 0, 0], [0, 0]) == [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]


def test_ou_mean_and_variance():
    out = flowlab.simulate("ou(1)", [1.0], dt=1e-3, horizon=1.0, paths=4000, seed=3, record_stride=100)
    x = out["states"][:, -1, 0]
    assert out["states"].shape == (4000, 11, 1)
    assert not out["exploded"].any()
    mean, var = math.exp(-1.0), (1 - math.exp(-2.0)) / 2
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / x.size) + 1e-3
    assert abs(x.var(ddof=1) - var) < 0.05 * var


def test_audits_pass_for_example1():
    assert all(r["pass"] for r in flowlab.audit("example1(0.4)"))


def test_girsanov_without_steering_matches_naive():
    naive = flowlab.hitting_probability("bm(1)", [0.0], [0.0], 1.0, T=1.0, paths=2000, seed=9)
    weighted = flowlab.girsanov_hitting("bm(1)", [0.0], [0.0], 1.0, T=1.0, m=0.0, N=10.0, paths=2000, seed=9)
    assert naive["p_hat"] == weighted["p_hat"]


def test_maximal_function_of_constant():
    assert flowlab.maximal_function([2.0] * 11, 0.1, 0.3) == [2.0] * 11


def test_run_experiment_deterministic_across_threads():
    config = {
        "version": 1,
        "kind": "markov",
        "problem": {"preset": "bm(1)"},
        "simulation": {"dt": 0.01, "horizon": 1, "paths": 500, "seed": 2},
        "params": {"mode": "hitting", "x0": 0, "y0": 0, "a": 1, "method": "naive"},
    }
    flowlab.set_threads(1)
    a = flowlab.run_experiment(config)
    flowlab.set_threads(4)
    b = flowlab.run_experiment(json.dumps(config))
    flowlab.set_threads(0)
    assert a["report_json"] == b["report_json"]
    assert a["report"]["verdict"] == "pass"
    assert a["exit_code"] == 0


def test_run_experiment_rejects_unknown_field():
    with pytest.raises(ValueError, match="params.bogus"):
        flowlab.run_experiment({"version": 1, "kind": "audit", "problem": {"preset": "bm(1)"}, "params": {"bogus": 1}})
