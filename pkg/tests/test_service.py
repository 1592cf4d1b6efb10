from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from eamix import __version__
from eamix.schemas import config_hash, parse_config
from eamix.service import app

client = TestClient(app)

ONEMAX_CFG = {
    "landscape": {"kind": "onemax", "n": 6},
    "operators": [
        {"name": "single", "kind": "single-bit-flip"},
        {"name": "heavy", "kind": "per-bit-flip", "p": 0.25},
    ],
    "strategies": [
        {"name": "pure-single", "operator": "single"},
        {"name": "uniform-mix", "mixture": "uniform"},
    ],
}

KNAPSACK_CFG = {
    "landscape": {"kind": "knapsack-example1", "n": 10},
    "operators": [
        {"name": "low", "kind": "per-bit-flip", "p": 0.1},
        {"name": "high", "kind": "per-bit-flip", "p": 0.9},
    ],
    "design": {"mode": "mutual"},
}

STAIRCASE16_OPS = {
    "landscape": {"kind": "staircase-example3", "n": 16},
    "operators": [
        {"name": "single", "kind": "single-bit-flip"},
        {"name": "per-bit", "kind": "per-bit-flip", "p": 0.0625},
    ],
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "package": "eamix", "version": __version__}


def test_analyze_endpoint():
    resp = client.post("/analyze", json=ONEMAX_CFG)
    assert resp.status_code == 200
    body = resp.json()
    assert body["command"] == "analyze"
    assert body["config_hash"] == config_hash(parse_config(ONEMAX_CFG))
    assert body["mode"] == "dense" and body["space"] == "states"
    assert [s["strategy"] for s in body["strategies"]] == ["pure-single", "uniform-mix"]
    for row in body["strategies"]:
        assert 0.0 < row["rho_T"] < 1.0
        assert row["traps"] == []


def test_analyze_infeasible_size():
    cfg = dict(ONEMAX_CFG, landscape={"kind": "knapsack-example1", "n": 25})
    resp = client.post("/analyze", json=cfg)
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "infeasible-size"
    assert "n=25" in body["message"] or "25" in body["message"]


def test_analyze_schema_error_is_422():
    resp = client.post("/analyze", json={"landscape": {"kind": "onemax", "n": 4}, "bogus": 1})
    assert resp.status_code == 422
    assert "detail" in resp.json()  # pydantic request validation, not a runner error


def test_analyze_runner_config_error():
    resp = client.post("/analyze", json={"landscape": {"kind": "onemax", "n": 4}})
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "config"
    assert "operator" in body["message"]


def test_design_endpoint_certificate_holds():
    resp = client.post("/design", json=KNAPSACK_CFG)
    assert resp.status_code == 200
    body = resp.json()
    assert body["command"] == "design"
    assert body["certificate"]["kind"] == "mutual"
    assert body["certificate"]["holds"] is True
    assert body["designed"] is not None
    assert body["designed"]["rho_T"] == pytest.approx(0.9612579502, abs=1e-9)
    assert body["dominance"]["holds"] is True
    assert [b["strategy"] for b in body["baselines"]] == ["low", "high"]
    assert len(body["forced_states"]) == 85


def test_design_endpoint_certificate_fails_is_200():
    cfg = dict(STAIRCASE16_OPS, design={"mode": "mutual"})
    resp = client.post("/design", json=cfg)
    assert resp.status_code == 200
    body = resp.json()
    assert body["certificate"]["holds"] is False
    assert body["designed"] is None and body["predicted_rho"] is None
    assert body["forced_states"] == [] and body["dominance"] is None
    assert [v["state"] for v in body["certificate"]["violations"]] == [7]
    assert len(body["baselines"]) == 2


def test_design_pairwise_staircase16():
    cfg = dict(STAIRCASE16_OPS, design={"mode": "pairwise"})
    resp = client.post("/design", json=cfg)
    assert resp.status_code == 200
    body = resp.json()
    assert body["certificate"]["holds"] is True
    assert body["space"] == "levels"
    assert [f["state"] for f in body["forced_states"]] == [1, 3, 5, 7]
    assert body["designed"]["rho_T"] == pytest.approx(0.9897414968392816, abs=1e-12)


def test_analyze_designed_mutual_fails_as_422():
    cfg = dict(
        STAIRCASE16_OPS,
        strategies=[{"name": "auto-mix", "mixture": "designed", "mode": "mutual"}],
    )
    resp = client.post("/analyze", json=cfg)
    assert resp.status_code == 422
    assert resp.json()["code"] == "certificate-failed"


def test_simulate_endpoint_with_query_overrides():
    resp = client.post("/simulate", json=ONEMAX_CFG, params={"runs": 5, "seed": 3, "max_generations": 100000})
    assert resp.status_code == 200
    body = resp.json()
    assert body["command"] == "simulate"
    assert body["runs"] == 5 and body["seed"] == 3
    assert body["max_generations"] == 100000
    assert len(body["run_rows"]) == 10
    for row in body["strategies"]:
        assert row["censored"] == 0
        assert row["agree"] is True


def test_curve_endpoint_default_grid():
    resp = client.post("/curve", json={"landscape": {"kind": "onemax", "n": 4}})
    assert resp.status_code == 200
    body = resp.json()
    assert body["command"] == "curve"
    assert len(body["rows"]) == 50
    assert body["all_within"] is True
    assert body["rows"][0]["rho"] == 0.5
    assert body["rows"][-1]["rho"] == 0.99
    for row in body["rows"]:
        assert 1.0 < row["product"] < 1.5
