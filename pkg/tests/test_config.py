from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from eamix.errors import ConfigError
from eamix.report import (
    ANALYZE_HEADER,
    CURVE_HEADER,
    RUNS_HEADER,
    analyze_csv_bytes,
    encode_num,
    to_json_bytes,
    write_bundle,
)
from eamix.report import _cell
from eamix.runner import run_analyze, run_curve, run_simulate
from eamix.schemas import CurveOptions, ExperimentConfig, config_hash, parse_config

BASE_CFG = {
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


def base_cfg(**overrides) -> dict:
    cfg = json.loads(json.dumps(BASE_CFG))
    cfg.update(overrides)
    return cfg


def test_parse_minimal_defaults():
    cfg = parse_config({"landscape": {"kind": "onemax", "n": 4}})
    assert cfg.operators == [] and cfg.strategies == []
    assert cfg.analyze.mode == "auto" and cfg.analyze.init == "uniform"
    assert cfg.simulate.runs == 100 and cfg.simulate.seed == 12345
    assert cfg.simulate.max_generations == 10_000_000 and cfg.simulate.workers == 1
    assert cfg.simulate.cross_validate is True
    assert cfg.design.mode == "mutual" and cfg.design.name == "designed"
    assert (cfg.curve.rho_min, cfg.curve.rho_max, cfg.curve.step) == (0.5, 0.99, 0.01)


def test_parse_rejects_non_mapping_and_unknown_fields():
    with pytest.raises(ConfigError):
        parse_config([1, 2])
    with pytest.raises(ConfigError, match="invalid config"):
        parse_config({"landscape": {"kind": "onemax", "n": 4}, "typo_field": 1})
    with pytest.raises(ConfigError, match="landscape"):
        parse_config({})


def test_operator_p_rules():
    def cfg_with_op(op):
        return {"landscape": {"kind": "onemax", "n": 4}, "operators": [op]}

    for bad in [
        {"name": "a", "kind": "per-bit-flip"},
        {"name": "a", "kind": "per-bit-flip", "p": 0.0},
        {"name": "a", "kind": "per-bit-flip", "p": 1.0},
        {"name": "a", "kind": "single-bit-flip", "p": 0.5},
        {"name": "", "kind": "single-bit-flip"},
        {"name": "a", "kind": "two-bit-flip"},
    ]:
        with pytest.raises(ConfigError):
            parse_config(cfg_with_op(bad))
    parse_config(cfg_with_op({"name": "a", "kind": "per-bit-flip", "p": 0.5}))


def test_strategy_exactly_one_rule():
    for bad in [
        {"name": "s"},
        {"name": "s", "operator": "single", "mixture": "uniform"},
        {"name": "s", "operator": "single", "free_rule": "uniform"},
        {"name": "s", "mixture": "uniform", "free_rule": "single"},
    ]:
        with pytest.raises(ConfigError):
            parse_config(base_cfg(strategies=[bad]))
    parse_config(base_cfg(strategies=[{"name": "s", "mixture": "designed", "free_rule": "single"}]))


def test_cross_reference_validation():
    with pytest.raises(ConfigError, match="unique"):
        parse_config(
            base_cfg(
                operators=[
                    {"name": "same", "kind": "single-bit-flip"},
                    {"name": "same", "kind": "per-bit-flip", "p": 0.1},
                ],
                strategies=[],
            )
        )
    with pytest.raises(ConfigError, match="unique"):
        parse_config(
            base_cfg(strategies=[{"name": "s", "operator": "single"}, {"name": "s", "operator": "heavy"}])
        )
    with pytest.raises(ConfigError, match="unknown operator"):
        parse_config(base_cfg(strategies=[{"name": "s", "operator": "ghost"}]))
    with pytest.raises(ConfigError, match="unknown operator"):
        parse_config(base_cfg(strategies=[{"name": "s", "mixture": {"weights": {"ghost": 1.0}}}]))
    with pytest.raises(ConfigError, match="state keys"):
        parse_config(
            base_cfg(
                strategies=[
                    {"name": "s", "mixture": {"weights": {"single": 1.0}, "states": {"x1": {"single": 1.0}}}}
                ]
            )
        )
    with pytest.raises(ConfigError, match="unknown operator"):
        parse_config(
            base_cfg(
                strategies=[
                    {"name": "s", "mixture": {"weights": {"single": 1.0}, "states": {"3": {"ghost": 1.0}}}}
                ]
            )
        )
    with pytest.raises(ConfigError, match="design references"):
        parse_config(base_cfg(design={"operators": ["single", "ghost"]}))
    with pytest.raises(ConfigError, match="repeat"):
        parse_config(base_cfg(design={"operators": ["single", "single"]}))
    with pytest.raises(ConfigError, match="free_rule"):
        parse_config(base_cfg(design={"free_rule": "ghost"}))
    with pytest.raises(ConfigError, match="unknown strategy"):
        parse_config(base_cfg(simulate={"strategies": ["ghost"]}))
    parse_config(base_cfg(simulate={"strategies": ["pure-single"]}))


def test_curve_grid_validation():
    with pytest.raises(ValueError):
        CurveOptions(rho_min=0.0, rho_max=0.9)
    with pytest.raises(ValueError):
        CurveOptions(rho_min=0.5, rho_max=1.0)
    with pytest.raises(ValueError):
        CurveOptions(rho_min=0.9, rho_max=0.5)
    with pytest.raises(ValueError):
        CurveOptions(rho_min=0.5, rho_max=0.9, step=0.0)
    CurveOptions(rho_min=0.5, rho_max=0.5, step=0.25)


def test_config_hash_properties():
    cfg = parse_config(base_cfg())
    assert config_hash(cfg) == config_hash(parse_config(base_cfg()))
    assert len(config_hash(cfg)) == 64

    with_workers = base_cfg()
    with_workers["simulate"] = {"workers": 8}
    assert config_hash(parse_config(with_workers)) == config_hash(cfg)

    with_seed = base_cfg()
    with_seed["simulate"] = {"seed": 999}
    assert config_hash(parse_config(with_seed)) != config_hash(cfg)

    cfg2 = parse_config(base_cfg(landscape={"kind": "onemax", "n": 7}))
    assert config_hash(cfg2) != config_hash(cfg)


def test_config_round_trip():
    cfg = parse_config(base_cfg())
    again = parse_config(cfg.model_dump(mode="json"))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_init_spec_forms():
    cfg = parse_config(base_cfg(analyze={"init": {"state": 3}}))
    assert cfg.analyze.init.state == 3
    cfg = parse_config(base_cfg(analyze={"init": {"probs": [0.5, 0.5]}}))
    assert cfg.analyze.init.probs == [0.5, 0.5]
    with pytest.raises(ConfigError):
        parse_config(base_cfg(analyze={"init": "gaussian"}))
    with pytest.raises(ConfigError):
        parse_config(base_cfg(analyze={"init": {"state": -1}}))


def test_encode_num_rules():
    assert encode_num(None) is None
    assert encode_num(3) == 3 and isinstance(encode_num(np.int64(3)), int)
    assert encode_num(2.5) == 2.5
    assert encode_num(math.inf) == "inf"
    assert encode_num(-math.inf) == "-inf"
    assert encode_num(math.nan) == "nan"
    with pytest.raises(TypeError):
        encode_num(True)
    with pytest.raises(TypeError):
        encode_num(np.bool_(False))


def test_cell_rules():
    assert _cell("inf") == "inf"
    assert _cell(True) == "1" and _cell(False) == "0"
    assert _cell(7) == "7"
    assert _cell(0.1) == repr(0.1) == "0.1"
    assert _cell(1.0 / 3.0) == "0.3333333333333333"
    assert _cell([1, 2, 3]) == "1;2;3"
    assert _cell([]) == ""
    assert _cell(None) == ""
    with pytest.raises(TypeError):
        _cell({"a": 1})


def test_analyze_bundle_json_csv_correspondence(tmp_path):
    cfg = parse_config(base_cfg())
    bundle = run_analyze(cfg)
    assert bundle.command == "analyze"
    assert bundle.config_hash == config_hash(cfg)
    assert bundle.mode == "dense" and bundle.space == "states"

    paths = write_bundle(bundle, tmp_path)
    assert [p.name for p in paths] == ["report.json", "report.csv"]
    payload = json.loads(paths[0].read_text())
    rows = list(csv.reader(paths[1].read_text().splitlines()))
    assert rows[0] == ANALYZE_HEADER
    assert len(rows) == 1 + len(payload["strategies"])
    for csv_row, js in zip(rows[1:], payload["strategies"]):
        assert csv_row[0] == js["strategy"]
        for pos, key in enumerate(ANALYZE_HEADER[1:-1], start=1):
            value = js[key]
            expected = value if isinstance(value, str) else repr(float(value))
            assert csv_row[pos] == expected
        assert csv_row[-1] == ";".join(str(t) for t in js["traps"])
    # onemax has no traps and every number is finite.
    for js in payload["strategies"]:
        assert js["traps"] == []
        assert isinstance(js["rho_T"], float)
        assert js["power_iteration"] is None or js["power_iteration"]["converged"]
        assert len(js["m_vector"]) == 63


def test_infinite_values_travel_as_strings(tmp_path):
    cfg = parse_config(
        {
            "landscape": {"kind": "staircase-example3", "n": 8},
            "operators": [{"name": "single", "kind": "single-bit-flip"}],
            "strategies": [{"name": "pure-single", "operator": "single"}],
        }
    )
    bundle = run_analyze(cfg)
    row = bundle.strategies[0]
    assert row.hitting_T == "inf" and row.m_max == "inf"
    assert row.rate_time_product is None
    assert len(row.traps) == 64
    text = to_json_bytes(bundle).decode()
    assert '"hitting_T": "inf"' in text
    paths = write_bundle(bundle, tmp_path)
    rows = list(csv.reader(paths[1].read_text().splitlines()))
    assert rows[1][ANALYZE_HEADER.index("hitting_T")] == "inf"


def test_json_bytes_deterministic():
    cfg = parse_config(base_cfg())
    a = to_json_bytes(run_analyze(cfg))
    b = to_json_bytes(run_analyze(cfg))
    assert a == b
    assert a.endswith(b"\n")
    assert json.loads(a)["command"] == "analyze"


def test_simulate_bundle_and_runs_csv(tmp_path):
    cfg = parse_config(base_cfg())
    bundle = run_simulate(cfg, runs=5, seed=3, max_generations=10**5)
    assert bundle.command == "simulate"
    assert bundle.seed == 3 and bundle.runs == 5
    assert "pcg64" in bundle.rng_scheme
    assert len(bundle.run_rows) == 10  # 2 strategies x 5 runs
    for srow in bundle.strategies:
        assert srow.censored == 0
        assert srow.agree is True and isinstance(srow.z, float)
    paths = write_bundle(bundle, tmp_path)
    assert [p.name for p in paths] == ["report.json", "runs.csv"]
    rows = list(csv.reader(paths[1].read_text().splitlines()))
    assert rows[0] == RUNS_HEADER
    assert len(rows) == 11
    assert {r[0] for r in rows[1:]} == {"pure-single", "uniform-mix"}
    assert all(r[4] == "0" for r in rows[1:])


def test_curve_bundle_and_csv(tmp_path):
    cfg = parse_config(base_cfg(curve={"rho_min": 0.5, "rho_max": 0.6, "step": 0.05}))
    bundle = run_curve(cfg)
    assert bundle.command == "curve"
    assert [r.rho for r in bundle.rows] == [0.5, 0.55, 0.6]
    assert bundle.all_within
    paths = write_bundle(bundle, tmp_path)
    assert [p.name for p in paths] == ["report.json", "curve.csv"]
    rows = list(csv.reader(paths[1].read_text().splitlines()))
    assert rows[0] == CURVE_HEADER
    assert rows[1][0] == "0.5"
    assert rows[1][1] == repr(-math.log(0.5))
    assert rows[1][3] == repr(-math.log(0.5) * 2.0)


def test_design_csv_includes_baselines_and_designed():
    cfg = parse_config(
        {
            "landscape": {"kind": "knapsack-example1", "n": 10},
            "operators": [
                {"name": "low", "kind": "per-bit-flip", "p": 0.1},
                {"name": "high", "kind": "per-bit-flip", "p": 0.9},
            ],
            "design": {"mode": "mutual", "name": "rescue-mix"},
        }
    )
    from eamix.runner import run_design

    bundle = run_design(cfg)
    assert bundle.certificate.holds
    assert bundle.designed is not None and bundle.designed.strategy == "rescue-mix"
    rows = list(csv.reader(analyze_csv_bytes(bundle).decode().splitlines()))
    assert [r[0] for r in rows[1:]] == ["low", "high", "rescue-mix"]
