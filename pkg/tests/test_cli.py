from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from eamix.cli import EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_INFEASIBLE, main

REPO = Path(__file__).resolve().parent.parent

SMALL_CFG = {
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


@pytest.fixture()
def runner():
    return CliRunner()


def write_cfg(tmp_path: Path, data: dict) -> str:
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_analyze_writes_reports(tmp_path, runner):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    out = tmp_path / "out"
    result = runner.invoke(main, ["analyze", "--config", cfg, "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "report.json").exists() and (out / "report.csv").exists()
    assert "pure-single: rho_T=" in result.output
    payload = json.loads((out / "report.json").read_text())
    assert payload["command"] == "analyze"
    assert [s["strategy"] for s in payload["strategies"]] == ["pure-single", "uniform-mix"]


def test_invalid_config_exit_2(tmp_path, runner):
    cfg = write_cfg(tmp_path, dict(SMALL_CFG, bogus_field=1))
    result = runner.invoke(main, ["analyze", "--config", cfg, "--out", str(tmp_path / "o")])
    assert result.exit_code == EXIT_CONFIG
    assert "config error" in result.stderr


def test_missing_config_exit_2(tmp_path, runner):
    result = runner.invoke(main, ["analyze", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")])
    assert result.exit_code == EXIT_CONFIG
    assert "cannot read config" in result.stderr


def test_broken_yaml_exit_2(tmp_path, runner):
    path = tmp_path / "broken.yaml"
    path.write_text("landscape: [unclosed\n")
    result = runner.invoke(main, ["analyze", "--config", str(path), "--out", str(tmp_path / "o")])
    assert result.exit_code == EXIT_CONFIG
    assert "not valid YAML" in result.stderr


def test_infeasible_size_exit_3(tmp_path, runner):
    cfg = write_cfg(tmp_path, dict(SMALL_CFG, landscape={"kind": "onemax", "n": 21}))
    result = runner.invoke(main, ["analyze", "--config", cfg, "--out", str(tmp_path / "o")])
    assert result.exit_code == EXIT_INFEASIBLE
    assert "infeasible size" in result.stderr


def test_design_success_exit_0(tmp_path, runner):
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        ["design", "--config", str(REPO / "configs" / "example1-knapsack.yaml"), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "certificate[mutual]: holds" in result.output
    assert "designed designed: rho_T=" in result.output
    rows = list(csv.reader((out / "report.csv").read_text().splitlines()))
    assert [r[0] for r in rows[1:]] == ["low-rate", "high-rate", "designed"]


def test_design_certificate_failure_exit_4(tmp_path, runner):
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        ["design", "--config", str(REPO / "configs" / "example3-staircase.yaml"), "--out", str(out)],
    )
    assert result.exit_code == EXIT_CERTIFICATE
    assert "certificate[mutual]: FAILS" in result.output
    assert "unrescued state 7" in result.output
    # The report is still written so the failure is inspectable.
    payload = json.loads((out / "report.json").read_text())
    assert payload["certificate"]["holds"] is False
    assert payload["designed"] is None


def test_simulate_with_overrides(tmp_path, runner):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "simulate", "--config", cfg, "--out", str(out),
            "--runs", "5", "--seed", "9", "--max-gens", "500", "--workers", "2",
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((out / "report.json").read_text())
    assert payload["runs"] == 5 and payload["seed"] == 9
    assert payload["max_generations"] == 500
    rows = list(csv.reader((out / "runs.csv").read_text().splitlines()))
    assert len(rows) == 1 + 2 * 5
    assert "uncensored=" in result.output


def test_curve_command(tmp_path, runner):
    cfg = write_cfg(tmp_path, dict(SMALL_CFG, curve={"rho_min": 0.5, "rho_max": 0.99, "step": 0.01}))
    out = tmp_path / "out"
    result = runner.invoke(main, ["curve", "--config", cfg, "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "50 grid points" in result.output
    assert "yes" in result.output
    assert (out / "curve.csv").exists()


def test_unreachable_server_exit_2(tmp_path, runner):
    cfg = write_cfg(tmp_path, SMALL_CFG)
    result = runner.invoke(
        main,
        ["analyze", "--config", cfg, "--out", str(tmp_path / "o"), "--server", "http://127.0.0.1:1"],
    )
    assert result.exit_code == EXIT_CONFIG
    assert "cannot reach server" in result.stderr
