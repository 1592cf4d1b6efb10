"""Command-line interface.

Each workflow command reads a YAML config and writes a report directory. By
default the runner executes in-process; --server posts the same config to a
running service instead, so the CLI stays a thin client of the same contract.

Exit codes: 0 success, 2 config error, 3 infeasible size, 4 certificate
failed, 5 internal consistency-check violation, 1 anything unexpected.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx
import yaml

from .errors import ComplementarityError, ConfigError, InfeasibleSizeError, TheoremCheckError
from .report import write_bundle
from .runner import run_analyze, run_curve, run_design, run_simulate
from .schemas import (
    AnalyzeBundle,
    Bundle,
    CurveBundle,
    DesignBundle,
    ExperimentConfig,
    SimulateBundle,
    parse_config,
)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_CERTIFICATE = 4
EXIT_THEOREM = 5

_BUNDLES = {
    "analyze": AnalyzeBundle,
    "simulate": SimulateBundle,
    "design": DesignBundle,
    "curve": CurveBundle,
}


def _load_config(path: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data)


def _remote(server: str, command: str, cfg: ExperimentConfig, params: dict | None = None) -> Bundle:
    url = server.rstrip("/") + "/" + command
    query = {k: v for k, v in (params or {}).items() if v is not None}
    try:
        resp = httpx.post(url, json=cfg.model_dump(mode="json"), params=query, timeout=600.0)
    except httpx.HTTPError as exc:
        raise ConfigError(f"cannot reach server {server}: {exc}") from exc
    if resp.status_code == 200:
        return _BUNDLES[command].model_validate(resp.json())
    try:
        body = resp.json()
    except ValueError:
        body = {}
    code = body.get("code", "")
    message = body.get("message", resp.text)
    if code == "config":
        raise ConfigError(message)
    if code == "infeasible-size":
        raise InfeasibleSizeError(message)
    if code == "certificate-failed":
        raise ComplementarityError(message)
    if code == "theorem-violation":
        raise TheoremCheckError(message)
    raise RuntimeError(f"server returned {resp.status_code}: {message}")


def _emit(bundle: Bundle, out: str) -> None:
    for path in write_bundle(bundle, out):
        click.echo(f"wrote {path}")


def _execute(fn) -> None:
    try:
        code = fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except InfeasibleSizeError as exc:
        click.echo(f"infeasible size: {exc}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    except ComplementarityError as exc:
        click.echo(f"certificate failed: {exc}", err=True)
        sys.exit(EXIT_CERTIFICATE)
    except TheoremCheckError as exc:
        click.echo(f"consistency check violated: {exc}", err=True)
        sys.exit(EXIT_THEOREM)
    except Exception as exc:  # pragma: no cover - last-resort mapping
        click.echo(f"unexpected error: {exc}", err=True)
        sys.exit(1)
    sys.exit(code or 0)


config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(), help="YAML experiment config."
)
out_option = click.option(
    "--out", "out_dir", default="eamix-out", show_default=True, help="Report output directory."
)
server_option = click.option(
    "--server", default=None, help="Base URL of a running service; runs remotely when set."
)


@click.group()
def main() -> None:
    """Exact Markov-chain analysis and Monte Carlo validation of elitist (1+1)
    evolutionary algorithms with mixed mutation strategies."""


@main.command()
@config_option
@out_option
@server_option
def analyze(config_path: str, out_dir: str, server: str | None) -> None:
    """Exact radius, rate, and hitting times for each configured strategy."""

    def work() -> int:
        cfg = _load_config(config_path)
        bundle = _remote(server, "analyze", cfg) if server else run_analyze(cfg)
        _emit(bundle, out_dir)
        for row in bundle.strategies:
            click.echo(
                f"{row.strategy}: rho_T={row.rho_T} rate_R={row.rate_R} hitting_T={row.hitting_T}"
            )
        return 0

    _execute(work)


@main.command()
@config_option
@out_option
@server_option
@click.option("--runs", type=int, default=None, help="Override simulate.runs from the config.")
@click.option("--seed", type=int, default=None, help="Override simulate.seed from the config.")
@click.option("--max-gens", type=int, default=None, help="Override simulate.max_generations.")
@click.option(
    "--workers",
    type=int,
    default=None,
    help="Override simulate.workers; results are identical for any worker count.",
)
def simulate(
    config_path: str,
    out_dir: str,
    server: str | None,
    runs: int | None,
    seed: int | None,
    max_gens: int | None,
    workers: int | None,
) -> None:
    """Monte Carlo runs per strategy, cross-validated against the exact chain."""

    def work() -> int:
        cfg = _load_config(config_path)
        if workers is not None:
            cfg = cfg.model_copy(deep=True)
            cfg.simulate.workers = workers
        if server:
            bundle = _remote(
                server, "simulate", cfg, {"runs": runs, "seed": seed, "max_generations": max_gens}
            )
        else:
            bundle = run_simulate(cfg, runs=runs, seed=seed, max_generations=max_gens)
        _emit(bundle, out_dir)
        for row in bundle.strategies:
            agree = "" if row.agree is None else f" z={row.z} agree={'yes' if row.agree else 'NO'}"
            click.echo(
                f"{row.strategy}: uncensored={row.uncensored}/{row.runs} "
                f"mean={row.mean_uncensored}{agree}"
            )
        return 0

    _execute(work)


@main.command()
@config_option
@out_option
@server_option
def design(config_path: str, out_dir: str, server: str | None) -> None:
    """Certify operator complementarity and build the mixed strategy; exits 4
    when the certificate fails (the report is still written)."""

    def work() -> int:
        cfg = _load_config(config_path)
        bundle = _remote(server, "design", cfg) if server else run_design(cfg)
        _emit(bundle, out_dir)
        cert = bundle.certificate
        click.echo(f"certificate[{cert.kind}]: {'holds' if cert.holds else 'FAILS'}")
        if not cert.holds:
            for violation in cert.violations[:10]:
                click.echo(f"  unrescued state {violation.state}: diagonals {violation.diags}")
            return EXIT_CERTIFICATE
        click.echo(
            f"designed {bundle.designed_name}: rho_T={bundle.designed.rho_T} "
            f"(predicted {bundle.predicted_rho}); baselines "
            + ", ".join(f"{b.strategy}={b.rho_T}" for b in bundle.baselines)
        )
        return 0

    _execute(work)


@main.command()
@config_option
@out_option
@server_option
def curve(config_path: str, out_dir: str, server: str | None) -> None:
    """Tabulate rate x hitting-time products over a grid of radii."""

    def work() -> int:
        cfg = _load_config(config_path)
        bundle = _remote(server, "curve", cfg) if server else run_curve(cfg)
        _emit(bundle, out_dir)
        click.echo(
            f"{len(bundle.rows)} grid points; products all inside "
            f"({bundle.product_lower}, {bundle.product_upper}): {'yes' if bundle.all_within else 'NO'}"
        )
        return 0

    _execute(work)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
