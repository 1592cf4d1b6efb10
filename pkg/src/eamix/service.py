"""HTTP service: one endpoint per workflow, wrapping the runner functions.

Error mapping: config problems and infeasible sizes are client errors (422
with a machine-readable code); internal consistency-check failures are 500s.
A failed complementarity certificate is not an error at this layer: the design
endpoint reports it inside the bundle with holds=false.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .errors import ComplementarityError, ConfigError, InfeasibleSizeError, TheoremCheckError
from .runner import run_analyze, run_curve, run_design, run_simulate
from .schemas import (
    AnalyzeBundle,
    CurveBundle,
    DesignBundle,
    ExperimentConfig,
    HealthResponse,
    SimulateBundle,
)

app = FastAPI(
    title="eamix",
    version=__version__,
    description="Exact chain analysis and Monte Carlo validation of elitist (1+1) EAs",
)


def _error_response(status: int, code: str, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": str(exc)})


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
    return _error_response(422, "config", exc)


@app.exception_handler(InfeasibleSizeError)
async def _infeasible_error(request: Request, exc: InfeasibleSizeError) -> JSONResponse:
    return _error_response(422, "infeasible-size", exc)


@app.exception_handler(ComplementarityError)
async def _certificate_error(request: Request, exc: ComplementarityError) -> JSONResponse:
    # Reached only when a designed strategy inside analyze/simulate lacks its
    # certificate; the design endpoint itself reports holds=false instead.
    return _error_response(422, "certificate-failed", exc)


@app.exception_handler(TheoremCheckError)
async def _theorem_error(request: Request, exc: TheoremCheckError) -> JSONResponse:
    return _error_response(500, "theorem-violation", exc)


@app.get("/health", response_model=HealthResponse)
async def health() -> HealthResponse:
    return HealthResponse(status="ok", package="eamix", version=__version__)


@app.post("/analyze", response_model=AnalyzeBundle)
async def analyze(cfg: ExperimentConfig) -> AnalyzeBundle:
    return run_analyze(cfg)


@app.post("/simulate", response_model=SimulateBundle)
async def simulate(
    cfg: ExperimentConfig,
    runs: int | None = None,
    seed: int | None = None,
    max_generations: int | None = None,
) -> SimulateBundle:
    return run_simulate(cfg, runs=runs, seed=seed, max_generations=max_generations)


@app.post("/design", response_model=DesignBundle)
async def design(cfg: ExperimentConfig) -> DesignBundle:
    return run_design(cfg)


@app.post("/curve", response_model=CurveBundle)
async def curve(cfg: ExperimentConfig) -> CurveBundle:
    return run_curve(cfg)
