"""Pydantic models: experiment configuration (request side) and report bundles
(response side). The service endpoints and the CLI share these models, and the
JSON/CSV writers serialize bundles without further transformation, so every
consumer sees one source of truth.

Non-finite numbers appear in bundles as the strings "inf", "-inf", "nan";
everything else stays a plain float or int.
"""
from __future__ import annotations

import hashlib
import json
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

# Numeric report field: non-finite values travel as strings.
Num = float | int | str


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LandscapeModel(StrictModel):
    kind: Literal["onemax", "knapsack-example1", "staircase-example3", "custom-table"]
    n: int = Field(ge=1)
    params: dict[str, Any] = Field(default_factory=dict)


class OperatorModel(StrictModel):
    name: str = Field(min_length=1)
    kind: Literal["per-bit-flip", "single-bit-flip"]
    p: float | None = None

    @model_validator(mode="after")
    def _check_p(self) -> "OperatorModel":
        if self.kind == "per-bit-flip":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise ValueError(f"operator {self.name!r}: per-bit-flip needs 0 < p < 1, got {self.p}")
        elif self.p is not None:
            raise ValueError(f"operator {self.name!r}: single-bit-flip takes no p")
        return self


class MixtureTable(StrictModel):
    """State-independent default row plus optional per-state overrides.
    Weight keys are operator names; state keys are state indices as strings."""

    weights: dict[str, float]
    states: dict[str, dict[str, float]] = Field(default_factory=dict)


class StrategyModel(StrictModel):
    name: str = Field(min_length=1)
    operator: str | None = None
    mixture: Literal["uniform", "designed"] | MixtureTable | None = None
    mode: Literal["mutual", "pairwise"] = "mutual"
    free_rule: str | None = None

    @model_validator(mode="after")
    def _check_exactly_one(self) -> "StrategyModel":
        if (self.operator is None) == (self.mixture is None):
            raise ValueError(f"strategy {self.name!r}: set exactly one of 'operator' or 'mixture'")
        if self.mixture != "designed" and self.free_rule is not None:
            raise ValueError(f"strategy {self.name!r}: free_rule applies only to designed mixtures")
        return self


class InitState(StrictModel):
    state: int = Field(ge=0)


class InitProbs(StrictModel):
    probs: list[float]


InitSpec = Literal["uniform"] | InitState | InitProbs


class AnalyzeOptions(StrictModel):
    mode: Literal["auto", "dense", "lumped"] = "auto"
    init: InitSpec = "uniform"


class SimulateOptions(StrictModel):
    runs: int = Field(default=100, ge=1)
    seed: int = Field(default=12345, ge=0)
    max_generations: int = Field(default=10_000_000, ge=1)
    init: InitSpec = "uniform"
    workers: int = Field(default=1, ge=1)
    cross_validate: bool = True
    strategies: list[str] | None = None


class DesignOptions(StrictModel):
    operators: list[str] | None = None
    mode: Literal["mutual", "pairwise"] = "mutual"
    free_rule: str | None = None
    name: str = "designed"


class CurveOptions(StrictModel):
    rho_min: float = 0.5
    rho_max: float = 0.99
    step: float = 0.01

    @model_validator(mode="after")
    def _check_grid(self) -> "CurveOptions":
        if not 0.0 < self.rho_min <= self.rho_max < 1.0:
            raise ValueError(f"need 0 < rho_min <= rho_max < 1, got [{self.rho_min}, {self.rho_max}]")
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        return self


class ExperimentConfig(StrictModel):
    landscape: LandscapeModel
    operators: list[OperatorModel] = Field(default_factory=list)
    strategies: list[StrategyModel] = Field(default_factory=list)
    analyze: AnalyzeOptions = Field(default_factory=AnalyzeOptions)
    simulate: SimulateOptions = Field(default_factory=SimulateOptions)
    design: DesignOptions = Field(default_factory=DesignOptions)
    curve: CurveOptions = Field(default_factory=CurveOptions)

    def operator_names(self) -> list[str]:
        return [op.name for op in self.operators]

    def _check_free_rule(self, rule: str | None, names: set[str], where: str) -> None:
        if rule is not None and rule != "uniform" and rule not in names:
            raise ValueError(f"{where}: free_rule must be 'uniform' or an operator name, got {rule!r}")

    @model_validator(mode="after")
    def _check_references(self) -> "ExperimentConfig":
        names = self.operator_names()
        if len(set(names)) != len(names):
            raise ValueError("operator names must be unique")
        name_set = set(names)
        snames = [s.name for s in self.strategies]
        if len(set(snames)) != len(snames):
            raise ValueError("strategy names must be unique")
        for strat in self.strategies:
            if strat.operator is not None and strat.operator not in name_set:
                raise ValueError(f"strategy {strat.name!r} references unknown operator {strat.operator!r}")
            if isinstance(strat.mixture, MixtureTable):
                for key in strat.mixture.weights:
                    if key not in name_set:
                        raise ValueError(f"strategy {strat.name!r} weights reference unknown operator {key!r}")
                for state_key, row in strat.mixture.states.items():
                    if not state_key.isdigit():
                        raise ValueError(
                            f"strategy {strat.name!r}: state keys must be nonnegative integers, got {state_key!r}"
                        )
                    for key in row:
                        if key not in name_set:
                            raise ValueError(
                                f"strategy {strat.name!r} state {state_key} references unknown operator {key!r}"
                            )
            if strat.mixture is not None and strat.operator is None and len(self.operators) < 1:
                raise ValueError(f"strategy {strat.name!r} needs declared operators to mix")
            self._check_free_rule(strat.free_rule, name_set, f"strategy {strat.name!r}")
        if self.design.operators is not None:
            for key in self.design.operators:
                if key not in name_set:
                    raise ValueError(f"design references unknown operator {key!r}")
            if len(set(self.design.operators)) != len(self.design.operators):
                raise ValueError("design operator list must not repeat")
        self._check_free_rule(self.design.free_rule, name_set, "design")
        if self.simulate.strategies is not None:
            known = set(snames)
            for key in self.simulate.strategies:
                if key not in known:
                    raise ValueError(f"simulate references unknown strategy {key!r}")
        return self


def parse_config(data: dict) -> ExperimentConfig:
    """Validate raw mapping data, folding pydantic errors into ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError(f"config must be a mapping, got {type(data).__name__}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            where = ".".join(str(p) for p in err["loc"]) or "config"
            lines.append(f"{where}: {err['msg']}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from exc


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form; embedded in every report bundle.

    simulate.workers is excluded: it changes how the work is scheduled, never
    what is computed, and reports must be byte-identical across worker counts.
    """
    dump = cfg.model_dump(mode="json")
    dump["simulate"].pop("workers", None)
    canonical = json.dumps(dump, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Report bundles (response side).
# ---------------------------------------------------------------------------


class PowerIterationModel(StrictModel):
    value: Num
    converged: bool
    iterations: int


class MEntry(StrictModel):
    state: int
    m: Num


class StrategyAnalysisRow(StrictModel):
    strategy: str
    rho_T: Num
    rate_R: Num
    hitting_T: Num
    m_min: Num
    m_max: Num
    m_mean: Num
    expected_hitting: Num
    rate_time_product: Num | None
    traps: list[int]
    residual: Num
    power_iteration: PowerIterationModel | None
    m_vector: list[MEntry] | None


class AnalyzeBundle(StrictModel):
    command: Literal["analyze"] = "analyze"
    config_hash: str
    landscape: LandscapeModel
    mode: Literal["dense", "lumped"]
    space: Literal["states", "levels"]
    init: InitSpec
    strategies: list[StrategyAnalysisRow]


class RunRow(StrictModel):
    strategy: str
    run_index: int
    start_state: int
    generations: int
    censored: int
    final_fitness: Num


class SimStrategyRow(StrictModel):
    strategy: str
    runs: int
    uncensored: int
    censored: int
    mean_uncensored: Num | None
    std_uncensored: Num | None
    stderr: Num | None
    mean_capped: Num
    exact_expected: Num | None
    z: Num | None
    agree: bool | None


class SimulateBundle(StrictModel):
    command: Literal["simulate"] = "simulate"
    config_hash: str
    landscape: LandscapeModel
    seed: int
    runs: int
    max_generations: int
    init: InitSpec
    rng_scheme: str
    strategies: list[SimStrategyRow]
    run_rows: list[RunRow]


class ViolationModel(StrictModel):
    state: int
    diags: list[Num]


class CertificateModel(StrictModel):
    kind: Literal["pairwise", "mutual"]
    holds: bool
    rho: list[Num]
    threshold: Num
    critical_states: list[int]
    violations: list[ViolationModel]
    operator_labels: list[str]


class ForcedState(StrictModel):
    state: int
    operator: int


class DominanceModel(StrictModel):
    operator_rho: list[Num]
    operator_T: list[Num]
    mixed_rho: Num
    mixed_T: Num
    rho_bound: Num
    T_bound: Num
    diag_identity_error: Num
    holds: bool


class DesignBundle(StrictModel):
    command: Literal["design"] = "design"
    config_hash: str
    landscape: LandscapeModel
    mode: Literal["mutual", "pairwise"]
    space: Literal["states", "levels"]
    operators: list[str]
    certificate: CertificateModel
    designed_name: str
    predicted_rho: Num | None
    forced_states: list[ForcedState]
    guarantee: str | None
    baselines: list[StrategyAnalysisRow]
    designed: StrategyAnalysisRow | None
    dominance: DominanceModel | None


class CurveRow(StrictModel):
    rho: Num
    rate_R: Num
    hitting_T: Num
    product: Num


class CurveBundle(StrictModel):
    command: Literal["curve"] = "curve"
    config_hash: str
    rho_min: float
    rho_max: float
    step: float
    product_lower: float = 1.0
    product_upper: float = 1.5
    all_within: bool
    rows: list[CurveRow]


class HealthResponse(StrictModel):
    status: str
    package: str
    version: str


Bundle = AnalyzeBundle | SimulateBundle | DesignBundle | CurveBundle
