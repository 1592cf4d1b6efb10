"""Experiment orchestration: one function per workflow, shared by the HTTP
service and the CLI so both produce identical bundles for identical configs."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, log

import numpy as np

from .chain import AnalysisReport, ElitistChain, analyze_chain, build_chain, build_lumped_chain
from .errors import ComplementarityError, ConfigError, InfeasibleSizeError
from .montecarlo import RNG_SCHEME, RunConfig, SimStrategy, cross_validate, estimate
from .mutate import MutationKernel, OperatorSpec, StrategyDistribution, kernel_for, mix
from .report import encode_num
from .schemas import (
    AnalyzeBundle,
    CertificateModel,
    CurveBundle,
    CurveRow,
    DesignBundle,
    DominanceModel,
    ExperimentConfig,
    ForcedState,
    InitProbs,
    InitSpec,
    InitState,
    MEntry,
    MixtureTable,
    PowerIterationModel,
    RunRow,
    SimStrategyRow,
    SimulateBundle,
    StrategyAnalysisRow,
    StrategyModel,
    ViolationModel,
    config_hash,
)
from .space import DENSE_MATRIX_MAX_N, FitnessLandscape, build_landscape, check_dense_size, popcount_table
from .strategy import CertificateResult, MixedDesign, design_mixed, dominance_report

# report.json embeds per-state hitting times only up to this chain dimension.
M_VECTOR_LIMIT = 1024
WEIGHT_SUM_TOL = 1e-9


@dataclass
class Runtime:
    cfg: ExperimentConfig
    landscape: FitnessLandscape
    ops: list[OperatorSpec]
    hash: str

    @property
    def op_names(self) -> list[str]:
        return [op.label for op in self.ops]


def build_runtime(cfg: ExperimentConfig) -> Runtime:
    landscape = build_landscape(cfg.landscape.kind, cfg.landscape.n, **cfg.landscape.params)
    ops = [OperatorSpec(kind=o.kind, p=o.p, label=o.name) for o in cfg.operators]
    return Runtime(cfg=cfg, landscape=landscape, ops=ops, hash=config_hash(cfg))


def resolve_mode(cfg: ExperimentConfig, landscape: FitnessLandscape) -> str:
    requested = cfg.analyze.mode
    n = landscape.n
    if requested == "dense":
        check_dense_size(n, what="dense analysis")
        return "dense"
    if requested == "lumped":
        if not landscape.is_popcount_symmetric():
            raise ConfigError(f"lumped mode needs a popcount-symmetric landscape, {landscape.kind} is not")
        return "lumped"
    if n <= DENSE_MATRIX_MAX_N:
        return "dense"
    if landscape.is_popcount_symmetric():
        return "lumped"
    raise InfeasibleSizeError(
        f"n={n} exceeds the dense limit {DENSE_MATRIX_MAX_N} and {landscape.kind} cannot be lumped"
    )


@dataclass
class ChainContext:
    """Operator kernels and pure-operator chains in one working space."""

    runtime: Runtime
    mode: str
    space: str
    size: int
    level_values: np.ndarray | None = field(default=None, repr=False)
    op_kernels: list[MutationKernel] = field(default_factory=list)
    op_chains: list[ElitistChain] = field(default_factory=list)

    @property
    def kappa(self) -> int:
        return len(self.op_kernels)


def build_context(rt: Runtime, mode: str) -> ChainContext:
    n = rt.landscape.n
    if mode == "dense":
        kernels = [kernel_for(spec, n, "states") for spec in rt.ops]
        chains = [build_chain(k, rt.landscape) for k in kernels]
        return ChainContext(rt, mode, "states", rt.landscape.size, None, kernels, chains)
    level_values = rt.landscape.level_values()
    kernels = [kernel_for(spec, n, "levels") for spec in rt.ops]
    chains = [
        build_lumped_chain(k, level_values, n, label=f"{k.label} on {rt.landscape.kind}-levels(n={n})")
        for k in kernels
    ]
    return ChainContext(rt, mode, "levels", n + 1, level_values, kernels, chains)


def _weights_row(weights: dict[str, float], names: list[str], where: str) -> np.ndarray:
    row = np.array([float(weights.get(name, 0.0)) for name in names])
    if (row < 0).any():
        raise ConfigError(f"{where}: mixture weights must be nonnegative")
    total = row.sum()
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ConfigError(f"{where}: mixture weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
    return row / total


def _free_rule_arg(rule: str | None, mode: str, names: list[str], where: str) -> None | int:
    if rule is None:
        return None
    if rule == "uniform":
        if mode == "pairwise":
            raise ConfigError(f"{where}: pairwise design requires free states to follow the first operator")
        return None
    if rule not in names:
        raise ConfigError(f"{where}: free_rule {rule!r} is not among the designed operators")
    return names.index(rule)


def _design_for(ctx: ChainContext, mode: str, free_rule: str | None, where: str) -> MixedDesign:
    free = _free_rule_arg(free_rule, mode, ctx.runtime.op_names, where)
    return design_mixed(ctx.op_chains, mode=mode, free_state_rule=free)


def _distribution_for(ctx: ChainContext, strat: StrategyModel) -> StrategyDistribution:
    names = ctx.runtime.op_names
    kappa = ctx.kappa
    if strat.mixture == "uniform":
        return StrategyDistribution.uniform(ctx.size, kappa, labels=names)
    if strat.mixture == "designed":
        return _design_for(ctx, strat.mode, strat.free_rule, f"strategy {strat.name!r}").distribution
    table_spec: MixtureTable = strat.mixture
    row = _weights_row(table_spec.weights, names, f"strategy {strat.name!r}")
    table = np.tile(row, (ctx.size, 1))
    if table_spec.states:
        if ctx.space != "states":
            raise ConfigError(
                f"strategy {strat.name!r}: per-state mixture overrides need dense mode, not lumped"
            )
        for key, wrow in table_spec.states.items():
            idx = int(key)
            if idx >= ctx.size:
                raise ConfigError(f"strategy {strat.name!r}: state {idx} out of range for size {ctx.size}")
            table[idx] = _weights_row(wrow, names, f"strategy {strat.name!r} state {idx}")
    dist = StrategyDistribution(table=table, labels=names)
    dist.validate()
    return dist


def _chain_for(ctx: ChainContext, strat: StrategyModel) -> ElitistChain:
    if strat.operator is not None:
        return ctx.op_chains[ctx.runtime.op_names.index(strat.operator)]
    dist = _distribution_for(ctx, strat)
    mixed = mix(ctx.op_kernels, dist)
    return _kernel_chain(ctx, mixed)


def _kernel_chain(ctx: ChainContext, kernel: MutationKernel) -> ElitistChain:
    if ctx.space == "states":
        return build_chain(kernel, ctx.runtime.landscape)
    return build_lumped_chain(
        kernel,
        ctx.level_values,
        ctx.runtime.landscape.n,
        label=f"{kernel.label} on {ctx.runtime.landscape.kind}-levels",
    )


def _init_vector(ctx: ChainContext, init: InitSpec) -> np.ndarray:
    """Initial distribution in the context's working space."""
    n = ctx.runtime.landscape.n
    full = 2**n
    if ctx.space == "states":
        if init == "uniform":
            return np.full(full, 1.0 / full)
        if isinstance(init, InitState):
            if init.state >= full:
                raise ConfigError(f"init state {init.state} out of range for n={n}")
            p0 = np.zeros(full)
            p0[init.state] = 1.0
            return p0
        return _probs_vector(init, full)
    if init == "uniform":
        return np.array([comb(n, i) for i in range(n + 1)], dtype=np.float64) / full
    if isinstance(init, InitState):
        if init.state >= full:
            raise ConfigError(f"init state {init.state} out of range for n={n}")
        p0 = np.zeros(n + 1)
        p0[int(init.state).bit_count()] = 1.0
        return p0
    probs = _probs_vector(init, full)
    return np.bincount(popcount_table(n), weights=probs, minlength=n + 1)


def _probs_vector(init: InitProbs, full: int) -> np.ndarray:
    probs = np.asarray(init.probs, dtype=np.float64)
    if probs.shape != (full,):
        raise ConfigError(f"init probs must list {full} entries, got {probs.shape[0]}")
    if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
        raise ConfigError("init probs must form a probability vector")
    return probs


def _make_row(name: str, report: AnalysisReport, p0: np.ndarray) -> StrategyAnalysisRow:
    pi = report.power_iteration
    m_entries = None
    if report.chain.dim <= M_VECTOR_LIMIT:
        m_entries = [
            MEntry(state=s, m=encode_num(v)) for s, v in report.m_by_state().items()
        ]
    return StrategyAnalysisRow(
        strategy=name,
        rho_T=encode_num(report.rho_T),
        rate_R=encode_num(report.rate_R),
        hitting_T=encode_num(report.hitting_T),
        m_min=encode_num(report.m_min),
        m_max=encode_num(report.m_max),
        m_mean=encode_num(report.m_mean),
        expected_hitting=encode_num(report.expected_hitting_from(p0)),
        rate_time_product=encode_num(report.rate_time),
        traps=report.absorbing_traps,
        residual=encode_num(report.residual),
        power_iteration=(
            PowerIterationModel(value=encode_num(pi.value), converged=pi.converged, iterations=pi.iterations)
            if pi
            else None
        ),
        m_vector=m_entries,
    )


def run_analyze(cfg: ExperimentConfig) -> AnalyzeBundle:
    rt = build_runtime(cfg)
    if not cfg.operators:
        raise ConfigError("analyze needs at least one operator")
    if not cfg.strategies:
        raise ConfigError("analyze needs at least one strategy")
    mode = resolve_mode(cfg, rt.landscape)
    ctx = build_context(rt, mode)
    p0 = _init_vector(ctx, cfg.analyze.init)
    rows = [
        _make_row(strat.name, analyze_chain(_chain_for(ctx, strat)), p0) for strat in cfg.strategies
    ]
    return AnalyzeBundle(
        config_hash=rt.hash,
        landscape=cfg.landscape,
        mode=mode,
        space=ctx.space,
        init=cfg.analyze.init,
        strategies=rows,
    )


def _certificate_model(cert: CertificateResult) -> CertificateModel:
    return CertificateModel(
        kind=cert.kind,
        holds=cert.holds,
        rho=[encode_num(r) for r in cert.rho],
        threshold=encode_num(cert.threshold),
        critical_states=cert.critical_states,
        violations=[
            ViolationModel(state=v["state"], diags=[encode_num(d) for d in v["diags"]])
            for v in cert.violations
        ],
        operator_labels=cert.operator_labels,
    )


def run_design(cfg: ExperimentConfig) -> DesignBundle:
    rt = build_runtime(cfg)
    if len(cfg.operators) < 2:
        raise ConfigError("design needs at least two operators")
    opts = cfg.design
    names = opts.operators if opts.operators is not None else rt.op_names
    if len(names) < 2:
        raise ConfigError("design needs at least two operators")
    mode = resolve_mode(cfg, rt.landscape)
    full_ctx = build_context(rt, mode)
    indices = [rt.op_names.index(name) for name in names]
    sub = ChainContext(
        runtime=Runtime(cfg=cfg, landscape=rt.landscape, ops=[rt.ops[i] for i in indices], hash=rt.hash),
        mode=mode,
        space=full_ctx.space,
        size=full_ctx.size,
        level_values=full_ctx.level_values,
        op_kernels=[full_ctx.op_kernels[i] for i in indices],
        op_chains=[full_ctx.op_chains[i] for i in indices],
    )
    p0 = _init_vector(sub, cfg.analyze.init)
    baselines = [
        _make_row(name, analyze_chain(chain), p0) for name, chain in zip(names, sub.op_chains)
    ]
    try:
        design = _design_for(sub, opts.mode, opts.free_rule, "design")
    except ComplementarityError as exc:
        return DesignBundle(
            config_hash=rt.hash,
            landscape=cfg.landscape,
            mode=opts.mode,
            space=sub.space,
            operators=list(names),
            certificate=_certificate_model(exc.certificate),
            designed_name=opts.name,
            predicted_rho=None,
            forced_states=[],
            guarantee=None,
            baselines=baselines,
            designed=None,
            dominance=None,
        )
    mixed_kernel = mix(sub.op_kernels, design.distribution)
    mixed_chain = _kernel_chain(sub, mixed_kernel)
    dom = dominance_report(sub.op_chains, design.distribution, mixed_chain)
    designed_row = _make_row(opts.name, analyze_chain(mixed_chain), p0)
    return DesignBundle(
        config_hash=rt.hash,
        landscape=cfg.landscape,
        mode=opts.mode,
        space=sub.space,
        operators=list(names),
        certificate=_certificate_model(design.certificate),
        designed_name=opts.name,
        predicted_rho=encode_num(design.predicted_rho),
        forced_states=[ForcedState(state=s, operator=k) for s, k in sorted(design.forced.items())],
        guarantee=design.guarantee,
        baselines=baselines,
        designed=designed_row,
        dominance=DominanceModel(
            operator_rho=[encode_num(v) for v in dom.operator_rho],
            operator_T=[encode_num(v) for v in dom.operator_T],
            mixed_rho=encode_num(dom.mixed_rho),
            mixed_T=encode_num(dom.mixed_T),
            rho_bound=encode_num(dom.rho_bound),
            T_bound=encode_num(dom.T_bound),
            diag_identity_error=encode_num(dom.diag_identity_error),
            holds=dom.holds,
        ),
    )


def _sim_strategy(rt: Runtime, strat: StrategyModel) -> SimStrategy:
    names = rt.op_names
    kappa = len(rt.ops)
    n = rt.landscape.n
    if strat.operator is not None:
        return SimStrategy(mode="pure", operator_index=names.index(strat.operator))
    if strat.mixture == "uniform":
        return SimStrategy(mode="row", row=np.full(kappa, 1.0 / kappa))
    if strat.mixture == "designed":
        if n <= DENSE_MATRIX_MAX_N:
            ctx = build_context(rt, "dense")
            design = _design_for(ctx, strat.mode, strat.free_rule, f"strategy {strat.name!r}")
            return SimStrategy(mode="table", table=design.distribution.table)
        if rt.landscape.is_popcount_symmetric():
            ctx = build_context(rt, "lumped")
            design = _design_for(ctx, strat.mode, strat.free_rule, f"strategy {strat.name!r}")
            table = design.distribution.table[popcount_table(n)]
            return SimStrategy(mode="table", table=table)
        raise InfeasibleSizeError(
            f"designed strategy {strat.name!r} needs dense mode (n <= {DENSE_MATRIX_MAX_N}) "
            "or a popcount-symmetric landscape"
        )
    table_spec: MixtureTable = strat.mixture
    row = _weights_row(table_spec.weights, names, f"strategy {strat.name!r}")
    if not table_spec.states:
        return SimStrategy(mode="row", row=row)
    table = np.tile(row, (2**n, 1))
    for key, wrow in table_spec.states.items():
        idx = int(key)
        if idx >= 2**n:
            raise ConfigError(f"strategy {strat.name!r}: state {idx} out of range for n={n}")
        table[idx] = _weights_row(wrow, names, f"strategy {strat.name!r} state {idx}")
    return SimStrategy(mode="table", table=table)


def _exact_expected(rt: Runtime, strat: StrategyModel, init: InitSpec) -> float | None:
    """Exact expected hitting time for cross-validation, when feasible."""
    n = rt.landscape.n
    if n <= DENSE_MATRIX_MAX_N:
        mode = "dense"
    elif rt.landscape.is_popcount_symmetric():
        mode = "lumped"
        if isinstance(strat.mixture, MixtureTable) and strat.mixture.states:
            return None
    else:
        return None
    ctx = build_context(rt, mode)
    report = analyze_chain(_chain_for(ctx, strat))
    return report.expected_hitting_from(_init_vector(ctx, init))


def _sim_init(rt: Runtime, init: InitSpec) -> str | int | np.ndarray:
    if init == "uniform":
        return "uniform"
    if isinstance(init, InitState):
        return init.state
    return _probs_vector(init, rt.landscape.size)


def run_simulate(
    cfg: ExperimentConfig,
    runs: int | None = None,
    seed: int | None = None,
    max_generations: int | None = None,
) -> SimulateBundle:
    rt = build_runtime(cfg)
    if not cfg.operators:
        raise ConfigError("simulate needs at least one operator")
    opts = cfg.simulate
    runs = opts.runs if runs is None else runs
    seed = opts.seed if seed is None else seed
    max_generations = opts.max_generations if max_generations is None else max_generations
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    if max_generations < 1:
        raise ConfigError(f"max_generations must be >= 1, got {max_generations}")
    chosen = cfg.strategies
    if opts.strategies is not None:
        chosen = [s for s in cfg.strategies if s.name in set(opts.strategies)]
    if not chosen:
        raise ConfigError("simulate needs at least one strategy")
    init_arg = _sim_init(rt, opts.init)
    rows: list[SimStrategyRow] = []
    run_rows: list[RunRow] = []
    for strat in chosen:
        rc = RunConfig(
            n=rt.landscape.n,
            values=rt.landscape.values,
            operators=rt.ops,
            strategy=_sim_strategy(rt, strat),
            init=init_arg,
            max_generations=max_generations,
            master_seed=seed,
        )
        est = estimate(rc, runs, workers=opts.workers)
        exact = _exact_expected(rt, strat, opts.init) if opts.cross_validate else None
        if exact is None or est.censored_count or not np.isfinite(exact):
            # A censored mean is biased low and an infinite expectation has no
            # finite-sample test, so the z-score is only reported when every
            # run finished and the exact value is finite.
            z = agree = None
        else:
            check = cross_validate(est, exact)
            z, agree = check.z, check.agree
        rows.append(
            SimStrategyRow(
                strategy=strat.name,
                runs=est.n_runs,
                uncensored=est.uncensored_count,
                censored=est.censored_count,
                mean_uncensored=encode_num(est.mean_uncensored),
                std_uncensored=encode_num(est.std_uncensored),
                stderr=encode_num(est.stderr),
                mean_capped=encode_num(est.mean_capped),
                exact_expected=encode_num(exact),
                z=encode_num(z),
                agree=agree,
            )
        )
        run_rows.extend(
            RunRow(
                strategy=strat.name,
                run_index=o.run_index,
                start_state=o.start_state,
                generations=o.generations,
                censored=int(o.censored),
                final_fitness=encode_num(o.final_fitness),
            )
            for o in est.outcomes
        )
    return SimulateBundle(
        config_hash=rt.hash,
        landscape=cfg.landscape,
        seed=seed,
        runs=runs,
        max_generations=max_generations,
        init=opts.init,
        rng_scheme=RNG_SCHEME,
        strategies=rows,
        run_rows=run_rows,
    )


def run_curve(cfg: ExperimentConfig) -> CurveBundle:
    opts = cfg.curve
    count = int((opts.rho_max - opts.rho_min) / opts.step + 1e-9) + 1
    rows: list[CurveRow] = []
    all_within = True
    for i in range(count):
        rho = round(opts.rho_min + i * opts.step, 12)
        if rho > opts.rho_max + 1e-12:
            break
        rate = -log(rho)
        hitting = 1.0 / (1.0 - rho)
        product = rate * hitting
        all_within = all_within and 1.0 < product < 1.5
        rows.append(
            CurveRow(
                rho=encode_num(rho),
                rate_R=encode_num(rate),
                hitting_T=encode_num(hitting),
                product=encode_num(product),
            )
        )
    return CurveBundle(
        config_hash=config_hash(cfg),
        rho_min=opts.rho_min,
        rho_max=opts.rho_max,
        step=opts.step,
        all_within=all_within,
        rows=rows,
    )
