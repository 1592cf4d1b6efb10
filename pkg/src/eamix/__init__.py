"""Exact Markov-chain analysis and Monte Carlo validation of strict-elitist
(1+1) evolutionary algorithms with mixed mutation strategies on bitstrings."""

__version__ = "0.1.0"

from .chain import (
    AnalysisReport,
    ElitistChain,
    PowerIterationResult,
    analyze_chain,
    asymptotic_hitting_time,
    build_chain,
    build_lumped_chain,
    convergence_rate,
    hitting_time_vector,
    power_iteration_radius,
    rate_time_product,
    spectral_radius,
)
from .errors import (
    ComplementarityError,
    ConfigError,
    EamixError,
    InfeasibleSizeError,
    TheoremCheckError,
)
from .montecarlo import (
    CrossValidation,
    EstimateResult,
    RunConfig,
    RunOutcome,
    SimStrategy,
    cross_validate,
    estimate,
    run_once,
)
from .mutate import (
    MutationKernel,
    OperatorSpec,
    StrategyDistribution,
    kernel_for,
    mix,
    per_bit_flip,
    per_bit_flip_levels,
    single_bit_flip,
    single_bit_flip_levels,
)
from .space import (
    BitState,
    FitnessLandscape,
    Partition,
    build_landscape,
    enumerate_states,
    level_fitness,
    partition_optimal,
    partition_values,
    popcount_table,
)
from .strategy import (
    CertificateResult,
    DominanceReport,
    MixedDesign,
    check_mutual,
    check_pairwise,
    design_mixed,
    dominance_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
