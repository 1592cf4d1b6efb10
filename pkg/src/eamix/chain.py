"""Absorbing Markov chains of strict-elitist (1+1) evolutionary algorithms.

The chain accepts a child only on strict fitness improvement, so ordering the
non-optimal states by descending fitness makes the non-absorbing block lower
triangular: its eigenvalues are the diagonal entries, and the slowest
geometric decay rate is the largest diagonal entry.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError, TheoremCheckError
from .mutate import MutationKernel
from .space import FitnessLandscape, Partition, partition_optimal, partition_values

ROW_SUM_TOL = 1e-12
# Diagonal entries at least this close to 1 get flagged as absorbing traps.
TRAP_TOL = 1e-12
RADIUS_AGREEMENT_TOL = 1e-10
RESIDUAL_TOL = 1e-8
SANDWICH_SLACK = 1e-9
# Above this dimension the power-iteration cross-check is skipped by default.
VERIFY_DIM_LIMIT = 4096


@dataclass
class ElitistChain:
    """Canonical-form chain: optimal states first (identity block), then
    non-optimal states by descending fitness, ties by ascending index."""

    n: int
    space: str
    label: str
    partition: Partition
    values: np.ndarray = field(repr=False)
    full_matrix: np.ndarray = field(repr=False)
    sub_matrix_T: np.ndarray = field(repr=False)
    diag: np.ndarray = field(repr=False)
    # True where a state has exactly zero probability of strict improvement.
    hard_traps: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.full_matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.sub_matrix_T.shape[0]

    @property
    def optimal_count(self) -> int:
        return len(self.partition.optimal)

    def non_optimal_states(self) -> np.ndarray:
        """Original indices of non-optimal states in canonical order."""
        return self.partition.order[self.optimal_count :]

    def trap_states(self) -> list[int]:
        """Original indices whose diagonal is within TRAP_TOL of 1."""
        hits = np.nonzero(self.diag >= 1.0 - TRAP_TOL)[0]
        return [int(s) for s in self.non_optimal_states()[hits]]

    def validate(self) -> None:
        size = self.size
        k = self.optimal_count
        if self.sub_matrix_T.shape != (size - k, size - k):
            raise TheoremCheckError("sub-matrix shape disagrees with partition")
        row_err = np.abs(self.full_matrix.sum(axis=1) - 1.0).max() if size else 0.0
        if row_err > ROW_SUM_TOL:
            raise TheoremCheckError(f"chain rows must sum to 1 within {ROW_SUM_TOL}, max error {row_err:g}")
        if k:
            opt = self.full_matrix[:k, :]
            diag_ok = np.all(opt[np.arange(k), np.arange(k)] == 1.0)
            if not (diag_ok and np.count_nonzero(opt) == k):
                raise TheoremCheckError("optimal block must be the identity")
        if self.dim:
            if (self.diag < 0).any() or (self.diag > 1).any():
                raise TheoremCheckError("diagonal entries must lie in [0, 1]")
            # Row-wise scan keeps peak memory flat on large dense chains.
            for i in range(self.dim - 1):
                if self.sub_matrix_T[i, i + 1 :].any():
                    raise TheoremCheckError(
                        "non-optimal block must be lower triangular in fitness-descending order"
                    )
            if not np.array_equal(np.diagonal(self.sub_matrix_T), self.diag):
                raise TheoremCheckError("stored diagonal disagrees with sub-matrix")


def _assemble(
    kernel_matrix: np.ndarray,
    values: np.ndarray,
    partition: Partition,
    n: int,
    space: str,
    label: str,
) -> ElitistChain:
    order = partition.order
    k = len(partition.optimal)
    vo = values[order]
    # Fancy indexing already copies, so the masking can run in place.
    full = kernel_matrix[np.ix_(order, order)]
    full[vo[None, :] <= vo[:, None]] = 0.0
    improve = full.sum(axis=1)
    if improve.max(initial=0.0) > 1.0 + ROW_SUM_TOL:
        raise TheoremCheckError(f"improvement mass exceeds 1: {improve.max():g}")
    np.clip(improve, 0.0, 1.0, out=improve)
    idx = np.arange(full.shape[0])
    full[idx, idx] = 1.0 - improve
    chain = ElitistChain(
        n=n,
        space=space,
        label=label,
        partition=partition,
        values=values,
        full_matrix=full,
        sub_matrix_T=full[k:, k:].copy(),
        diag=(1.0 - improve[k:]).copy(),
        hard_traps=improve[k:] == 0.0,
    )
    chain.validate()
    return chain


def build_chain(kernel: MutationKernel, landscape: FitnessLandscape) -> ElitistChain:
    """Full-state chain of the strict-elitist EA driven by one mutation kernel."""
    if kernel.space != "states":
        raise ConfigError("build_chain needs a kernel over states; use build_lumped_chain for level kernels")
    if kernel.n != landscape.n:
        raise ConfigError(f"kernel is for n={kernel.n}, landscape for n={landscape.n}")
    kernel.validate()
    return _assemble(
        kernel.matrix,
        landscape.values,
        partition_optimal(landscape),
        landscape.n,
        "states",
        f"{kernel.label} on {landscape.kind}(n={landscape.n})",
    )


def build_lumped_chain(kernel: MutationKernel, level_values: np.ndarray, n: int, label: str = "") -> ElitistChain:
    """Popcount-level chain; exact when fitness depends only on the number of ones."""
    if kernel.space != "levels":
        raise ConfigError("build_lumped_chain needs a kernel over levels")
    level_values = np.asarray(level_values, dtype=np.float64)
    if level_values.shape != (n + 1,):
        raise ConfigError(f"level values must have length n+1={n + 1}, got {level_values.shape}")
    if kernel.n != n:
        raise ConfigError(f"kernel is for n={kernel.n}, levels for n={n}")
    kernel.validate()
    return _assemble(
        kernel.matrix,
        level_values,
        partition_values(level_values),
        n,
        "levels",
        label or f"{kernel.label} on levels(n={n})",
    )


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    converged: bool
    iterations: int


def power_iteration_radius(
    T: np.ndarray, tol: float = 1e-12, max_iters: int = 1_000_000
) -> PowerIterationResult:
    """Spectral radius of a nonnegative matrix by sup-norm power iteration.

    Aitken extrapolation speeds up the slowly geometric raw sequence; the
    estimate counts as converged after three consecutive stable extrapolated
    values. Non-convergence is reported, not raised.
    """
    T = np.asarray(T, dtype=np.float64)
    dim = T.shape[0]
    if dim == 0:
        return PowerIterationResult(0.0, True, 0)
    v = np.ones(dim)
    window: list[float] = []
    acc_prev: float | None = None
    streak = 0
    for it in range(1, max_iters + 1):
        w = T @ v
        top = w.max()
        if top <= 0.0:
            return PowerIterationResult(0.0, True, it)
        # Eigenpair residual on the max-normalized iterate. Ratio stability
        # alone is not enough: survival probabilities sit at exactly 1 for as
        # many steps as the shortest path to absorption, a plateau that mimics
        # convergence while v is nowhere near the eigenvector.
        residual = float(np.abs(w - top * v).max())
        v = w / top
        window.append(top)
        if len(window) > 3:
            window.pop(0)
        if len(window) == 3:
            l0, l1, l2 = window
            denom = l2 - 2.0 * l1 + l0
            acc = l2 - (l2 - l1) ** 2 / denom if abs(denom) > 1e-300 else l2
            if acc_prev is not None and abs(acc - acc_prev) <= tol and residual <= 1e3 * tol:
                streak += 1
                if streak >= 3:
                    return PowerIterationResult(float(acc), True, it)
            else:
                streak = 0
            acc_prev = acc
    fallback = acc_prev if acc_prev is not None else window[-1]
    return PowerIterationResult(float(fallback), False, max_iters)


def spectral_radius(chain: ElitistChain, verify: bool = False, tol: float = RADIUS_AGREEMENT_TOL) -> float:
    """Largest diagonal entry of the non-optimal block.

    With verify=True an independent power iteration must agree within tol;
    disagreement means the triangular structure was broken somewhere.
    """
    rho = float(chain.diag.max()) if chain.dim else 0.0
    if verify:
        result = power_iteration_radius(chain.sub_matrix_T)
        if result.converged and abs(result.value - rho) > tol:
            raise TheoremCheckError(
                f"spectral radius mismatch: max diagonal {rho!r} vs power iteration {result.value!r}"
            )
    return rho


def convergence_rate(rho: float) -> float:
    """Asymptotic per-generation decay exponent -ln(rho)."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"spectral radius must lie in [0, 1], got {rho}")
    if rho == 0.0:
        return float("inf")
    return -log(rho)


def hitting_time_vector(chain: ElitistChain) -> tuple[np.ndarray, float]:
    """Expected generations to reach an optimal state, per non-optimal state.

    States that can reach a zero-escape trap get +inf. The finite block is
    solved by LU with partial pivoting; the residual is checked against a
    tolerance scaled by the solution magnitude (near-trap chains are
    legitimately ill conditioned).
    """
    dim = chain.dim
    if dim == 0:
        return np.zeros(0), 0.0
    T = chain.sub_matrix_T
    inf_reach = np.zeros(dim, dtype=bool)
    for i in range(dim):
        if chain.hard_traps[i]:
            inf_reach[i] = True
        elif i and (inf_reach[:i] & (T[i, :i] > 0.0)).any():
            inf_reach[i] = True
    m = np.full(dim, np.inf)
    finite = ~inf_reach
    count = int(finite.sum())
    if count == 0:
        return m, 0.0
    A = np.eye(count) - T[np.ix_(finite, finite)]
    solution = lu_solve(lu_factor(A), np.ones(count))
    residual = float(np.abs(A @ solution - 1.0).max())
    bound = RESIDUAL_TOL * max(1.0, float(np.abs(solution).max()))
    if residual > bound:
        raise TheoremCheckError(f"hitting-time residual {residual:g} exceeds {bound:g}")
    if solution.min() < 1.0 - 1e-9:
        raise TheoremCheckError(f"hitting times must be >= 1, got minimum {solution.min()!r}")
    m[finite] = solution
    return m, residual


def asymptotic_hitting_time(rho: float, m: np.ndarray) -> float:
    """1/(1-rho), or +inf at rho=1; must fall between the extreme entries of m."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"spectral radius must lie in [0, 1], got {rho}")
    if m.size == 0:
        return 1.0
    if rho == 1.0:
        if not np.isinf(m.max()):
            raise TheoremCheckError("radius 1 requires an infinite hitting time somewhere")
        return float("inf")
    value = 1.0 / (1.0 - rho)
    slack = SANDWICH_SLACK * max(1.0, value)
    if not (m.min() - slack <= value <= m.max() + slack):
        raise TheoremCheckError(
            f"1/(1-rho)={value!r} falls outside hitting-time range [{m.min()!r}, {m.max()!r}]"
        )
    return value


def rate_time_product(rho: float) -> float:
    """-ln(rho)/(1-rho); defined for 0 < rho < 1 and always inside (1, 1.5] there."""
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rate-time product needs 0 < rho < 1, got {rho}")
    return -log(rho) / (1.0 - rho)


@dataclass
class AnalysisReport:
    """Exact asymptotics of one chain, plus bookkeeping for reports."""

    chain: ElitistChain = field(repr=False)
    rho_T: float
    rate_R: float
    hitting_T: float
    m_vector: np.ndarray = field(repr=False)
    residual: float
    absorbing_traps: list[int]
    power_iteration: PowerIterationResult | None = None
    rate_time: float | None = None

    @property
    def flags(self) -> dict:
        return {"absorbing_traps": self.absorbing_traps}

    @property
    def m_min(self) -> float:
        return float(self.m_vector.min()) if self.m_vector.size else 0.0

    @property
    def m_max(self) -> float:
        return float(self.m_vector.max()) if self.m_vector.size else 0.0

    @property
    def m_mean(self) -> float:
        return float(self.m_vector.mean()) if self.m_vector.size else 0.0

    def m_by_state(self) -> dict[int, float]:
        states = self.chain.non_optimal_states()
        return {int(s): float(v) for s, v in zip(states, self.m_vector)}

    def expected_hitting_from(self, p0: np.ndarray) -> float:
        """Expected generations under initial distribution p0 over all states;
        mass on optimal states contributes zero."""
        p0 = np.asarray(p0, dtype=np.float64)
        if p0.shape != (self.chain.size,):
            raise ConfigError(f"initial distribution must have length {self.chain.size}, got {p0.shape}")
        if (p0 < -1e-15).any():
            raise ConfigError("initial distribution has negative mass")
        if abs(p0.sum() - 1.0) > 1e-9:
            raise ConfigError(f"initial distribution must sum to 1, got {p0.sum()!r}")
        weights = p0[self.chain.non_optimal_states()]
        active = weights > 0.0
        if not active.any():
            return 0.0
        m = self.m_vector[active]
        if np.isinf(m).any():
            return float("inf")
        return float(weights[active] @ m)


def analyze_chain(chain: ElitistChain, verify: bool | None = None) -> AnalysisReport:
    """Full exact treatment of one chain: radius (optionally cross-checked by
    power iteration), rate, hitting times, and asymptotic hitting time."""
    if verify is None:
        verify = chain.dim <= VERIFY_DIM_LIMIT
    rho = spectral_radius(chain)
    pi_result = None
    if verify and chain.dim:
        pi_result = power_iteration_radius(chain.sub_matrix_T)
        if pi_result.converged and abs(pi_result.value - rho) > RADIUS_AGREEMENT_TOL:
            raise TheoremCheckError(
                f"spectral radius mismatch: max diagonal {rho!r} vs power iteration {pi_result.value!r}"
            )
    m, residual = hitting_time_vector(chain)
    return AnalysisReport(
        chain=chain,
        rho_T=rho,
        rate_R=convergence_rate(rho),
        hitting_T=asymptotic_hitting_time(rho, m),
        m_vector=m,
        residual=residual,
        absorbing_traps=chain.trap_states(),
        power_iteration=pi_result,
        rate_time=rate_time_product(rho) if 0.0 < rho < 1.0 else None,
    )
