"""Complementarity certificates and provably better mixed-strategy designs.

The mixture chain's diagonal is the strategy-weighted average of the operator
diagonals, state by state. A mixed strategy therefore beats the slowest pure
strategy whenever every slow state of one operator is strictly fast under
another; the designer places unit mass on a fast rescuer exactly at those
states.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import ElitistChain, analyze_chain, spectral_radius
from .errors import ComplementarityError, ConfigError, TheoremCheckError
from .mutate import StrategyDistribution

# Strict-separation margin for every certificate comparison.
CERT_MARGIN = 1e-12
DIAG_IDENTITY_TOL = 1e-12


@dataclass
class CertificateResult:
    kind: str
    holds: bool
    rho: list[float]
    threshold: float
    critical_states: list[int]
    rescuers: dict[int, int]
    violations: list[dict]
    operator_labels: list[str] = field(default_factory=list)

    def summary(self) -> str:
        status = "holds" if self.holds else f"fails at {len(self.violations)} state(s)"
        return f"{self.kind} complementarity {status}; threshold {self.threshold!r}"


def _aligned_diags(chains: list[ElitistChain]) -> np.ndarray:
    """Column-stack operator diagonals; all chains must share one partition."""
    if not chains:
        raise ConfigError("need at least one operator chain")
    base = chains[0]
    for c in chains[1:]:
        if c.size != base.size or not np.array_equal(c.partition.order, base.partition.order):
            raise ConfigError("operator chains must be built on the same landscape")
    return np.column_stack([c.diag for c in chains])


def check_pairwise(slow: ElitistChain, rescuer: ElitistChain) -> CertificateResult:
    """Does the second operator strictly escape every slowest state of the first?

    Critical states are those achieving the first operator's spectral radius
    (within the margin); at each, the second operator's diagonal must sit
    strictly below that radius by more than the margin.
    """
    diags = _aligned_diags([slow, rescuer])
    rho_a = spectral_radius(slow)
    rho_b = spectral_radius(rescuer)
    states = slow.non_optimal_states()
    critical = np.nonzero(diags[:, 0] >= rho_a - CERT_MARGIN)[0]
    rescuers: dict[int, int] = {}
    violations: list[dict] = []
    for i in critical:
        state = int(states[i])
        if diags[i, 1] < rho_a - CERT_MARGIN:
            rescuers[state] = 1
        else:
            violations.append({"state": state, "diags": [float(d) for d in diags[i]]})
    return CertificateResult(
        kind="pairwise",
        holds=not violations,
        rho=[rho_a, rho_b],
        threshold=rho_a,
        critical_states=[int(states[i]) for i in critical],
        rescuers=rescuers,
        violations=violations,
        operator_labels=[slow.label, rescuer.label],
    )


def check_mutual(chains: list[ElitistChain]) -> CertificateResult:
    """Mutual complementarity across a whole operator family.

    Let rho_min be the smallest operator radius. Wherever any operator's
    diagonal reaches rho_min (within the margin), some operator must sit
    strictly below rho_min by more than the margin.
    """
    if len(chains) < 2:
        raise ConfigError("mutual complementarity needs at least two operators")
    diags = _aligned_diags(chains)
    rho = [spectral_radius(c) for c in chains]
    rho_min = min(rho)
    states = chains[0].non_optimal_states()
    critical = np.nonzero(diags.max(axis=1) >= rho_min - CERT_MARGIN)[0]
    rescuers: dict[int, int] = {}
    violations: list[dict] = []
    for i in critical:
        state = int(states[i])
        best = int(diags[i].argmin())
        if diags[i, best] < rho_min - CERT_MARGIN:
            rescuers[state] = best
        else:
            violations.append({"state": state, "diags": [float(d) for d in diags[i]]})
    return CertificateResult(
        kind="mutual",
        holds=not violations,
        rho=rho,
        threshold=rho_min,
        critical_states=[int(states[i]) for i in critical],
        rescuers=rescuers,
        violations=violations,
        operator_labels=[c.label for c in chains],
    )


@dataclass
class MixedDesign:
    distribution: StrategyDistribution
    certificate: CertificateResult
    predicted_rho: float
    mode: str
    forced: dict[int, int]
    guarantee: str


def _free_rows(rule: None | int | np.ndarray, size: int, kappa: int) -> np.ndarray:
    if rule is None:
        return np.full((size, kappa), 1.0 / kappa)
    if isinstance(rule, (int, np.integer)):
        if not 0 <= rule < kappa:
            raise ConfigError(f"free-state operator index {rule} out of range for {kappa} operators")
        rows = np.zeros((size, kappa))
        rows[:, int(rule)] = 1.0
        return rows
    rows = np.asarray(rule, dtype=np.float64)
    if rows.shape != (size, kappa):
        raise ConfigError(f"free-state table must have shape {(size, kappa)}, got {rows.shape}")
    return rows.copy()


def design_mixed(
    chains: list[ElitistChain],
    mode: str = "mutual",
    free_state_rule: None | int | np.ndarray = None,
) -> MixedDesign:
    """Build a state-dependent operator distribution with a certified radius.

    mode="mutual": requires mutual complementarity; at every critical state the
    distribution puts unit mass on the operator with the smallest diagonal
    (ties break to the lowest operator index), so the mixture's radius lands
    strictly below every pure radius. Free states default to the uniform rule.

    mode="pairwise": two operators; requires the second to rescue the first's
    slowest states. Free states must follow the first operator (that is what
    the guarantee's bookkeeping needs), and the mixture's radius lands strictly
    below the first operator's radius.
    """
    if len(chains) < 2:
        raise ConfigError("designing a mixture needs at least two operators")
    kappa = len(chains)
    size = chains[0].size
    diags = _aligned_diags(chains)
    states = chains[0].non_optimal_states()

    if mode == "mutual":
        cert = check_mutual(chains)
        if not cert.holds:
            raise ComplementarityError(cert.summary(), certificate=cert)
        table = _free_rows(free_state_rule, size, kappa)
        guarantee = "radius strictly below every pure-operator radius"
    elif mode == "pairwise":
        if kappa != 2:
            raise ConfigError("pairwise design takes exactly two operators")
        if free_state_rule is not None and free_state_rule != 0:
            raise ConfigError("pairwise design requires free states to follow the first operator")
        cert = check_pairwise(chains[0], chains[1])
        if not cert.holds:
            raise ComplementarityError(cert.summary(), certificate=cert)
        table = _free_rows(0, size, kappa)
        guarantee = "radius strictly below the first operator's radius"
    else:
        raise ConfigError(f"unknown design mode {mode!r}; expected 'mutual' or 'pairwise'")

    forced: dict[int, int] = dict(cert.rescuers)
    for state, op in forced.items():
        table[state, :] = 0.0
        table[state, op] = 1.0
    dist = StrategyDistribution(table=table, labels=[c.label for c in chains])
    dist.validate()

    if diags.shape[0]:
        predicted = float((dist.table[states] * diags).sum(axis=1).max())
    else:
        predicted = 0.0
    if diags.shape[0] and predicted >= cert.threshold - CERT_MARGIN:
        raise TheoremCheckError(
            f"designed mixture predicts radius {predicted!r}, not strictly below {cert.threshold!r}"
        )
    return MixedDesign(
        distribution=dist,
        certificate=cert,
        predicted_rho=predicted,
        mode=mode,
        forced=forced,
        guarantee=guarantee,
    )


@dataclass
class DominanceReport:
    operator_rho: list[float]
    operator_T: list[float]
    mixed_rho: float
    mixed_T: float
    rho_bound: float
    T_bound: float
    diag_identity_error: float
    holds: bool


def dominance_report(
    operator_chains: list[ElitistChain],
    dist: StrategyDistribution,
    mixed_chain: ElitistChain,
) -> DominanceReport:
    """Check that a mixture never does worse than its worst component.

    Two independent routes must agree: the mixture chain built from the mixed
    kernel, and the strategy-weighted average of the operator diagonals. Then
    the mixture's radius (and so its asymptotic hitting time) must not exceed
    the worst pure operator's by more than the margin. A violation is an
    implementation bug, not a modeling outcome, so it raises.
    """
    diags = _aligned_diags(operator_chains + [mixed_chain])
    op_diags = diags[:, :-1]
    mixed_diag = diags[:, -1]
    states = mixed_chain.non_optimal_states()
    if dist.size != mixed_chain.size or dist.kappa != len(operator_chains):
        raise ConfigError("strategy table shape does not match the operator chains")
    if diags.shape[0]:
        predicted = (dist.table[states] * op_diags).sum(axis=1)
        identity_err = float(np.abs(predicted - mixed_diag).max())
    else:
        identity_err = 0.0
    if identity_err > DIAG_IDENTITY_TOL:
        raise TheoremCheckError(
            f"mixture diagonal disagrees with weighted operator diagonals by {identity_err:g}"
        )

    op_reports = [analyze_chain(c, verify=False) for c in operator_chains]
    mixed_report = analyze_chain(mixed_chain, verify=False)
    rho_bound = max(r.rho_T for r in op_reports)
    T_bound = max(r.hitting_T for r in op_reports)
    if mixed_report.rho_T > rho_bound + CERT_MARGIN:
        raise TheoremCheckError(
            f"mixture radius {mixed_report.rho_T!r} exceeds worst operator radius {rho_bound!r}"
        )
    if np.isfinite(T_bound) and not np.isfinite(mixed_report.hitting_T):
        raise TheoremCheckError("mixture hitting time is infinite while every operator's is finite")
    if np.isfinite(mixed_report.hitting_T) and np.isfinite(T_bound):
        slack = 1e-9 * max(1.0, T_bound)
        if mixed_report.hitting_T > T_bound + slack:
            raise TheoremCheckError(
                f"mixture hitting time {mixed_report.hitting_T!r} exceeds worst operator {T_bound!r}"
            )
    return DominanceReport(
        operator_rho=[r.rho_T for r in op_reports],
        operator_T=[r.hitting_T for r in op_reports],
        mixed_rho=mixed_report.rho_T,
        mixed_T=mixed_report.hitting_T,
        rho_bound=rho_bound,
        T_bound=T_bound,
        diag_identity_error=identity_err,
        holds=True,
    )
