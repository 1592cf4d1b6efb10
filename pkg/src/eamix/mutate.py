"""Mutation operators: dense transition kernels, level-lumped kernels, and mixtures."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, log, log1p

import numpy as np

from .errors import ConfigError
from .space import check_dense_size, popcount_table

ROW_SUM_TOL = 1e-12
# Entries smaller than this are clamped to exact zero (no renormalization).
UNDERFLOW_CLAMP = 1e-300

PER_BIT = "per-bit-flip"
SINGLE_BIT = "single-bit-flip"
OPERATOR_KINDS = (PER_BIT, SINGLE_BIT)


@dataclass(frozen=True)
class OperatorSpec:
    """Procedural description of a mutation operator; shared by the exact and
    simulation paths so both draw from the same definition."""

    kind: str
    p: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ConfigError(f"unknown operator kind {self.kind!r}; expected one of {OPERATOR_KINDS}")
        if self.kind == PER_BIT:
            if self.p is None or not 0.0 < self.p < 1.0:
                raise ConfigError(f"per-bit-flip needs 0 < p < 1, got {self.p}")
        elif self.p is not None:
            raise ConfigError("single-bit-flip takes no probability parameter")
        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    def default_label(self) -> str:
        if self.kind == PER_BIT:
            return f"per-bit-flip(p={self.p:g})"
        return "single-bit-flip"


@dataclass
class MutationKernel:
    """Row-stochastic mutation transition matrix.

    space == "states": indexed by the 2^n bitstrings.
    space == "levels": indexed by popcount levels 0..n (exact lumping for
    popcount-symmetric landscapes; both built-in operators treat bit positions
    exchangeably).
    """

    n: int
    matrix: np.ndarray = field(repr=False)
    label: str
    space: str = "states"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def validate(self) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"kernel matrix must be square, got {m.shape}")
        expected = 2**self.n if self.space == "states" else self.n + 1
        if m.shape[0] != expected:
            raise ConfigError(f"kernel over {self.space} with n={self.n} must have {expected} rows")
        if (m < 0).any():
            raise ConfigError("kernel has negative entries")
        err = np.abs(m.sum(axis=1) - 1.0).max()
        if err > ROW_SUM_TOL:
            raise ConfigError(f"kernel rows must sum to 1 within {ROW_SUM_TOL}, max error {err:g}")


def _hamming_weights(n: int, p: float) -> np.ndarray:
    """w[H] = p^H (1-p)^(n-H), computed in log space and clamped at underflow."""
    h = np.arange(n + 1, dtype=np.float64)
    w = np.exp(h * log(p) + (n - h) * log1p(-p))
    w[w < UNDERFLOW_CLAMP] = 0.0
    return w


def per_bit_flip(n: int, p: float, label: str | None = None) -> MutationKernel:
    """Kernel of independent per-bit flips: P(x,y) = p^H (1-p)^(n-H), H = Hamming distance."""
    if not 0.0 < p < 1.0:
        raise ConfigError(f"per-bit-flip needs 0 < p < 1, got {p}")
    check_dense_size(n, what="per-bit-flip kernel")
    w = _hamming_weights(n, p)
    pc = popcount_table(n)
    states = np.arange(2**n)
    matrix = w[pc[np.bitwise_xor.outer(states, states)]]
    kernel = MutationKernel(n=n, matrix=matrix, label=label or f"per-bit-flip(p={p:g})")
    kernel.validate()
    return kernel


def single_bit_flip(n: int, label: str | None = None) -> MutationKernel:
    """Kernel that flips exactly one uniformly chosen bit; zero diagonal."""
    check_dense_size(n, what="single-bit-flip kernel")
    size = 2**n
    matrix = np.zeros((size, size))
    states = np.arange(size)
    for i in range(n):
        matrix[states, states ^ (1 << i)] = 1.0 / n
    kernel = MutationKernel(n=n, matrix=matrix, label=label or "single-bit-flip")
    kernel.validate()
    return kernel


def per_bit_flip_levels(n: int, p: float, label: str | None = None) -> MutationKernel:
    """Level-lumped per-bit-flip kernel.

    From level i, flipping a of the i ones and b of the n-i zeros lands on
    level i-a+b with probability C(i,a) C(n-i,b) p^(a+b) (1-p)^(n-a-b).
    """
    if not 0.0 < p < 1.0:
        raise ConfigError(f"per-bit-flip needs 0 < p < 1, got {p}")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    matrix = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for a in range(i + 1):
            for b in range(n - i + 1):
                term = comb(i, a) * comb(n - i, b) * np.exp(
                    (a + b) * log(p) + (n - a - b) * log1p(-p)
                )
                if term < UNDERFLOW_CLAMP:
                    term = 0.0
                matrix[i, i - a + b] += term
    kernel = MutationKernel(
        n=n, matrix=matrix, label=label or f"per-bit-flip(p={p:g})", space="levels"
    )
    kernel.validate()
    return kernel


def single_bit_flip_levels(n: int, label: str | None = None) -> MutationKernel:
    """Level-lumped single-bit-flip kernel: i -> i-1 w.p. i/n, i -> i+1 w.p. (n-i)/n."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    matrix = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        if i > 0:
            matrix[i, i - 1] = i / n
        if i < n:
            matrix[i, i + 1] = (n - i) / n
    kernel = MutationKernel(n=n, matrix=matrix, label=label or "single-bit-flip", space="levels")
    kernel.validate()
    return kernel


def kernel_for(spec: OperatorSpec, n: int, space: str = "states") -> MutationKernel:
    """Materialize the kernel of an operator spec over states or levels."""
    if space == "states":
        if spec.kind == PER_BIT:
            return per_bit_flip(n, spec.p, label=spec.label)
        return single_bit_flip(n, label=spec.label)
    if space == "levels":
        if spec.kind == PER_BIT:
            return per_bit_flip_levels(n, spec.p, label=spec.label)
        return single_bit_flip_levels(n, label=spec.label)
    raise ConfigError(f"unknown kernel space {space!r}")


@dataclass
class StrategyDistribution:
    """State-dependent probability distribution over operators: row x gives the
    probability of picking each operator when the parent is state x."""

    table: np.ndarray = field(repr=False)
    labels: list[str] = field(default_factory=list)

    @property
    def kappa(self) -> int:
        return self.table.shape[1]

    @property
    def size(self) -> int:
        return self.table.shape[0]

    def validate(self) -> None:
        t = self.table
        if t.ndim != 2:
            raise ConfigError(f"strategy table must be 2-D (states x operators), got shape {t.shape}")
        if t.shape[1] < 1:
            raise ConfigError("strategy table needs at least one operator column")
        if (t < 0).any():
            raise ConfigError("strategy table has negative probabilities")
        err = np.abs(t.sum(axis=1) - 1.0).max()
        if err > ROW_SUM_TOL:
            raise ConfigError(f"strategy rows must sum to 1 within {ROW_SUM_TOL}, max error {err:g}")

    @classmethod
    def uniform(cls, size: int, kappa: int, labels: list[str] | None = None) -> "StrategyDistribution":
        dist = cls(table=np.full((size, kappa), 1.0 / kappa), labels=labels or [])
        dist.validate()
        return dist

    @classmethod
    def pure(cls, size: int, kappa: int, index: int, labels: list[str] | None = None) -> "StrategyDistribution":
        if not 0 <= index < kappa:
            raise ConfigError(f"pure operator index {index} out of range for {kappa} operators")
        table = np.zeros((size, kappa))
        table[:, index] = 1.0
        dist = cls(table=table, labels=labels or [])
        dist.validate()
        return dist


def mix(kernels: list[MutationKernel], dist: StrategyDistribution) -> MutationKernel:
    """Mixture kernel: row x is the dist-weighted average of the operator rows at x."""
    if len(kernels) < 1:
        raise ConfigError("mix needs at least one kernel")
    if dist.kappa != len(kernels):
        raise ConfigError(f"strategy table has {dist.kappa} columns for {len(kernels)} kernels")
    first = kernels[0]
    for k in kernels[1:]:
        if k.n != first.n or k.space != first.space:
            raise ConfigError("all kernels in a mixture must share n and space")
    if dist.size != first.size:
        raise ConfigError(f"strategy table has {dist.size} rows for {first.size} states")
    dist.validate()
    matrix = np.zeros_like(first.matrix)
    for col, kernel in enumerate(kernels):
        matrix += dist.table[:, col : col + 1] * kernel.matrix
    label = "mix(" + ", ".join(k.label for k in kernels) + ")"
    mixed = MutationKernel(n=first.n, matrix=matrix, label=label, space=first.space)
    mixed.validate()
    return mixed
