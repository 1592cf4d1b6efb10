"""Bitstring state spaces, fitness landscapes, and optimal/non-optimal partitions.

States are encoded as integers in [0, 2^n); bit i of the integer is the value of
the (i+1)-th coordinate of the bitstring. Fitness is a float per state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleSizeError

# Enumeration, landscape tables, and simulation lookups are capped here.
EXACT_MODE_MAX_N = 20
# Dense 2^n x 2^n kernels and chains are capped lower: n=13 already needs a
# 0.5 GiB matrix. Beyond this, the lumped (level) construction is the route.
DENSE_MATRIX_MAX_N = 13

BUILTIN_KINDS = ("onemax", "knapsack-example1", "staircase-example3", "custom-table")

# The bundled 10-item knapsack instance: one high-value heavy item that only
# fits alone, nine light fillers. Optimum is item 1 alone.
KNAPSACK_ITEM_VALUES = (10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
KNAPSACK_ITEM_WEIGHTS = (9.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
KNAPSACK_CAPACITY = 9.0


@dataclass(frozen=True)
class BitState:
    """A single bitstring, identified by its integer encoding."""

    index: int
    n: int

    def bits(self) -> tuple[int, ...]:
        return tuple((self.index >> i) & 1 for i in range(self.n))

    def ones(self) -> int:
        return self.index.bit_count()

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits())


def check_exact_size(n: int, *, what: str = "state enumeration") -> None:
    if not 1 <= n:
        raise ConfigError(f"n must be >= 1, got {n}")
    if n > EXACT_MODE_MAX_N:
        raise InfeasibleSizeError(
            f"{what} needs 2^{n} states; every exact workflow is capped at n <= "
            f"{EXACT_MODE_MAX_N}."
        )


def check_dense_size(n: int, *, what: str = "dense kernel") -> None:
    check_exact_size(n, what=what)
    if n > DENSE_MATRIX_MAX_N:
        raise InfeasibleSizeError(
            f"{what} needs a 2^{n} x 2^{n} dense matrix; dense construction is "
            f"capped at n <= {DENSE_MATRIX_MAX_N}. Use the lumped (level) mode, "
            "which is exact for popcount-symmetric landscapes."
        )


def enumerate_states(n: int) -> list[BitState]:
    """All 2^n states in index order."""
    check_exact_size(n)
    return [BitState(i, n) for i in range(2**n)]


def popcount_table(n: int) -> np.ndarray:
    """popcount of every index in [0, 2^n), built by doubling."""
    pc = np.zeros(1, dtype=np.uint8)
    for _ in range(n):
        pc = np.concatenate([pc, pc + 1])
    return pc


@dataclass
class FitnessLandscape:
    """A fitness table over the 2^n bitstrings."""

    kind: str
    n: int
    params: dict = field(default_factory=dict)
    values: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return 2**self.n

    def max_fitness(self) -> float:
        return float(self.values.max())

    def optimal_states(self) -> np.ndarray:
        return np.flatnonzero(self.values == self.values.max())

    def is_popcount_symmetric(self) -> bool:
        pc = popcount_table(self.n)
        for level in range(self.n + 1):
            level_vals = self.values[pc == level]
            if level_vals.size and np.ptp(level_vals) != 0.0:
                return False
        return True

    def level_values(self) -> np.ndarray:
        """Fitness per popcount level; errors if fitness is not a function of popcount."""
        pc = popcount_table(self.n)
        out = np.empty(self.n + 1)
        for level in range(self.n + 1):
            level_vals = self.values[pc == level]
            if np.ptp(level_vals) != 0.0:
                raise ConfigError(
                    f"landscape kind={self.kind!r} is not popcount-symmetric; "
                    "the lumped (level) mode does not apply"
                )
            out[level] = level_vals[0]
        return out


def staircase_level_fitness(n: int) -> np.ndarray:
    """Level fitness of the staircase landscape: odd levels below n/2 get a +2 bonus."""
    levels = np.arange(n + 1, dtype=np.float64)
    bonus = (2 * np.arange(n + 1) < n) & (np.arange(n + 1) % 2 == 1)
    return levels + 2.0 * bonus


def onemax_level_fitness(n: int) -> np.ndarray:
    return np.arange(n + 1, dtype=np.float64)


def level_fitness(kind: str, n: int, params: dict | None = None) -> np.ndarray:
    """Level fitness for a landscape kind without materializing the 2^n table.

    Only kinds whose fitness is a function of popcount by construction are
    supported; table-defined kinds must go through FitnessLandscape.level_values.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if kind == "onemax":
        return onemax_level_fitness(n)
    if kind == "staircase-example3":
        return staircase_level_fitness(n)
    raise ConfigError(
        f"landscape kind {kind!r} has no closed-form level fitness; "
        "build the full landscape and use level_values()"
    )


def build_landscape(kind: str, n: int, **params) -> FitnessLandscape:
    """Construct a fitness landscape table.

    kinds: onemax | knapsack-example1 | staircase-example3 | custom-table.
    knapsack-example1 takes item_values, item_weights, capacity (defaults to the
    bundled 10-item instance); custom-table takes table (2^n fitness values).
    """
    check_exact_size(n, what=f"landscape kind={kind!r}")
    size = 2**n
    pc = popcount_table(n).astype(np.float64)

    if kind == "onemax":
        if params:
            raise ConfigError(f"onemax takes no parameters, got {sorted(params)}")
        values = pc.copy()
    elif kind == "staircase-example3":
        if params:
            raise ConfigError(f"staircase-example3 takes no parameters, got {sorted(params)}")
        values = staircase_level_fitness(n)[popcount_table(n)]
    elif kind == "knapsack-example1":
        item_values = params.pop("item_values", None)
        item_weights = params.pop("item_weights", None)
        capacity = params.pop("capacity", None)
        if params:
            raise ConfigError(f"unknown knapsack parameters: {sorted(params)}")
        if item_values is None and item_weights is None and capacity is None:
            if n != 10:
                raise ConfigError(
                    "the bundled knapsack instance has 10 items; "
                    f"pass item_values/item_weights/capacity explicitly for n={n}"
                )
            item_values = KNAPSACK_ITEM_VALUES
            item_weights = KNAPSACK_ITEM_WEIGHTS
            capacity = KNAPSACK_CAPACITY
        if item_values is None or item_weights is None or capacity is None:
            raise ConfigError("knapsack needs all of item_values, item_weights, capacity")
        v = np.asarray(item_values, dtype=np.float64)
        w = np.asarray(item_weights, dtype=np.float64)
        if v.shape != (n,) or w.shape != (n,):
            raise ConfigError(
                f"knapsack item_values/item_weights must each have length n={n}, "
                f"got {v.shape[0]} and {w.shape[0]}"
            )
        if not (np.isfinite(v).all() and np.isfinite(w).all() and np.isfinite(capacity)):
            raise ConfigError("knapsack parameters must be finite")
        # bit matrix: row x, column i = bit i of x
        bits = (np.arange(size)[:, None] >> np.arange(n)[None, :]) & 1
        total_value = bits @ v
        total_weight = bits @ w
        values = np.where(total_weight <= float(capacity), total_value, 0.0)
        params = {
            "item_values": [float(x) for x in v],
            "item_weights": [float(x) for x in w],
            "capacity": float(capacity),
        }
    elif kind == "custom-table":
        table = params.pop("table", None)
        if params:
            raise ConfigError(f"unknown custom-table parameters: {sorted(params)}")
        if table is None:
            raise ConfigError("custom-table needs a table of 2^n fitness values")
        values = np.asarray(table, dtype=np.float64)
        if values.shape != (size,):
            raise ConfigError(f"custom-table needs exactly 2^{n}={size} values, got {values.shape[0]}")
        if not np.isfinite(values).all():
            raise ConfigError("custom-table fitness values must be finite")
        params = {"table": [float(x) for x in values]}
    else:
        raise ConfigError(f"unknown landscape kind {kind!r}; expected one of {BUILTIN_KINDS}")

    return FitnessLandscape(kind=kind, n=n, params=dict(params), values=values)


@dataclass
class Partition:
    """Optimal and non-optimal state indices in the canonical analysis order.

    Optimal states are sorted by ascending index. Non-optimal states are sorted
    by descending fitness, ties broken by ascending index, so the elitist chain
    matrix is lower-triangular on the non-optimal block.
    """

    optimal: np.ndarray
    non_optimal: np.ndarray
    max_fitness: float

    @property
    def order(self) -> np.ndarray:
        return np.concatenate([self.optimal, self.non_optimal])


def partition_values(values: np.ndarray) -> Partition:
    """Partition an arbitrary fitness vector (states or levels)."""
    fmax = values.max()
    optimal = np.flatnonzero(values == fmax)
    non = np.flatnonzero(values < fmax)
    # lexsort: last key is primary; descending fitness, then ascending index
    non_sorted = non[np.lexsort((non, -values[non]))]
    return Partition(optimal=optimal, non_optimal=non_sorted, max_fitness=float(fmax))


def partition_optimal(landscape: FitnessLandscape) -> Partition:
    return partition_values(landscape.values)
