"""Shared fixtures and independent oracle helpers.

The oracle functions recompute chain quantities straight from their
definitions: explicit loops for the acceptance rule, a general eigensolver
for the radius, a generic dense solve for hitting times. They deliberately
avoid the package's canonical ordering and triangular shortcuts, so
agreement between the two routes is evidence, not tautology.
"""
from __future__ import annotations

import numpy as np
import pytest

from eamix.space import build_landscape


def oracle_full_matrix(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Strict-elitist transition matrix in original state order, by loops."""
    size = len(values)
    P = np.zeros((size, size))
    for x in range(size):
        keep = 0.0
        for y in range(size):
            if values[y] > values[x]:
                P[x, y] = kernel[x, y]
            else:
                keep += kernel[x, y]
        P[x, x] += keep
    return P


def oracle_non_optimal(values: np.ndarray) -> list[int]:
    fmax = max(values)
    return [i for i in range(len(values)) if values[i] < fmax]


def oracle_canonical_order(values: np.ndarray) -> tuple[list[int], int]:
    """Optimal states by ascending index, then the rest by descending fitness
    with ascending-index ties. Returns (order, optimal count)."""
    fmax = max(values)
    optimal = [i for i in range(len(values)) if values[i] == fmax]
    non = sorted(oracle_non_optimal(values), key=lambda i: (-values[i], i))
    return optimal + non, len(optimal)


def oracle_sub_matrix(values: np.ndarray, kernel: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Non-optimal block in plain ascending index order. Eigenvalues do not
    care about the ordering, which keeps this oracle free of the canonical
    permutation entirely."""
    idx = oracle_non_optimal(values)
    P = oracle_full_matrix(values, kernel)
    return P[np.ix_(idx, idx)], idx


def oracle_radius(values: np.ndarray, kernel: np.ndarray) -> float:
    sub, _ = oracle_sub_matrix(values, kernel)
    if sub.shape[0] == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(sub)).max())


def oracle_hitting(values: np.ndarray, kernel: np.ndarray) -> dict[int, float]:
    """Hitting time per non-optimal state; only valid when every state has a
    path to the optimum (no zero-escape traps)."""
    sub, idx = oracle_sub_matrix(values, kernel)
    dim = sub.shape[0]
    m = np.linalg.solve(np.eye(dim) - sub, np.ones(dim))
    return {state: float(v) for state, v in zip(idx, m)}


@pytest.fixture(scope="session")
def onemax6():
    return build_landscape("onemax", 6)


@pytest.fixture(scope="session")
def onemax10():
    return build_landscape("onemax", 10)


@pytest.fixture(scope="session")
def knapsack10():
    return build_landscape("knapsack-example1", 10)


@pytest.fixture(scope="session")
def staircase8():
    return build_landscape("staircase-example3", 8)
