"""Monte Carlo validation of the exact chain analysis.

Each run simulates the strict-elitist (1+1) EA procedurally at the bit level.
Proposals are drawn in batches from the current parent; a batch is a block of
i.i.d. children, so scanning to the first acceptance and discarding the rest
reproduces the chain exactly. Run r consumes the dedicated stream
PCG64(SeedSequence(master_seed, spawn_key=(r,))), which makes every run
independent of execution order and of worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .mutate import PER_BIT, OperatorSpec
from .space import check_exact_size

BATCH = 4096
RNG_SCHEME = "pcg64/seedseq(master_seed; spawn_key=(run_index,))"


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """The dedicated generator for one run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(run_index,))))


def propose_batch(rng: np.random.Generator, x: int, op: OperatorSpec, n: int, count: int) -> np.ndarray:
    """Sample `count` i.i.d. mutation children of parent x."""
    if op.kind == PER_BIT:
        flips = rng.random((count, n)) < op.p
        masks = flips @ (np.int64(1) << np.arange(n, dtype=np.int64))
        return np.int64(x) ^ masks
    bits = rng.integers(0, n, size=count)
    return np.int64(x) ^ (np.int64(1) << bits)


@dataclass
class SimStrategy:
    """Picklable operator-selection rule.

    mode "pure": always operators[operator_index].
    mode "row": one state-independent probability row.
    mode "table": a probability row per state.
    """

    mode: str
    operator_index: int = 0
    row: np.ndarray | None = None
    table: np.ndarray | None = None

    def probs_at(self, x: int) -> np.ndarray:
        if self.mode == "row":
            return self.row
        return self.table[x]


@dataclass
class RunConfig:
    n: int
    values: np.ndarray = field(repr=False)
    operators: list[OperatorSpec]
    strategy: SimStrategy
    init: str | int | np.ndarray
    max_generations: int
    master_seed: int

    def validate(self) -> None:
        check_exact_size(self.n, what="simulation")
        if self.values.shape != (2**self.n,):
            raise ConfigError(f"fitness table must have length {2**self.n}, got {self.values.shape}")
        if not self.operators:
            raise ConfigError("simulation needs at least one operator")
        if self.max_generations < 1:
            raise ConfigError(f"max_generations must be >= 1, got {self.max_generations}")
        if self.strategy.mode == "pure":
            if not 0 <= self.strategy.operator_index < len(self.operators):
                raise ConfigError("pure strategy operator index out of range")
        elif self.strategy.mode == "row":
            if self.strategy.row is None or self.strategy.row.shape != (len(self.operators),):
                raise ConfigError("row strategy needs one probability per operator")
        elif self.strategy.mode == "table":
            if self.strategy.table is None or self.strategy.table.shape != (2**self.n, len(self.operators)):
                raise ConfigError("table strategy needs a probability row per state")
        else:
            raise ConfigError(f"unknown strategy mode {self.strategy.mode!r}")
        if isinstance(self.init, str):
            if self.init != "uniform":
                raise ConfigError(f"unknown init {self.init!r}")
        elif isinstance(self.init, (int, np.integer)):
            if not 0 <= self.init < 2**self.n:
                raise ConfigError(f"init state {self.init} out of range")
        else:
            probs = np.asarray(self.init, dtype=np.float64)
            if probs.shape != (2**self.n,) or (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
                raise ConfigError("init distribution must be a probability vector over all states")


@dataclass(frozen=True)
class RunOutcome:
    run_index: int
    start_state: int
    generations: int
    censored: bool
    final_state: int
    final_fitness: float


def _draw_start(cfg: RunConfig, rng: np.random.Generator) -> int:
    if isinstance(cfg.init, str):
        return int(rng.integers(0, 2**cfg.n))
    if isinstance(cfg.init, (int, np.integer)):
        return int(cfg.init)
    return int(rng.choice(2**cfg.n, p=np.asarray(cfg.init, dtype=np.float64)))


def run_once(cfg: RunConfig, run_index: int) -> RunOutcome:
    """One censored run; generations counts mutation proposals."""
    rng = run_rng(cfg.master_seed, run_index)
    values = cfg.values
    fmax = values.max()
    x = _draw_start(cfg, rng)
    start = x
    fx = values[x]
    t = 0
    cap = int(cfg.max_generations)
    kappa = len(cfg.operators)
    pure = cfg.strategy.mode == "pure" or kappa == 1
    pure_index = cfg.strategy.operator_index if cfg.strategy.mode == "pure" else 0

    while fx != fmax:
        remaining = cap - t
        if remaining <= 0:
            return RunOutcome(run_index, start, cap, True, int(x), float(fx))
        b = min(BATCH, remaining)
        if pure:
            children = propose_batch(rng, x, cfg.operators[pure_index], cfg.n, b)
        else:
            probs = cfg.strategy.probs_at(x)
            picks = np.searchsorted(np.cumsum(probs), rng.random(b), side="right")
            picks = np.minimum(picks, kappa - 1)
            children = np.empty(b, dtype=np.int64)
            for k in range(kappa):
                block = picks == k
                hits = int(block.sum())
                if hits:
                    children[block] = propose_batch(rng, x, cfg.operators[k], cfg.n, hits)
        accepted = values[children] > fx
        if accepted.any():
            j = int(accepted.argmax())
            t += j + 1
            x = int(children[j])
            fx = values[x]
        else:
            t += b
    return RunOutcome(run_index, start, t, False, int(x), float(fx))


def _run_chunk(cfg: RunConfig, indices: list[int]) -> list[RunOutcome]:
    return [run_once(cfg, r) for r in indices]


@dataclass
class EstimateResult:
    outcomes: list[RunOutcome]
    master_seed: int
    max_generations: int
    rng_scheme: str = RNG_SCHEME

    @property
    def n_runs(self) -> int:
        return len(self.outcomes)

    @property
    def censored_count(self) -> int:
        return sum(1 for o in self.outcomes if o.censored)

    @property
    def uncensored_count(self) -> int:
        return self.n_runs - self.censored_count

    def _uncensored_gens(self) -> np.ndarray:
        return np.array([o.generations for o in self.outcomes if not o.censored], dtype=np.float64)

    @property
    def mean_uncensored(self) -> float | None:
        gens = self._uncensored_gens()
        return float(gens.mean()) if gens.size else None

    @property
    def std_uncensored(self) -> float | None:
        gens = self._uncensored_gens()
        if gens.size < 2:
            return None
        return float(gens.std(ddof=1))

    @property
    def stderr(self) -> float | None:
        std = self.std_uncensored
        if std is None:
            return None
        return std / math.sqrt(self.uncensored_count)

    @property
    def mean_capped(self) -> float:
        if not self.outcomes:
            return 0.0
        return float(np.mean([o.generations for o in self.outcomes]))


def estimate(cfg: RunConfig, runs: int, workers: int = 1) -> EstimateResult:
    """Run `runs` independent censored runs; the outcome list is identical for
    any worker count because each run owns its seed-derived stream."""
    cfg.validate()
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    indices = list(range(runs))
    if workers == 1:
        outcomes = _run_chunk(cfg, indices)
    else:
        chunks = [indices[i::workers] for i in range(workers) if indices[i::workers]]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(chunks), chunks))
        outcomes = sorted((o for part in parts for o in part), key=lambda o: o.run_index)
    return EstimateResult(outcomes=outcomes, master_seed=cfg.master_seed, max_generations=int(cfg.max_generations))


@dataclass(frozen=True)
class CrossValidation:
    exact_expected: float
    mean_uncensored: float | None
    stderr: float | None
    z: float
    agree: bool
    censored_count: int


def cross_validate(est: EstimateResult, exact_expected: float, z_limit: float = 3.0) -> CrossValidation:
    """z-score of the empirical mean against the exact expected hitting time;
    |z| beyond z_limit flags disagreement."""
    mean = est.mean_uncensored
    stderr = est.stderr
    if mean is None:
        z = math.inf if math.isfinite(exact_expected) else 0.0
    elif not math.isfinite(exact_expected):
        z = math.inf
    elif stderr is None or stderr == 0.0:
        z = 0.0 if mean == exact_expected else math.inf
    else:
        z = (mean - exact_expected) / stderr
    return CrossValidation(
        exact_expected=exact_expected,
        mean_uncensored=mean,
        stderr=stderr,
        z=float(z),
        agree=abs(z) <= z_limit,
        censored_count=est.censored_count,
    )
