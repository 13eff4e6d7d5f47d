"""Genetic search over library masks and ridge/threshold hyperparameters.

A genome is a boolean mask over the candidate library plus ``log10`` of the
ridge penalty ``lambda1`` and the threshold ``lambda2``. Each genome is scored
by fitting STRidge on the masked library and combining training error,
validation error and the (normalized) number of active terms:

    loss = alpha * mse_train + beta * mse_valid + (1 - alpha - beta) * N / |lib|
    fitness = 1 - loss

A candidate is feasible when its training MSE is below ``epsilon``. Ranking
uses the key ``(feasible, fitness)`` so any feasible candidate beats any
infeasible one.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ._io import read_csv_columns, write_csv
from .errors import ConfigError, DivergenceError, FeatureEvaluationError
from .library import FeatureLibrary, RegressionData, SelectedLibrary
from .stridge import RolloutPlan, SparseErrorModel, stridge_fit_gram

__all__ = [
    "Genome",
    "GaConfig",
    "EvaluatedCandidate",
    "CandidateEvaluator",
    "GenerationStats",
    "GaResult",
    "evaluate_candidate",
    "tournament_select",
    "crossover",
    "mutate",
    "random_genome",
    "run_ga",
    "save_history_csv",
    "load_history_csv",
]


@dataclass(frozen=True, eq=False)
class Genome:
    mask: np.ndarray
    log_lambda1: float
    log_lambda2: float

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 1 or not mask.any():
            raise ConfigError("genome mask must be 1-D with at least one bit set")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "log_lambda1", float(self.log_lambda1))
        object.__setattr__(self, "log_lambda2", float(self.log_lambda2))

    @property
    def lambda1(self) -> float:
        return 10.0**self.log_lambda1

    @property
    def lambda2(self) -> float:
        return 10.0**self.log_lambda2

    @property
    def key(self) -> tuple:
        return (np.packbits(self.mask).tobytes(), self.log_lambda1, self.log_lambda2)

    def __eq__(self, other) -> bool:
        return isinstance(other, Genome) and self.key == other.key and self.mask.size == other.mask.size

    def __hash__(self) -> int:
        return hash(self.key)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 64
    generations: int = 100
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate_mask: float | None = None
    mutation_sigma_lambda: float = 0.25
    alpha: float = 0.45
    beta: float = 0.45
    epsilon: float = 1e-4
    stagnation_patience: int = 20
    seed: int = 0
    lambda1_bounds: tuple[float, float] = (-12.0, 2.0)
    lambda2_bounds: tuple[float, float] = (-8.0, 1.0)
    init_mask_prob: float = 0.5
    max_iters: int = 10
    raw_count: bool = False
    loss_scaling: str = "absolute"
    validation_mode: str = "one_step"
    refit_final: bool = True
    min_improvement: float = 1e-9
    n_jobs: int = 1

    def __post_init__(self):
        if self.population_size < 2 or self.generations < 0 or self.tournament_size < 1:
            raise ConfigError("population_size >= 2, generations >= 0 and tournament_size >= 1 are required")
        if not (self.alpha >= 0 and self.beta >= 0 and self.alpha + self.beta < 1):
            raise ConfigError("loss weights need alpha >= 0, beta >= 0 and alpha + beta < 1")
        rates = [self.crossover_rate, self.init_mask_prob]
        if self.mutation_rate_mask is not None:
            rates.append(self.mutation_rate_mask)
        if any(not 0 <= r <= 1 for r in rates):
            raise ConfigError("rates must lie in [0, 1]")
        if self.mutation_sigma_lambda < 0 or self.epsilon <= 0:
            raise ConfigError("mutation_sigma_lambda must be >= 0 and epsilon > 0")
        for lo, hi in (self.lambda1_bounds, self.lambda2_bounds):
            if not lo <= hi:
                raise ConfigError("lambda bounds must satisfy lo <= hi")
        if self.loss_scaling not in ("absolute", "relative"):
            raise ConfigError("loss_scaling must be 'absolute' or 'relative'")
        if self.validation_mode not in ("one_step", "free_running"):
            raise ConfigError("validation_mode must be 'one_step' or 'free_running'")
        if self.stagnation_patience < 1 or self.max_iters < 1 or self.n_jobs < 1:
            raise ConfigError("stagnation_patience, max_iters and n_jobs must be >= 1")

    def mask_rate(self, n_library: int) -> float:
        return 1.0 / n_library if self.mutation_rate_mask is None else self.mutation_rate_mask

    @classmethod
    def from_dict(cls, d) -> "GaConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown GA options: {', '.join(sorted(unknown))}")
        d = dict(d)
        for k in ("lambda1_bounds", "lambda2_bounds"):
            if k in d:
                d[k] = tuple(float(v) for v in d[k])
        return cls(**d)


@dataclass(eq=False)
class EvaluatedCandidate:
    genome: Genome
    library: FeatureLibrary
    xi: np.ndarray  # full-library length, zero outside the fitted support
    mse_train: float
    mse_valid: float
    n_active: int
    loss: float
    fitness: float
    feasible: bool
    lambda1: float = float("nan")
    note: str = ""

    @property
    def rank_key(self) -> tuple[bool, float]:
        return (self.feasible, self.fitness)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.xi)

    @property
    def model(self) -> SparseErrorModel:
        sel = SelectedLibrary(self.library, self.genome.mask)
        lam1 = self.genome.lambda1 if math.isnan(self.lambda1) else self.lambda1
        return SparseErrorModel(sel, self.xi[sel.ids], lam1, self.genome.lambda2, self.mse_train)


class CandidateEvaluator:
    """Scores genomes against fixed training and validation data.

    The full design matrices, their Gram matrix and right-hand side are
    computed once; each genome then only solves small ridge systems on its
    masked columns. Columns that cannot be evaluated on the data make every
    genome using them infeasible. Results are cached by genome.
    """

    def __init__(self, config: GaConfig, train: RegressionData, valid: RegressionData, library: FeatureLibrary):
        self.config = config
        self.library = library
        self.n_library = len(library)
        self.theta_train, bad_tr = _columns(library, train.X)
        self.theta_valid, bad_va = _columns(library, valid.X)
        self.bad = bad_tr | bad_va
        self.y_train = train.y
        self.y_valid = valid.y
        self.gram = self.theta_train.T @ self.theta_train
        self.rhs = self.theta_train.T @ self.y_train
        if config.loss_scaling == "relative":
            self.scale_train = 1.0 / max(float(np.mean(train.y**2)), 1e-300)
            self.scale_valid = 1.0 / max(float(np.mean(valid.y**2)), 1e-300)
        else:
            self.scale_train = self.scale_valid = 1.0
        self.plans = []
        if config.validation_mode == "free_running":
            for seg in valid.segments:
                plan = RolloutPlan(library, seg.current, seg.c_sp, seg.c_sn, np.flatnonzero(~self.bad))
                self.plans.append((plan, seg.e_r))
        self._cache: dict[tuple, EvaluatedCandidate] = {}

    def __call__(self, genome: Genome) -> EvaluatedCandidate:
        hit = self._cache.get(genome.key)
        if hit is None:
            hit = self._evaluate(genome)
            self._cache[genome.key] = hit
        return hit

    def evaluate_many(self, genomes: Sequence[Genome]) -> list[EvaluatedCandidate]:
        todo = list({g.key: g for g in genomes if g.key not in self._cache}.values())
        if self.config.n_jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.config.n_jobs) as pool:
                results = list(pool.map(self._evaluate, todo))
        else:
            results = [self._evaluate(g) for g in todo]
        for g, r in zip(todo, results):
            self._cache[g.key] = r
        return [self._cache[g.key] for g in genomes]

    def _failed(self, genome: Genome, note: str) -> EvaluatedCandidate:
        inf = float("inf")
        return EvaluatedCandidate(
            genome, self.library, np.zeros(self.n_library), inf, inf, 0, inf, -inf, False, note=note
        )

    def _evaluate(self, genome: Genome) -> EvaluatedCandidate:
        if genome.mask.size != self.n_library:
            raise ConfigError(f"genome mask has {genome.mask.size} bits, library has {self.n_library}")
        ids = np.flatnonzero(genome.mask)
        if self.bad[ids].any():
            return self._failed(genome, f"descriptor {int(ids[self.bad[ids]][0])} cannot be evaluated")
        res = stridge_fit_gram(
            self.gram[np.ix_(ids, ids)], self.rhs[ids], genome.lambda1, genome.lambda2, self.config.max_iters
        )
        xi = np.zeros(self.n_library)
        xi[ids] = res.xi
        return self.score(genome, xi)

    def score(self, genome: Genome, xi: np.ndarray, lambda1: float = float("nan")) -> EvaluatedCandidate:
        """Loss and feasibility for explicit full-length coefficients ``xi``."""
        support = np.flatnonzero(xi)
        if not np.all(np.isfinite(xi)):
            return self._failed(genome, "non-finite coefficients")
        cfg = self.config
        mse_train = _mse(self.y_train, self.theta_train[:, support] @ xi[support])
        try:
            mse_valid = self._valid_mse(support, xi[support])
        except (DivergenceError, FeatureEvaluationError) as exc:
            return self._failed(genome, f"validation rollout failed: {exc}")
        n_active = int(support.size)
        count = n_active if cfg.raw_count else n_active / self.n_library
        loss = (
            cfg.alpha * mse_train * self.scale_train
            + cfg.beta * mse_valid * self.scale_valid
            + (1.0 - cfg.alpha - cfg.beta) * count
        )
        if not math.isfinite(loss):
            return self._failed(genome, "non-finite loss")
        return EvaluatedCandidate(
            genome, self.library, xi, mse_train, mse_valid, n_active, loss, 1.0 - loss,
            mse_train < cfg.epsilon, lambda1,
        )

    def _valid_mse(self, support, coefs) -> float:
        if not self.plans:
            return _mse(self.y_valid, self.theta_valid[:, support] @ coefs)
        sq, n = 0.0, 0
        for plan, e_r in self.plans:
            pred = plan.run(support, coefs, e0=float(e_r[0]))
            sq += float(np.sum((e_r[1:] - pred[1:]) ** 2))
            n += e_r.size - 1
        return sq / n


def _columns(library: FeatureLibrary, X) -> tuple[np.ndarray, np.ndarray]:
    theta = np.zeros((X.shape[0], len(library)))
    bad = np.zeros(len(library), dtype=bool)
    for i in range(len(library)):
        try:
            theta[:, i] = library.evaluate(X, [i])[:, 0]
        except FeatureEvaluationError:
            bad[i] = True
    return theta, bad


def _mse(y, pred) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        v = float(np.mean((y - pred) ** 2))
    return v if math.isfinite(v) else float("inf")


def evaluate_candidate(
    genome: Genome,
    train_data: RegressionData,
    valid_data: RegressionData,
    lib: FeatureLibrary,
    config: GaConfig | None = None,
) -> EvaluatedCandidate:
    """Score a single genome (builds a throwaway evaluator)."""
    return CandidateEvaluator(config or GaConfig(), train_data, valid_data, lib)(genome)


# -- variation operators -----------------------------------------------------


def random_genome(n_library: int, config: GaConfig, rng: np.random.Generator) -> Genome:
    mask = rng.random(n_library) < config.init_mask_prob
    _repair(mask, rng)
    return Genome(mask, rng.uniform(*config.lambda1_bounds), rng.uniform(*config.lambda2_bounds))


def _repair(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if not mask.any():
        mask[rng.integers(mask.size)] = True
    return mask


def tournament_select(population: Sequence[EvaluatedCandidate], k: int, rng: np.random.Generator) -> Genome:
    """Best of ``k`` uniform draws (with replacement) by ``(feasible, fitness)``."""
    draws = rng.integers(len(population), size=k)
    best = max(draws, key=lambda j: population[j].rank_key)
    return population[best].genome


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> tuple[Genome, Genome]:
    """Uniform mask crossover and a log-space arithmetic blend of the lambdas."""
    swap = rng.random(a.mask.size) < 0.5
    m1 = np.where(swap, b.mask, a.mask)
    m2 = np.where(swap, a.mask, b.mask)
    w = rng.random()
    l1 = (w * a.log_lambda1 + (1 - w) * b.log_lambda1, (1 - w) * a.log_lambda1 + w * b.log_lambda1)
    l2 = (w * a.log_lambda2 + (1 - w) * b.log_lambda2, (1 - w) * a.log_lambda2 + w * b.log_lambda2)
    return (
        Genome(_repair(m1, rng), l1[0], l2[0]),
        Genome(_repair(m2, rng), l1[1], l2[1]),
    )


def mutate(g: Genome, rng: np.random.Generator, config: GaConfig | None = None) -> Genome:
    """Per-bit flips and clipped Gaussian steps on the log-lambdas."""
    config = config or GaConfig()
    flips = rng.random(g.mask.size) < config.mask_rate(g.mask.size)
    mask = _repair(g.mask ^ flips, rng)
    sigma = config.mutation_sigma_lambda
    l1 = np.clip(g.log_lambda1 + sigma * rng.standard_normal(), *config.lambda1_bounds)
    l2 = np.clip(g.log_lambda2 + sigma * rng.standard_normal(), *config.lambda2_bounds)
    return Genome(mask, l1, l2)


# -- the search loop ---------------------------------------------------------


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_n_active: int
    best_mse_train: float
    best_mse_valid: float
    best_feasible: bool
    n_feasible: int


@dataclass(eq=False)
class GaResult:
    best: EvaluatedCandidate
    history: list[GenerationStats]
    warning: bool = False
    evaluations: int = 0
    population: list[EvaluatedCandidate] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        return iter((self.best, self.history))

    @property
    def model(self) -> SparseErrorModel:
        return self.best.model


def _stats(g: int, pop: list[EvaluatedCandidate]) -> GenerationStats:
    best = pop[0]
    finite = [c.fitness for c in pop if math.isfinite(c.fitness)]
    return GenerationStats(
        g,
        best.fitness,
        float(np.mean(finite)) if finite else float("nan"),
        best.n_active,
        best.mse_train,
        best.mse_valid,
        best.feasible,
        sum(c.feasible for c in pop),
    )


def _truncate(candidates: list[EvaluatedCandidate], size: int) -> list[EvaluatedCandidate]:
    unique = list({c.genome.key: c for c in reversed(candidates)}.values())[::-1]
    unique.sort(key=lambda c: c.rank_key, reverse=True)
    return unique[:size]


def _improved(new: tuple, old: tuple, tol: float) -> bool:
    if new[0] != old[0]:
        return new[0] > old[0]
    return new[1] > old[1] + tol


def run_ga(
    config: GaConfig,
    train: RegressionData,
    valid: RegressionData,
    lib: FeatureLibrary,
    initial_population: Sequence[Genome] | None = None,
) -> GaResult:
    """Evolve genomes and return the best candidate plus per-generation stats.

    Each generation draws ``population_size // 2`` parent pairs by tournament,
    applies crossover (with probability ``crossover_rate``) and mutation, and
    merges the children into the population (mu + lambda). Only feasible
    children join unless fewer than two feasible candidates exist among
    parents and children. The population is truncated back to its size by
    ``(feasible, fitness)``, so the best candidate always survives. Every
    parent pair draws from its own stream seeded by ``(seed, generation,
    pair)``, so the result does not depend on evaluation scheduling.
    """
    evaluator = CandidateEvaluator(config, train, valid, lib)
    n_lib = len(lib)
    if initial_population is None:
        rng0 = np.random.default_rng([config.seed, 0])
        genomes = [random_genome(n_lib, config, rng0) for _ in range(config.population_size)]
    else:
        genomes = list(initial_population)
        if not genomes:
            raise ConfigError("initial population is empty")
    pop = sorted(evaluator.evaluate_many(genomes), key=lambda c: c.rank_key, reverse=True)
    history = [_stats(0, pop)]
    best_key = pop[0].rank_key
    stale = 0
    for g in range(1, config.generations + 1):
        children: list[Genome] = []
        for pair in range(max(1, config.population_size // 2)):
            rng = np.random.default_rng([config.seed, g, pair])
            a = tournament_select(pop, config.tournament_size, rng)
            b = tournament_select(pop, config.tournament_size, rng)
            if rng.random() < config.crossover_rate:
                a, b = crossover(a, b, rng)
            children += [mutate(a, rng, config), mutate(b, rng, config)]
        evaluated = evaluator.evaluate_many(children)
        n_feasible = sum(c.feasible for c in pop) + sum(c.feasible for c in evaluated)
        joining = evaluated if n_feasible < 2 else [c for c in evaluated if c.feasible]
        pop = _truncate(pop + joining, config.population_size)
        history.append(_stats(g, pop))
        if _improved(pop[0].rank_key, best_key, config.min_improvement):
            best_key = pop[0].rank_key
            stale = 0
        else:
            stale += 1
            if stale >= config.stagnation_patience:
                break
    best = pop[0]
    if config.refit_final and best.n_active > 0:
        best = _refit(evaluator, best)
    warn = not best.feasible
    if warn:
        warnings.warn("no feasible candidate found; returning the lowest-loss model", RuntimeWarning, stacklevel=2)
    return GaResult(best, history, warn, len(evaluator._cache), pop)


def _refit(evaluator: CandidateEvaluator, best: EvaluatedCandidate) -> EvaluatedCandidate:
    """Unpenalized least squares on the winner's support, kept only if it ranks no worse."""
    support = best.support
    coefs = np.linalg.lstsq(evaluator.theta_train[:, support], evaluator.y_train, rcond=None)[0]
    if np.any(coefs == 0):
        return best
    xi = np.zeros(evaluator.n_library)
    xi[support] = coefs
    refit = evaluator.score(best.genome, xi, lambda1=0.0)
    if refit.rank_key >= best.rank_key:
        refit.note = "least-squares refit on the selected support"
        return refit
    return best


_HISTORY_HEADER = (
    "generation",
    "best_fitness",
    "mean_fitness",
    "best_n_active",
    "best_mse_train",
    "best_mse_valid",
)


def save_history_csv(history: Sequence[GenerationStats], path) -> None:
    rows = (
        (h.generation, h.best_fitness, h.mean_fitness, h.best_n_active, h.best_mse_train, h.best_mse_valid)
        for h in history
    )
    write_csv(path, _HISTORY_HEADER, rows)


def load_history_csv(path) -> dict[str, np.ndarray]:
    """Columns of a history CSV (``inf``/``nan`` allowed for failed generations)."""
    return read_csv_columns(path, _HISTORY_HEADER, monotone="generation", allow_nonfinite=True)
