"""Digit-grid ant colony search over SVM hyperparameters.

Every candidate (C, sigma) pair is a path through an n x 10 grid: column x
picks the digit of one significant place, so decoding a path is positional
arithmetic. Ants choose digits in proportion to pheromone raised to a
configurable power, good candidates deposit Q/(1-accuracy) on the cells
they visited, and the colony stops once a supermajority of ants walk one
identical path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Callable

import numpy as np
from joblib import Parallel, delayed

from .crossval import CvResult, cross_validate, make_folds
from .data import Dataset
from .rng import STREAM_ANT, stream
from .svm import TrainConfig

N_DIGIT_VALUES = 10

# Pheromone never decays below this fraction of the initial deposit, so
# every digit stays reachable no matter how long evaporation runs.
TAU_MIN_RATIO = 1e-6


@dataclass(frozen=True)
class DigitLayout:
    """Which significant places the grid columns stand for.

    The C columns come first. A parameter's leading column has place value
    10**high_power and each following column drops one power of ten.
    """

    c_digits: int = 5
    c_high_power: int = 2
    sigma_digits: int = 5
    sigma_high_power: int = 0

    def __post_init__(self):
        if self.c_digits < 1 or self.sigma_digits < 1:
            raise ValueError("each parameter needs at least one digit column")

    @property
    def n(self) -> int:
        return self.c_digits + self.sigma_digits

    @property
    def c_unit(self) -> float:
        """Value of one step in the least significant C column."""
        return _place_value(self.c_digits - 1 - self.c_high_power)

    @property
    def sigma_unit(self) -> float:
        return _place_value(self.sigma_digits - 1 - self.sigma_high_power)


def _place_value(shift: int) -> float:
    # 10**-shift computed so decimal fractions round once (division by an
    # exact integer power of ten), keeping decodes like 6643 -> 0.6643 exact
    if shift >= 0:
        return 1.0 / (10**shift)
    return float(10 ** (-shift))


def _decode_digits(digits: np.ndarray, shift: int) -> tuple[float, bool]:
    mantissa = 0
    for d in digits:
        mantissa = mantissa * 10 + int(d)
    clamped = mantissa == 0
    if clamped:
        mantissa = 1
    if shift >= 0:
        return mantissa / (10**shift), clamped
    return float(mantissa * 10 ** (-shift)), clamped


@dataclass(frozen=True)
class ParamPoint:
    """One decoded (C, sigma) candidate."""

    c: float
    sigma: float
    c_clamped: bool = False
    sigma_clamped: bool = False

    @property
    def clamped(self) -> bool:
        return self.c_clamped or self.sigma_clamped


def decode_path(path: np.ndarray, layout: DigitLayout) -> ParamPoint:
    """Positional decode of a digit path; all-zero parameters are clamped up
    to one least-significant unit so C > 0 and sigma > 0 always hold."""
    path = np.asarray(path)
    if path.shape != (layout.n,):
        raise ValueError(f"path must have {layout.n} digits, got {path.shape}")
    if path.min() < 0 or path.max() >= N_DIGIT_VALUES:
        raise ValueError("digits must lie in [0, 9]")
    c, c_clamped = _decode_digits(
        path[: layout.c_digits], layout.c_digits - 1 - layout.c_high_power
    )
    sigma, sigma_clamped = _decode_digits(
        path[layout.c_digits :], layout.sigma_digits - 1 - layout.sigma_high_power
    )
    return ParamPoint(c=c, sigma=sigma, c_clamped=c_clamped, sigma_clamped=sigma_clamped)


@dataclass(frozen=True)
class PheromoneGrid:
    """n x 10 matrix of strictly positive pheromone weights."""

    tau: np.ndarray
    tau0: float

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.float64)
        if tau.ndim != 2 or tau.shape[1] != N_DIGIT_VALUES:
            raise ValueError(f"grid must be n x {N_DIGIT_VALUES}, got {tau.shape}")
        if not np.all(tau > 0):
            raise ValueError("pheromone must stay strictly positive")
        object.__setattr__(self, "tau", tau)

    @classmethod
    def uniform(cls, n_columns: int, tau0: float) -> "PheromoneGrid":
        return cls(np.full((n_columns, N_DIGIT_VALUES), float(tau0)), float(tau0))

    @property
    def n_columns(self) -> int:
        return self.tau.shape[0]

    @property
    def floor(self) -> float:
        return TAU_MIN_RATIO * self.tau0


@dataclass(frozen=True)
class AcoConfig:
    """Colony size, pheromone dynamics and stopping rules."""

    m: int = 30
    n_max: int = 500
    rho: float = 0.7  # persistence: tau <- rho*tau + deposits
    q: float = 100.0
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 1.0  # digit cells carry no intrinsic preference
    tau0: float = 1.0
    epsilon_acc: float = 1e-3  # guards Q/(1-acc) as acc -> 1
    convergence_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n_max < 1:
            raise ValueError("m and n_max must be at least 1")
        if not (0 < self.rho <= 1):
            raise ValueError("rho must lie in (0, 1]")
        if self.q <= 0 or self.eta <= 0 or self.tau0 <= 0 or self.epsilon_acc <= 0:
            raise ValueError("q, eta, tau0 and epsilon_acc must be positive")
        if not (0 < self.convergence_fraction <= 1):
            raise ValueError("convergence_fraction must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class ColonyState:
    """All ant paths and their fitnesses for one iteration."""

    paths: np.ndarray  # (m, n) digits
    fitnesses: np.ndarray  # (m,) accuracies in [0, 1]
    iteration: int

    def __post_init__(self):
        if self.paths.shape[0] != self.fitnesses.shape[0]:
            raise ValueError("one fitness per path required")

    @property
    def m(self) -> int:
        return self.paths.shape[0]

    def modal_path(self) -> tuple[np.ndarray, int]:
        """Most frequent path and its count (lexicographically first on ties)."""
        unique, counts = np.unique(self.paths, axis=0, return_counts=True)
        best = int(np.argmax(counts))
        return unique[best], int(counts[best])


def transition_distribution(
    grid: PheromoneGrid, column: int, cfg: AcoConfig
) -> np.ndarray:
    """Digit probabilities for one column: tau^alpha * eta^beta, normalized."""
    if not (0 <= column < grid.n_columns):
        raise ValueError(f"column must be in [0, {grid.n_columns}), got {column}")
    weights = grid.tau[column] ** cfg.alpha * cfg.eta**cfg.beta
    total = float(weights.sum())
    if not np.isfinite(total) or total <= 0.0:
        return np.full(N_DIGIT_VALUES, 1.0 / N_DIGIT_VALUES)
    return weights / total


def roulette_select(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Cumulative-sum threshold scan: draw u in [0, sum) and return the
    first index whose running total exceeds it."""
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 1 or dist.size == 0:
        raise ValueError("distribution must be a non-empty vector")
    if np.any(dist < 0):
        raise ValueError("distribution entries must be non-negative")
    cumulative = np.cumsum(dist)
    u = rng.random() * cumulative[-1]
    j = int(np.searchsorted(cumulative, u, side="right"))
    return min(j, dist.size - 1)


def construct_colony(
    grid: PheromoneGrid, cfg: AcoConfig, iteration: int, workers: int = 1
) -> np.ndarray:
    """Build all m paths for one iteration.

    Each (ant, column) move draws from its own stream keyed by
    (seed, iteration, ant, column), so the result is one fixed array no
    matter how ants are scheduled across workers.
    """
    n = grid.n_columns
    dists = [transition_distribution(grid, x, cfg) for x in range(n)]
    paths = np.empty((cfg.m, n), dtype=np.int64)

    def walk(ant: int) -> None:
        for column in range(n):
            rng = stream(cfg.seed, STREAM_ANT, iteration, ant, column)
            paths[ant, column] = roulette_select(dists[column], rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(walk, range(cfg.m)))
    else:
        for ant in range(cfg.m):
            walk(ant)
    return paths


def deposit_amount(acc: float, cfg: AcoConfig) -> float:
    """Q/(1-acc), guarded so perfect accuracy deposits Q/epsilon instead of
    diverging."""
    if not (0.0 <= acc <= 1.0):
        raise ValueError(f"accuracy must lie in [0, 1], got {acc}")
    return cfg.q / max(1.0 - acc, cfg.epsilon_acc)


def update_pheromone(
    grid: PheromoneGrid, colony: ColonyState, cfg: AcoConfig
) -> PheromoneGrid:
    """Evaporate every cell by rho, add each ant's deposit on its visited
    cells, then floor the whole grid at the positivity minimum."""
    tau = grid.tau * cfg.rho
    columns = np.arange(grid.n_columns)
    for k in range(colony.m):
        tau[columns, colony.paths[k]] += deposit_amount(float(colony.fitnesses[k]), cfg)
    np.maximum(tau, grid.floor, out=tau)
    return PheromoneGrid(tau=tau, tau0=grid.tau0)


def has_converged(colony: ColonyState, cfg: AcoConfig) -> bool:
    """True once the modal path carries at least convergence_fraction of the
    colony."""
    _, count = colony.modal_path()
    # small slack so e.g. 27 ants out of 0.9*30 counts as converged despite
    # float representation of the product
    return count + 1e-9 >= cfg.convergence_fraction * colony.m


@dataclass(frozen=True)
class FitnessEval:
    """Fitness of one candidate point plus bookkeeping flags."""

    accuracy: float
    degenerate_folds: int = 0
    solver_hard_stops: int = 0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    paths: np.ndarray
    fitnesses: np.ndarray
    modal_fraction: float


@dataclass
class OptimizationReport:
    """Everything one search run produced.

    `best_*` track the highest fitness ever seen (earliest on ties);
    `converged_*` describe the modal path of the final colony, which is the
    search's nominal answer.
    """

    best_point: ParamPoint
    best_accuracy: float
    best_path: np.ndarray
    best_iteration: int
    best_ant: int
    converged_point: ParamPoint
    converged_path: np.ndarray
    converged: bool
    final_modal_fraction: float
    iterations: list[IterationRecord]
    flags: dict[str, int]
    evaluations: int

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)


def search(
    fitness_fn: Callable[[ParamPoint], FitnessEval],
    layout: DigitLayout,
    cfg: AcoConfig,
    workers: int = 1,
) -> OptimizationReport:
    """Run the colony against an arbitrary fitness function.

    Fitness values are cached by decoded (C, sigma), so revisited paths cost
    nothing. New points are evaluated concurrently when workers > 1 and
    merged back by ant index, keeping the outcome worker-count-invariant.
    """
    grid = PheromoneGrid.uniform(layout.n, cfg.tau0)
    cache: dict[tuple[float, float], FitnessEval] = {}
    records: list[IterationRecord] = []
    flags = {
        "clamped_decodes": 0,
        "deposit_guard_fires": 0,
        "degenerate_folds": 0,
        "solver_hard_stops": 0,
    }
    best: tuple[float, int, int] | None = None  # (accuracy, iteration, ant)
    best_point: ParamPoint | None = None
    best_path: np.ndarray | None = None
    colony: ColonyState | None = None
    converged = False

    for iteration in range(cfg.n_max):
        paths = construct_colony(grid, cfg, iteration, workers=workers)
        points = [decode_path(paths[k], layout) for k in range(cfg.m)]
        flags["clamped_decodes"] += sum(1 for p in points if p.clamped)

        keys = [(p.c, p.sigma) for p in points]
        fresh: list[int] = []
        seen: set[tuple[float, float]] = set()
        for k, key in enumerate(keys):
            if key not in cache and key not in seen:
                fresh.append(k)
                seen.add(key)
        if fresh:
            if workers > 1 and len(fresh) > 1:
                evals = Parallel(n_jobs=workers)(
                    delayed(fitness_fn)(points[k]) for k in fresh
                )
            else:
                evals = [fitness_fn(points[k]) for k in fresh]
            for k, ev in zip(fresh, evals):
                cache[keys[k]] = ev
                flags["degenerate_folds"] += ev.degenerate_folds
                flags["solver_hard_stops"] += ev.solver_hard_stops

        fitnesses = np.array([cache[key].accuracy for key in keys], dtype=np.float64)
        flags["deposit_guard_fires"] += int(
            np.sum((1.0 - fitnesses) < cfg.epsilon_acc)
        )
        colony = ColonyState(paths=paths, fitnesses=fitnesses, iteration=iteration)

        for k in range(cfg.m):
            if best is None or fitnesses[k] > best[0]:
                best = (float(fitnesses[k]), iteration, k)
                best_point = points[k]
                best_path = paths[k].copy()

        grid = update_pheromone(grid, colony, cfg)
        modal_path, modal_count = colony.modal_path()
        records.append(
            IterationRecord(
                iteration=iteration,
                paths=paths,
                fitnesses=fitnesses,
                modal_fraction=modal_count / cfg.m,
            )
        )
        if has_converged(colony, cfg):
            converged = True
            break

    assert colony is not None and best is not None
    final_modal, final_count = colony.modal_path()
    return OptimizationReport(
        best_point=best_point,
        best_accuracy=best[0],
        best_path=best_path,
        best_iteration=best[1],
        best_ant=best[2],
        converged_point=decode_path(final_modal, layout),
        converged_path=final_modal,
        converged=converged,
        final_modal_fraction=final_count / cfg.m,
        iterations=records,
        flags=flags,
        evaluations=len(cache),
    )


def _cv_fitness(
    point: ParamPoint, ds: Dataset, k: int, base: TrainConfig, seed: int
) -> FitnessEval:
    plan = make_folds(len(ds), k, seed, labels=ds.labels)
    result: CvResult = cross_validate(
        ds, k, base.with_params(point.c, point.sigma), seed, plan=plan
    )
    return FitnessEval(
        accuracy=result.mean_accuracy,
        degenerate_folds=result.degenerate_folds,
        solver_hard_stops=result.solver_hard_stops,
    )


def optimize(
    train: Dataset,
    k: int,
    cfg: AcoConfig,
    layout: DigitLayout | None = None,
    svm_cfg_base: TrainConfig | None = None,
    workers: int = 1,
) -> OptimizationReport:
    """Tune (C, sigma) for `train` using k-fold CV accuracy as fitness.

    The fold assignment derives from cfg.seed once and is shared by every
    candidate, so all ants are scored against the same folds.
    """
    if len(train.classes) < 2:
        raise ValueError("optimization requires at least two classes")
    layout = layout or DigitLayout()
    base = svm_cfg_base or TrainConfig(c=1.0, sigma=1.0)
    fitness = partial(_cv_fitness, ds=train, k=k, base=base, seed=cfg.seed)
    return search(fitness, layout, cfg, workers=workers)
