"""Evolutionary search over variable-length waypoint sequences.

Chromosomes are ordered, duplicate-free waypoint id lists with pinned
endpoints.  Parents of different lengths are crossed either by aligning
them with dynamic time warping over the waypoint coordinates and blending
aligned pairs (then projecting back onto the waypoint set), or by grafting
a random contiguous block of one parent into the other.  Selection combines
worst-fraction truncation, elitism, and stochastic universal sampling over
rank weights; mutation swaps two movable entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fitness import EvalCaches, EvaluatedIndividual, PenaltyWeights, evaluate_fitness
from .scenario import Scenario

BETA_EXTENSION = 0.15  # blend parameter range is [-0.15, 1.15]


@dataclass(frozen=True)
class WaypointSequence:
    """Ordered waypoint ids; id 1 is the fixed start."""

    indices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class WarpedAlignment:
    """Monotone index alignment between two sequences and its total cost."""

    pairs: tuple[tuple[int, int], ...]
    cost: float


@dataclass(frozen=True)
class GAConfig:
    """Tuning knobs; fractions follow the tuned defaults of the method."""

    population_size: int | None = None   # default: beta_p * waypoint count
    p_m: float = 0.1
    elite_fraction: float = 0.01
    truncation_fraction: float = 0.2
    warp_fraction: float = 0.5
    iter_max: int = 300
    convergence_window: int = 50
    convergence_epsilon: float = 1e-6
    beta_p: float = 20.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_m", "elite_fraction", "truncation_fraction", "warp_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.elite_fraction + self.truncation_fraction >= 1.0:
            raise ValueError("elite and truncation fractions must sum below 1")
        if self.population_size is not None and self.population_size < 4:
            raise ValueError("population_size must be at least 4")

    def resolve_population(self, scenario: Scenario) -> int:
        if self.population_size is not None:
            return self.population_size
        return max(4, int(round(self.beta_p * scenario.kappa)))


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_h: float
    mean_h: float
    best_reward: float
    feasible: bool


def _movable(seq: WaypointSequence, scenario: Scenario) -> list[int]:
    """Entries crossover/mutation may touch (everything but pinned ends)."""
    if scenario.fixed_end:
        return list(seq.indices[1:-1])
    return list(seq.indices[1:])


def _wrap_sequence(movable, scenario: Scenario) -> WaypointSequence:
    ids = [1, *movable]
    if scenario.fixed_end:
        ids.append(scenario.kappa)
    return WaypointSequence(tuple(ids))


def sequence_valid(seq: WaypointSequence, scenario: Scenario) -> bool:
    """Invariant check: pinned endpoints, no duplicates, ids in range."""
    ids = seq.indices
    if not ids or ids[0] != 1:
        return False
    if scenario.fixed_end and (len(ids) < 2 or ids[-1] != scenario.kappa):
        return False
    interior = ids[1:-1] if scenario.fixed_end else ids[1:]
    allowed = set(scenario.intermediate_ids())
    return len(set(ids)) == len(ids) and all(i in allowed for i in interior)


def init_population(scenario: Scenario, config: GAConfig,
                    rng: np.random.Generator) -> list[WaypointSequence]:
    """Uniform random length, then a uniform random permutation of that size."""
    pool = scenario.intermediate_ids()
    population = []
    for _ in range(config.resolve_population(scenario)):
        k = int(rng.integers(0, len(pool) + 1))
        picks = rng.permutation(len(pool))[:k]
        population.append(_wrap_sequence([pool[i] for i in picks], scenario))
    return population


def dtw_warp(s1: np.ndarray, s2: np.ndarray) -> WarpedAlignment:
    """Minimal-cost monotone alignment of two point sequences.

    Cumulative costs follow the classic recurrence on pairwise Euclidean
    distances; backtracking prefers diagonal, then up (advance in s1), then
    left, making the alignment deterministic.
    """
    a = np.asarray(s1, float)
    b = np.asarray(s2, float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    l1, l2 = len(a), len(b)
    if l1 == 0 or l2 == 0:
        raise ValueError("sequences must be nonempty")
    diff = a[:, None, :] - b[None, :, :]
    local = np.sqrt(np.sum(diff * diff, axis=2))
    D = np.empty((l1, l2))
    D[0, 0] = local[0, 0]
    for i in range(1, l1):
        D[i, 0] = D[i - 1, 0] + local[i, 0]
    for j in range(1, l2):
        D[0, j] = D[0, j - 1] + local[0, j]
    for i in range(1, l1):
        row = D[i]
        prev = D[i - 1]
        for j in range(1, l2):
            row[j] = local[i, j] + min(prev[j - 1], prev[j], row[j - 1])
    pairs = [(l1 - 1, l2 - 1)]
    i, j = l1 - 1, l2 - 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(D[i - 1, j - 1], D[i - 1, j], D[i, j - 1])
            if D[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif D[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return WarpedAlignment(tuple(pairs), float(D[l1 - 1, l2 - 1]))


def _strip_endpoints(ids: list[int], scenario: Scenario) -> list[int]:
    drop = {1, scenario.kappa} if scenario.fixed_end else {1}
    return [i for i in ids if i not in drop]


def crossover_warp(s1: WaypointSequence, s2: WaypointSequence,
                   scenario: Scenario, rng: np.random.Generator) -> WaypointSequence:
    """Blend warped parents and project back onto the waypoint set.

    One blend parameter is drawn per aligned element from the extended
    range; each blended point snaps to the nearest waypoint (lowest id on
    ties), duplicates keep their first occurrence, and the pinned endpoints
    are restored.
    """
    pts1 = scenario.positions[[i - 1 for i in s1.indices]]
    pts2 = scenario.positions[[i - 1 for i in s2.indices]]
    alignment = dtw_warp(pts1, pts2)
    idx = np.array(alignment.pairs)
    beta = rng.uniform(-BETA_EXTENSION, 1.0 + BETA_EXTENSION, size=len(idx))
    blended = (1.0 - beta[:, None]) * pts1[idx[:, 0]] + beta[:, None] * pts2[idx[:, 1]]
    diff = blended[:, None, :] - scenario.positions[None, :, :]
    nearest = np.argmin(np.sum(diff * diff, axis=2), axis=1) + 1
    child: list[int] = []
    seen: set[int] = set()
    for wid in nearest.tolist():
        if wid not in seen:
            seen.add(wid)
            child.append(wid)
    return _wrap_sequence(_strip_endpoints(child, scenario), scenario)


def crossover_subsequence(s1: WaypointSequence, s2: WaypointSequence,
                          scenario: Scenario,
                          rng: np.random.Generator) -> WaypointSequence:
    """Graft a random contiguous block of s1 into s2 (duplicates removed)."""
    block_pool = _movable(s1, scenario)
    base = _movable(s2, scenario)
    lo = int(rng.integers(0, len(block_pool) + 1))
    hi = int(rng.integers(lo, len(block_pool) + 1))
    block = block_pool[lo:hi]
    remainder = [i for i in base if i not in set(block)]
    at = int(rng.integers(0, len(remainder) + 1))
    return _wrap_sequence(remainder[:at] + block + remainder[at:], scenario)


def mutate(seq: WaypointSequence, p_m: float, scenario: Scenario,
           rng: np.random.Generator) -> WaypointSequence:
    """Swap two movable entries with probability ``p_m``."""
    if rng.random() >= p_m:
        return seq
    movable = _movable(seq, scenario)
    if len(movable) < 2:
        return seq
    i, j = rng.choice(len(movable), size=2, replace=False)
    movable[i], movable[j] = movable[j], movable[i]
    return _wrap_sequence(movable, scenario)


def _sus_pick(weights: np.ndarray, count: int,
              rng: np.random.Generator) -> np.ndarray:
    """Stochastic universal sampling: evenly spaced pointers on the wheel."""
    cumulative = np.cumsum(weights)
    total = cumulative[-1]
    spacing = total / count
    pointers = (rng.uniform(0.0, spacing) + spacing * np.arange(count)) % total
    return np.searchsorted(cumulative, pointers, side="right")


def select_and_breed(evaluated: list[EvaluatedIndividual], config: GAConfig,
                     scenario: Scenario,
                     rng: np.random.Generator) -> list[WaypointSequence]:
    """One generation step: truncate, keep elites, breed, mutate.

    The worst ``truncation_fraction`` never reproduces; parents are drawn by
    stochastic universal sampling with rank weights ``c - rank + 1`` over
    the survivors.  Offspring split between the two crossover operators by
    ``warp_fraction``; elites pass through untouched.
    """
    c = len(evaluated)
    order = sorted(range(c), key=lambda k: evaluated[k].h)
    survivors = [evaluated[k] for k in order[:c - int(config.truncation_fraction * c)]]
    n_elite = max(1, round(config.elite_fraction * c))
    elites = [evaluated[k].sequence for k in order[:n_elite]]
    n_offspring = c - n_elite
    n_warp = round(config.warp_fraction * n_offspring)

    weights = np.array([c - rank for rank in range(len(survivors))], dtype=float)
    picks = _sus_pick(weights, 2 * n_offspring, rng) if n_offspring else np.empty(0, int)
    picks = picks[rng.permutation(len(picks))]

    children: list[WaypointSequence] = []
    for k in range(n_offspring):
        p1 = survivors[picks[2 * k]].sequence
        p2 = survivors[picks[2 * k + 1]].sequence
        if k < n_warp:
            child = crossover_warp(p1, p2, scenario, rng)
        else:
            child = crossover_subsequence(p1, p2, scenario, rng)
        children.append(mutate(child, config.p_m, scenario, rng))
    return elites + children


def evaluate_population(population: list[WaypointSequence], scenario: Scenario,
                        weights: PenaltyWeights, caches: EvalCaches,
                        threads: int = 1) -> list[EvaluatedIndividual]:
    """Score a population; uncached members may be evaluated in parallel."""
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        fresh = {seq.indices: seq for seq in population
                 if caches.lookup(seq.indices) is None}
        if fresh:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(
                    lambda s: evaluate_fitness(s, scenario, weights, caches),
                    fresh.values()))
    return [evaluate_fitness(seq, scenario, weights, caches)
            for seq in population]


def run_ga(scenario: Scenario, config: GAConfig | None = None,
           weights: PenaltyWeights | None = None,
           rng: np.random.Generator | None = None,
           caches: EvalCaches | None = None,
           threads: int = 1) -> tuple[EvaluatedIndividual, list[GenerationStats]]:
    """Evolve until the iteration cap or until the best score stalls.

    Returns the best individual ever seen plus per-generation statistics.
    All random draws happen in the sequential breeding phase, so results
    are reproducible from the seed regardless of evaluation parallelism.
    """
    config = config or GAConfig()
    weights = weights or PenaltyWeights()
    rng = rng or np.random.Generator(np.random.PCG64(config.rng_seed))
    caches = caches or EvalCaches(scenario)

    population = init_population(scenario, config, rng)
    evaluated = evaluate_population(population, scenario, weights, caches, threads)
    best = min(evaluated, key=lambda e: e.h)
    history: list[GenerationStats] = []
    best_trace = [best.h]

    def record(generation: int) -> None:
        mean_h = math.fsum(e.h for e in evaluated) / len(evaluated)
        history.append(GenerationStats(generation, best.h, mean_h,
                                       best.report.reward,
                                       best.report.feasible()))

    record(0)
    for generation in range(1, config.iter_max + 1):
        population = select_and_breed(evaluated, config, scenario, rng)
        evaluated = evaluate_population(population, scenario, weights, caches,
                                        threads)
        challenger = min(evaluated, key=lambda e: e.h)
        if challenger.h < best.h:
            best = challenger
        best_trace.append(best.h)
        record(generation)
        window = config.convergence_window
        if (len(best_trace) > window
                and best_trace[-window - 1] - best_trace[-1] < config.convergence_epsilon):
            break
    return best, history


def history_to_csv(history: list[GenerationStats]) -> str:
    """CSV export: generation,best_h,mean_h,best_reward,feasible."""
    lines = ["generation,best_h,mean_h,best_reward,feasible"]
    for row in history:
        lines.append(f"{row.generation},{row.best_h:.12g},{row.mean_h:.12g},"
                     f"{row.best_reward:.12g},{int(row.feasible)}")
    return "\n".join(lines) + "\n"
