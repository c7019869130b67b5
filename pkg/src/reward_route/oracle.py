"""Exact enumeration oracle, baseline decoder, and benchmark scaffolding.

Small instances admit exhaustive search over every ordered subset of the
intermediate waypoints, which serves as the correctness reference for the
evolutionary solver.  The module also generates seeded random scenarios on
a fixed cluttered map and runs the empirical runtime scaling study.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .fitness import EvalCaches, EvaluatedIndividual, PenaltyWeights, evaluate_fitness
from .ga import GAConfig, WaypointSequence, run_ga
from .scenario import (AxisAlignedRect, ConstraintSet, Environment, Model,
                       Scenario, Waypoint, rasterize)

ENUMERATION_LIMIT = 8


class EnumerationLimitExceeded(ValueError):
    """Too many intermediate waypoints for exhaustive search."""


@dataclass(frozen=True)
class BenchResult:
    scenario_id: str
    waypoint_count: int
    trial: int
    seed: int
    best_h: float
    best_reward: float
    time_s: float


def sequence_space_size(intermediate_count: int) -> int:
    """Number of ordered subsets: sum over k of C(n, k) * k!."""
    return sum(math.perm(intermediate_count, k)
               for k in range(intermediate_count + 1))


def enumerate_sequences(intermediate_count: int, fixed_end: bool):
    """Yield every admissible sequence (all lengths, all orders).

    Intermediate ids are 2..n+1; with a fixed end the terminal id n+2 is
    appended.  Raises :class:`EnumerationLimitExceeded` beyond the guard.
    """
    if intermediate_count > ENUMERATION_LIMIT:
        raise EnumerationLimitExceeded(
            f"{intermediate_count} intermediates exceed the exhaustive-search "
            f"limit of {ENUMERATION_LIMIT}")
    labels = range(2, intermediate_count + 2)
    end = (intermediate_count + 2,) if fixed_end else ()
    for k in range(intermediate_count + 1):
        for perm in itertools.permutations(labels, k):
            yield WaypointSequence((1, *perm, *end))


def brute_force_best(scenario: Scenario, weights: PenaltyWeights | None = None,
                     caches: EvalCaches | None = None) -> EvaluatedIndividual:
    """Exact optimum by exhaustive evaluation of the sequence space.

    Ties on the score break toward the shorter path, then the shorter
    sequence.
    """
    weights = weights or PenaltyWeights()
    caches = caches or EvalCaches(scenario)
    count = len(scenario.intermediate_ids())
    best: EvaluatedIndividual | None = None
    best_key: tuple[float, float, int] | None = None
    for seq in enumerate_sequences(count, scenario.fixed_end):
        cand = evaluate_fitness(seq, scenario, weights, caches)
        key = (cand.h, cand.report.path_length, len(seq.indices))
        if best_key is None or key < best_key:
            best, best_key = cand, key
    assert best is not None
    return best


def decode_truncation(x, scenario: Scenario) -> WaypointSequence:
    """Baseline integer decoder: keep the first k labels, drop duplicates.

    ``x`` stacks the candidate labels with the kept count k as its last
    entry.  Raises ``ValueError`` on out-of-range entries.
    """
    x = [int(v) for v in x]
    if not x:
        raise ValueError("empty decision vector")
    labels, k = x[:-1], x[-1]
    if not 0 <= k <= len(labels):
        raise ValueError(f"kept count {k} outside 0..{len(labels)}")
    allowed = set(scenario.intermediate_ids())
    for v in labels:
        if v not in allowed:
            raise ValueError(f"label {v} outside the intermediate id range")
    kept: list[int] = []
    for v in labels[:k]:
        if v not in kept:
            kept.append(v)
    ids = [1, *kept]
    if scenario.fixed_end:
        ids.append(scenario.kappa)
    return WaypointSequence(tuple(ids))


# --- built-in benchmark maps ----------------------------------------------

_BENCH_OBSTACLES = (
    AxisAlignedRect(1.0, 1.2, 1.6, 1.4),
    AxisAlignedRect(4.2, 0.6, 1.2, 2.2),
    AxisAlignedRect(7.2, 1.6, 1.6, 1.2),
    AxisAlignedRect(2.0, 4.2, 1.4, 1.8),
    AxisAlignedRect(5.6, 4.4, 1.8, 1.2),
    AxisAlignedRect(8.2, 5.2, 1.0, 2.0),
    AxisAlignedRect(1.0, 7.4, 1.8, 1.2),
    AxisAlignedRect(4.6, 7.6, 1.4, 1.4),
)

BENCH_RESOLUTION = 0.1
BENCH_INFLATION = 0.1

# distance budget, speed band, and turn-rate bound of the benchmark runs
BENCH_CONSTRAINTS = ConstraintSet(v_max=1.0, v_min=0.1, d_max=200.0,
                                  omega_max=0.5)


def _clear_of_boundary(grid, x: float, y: float) -> bool:
    """Free with one full cell of clearance in every direction.

    Smoothed approach curves deviate a little from the grid polyline near
    the continuous waypoint coordinates, so placements flush against the
    free-space boundary are rejected.
    """
    ix, iy = grid.cell_of(x, y)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            cx, cy = ix + dx, iy + dy
            if cx < 0 or cy < 0 or cx >= grid.width or cy >= grid.height:
                return False
            if grid.cells[cy, cx]:
                return False
    return True


def random_scenario(intermediate_count: int,
                    rng: np.random.Generator) -> Scenario:
    """Seeded random waypoint distribution on the fixed benchmark map.

    Waypoints are sampled uniformly over the inflated free space by
    rejection (keeping one cell of boundary clearance), with integer
    rewards 1..10; start and end are pinned at opposite corners.
    """
    if intermediate_count < 0:
        raise ValueError("intermediate_count must be nonnegative")
    env = Environment(0.0, 10.0, 0.0, 10.0, _BENCH_OBSTACLES)
    grid = rasterize(env, BENCH_RESOLUTION, BENCH_INFLATION)
    start = Waypoint(0.5, 0.5, 0.0)
    end = Waypoint(9.5, 9.5, 0.0)
    waypoints = [start]
    for _ in range(intermediate_count):
        for _attempt in range(10_000):
            x = float(rng.uniform(0.0, 10.0))
            y = float(rng.uniform(0.0, 10.0))
            if _clear_of_boundary(grid, x, y):
                waypoints.append(Waypoint(x, y, float(rng.integers(1, 11))))
                break
        else:
            raise RuntimeError("rejection sampling failed to place a waypoint")
    waypoints.append(end)
    return Scenario(environment=env, waypoints=tuple(waypoints), fixed_end=True,
                    constraints=BENCH_CONSTRAINTS, model=Model.DIFFDRIVE,
                    grid_resolution=BENCH_RESOLUTION,
                    inflation_radius=BENCH_INFLATION)


def loop_scenario(bonus_reward: float = 1.0) -> Scenario:
    """Closed patrol tour: 14 unit-reward waypoints, start equal to end.

    The time window admits roughly three quarters of the full tour, so the
    solver must skip the costliest detours.  ``bonus_reward`` re-weights the
    waypoint tucked behind the lower-left obstacle, whose detour is the
    least attractive at unit reward.
    """
    env = Environment(0.0, 10.0, 0.0, 10.0, (
        AxisAlignedRect(1.6, 1.6, 1.8, 1.4),
        AxisAlignedRect(6.4, 1.2, 1.6, 2.2),
        AxisAlignedRect(4.2, 4.4, 1.6, 1.6),
        AxisAlignedRect(1.2, 6.6, 2.2, 1.4),
        AxisAlignedRect(6.6, 6.6, 1.8, 1.6),
    ))
    depot = Waypoint(5.0, 0.8, 0.0)
    ring = [
        (0.7, 0.7, bonus_reward),   # tucked behind the lower-left obstacle
        (2.6, 0.9, 1.0),
        (0.8, 3.4, 1.0),
        (2.2, 5.4, 1.0),
        (0.7, 9.2, 1.0),
        (3.2, 8.8, 1.0),
        (5.4, 9.4, 1.0),
        (8.8, 9.2, 1.0),
        (9.3, 6.8, 1.0),
        (5.6, 6.2, 1.0),
        (9.2, 4.4, 1.0),
        (8.6, 0.8, 1.0),
        (5.4, 3.6, 1.0),
        (3.4, 3.2, 1.0),
    ]
    waypoints = (depot, *(Waypoint(*w) for w in ring), Waypoint(5.0, 0.8, 0.0))
    return Scenario(environment=env, waypoints=waypoints, fixed_end=True,
                    constraints=ConstraintSet(v_max=1.0, t_max=40.0),
                    model=Model.DIFFDRIVE, grid_resolution=BENCH_RESOLUTION,
                    inflation_radius=BENCH_INFLATION)


def complexity_sweep(counts, trials_per_count: int,
                     config: GAConfig | None = None, seed: int = 0,
                     weights: PenaltyWeights | None = None
                     ) -> tuple[list[BenchResult], float]:
    """Wall-time scaling of the solver over waypoint counts.

    Each trial gets its own RNG stream derived from (seed, count index,
    trial index).  Returns the per-trial rows plus the log-log least-squares
    slope of mean runtime versus count.
    """
    counts = list(counts)
    if not counts:
        raise ValueError("counts must be nonempty")
    if trials_per_count < 1:
        raise ValueError("trials_per_count must be positive")
    weights = weights or PenaltyWeights()
    rows: list[BenchResult] = []
    for ci, count in enumerate(counts):
        for trial in range(trials_per_count):
            seq = np.random.SeedSequence(entropy=seed, spawn_key=(ci, trial))
            rng = np.random.Generator(np.random.PCG64(seq))
            scenario = random_scenario(count, rng)
            cfg = config or GAConfig()
            started = time.perf_counter()
            best, _ = run_ga(scenario, cfg, weights, rng)
            elapsed = time.perf_counter() - started
            rows.append(BenchResult(
                scenario_id=f"c{ci}n{count}t{trial}", waypoint_count=count,
                trial=trial, seed=seed, best_h=best.h,
                best_reward=best.report.reward, time_s=elapsed))
    means = []
    for count in sorted(set(counts)):
        times = [r.time_s for r in rows if r.waypoint_count == count]
        means.append((count, sum(times) / len(times)))
    if len(means) >= 2:
        xs = np.log([m[0] for m in means])
        ys = np.log([max(m[1], 1e-9) for m in means])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = float("nan")
    return rows, slope


def bench_to_csv(rows: list[BenchResult], slope: float) -> str:
    """CSV export with a trailing summary row holding the fitted slope."""
    lines = ["n,trial,seed,best_h,best_reward,time_s"]
    for r in rows:
        lines.append(f"{r.waypoint_count},{r.trial},{r.seed},"
                     f"{r.best_h:.12g},{r.best_reward:.12g},{r.time_s:.6g}")
    lines.append(f"slope,,,,,{slope:.6g}")
    return "\n".join(lines) + "\n"
