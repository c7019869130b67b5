"""Sequence evaluation: reward ratio plus weighted constraint violations.

A candidate sequence runs through the full pipeline — grid search, spiral
smoothing with collision repair, constant-speed time allocation, flatness
map — and every constraint contributes a nonnegative violation measure.
The score is ``collectable_reward / collected_reward`` plus the weighted
violation sum, so 1.0 is attained exactly when everything is collected and
nothing is violated.  Infeasibility is never raised to the caller: pipeline
failures score as maximal unit violations.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import clothoids, flatness, grid_search
from .clothoids import InfeasibleSpeedBand, NonConvergence, Trajectory
from .flatness import DegenerateVelocity, ZeroInput, ZeroSpeedSample
from .grid_search import InvalidEndpoint, NoPath, PairwiseCache
from .scenario import Model, OccupancyGrid, Scenario, free_mask, rasterize

_PIPELINE_FAILURES = (NoPath, InvalidEndpoint, NonConvergence, DegenerateVelocity,
                      ZeroInput, ZeroSpeedSample, InfeasibleSpeedBand)


@dataclass(frozen=True)
class PenaltyWeights:
    """Scale factors for the violation measures (all nonnegative).

    The obstacle measure lives in [0, 1], so it carries a much larger
    default weight than the open-ended measures.
    """

    alpha_time: float = 10.0
    alpha_dist: float = 10.0
    alpha_obstacle: float = 100.0
    alpha_input: float = 10.0
    alpha_state: float = 10.0

    def __post_init__(self) -> None:
        for name in ("alpha_time", "alpha_dist", "alpha_obstacle",
                     "alpha_input", "alpha_state"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class ViolationReport:
    """Per-constraint violation measures plus trajectory summary values."""

    time_v: float
    distance_v: float
    obstacle_v: float
    input_v: dict[str, float]
    state_v: dict[str, float]
    t_f: float
    path_length: float
    reward: float
    failed: str | None = None

    def penalty(self, weights: PenaltyWeights) -> float:
        return (weights.alpha_time * self.time_v
                + weights.alpha_dist * self.distance_v
                + weights.alpha_obstacle * self.obstacle_v
                + weights.alpha_input * math.fsum(self.input_v.values())
                + weights.alpha_state * math.fsum(self.state_v.values()))

    def feasible(self) -> bool:
        return (self.failed is None and self.time_v == 0.0
                and self.distance_v == 0.0 and self.obstacle_v == 0.0
                and all(v == 0.0 for v in self.input_v.values())
                and all(v == 0.0 for v in self.state_v.values()))


@dataclass(frozen=True)
class EvaluatedIndividual:
    sequence: "object"
    h: float
    report: ViolationReport


class EvalCaches:
    """Shared read-only scenario data plus the solver-run caches.

    Holds the rasterized grid, the pairwise A* memo, and a whole-sequence
    fitness memo (the pipeline is deterministic per sequence, so caching is
    transparent).  Concurrent readers are fine; insertions are serialized.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.grid: OccupancyGrid = rasterize(scenario.environment,
                                             scenario.grid_resolution,
                                             scenario.inflation_radius)
        self.pairwise = PairwiseCache()
        self._fitness: dict[tuple[int, ...], EvaluatedIndividual] = {}
        self._lock = threading.Lock()

    def lookup(self, key: tuple[int, ...]) -> EvaluatedIndividual | None:
        return self._fitness.get(key)

    def store(self, key: tuple[int, ...], value: EvaluatedIndividual) -> None:
        with self._lock:
            self._fitness.setdefault(key, value)


def violation_time(t_f: float, t_max: float | None) -> float:
    """Relative overshoot of the mission time window (0 when absent/met)."""
    if t_max is None or t_f <= t_max:
        return 0.0
    return (t_f - t_max) / t_max


def violation_distance(d: float, d_max: float | None) -> float:
    """Relative overshoot of the travel distance budget."""
    if d_max is None or d <= d_max:
        return 0.0
    return (d - d_max) / d_max


def violation_obstacle(traj: Trajectory, grid: OccupancyGrid) -> float:
    """Fraction of the arc length outside free space, in [0, 1].

    Expects the trajectory sampled at spacing no coarser than half the grid
    resolution; each sample carries half the arc span to its neighbors.
    """
    n = len(traj.t)
    if n < 2 or traj.total_length <= 0.0:
        return 0.0
    free = free_mask(grid, traj.positions())
    if free.all():
        return 0.0
    if not free.any():
        return 1.0
    s = np.linspace(0.0, traj.total_length, n)  # samples are uniform in arc
    weights = np.empty(n)
    weights[1:-1] = (s[2:] - s[:-2]) / 2.0
    weights[0] = (s[1] - s[0]) / 2.0
    weights[-1] = (s[-1] - s[-2]) / 2.0
    covered = float(np.sum(weights[free]))
    return min(1.0, max(0.0, 1.0 - covered / traj.total_length))


def violation_input(series: np.ndarray, u_bar: float, t_f: float) -> float:
    """Normalized time-integral of the exceedance above an upper bound.

    ``series`` holds |u| on uniform time samples spanning [0, t_f]; the
    exceedance is integrated by the trapezoidal rule and scaled by
    ``t_f * u_bar``.
    """
    if u_bar <= 0.0:
        raise ValueError("bound must be positive")
    if t_f <= 0.0:
        raise ValueError("final time must be positive")
    excess = np.maximum(np.asarray(series, float) - u_bar, 0.0)
    if len(excess) < 2:
        return 0.0
    dt = t_f / (len(excess) - 1)
    integral = float(np.sum((excess[1:] + excess[:-1]) / 2.0) * dt)
    return integral / (t_f * u_bar)


def violation_lower(series: np.ndarray, u_floor: float, t_f: float) -> float:
    """Counterpart of :func:`violation_input` for a lower bound."""
    if u_floor <= 0.0:
        raise ValueError("bound must be positive")
    if t_f <= 0.0:
        raise ValueError("final time must be positive")
    shortfall = np.maximum(u_floor - np.asarray(series, float), 0.0)
    if len(shortfall) < 2:
        return 0.0
    dt = t_f / (len(shortfall) - 1)
    integral = float(np.sum((shortfall[1:] + shortfall[:-1]) / 2.0) * dt)
    return integral / (t_f * u_floor)


def _trivial_report(reward: float) -> ViolationReport:
    return ViolationReport(time_v=0.0, distance_v=0.0, obstacle_v=0.0,
                           input_v={}, state_v={}, t_f=0.0, path_length=0.0,
                           reward=reward)


def _failure_report(reward: float, stage: str) -> ViolationReport:
    return ViolationReport(time_v=1.0, distance_v=1.0, obstacle_v=1.0,
                           input_v={"input": 1.0}, state_v={"state": 1.0},
                           t_f=math.inf, path_length=math.inf,
                           reward=reward, failed=stage)


def collected_reward(seq, scenario: Scenario) -> float:
    ids = seq.indices if hasattr(seq, "indices") else tuple(seq)
    intermediates = set(scenario.intermediate_ids())
    return math.fsum(scenario.reward(i) for i in ids if i in intermediates)


def _pipeline_report(seq, scenario: Scenario, caches: EvalCaches,
                     reward: float) -> ViolationReport:
    grid = caches.grid
    cons = scenario.constraints
    polyline = grid_search.polyline_for_sequence(grid, seq, scenario,
                                                 caches.pairwise)
    if len(polyline.points) < 2 or polyline.length <= 1e-12:
        return _trivial_report(reward)

    path = clothoids.smooth_polyline(polyline, grid)
    L = path.total_length
    # spacing <= resolution/2, as the obstacle measure requires
    samples = max(100, int(math.ceil(2.0 * L / grid.resolution)) + 1)
    traj = clothoids.parameterize_time(path, cons, samples)
    flat = flatness.flat_trace_from_trajectory(traj)

    input_v: dict[str, float] = {}
    state_v: dict[str, float] = {}
    if scenario.model is Model.QUADRUPED:
        trace = flatness.quadruped_forward(flat)
        speed = np.hypot(trace.u[:, 0], trace.u[:, 1])
        turn = np.abs(trace.u[:, 2])
    else:
        trace = flatness.diffdrive_forward(flat, scenario.model_params)
        speed = np.abs(trace.u[:, 0])
        turn = np.abs(trace.u[:, 1])

    input_v["speed"] = violation_input(speed, cons.v_max, traj.t_f)
    if cons.v_min > 0.0:
        input_v["min_speed"] = violation_lower(speed, cons.v_min, traj.t_f)
    if cons.omega_max is not None:
        input_v["omega"] = violation_input(turn, cons.omega_max, traj.t_f)
    if cons.accel_max is not None:
        accel = np.hypot(flat.y_ddot[:, 0], flat.y_ddot[:, 1])
        state_v["accel"] = violation_input(accel, cons.accel_max, traj.t_f)

    return ViolationReport(
        time_v=violation_time(traj.t_f, cons.t_max),
        distance_v=violation_distance(L, cons.d_max),
        obstacle_v=violation_obstacle(traj, grid),
        input_v=input_v, state_v=state_v,
        t_f=traj.t_f, path_length=L, reward=reward)


def evaluate_fitness(seq, scenario: Scenario, weights: PenaltyWeights,
                     caches: EvalCaches, use_cache: bool = True) -> EvaluatedIndividual:
    """Score one sequence; failures are encoded in the score, never raised.

    The score is ``g_max / max(g, g_min/2) + penalty`` where ``g`` is the
    collected reward; an empty reward still yields a finite (large) ratio.
    Scenarios without any collectable reward use a ratio of 1.
    """
    key = tuple(seq.indices if hasattr(seq, "indices") else seq)
    if use_cache:
        hit = caches.lookup(key)
        if hit is not None:
            return hit

    reward = collected_reward(seq, scenario)
    try:
        report = _pipeline_report(seq, scenario, caches, reward)
    except _PIPELINE_FAILURES as exc:
        report = _failure_report(reward, type(exc).__name__)

    g_max = scenario.total_reward()
    if g_max <= 0.0:
        ratio = 1.0
    else:
        floor = scenario.reward_floor()
        g_eff = reward if report.failed is None else 0.0
        ratio = g_max / max(g_eff, floor)
    individual = EvaluatedIndividual(seq, ratio + report.penalty(weights), report)
    if use_cache:
        caches.store(key, individual)
        individual = caches.lookup(key) or individual
    return individual
