"""Command-line front end: plan a scenario, run the oracle, run benchmarks.

Exit codes: 0 on success with a feasible best solution, 2 when the best
found solution still violates a constraint, 1 on any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from . import clothoids, flatness, grid_search, oracle
from .fitness import EvalCaches, EvaluatedIndividual, PenaltyWeights
from .ga import GAConfig, history_to_csv, run_ga
from .scenario import Model, Scenario, ScenarioError, load_scenario


class CliError(Exception):
    """Fatal command-line problem; message goes to stderr, exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2
        raise CliError(message)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("REWARD_ROUTE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise CliError(f"REWARD_ROUTE_THREADS: {env!r} is not an integer") from exc
    return 1


def _load(path: str) -> tuple[Scenario, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        return load_scenario(raw.decode("utf-8")), raw
    except (ScenarioError, UnicodeDecodeError) as exc:
        raise CliError(f"scenario file {path}: {exc}") from exc


def _config_from_args(args) -> GAConfig:
    kwargs = {"rng_seed": args.seed}
    if args.max_iter is not None:
        kwargs["iter_max"] = args.max_iter
    if args.pop_size is not None:
        kwargs["population_size"] = args.pop_size
    if args.pm is not None:
        kwargs["p_m"] = args.pm
    if args.elite is not None:
        kwargs["elite_fraction"] = args.elite
    if args.trunc is not None:
        kwargs["truncation_fraction"] = args.trunc
    if args.cmix is not None:
        kwargs["warp_fraction"] = args.cmix
    try:
        return GAConfig(**kwargs)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _solution_document(scenario: Scenario, digest: str,
                       best: EvaluatedIndividual, seed: int,
                       config: GAConfig | None) -> dict:
    report = best.report
    doc = {
        "scenario_digest": digest,
        "seed": seed,
        "sequence": list(best.sequence.indices),
        "fitness": best.h,
        "reward": report.reward,
        "t_f": _jsonable(report.t_f),
        "path_length": _jsonable(report.path_length),
        "feasible": report.feasible(),
        "violations": {
            "time": report.time_v,
            "distance": report.distance_v,
            "obstacle": report.obstacle_v,
            "input": dict(sorted(report.input_v.items())),
            "state": dict(sorted(report.state_v.items())),
            "failed": report.failed,
        },
        "trajectory_csv": "trajectory.csv",
    }
    if config is not None:
        doc["config"] = {
            "population_size": config.resolve_population(scenario),
            "p_m": config.p_m,
            "elite_fraction": config.elite_fraction,
            "truncation_fraction": config.truncation_fraction,
            "warp_fraction": config.warp_fraction,
            "iter_max": config.iter_max,
            "convergence_window": config.convergence_window,
            "convergence_epsilon": config.convergence_epsilon,
        }
    return doc


def _write_svg(path: Path, scenario: Scenario, traj) -> None:
    env = scenario.environment
    scale = 64.0
    width = (env.x_max - env.x_min) * scale
    height = (env.y_max - env.y_min) * scale

    def sx(x):
        return (x - env.x_min) * scale

    def sy(y):  # svg y grows downward
        return height - (y - env.y_min) * scale

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
             f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
             f'<rect width="{width:.0f}" height="{height:.0f}" fill="white" '
             f'stroke="black"/>']
    for r in env.obstacles:
        parts.append(f'<rect x="{sx(r.x):.1f}" y="{sy(r.y + r.h):.1f}" '
                     f'width="{r.w * scale:.1f}" height="{r.h * scale:.1f}" '
                     f'fill="#d33" fill-opacity="0.8"/>')
    if traj is not None and len(traj.x) > 1:
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(traj.x, traj.y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#06c" '
                     f'stroke-width="2"/>')
    max_reward = max((w.reward for w in scenario.waypoints), default=1.0) or 1.0
    for i, w in enumerate(scenario.waypoints):
        radius = 4.0 + 8.0 * (w.reward / max_reward)
        color = "#333" if w.reward == 0 else "#26c"
        parts.append(f'<circle cx="{sx(w.x):.1f}" cy="{sy(w.y):.1f}" '
                     f'r="{radius:.1f}" fill="{color}" fill-opacity="0.7"/>')
        parts.append(f'<text x="{sx(w.x) + radius:.1f}" y="{sy(w.y):.1f}" '
                     f'font-size="11">{i + 1}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def _export_solution(out: Path, scenario: Scenario, best: EvaluatedIndividual,
                     doc: dict, caches: EvalCaches, plot: bool,
                     solution_name: str = "solution.json") -> None:
    out.mkdir(parents=True, exist_ok=True)
    traj = None
    trace = None
    if best.report.failed is None and best.report.path_length > 0:
        polyline = grid_search.polyline_for_sequence(caches.grid, best.sequence,
                                                     scenario, caches.pairwise)
        path = clothoids.smooth_polyline(polyline, caches.grid)
        samples = max(100, int(math.ceil(2.0 * path.total_length
                                         / caches.grid.resolution)) + 1)
        traj = clothoids.parameterize_time(path, scenario.constraints, samples)
        flat = flatness.flat_trace_from_trajectory(traj)
        if scenario.model is Model.QUADRUPED:
            trace = flatness.quadruped_forward(flat)
        else:
            trace = flatness.diffdrive_forward(flat, scenario.model_params)
    (out / solution_name).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if traj is not None:
        (out / "trajectory.csv").write_text(clothoids.trajectory_to_csv(traj),
                                            encoding="utf-8")
        (out / "states.csv").write_text(flatness.states_to_csv(trace),
                                        encoding="utf-8")
    else:
        (out / "trajectory.csv").write_text("t,x,y,theta,kappa,v,a_lat\n",
                                            encoding="utf-8")
        (out / "states.csv").write_text("t,x1,x2,x3,u1,u2\n", encoding="utf-8")
    if plot:
        _write_svg(out / "plot.svg", scenario, traj)


def cmd_plan(args) -> int:
    scenario, raw = _load(args.scenario)
    digest = "sha256:" + hashlib.sha256(raw).hexdigest()
    config = _config_from_args(args)
    caches = EvalCaches(scenario)
    best, history = run_ga(scenario, config, PenaltyWeights(),
                           caches=caches, threads=_threads(args))
    out = Path(args.out)
    doc = _solution_document(scenario, digest, best, args.seed, config)
    _export_solution(out, scenario, best, doc, caches, args.plot)
    (out / "history.csv").write_text(history_to_csv(history), encoding="utf-8")
    return 0 if best.report.feasible() else 2


def cmd_oracle(args) -> int:
    scenario, raw = _load(args.scenario)
    digest = "sha256:" + hashlib.sha256(raw).hexdigest()
    count = len(scenario.intermediate_ids())
    if count > oracle.ENUMERATION_LIMIT:
        raise CliError(f"{count} intermediate waypoints exceed the exhaustive "
                       f"search limit of {oracle.ENUMERATION_LIMIT}")
    caches = EvalCaches(scenario)
    best = oracle.brute_force_best(scenario, PenaltyWeights(), caches)
    out = Path(args.out)
    doc = _solution_document(scenario, digest, best, 0, None)
    _export_solution(out, scenario, best, doc, caches, args.plot,
                     solution_name="oracle.json")
    return 0 if best.report.feasible() else 2


def cmd_bench(args) -> int:
    try:
        counts = [int(v) for v in args.counts.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"--counts: {exc}") from exc
    if not counts:
        raise CliError("--counts: need at least one waypoint count")
    if args.trials < 1:
        raise CliError("--trials must be positive")
    # scaled-down population rule keeps the sweep affordable at large counts
    config = GAConfig(population_size=args.pop_size, beta_p=6.0,
                      iter_max=args.max_iter or 30,
                      convergence_window=10, convergence_epsilon=1e-9,
                      rng_seed=args.seed)
    rows, slope = oracle.complexity_sweep(counts, args.trials, config,
                                          seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(oracle.bench_to_csv(rows, slope),
                                   encoding="utf-8")
    print(f"log-log runtime slope: {slope:.3f}")
    return 0


def _add_ga_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--pop-size", type=int, default=None)
    p.add_argument("--pm", type=float, default=None, help="mutation probability")
    p.add_argument("--elite", type=float, default=None, help="elite fraction")
    p.add_argument("--trunc", type=float, default=None, help="truncation fraction")
    p.add_argument("--cmix", type=float, default=None,
                   help="fraction of offspring from the warp crossover")
    p.add_argument("--threads", type=int, default=None,
                   help="fitness evaluation threads (default 1 or "
                        "REWARD_ROUTE_THREADS)")
    p.add_argument("--plot", action="store_true", help="also write plot.svg")


def build_parser() -> _Parser:
    parser = _Parser(prog="reward-route",
                     description="Reward-maximizing waypoint routing")
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="run the evolutionary planner")
    plan.add_argument("--scenario", required=True)
    plan.add_argument("--out", required=True)
    _add_ga_flags(plan)
    plan.set_defaults(func=cmd_plan)

    orc = sub.add_parser("oracle", help="exhaustive optimum for small instances")
    orc.add_argument("--scenario", required=True)
    orc.add_argument("--out", required=True)
    orc.add_argument("--plot", action="store_true")
    orc.set_defaults(func=cmd_oracle)

    bench = sub.add_parser("bench", help="runtime scaling study")
    bench.add_argument("--counts", required=True,
                       help="comma-separated intermediate waypoint counts")
    bench.add_argument("--trials", type=int, required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--pop-size", type=int, default=None)
    bench.add_argument("--max-iter", type=int, default=None)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
