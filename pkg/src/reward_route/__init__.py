"""Reward-maximizing waypoint routing with smooth, feasible trajectories.

Selects and orders a subset of weighted waypoints and generates a
collision-free, curvature-continuous trajectory that maximizes the
collected reward under time, distance, state, and input constraints.
"""

from .clothoids import (ClothoidSegment, PiecewiseClothoid, Trajectory,
                        assign_headings, build_path, fit_g1, length,
                        parameterize_time, refine_collision, sample,
                        sample_many, smooth_polyline)
from .fitness import (EvalCaches, EvaluatedIndividual, PenaltyWeights,
                      ViolationReport, evaluate_fitness)
from .ga import GAConfig, WaypointSequence, run_ga
from .grid_search import GridPath, PairwiseCache, astar, polyline_for_sequence
from .oracle import brute_force_best, complexity_sweep, random_scenario
from .scenario import (ConstraintSet, Environment, OccupancyGrid, Scenario,
                       Waypoint, is_free, load_scenario, rasterize, save_scenario,
                       validate)

__version__ = "0.1.0"
