import numpy as np
import pytest

from reward_route.clothoids import ConstraintSet, build_path, parameterize_time
from reward_route.fitness import (EvalCaches, PenaltyWeights, ViolationReport,
                                  evaluate_fitness, violation_distance,
                                  violation_input, violation_lower,
                                  violation_obstacle, violation_time)
from reward_route.ga import WaypointSequence
from reward_route.scenario import AxisAlignedRect, Environment, rasterize

from conftest import make_scenario


class TestClosedForms:
    def test_time_within_window(self):
        assert violation_time(30.0, 40.0) == 0.0

    def test_time_boundary(self):
        assert violation_time(40.0, 40.0) == 0.0

    def test_time_overshoot(self):
        assert violation_time(60.0, 40.0) == pytest.approx(0.5, abs=1e-12)

    def test_time_absent(self):
        assert violation_time(1e9, None) == 0.0

    def test_distance_within(self):
        assert violation_distance(7.5, 8.0) == 0.0

    def test_distance_overshoot(self):
        assert violation_distance(8.5, 8.0) == pytest.approx(0.0625, abs=1e-12)

    def test_distance_double(self):
        assert violation_distance(16.0, 8.0) == pytest.approx(1.0, abs=1e-12)

    def test_input_at_bound(self):
        series = np.full(100, 2.0)
        assert violation_input(series, 2.0, 10.0) == 0.0

    def test_input_double_bound(self):
        series = np.full(100, 2.0)
        assert violation_input(series, 1.0, 10.0) == pytest.approx(1.0, abs=1e-12)

    def test_input_half_duration(self):
        n = 1001
        series = np.where(np.arange(n) < n // 2, 2.0, 1.0)
        v = violation_input(series, 1.0, 10.0)
        assert v == pytest.approx(0.5, abs=2.0 / (n - 1))

    def test_lower_bound_counterpart(self):
        series = np.full(100, 0.05)
        assert violation_lower(series, 0.1, 10.0) == pytest.approx(0.5, abs=1e-12)

    def test_input_validates_arguments(self):
        with pytest.raises(ValueError):
            violation_input(np.ones(3), 0.0, 1.0)
        with pytest.raises(ValueError):
            violation_input(np.ones(3), 1.0, 0.0)


class TestObstacleViolation:
    def corridor_traj(self, n=2001):
        # strictly inside the bounds: the outer boundary itself reads occupied
        path = build_path(np.array([[0.05, 0.5], [9.95, 0.5]]))
        return parameterize_time(path, ConstraintSet(v_max=1.0, t_max=10.0),
                                 sample_count=n)

    def test_fully_free(self):
        grid = rasterize(Environment(0.0, 10.0, 0.0, 1.0), 0.1)
        assert violation_obstacle(self.corridor_traj(), grid) == 0.0

    def test_fully_occupied(self):
        env = Environment(0.0, 10.0, 0.0, 1.0, (AxisAlignedRect(0, 0, 10, 1),))
        grid = rasterize(env, 0.1)
        assert violation_obstacle(self.corridor_traj(), grid) == 1.0

    def test_half_occluded(self):
        env = Environment(0.0, 10.0, 0.0, 1.0, (AxisAlignedRect(5, 0, 5, 1),))
        grid = rasterize(env, 0.1)
        traj = self.corridor_traj()
        increment = traj.total_length / (len(traj.t) - 1)
        assert violation_obstacle(traj, grid) == pytest.approx(0.5, abs=2 * increment)


class TestEvaluate:
    def test_minimum_fitness_is_one(self, open_scenario):
        caches = EvalCaches(open_scenario)
        seq = WaypointSequence((1, 2, 3, 4, 5))
        ev = evaluate_fitness(seq, open_scenario, PenaltyWeights(), caches)
        assert ev.h == 1.0
        assert ev.report.feasible()

    def test_empty_selection_ratio(self, open_scenario):
        caches = EvalCaches(open_scenario)
        seq = WaypointSequence((1, 5))
        ev = evaluate_fitness(seq, open_scenario, PenaltyWeights(), caches)
        # no reward collected: ratio clamps at g_max / (min reward / 2)
        assert ev.h == pytest.approx(9.0 / 1.0, abs=1e-12)
        assert ev.report.reward == 0.0

    def test_time_violation_composition(self, open_scenario):
        caches = EvalCaches(open_scenario)
        weights = PenaltyWeights(alpha_time=10.0)
        seq = WaypointSequence((1, 2, 3, 4, 5))
        baseline = evaluate_fitness(seq, open_scenario, weights, caches)
        L = baseline.report.path_length
        tight = make_scenario(
            waypoints=[(w.x, w.y, w.reward) for w in open_scenario.waypoints],
            t_max=L / 1.2, v_max=1.0)
        ev = evaluate_fitness(seq, tight, weights, EvalCaches(tight))
        # cruise clamps to v_max, so t_f = L and the overshoot is exactly 20%
        assert ev.h == pytest.approx(1.0 + 10.0 * 0.2, abs=1e-9)

    def test_unreachable_waypoint_penalized_not_raised(self):
        sc = make_scenario(
            waypoints=[(0.55, 0.55, 0.0), (5.05, 5.05, 2.0), (9.55, 9.55, 0.0)],
            obstacles=[(4.0, 4.0, 2.0, 2.0)])  # waypoint 2 sealed inside
        caches = EvalCaches(sc)
        weights = PenaltyWeights()
        ev = evaluate_fitness(WaypointSequence((1, 2, 3)), sc, weights, caches)
        assert ev.report.failed is not None
        total_alpha = (weights.alpha_time + weights.alpha_dist
                       + weights.alpha_obstacle + weights.alpha_input
                       + weights.alpha_state)
        assert ev.h == pytest.approx(sc.total_reward() / sc.reward_floor()
                                     + total_alpha, abs=1e-9)

    def test_single_point_sequence_trivial(self):
        sc = make_scenario(waypoints=[(0.55, 0.55, 0.0), (5.05, 5.05, 2.0)],
                           fixed_end=False)
        caches = EvalCaches(sc)
        ev = evaluate_fitness(WaypointSequence((1,)), sc, PenaltyWeights(), caches)
        assert ev.report.t_f == 0.0
        assert ev.report.path_length == 0.0
        assert ev.report.feasible()
        assert ev.h == pytest.approx(2.0 / 1.0, abs=1e-12)

    def test_cache_transparency(self, open_scenario):
        weights = PenaltyWeights()
        seq = WaypointSequence((1, 3, 2, 5))
        caches = EvalCaches(open_scenario)
        cached = evaluate_fitness(seq, open_scenario, weights, caches)
        again = evaluate_fitness(seq, open_scenario, weights, caches)
        cold = evaluate_fitness(seq, open_scenario, weights,
                                EvalCaches(open_scenario), use_cache=False)
        assert cached.h == again.h == cold.h
        assert cached.report == cold.report

    def test_penalty_monotone_in_each_violation(self):
        weights = PenaltyWeights(alpha_time=10, alpha_dist=10, alpha_obstacle=100,
                                 alpha_input=10, alpha_state=10)
        base = ViolationReport(0.1, 0.1, 0.1, {"speed": 0.1}, {"accel": 0.1},
                               1.0, 1.0, 1.0)
        for bump in ("time_v", "distance_v", "obstacle_v"):
            kwargs = dict(time_v=base.time_v, distance_v=base.distance_v,
                          obstacle_v=base.obstacle_v, input_v=base.input_v,
                          state_v=base.state_v, t_f=1.0, path_length=1.0,
                          reward=1.0)
            kwargs[bump] = 0.2
            assert ViolationReport(**kwargs).penalty(weights) > base.penalty(weights)

    def test_reward_uses_exact_summation(self, open_scenario):
        caches = EvalCaches(open_scenario)
        a = evaluate_fitness(WaypointSequence((1, 2, 3, 4, 5)), open_scenario,
                             PenaltyWeights(), caches)
        b = evaluate_fitness(WaypointSequence((1, 4, 3, 2, 5)), open_scenario,
                             PenaltyWeights(), caches)
        assert a.report.reward == b.report.reward == open_scenario.total_reward()


class TestRewardTermMonotone:
    def test_superset_never_scores_worse_on_free_map(self, open_scenario):
        # without binding constraints, adding a prize can only shrink the
        # reward ratio
        caches = EvalCaches(open_scenario)
        weights = PenaltyWeights()
        subset = evaluate_fitness(WaypointSequence((1, 2, 5)), open_scenario,
                                  weights, caches)
        superset = evaluate_fitness(WaypointSequence((1, 2, 3, 5)),
                                    open_scenario, weights, caches)
        assert superset.h <= subset.h


class TestQuadrupedPipeline:
    def test_quadruped_model_evaluates(self):
        from reward_route.scenario import (AxisAlignedRect, ConstraintSet,
                                           Environment, Model, Scenario, Waypoint)
        sc = Scenario(
            environment=Environment(0.0, 5.0, 0.0, 5.0,
                                    (AxisAlignedRect(2.0, 2.0, 1.0, 1.0),)),
            waypoints=(Waypoint(0.55, 0.55, 0.0), Waypoint(4.05, 0.55, 2.0),
                       Waypoint(4.05, 4.05, 3.0), Waypoint(0.55, 4.05, 0.0)),
            fixed_end=True,
            constraints=ConstraintSet(v_max=1.0, d_max=25.0, omega_max=2.0),
            model=Model.QUADRUPED,
            grid_resolution=0.1)
        caches = EvalCaches(sc)
        ev = evaluate_fitness(WaypointSequence((1, 2, 3, 4)), sc,
                              PenaltyWeights(), caches)
        assert ev.report.failed is None
        assert ev.h >= 1.0
        assert "omega" in ev.report.input_v
