import json
import math

import numpy as np
import pytest

from reward_route.scenario import (AxisAlignedRect, Environment,
                                   ScenarioError, is_free, load_scenario,
                                   rasterize, save_scenario, validate)

from conftest import make_scenario

MINIMAL = {
    "bounds": {"x_min": 0.0, "x_max": 2.0, "y_min": 0.0, "y_max": 2.0},
    "waypoints": [{"x": 1.0, "y": 1.0, "reward": 0.0}],
    "constraints": {"v_max": 1.0},
}


def doc(**overrides):
    base = json.loads(json.dumps(MINIMAL))
    base.update(overrides)
    return json.dumps(base)


class TestLoad:
    def test_minimal_document(self):
        sc = load_scenario(doc())
        assert sc.environment.obstacles == ()
        assert sc.kappa == 1
        assert sc.grid_resolution == 0.05
        assert sc.inflation_radius == 0.0
        assert not sc.fixed_end

    def test_optional_limits_absent(self):
        sc = load_scenario(doc())
        assert sc.constraints.t_max is None
        assert sc.constraints.d_max is None
        assert sc.constraints.omega_max is None
        assert sc.constraints.v_min == 0.0

    def test_waypoint_inside_obstacle_rejected(self):
        text = doc(obstacles=[{"x": 0.5, "y": 0.5, "w": 1.0, "h": 1.0}])
        with pytest.raises(ScenarioError, match="waypoint 1"):
            load_scenario(text)

    def test_unknown_top_level_key(self):
        with pytest.raises(ScenarioError, match="unknown key"):
            load_scenario(doc(extra=1))

    def test_unknown_nested_key(self):
        text = doc(constraints={"v_max": 1.0, "velocity": 2.0})
        with pytest.raises(ScenarioError, match="constraints.*unknown|unknown key"):
            load_scenario(text)

    def test_missing_required_key_names_field(self):
        bad = json.loads(doc())
        del bad["constraints"]["v_max"]
        with pytest.raises(ScenarioError, match="v_max"):
            load_scenario(json.dumps(bad))

    def test_parse_error_reports_line(self):
        with pytest.raises(ScenarioError, match="line"):
            load_scenario("{not json")

    def test_bad_bounds(self):
        bad = json.loads(doc())
        bad["bounds"]["x_max"] = -1.0
        with pytest.raises(ScenarioError, match="x_min"):
            load_scenario(json.dumps(bad))

    def test_obstacle_outside_bounds(self):
        text = doc(obstacles=[{"x": 5.0, "y": 5.0, "w": 1.0, "h": 1.0}])
        with pytest.raises(ScenarioError, match="intersect"):
            load_scenario(text)

    def test_nonpositive_obstacle(self):
        text = doc(obstacles=[{"x": 0.1, "y": 0.1, "w": 0.0, "h": 1.0}])
        with pytest.raises(ScenarioError, match="positive"):
            load_scenario(text)

    def test_unknown_model(self):
        with pytest.raises(ScenarioError, match="model"):
            load_scenario(doc(model="hovercraft"))

    def test_roundtrip_identity(self):
        sc = make_scenario(
            waypoints=[(0.55, 0.25, 0.0), (3.17, 2.93, 1.25), (8.05, 8.05, 0.0)],
            obstacles=[(4.03, 4.07, 1.11, 2.22)],
            t_max=37.5, d_max=123.0, v_min=0.125, omega_max=0.5,
            resolution=0.1, inflation=0.07)
        again = load_scenario(save_scenario(sc))
        assert again.environment == sc.environment
        assert again.waypoints == sc.waypoints
        assert again.constraints == sc.constraints
        assert again.fixed_end == sc.fixed_end
        assert again.model == sc.model
        assert again.grid_resolution == sc.grid_resolution
        assert again.inflation_radius == sc.inflation_radius


class TestRasterize:
    def test_empty_obstacles_all_free(self):
        env = Environment(0.0, 1.0, 0.0, 1.0)
        grid = rasterize(env, 0.1)
        assert not grid.cells.any()

    def test_full_cover_all_occupied(self):
        env = Environment(0.0, 1.0, 0.0, 1.0, (AxisAlignedRect(0, 0, 1, 1),))
        grid = rasterize(env, 0.1)
        assert grid.cells.all()

    def test_inflation_matches_distance_oracle(self):
        # 1x1 m box, 0.5 m inflation: compare against a direct
        # point-to-rectangle distance computation at every cell center
        env = Environment(0.0, 4.0, 0.0, 4.0, (AxisAlignedRect(1.5, 1.5, 1.0, 1.0),))
        grid = rasterize(env, 0.1, inflation_radius=0.5)
        for iy in range(grid.height):
            for ix in range(grid.width):
                cx, cy = grid.center(ix, iy)
                dx = max(1.5 - cx, 0.0, cx - 2.5)
                dy = max(1.5 - cy, 0.0, cy - 2.5)
                expected = math.hypot(dx, dy) <= 0.5
                assert grid.cells[iy, ix] == expected, (ix, iy)

    def test_monotone_in_inflation(self, rng):
        for _ in range(10):
            x, y = rng.uniform(0.5, 6.0, 2)
            w, h = rng.uniform(0.3, 2.0, 2)
            env = Environment(0.0, 8.0, 0.0, 8.0, (AxisAlignedRect(x, y, w, h),))
            r1, r2 = sorted(rng.uniform(0.0, 1.0, 2))
            g1 = rasterize(env, 0.1, r1)
            g2 = rasterize(env, 0.1, r2)
            # every cell free at the larger inflation is free at the smaller
            assert not (~g2.cells & g1.cells).any()


class TestIsFree:
    def test_outside_bounds_occupied(self):
        grid = rasterize(Environment(0.0, 1.0, 0.0, 1.0), 0.1)
        assert not is_free(grid, -0.01, 0.5)
        assert not is_free(grid, 0.5, 1.01)

    def test_center_of_free_cell(self):
        grid = rasterize(Environment(0.0, 1.0, 0.0, 1.0), 0.1)
        assert is_free(grid, 0.55, 0.55)

    def test_boundary_belongs_to_higher_cell(self):
        # occupied column starts at x=0.5; a point exactly on the boundary
        # falls in the occupied cell by the floor rule
        env = Environment(0.0, 1.0, 0.0, 1.0, (AxisAlignedRect(0.5, 0.0, 0.5, 1.0),))
        grid = rasterize(env, 0.1)
        assert is_free(grid, 0.5 - 1e-9, 0.55)
        assert not is_free(grid, 0.5, 0.55)

    def test_matches_exact_rectangle_away_from_edges(self, rng):
        rect = AxisAlignedRect(2.0, 3.0, 1.5, 0.8)
        env = Environment(0.0, 8.0, 0.0, 8.0, (rect,))
        res = 0.05
        grid = rasterize(env, res)
        margin = res * math.sqrt(2.0)
        for _ in range(500):
            px, py = rng.uniform(0.2, 7.8, 2)
            if abs(rect.distance(px, py)) < margin:
                continue
            inside = (rect.x < px < rect.x + rect.w) and (rect.y < py < rect.y + rect.h)
            assert is_free(grid, px, py) == (not inside)


class TestValidate:
    def test_clean_scenario(self, open_scenario):
        assert validate(open_scenario) == []

    def test_start_inside_inflated_obstacle(self):
        sc = make_scenario(
            waypoints=[(1.0, 1.0, 0.0), (5.0, 5.0, 1.0), (9.0, 9.0, 0.0)],
            obstacles=[(1.5, 0.5, 1.0, 1.0)], inflation=0.8)
        findings = validate(sc)
        assert any("waypoint 1" in f for f in findings)

    def test_speed_band_finding(self):
        sc = make_scenario(
            waypoints=[(1.0, 1.0, 0.0), (5.0, 5.0, 1.0), (9.0, 9.0, 0.0)],
            v_max=1.0, v_min=2.0)
        assert any("v_min" in f for f in findings_of(sc))

    def test_nonpositive_intermediate_reward(self):
        sc = make_scenario(
            waypoints=[(1.0, 1.0, 0.0), (5.0, 5.0, 0.0), (9.0, 9.0, 0.0)])
        assert any("waypoint 2" in f for f in findings_of(sc))

    def test_nonzero_endpoint_reward(self):
        sc = make_scenario(
            waypoints=[(1.0, 1.0, 3.0), (5.0, 5.0, 1.0), (9.0, 9.0, 0.0)])
        assert any("waypoint 1" in f for f in findings_of(sc))


def findings_of(sc):
    return validate(sc)


class TestScenarioHelpers:
    def test_intermediate_ids_fixed_end(self, open_scenario):
        assert open_scenario.intermediate_ids() == (2, 3, 4)

    def test_intermediate_ids_free_end(self):
        sc = make_scenario(waypoints=[(1, 1, 0.0), (2, 2, 1.0), (3, 3, 2.0)],
                           fixed_end=False)
        assert sc.intermediate_ids() == (2, 3)

    def test_total_reward_and_floor(self, open_scenario):
        assert open_scenario.total_reward() == 9.0
        assert open_scenario.reward_floor() == 1.0

    def test_immutable_grid(self):
        grid = rasterize(Environment(0.0, 1.0, 0.0, 1.0), 0.1)
        with pytest.raises(ValueError):
            grid.cells[0, 0] = True
