import numpy as np
import pytest

from reward_route.scenario import (AxisAlignedRect, ConstraintSet, Environment,
                                   Scenario, Waypoint)


def make_scenario(waypoints, obstacles=(), bounds=(0.0, 10.0, 0.0, 10.0),
                  fixed_end=True, resolution=0.1, inflation=0.0, **cons):
    """Scenario factory for tests; constraints default to generous bounds."""
    cons.setdefault("v_max", 1.0)
    return Scenario(
        environment=Environment(bounds[0], bounds[1], bounds[2], bounds[3],
                                tuple(AxisAlignedRect(*o) for o in obstacles)),
        waypoints=tuple(Waypoint(*w) for w in waypoints),
        fixed_end=fixed_end,
        constraints=ConstraintSet(**cons),
        grid_resolution=resolution,
        inflation_radius=inflation)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def open_scenario():
    """Obstacle-free 10x10 map: start, three prizes, fixed end."""
    return make_scenario(
        waypoints=[(0.5, 0.5, 0.0), (3.05, 0.55, 2.0), (5.05, 3.05, 3.0),
                   (2.05, 5.05, 4.0), (8.05, 8.05, 0.0)],
        t_max=1000.0)
