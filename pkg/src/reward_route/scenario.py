"""Planning problem definition: environment, obstacles, waypoints, constraints.

A scenario couples a rectangular 2-D environment containing axis-aligned box
obstacles with an ordered list of weighted waypoints, a set of motion
constraints, and a vehicle model selector.  Waypoint 1 is always the fixed
start; the last waypoint is a mandatory terminal only when ``fixed_end`` is
set.  Scenarios are immutable once built and are rasterized into an
occupancy grid (optionally inflated by the vehicle radius) for planning.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_RESOLUTION = 0.05
DEFAULT_INFLATION = 0.0


class ScenarioError(ValueError):
    """Scenario document is malformed or violates an invariant."""


class Model(enum.Enum):
    DIFFDRIVE = "diffdrive"
    QUADRUPED = "quadruped"


@dataclass(frozen=True)
class AxisAlignedRect:
    """Axis-aligned obstacle box: lower-left corner plus width/height [m]."""

    x: float
    y: float
    w: float
    h: float

    def distance(self, px: float, py: float) -> float:
        """Euclidean distance from a point to the box (0 inside)."""
        dx = max(self.x - px, 0.0, px - (self.x + self.w))
        dy = max(self.y - py, 0.0, py - (self.y + self.h))
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class Environment:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    obstacles: tuple[AxisAlignedRect, ...] = ()

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ScenarioError("bounds: x_min must be < x_max")
        if not self.y_min < self.y_max:
            raise ScenarioError("bounds: y_min must be < y_max")
        for k, r in enumerate(self.obstacles):
            if r.w <= 0 or r.h <= 0:
                raise ScenarioError(f"obstacles[{k}]: width and height must be positive")
            if (r.x + r.w <= self.x_min or r.x >= self.x_max
                    or r.y + r.h <= self.y_min or r.y >= self.y_max):
                raise ScenarioError(f"obstacles[{k}]: rectangle does not intersect the bounds")


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    reward: float


@dataclass(frozen=True)
class ConstraintSet:
    """Mission and actuation bounds; absent optional bounds never bind."""

    v_max: float
    v_min: float = 0.0
    t_max: float | None = None
    d_max: float | None = None
    omega_max: float | None = None
    accel_max: float | None = None

    def __post_init__(self) -> None:
        for name in ("v_max", "t_max", "d_max", "omega_max", "accel_max"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ScenarioError(f"constraints.{name}: must be positive")
        if self.v_min < 0:
            raise ScenarioError("constraints.v_min: must be nonnegative")


@dataclass(frozen=True)
class DiffDriveParams:
    wheel_radius: float
    track_width: float

    def __post_init__(self) -> None:
        if self.wheel_radius <= 0 or self.track_width <= 0:
            raise ScenarioError("model_params: wheel radius and track width must be positive")


@dataclass(frozen=True)
class Scenario:
    environment: Environment
    waypoints: tuple[Waypoint, ...]
    fixed_end: bool = False
    constraints: ConstraintSet = ConstraintSet(v_max=1.0)
    model: Model = Model.DIFFDRIVE
    model_params: DiffDriveParams | None = None
    grid_resolution: float = DEFAULT_RESOLUTION
    inflation_radius: float = DEFAULT_INFLATION
    # (kappa, 2) waypoint coordinates, filled in __post_init__
    positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.waypoints) < 1:
            raise ScenarioError("waypoints: at least one waypoint (the start) is required")
        if self.fixed_end and len(self.waypoints) < 2:
            raise ScenarioError("waypoints: fixed_end requires at least two waypoints")
        if self.grid_resolution <= 0:
            raise ScenarioError("grid.resolution: must be positive")
        if self.inflation_radius < 0:
            raise ScenarioError("grid.inflation: must be nonnegative")
        pos = np.array([(w.x, w.y) for w in self.waypoints], dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def kappa(self) -> int:
        """Total waypoint count; waypoint ids are 1..kappa."""
        return len(self.waypoints)

    def intermediate_ids(self) -> tuple[int, ...]:
        """Selectable waypoint ids (everything but the fixed endpoints)."""
        hi = self.kappa - 1 if self.fixed_end else self.kappa
        return tuple(range(2, hi + 1))

    def position(self, wid: int) -> np.ndarray:
        return self.positions[wid - 1]

    def reward(self, wid: int) -> float:
        return self.waypoints[wid - 1].reward

    def total_reward(self) -> float:
        return math.fsum(self.reward(i) for i in self.intermediate_ids())

    def reward_floor(self) -> float:
        """Denominator clamp for the reward ratio: half the smallest prize."""
        positive = [self.reward(i) for i in self.intermediate_ids() if self.reward(i) > 0]
        return min(positive) / 2.0 if positive else 1.0


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean occupancy raster; True marks an occupied cell.

    ``cells`` has shape (height, width), row ``iy`` spanning
    ``origin_y + iy*resolution .. +resolution``.  A point outside the raster
    reads as occupied.
    """

    origin_x: float
    origin_y: float
    resolution: float
    width: int
    height: int
    cells: np.ndarray

    def __post_init__(self) -> None:
        if self.cells.shape != (self.height, self.width):
            raise ValueError("cells raster does not match width/height")
        self.cells.setflags(write=False)

    def cell_of(self, px: float, py: float) -> tuple[int, int]:
        """Containing cell (ix, iy); boundary points fall in the higher cell."""
        ix = math.floor((px - self.origin_x) / self.resolution)
        iy = math.floor((py - self.origin_y) / self.resolution)
        return ix, iy

    def center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin_x + (ix + 0.5) * self.resolution,
                self.origin_y + (iy + 0.5) * self.resolution)


def rasterize(env: Environment, resolution: float,
              inflation_radius: float = 0.0) -> OccupancyGrid:
    """Rasterize the environment at cell centers.

    A cell is occupied iff its center lies within ``inflation_radius`` of an
    obstacle box (exact Euclidean point-to-box distance, i.e. the box dilated
    by a disk) or outside the environment bounds.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if inflation_radius < 0:
        raise ValueError("inflation_radius must be nonnegative")
    width = int(math.ceil((env.x_max - env.x_min) / resolution - 1e-9))
    height = int(math.ceil((env.y_max - env.y_min) / resolution - 1e-9))
    width = max(width, 1)
    height = max(height, 1)
    xs = env.x_min + (np.arange(width) + 0.5) * resolution
    ys = env.y_min + (np.arange(height) + 0.5) * resolution
    X, Y = np.meshgrid(xs, ys)
    occ = (X > env.x_max) | (Y > env.y_max)
    for r in env.obstacles:
        dx = np.maximum(np.maximum(r.x - X, X - (r.x + r.w)), 0.0)
        dy = np.maximum(np.maximum(r.y - Y, Y - (r.y + r.h)), 0.0)
        occ |= dx * dx + dy * dy <= inflation_radius * inflation_radius
    return OccupancyGrid(env.x_min, env.y_min, resolution, width, height, occ)


def is_free(grid: OccupancyGrid, px: float, py: float) -> bool:
    """True iff the point maps to an in-bounds unoccupied cell."""
    ix, iy = grid.cell_of(px, py)
    if ix < 0 or iy < 0 or ix >= grid.width or iy >= grid.height:
        return False
    return not grid.cells[iy, ix]


def free_mask(grid: OccupancyGrid, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`is_free` over an (n, 2) point array."""
    ix = np.floor((points[:, 0] - grid.origin_x) / grid.resolution).astype(np.int64)
    iy = np.floor((points[:, 1] - grid.origin_y) / grid.resolution).astype(np.int64)
    inside = (ix >= 0) & (iy >= 0) & (ix < grid.width) & (iy < grid.height)
    out = np.zeros(len(points), dtype=bool)
    ii = np.where(inside)[0]
    out[ii] = ~grid.cells[iy[ii], ix[ii]]
    return out


def validate(scenario: Scenario) -> list[str]:
    """Collect every invariant violation; an empty list means valid."""
    findings: list[str] = []
    c = scenario.constraints
    if c.v_min > c.v_max:
        findings.append("constraints: v_min exceeds v_max")
    grid = rasterize(scenario.environment, scenario.grid_resolution,
                     scenario.inflation_radius)
    intermediates = set(scenario.intermediate_ids())
    for wid in range(1, scenario.kappa + 1):
        w = scenario.waypoints[wid - 1]
        if not is_free(grid, w.x, w.y):
            findings.append(f"waypoint {wid}: not in the inflated free space")
        if wid in intermediates:
            if w.reward <= 0:
                findings.append(f"waypoint {wid}: intermediate reward must be positive")
        elif w.reward != 0:
            findings.append(f"waypoint {wid}: fixed endpoint must carry zero reward")
    return findings


# --- scenario document (JSON) -------------------------------------------

_TOP_KEYS = {"bounds", "obstacles", "waypoints", "fixed_end", "constraints",
             "model", "model_params", "grid"}
_CONSTRAINT_KEYS = {"t_max", "d_max", "v_max", "v_min", "omega_max", "accel_max"}


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required key '{key}'")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown key '{sorted(unknown)[0]}'")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises :class:`ScenarioError` with field context on malformed documents
    and with the violated invariant on semantically invalid ones.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: "
                            f"{exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("document: top level must be an object")
    _reject_unknown(doc, _TOP_KEYS, "document")

    bounds = _require(doc, "bounds", "document")
    _reject_unknown(bounds, {"x_min", "x_max", "y_min", "y_max"}, "bounds")
    env_kwargs = {k: _number(_require(bounds, k, "bounds"), f"bounds.{k}")
                  for k in ("x_min", "x_max", "y_min", "y_max")}

    obstacles = []
    for k, entry in enumerate(doc.get("obstacles", [])):
        _reject_unknown(entry, {"x", "y", "w", "h"}, f"obstacles[{k}]")
        obstacles.append(AxisAlignedRect(
            *(_number(_require(entry, f, f"obstacles[{k}]"), f"obstacles[{k}].{f}")
              for f in ("x", "y", "w", "h"))))
    env = Environment(obstacles=tuple(obstacles), **env_kwargs)

    waypoints = []
    wp_entries = _require(doc, "waypoints", "document")
    for k, entry in enumerate(wp_entries):
        _reject_unknown(entry, {"x", "y", "reward"}, f"waypoints[{k}]")
        waypoints.append(Waypoint(
            _number(_require(entry, "x", f"waypoints[{k}]"), f"waypoints[{k}].x"),
            _number(_require(entry, "y", f"waypoints[{k}]"), f"waypoints[{k}].y"),
            _number(entry.get("reward", 0.0), f"waypoints[{k}].reward")))

    cons = _require(doc, "constraints", "document")
    _reject_unknown(cons, _CONSTRAINT_KEYS, "constraints")
    constraints = ConstraintSet(
        v_max=_number(_require(cons, "v_max", "constraints"), "constraints.v_max"),
        v_min=_number(cons.get("v_min", 0.0), "constraints.v_min"),
        t_max=None if "t_max" not in cons else _number(cons["t_max"], "constraints.t_max"),
        d_max=None if "d_max" not in cons else _number(cons["d_max"], "constraints.d_max"),
        omega_max=None if "omega_max" not in cons else _number(cons["omega_max"],
                                                               "constraints.omega_max"),
        accel_max=None if "accel_max" not in cons else _number(cons["accel_max"],
                                                               "constraints.accel_max"))

    model_name = doc.get("model", "diffdrive")
    try:
        model = Model(model_name)
    except ValueError:
        raise ScenarioError(f"model: unknown model '{model_name}'") from None

    params = None
    raw_params = doc.get("model_params", {})
    if raw_params:
        _reject_unknown(raw_params, {"r", "d_v"}, "model_params")
        params = DiffDriveParams(_number(_require(raw_params, "r", "model_params"),
                                         "model_params.r"),
                                 _number(_require(raw_params, "d_v", "model_params"),
                                         "model_params.d_v"))

    grid_doc = doc.get("grid", {})
    _reject_unknown(grid_doc, {"resolution", "inflation"}, "grid")

    scenario = Scenario(
        environment=env,
        waypoints=tuple(waypoints),
        fixed_end=bool(doc.get("fixed_end", False)),
        constraints=constraints,
        model=model,
        model_params=params,
        grid_resolution=_number(grid_doc.get("resolution", DEFAULT_RESOLUTION),
                                "grid.resolution"),
        inflation_radius=_number(grid_doc.get("inflation", DEFAULT_INFLATION),
                                 "grid.inflation"))

    findings = validate(scenario)
    if findings:
        raise ScenarioError("; ".join(findings))
    return scenario


def save_scenario(scenario: Scenario) -> str:
    """Serialize back to the document format (round-trips exactly)."""
    env = scenario.environment
    doc = {
        "bounds": {"x_min": env.x_min, "x_max": env.x_max,
                   "y_min": env.y_min, "y_max": env.y_max},
        "obstacles": [{"x": r.x, "y": r.y, "w": r.w, "h": r.h}
                      for r in env.obstacles],
        "waypoints": [{"x": w.x, "y": w.y, "reward": w.reward}
                      for w in scenario.waypoints],
        "fixed_end": scenario.fixed_end,
        "constraints": {k: v for k, v in (
            ("t_max", scenario.constraints.t_max),
            ("d_max", scenario.constraints.d_max),
            ("v_max", scenario.constraints.v_max),
            ("v_min", scenario.constraints.v_min),
            ("omega_max", scenario.constraints.omega_max),
            ("accel_max", scenario.constraints.accel_max)) if v is not None},
        "model": scenario.model.value,
        "grid": {"resolution": scenario.grid_resolution,
                 "inflation": scenario.inflation_radius},
    }
    if scenario.model_params is not None:
        doc["model_params"] = {"r": scenario.model_params.wheel_radius,
                               "d_v": scenario.model_params.track_width}
    return json.dumps(doc, indent=2, sort_keys=True)
