"""Curvature-continuous path smoothing and constant-speed time allocation.

Piecewise-linear grid paths are interpolated by Euler-spiral segments whose
curvature varies linearly with arc length.  Tangents at interior knots
bisect the adjacent chord bearings; each segment then solves the two-point
Hermite problem (match both end positions and both end tangents) with a
damped Newton iteration on the single sweep unknown.  Spans that clip an
obstacle are repaired by re-inserting midpoints of the source polyline,
which converges to the collision-free polyline itself in the limit.

All spiral integrals
``(x, y)(s) = (x0, y0) + integral of (cos, sin)(theta0 + k0*t + 0.5*kr*t^2)``
are evaluated with composite Gauss-Legendre quadrature whose panel count
grows with the phase span, keeping the absolute error below 1e-10 uniformly
in the parameters (including the straight-line and circular-arc limits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import ConstraintSet, OccupancyGrid, free_mask
from .grid_search import GridPath

G1_TOLERANCE = 1e-8
DEFAULT_CRUISE_FACTOR = 0.8
TIME_REDUCTION_FACTOR = 0.9
DEFAULT_SAMPLE_SPACING = 0.05


class NonConvergence(RuntimeError):
    """Segment fit failed to reach the G1 residual within the iteration cap."""


class InfeasibleSpeedBand(ValueError):
    """Minimum speed exceeds maximum speed; no cruise speed exists."""


# --- oscillatory quadrature ----------------------------------------------

_NODE_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(order: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    cached = _NODE_CACHE.get((order, panels))
    if cached is None:
        nodes, weights = np.polynomial.legendre.leggauss(order)
        t01 = 0.5 * (nodes + 1.0)
        w01 = 0.5 * weights
        t = ((np.arange(panels)[:, None] + t01[None, :]) / panels).ravel()
        w = np.tile(w01 / panels, panels)
        cached = _NODE_CACHE[(order, panels)] = (t, w)
    return cached


def _nodes_for_span(span: float) -> tuple[np.ndarray, np.ndarray]:
    # spectral accuracy needs the order to outpace the phase span; small
    # spans (the common case when sampling along short spans) stay cheap
    if span <= 2.0:
        return _gl_rule(8, 1)
    if span <= 6.0:
        return _gl_rule(16, 1)
    if span <= 20.0:
        return _gl_rule(32, 1)
    return _gl_rule(32, min(1 + int(span / 16.0), 64))


def _osc_integrals(p2, p1, p0, moment: bool = False):
    """Integrals of cos/sin(p0 + p1*t + p2*t^2) over t in [0, 1].

    Returns (C, S) and, when ``moment`` is set, also the Newton moment
    ``M = integral of (t^2 - t) * cos(...)``.  Inputs broadcast.
    """
    p2, p1, p0 = np.broadcast_arrays(np.asarray(p2, float),
                                     np.asarray(p1, float),
                                     np.asarray(p0, float))
    span = float(np.max(np.abs(p2) + np.abs(p1))) if p2.size else 0.0
    t, w = _nodes_for_span(span)
    psi = p0[..., None] + p1[..., None] * t + p2[..., None] * (t * t)
    cos = np.cos(psi)
    C = cos @ w
    S = np.sin(psi) @ w
    if moment:
        return C, S, (cos * (t * t - t)) @ w
    return C, S


def _displacement(theta0, k0, kr, s):
    """Spiral chord from arc length 0 to s, for broadcastable parameters."""
    s = np.asarray(s, float)
    C, S = _osc_integrals(0.5 * np.asarray(kr, float) * s * s,
                          np.asarray(k0, float) * s, theta0)
    return s * C, s * S


def _wrap(angle):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, float), 2.0 * np.pi)


# --- segment fitting -------------------------------------------------------

@dataclass(frozen=True)
class ClothoidSegment:
    """One spiral span: start pose, initial curvature, curvature rate, length."""

    x0: float
    y0: float
    theta0: float
    kappa0: float
    kappa_rate: float
    length: float

    def point_at(self, s: float) -> tuple[float, float]:
        dx, dy = _displacement(self.theta0, self.kappa0, self.kappa_rate,
                               np.asarray(s, float))
        return self.x0 + float(dx), self.y0 + float(dy)

    def heading_at(self, s: float) -> float:
        return self.theta0 + self.kappa0 * s + 0.5 * self.kappa_rate * s * s

    def curvature_at(self, s: float) -> float:
        return self.kappa0 + self.kappa_rate * s


def _fit_batch(p0: np.ndarray, theta0: np.ndarray,
               p1: np.ndarray, theta1: np.ndarray,
               tol: float = 1e-13, max_iter: int = 100):
    """Vectorized Hermite fit; returns (kappa0, kappa_rate, length) arrays."""
    d = p1 - p0
    r = np.hypot(d[:, 0], d[:, 1])
    if np.any(r <= 0.0):
        bad = int(np.argmin(r))
        raise ValueError(f"segment {bad}: coincident endpoints")
    phi = np.arctan2(d[:, 1], d[:, 0])
    f0 = _wrap(theta0 - phi)
    f1 = _wrap(theta1 - phi)
    delta = f1 - f0

    def residual(A, moment=False):
        return _osc_integrals(A, delta - A, f0, moment=moment)

    A = 3.0 * (f0 + f1)
    _, Y = residual(A)
    iterations = 0
    for start in (None, 0.0):
        if start is not None:  # restart any stragglers from a plain guess
            stuck = np.abs(Y) > tol
            if not np.any(stuck):
                break
            A = np.where(stuck, start, A)
            _, Y = residual(A)
        while iterations < max_iter:
            done = np.abs(Y) <= tol
            if np.all(done):
                break
            iterations += 1
            _, _, dY = residual(A, moment=True)
            safe = np.abs(dY) > 1e-15
            step = np.where(safe, Y / np.where(safe, dY, 1.0), np.sign(Y))
            lam = np.ones_like(A)
            A_new = np.where(done, A, A - lam * step)
            _, Y_new = residual(A_new)
            for _ in range(20):
                worse = ~done & (np.abs(Y_new) > np.abs(Y)) & (lam > 1e-6)
                if not np.any(worse):
                    break
                lam = np.where(worse, 0.5 * lam, lam)
                A_new = np.where(done, A, A - lam * step)
                _, Y_new = residual(A_new)
            A, Y = A_new, Y_new
    if np.any(np.abs(Y) > 1e-10):
        bad = int(np.argmax(np.abs(Y)))
        raise NonConvergence(f"segment {bad}: sweep residual {abs(Y[bad]):.3e} "
                             f"after {iterations} iterations")

    X, _ = residual(A)
    if np.any(X <= 1e-12):
        bad = int(np.argmin(X))
        raise NonConvergence(f"segment {bad}: degenerate chord projection")
    L = r / X
    kappa0 = (delta - A) / L
    kappa_rate = 2.0 * A / (L * L)

    dx, dy = _displacement(theta0, kappa0, kappa_rate, L)
    pos_res = np.hypot(p0[:, 0] + dx - p1[:, 0], p0[:, 1] + dy - p1[:, 1])
    ang_res = np.abs(_wrap(theta0 + kappa0 * L + 0.5 * kappa_rate * L * L - theta1))
    if np.any(pos_res > G1_TOLERANCE) or np.any(ang_res > G1_TOLERANCE):
        bad = int(np.argmax(pos_res))
        raise NonConvergence(f"segment {bad}: endpoint residual {pos_res[bad]:.3e}")
    return kappa0, kappa_rate, L


def fit_g1(p0, theta0: float, p1, theta1: float) -> ClothoidSegment:
    """Fit one spiral matching both end positions and tangents.

    Raises :class:`NonConvergence` with the residual when the iteration cap
    is reached, and ``ValueError`` for coincident endpoints.
    """
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    k0, kr, L = _fit_batch(p0[None, :], np.array([float(theta0)]),
                           p1[None, :], np.array([float(theta1)]))
    return ClothoidSegment(float(p0[0]), float(p0[1]), float(theta0),
                           float(k0[0]), float(kr[0]), float(L[0]))


# --- piecewise paths -------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseClothoid:
    """Chain of spiral segments interpolating ``knots`` with shared tangents.

    ``knot_indices`` maps each knot back to its index in the source polyline
    when the path was built from a downsampled polyline; collision
    refinement uses it to re-insert skipped polyline points.
    """

    segments: tuple[ClothoidSegment, ...]
    knots: np.ndarray
    knot_indices: tuple[int, ...] | None = None
    # packed per-segment parameter arrays, derived in __post_init__
    _x0: np.ndarray = field(init=False, repr=False, compare=False)
    _y0: np.ndarray = field(init=False, repr=False, compare=False)
    _th0: np.ndarray = field(init=False, repr=False, compare=False)
    _k0: np.ndarray = field(init=False, repr=False, compare=False)
    _kr: np.ndarray = field(init=False, repr=False, compare=False)
    _len: np.ndarray = field(init=False, repr=False, compare=False)
    _ends: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.knots.setflags(write=False)
        packed = np.array([(s.x0, s.y0, s.theta0, s.kappa0, s.kappa_rate, s.length)
                           for s in self.segments], dtype=float).reshape(-1, 6)
        for name, col in zip(("_x0", "_y0", "_th0", "_k0", "_kr", "_len"),
                             packed.T if len(self.segments) else [np.empty(0)] * 6):
            object.__setattr__(self, name, np.ascontiguousarray(col))
        object.__setattr__(self, "_ends", np.cumsum(self._len))

    @property
    def total_length(self) -> float:
        return float(self._ends[-1]) if len(self.segments) else 0.0

    def locate(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Containing segment index and local arc length for each s."""
        s = np.asarray(s, float)
        total = self.total_length
        if np.any(s < -1e-9) or np.any(s > total + max(1e-9, 1e-12 * total)):
            raise ValueError("arc length out of range")
        s = np.clip(s, 0.0, total)
        idx = np.minimum(np.searchsorted(self._ends, s, side="right"),
                         len(self.segments) - 1)
        starts = self._ends[idx] - self._len[idx]
        return idx, s - starts


def assign_headings(points: np.ndarray) -> np.ndarray:
    """Knot tangents: chord bearings at the ends, bisectors in between.

    At an exact 180-degree reversal the bisector is undefined; the incoming
    bearing rotated by +pi/2 (a left turn) is used instead.
    """
    points = np.asarray(points, float)
    if len(points) < 2:
        raise ValueError("need at least two points")
    chords = np.diff(points, axis=0)
    bearings = np.arctan2(chords[:, 1], chords[:, 0])
    headings = np.empty(len(points))
    headings[0] = bearings[0]
    headings[-1] = bearings[-1]
    if len(points) > 2:
        vx = np.cos(bearings[:-1]) + np.cos(bearings[1:])
        vy = np.sin(bearings[:-1]) + np.sin(bearings[1:])
        interior = np.arctan2(vy, vx)
        reversal = np.hypot(vx, vy) < 1e-12
        interior[reversal] = _wrap(bearings[:-1][reversal] + 0.5 * np.pi)
        headings[1:-1] = interior
    return headings


def build_path(points: np.ndarray, headings: np.ndarray | None = None,
               knot_indices: tuple[int, ...] | None = None) -> PiecewiseClothoid:
    """Fit one spiral segment per consecutive knot pair (G1 at each joint)."""
    points = np.asarray(points, float)
    if len(points) < 2:
        raise ValueError("need at least two points")
    if np.any(np.all(points[1:] == points[:-1], axis=1)):
        raise ValueError("consecutive knots must be distinct")
    if headings is None:
        headings = assign_headings(points)
    headings = np.asarray(headings, float)
    k0, kr, L = _fit_batch(points[:-1], headings[:-1], points[1:], headings[1:])
    segments = tuple(
        ClothoidSegment(points[i, 0], points[i, 1], float(headings[i]),
                        float(k0[i]), float(kr[i]), float(L[i]))
        for i in range(len(points) - 1))
    return PiecewiseClothoid(segments, np.array(points), knot_indices)


def length(path: PiecewiseClothoid) -> float:
    """Total arc length (sum of segment lengths)."""
    return path.total_length


def sample_many(path: PiecewiseClothoid, s: np.ndarray):
    """Positions, headings and curvatures at the given arc lengths."""
    idx, s_loc = path.locate(s)
    dx, dy = _displacement(path._th0[idx], path._k0[idx], path._kr[idx], s_loc)
    pts = np.column_stack((path._x0[idx] + dx, path._y0[idx] + dy))
    theta = path._th0[idx] + path._k0[idx] * s_loc + 0.5 * path._kr[idx] * s_loc ** 2
    kappa = path._k0[idx] + path._kr[idx] * s_loc
    return pts, theta, kappa


def sample(path: PiecewiseClothoid, s: float):
    """Pose at a single arc length: ((x, y), heading, curvature)."""
    pts, theta, kappa = sample_many(path, np.array([float(s)]))
    return (float(pts[0, 0]), float(pts[0, 1])), float(theta[0]), float(kappa[0])


def joint_residuals(path: PiecewiseClothoid) -> tuple[np.ndarray, np.ndarray]:
    """Position and heading gaps across interior joints (continuity check)."""
    n = len(path.segments)
    if n < 2:
        return np.zeros(0), np.zeros(0)
    dx, dy = _displacement(path._th0[:-1], path._k0[:-1], path._kr[:-1],
                           path._len[:-1])
    pos = np.hypot(path._x0[:-1] + dx - path._x0[1:],
                   path._y0[:-1] + dy - path._y0[1:])
    end_heading = (path._th0[:-1] + path._k0[:-1] * path._len[:-1]
                   + 0.5 * path._kr[:-1] * path._len[:-1] ** 2)
    ang = np.abs(_wrap(end_heading - path._th0[1:]))
    return pos, ang


def _colliding_segments(path: PiecewiseClothoid, grid: OccupancyGrid) -> np.ndarray:
    """Indices of segments with any occupied sample at half-resolution spacing."""
    total = path.total_length
    step = grid.resolution / 2.0
    n = max(2, int(math.ceil(total / step)) + 1)
    s = np.linspace(0.0, total, n)
    pts, _, _ = sample_many(path, s)
    free = free_mask(grid, pts)
    if free.all():
        return np.empty(0, dtype=int)
    idx, _ = path.locate(s)
    return np.unique(idx[~free])


def _drop_coincident(points: np.ndarray, indices: list[int]) -> list[int]:
    """Remove indices whose points coincide with the previous kept knot."""
    pts = points[indices]
    keep = np.empty(len(indices), dtype=bool)
    keep[0] = True
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return [idx for idx, k in zip(indices, keep) if k]


def refine_collision(path: PiecewiseClothoid, polyline: GridPath,
                     grid: OccupancyGrid) -> PiecewiseClothoid:
    """Subdivide colliding spans at the source-polyline midpoint until free.

    Each pass inserts the middle polyline index of every offending interval
    and rebuilds; intervals already at adjacent polyline indices cannot be
    subdivided further, so the loop terminates after at most one insertion
    per polyline point, converging to the collision-free polyline.
    """
    current = path
    indices = list(path.knot_indices) if path.knot_indices is not None else None
    while True:
        bad = _colliding_segments(current, grid)
        if bad.size == 0 or indices is None:
            return current
        chosen = set(indices)
        for k in bad:
            lo, hi = indices[k], indices[k + 1]
            if hi - lo >= 2:
                chosen.add((lo + hi) // 2)
        refined = _drop_coincident(polyline.points, sorted(chosen))
        if refined == indices:
            return current
        indices = refined
        current = build_path(polyline.points[indices],
                             knot_indices=tuple(indices))


def initial_knot_indices(polyline: GridPath, resolution: float,
                         knot_spacing: float = 0.5) -> list[int]:
    """Downsample a polyline to corner points plus a periodic fill.

    Waypoint junctions and endpoints are always kept so the smoothed path
    still interpolates every mission waypoint.
    """
    pts = polyline.points
    n = len(pts)
    keep = {0, n - 1}
    if polyline.junctions:
        keep.update(polyline.junctions)
    chords = np.diff(pts, axis=0)
    bearings = np.arctan2(chords[:, 1], chords[:, 0])
    turns = np.abs(_wrap(np.diff(bearings))) > 1e-9
    keep.update(np.where(turns)[0] + 1)
    gap = max(2, int(round(knot_spacing / resolution)))
    ordered = sorted(keep)
    for lo, hi in zip(ordered, ordered[1:]):
        if hi - lo > gap:
            extra = (hi - lo) // gap
            for j in range(1, extra + 1):
                keep.add(lo + round(j * (hi - lo) / (extra + 1)))
    return sorted(keep)


def smooth_polyline(polyline: GridPath, grid: OccupancyGrid,
                    knot_spacing: float = 0.5) -> PiecewiseClothoid:
    """Grid polyline to collision-free piecewise spiral (build + refine)."""
    indices = initial_knot_indices(polyline, grid.resolution, knot_spacing)
    indices = _drop_coincident(polyline.points, indices)
    path = build_path(polyline.points[indices], knot_indices=tuple(indices))
    return refine_collision(path, polyline, grid)


# --- time parameterization -------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Constant-speed sampling of a path, uniform in arc length."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    kappa: np.ndarray
    v: np.ndarray
    a_lat: np.ndarray
    t_f: float
    total_length: float

    def positions(self) -> np.ndarray:
        return np.column_stack((self.x, self.y))


def parameterize_time(path: PiecewiseClothoid, constraints: ConstraintSet,
                      sample_count: int | None = None,
                      cruise_factor: float = DEFAULT_CRUISE_FACTOR) -> Trajectory:
    """Allocate timestamps assuming one constant cruise speed.

    With a time window the least aggressive speed ``L / t_max`` is used; the
    window itself may then be violated only after clamping to ``v_max``.
    Without a window the cruise speed is ``cruise_factor * v_max``.  When the
    candidate falls below ``v_min`` the final time is reduced by a fixed
    factor until the speed is admissible, then clamped to ``v_min`` exactly.
    """
    L = path.total_length
    if L <= 0.0:
        raise ValueError("degenerate path of zero length")
    if constraints.v_min > constraints.v_max:
        raise InfeasibleSpeedBand(
            f"v_min {constraints.v_min:g} exceeds v_max {constraints.v_max:g}")
    if constraints.t_max is not None:
        v = L / constraints.t_max
        t_f = constraints.t_max  # exact: ride out the whole window
    else:
        v = cruise_factor * constraints.v_max
        t_f = L / v
    if constraints.v_min > 0.0 and v < constraints.v_min:
        t = L / v
        while L / t < constraints.v_min:
            t *= TIME_REDUCTION_FACTOR
        v = constraints.v_min
        t_f = L / v
    elif v > constraints.v_max:
        v = constraints.v_max
        t_f = L / v

    if sample_count is None:
        sample_count = max(100, int(math.ceil(L / DEFAULT_SAMPLE_SPACING)))
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    s = np.linspace(0.0, L, sample_count)
    pts, theta, kappa = sample_many(path, s)
    speed = np.full(sample_count, v)
    return Trajectory(t=np.linspace(0.0, t_f, sample_count), x=pts[:, 0],
                      y=pts[:, 1], theta=theta, kappa=kappa, v=speed,
                      a_lat=v * v * np.abs(kappa), t_f=t_f, total_length=L)


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV export: header t,x,y,theta,kappa,v,a_lat; 9 significant digits."""
    lines = ["t,x,y,theta,kappa,v,a_lat"]
    for row in zip(traj.t, traj.x, traj.y, traj.theta, traj.kappa,
                   traj.v, traj.a_lat):
        lines.append(",".join(f"{value:.9g}" for value in row))
    return "\n".join(lines) + "\n"
