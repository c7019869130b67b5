"""Obstacle-free shortest paths between waypoints on the occupancy grid.

A* runs on the 8-connected cell graph with unit/diagonal step costs and an
octile heuristic.  Diagonal moves may not cut corners: both cardinal
neighbors of a diagonal step must be free.  Pairwise waypoint queries are
memoized for the lifetime of a solver run because the evolutionary search
re-evaluates the same pairs thousands of times.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass

import numpy as np

from .scenario import OccupancyGrid, Scenario, is_free

SQRT2 = math.sqrt(2.0)


class NoPath(RuntimeError):
    """Goal is unreachable from the start on the free cells."""


class InvalidEndpoint(ValueError):
    """Start or goal lies in an occupied or out-of-bounds cell."""


@dataclass(frozen=True)
class GridPath:
    """Piecewise-linear path; ``junctions`` marks waypoint indices within
    ``points`` when the path was concatenated over a waypoint sequence."""

    points: np.ndarray  # (n, 2)
    length: float
    junctions: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        self.points.setflags(write=False)


def _polyline_length(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(points, axis=0).T)))


def _heuristic(ix: int, iy: int, gx: int, gy: int, res: float) -> float:
    dx = abs(ix - gx)
    dy = abs(iy - gy)
    return res * (max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy))


def astar(grid: OccupancyGrid, start: tuple[float, float],
          goal: tuple[float, float]) -> GridPath:
    """Minimal-cost 8-connected path between two free points.

    Interior path points are cell centers; the continuous start and goal
    coordinates are re-substituted at the endpoints.  Ties between equal
    f-scores prefer the lower heuristic, then the lower cell index, which
    makes the result deterministic.
    """
    sx, sy = float(start[0]), float(start[1])
    gx, gy = float(goal[0]), float(goal[1])
    if not is_free(grid, sx, sy):
        raise InvalidEndpoint(f"start ({sx:g}, {sy:g}) is not in free space")
    if not is_free(grid, gx, gy):
        raise InvalidEndpoint(f"goal ({gx:g}, {gy:g}) is not in free space")
    if sx == gx and sy == gy:
        return GridPath(np.array([[sx, sy]]), 0.0)
    six, siy = grid.cell_of(sx, sy)
    gix, giy = grid.cell_of(gx, gy)
    if (six, siy) == (gix, giy):
        pts = np.array([[sx, sy], [gx, gy]])
        return GridPath(pts, _polyline_length(pts))

    W, H = grid.width, grid.height
    occ = grid.cells
    res = grid.resolution
    start_idx = siy * W + six
    goal_idx = giy * W + gix
    g_score = np.full(W * H, np.inf)
    g_score[start_idx] = 0.0
    pred = np.full(W * H, -1, dtype=np.int64)
    closed = np.zeros(W * H, dtype=bool)
    h0 = _heuristic(six, siy, gix, giy, res)
    heap: list[tuple[float, float, int]] = [(h0, h0, start_idx)]

    while heap:
        f, _, idx = heapq.heappop(heap)
        if closed[idx]:
            continue
        if idx == goal_idx:
            break
        closed[idx] = True
        iy, ix = divmod(idx, W)
        g_here = g_score[idx]
        for dx, dy, step in ((1, 0, res), (-1, 0, res), (0, 1, res), (0, -1, res),
                             (1, 1, SQRT2 * res), (1, -1, SQRT2 * res),
                             (-1, 1, SQRT2 * res), (-1, -1, SQRT2 * res)):
            nx, ny = ix + dx, iy + dy
            if nx < 0 or ny < 0 or nx >= W or ny >= H or occ[ny, nx]:
                continue
            if dx and dy and (occ[iy, nx] or occ[ny, ix]):
                continue  # no corner cutting
            nidx = ny * W + nx
            tentative = g_here + step
            if tentative < g_score[nidx]:
                g_score[nidx] = tentative
                pred[nidx] = idx
                hn = _heuristic(nx, ny, gix, giy, res)
                heapq.heappush(heap, (tentative + hn, hn, nidx))
    else:
        raise NoPath(f"goal ({gx:g}, {gy:g}) unreachable from ({sx:g}, {sy:g})")

    cells = [goal_idx]
    while cells[-1] != start_idx:
        cells.append(int(pred[cells[-1]]))
    cells.reverse()
    pts = np.empty((len(cells), 2))
    iys, ixs = np.divmod(np.array(cells), W)
    pts[:, 0] = grid.origin_x + (ixs + 0.5) * res
    pts[:, 1] = grid.origin_y + (iys + 0.5) * res
    pts[0] = (sx, sy)
    pts[-1] = (gx, gy)
    return GridPath(pts, _polyline_length(pts))


SNAP_RADIUS_CELLS = 2


def snap_to_free(grid: OccupancyGrid, point: tuple[float, float],
                 max_radius: int = SNAP_RADIUS_CELLS) -> tuple[float, float]:
    """Nearest free cell center when the point's own cell is occupied.

    Searches outward ring by ring up to ``max_radius`` cells; among equally
    near candidates the lowest cell index wins.  The bound keeps cell
    rounding artifacts harmless while points buried deep inside obstacles
    still raise :class:`InvalidEndpoint`.
    """
    px, py = float(point[0]), float(point[1])
    if is_free(grid, px, py):
        return px, py
    ix, iy = grid.cell_of(px, py)
    ix = min(max(ix, 0), grid.width - 1)
    iy = min(max(iy, 0), grid.height - 1)
    best: tuple[float, int, int] | None = None
    for radius in range(1, max_radius + 1):
        lo_x, hi_x = ix - radius, ix + radius
        lo_y, hi_y = iy - radius, iy + radius
        ring = []
        for cx in range(lo_x, hi_x + 1):
            ring.extend(((cx, lo_y), (cx, hi_y)))
        for cy in range(lo_y + 1, hi_y):
            ring.extend(((lo_x, cy), (hi_x, cy)))
        for cx, cy in ring:
            if cx < 0 or cy < 0 or cx >= grid.width or cy >= grid.height:
                continue
            if grid.cells[cy, cx]:
                continue
            wx, wy = grid.center(cx, cy)
            d = math.hypot(wx - px, wy - py)
            key = (d, cy * grid.width + cx)
            if best is None or key < (best[0], best[2] * grid.width + best[1]):
                best = (d, cx, cy)
        if best is not None and best[0] <= radius * grid.resolution:
            return grid.center(best[1], best[2])
    if best is not None:
        return grid.center(best[1], best[2])
    raise InvalidEndpoint(f"point ({px:g}, {py:g}) has no free cell within "
                          f"{max_radius} cells")


class PairwiseCache:
    """Memo for pairwise A* queries, keyed by the unordered waypoint id pair.

    The grid graph is undirected, so one stored direction serves both;
    reads are lock-free, insertion is serialized.
    """

    def __init__(self) -> None:
        self._paths: dict[tuple[int, int], GridPath] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._paths)

    def pair_path(self, grid: OccupancyGrid, scenario: Scenario,
                  a: int, b: int) -> GridPath:
        key = (a, b) if a <= b else (b, a)
        path = self._paths.get(key)
        if path is None:
            path = _waypoint_astar(grid, scenario, key[0], key[1])
            with self._lock:
                self._paths.setdefault(key, path)
            path = self._paths[key]
        if a <= b:
            return path
        return GridPath(np.ascontiguousarray(path.points[::-1]), path.length)


def _waypoint_astar(grid: OccupancyGrid, scenario: Scenario,
                    a: int, b: int) -> GridPath:
    pa = tuple(scenario.position(a))
    pb = tuple(scenario.position(b))
    sa = snap_to_free(grid, pa)
    sb = snap_to_free(grid, pb)
    path = astar(grid, sa, sb)
    pts = np.array(path.points)
    pts[0] = pa
    pts[-1] = pb
    return GridPath(pts, _polyline_length(pts))


def polyline_for_sequence(grid: OccupancyGrid, seq, scenario: Scenario,
                          cache: PairwiseCache | None = None) -> GridPath:
    """Concatenate pairwise A* paths over consecutive sequence waypoints.

    Duplicate junction points are dropped; ``junctions`` gives the index of
    each sequence waypoint within the concatenated polyline.  Raises
    :class:`NoPath` naming the failing pair.
    """
    ids = tuple(seq.indices) if hasattr(seq, "indices") else tuple(seq)
    if not ids:
        raise ValueError("empty waypoint sequence")
    if len(ids) == 1:
        pt = scenario.position(ids[0])[None, :]
        return GridPath(np.array(pt), 0.0, junctions=(0,))
    if cache is None:
        cache = PairwiseCache()
    chunks: list[np.ndarray] = []
    junctions = [0]
    count = 1
    first = scenario.position(ids[0])[None, :]
    chunks.append(first)
    for a, b in zip(ids, ids[1:]):
        try:
            part = cache.pair_path(grid, scenario, a, b)
        except (NoPath, InvalidEndpoint) as exc:
            raise NoPath(f"no path between waypoints {a} and {b}: {exc}") from exc
        tail = part.points[1:]
        chunks.append(tail)
        count += len(tail)
        junctions.append(count - 1)
    points = np.vstack(chunks)
    return GridPath(points, _polyline_length(points), junctions=tuple(junctions))
