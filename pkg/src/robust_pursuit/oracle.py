"""Independent brute-force contamination checker on a uniform grid.

Shares only the geometric primitives (visibility polygons, membership)
with the planner; contamination bookkeeping here is per-cell flood fill
over connected components of unseen cells, recomputed from scratch each
time step. Used to validate emitted solutions and edge influence
relations by a second route.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import shapely
from scipy import ndimage

from .geometry import Environment, Point, points_in_env, visibility_polygon

_EIGHT = np.ones((3, 3), dtype=bool)


class ContaminationGrid:
    """Uniform cell grid over the environment's bounding box.

    Contamination lives on cell centers inside the closed free space.
    One instance can run many simulations; visibility masks are memoized
    by exact viewpoint coordinates.
    """

    def __init__(self, env: Environment, resolution: int = 150):
        self.env = env
        self.resolution = resolution
        minx, miny, maxx, maxy = env.shape.bounds
        span = max(maxx - minx, maxy - miny)
        self.cell = span / resolution
        nx = max(2, int(round((maxx - minx) / self.cell)))
        ny = max(2, int(round((maxy - miny) / self.cell)))
        xs = minx + (np.arange(nx) + 0.5) * (maxx - minx) / nx
        ys = miny + (np.arange(ny) + 0.5) * (maxy - miny) / ny
        gx, gy = np.meshgrid(xs, ys)
        self.shape2d = gx.shape
        self.centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
        self.inside = points_in_env(env, self.centers).reshape(self.shape2d)
        self._vis_cache: dict[tuple[float, float], np.ndarray] = {}

    def cells_inside(self) -> int:
        return int(self.inside.sum())

    def visible_mask(self, p) -> np.ndarray:
        """Cells whose centers are visible from p (2D bool array)."""
        key = (float(p[0]), float(p[1]))
        got = self._vis_cache.get(key)
        if got is None:
            vis = visibility_polygon(self.env, Point(*key))
            got = vis.contains_points(self.centers, tol=self.env.epsilon).reshape(
                self.shape2d
            ) & self.inside
            self._vis_cache[key] = got
        return got

    def unseen_mask(self, positions: Sequence) -> np.ndarray:
        seen = np.zeros(self.shape2d, dtype=bool)
        for p in positions:
            seen |= self.visible_mask(p)
        return self.inside & ~seen

    def region_mask(self, region) -> np.ndarray:
        """Cells whose centers lie in a shapely region (closed test)."""
        hits = shapely.intersects_xy(region, self.centers[:, 0], self.centers[:, 1])
        return hits.reshape(self.shape2d) & self.inside

    def step(self, contam: np.ndarray, unseen_next: np.ndarray) -> np.ndarray:
        """Advance contamination one step.

        contam may be (R, C) or stacked (K, R, C) for K independent seed
        scenarios sharing the same motion. A cell is contaminated after
        the step iff its unseen component contains a surviving seed: a
        previously contaminated cell still unseen, or an unseen 8-neighbor
        of a previously contaminated cell that just became seen (the
        evader escapes sideways as the gap closes).
        """
        single = contam.ndim == 2
        stack = contam[None, :, :] if single else contam
        labels, nlab = ndimage.label(unseen_next, structure=_EIGHT)
        out = np.zeros_like(stack)
        for k in range(len(stack)):
            c = stack[k]
            seeds = c & unseen_next
            lost = c & ~unseen_next
            if lost.any():
                seeds |= ndimage.binary_dilation(lost, structure=_EIGHT) & unseen_next
            if nlab and seeds.any():
                ids = np.unique(labels[seeds])
                ids = ids[ids > 0]
                if len(ids):
                    out[k] = np.isin(labels, ids)
        return out[0] if single else out

    def simulate_edge(
        self,
        from_positions: Sequence,
        to_positions: Sequence,
        contam: np.ndarray,
        steps: int = 100,
    ) -> np.ndarray:
        """Step contamination along a straight-line joint motion."""
        a = np.asarray([[p[0], p[1]] for p in from_positions], dtype=float)
        b = np.asarray([[p[0], p[1]] for p in to_positions], dtype=float)
        for j in range(1, steps + 1):
            t = j / steps
            pos = a + t * (b - a)
            contam = self.step(contam, self.unseen_mask(pos))
        return contam


@dataclass(frozen=True)
class CheckReport:
    """Per-exclusion verdicts of the independent robustness check."""

    n: int
    verdicts: tuple[bool, ...]
    contaminated_cells: tuple[int, ...]
    resolution: int
    steps_per_edge: int

    @property
    def passed(self) -> bool:
        return all(self.verdicts)

    def failing_exclusions(self) -> tuple[int, ...]:
        return tuple(i for i, ok in enumerate(self.verdicts) if not ok)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "passed": self.passed,
            "verdicts": list(self.verdicts),
            "contaminated_cells": list(self.contaminated_cells),
            "resolution": self.resolution,
            "steps_per_edge": self.steps_per_edge,
        }


def _waypoint_positions(solution) -> list[list[Point]]:
    waypoints = getattr(solution, "waypoints", solution)
    out = []
    for w in waypoints:
        positions = getattr(w, "positions", w)
        out.append([Point(float(p[0]), float(p[1])) for p in positions])
    return out


def check_solution(
    env: Environment,
    solution,
    k: int = 1,
    *,
    resolution: int = 150,
    steps_per_edge: int = 100,
    grid: ContaminationGrid | None = None,
) -> CheckReport:
    """Replay a solution with each single pursuer removed, on the grid.

    For every excluded pursuer index i the remaining team's waypoint path
    is simulated from an all-contaminated start; the verdict for i is True
    iff no contaminated cell survives. Failures are verdicts, not errors.
    Only single-failure robustness (k = 1) is supported.
    """
    if k != 1:
        raise ValueError(f"only k = 1 is supported, got k = {k}")
    path = _waypoint_positions(solution)
    if not path:
        raise ValueError("solution has no waypoints")
    n = len(path[0])
    if any(len(w) != n for w in path):
        raise ValueError("waypoints have inconsistent pursuer counts")
    if grid is None:
        grid = ContaminationGrid(env, resolution=resolution)
    verdicts = []
    cells = []
    for i in range(n):
        team = [[p for j, p in enumerate(w) if j != i] for w in path]
        contam = grid.unseen_mask(team[0])
        for a, b in zip(team, team[1:]):
            contam = grid.simulate_edge(a, b, contam, steps=steps_per_edge)
        verdicts.append(not bool(contam.any()))
        cells.append(int(contam.sum()))
    return CheckReport(
        n=n,
        verdicts=tuple(verdicts),
        contaminated_cells=tuple(cells),
        resolution=grid.resolution,
        steps_per_edge=steps_per_edge,
    )


def influence_matrix(
    env: Environment,
    from_points: Sequence,
    to_points: Sequence,
    src_regions: Sequence,
    dst_regions: Sequence,
    *,
    resolution: int = 150,
    steps: int = 100,
    min_cells: int = 3,
    grid: ContaminationGrid | None = None,
):
    """Flood-fill influence matrix between given source/destination regions.

    Seeds each source region separately (all simulations share the same
    stepped motion) and reports which destination regions end up holding
    contamination. Returns (matrix, src_resolvable, dst_resolvable) where
    the resolvable masks flag regions represented by >= min_cells cells.
    """
    if grid is None:
        grid = ContaminationGrid(env, resolution=resolution)
    unseen0 = grid.unseen_mask(list(from_points))
    seeds = []
    src_ok = []
    for region in src_regions:
        m = grid.region_mask(region) & unseen0
        seeds.append(m)
        src_ok.append(int(m.sum()) >= min_cells)
    stack = np.stack(seeds) if seeds else np.zeros((0,) + grid.shape2d, dtype=bool)
    stack = grid.simulate_edge(from_points, to_points, stack, steps=steps)
    unseen1 = grid.unseen_mask(list(to_points))
    matrix = np.zeros((len(src_regions), len(dst_regions)), dtype=bool)
    dst_ok = []
    for j, region in enumerate(dst_regions):
        m = grid.region_mask(region) & unseen1
        dst_ok.append(int(m.sum()) >= min_cells)
        for i in range(len(src_regions)):
            matrix[i, j] = bool((stack[i] & m).any())
    return matrix, np.asarray(src_ok, dtype=bool), np.asarray(dst_ok, dtype=bool)
