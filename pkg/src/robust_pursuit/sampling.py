"""Web construction and joint configuration sampling streams.

A web is a small set of viewpoints whose visibility polygons jointly
cover the free space: uniform random points rejected against previous
coverage, plus one point per pairwise visibility overlap region. A
depth-first walk over the web's mutual-visibility graph yields the
cyclic vertex sequence that the walk-window stream places robots on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import shapely

from .geometry import (
    Environment,
    Point,
    VisPolygon,
    points_in_env,
    segments_in_env,
    visibility_polygon,
)
from .rspeg import Jpc


class CoverageStall(RuntimeError):
    """Rejection sampling failed to find an uncovered point."""


class DisconnectedWeb(RuntimeError):
    """The web's mutual-visibility graph is not connected."""


@dataclass(frozen=True)
class Web:
    """Coverage points P and pairwise-overlap points Q, in build order."""

    initial_points: tuple[Point, ...]
    intersection_points: tuple[Point, ...]

    @property
    def points(self) -> tuple[Point, ...]:
        return self.initial_points + self.intersection_points

    def __len__(self) -> int:
        return len(self.initial_points) + len(self.intersection_points)


@dataclass(frozen=True)
class VisibilityGraph:
    """Mutual-visibility adjacency over web points (undirected)."""

    points: tuple[Point, ...]
    adjacency: tuple[tuple[int, ...], ...]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])


@dataclass(frozen=True)
class WalkD:
    """Depth-first walk: vertex appended on discovery and on each backtrack
    into it, with the final re-append of the root omitted."""

    indices: tuple[int, ...]
    points: tuple[Point, ...]   # the walked web's vertex coordinates

    @property
    def d(self) -> int:
        return len(self.indices)

    def position(self, k: int) -> Point:
        return self.points[self.indices[k % self.d]]


def _triangulate(region) -> tuple[list, np.ndarray]:
    tris = [
        t
        for t in shapely.get_parts(shapely.constrained_delaunay_triangles(region))
        if t.area > 0
    ]
    # constrained triangulation can cover concavities; clip to the region
    kept = []
    for t in tris:
        c = t.representative_point()
        if region.covers(c):
            kept.append(t)
    if not kept:
        kept = tris
    areas = np.asarray([t.area for t in kept])
    return kept, areas


def uniform_point_in(region, rng: np.random.Generator) -> Point:
    """Uniform sample from a polygonal region via triangulation."""
    tris, areas = _triangulate(region)
    cum = np.cumsum(areas)
    pick = np.searchsorted(cum, rng.random() * cum[-1], side="right")
    pick = min(pick, len(tris) - 1)
    coords = np.asarray(tris[pick].exterior.coords)[:3]
    r1, r2 = rng.random(), rng.random()
    s = math.sqrt(r1)
    p = (1 - s) * coords[0] + s * (1 - r2) * coords[1] + s * r2 * coords[2]
    return Point(float(p[0]), float(p[1]))


def _coverage_targets(env: Environment, grid: int) -> np.ndarray:
    minx, miny, maxx, maxy = env.shape.bounds
    xs = minx + (np.arange(grid) + 0.5) * (maxx - minx) / grid
    ys = miny + (np.arange(grid) + 0.5) * (maxy - miny) / grid
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return pts[points_in_env(env, pts, margin=env.epsilon)]


def build_web(
    env: Environment,
    rng: np.random.Generator,
    *,
    coverage_grid: int = 200,
    max_rejections: int = 10000,
    sparse: bool = True,
) -> Web:
    """Build a web; ``sparse=False`` keeps duplicate overlap points.

    The non-sparse variant (one Q point per overlapping pair even when an
    earlier Q point already lies in the region) exists as a comparison
    baseline only; the planner always uses the sparse form.
    """
    targets = _coverage_targets(env, coverage_grid)
    covered = np.zeros(len(targets), dtype=bool)
    initial: list[Point] = []
    vis: list[VisPolygon] = []
    while not covered.all():
        for _ in range(max_rejections):
            p = uniform_point_in(env.shape, rng)
            if not any(v.contains_point(p, tol=env.epsilon) for v in vis):
                break
        else:
            raise CoverageStall(
                f"{max_rejections} consecutive samples landed in covered space"
                f" with {int((~covered).sum())} grid targets still uncovered"
            )
        vp = visibility_polygon(env, p)
        initial.append(vp.viewpoint)
        vis.append(vp)
        covered |= vp.contains_points(targets, tol=env.epsilon)

    inter: list[Point] = []
    for i in range(len(vis)):
        for j in range(i + 1, len(vis)):
            region = vis[i].shape.intersection(vis[j].shape)
            region = shapely.union_all(
                [g for g in shapely.get_parts(region) if g.area > env.area_epsilon]
            ) if not region.is_empty else region
            if region.is_empty or region.area <= env.area_epsilon:
                continue
            if sparse and any(
                shapely.intersects_xy(region, q.x, q.y) for q in inter
            ):
                continue
            inter.append(uniform_point_in(region, rng))
    return Web(initial_points=tuple(initial), intersection_points=tuple(inter))


def build_sparse_web(
    env: Environment,
    rng: np.random.Generator | int,
    *,
    coverage_grid: int = 200,
    max_rejections: int = 10000,
) -> Web:
    """Sparse web: coverage points plus deduplicated pairwise-overlap points."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    return build_web(
        env, rng, coverage_grid=coverage_grid, max_rejections=max_rejections, sparse=True
    )


def build_visibility_graph(env: Environment, web: Web) -> VisibilityGraph:
    """Mutual-visibility graph over all web points; raises if disconnected."""
    pts = web.points
    m = len(pts)
    adj: list[list[int]] = [[] for _ in range(m)]
    if m > 1:
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        a = np.asarray([pts[i] for i, _ in pairs], dtype=float)
        b = np.asarray([pts[j] for _, j in pairs], dtype=float)
        ok = segments_in_env(env, a, b)
        for (i, j), good in zip(pairs, ok):
            if good:
                adj[i].append(j)
                adj[j].append(i)
    for row in adj:
        row.sort()
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    if len(seen) != m:
        missing = sorted(set(range(m)) - seen)
        raise DisconnectedWeb(f"web vertices unreachable from vertex 0: {missing}")
    return VisibilityGraph(points=pts, adjacency=tuple(tuple(r) for r in adj))


def dfs_walk(graph: VisibilityGraph, root: int = 0) -> WalkD:
    """Depth-first closed walk from the root, neighbors in ascending order."""
    order = [root]
    visited = {root}
    stack = [(root, iter(graph.adjacency[root]))]
    while stack:
        v, it = stack[-1]
        advanced = False
        for u in it:
            if u not in visited:
                visited.add(u)
                order.append(u)
                stack.append((u, iter(graph.adjacency[u])))
                advanced = True
                break
        if not advanced:
            stack.pop()
            if stack:
                order.append(stack[-1][0])
    if len(order) > 1 and order[-1] == root:
        order.pop()
    return WalkD(indices=tuple(order), points=graph.points)


def rcs_stream(walk: WalkD, n: int) -> Iterator[Jpc]:
    """Walk-window stream: robots spread at ceil(d/n) spacing, then the
    whole formation shifts one walk slot per sample for ceil(2d/n) steps,
    so every walk slot is visited by at least two robots."""
    if n < 2:
        raise ValueError(f"need at least 2 robots, got {n}")
    d = walk.d
    s = math.ceil(d / n)
    yield Jpc(tuple(walk.position(i * s) for i in range(n)))
    for k in range(1, math.ceil(2 * d / n) + 1):
        yield Jpc(tuple(walk.position(i * s + k) for i in range(n)))


def rcs_stream_length(d: int, n: int) -> int:
    return 1 + math.ceil(2 * d / n)


def ws_stream(web: Web, n: int, rng: np.random.Generator | int) -> Iterator[Jpc]:
    """Baseline stream: every sample is n independent uniform draws from
    the web's vertex set (with replacement). Infinite."""
    if n < 2:
        raise ValueError(f"need at least 2 robots, got {n}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    pts = web.points
    while True:
        picks = rng.integers(0, len(pts), size=n)
        yield Jpc(tuple(pts[int(i)] for i in picks))
