"""Polygonal free space: validation, tolerance predicates, visibility, shadows.

The free space F is a closed polygon with polygonal holes. All membership
predicates use closed-set semantics with an absolute tolerance ``epsilon``:
points within epsilon of the boundary count as inside, segments may graze
reflex corners and slide along walls. Every operation here is deterministic
for identical inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon as _ShapelyPolygon


class GeometryError(ValueError):
    """Base class for environment validation and geometric query errors."""


class SelfIntersecting(GeometryError):
    pass


class HoleOutsideOuter(GeometryError):
    pass


class OverlappingHoles(GeometryError):
    pass


class DegenerateEdge(GeometryError):
    pass


class ViewpointOutside(GeometryError):
    pass


class PointOutside(GeometryError):
    pass


class Point(NamedTuple):
    x: float
    y: float


def _as_points(ring: Sequence) -> tuple[Point, ...]:
    pts = [Point(float(p[0]), float(p[1])) for p in ring]
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    return tuple(pts)


def _ring_area(pts: Sequence[Point]) -> float:
    # shoelace, positive for counterclockwise
    a = 0.0
    for i in range(len(pts)):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % len(pts)]
        a += x1 * y2 - x2 * y1
    return 0.5 * a


@dataclass(frozen=True, eq=False)
class Environment:
    """Validated free space. Immutable; safe to share across threads.

    ``outer`` is stored counterclockwise, ``holes`` clockwise. Construct via
    :func:`validate_environment` or :func:`load_environment`.
    """

    outer: tuple[Point, ...]
    holes: tuple[tuple[Point, ...], ...]
    epsilon: float
    diameter: float
    shape: _ShapelyPolygon = field(repr=False)
    edge_starts: np.ndarray = field(repr=False)   # (E, 2)
    edge_ends: np.ndarray = field(repr=False)     # (E, 2)
    vertices: np.ndarray = field(repr=False)      # (V, 2), all rings concatenated

    @property
    def area(self) -> float:
        return self.shape.area

    @property
    def area_epsilon(self) -> float:
        """Area tolerance for sliver filtering: epsilon times the diameter."""
        return self.epsilon * self.diameter

    def to_dict(self) -> dict:
        return {
            "outer": [[p.x, p.y] for p in self.outer],
            "holes": [[[p.x, p.y] for p in ring] for ring in self.holes],
            "epsilon": self.epsilon,
        }


def _ring_edges(pts: Sequence[Point]) -> list[tuple[Point, Point]]:
    return [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]


def _check_ring_simple(ring: tuple[Point, ...], name: str, eps: float) -> None:
    edges = _ring_edges(ring)
    m = len(edges)
    for i in range(m):
        a1, a2 = edges[i]
        for j in range(i + 1, m):
            adjacent = j == i + 1 or (i == 0 and j == m - 1)
            if adjacent:
                continue
            b1, b2 = edges[j]
            if _segments_cross(a1, a2, b1, b2, eps):
                raise SelfIntersecting(
                    f"{name}: edge {i} ({a1}-{a2}) intersects edge {j} ({b1}-{b2})"
                )


def _segments_cross(a1, a2, b1, b2, eps) -> bool:
    d1 = (a2.x - a1.x, a2.y - a1.y)
    d2 = (b2.x - b1.x, b2.y - b1.y)
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    w = (b1.x - a1.x, b1.y - a1.y)
    if abs(denom) < 1e-14 * max(1.0, abs(d1[0]) + abs(d1[1])) * max(1.0, abs(d2[0]) + abs(d2[1])):
        # parallel: cross only if collinear and overlapping beyond endpoints
        cross_w = w[0] * d1[1] - w[1] * d1[0]
        len1 = math.hypot(*d1)
        if len1 == 0 or abs(cross_w) / len1 > eps:
            return False
        t0 = (w[0] * d1[0] + w[1] * d1[1]) / (len1 * len1)
        t1 = t0 + (d2[0] * d1[0] + d2[1] * d1[1]) / (len1 * len1)
        lo, hi = min(t0, t1), max(t0, t1)
        ov = min(hi, 1.0) - max(lo, 0.0)
        return ov * len1 > eps
    t = (w[0] * d2[1] - w[1] * d2[0]) / denom
    u = (w[0] * d1[1] - w[1] * d1[0]) / denom
    margin = 1e-12
    return margin < t < 1 - margin and margin < u < 1 - margin


def validate_environment(
    outer: Sequence,
    holes: Iterable[Sequence] = (),
    epsilon: float | None = None,
) -> Environment:
    """Validate raw ring coordinates and build an immutable environment.

    Raises a specific :class:`GeometryError` subclass naming the offending
    ring/vertex/edge on failure. The outer ring is normalized counterclockwise
    and holes clockwise regardless of input orientation.
    """
    outer_pts = _as_points(outer)
    hole_pts = [_as_points(h) for h in holes]
    for name, ring in [("outer", outer_pts)] + [
        (f"hole {k}", h) for k, h in enumerate(hole_pts)
    ]:
        if len(ring) < 3:
            raise DegenerateEdge(f"{name}: ring needs at least 3 vertices, got {len(ring)}")
        for p in ring:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise DegenerateEdge(f"{name}: non-finite vertex {p}")

    xs = [p.x for p in outer_pts]
    ys = [p.y for p in outer_pts]
    diameter = math.hypot(max(xs) - min(xs), max(ys) - min(ys))
    if diameter <= 0:
        raise DegenerateEdge("outer ring has zero extent")
    eps = float(epsilon) if epsilon is not None else 1e-9 * diameter
    if eps <= 0 or not math.isfinite(eps):
        raise DegenerateEdge(f"epsilon must be positive and finite, got {eps}")

    # orientation normalization
    if _ring_area(outer_pts) < 0:
        outer_pts = tuple(reversed(outer_pts))
    hole_pts = [tuple(reversed(h)) if _ring_area(h) > 0 else h for h in hole_pts]

    rings = [("outer", outer_pts)] + [(f"hole {k}", h) for k, h in enumerate(hole_pts)]

    for name, ring in rings:
        for i in range(len(ring)):
            a, b = ring[i], ring[(i + 1) % len(ring)]
            if math.hypot(b.x - a.x, b.y - a.y) <= eps:
                raise DegenerateEdge(f"{name}: vertices {i} and {(i + 1) % len(ring)} closer than epsilon")
        _check_ring_simple(ring, name, eps)

    # pairwise vertex separation and vertex-to-nonincident-edge clearance
    all_named = [(name, i, p) for name, ring in rings for i, p in enumerate(ring)]
    for a in range(len(all_named)):
        na, ia, pa = all_named[a]
        for b in range(a + 1, len(all_named)):
            nb, ib, pb = all_named[b]
            if math.hypot(pb.x - pa.x, pb.y - pa.y) <= eps:
                raise DegenerateEdge(
                    f"vertices {na}[{ia}] and {nb}[{ib}] closer than epsilon"
                )
    for name, ring in rings:
        for i, (e1, e2) in enumerate(_ring_edges(ring)):
            for vn, vi, p in all_named:
                if vn == name and vi in (i, (i + 1) % len(ring)):
                    continue
                if _point_seg_dist(p, e1, e2) <= eps:
                    raise DegenerateEdge(
                        f"vertex {vn}[{vi}] within epsilon of edge {name}[{i}]"
                    )

    outer_poly = _ShapelyPolygon(outer_pts)
    hole_polys = [_ShapelyPolygon(h) for h in hole_pts]
    for k, hp in enumerate(hole_polys):
        if not outer_poly.contains(hp):
            raise HoleOutsideOuter(f"hole {k} is not strictly inside the outer ring")
    for a in range(len(hole_polys)):
        for b in range(a + 1, len(hole_polys)):
            if hole_polys[a].intersects(hole_polys[b]):
                raise OverlappingHoles(f"holes {a} and {b} intersect")

    shape = _ShapelyPolygon(outer_pts, hole_pts)
    if not shape.is_valid:
        raise SelfIntersecting(f"environment polygon invalid: {shapely.is_valid_reason(shape)}")

    ring_list = [outer_pts] + hole_pts
    starts, ends, verts = [], [], []
    for ring in ring_list:
        for i in range(len(ring)):
            starts.append(ring[i])
            ends.append(ring[(i + 1) % len(ring)])
        verts.extend(ring)
    return Environment(
        outer=outer_pts,
        holes=tuple(hole_pts),
        epsilon=eps,
        diameter=diameter,
        shape=shape,
        edge_starts=np.asarray(starts, dtype=float),
        edge_ends=np.asarray(ends, dtype=float),
        vertices=np.asarray(verts, dtype=float),
    )


def load_environment(source: str | Path | dict) -> Environment:
    """Load an environment from a JSON file or an already-parsed dict.

    Format: ``{"outer": [[x,y],...], "holes": [[[x,y],...],...], "epsilon": eps?}``
    where holes and epsilon are optional.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            raw = json.load(fh)
    else:
        raw = source
    if not isinstance(raw, dict) or "outer" not in raw:
        raise GeometryError("environment JSON must be an object with an 'outer' ring")
    return validate_environment(
        raw["outer"], raw.get("holes", ()), raw.get("epsilon")
    )


def _point_seg_dist(p: Point, a: Point, b: Point) -> float:
    ab = (b.x - a.x, b.y - a.y)
    ap = (p.x - a.x, p.y - a.y)
    denom = ab[0] * ab[0] + ab[1] * ab[1]
    t = 0.0 if denom == 0 else max(0.0, min(1.0, (ap[0] * ab[0] + ap[1] * ab[1]) / denom))
    dx = p.x - (a.x + t * ab[0])
    dy = p.y - (a.y + t * ab[1])
    return math.hypot(dx, dy)


# ---------------------------------------------------------------------------
# membership kernels


def _boundary_dist_sq(env: Environment, pts: np.ndarray) -> np.ndarray:
    """Squared distance from each point (M,2) to the nearest boundary edge."""
    a = env.edge_starts[None, :, :]          # (1,E,2)
    ab = (env.edge_ends - env.edge_starts)[None, :, :]
    ap = pts[:, None, :] - a                 # (M,E,2)
    denom = np.einsum("mej,mej->me", ab, ab)
    t = np.einsum("mej,mej->me", ap, ab) / np.where(denom == 0, 1.0, denom)
    np.clip(t, 0.0, 1.0, out=t)
    d = ap - t[:, :, None] * ab
    return np.einsum("mej,mej->me", d, d).min(axis=1)


def points_in_env(env: Environment, pts: np.ndarray, *, margin: float = 0.0) -> np.ndarray:
    """Vectorized closed-set membership for an (M, 2) array of points.

    ``margin > 0`` demands that much clearance from the boundary instead
    (epsilon-interior queries); ``margin = 0`` gives the default semantics
    where points within epsilon of the boundary count as inside.
    """
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    out = np.empty(len(pts), dtype=bool)
    for lo in range(0, len(pts), 16384):
        chunk = pts[lo: lo + 16384]
        x = chunk[:, 0:1]
        y = chunk[:, 1:2]
        ax = env.edge_starts[None, :, 0]
        ay = env.edge_starts[None, :, 1]
        bx = env.edge_ends[None, :, 0]
        by = env.edge_ends[None, :, 1]
        straddles = (ay <= y) != (by <= y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = ax + (y - ay) * (bx - ax) / (by - ay)
        crossings = straddles & (x < xi)
        inside = crossings.sum(axis=1) % 2 == 1
        dist_sq = _boundary_dist_sq(env, chunk)
        if margin > 0.0:
            res = inside & (dist_sq > margin * margin)
        else:
            res = inside | (dist_sq <= env.epsilon * env.epsilon)
        out[lo: lo + 16384] = res
    return out


def contains_point(env: Environment, p) -> bool:
    """True iff p lies in the closed free space (within epsilon of it)."""
    return bool(points_in_env(env, np.asarray([[p[0], p[1]]], dtype=float))[0])


def segments_in_env(env: Environment, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized closed-set segment containment for (M,2) endpoint arrays.

    A segment is contained iff every point of it lies in the closed free
    space; grazing a reflex corner or sliding along a wall counts as inside.
    Splits each segment at boundary crossings and near-boundary vertex
    projections, then tests the midpoint of every piece.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    m = len(a)
    result = np.zeros(m, dtype=bool)
    ok = points_in_env(env, a) & points_in_env(env, b)
    if not ok.any():
        return result
    idx = np.nonzero(ok)[0]
    for lo in range(0, len(idx), 4096):
        sel = idx[lo: lo + 4096]
        result[sel] = _segments_in_env_chunk(env, a[sel], b[sel])
    return result


def _segments_in_env_chunk(env: Environment, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    eps = env.epsilon
    m = len(a)
    d = b - a                                     # (M,2)
    seg_len = np.hypot(d[:, 0], d[:, 1])
    g1 = env.edge_starts                          # (E,2)
    g = env.edge_ends - env.edge_starts           # (E,2)
    edge_len = np.hypot(g[:, 0], g[:, 1])

    wx = g1[None, :, 0] - a[:, 0:1]
    wy = g1[None, :, 1] - a[:, 1:2]
    denom = d[:, 0:1] * g[None, :, 1] - d[:, 1:2] * g[None, :, 0]
    parallel = np.abs(denom) <= 1e-14 * np.maximum(seg_len[:, None] * edge_len[None, :], 1.0)
    safe = np.where(parallel, 1.0, denom)
    t = (wx * g[None, :, 1] - wy * g[None, :, 0]) / safe
    u = (wx * d[:, 1:2] - wy * d[:, 0:1]) / safe
    tol_t = eps / np.maximum(seg_len[:, None], eps)
    tol_u = eps / np.maximum(edge_len[None, :], eps)
    hit = (~parallel) & (t >= -tol_t) & (t <= 1 + tol_t) & (u >= -tol_u) & (u <= 1 + tol_u)
    t_hits = np.where(hit, np.clip(t, 0.0, 1.0), 1.0)

    # params where the segment passes within eps of an environment vertex
    v = env.vertices                              # (V,2)
    denom_len = np.maximum(seg_len * seg_len, eps * eps)
    tv = ((v[None, :, 0] - a[:, 0:1]) * d[:, 0:1] + (v[None, :, 1] - a[:, 1:2]) * d[:, 1:2]) / denom_len[:, None]
    np.clip(tv, 0.0, 1.0, out=tv)
    px = a[:, 0:1] + tv * d[:, 0:1]
    py = a[:, 1:2] + tv * d[:, 1:2]
    near = (px - v[None, :, 0]) ** 2 + (py - v[None, :, 1]) ** 2 <= eps * eps
    tv_hits = np.where(near, tv, 1.0)

    any_hit = hit.any(axis=1)
    out = np.ones(m, dtype=bool)
    rows = np.nonzero(any_hit)[0]
    if len(rows) == 0:
        return out
    ts = np.concatenate(
        [np.zeros((len(rows), 1)), t_hits[rows], tv_hits[rows], np.ones((len(rows), 1))],
        axis=1,
    )
    ts.sort(axis=1)
    mids_t = 0.5 * (ts[:, :-1] + ts[:, 1:])       # (R,K)
    mids = a[rows, None, :] + mids_t[:, :, None] * d[rows, None, :]
    flat = mids.reshape(-1, 2)
    inside = points_in_env(env, flat).reshape(mids_t.shape)
    out[rows] = inside.all(axis=1)
    return out


def contains_segment(env: Environment, a, b) -> bool:
    """True iff the closed segment a-b lies entirely in the free space."""
    arr_a = np.asarray([[a[0], a[1]]], dtype=float)
    arr_b = np.asarray([[b[0], b[1]]], dtype=float)
    return bool(segments_in_env(env, arr_a, arr_b)[0])


# ---------------------------------------------------------------------------
# visibility


class VisPolygon:
    """Star-shaped visibility polygon around a viewpoint.

    Boundary vertices are ordered counterclockwise by angle around the
    viewpoint; consecutive vertices at equal angle bound radial window edges.
    """

    __slots__ = ("viewpoint", "boundary", "_angles", "_r0", "_shape")

    def __init__(self, viewpoint: Point, boundary: tuple[Point, ...]):
        self.viewpoint = viewpoint
        self.boundary = boundary
        pts = np.asarray(boundary, dtype=float)
        rel = pts - np.asarray(viewpoint, dtype=float)
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        # unwrap to a nondecreasing sequence starting at ang[0]
        out = ang.copy()
        for i in range(1, len(out)):
            while out[i] < out[i - 1] - 1e-12:
                out[i] += 2 * math.pi
        self._angles = out
        self._r0 = out[0]
        self._shape = None

    @property
    def shape(self) -> _ShapelyPolygon:
        """Shapely polygon for boolean set operations (lazily built)."""
        if self._shape is None:
            poly = _ShapelyPolygon(self.boundary)
            if not poly.is_valid:
                fixed = shapely.make_valid(poly)
                polys = [
                    geom
                    for geom in getattr(fixed, "geoms", [fixed])
                    if isinstance(geom, _ShapelyPolygon)
                ]
                poly = shapely.union_all(polys) if polys else _ShapelyPolygon()
            self._shape = poly
        return self._shape

    def contains_points(self, pts: np.ndarray, *, tol: float = 0.0) -> np.ndarray:
        """Vectorized membership by wedge lookup. tol expands the polygon."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        q = np.asarray(self.viewpoint, dtype=float)
        rel = pts - q
        r2 = rel[:, 0] ** 2 + rel[:, 1] ** 2
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        theta = self._r0 + np.mod(theta - self._r0, 2 * math.pi)
        n = len(self.boundary)
        idx = np.searchsorted(self._angles, theta, side="right") - 1
        idx = np.clip(idx, 0, n - 1)
        bnd = np.asarray(self.boundary, dtype=float)
        v1 = bnd[idx]
        v2 = bnd[(idx + 1) % n]
        w = v2 - v1
        wl = np.hypot(w[:, 0], w[:, 1])
        cross = w[:, 0] * (pts[:, 1] - v1[:, 1]) - w[:, 1] * (pts[:, 0] - v1[:, 0])
        signed = cross / np.where(wl == 0, 1.0, wl)
        inside = signed >= -tol
        # zero-width wedge (query exactly at a window angle): fall back to
        # radial comparison against the nearer bracketing vertex
        degen = wl == 0
        if degen.any():
            rv = np.hypot(v1[:, 0] - q[0], v1[:, 1] - q[1])
            inside = np.where(degen, np.sqrt(r2) <= rv + tol, inside)
        return inside | (r2 <= 1e-300)

    def contains_point(self, p, *, tol: float = 0.0) -> bool:
        return bool(self.contains_points(np.asarray([[p[0], p[1]]]), tol=tol)[0])


def _nudge_inward(env: Environment, q: Point) -> Point:
    """Move a boundary-hugging viewpoint up to 2 eps into the interior."""
    eps = env.epsilon
    p = np.asarray([[q.x, q.y]], dtype=float)
    if _boundary_dist_sq(env, p)[0] > eps * eps:
        return q
    best = None
    best_d = -1.0
    for k in range(len(env.edge_starts)):
        a = Point(*env.edge_starts[k])
        b = Point(*env.edge_ends[k])
        if _point_seg_dist(q, a, b) > 3 * eps:
            continue
        nx, ny = -(b.y - a.y), (b.x - a.x)   # left normal = interior side (CCW outer, CW holes)
        ln = math.hypot(nx, ny)
        cand = Point(q.x + 2 * eps * nx / ln, q.y + 2 * eps * ny / ln)
        arr = np.asarray([[cand.x, cand.y]], dtype=float)
        d = _boundary_dist_sq(env, arr)[0]
        if d > best_d and points_in_env(env, arr)[0]:
            best, best_d = cand, d
    return best if best is not None and best_d > eps * eps else q


def visibility_polygon(env: Environment, q) -> VisPolygon:
    """Compute the visibility polygon of viewpoint q by angular sweep.

    Event angles come from environment vertices; for each event the blocking
    edge just below and just above the event angle is found with slightly
    perturbed rays, while the emitted hit points are evaluated on the exact
    event ray (so collinear-ray degeneracies cost no precision). Hit points
    within epsilon of an environment vertex snap to the vertex.
    """
    qp = Point(float(q[0]), float(q[1]))
    if not contains_point(env, qp):
        raise ViewpointOutside(f"viewpoint {qp} is outside the free space")
    qp = _nudge_inward(env, qp)
    qa = np.asarray(qp, dtype=float)

    rel = env.vertices - qa
    dist = np.hypot(rel[:, 0], rel[:, 1])
    keep = dist > 2 * env.epsilon
    ang = np.arctan2(rel[keep][:, 1], rel[keep][:, 0])
    order = np.argsort(ang, kind="stable")
    sorted_ang = ang[order]
    uniq: list[float] = []
    groups: list[list[int]] = []
    kept_idx = np.nonzero(keep)[0]
    for pos in order:
        theta = float(ang[pos])
        if uniq and abs(theta - uniq[-1]) <= 1e-12:
            groups[-1].append(kept_idx[pos])
        else:
            uniq.append(theta)
            groups.append([kept_idx[pos]])
    if len(uniq) > 1 and (uniq[0] + 2 * math.pi) - uniq[-1] <= 1e-12:
        groups[0].extend(groups.pop())
        uniq.pop()
    if not uniq:
        raise ViewpointOutside(f"no visibility events around {qp}")

    angles = np.asarray(uniq)
    if len(angles) > 1:
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * math.pi]]))
        delta = min(1e-5, float(gaps.min()) / 8.0)
    else:
        delta = 1e-5

    dirs = np.concatenate([angles - delta, angles, angles + delta])
    dvec = np.stack([np.cos(dirs), np.sin(dirs)], axis=1)   # (3U,2)

    g1 = env.edge_starts
    g = env.edge_ends - env.edge_starts
    edge_len = np.hypot(g[:, 0], g[:, 1])
    w = g1 - qa                                             # (E,2)
    denom = dvec[:, 0:1] * g[None, :, 1] - dvec[:, 1:2] * g[None, :, 0]
    par = np.abs(denom) <= 1e-14 * np.maximum(edge_len[None, :], 1.0)
    safe = np.where(par, 1.0, denom)
    t = (w[None, :, 0] * g[None, :, 1] - w[None, :, 1] * g[None, :, 0]) / safe
    u = (w[None, :, 0] * dvec[:, 1:2] - w[None, :, 1] * dvec[:, 0:1]) / safe
    tol_u = env.epsilon / np.maximum(edge_len[None, :], env.epsilon)
    t_min = max(1e-12 * env.diameter, 1e-12)
    valid = (~par) & (t > t_min) & (u >= -tol_u) & (u <= 1 + tol_u)
    t_all = np.where(valid, t, np.inf)
    nearest_edge = np.argmin(t_all, axis=1)                 # (3U,)
    nearest_t = t_all[np.arange(len(t_all)), nearest_edge]

    nu = len(angles)
    below_edge = nearest_edge[:nu]
    exact_t = t_all[nu: 2 * nu]
    above_edge = nearest_edge[2 * nu:]
    exact_dir = dvec[nu: 2 * nu]

    verts_xy = env.vertices
    out: list[Point] = []

    def emit(p: Point):
        if out and abs(out[-1].x - p.x) <= env.epsilon and abs(out[-1].y - p.y) <= env.epsilon:
            return
        out.append(p)

    for k in range(nu):
        eA = below_edge[k]
        eB = above_edge[k]
        tA = exact_t[k, eA]
        tB = exact_t[k, eB]
        if not math.isfinite(tA):
            tA = nearest_t[k]
        if not math.isfinite(tB):
            tB = nearest_t[2 * nu + k]
        rverts = sorted((dist[i], i) for i in groups[k])
        rv, vi = rverts[0]
        lim = min(tA, tB) + 4 * env.epsilon
        if rv > lim:
            if eA == eB:
                continue
            emit(_ray_point(qa, exact_dir[k], tA, verts_xy, env.epsilon))
            emit(_ray_point(qa, exact_dir[k], tB, verts_xy, env.epsilon))
            continue
        vpt = Point(verts_xy[vi][0], verts_xy[vi][1])
        if tA > rv + 4 * env.epsilon:
            emit(_ray_point(qa, exact_dir[k], tA, verts_xy, env.epsilon))
        emit(vpt)
        if tB > rv + 4 * env.epsilon:
            emit(_ray_point(qa, exact_dir[k], tB, verts_xy, env.epsilon))

    if len(out) > 1 and abs(out[0].x - out[-1].x) <= env.epsilon and abs(out[0].y - out[-1].y) <= env.epsilon:
        out.pop()
    if len(out) < 3:
        raise ViewpointOutside(f"degenerate visibility polygon at {qp}")
    return VisPolygon(qp, tuple(out))


def _ray_point(qa: np.ndarray, d: np.ndarray, t: float, verts: np.ndarray, eps: float) -> Point:
    p = qa + t * d
    dd = verts - p
    d2 = dd[:, 0] ** 2 + dd[:, 1] ** 2
    j = int(np.argmin(d2))
    if d2[j] <= eps * eps:
        return Point(verts[j][0], verts[j][1])
    return Point(float(p[0]), float(p[1]))


# ---------------------------------------------------------------------------
# shadows


@dataclass(frozen=True, eq=False)
class Shadow:
    """One connected component of the unseen region, in canonical order."""

    index: int
    region: _ShapelyPolygon = field(repr=False)

    @property
    def area(self) -> float:
        return self.region.area

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self.region.bounds

    def covers_point(self, p) -> bool:
        return bool(shapely.intersects_xy(self.region, p[0], p[1]))


@dataclass(frozen=True, eq=False)
class ShadowSet:
    """Canonically ordered shadows of a joint configuration.

    Order: ascending (min-x, min-y) of each component's bounding corner,
    ties broken by area then by lexicographically smallest vertex.
    """

    shadows: tuple[Shadow, ...]
    source_points: tuple[Point, ...]

    def __len__(self) -> int:
        return len(self.shadows)

    def __iter__(self):
        return iter(self.shadows)

    def __getitem__(self, i: int) -> Shadow:
        return self.shadows[i]


def _polygon_parts(geom) -> list[_ShapelyPolygon]:
    if geom.is_empty:
        return []
    if isinstance(geom, _ShapelyPolygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, _ShapelyPolygon)]


def _canonical_sort(parts: list[_ShapelyPolygon]) -> list[_ShapelyPolygon]:
    def key(poly: _ShapelyPolygon):
        b = poly.bounds
        coords = sorted((round(x, 12), round(y, 12)) for x, y in poly.exterior.coords)
        return (b[0], b[1], poly.area, coords[0])

    return sorted(parts, key=key)


def shadow_components(env: Environment, vis_polys: Sequence[VisPolygon]) -> list[_ShapelyPolygon]:
    """Connected components of F minus the union of visibility polygons."""
    if vis_polys:
        union = shapely.union_all([v.shape for v in vis_polys])
        unseen = env.shape.difference(union)
    else:
        unseen = env.shape
    parts = [p for p in _polygon_parts(unseen) if p.area > env.area_epsilon]
    return _canonical_sort(parts)


def shadow_set(env: Environment, points: Sequence) -> ShadowSet:
    """Shadows (components of F minus joint visibility) in canonical order."""
    pts = tuple(Point(float(p[0]), float(p[1])) for p in points)
    for p in pts:
        if not contains_point(env, p):
            raise PointOutside(f"shadow source {p} is outside the free space")
    vis = [visibility_polygon(env, p) for p in pts]
    parts = shadow_components(env, vis)
    return ShadowSet(
        shadows=tuple(Shadow(index=i, region=geom) for i, geom in enumerate(parts)),
        source_points=pts,
    )
