"""Shadow labels, dominance, events, and edge influence relations.

A shadow label assigns one contamination bit per shadow (1 = may hold an
undetected evader, 0 = guaranteed clear). The influence relation of a
straight-line joint motion says which destination shadows can inherit
contamination from which source shadows; it is computed once per edge by
stepping the motion and composing per-step overlap correspondences, with
adaptive bisection around shadow events.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely

from .geometry import (
    Environment,
    Point,
    ShadowSet,
    contains_segment,
    shadow_set,
)


class LengthMismatch(ValueError):
    pass


class AmbiguousCorrespondence(RuntimeError):
    """Shadow correspondence across a step could not be resolved."""


class InfeasibleEdge(ValueError):
    """A straight-line motion leaves the free space."""


class DeadlineExceeded(RuntimeError):
    """Cooperative timeout raised from inside long-running computations."""


# number of uniform intervals the motion is initially cut into; matches the
# sampling density of the grid checker so neither route sees transient
# touch-and-separate events the other systematically misses
INITIAL_STEPS = 100
# bisection floor, as a fraction of the edge parameter
MIN_STEP = 1e-6
# an appearing/disappearing shadow larger than this fraction of area(F)
# within one accepted step forces bisection (anti-aliasing guard)
ABRUPT_AREA_FRACTION = 5e-4


@dataclass(frozen=True)
class ShadowLabel:
    """Contamination bits over a canonical shadow order, packed in an int.

    Bit i of ``mask`` is shadow i's bit; ``size`` is the number of shadows.
    The string form writes shadow 0 leftmost: mask 0b010 with size 3 is
    "010" meaning shadow 1 contaminated, shadows 0 and 2 clear.
    """

    size: int
    mask: int

    def __post_init__(self):
        if self.size < 0 or self.mask < 0 or self.mask >> self.size:
            raise ValueError(f"mask {self.mask:b} does not fit size {self.size}")

    @classmethod
    def from_string(cls, bits: str) -> "ShadowLabel":
        mask = 0
        for i, ch in enumerate(bits):
            if ch == "1":
                mask |= 1 << i
            elif ch != "0":
                raise ValueError(f"label string must be 0/1, got {bits!r}")
        return cls(size=len(bits), mask=mask)

    @classmethod
    def all_contaminated(cls, size: int) -> "ShadowLabel":
        return cls(size=size, mask=(1 << size) - 1 if size else 0)

    @classmethod
    def all_clear(cls, size: int) -> "ShadowLabel":
        return cls(size=size, mask=0)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return (self.mask >> i) & 1

    @property
    def is_clear(self) -> bool:
        return self.mask == 0

    def contaminated_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.size) if (self.mask >> i) & 1)

    def __str__(self) -> str:
        return "".join("1" if (self.mask >> i) & 1 else "0" for i in range(self.size))


def dominates(l: ShadowLabel, m: ShadowLabel) -> bool:
    """True iff l is strictly more cleared than m, componentwise.

    l dominates m when l != m and every contaminated bit of l is also
    contaminated in m ("010" dominates "011"). Irreflexive, antisymmetric,
    transitive; labels of different sizes raise LengthMismatch.
    """
    if l.size != m.size:
        raise LengthMismatch(f"label sizes differ: {l.size} vs {m.size}")
    return l.mask != m.mask and (l.mask & ~m.mask) == 0


@dataclass(frozen=True, eq=False)
class InfluenceRelation:
    """Which destination shadows each source shadow can contaminate.

    ``matrix[i, j]`` is True iff contamination in source shadow i can reach
    destination shadow j over the motion. ``dest_masks[i]`` packs row i as
    an int for fast label propagation.
    """

    rows: int
    cols: int
    matrix: np.ndarray = field(repr=False)
    dest_masks: tuple[int, ...] = field(repr=False)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "InfluenceRelation":
        matrix = np.asarray(matrix, dtype=bool)
        rows, cols = matrix.shape
        masks = []
        for i in range(rows):
            m = 0
            for j in range(cols):
                if matrix[i, j]:
                    m |= 1 << j
            masks.append(m)
        return cls(rows=rows, cols=cols, matrix=matrix, dest_masks=tuple(masks))

    @classmethod
    def identity(cls, n: int) -> "InfluenceRelation":
        return cls.from_matrix(np.eye(n, dtype=bool))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, InfluenceRelation)
            and self.rows == other.rows
            and self.cols == other.cols
            and bool(np.array_equal(self.matrix, other.matrix))
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self.matrix.tobytes()))

    def to_strings(self) -> list[str]:
        return ["".join("1" if v else "0" for v in row) for row in self.matrix]


def propagate(label: ShadowLabel, rel: InfluenceRelation) -> ShadowLabel:
    """Push a source label through a relation: a destination shadow is
    contaminated iff some contaminated source shadow influences it."""
    if label.size != rel.rows:
        raise LengthMismatch(f"label size {label.size} != relation rows {rel.rows}")
    mask = 0
    m = label.mask
    i = 0
    while m:
        if m & 1:
            mask |= rel.dest_masks[i]
        m >>= 1
        i += 1
    return ShadowLabel(size=rel.cols, mask=mask)


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class ShadowEvent:
    """One tagged correspondence event between two nearby shadow sets.

    kind is 'appeared', 'persisted', 'merged', or 'split' for a next-set
    shadow (``index`` into next), or 'disappeared' for a prev-set shadow
    (``index`` into prev). ``sources`` lists prev indices feeding it.
    """

    kind: str
    index: int
    sources: tuple[int, ...] = ()


def _overlap_areas(prev: Sequence, next_: Sequence) -> np.ndarray:
    """Pairwise intersection areas with bounding-box prefiltering."""
    out = np.zeros((len(prev), len(next_)))
    for i, a in enumerate(prev):
        ab = a.bounds
        for j, b in enumerate(next_):
            bb = b.bounds
            if ab[0] > bb[2] or bb[0] > ab[2] or ab[1] > bb[3] or bb[1] > ab[3]:
                continue
            out[i, j] = a.region.intersection(b.region).area
    return out


def classify_events(prev: ShadowSet, next_: ShadowSet, area_eps: float | None = None) -> list[ShadowEvent]:
    """Tag every next-set shadow and every vanished prev-set shadow.

    Correspondence is by region overlap area above the sliver tolerance;
    any overlap strictly between 0 and the tolerance raises
    AmbiguousCorrespondence (the instants are not close enough to decide).
    """
    if area_eps is None:
        area_eps = max(
            (s.area for s in list(prev) + list(next_)), default=1.0
        ) * 1e-9
    areas = _overlap_areas(list(prev), list(next_))
    if np.any((areas > 0) & (areas <= area_eps)):
        i, j = np.argwhere((areas > 0) & (areas <= area_eps))[0]
        raise AmbiguousCorrespondence(
            f"overlap of prev shadow {i} and next shadow {j} is {areas[i, j]:.3e},"
            f" below the decision tolerance {area_eps:.3e}"
        )
    flows = areas > area_eps
    parents = [tuple(np.nonzero(flows[:, j])[0]) for j in range(flows.shape[1])]
    children = [tuple(np.nonzero(flows[i, :])[0]) for i in range(flows.shape[0])]
    events: list[ShadowEvent] = []
    for j, par in enumerate(parents):
        if not par:
            events.append(ShadowEvent("appeared", j))
        elif len(par) > 1:
            events.append(ShadowEvent("merged", j, tuple(int(p) for p in par)))
        elif len(children[par[0]]) > 1:
            events.append(ShadowEvent("split", j, (int(par[0]),)))
        else:
            events.append(ShadowEvent("persisted", j, (int(par[0]),)))
    for i, ch in enumerate(children):
        if not ch:
            events.append(ShadowEvent("disappeared", i))
    return events


# ---------------------------------------------------------------------------
# influence relation by adaptive stepping


@dataclass
class StepDiagnostics:
    """Counters for floor-limit acceptances during edge stepping."""

    floor_count_jumps: int = 0
    floor_abrupt: int = 0
    shadow_sets_computed: int = 0


def _interp(from_points, to_points, t: float) -> list[Point]:
    return [
        Point(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
        for a, b in zip(from_points, to_points)
    ]


def _step_flow(
    env: Environment,
    prev: ShadowSet,
    next_: ShadowSet,
    abrupt_area: float,
):
    """Overlap flow matrix for one step plus acceptance flags.

    Returns (flow bool matrix, ambiguous, abrupt, count_jump).
    """
    a_eps = env.area_epsilon
    areas = _overlap_areas(list(prev), list(next_))
    gray = (areas > 0) & (areas <= a_eps)
    flows = areas > a_eps
    ambiguous = bool(gray.any())
    abrupt = False
    for j in range(flows.shape[1]):
        if not flows[:, j].any() and next_[j].area > abrupt_area:
            abrupt = True
    for i in range(flows.shape[0]):
        if not flows[i, :].any() and prev[i].area > abrupt_area:
            abrupt = True
    count_jump = abs(len(next_) - len(prev)) > 1
    return flows, ambiguous, abrupt, count_jump


def _position_key(pts: Sequence[Point]) -> tuple:
    return tuple((round(p.x, 12), round(p.y, 12)) for p in pts)


def influence_relation(
    env: Environment,
    from_points: Sequence,
    to_points: Sequence,
    *,
    src_set: ShadowSet | None = None,
    dst_set: ShadowSet | None = None,
    initial_steps: int = INITIAL_STEPS,
    min_step: float = MIN_STEP,
    deadline: float | None = None,
    diagnostics: StepDiagnostics | None = None,
    shadow_cache: dict | None = None,
) -> InfluenceRelation:
    """Influence relation of the straight-line joint motion from -> to.

    The motion parameter is cut into ``initial_steps`` uniform intervals;
    an interval is accepted when shadow correspondence across it is clean
    (at most one event visible, no gray-zone overlaps, no abrupt large
    appear/disappear), otherwise it is bisected down to ``min_step``. At
    the floor, count jumps and abrupt events are accepted (the flow matrix
    still carries contamination soundly); unresolved gray-zone overlaps
    raise AmbiguousCorrespondence. Raises InfeasibleEdge if any pursuer's
    segment leaves the free space.

    ``shadow_cache`` (keyed by rounded interpolated positions) may be shared
    between the two directions of the same edge pair, whose step instants
    interpolate the same joint positions.
    """
    src = [Point(float(p[0]), float(p[1])) for p in from_points]
    dst = [Point(float(p[0]), float(p[1])) for p in to_points]
    if len(src) != len(dst):
        raise InfeasibleEdge(f"pursuer counts differ: {len(src)} vs {len(dst)}")
    for i, (a, b) in enumerate(zip(src, dst)):
        if not contains_segment(env, a, b):
            raise InfeasibleEdge(f"pursuer {i} segment {a} -> {b} leaves the free space")

    diag = diagnostics if diagnostics is not None else StepDiagnostics()
    if all(a == b for a, b in zip(src, dst)):
        base = src_set if src_set is not None else shadow_set(env, src)
        return InfluenceRelation.identity(len(base))

    cache: dict = shadow_cache if shadow_cache is not None else {}
    if src_set is not None:
        cache.setdefault(_position_key(src), src_set)
    if dst_set is not None:
        cache.setdefault(_position_key(dst), dst_set)

    def shadows_at(t: float) -> ShadowSet:
        pts = _interp(src, dst, t)
        key = _position_key(pts)
        got = cache.get(key)
        if got is None:
            if deadline is not None and time.monotonic() > deadline:
                raise DeadlineExceeded("influence relation construction timed out")
            got = shadow_set(env, pts)
            diag.shadow_sets_computed += 1
            cache[key] = got
        return got

    abrupt_area = ABRUPT_AREA_FRACTION * env.area
    n0 = len(shadows_at(0.0))
    acc = np.eye(n0, dtype=bool)
    pending = [
        (k / initial_steps, (k + 1) / initial_steps) for k in range(initial_steps)
    ]
    pending.reverse()  # pop() walks left to right
    while pending:
        lo, hi = pending.pop()
        prev = shadows_at(lo)
        next_ = shadows_at(hi)
        flows, ambiguous, abrupt, count_jump = _step_flow(env, prev, next_, abrupt_area)
        at_floor = (hi - lo) <= min_step
        if not at_floor and (ambiguous or abrupt or count_jump):
            mid = 0.5 * (lo + hi)
            pending.append((mid, hi))
            pending.append((lo, mid))
            continue
        if at_floor and ambiguous:
            raise AmbiguousCorrespondence(
                f"gray-zone shadow overlap persists below step {min_step:g}"
                f" on interval [{lo:.7f}, {hi:.7f}]"
            )
        if at_floor and count_jump:
            diag.floor_count_jumps += 1
        if at_floor and abrupt:
            diag.floor_abrupt += 1
        acc = acc @ flows
    return InfluenceRelation.from_matrix(acc)
