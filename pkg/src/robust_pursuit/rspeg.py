"""Robust strategy graph over joint pursuer configurations.

Vertices are joint configurations carrying antichains of failure shadow
labels (one leave-one-out shadow label per potentially failing pursuer);
directed edges are straight-line joint motions with one cached influence
relation per excluded pursuer. A vertex holding a label whose n sublabels
are all clear certifies a strategy that clears the environment even if
any single pursuer is removed at any time.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Environment, Point, ShadowSet, contains_point, segments_in_env, shadow_set
from .shadows import (
    AmbiguousCorrespondence,
    DeadlineExceeded,
    InfluenceRelation,
    ShadowLabel,
    StepDiagnostics,
    influence_relation,
    propagate,
)


class InvalidJpc(ValueError):
    pass


class NotAllClear(ValueError):
    pass


class BrokenProvenance(RuntimeError):
    pass


@dataclass(frozen=True)
class Jpc:
    """Joint pursuer configuration: one position per pursuer, n >= 2."""

    positions: tuple[Point, ...]

    def __post_init__(self):
        pts = tuple(Point(float(p[0]), float(p[1])) for p in self.positions)
        if len(pts) < 2:
            raise InvalidJpc(f"need at least 2 pursuers, got {len(pts)}")
        object.__setattr__(self, "positions", pts)

    @property
    def n(self) -> int:
        return len(self.positions)

    def without(self, i: int) -> tuple[Point, ...]:
        return self.positions[:i] + self.positions[i + 1:]


@dataclass
class FailureShadowLabel:
    """One antichain element: n leave-one-out shadow labels plus provenance.

    ``provenance`` names the (vertex id, label index) this label was
    propagated from, or None at the root. Pruned labels stay in the
    vertex's list with ``alive = False`` so provenance chains of surviving
    labels never dangle.
    """

    sublabels: tuple[ShadowLabel, ...]
    provenance: tuple[int, int] | None
    alive: bool = True

    def masks(self) -> tuple[int, ...]:
        return tuple(s.mask for s in self.sublabels)

    @property
    def all_clear(self) -> bool:
        return all(s.mask == 0 for s in self.sublabels)


def _le(a: FailureShadowLabel, b: FailureShadowLabel) -> bool:
    """a at least as cleared as b, componentwise over all sublabels."""
    return all(x.mask & ~y.mask == 0 for x, y in zip(a.sublabels, b.sublabels))


@dataclass
class Vertex:
    id: int
    jpc: Jpc
    shadow_sets: tuple[ShadowSet, ...]   # index i excludes pursuer i
    labels: list[FailureShadowLabel] = field(default_factory=list)

    def alive_labels(self):
        return [(i, l) for i, l in enumerate(self.labels) if l.alive]


@dataclass
class Edge:
    id: int
    src: int
    dst: int
    relations: tuple[InfluenceRelation, ...] | None   # None when caching is off


@dataclass
class AddReport:
    """What one add_sample call did to the graph."""

    vertex_id: int
    edges_added: list[int] = field(default_factory=list)
    edges_skipped_ambiguous: int = 0
    labels_added: int = 0
    labels_pruned: int = 0
    relations_computed: int = 0
    all_clear: list[tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True)
class Solution:
    """Waypoint path certified 1-failure robust by the graph."""

    waypoints: tuple[Jpc, ...]

    @property
    def n(self) -> int:
        return self.waypoints[0].n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "waypoints": [
                [[p.x, p.y] for p in w.positions] for w in self.waypoints
            ],
        }


class Rspeg:
    """The graph. Construct with :func:`new_graph`; grow with add_sample."""

    def __init__(
        self,
        env: Environment,
        root: Jpc,
        *,
        cache_relations: bool = True,
        relation_memo: bool = False,
    ):
        self.env = env
        self.n = root.n
        self.cache_relations = cache_relations
        self.relation_memo = relation_memo
        self._memo: dict = {}
        self.vertices: list[Vertex] = []
        self.edges: list[Edge] = []
        self.out_edges: list[list[int]] = []
        self.relations_computed = 0
        self.labels_pruned_total = 0
        self.edges_skipped_ambiguous_total = 0
        self.step_diagnostics = StepDiagnostics()
        self._jpc_index: dict[tuple, int] = {}
        root_vertex = self._make_vertex(root)
        self._jpc_index[
            tuple((round(p.x, 12), round(p.y, 12)) for p in root.positions)
        ] = root_vertex.id
        root_vertex.labels.append(
            FailureShadowLabel(
                sublabels=tuple(
                    ShadowLabel.all_contaminated(len(ss)) for ss in root_vertex.shadow_sets
                ),
                provenance=None,
            )
        )

    # -- construction helpers ------------------------------------------------

    def _validate_jpc(self, w: Jpc) -> None:
        if w.n != self.n:
            raise InvalidJpc(f"expected {self.n} pursuers, got {w.n}")
        for i, p in enumerate(w.positions):
            if not contains_point(self.env, p):
                raise InvalidJpc(f"pursuer {i} at {p} is outside the free space")

    def _make_vertex(self, w: Jpc) -> Vertex:
        self._validate_jpc(w)
        sets = tuple(shadow_set(self.env, w.without(i)) for i in range(self.n))
        v = Vertex(id=len(self.vertices), jpc=w, shadow_sets=sets)
        self.vertices.append(v)
        self.out_edges.append([])
        return v

    def _relation(
        self,
        src: Vertex,
        dst: Vertex,
        i: int,
        deadline: float | None,
        report: AddReport | None,
        shadow_cache: dict | None = None,
    ) -> InfluenceRelation:
        """Influence relation for excluded pursuer i along src -> dst."""
        a = src.jpc.without(i)
        b = dst.jpc.without(i)
        key = None
        if self.relation_memo:
            key = (
                tuple((round(p.x, 12), round(p.y, 12)) for p in a),
                tuple((round(p.x, 12), round(p.y, 12)) for p in b),
            )
            got = self._memo.get(key)
            if got is not None:
                return got
        rel = influence_relation(
            self.env,
            a,
            b,
            src_set=src.shadow_sets[i],
            dst_set=dst.shadow_sets[i],
            deadline=deadline,
            diagnostics=self.step_diagnostics,
            shadow_cache=shadow_cache,
        )
        self.relations_computed += 1
        if report is not None:
            report.relations_computed += 1
        if key is not None:
            self._memo[key] = rel
        return rel

    def _edge_relations(
        self, edge: Edge, deadline: float | None, report: AddReport | None
    ) -> tuple[InfluenceRelation, ...]:
        if edge.relations is not None:
            return edge.relations
        src = self.vertices[edge.src]
        dst = self.vertices[edge.dst]
        return tuple(
            self._relation(src, dst, i, deadline, report) for i in range(self.n)
        )

    # -- public operations ---------------------------------------------------

    def add_sample(self, w: Jpc, deadline: float | None = None) -> AddReport:
        """Insert a joint configuration, wire feasible edges, propagate labels.

        An exact repeat of an existing configuration is a no-op returning
        the existing vertex id (identical positions give identical shadow
        sets, relations, and labels, so a second vertex is pure
        redundancy; walk-based streams do wrap around and repeat).

        Twin directed edges are added to every existing vertex whose joint
        motion keeps each pursuer's segment inside the free space; each
        direction carries its own influence relations, built immediately
        (ambiguous directions are dropped and counted). Labels then flow
        through a FIFO worklist with dominance pruning until fixpoint.
        """
        self._validate_jpc(w)
        key = tuple((round(p.x, 12), round(p.y, 12)) for p in w.positions)
        known = self._jpc_index.get(key)
        if known is not None:
            return AddReport(vertex_id=known)
        report = AddReport(vertex_id=len(self.vertices))
        new_v = self._make_vertex(w)
        self._jpc_index[key] = new_v.id
        existing = [v for v in self.vertices if v.id != new_v.id]
        feasible: list[Vertex] = []
        if existing:
            a_pts = []
            b_pts = []
            for v in existing:
                for i in range(self.n):
                    a_pts.append(v.jpc.positions[i])
                    b_pts.append(w.positions[i])
            ok = segments_in_env(
                self.env, np.asarray(a_pts, dtype=float), np.asarray(b_pts, dtype=float)
            ).reshape(len(existing), self.n)
            feasible = [v for k, v in enumerate(existing) if ok[k].all()]

        for v in feasible:
            if deadline is not None and time.monotonic() > deadline:
                raise DeadlineExceeded("add_sample timed out while wiring edges")
            # both directions step through the same interpolated positions,
            # so each excluded-pursuer index shares one shadow-set cache
            pair_caches: list[dict] = [{} for _ in range(self.n)]
            for src, dst in ((v, new_v), (new_v, v)):
                try:
                    rels = tuple(
                        self._relation(src, dst, i, deadline, report, pair_caches[i])
                        for i in range(self.n)
                    )
                except AmbiguousCorrespondence:
                    report.edges_skipped_ambiguous += 1
                    self.edges_skipped_ambiguous_total += 1
                    continue
                edge = Edge(
                    id=len(self.edges),
                    src=src.id,
                    dst=dst.id,
                    relations=rels if self.cache_relations else None,
                )
                self.edges.append(edge)
                self.out_edges[src.id].append(edge.id)
                report.edges_added.append(edge.id)

        # seed the worklist with every live label at a tail of a new edge
        work: deque[tuple[int, int]] = deque()
        seeded = set()
        for eid in report.edges_added:
            src_id = self.edges[eid].src
            for idx, _ in self.vertices[src_id].alive_labels():
                if (src_id, idx) not in seeded:
                    seeded.add((src_id, idx))
                    work.append((src_id, idx))
        self._propagate(work, deadline, report)
        return report

    def _propagate(
        self,
        work: deque[tuple[int, int]],
        deadline: float | None,
        report: AddReport,
    ) -> None:
        while work:
            if deadline is not None and time.monotonic() > deadline:
                raise DeadlineExceeded("label propagation timed out")
            vid, idx = work.popleft()
            label = self.vertices[vid].labels[idx]
            if not label.alive:
                continue
            for eid in self.out_edges[vid]:
                edge = self.edges[eid]
                rels = self._edge_relations(edge, deadline, report)
                sublabels = tuple(
                    propagate(label.sublabels[i], rels[i]) for i in range(self.n)
                )
                new_idx = self._insert_label(
                    self.vertices[edge.dst], sublabels, (vid, idx), report
                )
                if new_idx is not None:
                    work.append((edge.dst, new_idx))

    def _insert_label(
        self,
        v: Vertex,
        sublabels: tuple[ShadowLabel, ...],
        provenance: tuple[int, int],
        report: AddReport,
    ) -> int | None:
        cand = FailureShadowLabel(sublabels=sublabels, provenance=provenance)
        for _, m in v.alive_labels():
            if _le(m, cand):
                return None   # an existing label is at least as cleared
        for _, m in v.alive_labels():
            if _le(cand, m):
                m.alive = False
                report.labels_pruned += 1
                self.labels_pruned_total += 1
        idx = len(v.labels)
        v.labels.append(cand)
        report.labels_added += 1
        if cand.all_clear:
            report.all_clear.append((v.id, idx))
        return idx

    def all_clear_labels(self) -> list[tuple[int, int]]:
        out = []
        for v in self.vertices:
            for idx, l in v.alive_labels():
                if l.all_clear:
                    out.append((v.id, idx))
        return out

    def extract_solution(self, vertex_id: int, label_index: int) -> Solution:
        """Walk provenance from an all-clear label back to the root."""
        v = self.vertices[vertex_id]
        label = v.labels[label_index]
        if not label.all_clear:
            raise NotAllClear(
                f"label {label_index} at vertex {vertex_id} is not all-clear"
            )
        chain = [vertex_id]
        seen = {(vertex_id, label_index)}
        cur = label
        while cur.provenance is not None:
            pv, pl = cur.provenance
            if (pv, pl) in seen or pv >= len(self.vertices):
                raise BrokenProvenance(f"provenance cycle or dangling ref at {cur.provenance}")
            if pl >= len(self.vertices[pv].labels):
                raise BrokenProvenance(f"label index {pl} missing at vertex {pv}")
            seen.add((pv, pl))
            chain.append(pv)
            cur = self.vertices[pv].labels[pl]
        if chain[-1] != 0:
            raise BrokenProvenance("provenance chain does not end at the root")
        chain.reverse()
        return Solution(waypoints=tuple(self.vertices[v].jpc for v in chain))

    # -- auditing ------------------------------------------------------------

    def recompute_fixpoint(self) -> dict[int, set[tuple[int, ...]]]:
        """Re-derive each vertex's antichain from scratch over stored edges.

        Returns vertex id -> set of flattened sublabel-mask tuples; used to
        audit that incremental propagation reached the same fixpoint.
        """
        reach: dict[int, list[tuple[ShadowLabel, ...]]] = {
            0: [self.vertices[0].labels[0].sublabels]
        }
        work = deque([(0, self.vertices[0].labels[0].sublabels)])
        while work:
            vid, sub = work.popleft()
            if sub not in reach.get(vid, []):
                continue
            for eid in self.out_edges[vid]:
                edge = self.edges[eid]
                rels = self._edge_relations(edge, None, None)
                nxt = tuple(propagate(sub[i], rels[i]) for i in range(self.n))
                bucket = reach.setdefault(edge.dst, [])
                if any(
                    all(x.mask & ~y.mask == 0 for x, y in zip(m, nxt)) for m in bucket
                ):
                    continue
                bucket[:] = [
                    m
                    for m in bucket
                    if not all(x.mask & ~y.mask == 0 for x, y in zip(nxt, m))
                ]
                bucket.append(nxt)
                work.append((edge.dst, nxt))
        return {
            vid: {tuple(s.mask for s in sub) for sub in subs}
            for vid, subs in reach.items()
        }

    def alive_mask_sets(self) -> dict[int, set[tuple[int, ...]]]:
        return {
            v.id: {l.masks() for _, l in v.alive_labels()} for v in self.vertices
        }

    def to_json(self) -> dict:
        """Graph snapshot for debugging dumps (one-way serialization)."""
        return {
            "n": self.n,
            "cache_relations": self.cache_relations,
            "vertices": [
                {
                    "id": v.id,
                    "jpc": [[p.x, p.y] for p in v.jpc.positions],
                    "shadow_counts": [len(ss) for ss in v.shadow_sets],
                    "labels": [
                        {
                            "sublabels": [str(s) for s in l.sublabels],
                            "provenance": list(l.provenance) if l.provenance else None,
                            "alive": l.alive,
                        }
                        for l in v.labels
                    ],
                }
                for v in self.vertices
            ],
            "edges": [
                {
                    "id": e.id,
                    "src": e.src,
                    "dst": e.dst,
                    "relations": [r.to_strings() for r in e.relations]
                    if e.relations is not None
                    else None,
                }
                for e in self.edges
            ],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def new_graph(
    env: Environment,
    root: Jpc,
    *,
    cache_relations: bool = True,
    relation_memo: bool = False,
) -> Rspeg:
    """Create a graph rooted at the given configuration.

    The root label marks every leave-one-out shadow contaminated (nothing
    is known cleared at the start, for any failure case).
    """
    return Rspeg(
        env, root, cache_relations=cache_relations, relation_memo=relation_memo
    )
