"""Failure-robust multi-pursuer planning in polygonal environments.

Computes joint pursuer strategies that remain guaranteed to detect any
evader even if one pursuer is removed at an arbitrary time, using a
roadmap graph over joint configurations whose vertices carry antichains
of leave-one-out shadow labels.
"""

from .geometry import (
    Environment,
    GeometryError,
    Point,
    contains_point,
    contains_segment,
    load_environment,
    shadow_set,
    validate_environment,
    visibility_polygon,
)
from .shadows import (
    InfluenceRelation,
    ShadowLabel,
    classify_events,
    dominates,
    influence_relation,
    propagate,
)
from .rspeg import Jpc, Rspeg, Solution, new_graph
from .oracle import CheckReport, ContaminationGrid, check_solution
from .planner import PlanConfig, PlanResult, plan
from .sampling import (
    Web,
    build_sparse_web,
    build_visibility_graph,
    dfs_walk,
    rcs_stream,
    ws_stream,
)

__all__ = [
    "Environment",
    "GeometryError",
    "Point",
    "contains_point",
    "contains_segment",
    "load_environment",
    "shadow_set",
    "validate_environment",
    "visibility_polygon",
    "InfluenceRelation",
    "ShadowLabel",
    "classify_events",
    "dominates",
    "influence_relation",
    "propagate",
    "Jpc",
    "Rspeg",
    "Solution",
    "new_graph",
    "CheckReport",
    "ContaminationGrid",
    "check_solution",
    "PlanConfig",
    "PlanResult",
    "plan",
    "Web",
    "build_sparse_web",
    "build_visibility_graph",
    "dfs_walk",
    "rcs_stream",
    "ws_stream",
]

__version__ = "0.1.0"
