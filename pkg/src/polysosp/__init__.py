"""Second-order stationary points of smooth functions over polyhedra.

The search repeatedly escapes from points that admit a decrease of more
than ``delta / 3`` within a trust radius, by enumerating subsets of nearby
constraints and solving a local quadratic model on each induced subspace.
"""
from .corner import QcspInstance, escape_corner, find_inside_corner
from .driver import RunConfig, SospResult, TrajectoryRecord, find_sosp
from .escape import (CaseLabel, EscapeOutcome, OutcomeKind, SubspaceProblem, find_inside,
                     houdini_escape, reduce_to_subspace)
from .oracle import OracleBundle, QuadraticModel, build_model, estimate_hessian, vrsg
from .polyhedron import (AffineSubspace, Polyhedron, active_set, affine_subspace, contains,
                         linear_min_over_ball_polytope, project, reachable_constraints)

__all__ = [
    "AffineSubspace", "CaseLabel", "EscapeOutcome", "OracleBundle", "OutcomeKind", "Polyhedron",
    "QcspInstance", "QuadraticModel", "RunConfig", "SospResult", "SubspaceProblem",
    "TrajectoryRecord", "active_set", "affine_subspace", "build_model", "contains",
    "escape_corner", "estimate_hessian", "find_inside", "find_inside_corner", "find_sosp",
    "houdini_escape", "linear_min_over_ball_polytope", "project", "reachable_constraints",
    "reduce_to_subspace", "vrsg",
]
__version__ = "0.1.0"
