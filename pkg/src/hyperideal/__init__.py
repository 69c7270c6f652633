"""Hyper-ideal polyhedral metrics on ideally triangulated 3-manifolds with boundary,
computed with the extended combinatorial Ricci flow and Newton's method."""

from .curvature import (
    curvature_jacobian,
    energy,
    extended_curvature,
    is_nondegenerate,
    pull_tet_lengths,
)
from .geometry import Region, extended_angles, extended_covolume, lobachevsky
from .solver import (
    FlowConfig,
    FlowTrace,
    SolveReport,
    convergence_rate,
    flow,
    hybrid_solve,
    newton_solve,
    regular_solve,
)
from .triangulation import Triangulation, parse, parse_gluing, parse_incidence, validate

__version__ = "0.1.0"
