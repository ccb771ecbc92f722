"""Divergence-free extension of vector fields across the boundary of a domain.

The L^1 operator pairs exterior Whitney cubes with interior ones and builds
the extension from simplex fluxes of the field; the W^{1,1} operator adds an
averaged reflection and simplex correctors.  `verify` holds the numerical
checks and the cusp computations, `cli` the batch front end.
"""

from .domain import Ball, ConvexPolytope, CuspMinus, CuspPlus, Domain, Rectangle, SmoothStar, domain_from_json
from .extend_l1 import ExtendConfig, ExtensionHandle, evaluate, prepare, support_radius
from .extend_w11 import CorrectorStack, assemble, corrector_R, corrector_S, jones_E0
from .fields import ExprField, Field, catalog

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "ConvexPolytope",
    "CuspMinus",
    "CuspPlus",
    "Domain",
    "Rectangle",
    "SmoothStar",
    "domain_from_json",
    "ExtendConfig",
    "ExtensionHandle",
    "evaluate",
    "prepare",
    "support_radius",
    "CorrectorStack",
    "assemble",
    "corrector_R",
    "corrector_S",
    "jones_E0",
    "ExprField",
    "Field",
    "catalog",
]
