"""linconn: linearization of nonlinear connections on vector bundles.

Build a connection from coefficient expressions, linearize it on the
pullback bundle, differentiate sections covariantly, compute curvature
components, and run parallel transport, with every structural identity
exposed as a numerically checkable invariant.
"""

from .ad import Dual1, Dual2, directional, mixed_second
from .connection import (
    FieldOnE,
    HorBasicField,
    NonlinearConnection,
    NotProjectableError,
    SectionAlongPi,
    bracket,
    kappa_section,
)
from .expr import DomainError, ParseError, UnboundVariableError, parse, parse_bool, to_str
from .geom import (
    BundleSpace,
    FiberPoint,
    NotTpiVerticalError,
    NotVerticalError,
    OutOfDomainError,
    PullbackPoint,
    SecondTangent,
    TangentE,
    TangentPullback,
    canonical_involution,
    tangent_add,
    tangent_scale,
    tau_add,
    tau_scale,
    tpi_vertical_lift,
    tpi_vertical_project,
    vertical_lift,
    vertical_project,
)
from .linearize import (
    FlatnessReport,
    LambdaFamilyMember,
    LinearizedConnection,
    fiber_derivative_of_field,
)
from .specfile import SpecError, SpecFile, load_spec
from .transport import CurveInE, TransportResult, fiber_derivative_flow, flow, transport_ode

__version__ = "0.1.0"

__all__ = [
    "BundleSpace",
    "CurveInE",
    "DomainError",
    "Dual1",
    "Dual2",
    "FieldOnE",
    "FiberPoint",
    "FlatnessReport",
    "HorBasicField",
    "LambdaFamilyMember",
    "LinearizedConnection",
    "NonlinearConnection",
    "NotProjectableError",
    "NotTpiVerticalError",
    "NotVerticalError",
    "OutOfDomainError",
    "ParseError",
    "PullbackPoint",
    "SecondTangent",
    "SectionAlongPi",
    "SpecError",
    "SpecFile",
    "TangentE",
    "TangentPullback",
    "TransportResult",
    "UnboundVariableError",
    "bracket",
    "canonical_involution",
    "directional",
    "fiber_derivative_flow",
    "fiber_derivative_of_field",
    "flow",
    "kappa_section",
    "load_spec",
    "mixed_second",
    "parse",
    "parse_bool",
    "tangent_add",
    "tangent_scale",
    "tau_add",
    "tau_scale",
    "to_str",
    "tpi_vertical_lift",
    "tpi_vertical_project",
    "transport_ode",
    "vertical_lift",
    "vertical_project",
]
