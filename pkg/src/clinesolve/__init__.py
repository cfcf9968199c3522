"""clinesolve: multiplicity solver for coupled indefinite-weight Neumann problems."""

from .backend import available_backends, backend_name
from .model import (
    AdmissibilityReport,
    CouplingPolynomial,
    Equation,
    Nonlinearity,
    ProblemSpec,
    WeightFunction,
    check_admissibility,
    evaluate_weight,
    extended_rhs,
    weight_envelopes,
)
from .profiles import SpatialProfile, constant_profile, step_profile
from .integrate import IntegrationError, IvpState, Trajectory, integrate

__version__ = "0.1.0"
