"""Exact spin-s propagators assembled from a single classical precession trajectory.

A spin in a field ``omega(t) n(t)`` evolves under ``i dpsi/dt = -omega (s.n) psi``
(``hbar = 1``). Its propagator follows in closed form from the solution
``e(t)`` of ``de/dt = -omega n x e`` together with one accumulated angle
``alpha(t)``; no time-ordered product is required. The package builds that
trajectory, assembles ``U(t)`` for any spin, enumerates cyclic solutions and
their phases, and checks everything against a time-ordered oracle.
"""

from .cyclic import (
    CyclicReport,
    all_cyclic_analysis,
    alpha_sensitivity,
    guaranteed_cyclic_family,
    rational_superposition_family,
    winding_relation_check,
)
from .errors import (
    ClosureError,
    FieldConfigError,
    FieldDomainError,
    IntegrationAccuracyError,
    NotApplicableError,
    PreconditionError,
    SpinpropError,
)
from .field import FixedAxis, OmegaProfile, Piecewise, Rotating, Sampled, Wobbling, program_from_dict
from .precess import PrecessionTrajectory, integrate_e, monodromy, solid_angle
from .propagate import Propagator, oracle_propagator, propagator_closed_form
from .spinalg import SpinRep, build_spin_rep, exp_i_spin

__version__ = "0.1.0"

__all__ = [
    "ClosureError",
    "CyclicReport",
    "FieldConfigError",
    "FieldDomainError",
    "FixedAxis",
    "IntegrationAccuracyError",
    "NotApplicableError",
    "OmegaProfile",
    "Piecewise",
    "PrecessionTrajectory",
    "PreconditionError",
    "Propagator",
    "Rotating",
    "Sampled",
    "SpinRep",
    "SpinpropError",
    "Wobbling",
    "all_cyclic_analysis",
    "alpha_sensitivity",
    "build_spin_rep",
    "exp_i_spin",
    "guaranteed_cyclic_family",
    "integrate_e",
    "monodromy",
    "oracle_propagator",
    "program_from_dict",
    "propagator_closed_form",
    "rational_superposition_family",
    "solid_angle",
    "winding_relation_check",
]
