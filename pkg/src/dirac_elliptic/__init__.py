"""Radial solver for -Laplace u = V u^p + k delta_0 in R^N.

Minimal solutions by monotone Green iteration, barrier and threshold
constants, linearized stability, and a second solution by a mountain-pass
search on the shifted energy.
"""

from .errors import (DiracEllipticError, DomainError, NumericalError, ValidationError)
from .grid import RadialField, RadialGrid
from .kernel import (BarrierConstants, estimate_c2, fundamental_solution, green_apply, newton_constant,
                     potential_V0, supersolution_t)
from .minimal import IterationReport, KStarEstimate, bisect_kstar, check_monotone_in_V, iterate_minimal, \
    validate_exponents
from .mountainpass import (EnergyContext, F_eval, MountainPassReport, embedding_check, energy, energy_gradient,
                           f_eval, find_endpoint, mountain_pass)
from .problem import ProblemSpec, TabulatedPotential
from .stability import QuadraticForms, StabilityReport, assemble_forms, hardy_bound_check, lambda1, \
    stability_margin
from .verify import VerificationReport, check_singularity_and_decay, residual_pde, verify_solution, weak_residual

__version__ = "0.1.0"
