"""Fritz John and KKT multiplier certificates with exact rational arithmetic."""

from .cone import (Combination, Separator, StrictWitness, farkas_decide,
                   fm_oracle, fm_strict_empty, nullspace_basis,
                   rank_independent, solve_square, strict_feasibility)
from .engine import (FJCertificate, Refutation, full_certify,
                     fj_inequality_direct, fj_inequality_staircase,
                     verify_certificate)
from .expr import (directional_derivative, evaluate, fd_directional,
                   frechet_probe, gradient, parse_expression)
from .problem import Problem, check_feasibility, detect_active_set, load_problem

__version__ = "0.1.0"
