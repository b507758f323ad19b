"""Porous medium equation: forward P1 solver and recovery of the exponent gamma."""

__version__ = "0.1.0"

from .fem import (
    PoissonSolver,
    ScalarField,
    SolverError,
    assemble_lumped_mass,
    assemble_stiffness,
    field_norm,
    solve_dirichlet_system,
    solve_poisson,
)
from .forward import ForwardConfig, ForwardResult, advance_step, initial_field, solve_forward
from .inversion import (
    EndpointMinimumError,
    InversionConfig,
    InversionReport,
    objective_field,
    objective_norm,
    recover_gamma,
    sample_curve,
)
from .mesh import Mesh, build_unit_square_mesh, interior_nodes
from .profile import ProfileResult, separation_solution, solve_profile
