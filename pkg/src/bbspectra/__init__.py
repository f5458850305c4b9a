"""Principal eigenvalues of bang-bang weighted Dirichlet problems."""

from .grid import GridDomain, ball_domain
from .modes import ModeTable, coercivity_constant, mode_table, predicted_second_derivative
from .nearly_spherical import (
    PerturbationSpec,
    asymmetry_ratio,
    fd_derivatives_along_path,
    normalize_volume_barycenter,
)
from .optimizer import DomainSpec, rearrangement_optimize, run_sweep
from .radial import RadialProfile, lambda_finite_ball, solve_limit_eigen
from .spectral import (
    BangBangWeight,
    EigenSolution,
    NonConvergenceError,
    assemble_stiffness,
    assemble_weight_mass,
    principal_eigenvalue,
    solve_spd,
)

__version__ = "0.1.0"
