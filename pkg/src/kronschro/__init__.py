"""
Space-time least-squares B-spline solver for the linear Schrödinger equation.

The system matrix is kept as a sum of Kronecker products and solved with
conjugate gradients preconditioned by fast diagonalization in space.
"""
from .assembly import (
    SpaceTimeProblem,
    assemble_galerkin_operator,
    assemble_mass_operator,
    assemble_rhs,
    assemble_system_operator,
    assemble_ultraweak,
    lift_nonhomogeneous,
    univariate_matrix,
)
from .bspline import KnotVector, make_open_knot_vector
from .experiments import (
    condition_table,
    convergence_study,
    error_norms,
    infsup_constant,
    performance_run,
    solve,
    spectral_equivalence_space,
    spectral_equivalence_time,
)
from .fdsolver import fd_apply, fd_setup
from .krylov import SolveReport, pcg
from .problems import PROBLEMS, gaussian_1d, high_mode_1d, traveling_wave, traveling_wave_2d
from .tensorops import KroneckerOperator, kron_apply

__version__ = "0.1.0"
