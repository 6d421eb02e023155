"""Spectral toolkit for matrix Sturm-Liouville operators on (0, pi).

Forward map from a potential and boundary matrices to eigenvalues and weight
matrices, reconstruction from spectral data by the method of spectral
mappings, and numerical checks of the conditions that characterize spectral
data.
"""

from .conditions import (
    ConditionReport,
    ConditionResult,
    check_A,
    check_C,
    check_R,
    check_S,
    check_structural,
    run_checks,
)
from .config import DEFAULT, Tolerances
from .errors import (
    AssumptionOneViolated,
    ContourCollision,
    CountMismatch,
    DimensionMismatch,
    GridMismatch,
    InvalidProblem,
    MainEquationSingular,
    MatSpecError,
    NearSingular,
    NoConvergence,
    NonFiniteState,
    ParseError,
    TruncationTooLarge,
    UnsupportedVersion,
)
from .forward import (
    SpectralData,
    SpectralDatum,
    compute_omega,
    diagonalize_omega,
    forward_spectral_data,
    group_partition,
    group_sums,
    locate_eigenvalues,
    weight_matrices,
)
from .inverse import (
    MainEquationSystem,
    OmegaTailGrowth,
    ReconstructionResult,
    TailTooLarge,
    build_main_system,
    reconstruct,
    solve_main_equation,
    xi_sequence,
)
from .model import ModelProblem, model_d_kernel, model_dphi, model_phi, model_phistar, model_spectral_data
from .ode import (
    BoundaryProblem,
    MatrixSolutionSample,
    SpectralScalars,
    boundary_form_U,
    boundary_form_V,
    char_det,
    d_kernel,
    integrate_solutions,
    spectral_scalars,
    sqrt_branch,
    weyl_matrix,
)

__version__ = "0.1.0"
