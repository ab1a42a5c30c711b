"""Spectral-Galerkin solver for a plant-water system with nonlocal seed dispersal.

The model couples plant biomass u (dispersing through a convolution
operator with kernel gamma, subject to a zero volume constraint outside
the interval) to soil water w (diffusing and advecting downslope, zero
at the endpoints).  The solver integrates an augmented four-field system
(u, w, v, z), where v and z track the spatial derivatives of u and w,
and ships a monitor that checks the closed-form energy inequalities and
smallness thresholds along every computed trajectory.
"""

from .kernels import KernelSpec, KernelReport, eval_gamma, eval_gamma_dz, kernel_report
from .basis import (
    BasisKind,
    BasisSet,
    QuadratureRule,
    default_rule,
    eval_basis,
    basis_matrix,
    differentiation_matrix,
    companion_kind,
    gram_matrix,
    project,
    synthesize,
)
from .operators import (
    AssembledOperators,
    apply_K,
    apply_J,
    assemble_B,
    assemble_J,
    assemble_G,
    assemble_M,
    assemble_operators,
    coercivity_theta,
)
from .nonlinear import CutoffSpec, ReactionParams, sigma, sigma_prime, P1, P2, Q1, Q2, project_nonlinear
from .simulate import (
    ModelParams,
    GalerkinState,
    EstimateConstants,
    Discretization,
    Trajectory,
    gaussian_bump,
    single_mode,
    csv_profile,
    zero_profile,
    initial_state,
    rhs,
    default_dt,
    integrate,
    estimate_constants,
    admissible_horizon,
    admissible_scale,
)
from .monitor import (
    CheckRecord,
    VerificationReport,
    norms,
    verify_energy,
    verify_derivative_identity,
    verify_cutoff_inactive,
    verify_weak_residual,
)
from .config import RunConfig, ConfigError, parse_config, config_from_dict

__version__ = "0.1.0"
