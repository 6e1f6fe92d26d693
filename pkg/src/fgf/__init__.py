"""Fractional Gaussian fields: kernels, Green's functions, operators, samplers and discrete fields."""

from __future__ import annotations

__version__ = "0.1.0"

from .decompose import (
    RestrictionResult,
    SphericalKernel,
    SplitResult,
    condition_on_complement,
    restrict_variance_check,
    s_harmonicity_residual,
    spherical_average_kernel,
    spherical_coefficient_cov,
    spherical_projection_cov,
)
from .dfgf import (
    LatticeDomain,
    PrecisionMatrix,
    assemble_precision,
    convergence_report,
    dfgf_green,
    sample_dfgf,
    walk_green_estimator,
)
from .errors import (
    DomainError,
    DominanceError,
    FactorizationError,
    FGFError,
    GeometryError,
    HypergeometricError,
    InsufficientData,
    MomentError,
    NoPointwiseKernel,
    PoleError,
    PSDError,
    QuadratureError,
    SingularityError,
    TailError,
)
from .estimators import FractionalLaplacianTransformer, HurstEstimator
from .fracops import (
    Boundary,
    FieldGrid,
    fractional_gradient_energy,
    levy_constant,
    singular_integral_fraclap,
    spectral_fractional_laplacian,
)
from .green import (
    CovMatrix,
    ball_covariance_matrix,
    composed_ball_green,
    fractional_ball_green,
    integer_ball_green,
)
from .kernels import (
    TestFunctionGrid,
    covariance_bilinear,
    fbm_covariance,
    log_residue,
    normalization_constant,
    whole_space_kernel,
)
from .params import FieldSpec, Regime
from .sampler import (
    ExactMode,
    RunConfig,
    SampleEnsemble,
    sample_coupled_family,
    sample_efgf,
    sample_fgf_exact,
    sample_fgf_spectral,
    sample_white_noise,
    structure_function,
)
from .special import hyp2f1
