"""Lattice toolkit for discrete singular and oscillatory convolution operators.

The package bundles exact polynomial-phase bookkeeping, Calderon-Zygmund
kernels with dyadic windows, reference operator applications, multiplier
evaluation, rational-approximation schedules with their Gauss-sum
factorizations, and operator-norm estimation, plus a CSV experiment harness
(`radon-lab`).
"""

from .backend import backend_name
from .diophantine import (
    Leaf,
    MinorBucket,
    RandomShiftSampler,
    RationalApprox,
    ResidualReport,
    Schedule,
    SeparationVerdict,
    build_factorization,
    build_schedule,
    classify_index,
    default_eps,
    dirichlet_approx,
    dyadic_separation_check,
    error_kernel_norms,
    factored_apply,
    factorization_residual,
    gauss_operator_apply,
    leaf_constraint_report,
    leaf_operator_apply,
    level_scale,
    schedule_reconstruction_residual,
    shifted_ball_report,
    single_fraction_leaf,
    tnatural_apply,
    zero_shift,
)
from .kernels import (
    CZKernel,
    DyadicPiece,
    WindowedKernelSum,
    cz_verify,
    dyadic_decompose,
    odd_power_kernel,
    riesz_like_kernel,
)
from .lattice import (
    Ball,
    LatticeFunction,
    lp_norm,
    residue_split,
    step_embedding_norms,
)
from .multipliers import (
    MultiplierSpec,
    circulant_eigen_check,
    descent_identity_check,
    eval_multiplier,
    periodic_plancherel_check,
    periodicity_check,
    quasi_shift_check,
    universal_spec,
)
from .normlab import (
    NormEstimate,
    holder_conjugate,
    modulated_toeplitz_norm2,
    norm2_power,
    norm_bracket,
    norm_exact,
    norm_p_lower,
    norm_p_upper,
    toeplitz_norm2,
)
from .operators import (
    MatrixRealization,
    OperatorSpec,
    expsum_apply,
    materialize,
    modulate,
    modulation_conjugation_check,
    oscillatory_apply,
    quasi_radon_apply,
    radon_apply,
    twisted_radon_apply,
    weight_certificate,
)
from .polyalg import (
    BilinearPhase,
    CoefficientVector,
    DescentMap,
    IntPolyMap,
    descent_map,
    frac_part,
    frac_part_exact,
    generic_poly_map,
    index_set,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BilinearPhase",
    "CZKernel",
    "CoefficientVector",
    "DescentMap",
    "DyadicPiece",
    "IntPolyMap",
    "LatticeFunction",
    "Leaf",
    "MatrixRealization",
    "MinorBucket",
    "MultiplierSpec",
    "NormEstimate",
    "OperatorSpec",
    "RandomShiftSampler",
    "RationalApprox",
    "ResidualReport",
    "Schedule",
    "SeparationVerdict",
    "WindowedKernelSum",
    "backend_name",
    "build_factorization",
    "build_schedule",
    "circulant_eigen_check",
    "classify_index",
    "cz_verify",
    "default_eps",
    "descent_identity_check",
    "descent_map",
    "dirichlet_approx",
    "dyadic_decompose",
    "dyadic_separation_check",
    "error_kernel_norms",
    "eval_multiplier",
    "expsum_apply",
    "factored_apply",
    "factorization_residual",
    "frac_part",
    "frac_part_exact",
    "gauss_operator_apply",
    "generic_poly_map",
    "holder_conjugate",
    "index_set",
    "leaf_constraint_report",
    "leaf_operator_apply",
    "level_scale",
    "lp_norm",
    "materialize",
    "modulate",
    "modulated_toeplitz_norm2",
    "modulation_conjugation_check",
    "norm2_power",
    "norm_bracket",
    "norm_exact",
    "norm_p_lower",
    "norm_p_upper",
    "odd_power_kernel",
    "oscillatory_apply",
    "periodic_plancherel_check",
    "periodicity_check",
    "quasi_radon_apply",
    "quasi_shift_check",
    "radon_apply",
    "residue_split",
    "riesz_like_kernel",
    "schedule_reconstruction_residual",
    "shifted_ball_report",
    "single_fraction_leaf",
    "step_embedding_norms",
    "tnatural_apply",
    "toeplitz_norm2",
    "twisted_radon_apply",
    "universal_spec",
    "weight_certificate",
    "zero_shift",
]
