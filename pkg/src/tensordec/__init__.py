"""CP tensor decomposition toolkit.

Simultaneous-diagonalization recovery for order-3 tensors, an overcomplete
extension through Khatri-Rao flattening, a tensor power method with
whitening, moment-based learners for mixture and hidden Markov models, and
Monte Carlo experiments on the spectra of smoothed random matrices.
"""

from ._version import __version__
from .errors import DegeneracyError, FormatError, PreconditionError, TensordecError
from .jennrich import (
    JennrichConfig,
    RecoveryReport,
    jennrich_decompose,
    match_terms,
    separation_diagnostic,
)
from .matrix_ops import (
    condition_number,
    eig_nonsymmetric,
    leave_one_out,
    pseudoinverse,
    solve_least_squares,
    svd,
)
from .moment_learners import (
    GmmLearnResult,
    GmmParams,
    HmmLearnResult,
    HmmMoments,
    HmmParams,
    MomentEstimate,
    gmm_learn,
    gmm_learn_from_moments,
    gmm_sample,
    gmm_second_moment,
    gmm_statistic_exact,
    gmm_statistic_t3,
    hmm_empirical_moments,
    hmm_exact_moments,
    hmm_learn,
    hmm_learn_from_moments,
    hmm_moment_tensor,
    hmm_population_factors,
    hmm_sample,
    match_columns,
    stationary_distribution,
)
from .overcomplete import FlatteningPlan, default_plan, overcomplete_decompose, unflatten_rank_one
from .power_method import (
    OrthogonalDecomposition,
    PowerConfig,
    WhiteningResult,
    deflate_decompose,
    power_iterate,
    whiten,
)
from .seeding import derive_rng
from .smoothed_lab import (
    KrSigmaResult,
    PerturbationModel,
    PivotBasis,
    PivotBasisL2,
    ProjectionResult,
    build_pivot_basis,
    build_pivot_basis_l2,
    fit_scaling_exponent,
    kr_sigma_experiment,
    perturb_factors,
    perturb_matrix,
    projection_experiment,
    rotation_pair_basis,
)
from .synthetic import (
    direction_separation,
    gmm_orthogonal_params,
    gmm_smoothed_params,
    hmm_random_params,
    random_decomposition,
    random_orthogonal_symmetric,
    smoothed_decomposition,
)
from .tensor_core import (
    CpDecomposition,
    DenseTensor,
    border_rank_fixture,
    contract_two,
    decomposition_from_dict,
    decomposition_to_dict,
    flatten_to_order3,
    frobenius_norm,
    khatri_rao,
    outer_product,
    read_decomposition,
    read_tnsr,
    slice_combination,
    synthesize,
    write_decomposition,
    write_tnsr,
)

__all__ = [
    "__version__",
    "CpDecomposition",
    "DegeneracyError",
    "DenseTensor",
    "FlatteningPlan",
    "FormatError",
    "GmmLearnResult",
    "GmmParams",
    "HmmLearnResult",
    "HmmMoments",
    "HmmParams",
    "JennrichConfig",
    "KrSigmaResult",
    "MomentEstimate",
    "OrthogonalDecomposition",
    "PerturbationModel",
    "PivotBasis",
    "PivotBasisL2",
    "PowerConfig",
    "PreconditionError",
    "ProjectionResult",
    "RecoveryReport",
    "TensordecError",
    "WhiteningResult",
    "border_rank_fixture",
    "build_pivot_basis",
    "build_pivot_basis_l2",
    "condition_number",
    "contract_two",
    "decomposition_from_dict",
    "decomposition_to_dict",
    "default_plan",
    "deflate_decompose",
    "derive_rng",
    "direction_separation",
    "eig_nonsymmetric",
    "fit_scaling_exponent",
    "flatten_to_order3",
    "frobenius_norm",
    "gmm_learn",
    "gmm_learn_from_moments",
    "gmm_orthogonal_params",
    "gmm_sample",
    "gmm_second_moment",
    "gmm_smoothed_params",
    "gmm_statistic_exact",
    "gmm_statistic_t3",
    "hmm_empirical_moments",
    "hmm_exact_moments",
    "hmm_learn",
    "hmm_learn_from_moments",
    "hmm_moment_tensor",
    "hmm_population_factors",
    "hmm_random_params",
    "hmm_sample",
    "jennrich_decompose",
    "khatri_rao",
    "kr_sigma_experiment",
    "leave_one_out",
    "match_columns",
    "match_terms",
    "outer_product",
    "overcomplete_decompose",
    "perturb_factors",
    "perturb_matrix",
    "power_iterate",
    "projection_experiment",
    "pseudoinverse",
    "random_decomposition",
    "random_orthogonal_symmetric",
    "read_decomposition",
    "read_tnsr",
    "rotation_pair_basis",
    "separation_diagnostic",
    "slice_combination",
    "smoothed_decomposition",
    "solve_least_squares",
    "stationary_distribution",
    "svd",
    "synthesize",
    "unflatten_rank_one",
    "whiten",
    "write_decomposition",
    "write_tnsr",
]
