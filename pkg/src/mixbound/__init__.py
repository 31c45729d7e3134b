"""Mixing coefficients, contraction bounds, and concentration certificates
for finite inhomogeneous, hidden, and adaptive Markov chains."""

from .errors import (
    DomainError,
    EnumerationLimitExceeded,
    IndexOutOfRange,
    LengthMismatch,
    MixboundError,
    NonConvergence,
    NormalizationError,
    OptimizationLimitExceeded,
    PreconditionFailed,
    QuadratureFailure,
    SpaceMismatch,
    SpecFormatError,
    SupportMismatch,
    ZeroProbabilityPrefix,
)
from .process_model import (
    AdaptationRule,
    AdaptiveChainSpec,
    ChainSpec,
    Distribution,
    EnumerationLimits,
    FiniteSpace,
    MarkovKernel,
    MMCSpec,
    PathMeasure,
    conditional_law,
    materialize_adaptive,
    materialize_chain,
    materialize_mmc,
    product_space,
)
from .mixing import (
    ContractionProfile,
    MixingMatrix,
    adaptive_profile,
    best_minorization,
    chain_contraction_profile,
    check_minorization,
    contraction_coefficient,
    delta_exact,
    delta_norm,
    eta_exact,
    family_minorization,
    minorization_theta,
    mmc_delta_bound,
    tensorize,
    tv_distance,
)
from .norms import (
    NormReport,
    PathFunction,
    check_psi_domination,
    empirical_frequency_function,
    hamming,
    lipschitz_constant,
    norm_report,
    phi_norm,
    project,
    psi_functional,
    psi_norm,
)
from .concentration import (
    ConcentrationCertificate,
    MartingaleProfile,
    azuma_bound,
    azuma_certificate,
    check_mgale_bound,
    geometric_delta_norm,
    martingale_profile,
    sample_size,
    slln_tail_bound,
)
from .adaptive_sim import (
    AdaptationSchedule,
    AssumptionReport,
    MinorizedFamily,
    SimulationReport,
    build_minorized_family,
    check_assumptions,
    empirical_measure,
    estimate_n0,
    simulate,
    simulate_spec,
    simulate_spec_batch,
    stationary_distribution,
    verify_certificate,
)
from .discretize import (
    ContinuousKernel1D,
    PartitionSpec,
    TraceRow,
    build_kernel,
    coefficient_trace,
    continuous_tensor_bound,
    gaussian_ar_kernel,
    induce_chain,
    induced_xi,
    mixture_minorized_kernel,
    refine,
    tabulated_kernel,
    tabulated_kernel_from_csv,
    trace_mixing_matrix,
    uniform_jitter_kernel,
)

__version__ = "0.1.0"
