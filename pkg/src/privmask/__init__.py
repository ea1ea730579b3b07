"""Optimal colored-Gaussian privacy masks for linear Gaussian systems.

The package computes the mask power spectrum that minimizes the state
information leakage rate of a masked output under a distortion, leakage,
or output-power constraint, and ships a finite-horizon eigen-channel
oracle, a mask sampler, and end-to-end consistency checks.
"""

from .errors import (
    ConditioningError,
    InfeasibleError,
    InfiniteLeakageError,
    LyapunovError,
    ModelError,
    PrivmaskError,
    UndefinedEntropyError,
)
from .system_model import (
    StateSpaceModel,
    StationaryStatistics,
    load_model,
    stationary_state_covariance,
    stationary_statistics,
    validate_model,
    z_autocovariance,
)
from .spectrum import (
    SpectrumGrid,
    integrate_spectrum,
    state_power_spectrum_logdet,
    z_power_spectrum,
)
from .mask_design import (
    ALL_ACTIVE,
    NONE_ACTIVE,
    ConstraintKind,
    MaskDesign,
    ProblemSpec,
    TradeoffPoint,
    activation_threshold,
    conditional_entropy_rate,
    design_distortion_constrained,
    design_leakage_constrained,
    design_min_output_power,
    design_output_power_constrained,
    iid_leakage,
    leakage_rate,
    mask_spectrum_at,
    solve,
    solve_eta_for_distortion,
    solve_eta_for_leakage,
    total_mask_power,
    tradeoff_curve,
)
from .finite_oracle import (
    OracleResult,
    convergence_report,
    finite_leakage,
    finite_waterfilling,
    oracle_from_eigenvalues,
    toeplitz_z_covariance,
)
from .mask_synth import (
    NoisePath,
    empirical_distortion,
    estimate_periodogram,
    relative_l1_error,
    synthesize_mask,
)
from .validation import (
    CheckResult,
    ValidationReport,
    chain_identity,
    compare_designs,
    determinant_route,
    duality_roundtrip,
    finite_horizon_leakage_analytic,
    mask_autocovariance,
    run_all,
    state_augmented_leakage,
    toeplitz_psd_repair,
)

__version__ = "0.1.0"
