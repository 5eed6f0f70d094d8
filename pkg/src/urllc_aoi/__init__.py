"""Age of information of a short-packet decode-and-forward relay link."""

__all__ = [
    "ConfigError",
    "LinkBudget",
    "SystemConfig",
    "build_link_budgets",
    "dbm_to_watts",
    "path_gain",
    "watts_to_dbm",
    "ApproxParams",
    "ErrorReport",
    "QuadratureError",
    "approx_params",
    "avg_error_closed_form",
    "avg_error_quadrature",
    "capacity",
    "conditional_error",
    "dispersion",
    "overall_df_error",
    "q_function",
    "system_error",
    "AoiEstimate",
    "InstabilityError",
    "ServiceMoments",
    "aaoi_analytic",
    "aaoi_for_eps",
    "pk_mean_wait",
    "retransmission_pmf",
    "service_moments",
    "SAMPLED_FADING",
    "FixedEps",
    "SimResult",
    "UpdateRecord",
    "fixed_eps",
    "integrate_sawtooth",
    "replicate",
    "simulate",
    "validate_queue",
    "SweepResult",
    "SweepSpec",
    "allocation_study",
    "find_optimum",
    "sweep",
]

__version__ = "0.1.0"

from .link_model import ConfigError, LinkBudget, SystemConfig, build_link_budgets, dbm_to_watts, path_gain, watts_to_dbm
from .finite_blocklength import (
    ApproxParams,
    ErrorReport,
    QuadratureError,
    approx_params,
    avg_error_closed_form,
    avg_error_quadrature,
    capacity,
    conditional_error,
    dispersion,
    overall_df_error,
    q_function,
    system_error,
)
from .aoi_analytics import (
    AoiEstimate,
    InstabilityError,
    ServiceMoments,
    aaoi_analytic,
    aaoi_for_eps,
    pk_mean_wait,
    retransmission_pmf,
    service_moments,
)
from .aoi_simulator import (
    SAMPLED_FADING,
    FixedEps,
    SimResult,
    UpdateRecord,
    fixed_eps,
    integrate_sawtooth,
    replicate,
    simulate,
    validate_queue,
)
from .experiments import SweepResult, SweepSpec, allocation_study, find_optimum, sweep
