"""Sensing mutual information of pilot+data waveforms.

Closed-form evaluation via a scalar fixed point, Monte-Carlo validation,
implicit-differentiation gradients, and ADMM precoder design under power
and communication-rate constraints.
"""

from .gradient import GradCoefficients, SmiGradient, finite_diff_check, grad_coefficients, smi_gradient
from .optimizer import (
    AdmmState,
    InfeasibleRateError,
    ParetoRecord,
    admm_solve,
    dual_update,
    extract_precoder,
    omega_update,
    sensing_oriented,
    theta_update,
    time_sharing,
    waterfilling,
)
from .scenario import (
    ConfigError,
    ScenarioConfig,
    beam_gain,
    dbm_to_watts,
    effective_snr,
    make_comm_channel,
    make_pilot,
    make_steering,
    parse_config,
)
from .smi import (
    ConvergenceError,
    FixedPointSolution,
    SmiDeterministic,
    SmiEstimate,
    comm_rate,
    smi_deterministic,
    smi_deterministic_scalar,
    smi_monte_carlo,
    smi_sample_full,
    smi_sample_reduced,
    solve_fixed_point,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmState",
    "ConfigError",
    "ConvergenceError",
    "FixedPointSolution",
    "GradCoefficients",
    "InfeasibleRateError",
    "ParetoRecord",
    "ScenarioConfig",
    "SmiDeterministic",
    "SmiEstimate",
    "SmiGradient",
    "admm_solve",
    "beam_gain",
    "comm_rate",
    "dbm_to_watts",
    "dual_update",
    "effective_snr",
    "extract_precoder",
    "finite_diff_check",
    "grad_coefficients",
    "make_comm_channel",
    "make_pilot",
    "make_steering",
    "omega_update",
    "parse_config",
    "sensing_oriented",
    "smi_deterministic",
    "smi_deterministic_scalar",
    "smi_gradient",
    "smi_monte_carlo",
    "smi_sample_full",
    "smi_sample_reduced",
    "solve_fixed_point",
    "theta_update",
    "time_sharing",
    "waterfilling",
]
