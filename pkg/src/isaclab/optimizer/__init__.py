"""Power rules, mixture design and per-subcarrier constellation selection."""

from .bilevel import (DualConfig, DualNonConvergenceWarning, DualState, SubcarrierPlan,
                      bilevel_solve, equal_power_within_blocks_check, exhaustive_oracle,
                      mf_clamped_power, reduced_cost_phi, reduced_cost_phi_rf,
                      rf_clamped_power)
from .flat import (ClassSpec, InfeasibleProblemError, MixturePlan, flat_fading_solve,
                   mf_cost_coefficients, support_size)
from .rules import mf_power_rule, mf_rule_objective, mf_weights, rf_power_rule, rf_rule_objective
from .surrogate import surrogate_sinr
from .waterlevel import water_level

__all__ = [
    "ClassSpec", "DualConfig", "DualNonConvergenceWarning", "DualState",
    "InfeasibleProblemError", "MixturePlan", "SubcarrierPlan", "bilevel_solve",
    "equal_power_within_blocks_check", "exhaustive_oracle", "flat_fading_solve",
    "mf_clamped_power", "mf_cost_coefficients", "mf_power_rule", "mf_rule_objective",
    "mf_weights", "reduced_cost_phi", "reduced_cost_phi_rf", "rf_clamped_power",
    "rf_power_rule", "rf_rule_objective", "support_size", "surrogate_sinr", "water_level",
]
