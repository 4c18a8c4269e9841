"""Least-cost sizing of islanded PV / wind / battery microgrids."""
from .catalog import (
    Catalog,
    ComponentKind,
    ComponentSpec,
    ProjectParams,
    UnitEconomics,
    capital_recovery_factor,
    catalog_economics,
    default_catalog,
    lcoe,
    load_config,
    total_npc,
    unit_economics,
)
from .dispatch import DispatchResult, Sizing, check_feasible, dp_oracle, simulate_greedy
from .estimator import AvailabilityTransformer, MicrogridPlanner
from .exceptions import (
    ConfigError,
    InfeasiblePlanError,
    MicroplanError,
    ResourceLimitError,
    ScenarioError,
)
from .milp import build_model, read_lp, validate_solution, write_lp
from .planner import (
    PlanSolution,
    SearchSpace,
    autonomy_hours,
    brute_force_plan,
    evaluate,
    plan_autonomy,
    plan_optimal,
)
from .resources import (
    AvailabilitySeries,
    PowerCurve,
    ScenarioSeries,
    availability,
    default_power_curve,
    read_scenario,
    synthesize_load,
    synthesize_weather,
    write_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "DispatchResult",
    "Sizing",
    "check_feasible",
    "dp_oracle",
    "simulate_greedy",
    "AvailabilityTransformer",
    "MicrogridPlanner",
    "build_model",
    "read_lp",
    "validate_solution",
    "write_lp",
    "Catalog",
    "ComponentKind",
    "ComponentSpec",
    "ProjectParams",
    "UnitEconomics",
    "capital_recovery_factor",
    "catalog_economics",
    "default_catalog",
    "lcoe",
    "load_config",
    "total_npc",
    "unit_economics",
    "ConfigError",
    "InfeasiblePlanError",
    "MicroplanError",
    "ResourceLimitError",
    "ScenarioError",
    "PlanSolution",
    "SearchSpace",
    "autonomy_hours",
    "brute_force_plan",
    "evaluate",
    "plan_autonomy",
    "plan_optimal",
    "AvailabilitySeries",
    "PowerCurve",
    "ScenarioSeries",
    "availability",
    "default_power_curve",
    "read_scenario",
    "synthesize_load",
    "synthesize_weather",
    "write_scenario",
]
