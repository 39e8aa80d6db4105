"""Two-period peak-load pricing equilibrium with duration-limited storage."""

from peakstore.model import (
    LinearDemand,
    Period,
    GeneratorTech,
    StorageTech,
    Scenario,
    calibrate_demand,
    gross_surplus,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
    scenario_warnings,
)
from peakstore.program import QuadraticProgram, build_program, objective_value
from peakstore.solver import PrimalDualSolution, SolverError, kkt_residuals, solve
from peakstore.analytics import (
    AssumptionReport,
    CostRecoveryLedger,
    EquilibriumReport,
    PriceDecomposition,
    check_assumptions,
    check_cost_recovery,
    decompose_onpeak_price,
    evaluate_scenario,
    peaker_parity,
    sigma_pattern,
    welfare_report,
)
from peakstore.oracle import Capacities, OracleResult, default_grid, grid_search, inner_dispatch

__version__ = "0.1.0"

__all__ = [
    "LinearDemand",
    "Period",
    "GeneratorTech",
    "StorageTech",
    "Scenario",
    "calibrate_demand",
    "gross_surplus",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "validate_scenario",
    "scenario_warnings",
    "QuadraticProgram",
    "build_program",
    "objective_value",
    "PrimalDualSolution",
    "SolverError",
    "kkt_residuals",
    "solve",
    "AssumptionReport",
    "CostRecoveryLedger",
    "EquilibriumReport",
    "PriceDecomposition",
    "check_assumptions",
    "check_cost_recovery",
    "decompose_onpeak_price",
    "evaluate_scenario",
    "peaker_parity",
    "sigma_pattern",
    "welfare_report",
    "Capacities",
    "OracleResult",
    "default_grid",
    "grid_search",
    "inner_dispatch",
]
