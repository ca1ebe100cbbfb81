"""Equilibria of two-stage (day-ahead / real-time) electricity markets under
stage-wise market power mitigation."""
from .core import (
    Behavior,
    EquilibriumOutcome,
    MarketScenario,
    Policy,
    SettlementReport,
    StageAllocation,
    Status,
    clear_stage,
    settle,
    solve_social_planner,
)
from .dispatch import SolveResult, solve

__all__ = [
    "Behavior",
    "EquilibriumOutcome",
    "MarketScenario",
    "Policy",
    "SettlementReport",
    "SolveResult",
    "StageAllocation",
    "Status",
    "clear_stage",
    "settle",
    "solve",
    "solve_social_planner",
]
