"""Route a scenario to the solver for its regime."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import closed_form as cf
from .best_response import (
    BestResponseTrace,
    SolverConfig,
    probe_rt_mpm_nonexistence,
    solve_stackelberg_nash,
)
from .core import (
    Behavior,
    EquilibriumOutcome,
    MarketScenario,
    Policy,
    RegimeError,
    SettlementReport,
    settle,
)

COMPETITIVE = {
    Policy.STANDARD: cf.competitive_standard,
    Policy.REAL_TIME_MPM: cf.competitive_rt_mpm,
    Policy.DAY_AHEAD_MPM: cf.competitive_da_mpm,
}


@dataclass
class SolveResult:
    outcome: EquilibriumOutcome
    method: str
    trace: Optional[BestResponseTrace] = None
    settlement: Optional[SettlementReport] = None

    @property
    def exit_code(self) -> int:
        if self.outcome.exists:
            return 0
        if self.trace is not None and self.trace.cap_reached:
            return 3
        return 2

    def to_dict(self, with_trace: bool = False) -> dict:
        out = {
            "method": self.method,
            "outcome": self.outcome.to_dict(),
            "settlement": None if self.settlement is None else self.settlement.to_dict(),
        }
        if self.trace is not None:
            t = self.trace.to_dict()
            if not with_trace:
                t["entries"] = len(t["entries"])
            out["trace"] = t
        return out


def competitive_benchmark(scenario: MarketScenario) -> EquilibriumOutcome:
    return COMPETITIVE[scenario.policy](scenario.with_regime(behavior=Behavior.PRICE_TAKING))


def solve(scenario: MarketScenario, numeric: bool = False,
          config: Optional[SolverConfig] = None) -> SolveResult:
    """Closed form where one applies, best-response iteration otherwise.

    ``numeric`` forces the best-response path for day-ahead MPM Nash
    problems and runs the nonexistence probe for real-time MPM.
    """
    policy, behavior = scenario.policy, scenario.behavior
    trace = None
    if behavior is Behavior.PRICE_TAKING:
        outcome, method = COMPETITIVE[policy](scenario), "closed-form"
    elif policy is Policy.STANDARD:
        if numeric:
            raise RegimeError("no numerical solver for the unmitigated Nash game; drop --numeric")
        outcome, method = cf.nash_standard(scenario), "closed-form"
    elif policy is Policy.REAL_TIME_MPM:
        outcome, method = cf.nash_rt_mpm(scenario), "closed-form"
        if numeric:
            trace, method = probe_rt_mpm_nonexistence(scenario, config), "probe"
    else:
        if scenario.is_homogeneous() and not numeric:
            outcome, method = cf.nash_da_mpm_symmetric(scenario), "closed-form"
        else:
            outcome, trace = solve_stackelberg_nash(scenario, config)
            method = "best-response"

    report = None
    if outcome.exists:
        bench = competitive_benchmark(scenario) if behavior is Behavior.PRICE_ANTICIPATING else None
        report = settle(outcome.allocation, scenario, bench)
    return SolveResult(outcome, method, trace, report)

