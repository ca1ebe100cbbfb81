"""Closed-form competitive and Nash equilibria for every market regime.

Nash constructors assume identical generators; heterogeneous instances of
the day-ahead MPM market go through :mod:`twostage_mpm.best_response`.
"""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .core import (
    Behavior,
    EquilibriumOutcome,
    ExistenceCondition,
    MarketError,
    MarketScenario,
    Policy,
    RegimeError,
    StageAllocation,
    Status,
)


class ConditionViolatedError(MarketError, ValueError):
    pass


class TableValues(NamedTuple):
    ce_profit: float
    ce_payment: float
    ne_profit: Optional[float]
    ne_payment: Optional[float]


def _require(scenario: MarketScenario, policy: Policy, behavior: Behavior) -> None:
    if scenario.policy is not policy or scenario.behavior is not behavior:
        raise RegimeError(
            f"expected {policy.value}/{behavior.value} scenario, got "
            f"{scenario.policy.value}/{scenario.behavior.value}")


def _require_homogeneous(scenario: MarketScenario, with_eps: bool) -> tuple[float, float]:
    c = scenario.c
    if not np.all(np.abs(c - c[0]) <= 1e-9 * c[0]):
        raise RegimeError("closed form requires identical cost coefficients; "
                          "use the best-response solver for heterogeneous generators")
    if with_eps and not scenario.is_homogeneous():
        raise RegimeError("closed form requires a common estimation error; "
                          "use the best-response solver for heterogeneous generators")
    return float(c[0]), float(scenario.eps[0])


def min_generators_condition(G: int) -> ExistenceCondition:
    return ExistenceCondition("MinGenerators", float(G), 3.0, G >= 3)


def load_count_condition(G: int, L: int, c: float, eps: float) -> ExistenceCondition:
    """Existence bound 1/L > (c - eps(G-2)) / ((c + eps)(G-2)) for G >= 3.

    The comparison is done in exact rational arithmetic on the float inputs
    so that boundary cases (equality) are classified without rounding.
    """
    if G < 3:
        raise ValueError("load-count bound is defined for G >= 3")
    fc, fe = Fraction(c), Fraction(eps)
    rhs = (fc - fe * (G - 2)) / ((fc + fe) * (G - 2))
    lhs = Fraction(1, L)
    return ExistenceCondition("LoadCountBound", float(lhs), float(rhs), lhs > rhs)


def _allocation(theta_d, theta_r, d_d, scenario, lam_d, lam_r) -> StageAllocation:
    theta_d = np.asarray(theta_d, dtype=float)
    theta_r = np.asarray(theta_r, dtype=float)
    d_d = np.asarray(d_d, dtype=float)
    return StageAllocation(
        theta_d=theta_d,
        theta_r=theta_r,
        g_d=theta_d * lam_d,
        g_r=theta_r * lam_r,
        d_d=d_d,
        d_r=scenario.demands - d_d,
        lambda_d=lam_d,
        lambda_r=lam_r,
    )


def competitive_standard(scenario: MarketScenario) -> EquilibriumOutcome:
    """Price-taking equilibrium of the unmitigated market.

    Both stages clear at d / sum(1/c).  Every split of each generator's
    slope 1/c across the stages, and every per-load stage split, is an
    equilibrium; the representative returned keeps everything day-ahead.
    """
    _require(scenario, Policy.STANDARD, Behavior.PRICE_TAKING)
    inv_c = 1.0 / scenario.c
    lam = scenario.d / inv_c.sum()
    alloc = _allocation(inv_c, np.zeros(scenario.G), scenario.demands, scenario, lam, lam)
    return EquilibriumOutcome(
        alloc, Status.NON_UNIQUE_FAMILY,
        detail="equal stage prices; competitive dispatch solves the planner problem",
        family="theta_d_j + theta_r_j = 1/c_j with both >= 0; any per-load split d_d_l + d_r_l = d_l",
    )


def nash_standard(scenario: MarketScenario) -> EquilibriumOutcome:
    """Symmetric Nash equilibrium of the unmitigated market (G >= 3)."""
    _require(scenario, Policy.STANDARD, Behavior.PRICE_ANTICIPATING)
    c, _ = _require_homogeneous(scenario, with_eps=False)
    G, L, d = scenario.G, scenario.L, scenario.d
    cond = min_generators_condition(G)
    if not cond.satisfied:
        return EquilibriumOutcome(
            None, Status.CONDITION_VIOLATED,
            detail=f"symmetric Nash equilibrium needs at least three generators (G={G})",
            condition=cond)

    k = L * (G - 1)
    theta_d = (k + 1) / k * (G - 2) / (G - 1) / c
    theta_r = 1.0 / (L + 1) * (G - 2) ** 2 / (G - 1) ** 2 / c
    dl_d = (k + 1) / (L * (L + 1) * (G - 1)) * d
    lam_r = (G - 1) / (G - 2) * c / G * d
    lam_d = L / (L + 1) * lam_r
    alloc = _allocation(np.full(G, theta_d), np.full(G, theta_r), np.full(L, dl_d),
                        scenario, lam_d, lam_r)
    return EquilibriumOutcome(alloc, Status.UNIQUE, detail="symmetric Nash equilibrium", condition=cond)


def competitive_rt_mpm(scenario: MarketScenario) -> EquilibriumOutcome:
    """Price-taking equilibrium when real-time bids are replaced by default bids.

    Prices equal d / sum(1/(c+eps)) in both stages; dispatch follows the
    estimated costs, so it is efficient only when every eps is zero.
    """
    _require(scenario, Policy.REAL_TIME_MPM, Behavior.PRICE_TAKING)
    inv_ce = 1.0 / (scenario.c + scenario.eps)
    lam = scenario.d / inv_ce.sum()
    alloc = _allocation(inv_ce, np.zeros(scenario.G), scenario.demands, scenario, lam, lam)
    return EquilibriumOutcome(
        alloc, Status.NON_UNIQUE_FAMILY,
        detail="equal stage prices; total dispatch follows estimated costs",
        family="any theta_d_j >= 0 with real-time default dispatch completing g_j; "
               "any per-load split d_d_l + d_r_l = d_l",
    )


def nash_rt_mpm(scenario: MarketScenario) -> EquilibriumOutcome:
    """Price-anticipating market with real-time MPM: no equilibrium exists."""
    _require(scenario, Policy.REAL_TIME_MPM, Behavior.PRICE_ANTICIPATING)
    if scenario.G == 1:
        detail = ("one generator: it bids arbitrarily small day-ahead slopes, loads follow with "
                  "vanishing day-ahead demand, and at the all-real-time point a load gains by "
                  "moving demand day-ahead where the zero-supply price is zero")
    else:
        detail = ("day-ahead demand and slopes contract to zero under mutual best responses; at "
                  "the zero point the day-ahead price clears at zero for any positive demand, so "
                  "loads deviate back into day-ahead and generators respond again")
    return EquilibriumOutcome(None, Status.NO_EQUILIBRIUM, detail=detail)


def competitive_da_mpm(scenario: MarketScenario) -> EquilibriumOutcome:
    """Price-taking equilibrium when day-ahead bids are replaced by default bids.

    Aggregate quantities and prices are unique and the total dispatch is
    efficient for any eps >= 0; only the per-load day-ahead split is free
    (the representative splits in proportion to load size).
    """
    _require(scenario, Policy.DAY_AHEAD_MPM, Behavior.PRICE_TAKING)
    c, eps, d = scenario.c, scenario.eps, scenario.d
    inv_c = 1.0 / c
    inv_ce = 1.0 / (c + eps)
    lam = d / inv_c.sum()
    dd_total = inv_ce.sum() / inv_c.sum() * d
    theta_r = eps * inv_c / (c + eps)
    d_d = scenario.demands / d * dd_total
    alloc = _allocation(inv_ce, theta_r, d_d, scenario, lam, lam)
    return EquilibriumOutcome(
        alloc, Status.NON_UNIQUE_FAMILY,
        detail="unique prices and dispatch; efficient despite estimation error",
        family="any per-load day-ahead split with sum d_d_l = d^d",
    )


def nash_da_mpm_symmetric(scenario: MarketScenario) -> EquilibriumOutcome:
    """Symmetric leader-follower equilibrium of the day-ahead MPM market."""
    _require(scenario, Policy.DAY_AHEAD_MPM, Behavior.PRICE_ANTICIPATING)
    c, eps = _require_homogeneous(scenario, with_eps=True)
    G, L, d = scenario.G, scenario.L, scenario.d
    if G < 3:
        return EquilibriumOutcome(
            None, Status.CONDITION_VIOLATED,
            detail=f"fewer than three generators (G={G}): followers bid arbitrarily small slopes",
            condition=min_generators_condition(G))
    cond = load_count_condition(G, L, c, eps)
    if not cond.satisfied:
        if cond.lhs == cond.rhs:
            why = ("boundary case: real-time demand would be zero and loads gain by moving "
                   "demand into real time")
        else:
            why = ("real-time demand would be negative; the symmetric turning point minimizes "
                   "generator profit")
        return EquilibriumOutcome(
            None, Status.NO_EQUILIBRIUM,
            detail=f"no symmetric equilibrium: 1/L = {cond.lhs:.6g} <= {cond.rhs:.6g}; {why}",
            condition=cond)

    kappa = c / (c + eps)
    ratio = (G - 1) / (G - 2)
    dl_d = kappa / (L + 1) * ratio * d
    theta_r = ((G - 2) / (G - 1) - kappa * L / (L + 1)) / c
    lam_r = ratio * c / G * d
    lam_d = L / (L + 1) * lam_r
    theta_d = np.full(G, 1.0 / (c + eps))
    alloc = _allocation(theta_d, np.full(G, theta_r), np.full(L, dl_d), scenario, lam_d, lam_r)
    return EquilibriumOutcome(alloc, Status.UNIQUE, detail="symmetric Nash equilibrium", condition=cond)


def aggregate_tables(scenario: MarketScenario) -> TableValues:
    """Aggregate generator profit and load payment at CE and NE.

    Standard scenarios use the unmitigated-market expressions, DayAheadMPM
    scenarios the mitigated ones.  NE entries are None when the symmetric
    equilibrium does not exist.
    """
    if scenario.policy is Policy.STANDARD:
        c, _ = _require_homogeneous(scenario, with_eps=False)
    elif scenario.policy is Policy.DAY_AHEAD_MPM:
        c, eps = _require_homogeneous(scenario, with_eps=True)
    else:
        raise RegimeError(f"no aggregate table for {scenario.policy.value}")
    G, L, d = scenario.G, scenario.L, scenario.d
    ce = c / G * d * d
    ne_profit = ne_payment = None
    if scenario.policy is Policy.STANDARD:
        if G >= 3:
            k = L * (G - 1) + 1
            ne_profit = 0.5 * ce * (G / (G - 2) - 2 * k / ((L + 1) ** 2 * (G - 2)))
            ne_payment = ce * ((G - 1) / (G - 2) - k / ((L + 1) ** 2 * (G - 2)))
    elif G >= 3 and load_count_condition(G, L, c, eps).satisfied:
        kappa = c / (c + eps)
        q = kappa * (G - 1) ** 2 / (G - 2) ** 2 * L / (L + 1) ** 2
        ne_profit = 0.5 * ce * (G / (G - 2) - 2 * q)
        ne_payment = ce * ((G - 1) / (G - 2) - q)
    return TableValues(0.5 * ce, ce, ne_profit, ne_payment)


def normalized_ne_difference(G: int, L: int, c: float, eps: float, check: bool = True) -> float:
    """Normalized NE aggregate profit, mitigated minus unmitigated market.

    Both profits are divided by the common CE profit.  The payment
    difference is exactly half of this value because the CE payment is
    twice the CE profit while the raw differences coincide.  With
    ``check=False`` the expression is evaluated even where the mitigated
    equilibrium does not exist (G >= 3 still required).
    """
    if G < 3 or (check and not load_count_condition(G, L, c, eps).satisfied):
        raise ConditionViolatedError(
            f"symmetric day-ahead MPM equilibrium does not exist for G={G}, L={L}, c={c}, eps={eps}")
    share = eps / (c + eps)
    bracket = 1.0 - L / (G - 2) - L + share * L * (G - 1) ** 2 / (G - 2)
    return 2.0 / (L + 1) ** 2 / (G - 2) * bracket
