"""Unilateral-deviation audit of equilibrium outcomes.

Each participant moves its own decision variable over a grid while all
other decisions stay fixed.  Generators deviate in their real-time slope
(the real-time stage re-clears).  Loads deviate in their day-ahead quantity;
the day-ahead stage re-clears on the submitted day-ahead slopes and the
generators' real-time game is re-solved, since loads move first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .best_response import (
    NoInnerEquilibriumError,
    NonConvergenceError,
    SingularResponseError,
    SolverConfig,
    realtime_follower_nash,
)
from .core import EquilibriumOutcome, MarketScenario, Policy, RegimeError


@dataclass(frozen=True)
class DeviationResult:
    participant: str
    index: int
    variable: str
    base: float
    best_gain: float
    best_value: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _generator_rows(alloc, scenario, n_points, span):
    c = scenario.c
    theta_r = np.asarray(alloc.theta_r)
    g_d = np.asarray(alloc.g_d)
    D = alloc.total_d_r
    lam_d = alloc.lambda_d
    rows = []
    for j in range(scenario.G):
        s = theta_r.sum() - theta_r[j]
        t = theta_r[j] * (1 + np.linspace(-span, span, n_points))
        t = t[t + s > 0]
        lam_r = D / (t + s)
        g_r = t * lam_r
        profit = lam_d * g_d[j] + lam_r * g_r - 0.5 * c[j] * (g_d[j] + g_r) ** 2
        base = lam_d * g_d[j] + alloc.lambda_r * alloc.g_r[j] - 0.5 * c[j] * (g_d[j] + alloc.g_r[j]) ** 2
        gain = (profit - base) / max(abs(base), 1e-300)
        k = int(np.argmax(gain))
        rows.append(DeviationResult("generator", j, "theta_r", float(base), max(float(gain[k]), 0.0),
                                    float(t[k])))
    return rows


def _load_rows(alloc, scenario, n_points, span, config):
    c = scenario.c
    theta_d = np.asarray(alloc.theta_d)
    Td = theta_d.sum()
    d = scenario.d
    x_star = np.asarray(alloc.d_d)
    rows = []
    for l in range(scenario.L):
        o = x_star.sum() - x_star[l]
        d_l = float(scenario.demands[l])
        base = alloc.lambda_d * x_star[l] + alloc.lambda_r * (d_l - x_star[l])
        grid = x_star[l] + np.linspace(-span, span, n_points) * d
        # walk outward from the equilibrium point so warm starts stay close
        order = np.argsort(np.abs(grid - x_star[l]), kind="stable")
        warm = {1: list(alloc.theta_r), -1: list(alloc.theta_r)}
        prev_D = {1: alloc.total_d_r, -1: alloc.total_d_r}
        best, best_x = 0.0, float(x_star[l])
        for x in grid[order]:
            D = d - x - o
            if not D > 0:
                continue
            side = 1 if x >= x_star[l] else -1
            lam_d = (x + o) / Td
            theta0 = [t * D / prev_D[side] for t in warm[side]] if prev_D[side] > 0 else None
            try:
                res = realtime_follower_nash(theta_d * lam_d, D, c, config, theta0=theta0)
            except (NoInnerEquilibriumError, NonConvergenceError, SingularResponseError):
                continue
            warm[side], prev_D[side] = list(res.theta_r), D
            pay = lam_d * x + res.lambda_r * (d_l - x)
            gain = (base - pay) / max(abs(base), 1e-300)
            if gain > best:
                best, best_x = gain, float(x)
        rows.append(DeviationResult("load", l, "d_d", float(base), best, best_x))
    return rows


def deviation_audit(outcome: EquilibriumOutcome, scenario: MarketScenario, n_points: int = 1000,
                    span: float = 0.25, config: Optional[SolverConfig] = None) -> list[DeviationResult]:
    """Largest relative improvement each participant finds on its deviation grid.

    Generator slopes are scaled by ``1 + u``, load quantities shifted by
    ``u * d``, with ``u`` spanning ``[-span, span]``.  Applies to the
    day-ahead MPM market (closed-form or numerical outcomes) and to the
    unmitigated market's Nash outcome; in the latter, generators' day-ahead
    slopes are not audited.
    """
    if outcome.allocation is None:
        raise ValueError("outcome carries no allocation to audit")
    if scenario.policy is Policy.REAL_TIME_MPM:
        raise RegimeError("real-time MPM outcomes have no real-time bids to audit")
    config = config or SolverConfig()
    alloc = outcome.allocation
    if alloc.total_d_r == 0 or not math.isfinite(alloc.lambda_r):
        raise ValueError("audit needs positive real-time demand")
    return (_generator_rows(alloc, scenario, n_points, span)
            + _load_rows(alloc, scenario, n_points, span, config))


def max_gain(rows: list[DeviationResult]) -> float:
    return max(r.best_gain for r in rows)
