"""Domain types, stage clearing and settlement for the two-stage market."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

REL_TOL = 1e-9
ABS_TOL = 1e-12


class MarketError(Exception):
    """Base class for all errors raised by the engine."""


class DegenerateClearingError(MarketError, ValueError):
    pass


class InconsistentAllocationError(MarketError, ValueError):
    pass


class RegimeError(MarketError, ValueError):
    """Scenario regime or participant structure not handled by the called solver."""


class Policy(str, Enum):
    STANDARD = "Standard"
    REAL_TIME_MPM = "RealTimeMPM"
    DAY_AHEAD_MPM = "DayAheadMPM"


class Behavior(str, Enum):
    PRICE_TAKING = "PriceTaking"
    PRICE_ANTICIPATING = "PriceAnticipating"


class Status(str, Enum):
    UNIQUE = "Unique"
    NON_UNIQUE_FAMILY = "NonUniqueFamily"
    NO_EQUILIBRIUM = "NoEquilibrium"
    CONDITION_VIOLATED = "ConditionViolated"


class ClearingRule(str, Enum):
    BALANCE = "balance"
    SAME_PRICE = "rule1"
    ZERO_PRICE = "rule2"


@dataclass(frozen=True)
class GeneratorParams:
    c: float
    eps: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"cost coefficient must be finite and positive, got {self.c!r}")
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"estimation error must be finite and non-negative, got {self.eps!r}")


@dataclass(frozen=True)
class LoadParams:
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d > 0):
            raise ValueError(f"load demand must be finite and positive, got {self.d!r}")


@dataclass(frozen=True)
class MarketScenario:
    generators: tuple[GeneratorParams, ...]
    loads: tuple[LoadParams, ...]
    policy: Policy = Policy.STANDARD
    behavior: Behavior = Behavior.PRICE_TAKING

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "policy", Policy(self.policy))
        object.__setattr__(self, "behavior", Behavior(self.behavior))
        if not self.generators:
            raise ValueError("scenario needs at least one generator")
        if not self.loads:
            raise ValueError("scenario needs at least one load")

    @classmethod
    def build(cls, c, d, eps=0.0, policy=Policy.STANDARD, behavior=Behavior.PRICE_TAKING):
        """Convenience constructor from plain sequences; scalars broadcast."""
        c_arr = np.atleast_1d(np.asarray(c, dtype=float))
        eps_arr = np.broadcast_to(np.asarray(eps, dtype=float), c_arr.shape)
        d_arr = np.atleast_1d(np.asarray(d, dtype=float))
        return cls(
            tuple(GeneratorParams(float(ci), float(ei)) for ci, ei in zip(c_arr, eps_arr)),
            tuple(LoadParams(float(di)) for di in d_arr),
            policy,
            behavior,
        )

    @classmethod
    def homogeneous(cls, G, L, c=1.0, eps=0.0, d=1.0, policy=Policy.STANDARD,
                    behavior=Behavior.PRICE_TAKING):
        """G identical generators and L loads sharing total demand ``d`` equally."""
        return cls.build([c] * G, [d / L] * L, eps, policy, behavior)

    def with_regime(self, policy=None, behavior=None) -> "MarketScenario":
        return MarketScenario(
            self.generators,
            self.loads,
            self.policy if policy is None else policy,
            self.behavior if behavior is None else behavior,
        )

    @property
    def G(self) -> int:
        return len(self.generators)

    @property
    def L(self) -> int:
        return len(self.loads)

    @property
    def c(self) -> np.ndarray:
        return np.array([g.c for g in self.generators])

    @property
    def eps(self) -> np.ndarray:
        return np.array([g.eps for g in self.generators])

    @property
    def demands(self) -> np.ndarray:
        return np.array([ld.d for ld in self.loads])

    @property
    def d(self) -> float:
        return float(self.demands.sum())

    def is_homogeneous(self, rel_tol: float = REL_TOL) -> bool:
        """True when every generator shares c and eps within ``rel_tol``."""
        c, eps = self.c, self.eps
        c_ok = np.all(np.abs(c - c[0]) <= rel_tol * np.abs(c[0]))
        eps_ok = np.all(np.abs(eps - eps[0]) <= rel_tol * max(abs(eps[0]), c[0]) + ABS_TOL)
        return bool(c_ok and eps_ok)


@dataclass(frozen=True)
class StageAllocation:
    """Bids, dispatch, demand allocation and prices for both stages.

    Per-generator arrays are indexed like ``scenario.generators``; per-load
    arrays like ``scenario.loads``.
    """

    theta_d: tuple[float, ...]
    theta_r: tuple[float, ...]
    g_d: tuple[float, ...]
    g_r: tuple[float, ...]
    d_d: tuple[float, ...]
    d_r: tuple[float, ...]
    lambda_d: float
    lambda_r: float

    def __post_init__(self):
        for name in ("theta_d", "theta_r", "g_d", "g_r", "d_d", "d_r"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "lambda_d", float(self.lambda_d))
        object.__setattr__(self, "lambda_r", float(self.lambda_r))

    @property
    def g(self) -> np.ndarray:
        return np.add(self.g_d, self.g_r)

    @property
    def total_d_d(self) -> float:
        return float(sum(self.d_d))

    @property
    def total_d_r(self) -> float:
        return float(sum(self.d_r))

    def validate(self, scenario: MarketScenario, rel_tol: float = REL_TOL,
                 abs_tol: float = ABS_TOL) -> None:
        """Raise InconsistentAllocationError if any stage identity fails."""
        if len(self.theta_d) != scenario.G or len(self.d_d) != scenario.L:
            raise InconsistentAllocationError("allocation does not match scenario participant counts")
        scale = max(scenario.d, abs(self.total_d_d), abs(self.total_d_r))
        tol = max(abs_tol, rel_tol * scale)

        def close(a, b, what):
            if abs(a - b) > tol:
                raise InconsistentAllocationError(f"{what}: {a!r} != {b!r}")

        close(sum(self.g_d), self.total_d_d, "day-ahead balance")
        close(sum(self.g_r), self.total_d_r, "real-time balance")
        for l, (dd, dr, ld) in enumerate(zip(self.d_d, self.d_r, scenario.loads)):
            close(dd + dr, ld.d, f"load {l} stage identity")
        for j in range(scenario.G):
            close(self.g_d[j], self.theta_d[j] * self.lambda_d, f"generator {j} day-ahead supply function")
            if self.theta_r[j] != 0.0:
                close(self.g_r[j], self.theta_r[j] * self.lambda_r, f"generator {j} real-time supply function")

    def to_dict(self) -> dict:
        return {
            "theta_d": list(self.theta_d),
            "theta_r": list(self.theta_r),
            "g_d": list(self.g_d),
            "g_r": list(self.g_r),
            "d_d": list(self.d_d),
            "d_r": list(self.d_r),
            "lambda_d": self.lambda_d,
            "lambda_r": self.lambda_r,
        }


@dataclass(frozen=True)
class ExistenceCondition:
    kind: str  # "MinGenerators" or "LoadCountBound"
    lhs: float
    rhs: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied}


@dataclass(frozen=True)
class EquilibriumOutcome:
    allocation: Optional[StageAllocation]
    status: Status
    detail: str = ""
    condition: Optional[ExistenceCondition] = None
    family: Optional[str] = None

    def __post_init__(self):
        if self.status in (Status.UNIQUE, Status.NON_UNIQUE_FAMILY) and self.allocation is None:
            raise ValueError(f"{self.status.value} outcome requires an allocation")
        if self.status is Status.NO_EQUILIBRIUM and self.allocation is not None:
            raise ValueError("NoEquilibrium outcome cannot carry an allocation")
        if self.status is Status.NON_UNIQUE_FAMILY and not self.family:
            raise ValueError("NonUniqueFamily outcome must describe its degrees of freedom")

    @property
    def exists(self) -> bool:
        return self.allocation is not None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "detail": self.detail,
            "family": self.family,
            "condition": None if self.condition is None else self.condition.to_dict(),
            "allocation": None if self.allocation is None else self.allocation.to_dict(),
        }


@dataclass(frozen=True)
class SettlementReport:
    profits: tuple[float, ...]
    payments: tuple[float, ...]
    social_cost: float
    aggregate_profit: float
    aggregate_payment: float
    generator_revenue: float
    normalized_profits: Optional[tuple[float, ...]] = None
    normalized_payments: Optional[tuple[float, ...]] = None
    normalized_aggregate_profit: Optional[float] = None
    normalized_aggregate_payment: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "profits": list(self.profits),
            "payments": list(self.payments),
            "social_cost": self.social_cost,
            "aggregate_profit": self.aggregate_profit,
            "aggregate_payment": self.aggregate_payment,
            "generator_revenue": self.generator_revenue,
        }
        if self.normalized_profits is not None:
            out.update(
                normalized_profits=list(self.normalized_profits),
                normalized_payments=list(self.normalized_payments),
                normalized_aggregate_profit=self.normalized_aggregate_profit,
                normalized_aggregate_payment=self.normalized_aggregate_payment,
            )
        return out


@dataclass(frozen=True)
class StageClearing:
    price: float
    rule: ClearingRule = ClearingRule.BALANCE

    @property
    def even_split(self) -> bool:
        return self.rule is ClearingRule.ZERO_PRICE


def clear_stage(theta: Sequence[float], demand_quantity: float,
                other_stage_price: Optional[float] = None) -> StageClearing:
    """Clear one stage of supply-function bids against a demand quantity.

    Degenerate stages with no supply follow the two tie rules: zero demand
    inherits the other stage's price, non-zero demand clears at zero and is
    split evenly across loads (see :func:`even_split`).
    """
    theta = np.asarray(theta, dtype=float)
    if not (np.all(np.isfinite(theta)) and math.isfinite(demand_quantity)):
        raise ValueError("slopes and demand must be finite")
    total = float(theta.sum())
    if total != 0.0:
        return StageClearing(demand_quantity / total)
    if demand_quantity == 0.0:
        if other_stage_price is None:
            raise DegenerateClearingError(
                "stage has no supply and no demand; the other stage's price is required")
        return StageClearing(float(other_stage_price), ClearingRule.SAME_PRICE)
    return StageClearing(0.0, ClearingRule.ZERO_PRICE)


def even_split(demand_quantity: float, n_loads: int) -> np.ndarray:
    """Per-load stage allocation when a zero-supply stage clears at price zero."""
    if n_loads < 1:
        raise ValueError("n_loads must be positive")
    return np.full(n_loads, demand_quantity / n_loads)


def solve_social_planner(scenario: MarketScenario) -> tuple[np.ndarray, float]:
    """Least-cost dispatch meeting total demand (equal marginal cost)."""
    inv_c = 1.0 / scenario.c
    g = inv_c / inv_c.sum() * scenario.d
    return g, social_cost(g, scenario)


def social_cost(g, scenario: MarketScenario) -> float:
    g = np.asarray(g, dtype=float)
    return float(np.sum(scenario.c / 2.0 * g * g))


def settle(allocation: StageAllocation, scenario: MarketScenario,
           benchmark: "StageAllocation | EquilibriumOutcome | None" = None) -> SettlementReport:
    """Profits, payments and aggregates for an allocation.

    With ``benchmark`` the report also carries every quantity divided by
    its value under the benchmark allocation (normally the competitive
    equilibrium of the same market).
    """
    allocation.validate(scenario)
    c = scenario.c
    g_d, g_r = np.asarray(allocation.g_d), np.asarray(allocation.g_r)
    d_d, d_r = np.asarray(allocation.d_d), np.asarray(allocation.d_r)
    lam_d, lam_r = allocation.lambda_d, allocation.lambda_r

    revenue = lam_d * g_d + lam_r * g_r
    profits = revenue - c / 2.0 * (g_d + g_r) ** 2
    payments = lam_d * d_d + lam_r * d_r
    report = SettlementReport(
        profits=tuple(profits),
        payments=tuple(payments),
        social_cost=social_cost(g_d + g_r, scenario),
        aggregate_profit=float(profits.sum()),
        aggregate_payment=float(payments.sum()),
        generator_revenue=float(revenue.sum()),
    )
    if benchmark is None:
        return report

    if isinstance(benchmark, EquilibriumOutcome):
        if benchmark.allocation is None:
            raise ValueError("benchmark outcome has no allocation")
        benchmark = benchmark.allocation
    base = settle(benchmark, scenario)
    return SettlementReport(
        profits=report.profits,
        payments=report.payments,
        social_cost=report.social_cost,
        aggregate_profit=report.aggregate_profit,
        aggregate_payment=report.aggregate_payment,
        generator_revenue=report.generator_revenue,
        normalized_profits=tuple(profits / np.asarray(base.profits)),
        normalized_payments=tuple(payments / np.asarray(base.payments)),
        normalized_aggregate_profit=report.aggregate_profit / base.aggregate_profit,
        normalized_aggregate_payment=report.aggregate_payment / base.aggregate_payment,
    )


def relative_error(a, b, floor: float = ABS_TOL) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))
