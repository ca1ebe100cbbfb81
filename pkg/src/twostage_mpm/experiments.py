"""Grid sweeps and seeded Monte-Carlo studies emitting flat records.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64); samples
are drawn and solved in index order, so a seed fixes every record.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .best_response import SolverConfig
from .closed_form import aggregate_tables, load_count_condition, min_generators_condition
from .core import (
    Behavior,
    MarketScenario,
    Policy,
    SettlementReport,
    Status,
)
from .dispatch import solve

DEFAULT_LOADS = (99.4, 199.6)
FLOAT_FMT = "%.12g"


def default_base() -> MarketScenario:
    """Five generators at c=0.1 and two loads, day-ahead MPM, price-anticipating."""
    return MarketScenario.build(c=[0.1] * 5, d=list(DEFAULT_LOADS), eps=0.0,
                                policy=Policy.DAY_AHEAD_MPM,
                                behavior=Behavior.PRICE_ANTICIPATING)


# -- record plumbing --------------------------------------------------------

class RecordError(ValueError):
    pass


def check_settlement(report: SettlementReport, rel_tol: float = 1e-9) -> None:
    """Generator revenue must equal what loads pay."""
    scale = max(abs(report.generator_revenue), abs(report.aggregate_payment), 1e-12)
    if abs(report.generator_revenue - report.aggregate_payment) > rel_tol * scale:
        raise RecordError(f"revenue {report.generator_revenue!r} != payments {report.aggregate_payment!r}")


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def write_csv(records: Sequence[dict], path, columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in records:
            w.writerow([_fmt(r.get(k)) for k in columns])


def write_jsonl(records: Sequence[dict], path, columns: Sequence[str]) -> None:
    with open(path, "w") as fh:
        for r in records:
            row = {}
            for k in columns:
                v = r.get(k)
                if isinstance(v, (float, np.floating)):
                    v = float(FLOAT_FMT % v) if math.isfinite(v) else None
                row[k] = v
            fh.write(json.dumps(row) + "\n")


@dataclass
class StudyResult:
    records: list
    columns: tuple
    excluded: int = 0
    total: int = 0
    notes: list = field(default_factory=list)

    @property
    def exclusion_rate(self) -> float:
        return self.excluded / self.total if self.total else 0.0

    def write(self, path, fmt: str = "csv") -> None:
        if fmt == "csv":
            write_csv(self.records, path, self.columns)
        elif fmt == "jsonl":
            write_jsonl(self.records, path, self.columns)
        else:
            raise ValueError(f"unknown record format {fmt!r}")


# -- Nash/CE ratio grid -----------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    G_range: tuple = (4, 20)
    # None means 1 .. G-3 for each G
    L_range: Optional[tuple] = None
    c: float = 1.0
    eps_ratio: float = 0.1
    d: float = 1.0
    policies: tuple = (Policy.STANDARD, Policy.DAY_AHEAD_MPM)

    def __post_init__(self):
        lo, hi = self.G_range
        if lo < 1 or hi < lo:
            raise ValueError("G_range must be a non-empty range of positive counts")
        if self.L_range is not None and (self.L_range[0] < 1 or self.L_range[1] < self.L_range[0]):
            raise ValueError("L_range must be a non-empty range of positive counts")
        if not self.policies:
            raise ValueError("at least one policy is required")
        pols = tuple(Policy(p) for p in self.policies)
        if Policy.REAL_TIME_MPM in pols:
            raise ValueError("real-time MPM has no Nash equilibrium to tabulate")
        object.__setattr__(self, "policies", pols)
        if self.c <= 0 or self.d <= 0 or self.eps_ratio < 0:
            raise ValueError("c and d must be positive and eps_ratio non-negative")

    def cells(self):
        for G in range(self.G_range[0], self.G_range[1] + 1):
            Ls = range(1, G - 2) if self.L_range is None else range(self.L_range[0], self.L_range[1] + 1)
            for L in Ls:
                yield G, L


RATIO_COLUMNS = ("policy", "G", "L", "c", "eps", "exists", "normalized_profit", "normalized_payment")


def ratio_grid(spec: SweepSpec = SweepSpec()) -> StudyResult:
    """Nash aggregate profit and payment divided by competitive values, per (G, L)."""
    eps = spec.eps_ratio * spec.c
    records = []
    for policy in spec.policies:
        for G, L in spec.cells():
            e = 0.0 if policy is Policy.STANDARD else eps
            sc = MarketScenario.homogeneous(G, L, spec.c, e, spec.d, policy=policy,
                                            behavior=Behavior.PRICE_ANTICIPATING)
            t = aggregate_tables(sc)
            if policy is Policy.STANDARD:
                exists = min_generators_condition(G).satisfied
            else:
                exists = G >= 3 and load_count_condition(G, L, spec.c, e).satisfied
            records.append({
                "policy": policy.value, "G": G, "L": L, "c": spec.c, "eps": e, "exists": exists,
                "normalized_profit": t.ne_profit / t.ce_profit if exists else math.nan,
                "normalized_payment": t.ne_payment / t.ce_payment if exists else math.nan,
            })
    return StudyResult(records, RATIO_COLUMNS, total=len(records))


# -- Monte-Carlo studies ----------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    seed: int
    target: str = "proportional_error"
    mean: float = 0.1
    variance: float = 0.025
    samples: int = 200
    kind: str = "gaussian"
    base: MarketScenario = field(default_factory=default_base)
    # read ``variance`` as a standard deviation instead
    variance_is_std: bool = False

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError("only gaussian sampling is supported")
        if self.target not in ("proportional_error", "cost_coefficient"):
            raise ValueError("target must be 'proportional_error' or 'cost_coefficient'")
        if not self.variance >= 0:
            raise ValueError("variance must be non-negative")
        if int(self.samples) < 1:
            raise ValueError("samples must be at least 1")
        if self.seed is None:
            raise ValueError("a seed is required")

    @property
    def scale(self) -> float:
        return self.variance if self.variance_is_std else math.sqrt(self.variance)


def _positive_normal(rng, mean, scale, size, max_tries=10_000):
    out = rng.normal(mean, scale, size)
    for _ in range(max_tries):
        bad = out <= 0
        if not bad.any():
            return out
        out[bad] = rng.normal(mean, scale, int(bad.sum()))
    raise ValueError("could not draw positive cost coefficients; mean too close to zero")


def _solve_record(sc: MarketScenario, config: Optional[SolverConfig]):
    res = solve(sc, config=config)
    if res.outcome.status is not Status.UNIQUE:
        return res, None
    rep = res.settlement
    check_settlement(rep)
    return res, rep


def _regime(base: MarketScenario) -> MarketScenario:
    return base.with_regime(Policy.DAY_AHEAD_MPM, Behavior.PRICE_ANTICIPATING)


ERROR_COLUMNS = ("sample", "mean_delta", "deltas", "status", "net_profit",
                 "normalized_profit", "aggregate_payment", "normalized_payment")


def error_sensitivity_study(spec: SampleSpec, config: Optional[SolverConfig] = None) -> StudyResult:
    """Draw proportional errors delta_j, set eps_j = delta_j c_j, solve each draw.

    Negative draws are clamped to zero.  Records are sorted by mean delta;
    unsolved draws stay in the records with empty metrics and count toward
    the exclusion rate.
    """
    if spec.target != "proportional_error":
        raise ValueError("error study samples proportional_error")
    base = _regime(spec.base)
    rng = np.random.default_rng(spec.seed)
    records, excluded, clamped = [], 0, 0
    for k in range(spec.samples):
        delta = rng.normal(spec.mean, spec.scale, base.G)
        clamped += int((delta < 0).sum())
        delta = np.maximum(delta, 0.0)
        sc = MarketScenario.build(c=base.c, d=base.demands, eps=delta * base.c,
                                  policy=base.policy, behavior=base.behavior)
        res, rep = _solve_record(sc, config)
        rec = {"sample": k, "mean_delta": float(delta.mean()),
               "deltas": " ".join(FLOAT_FMT % v for v in delta), "status": res.outcome.status.value}
        if rep is None:
            excluded += 1
        else:
            rec.update(net_profit=rep.aggregate_profit,
                       normalized_profit=rep.normalized_aggregate_profit,
                       aggregate_payment=rep.aggregate_payment,
                       normalized_payment=rep.normalized_aggregate_payment)
        records.append(rec)
    records.sort(key=lambda r: (r["mean_delta"], r["sample"]))
    notes = [f"{clamped} negative delta draws clamped to 0"]
    return StudyResult(records, ERROR_COLUMNS, excluded, spec.samples, notes)


COMMON_COLUMNS = ("delta", "status", "net_profit", "normalized_profit", "aggregate_payment",
                  "normalized_payment")


def common_error_sweep(deltas: Iterable[float], base: Optional[MarketScenario] = None,
                       config: Optional[SolverConfig] = None) -> StudyResult:
    """Deterministic sweep with the same proportional error on every generator."""
    base = _regime(base or default_base())
    records, excluded, total = [], 0, 0
    for delta in deltas:
        total += 1
        sc = MarketScenario.build(c=base.c, d=base.demands, eps=float(delta) * base.c,
                                  policy=base.policy, behavior=base.behavior)
        res, rep = _solve_record(sc, config)
        rec = {"delta": float(delta), "status": res.outcome.status.value}
        if rep is None:
            excluded += 1
        else:
            rec.update(net_profit=rep.aggregate_profit, normalized_profit=rep.normalized_aggregate_profit,
                       aggregate_payment=rep.aggregate_payment,
                       normalized_payment=rep.normalized_aggregate_payment)
        records.append(rec)
    return StudyResult(records, COMMON_COLUMNS, excluded, total)


COST_COLUMNS = ("sample", "generator", "c", "status", "profit", "normalized_profit")


def cost_heterogeneity_study(spec: SampleSpec, config: Optional[SolverConfig] = None) -> StudyResult:
    """Draw cost coefficients c_j (eps = 0), solve, and record profit per generator.

    Non-positive draws are rejected and redrawn.
    """
    if spec.target != "cost_coefficient":
        raise ValueError("cost study samples cost_coefficient")
    base = _regime(spec.base)
    rng = np.random.default_rng(spec.seed)
    records, excluded = [], 0
    for k in range(spec.samples):
        c = _positive_normal(rng, spec.mean, spec.scale, base.G)
        sc = MarketScenario.build(c=c, d=base.demands, eps=0.0,
                                  policy=base.policy, behavior=base.behavior)
        res, rep = _solve_record(sc, config)
        if rep is None:
            excluded += 1
        for j in range(base.G):
            rec = {"sample": k, "generator": j, "c": float(c[j]), "status": res.outcome.status.value}
            if rep is not None:
                rec.update(profit=rep.profits[j], normalized_profit=rep.normalized_profits[j])
            records.append(rec)
    return StudyResult(records, COST_COLUMNS, excluded, spec.samples,
                       ["non-positive cost draws rejected and redrawn"])


def rank_trends(result: StudyResult) -> dict:
    """Spearman correlation of profit and normalized profit against c over solved rows."""
    rows = [r for r in result.records if r.get("profit") is not None]
    c = [r["c"] for r in rows]
    return {
        "profit": float(spearmanr(c, [r["profit"] for r in rows]).statistic),
        "normalized_profit": float(spearmanr(c, [r["normalized_profit"] for r in rows]).statistic),
    }


def analytic_payment_ratio(G: int, L: int, d: float, d_l: float, kappa: float = 1.0) -> float:
    """Nash/CE payment ratio of one load under identical generators.

    ``kappa`` is c/(c+eps); with kappa=1 the ratio is negative exactly when
    d_l < (G-1)/((G-2)(L+1)^2) d.
    """
    r = (G - 1) / (G - 2)
    return r * (1 - kappa * r * d / ((L + 1) ** 2 * d_l))


def payment_root(G: int, L: int, d: float, kappa: float = 1.0) -> float:
    return kappa * (G - 1) / ((G - 2) * (L + 1) ** 2) * d


LOAD_COLUMNS = ("fraction", "d_1", "d_2", "status", "payment_1", "payment_2", "normalized_payment_1",
                "normalized_payment_2", "aggregate_payment", "analytic_ratio_1")


def load_size_study(base: Optional[MarketScenario] = None,
                    d1_fractions: Sequence[float] = tuple(np.linspace(0.02, 0.5, 49)),
                    config: Optional[SolverConfig] = None, numeric: bool = False) -> StudyResult:
    """Re-split a fixed total demand between two loads and solve each split."""
    base = _regime(base or default_base())
    if base.L != 2:
        raise ValueError("load-size study needs exactly two loads")
    d = base.d
    homogeneous = base.is_homogeneous()
    records, excluded = [], 0
    for f in d1_fractions:
        if not 0 < f < 1:
            raise ValueError("d1 fractions must lie in (0, 1)")
        d1 = f * d
        sc = MarketScenario.build(c=base.c, d=[d1, d - d1], eps=base.eps,
                                  policy=base.policy, behavior=base.behavior)
        res = solve(sc, numeric=numeric, config=config)
        rec = {"fraction": float(f), "d_1": d1, "d_2": d - d1, "status": res.outcome.status.value}
        if homogeneous:
            c0, e0 = float(base.c[0]), float(base.eps[0])
            rec["analytic_ratio_1"] = analytic_payment_ratio(base.G, 2, d, d1, c0 / (c0 + e0))
        if res.outcome.status is Status.UNIQUE:
            rep = res.settlement
            check_settlement(rep)
            rec.update(payment_1=rep.payments[0], payment_2=rep.payments[1],
                       normalized_payment_1=rep.normalized_payments[0],
                       normalized_payment_2=rep.normalized_payments[1],
                       aggregate_payment=rep.aggregate_payment)
        else:
            excluded += 1
        records.append(rec)
    return StudyResult(records, LOAD_COLUMNS, excluded, len(records))


def zero_crossing(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """First sign change of ``ys`` located by linear interpolation."""
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if y0 == 0:
            return float(x0)
        if (y0 < 0) != (y1 < 0):
            return float(x0 - y0 * (x1 - x0) / (y1 - y0))
    return None
