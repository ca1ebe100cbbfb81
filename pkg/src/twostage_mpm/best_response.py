"""Numerical Stackelberg-Nash solver for the day-ahead MPM market.

Loads lead: each picks its day-ahead quantity anticipating the real-time
supply-function game among generators (the followers), whose day-ahead
dispatch is fixed by the operator's default bids.  The followers' game is
solved by damped best-response iteration, the leaders' game by damped
best-response iteration over 1-D payment minimizations.

Also holds the best-response probe for the real-time MPM market, whose
price-anticipating game has no equilibrium.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .closed_form import competitive_da_mpm
from .core import (
    Behavior,
    EquilibriumOutcome,
    MarketError,
    MarketScenario,
    Policy,
    RegimeError,
    StageAllocation,
    Status,
    clear_stage,
    even_split,
)
from .search import grid_then_golden

COLLAPSE_RATIO = 1e-10
BOUNDARY_REL = 1e-6
CYCLE_TOL = 1e-6


class SingularResponseError(MarketError, ArithmeticError):
    pass


class NonConvergenceError(MarketError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NoInnerEquilibriumError(MarketError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class LeaderResponseUndefinedError(MarketError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 400
    max_inner_iters: int = 5000
    damping: float = 0.5
    tol_fixed_point: float = 1e-10
    line_search_grid: int = 21
    probe_iters: int = 60
    # followers are solved tighter than leaders; leader payments are
    # differenced inside the line search
    inner_tol: float = 1e-13
    force_search: bool = False

    def __post_init__(self):
        for name in ("max_outer_iters", "max_inner_iters", "line_search_grid", "probe_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive count")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not 0 < self.tol_fixed_point <= 1e-3:
            raise ValueError("tol_fixed_point must lie in (0, 1e-3]")
        if not 0 < self.inner_tol <= 1e-3:
            raise ValueError("inner_tol must lie in (0, 1e-3]")
        if self.line_search_grid < 3:
            raise ValueError("line_search_grid needs at least 3 points")


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    phase: str
    decisions: tuple
    lambda_d: Optional[float] = None
    lambda_r: Optional[float] = None
    objectives: tuple = ()
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "decisions": list(self.decisions),
            "lambda_d": self.lambda_d,
            "lambda_r": self.lambda_r,
            "objectives": list(self.objectives),
            "note": self.note,
        }


@dataclass
class BestResponseTrace:
    entries: list = field(default_factory=list)
    converged: bool = False
    cycle_detected: bool = False
    cap_reached: bool = False
    rule2_deviation: bool = False
    note: str = ""

    def log(self, entry: TraceEntry) -> None:
        if self.entries and entry.iteration < self.entries[-1].iteration:
            raise ValueError("trace iterations must be non-decreasing")
        self.entries.append(entry)

    def phase(self, name: str) -> list:
        return [e for e in self.entries if e.phase == name]

    def to_records(self) -> list:
        return [e.to_dict() for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "cycle_detected": self.cycle_detected,
            "cap_reached": self.cap_reached,
            "rule2_deviation": self.rule2_deviation,
            "note": self.note,
            "entries": self.to_records(),
        }


@dataclass(frozen=True)
class GeneratorResponse:
    theta: float
    m: float
    n: float
    second_order: float
    is_maximum: bool
    degenerate: bool = False

    @property
    def foc_residual(self) -> float:
        return self.m - self.n * self.theta


@dataclass(frozen=True)
class InnerResult:
    theta_r: tuple
    lambda_r: float
    iterations: int
    foc_residuals: tuple
    second_order: tuple
    trace: Optional[BestResponseTrace] = None
    degenerate: bool = False


@dataclass(frozen=True)
class LoadResponse:
    d_l_d: float
    payment: float
    lambda_r: float
    path: str


# -- follower (generator) game ---------------------------------------------

def _mn(cj: float, caj: float, D: float, s: float) -> tuple[float, float]:
    # dpi_j/dtheta_j = D / S^3 * (m - n * theta_j)
    return D * s - caj * s * s, D + caj * s + cj * D * s


def _day_ahead_terms(scenario: MarketScenario):
    c, eps = scenario.c, scenario.eps
    inv_ce = 1.0 / (c + eps)
    K = float(inv_ce.sum())
    # c_j * omega_j; multiplied by d^d this is c_j times generator j's day-ahead dispatch
    cw = c * inv_ce / K
    return K, cw


def generator_br_da_mpm(j: int, others_theta_r: Sequence[float], d_d: float, d_r: float,
                        scenario: MarketScenario) -> GeneratorResponse:
    """Profit-maximizing real-time slope of generator ``j``.

    ``others_theta_r`` holds either the G-1 other slopes or all G slopes
    (entry ``j`` is then ignored).  The day-ahead dispatch is the default-bid
    share of ``d_d``.
    """
    others = np.asarray(others_theta_r, dtype=float)
    if others.size == scenario.G:
        others = np.delete(others, j)
    if others.size != scenario.G - 1:
        raise ValueError("others_theta_r must have G-1 or G entries")
    s = float(others.sum())
    if not s > 0:
        raise ValueError("other generators' real-time slopes must sum to a positive value")
    _, cw = _day_ahead_terms(scenario)
    cj = float(scenario.c[j])
    if d_r == 0:
        m, n = _mn(cj, cw[j] * d_d, 0.0, s)
        return GeneratorResponse(0.0, 0.0, n, 0.0, True, degenerate=True)
    m, n = _mn(cj, float(cw[j]) * d_d, d_r, s)
    if n == 0:
        raise SingularResponseError(f"generator {j}: response denominator vanishes")
    theta = m / n
    S = theta + s
    soc = -d_r * n / S ** 3
    return GeneratorResponse(theta, m, n, soc, soc < 0)


def realtime_follower_nash(day_ahead_dispatch, d_r: float, c, config: SolverConfig,
                           theta0=None, record: bool = False) -> InnerResult:
    """Nash equilibrium of real-time supply-function bids given day-ahead dispatch.

    Generators update in index order (Gauss-Seidel) with damping.  Raises
    NoInnerEquilibriumError when slopes collapse, a slope turns
    non-positive, or a stationary point is not a profit maximum, and
    NonConvergenceError at the iteration cap.
    """
    c = [float(v) for v in c]
    a = [float(v) for v in day_ahead_dispatch]
    G = len(c)
    trace = BestResponseTrace() if record else None
    if G < 2:
        raise NoInnerEquilibriumError(
            "a single generator faces no competition in real time; profit grows without bound "
            "as its slope shrinks", trace)
    if G == 2:
        # each response is strictly below the rival's slope, so slopes only shrink
        raise NoInnerEquilibriumError(
            "two generators undercut each other's real-time slope toward zero; "
            "at least three are needed", trace)
    D = float(d_r)
    if D < 0:
        raise NoInnerEquilibriumError(
            "negative real-time demand: the symmetric turning point is negative and minimizes "
            "profit", trace)
    if D == 0:
        raise NoInnerEquilibriumError("zero real-time demand: every slope is a best response", trace)
    ca = [cj * aj for cj, aj in zip(c, a)]
    d_total = sum(a) + D
    if theta0 is None:
        factor = max(G - 2, 1) / (G - 1)
        theta = [factor * D / (cj * d_total) for cj in c]
    else:
        theta = [float(v) for v in theta0]
    alpha = config.damping
    S0 = sum(theta)
    for it in range(1, config.max_inner_iters + 1):
        S = sum(theta)
        biggest = 0.0
        for j in range(G):
            tj = theta[j]
            s = S - tj
            m = D * s - ca[j] * s * s
            n = D + ca[j] * s + c[j] * D * s
            if n == 0:
                raise SingularResponseError(f"generator {j}: response denominator vanishes")
            new = (1 - alpha) * tj + alpha * (m / n)
            step = abs(new - tj)
            if step > biggest:
                biggest = step
            S += new - tj
            theta[j] = new
        S = sum(theta)
        if trace is not None:
            trace.log(TraceEntry(it, "generators", tuple(theta), lambda_r=D / S if S else None))
        if not S > COLLAPSE_RATIO * S0:
            raise NoInnerEquilibriumError(
                "real-time slopes collapse toward zero (fewer than three effective competitors)",
                trace)
        if biggest <= config.inner_tol * max(map(abs, theta)):
            break
    else:
        if trace is not None:
            trace.cap_reached = True
        raise NonConvergenceError(
            f"follower best responses did not converge in {config.max_inner_iters} sweeps", trace)

    S = sum(theta)
    residuals, socs = [], []
    for j in range(G):
        s = S - theta[j]
        m = D * s - ca[j] * s * s
        n = D + ca[j] * s + c[j] * D * s
        residuals.append(m - n * theta[j])
        socs.append(-D * n / S ** 3)
    if min(theta) <= 0:
        raise NoInnerEquilibriumError("a real-time slope is non-positive at the fixed point", trace)
    if max(socs) >= 0:
        raise NoInnerEquilibriumError(
            "stationary point is not a profit maximum for every generator", trace)
    if trace is not None:
        trace.converged = True
    return InnerResult(tuple(theta), D / S, it, tuple(residuals), tuple(socs), trace)


def inner_generator_nash(d_d: float, d_r: float, scenario: MarketScenario,
                         config: Optional[SolverConfig] = None, theta0=None,
                         record: bool = True) -> InnerResult:
    """Followers' real-time equilibrium for given aggregate stage demands.

    With zero real-time demand the stage is degenerate: slopes are zero and
    the price is inherited from the day-ahead stage.
    """
    config = config or SolverConfig()
    K, cw = _day_ahead_terms(scenario)
    lam_d = d_d / K
    if d_r == 0:
        price = clear_stage(np.zeros(scenario.G), 0.0, lam_d).price
        return InnerResult(tuple(np.zeros(scenario.G)), price, 0, (), (),
                           BestResponseTrace(note="zero real-time demand") if record else None,
                           degenerate=True)
    a = np.asarray(cw / scenario.c * d_d)
    return realtime_follower_nash(a, d_r, scenario.c, config, theta0=theta0, record=record)


def follower_price_slope(theta, scenario: MarketScenario, d_d: float, d_r: float) -> float:
    """Derivative of the followers' real-time price with respect to real-time demand.

    Total demand is held fixed, so moving demand into real time removes it
    from day-ahead.  Computed by implicit differentiation of the followers'
    first-order conditions at ``theta``.
    """
    theta = np.asarray(theta, dtype=float)
    c = scenario.c
    _, cw = _day_ahead_terms(scenario)
    D = d_r
    ca = cw * d_d
    S = theta.sum()
    s = S - theta
    n = D + ca * s + c * D * s
    off = (D - 2 * ca * s) - (ca + c * D) * theta
    J = np.tile(off[:, None], (1, len(theta)))
    np.fill_diagonal(J, -n)
    dm = s + cw * s * s
    dn = 1 - cw * s + c * s
    dF = dm - dn * theta
    dtheta = np.linalg.solve(J, -dF)
    return float(1.0 / S - D / S ** 2 * dtheta.sum())


class _Followers:
    """Follower equilibrium evaluator with warm starts along a leader search."""

    def __init__(self, scenario: MarketScenario, config: SolverConfig):
        self.scenario = scenario
        self.config = config
        self.d = scenario.d
        self.K, self.cw = _day_ahead_terms(scenario)
        self.a_share = self.cw / scenario.c
        self.theta = None
        self.D = None

    def solve(self, D: float) -> InnerResult:
        theta0 = None
        if self.theta is not None and self.D and self.D > 0 and D > 0:
            theta0 = [t * D / self.D for t in self.theta]
        res = realtime_follower_nash(self.a_share * (self.d - D), D, self.scenario.c,
                                     self.config, theta0=theta0)
        self.theta, self.D = res.theta_r, D
        return res

    def price(self, D: float) -> Optional[float]:
        if not D > 0:
            return None
        try:
            return self.solve(D).lambda_r
        except (NoInnerEquilibriumError, NonConvergenceError, SingularResponseError):
            self.theta = self.D = None
            return None


# -- leader (load) game -----------------------------------------------------

def _load_payment(x, o, d_l, d, K, followers: _Followers) -> float:
    lam_r = followers.price(d - x - o)
    if lam_r is None:
        return math.inf
    return (x + o) / K * x + lam_r * (d_l - x)


def _payment_slope(x, o, d_l, d, K, followers: _Followers) -> float:
    D = d - x - o
    res = followers.solve(D)
    slope = follower_price_slope(res.theta_r, followers.scenario, d - D, D)
    return (2 * x + o) / K - res.lambda_r - slope * (d_l - x)


_INNER_FAILURES = (NoInnerEquilibriumError, NonConvergenceError, SingularResponseError,
                   np.linalg.LinAlgError)


def _descent_bracket(followers, x0, lo, hi, o, d_l, h0=1e-3, grow=4.0, max_steps=30):
    """Walk downhill from ``x0`` until the payment derivative changes sign."""
    d, K = followers.d, followers.K
    try:
        g0 = _payment_slope(x0, o, d_l, d, K, followers)
        if g0 == 0:
            return None
        step = -math.copysign(h0 * d, g0)
        a = x0
        for _ in range(max_steps):
            b = min(hi, max(lo, a + step))
            gb = _payment_slope(b, o, d_l, d, K, followers)
            if (gb > 0) != (g0 > 0):
                return (a, b) if a < b else (b, a)
            if b in (lo, hi):
                return None
            a, step = b, step * grow
    except _INNER_FAILURES:
        return None
    return None


def load_br_da_mpm(l: int, others_d_d, scenario: MarketScenario,
                   config: Optional[SolverConfig] = None, hint: Optional[float] = None,
                   _followers: Optional[_Followers] = None) -> LoadResponse:
    """Payment-minimizing day-ahead quantity of load ``l``.

    Identical generators: the followers' real-time price does not depend on
    the stage split, so the first-order condition gives the response
    directly.  Otherwise: grid scan over [-d, 2d] (or a local window around
    ``hint``), golden-section refinement, then a root polish of the exact
    payment derivative.
    """
    config = config or SolverConfig()
    others = np.asarray(others_d_d, dtype=float)
    if others.size == scenario.L:
        others = np.delete(others, l)
    o = float(others.sum())
    d = scenario.d
    d_l = float(scenario.demands[l])
    followers = _followers or _Followers(scenario, config)
    K = followers.K

    if scenario.is_homogeneous() and not config.force_search:
        D_probe = d - (hint if hint is not None else 0.0) - o
        if not D_probe > 0:
            D_probe = d / (scenario.L + 1)
        lam_r = followers.price(D_probe)
        if lam_r is None:
            raise LeaderResponseUndefinedError(
                f"load {l}: follower equilibrium undefined at real-time demand {D_probe:.6g}")
        x = (lam_r * K - o) / 2
        path = "closed-form"
        if not d - x - o > 0:
            x = d - o - 1e-12 * d
            path = "boundary"
        return LoadResponse(x, (x + o) / K * x + lam_r * (d_l - x), lam_r, path)

    def pay(x):
        return _load_payment(x, o, d_l, d, K, followers)

    lo, hi = -d, 2 * d
    n = config.line_search_grid
    if hint is not None:
        bracket = _descent_bracket(followers, hint, lo, hi, o, d_l)
        if bracket is not None:
            try:
                x = brentq(_payment_slope, *bracket, args=(o, d_l, d, K, followers),
                           xtol=1e-15 * d, rtol=1e-15)
                return LoadResponse(float(x), pay(x), followers.price(d - x - o), "local-root")
            except _INNER_FAILURES:
                pass
    x, fx, bracket, _ = grid_then_golden(pay, lo, hi, n, xtol=1e-7 * d)
    if x is None:
        raise LeaderResponseUndefinedError(
            f"load {l}: follower equilibrium fails at every probed day-ahead quantity")

    path = "search"
    blo, bhi = bracket
    pad = 1e-6 * d
    blo, bhi = max(lo, min(blo, x) - pad), min(hi, max(bhi, x) + pad)
    try:
        glo = _payment_slope(blo, o, d_l, d, K, followers)
        ghi = _payment_slope(bhi, o, d_l, d, K, followers)
        if glo < 0 < ghi:
            x = brentq(_payment_slope, blo, bhi, args=(o, d_l, d, K, followers),
                       xtol=1e-15 * d, rtol=1e-15)
            path = "search+polish"
    except _INNER_FAILURES:
        pass
    fx = pay(x)
    return LoadResponse(float(x), fx, followers.price(d - x - o) or math.nan, path)


def _initial_day_ahead(scenario: MarketScenario) -> np.ndarray:
    ce = competitive_da_mpm(scenario.with_regime(behavior=Behavior.PRICE_TAKING)).allocation
    x = np.asarray(ce.d_d, dtype=float)
    if scenario.d - x.sum() <= BOUNDARY_REL * scenario.d:
        # all-day-ahead start leaves the followers nothing to bid on
        x = x * scenario.L / (scenario.L + 1)
    return x


def _stackelberg_allocation(scenario, x, inner: InnerResult) -> StageAllocation:
    K, _ = _day_ahead_terms(scenario)
    dd = float(np.sum(x))
    lam_d = dd / K
    theta_d = 1.0 / (scenario.c + scenario.eps)
    theta_r = np.asarray(inner.theta_r)
    return StageAllocation(
        theta_d=theta_d,
        theta_r=theta_r,
        g_d=theta_d * lam_d,
        g_r=theta_r * inner.lambda_r,
        d_d=x,
        d_r=scenario.demands - x,
        lambda_d=lam_d,
        lambda_r=inner.lambda_r,
    )


def solve_stackelberg_nash(scenario: MarketScenario, config: Optional[SolverConfig] = None
                           ) -> tuple[EquilibriumOutcome, BestResponseTrace]:
    """Leader-follower equilibrium of the day-ahead MPM market by best responses.

    Loads update in index order with damping; each response re-solves the
    generators' real-time game.  Reports NoEquilibrium when the leaders
    cycle, hit the iteration cap, or converge onto zero real-time demand,
    or when the followers have no equilibrium at the limit point.
    """
    if scenario.policy is not Policy.DAY_AHEAD_MPM or scenario.behavior is not Behavior.PRICE_ANTICIPATING:
        raise RegimeError("Stackelberg-Nash solver needs a DayAheadMPM / PriceAnticipating scenario")
    config = config or SolverConfig()
    trace = BestResponseTrace()
    d, L = scenario.d, scenario.L
    K, _ = _day_ahead_terms(scenario)
    followers = _Followers(scenario, config)
    x = _initial_day_ahead(scenario)
    alpha = config.damping
    history = [x.copy()]

    def fail(note):
        trace.note = note
        return EquilibriumOutcome(None, Status.NO_EQUILIBRIUM, detail=note), trace

    for it in range(1, config.max_outer_iters + 1):
        prev = x.copy()
        payments = []
        for l in range(L):
            try:
                br = load_br_da_mpm(l, x, scenario, config, hint=x[l] if it > 1 else None,
                                     _followers=followers)
            except LeaderResponseUndefinedError as exc:
                return fail(f"iteration {it}: {exc}")
            x[l] = (1 - alpha) * x[l] + alpha * br.d_l_d
            payments.append(br.payment)
        dd = float(x.sum())
        lam_r = followers.price(d - dd)
        trace.log(TraceEntry(it, "loads", tuple(x), dd / K, lam_r, tuple(payments)))
        step = float(np.max(np.abs(x - prev))) / d
        if step <= config.tol_fixed_point:
            trace.converged = True
            break
        if it >= 3 and step > CYCLE_TOL:
            for past in history[:-1]:
                if float(np.max(np.abs(x - past))) / d < CYCLE_TOL:
                    trace.cycle_detected = True
                    return fail(f"leader best responses revisit an earlier state at iteration {it}")
        history.append(x.copy())
    else:
        trace.cap_reached = True
        return fail(f"leader best responses did not converge in {config.max_outer_iters} iterations")

    d_r = d - float(x.sum())
    if d_r <= BOUNDARY_REL * d:
        return fail(f"leaders converge onto real-time demand {d_r:.3g} <= 0: the followers' "
                    "game has no equilibrium there (existence boundary)")
    try:
        inner = realtime_follower_nash(followers.a_share * (d - d_r), d_r, scenario.c, config,
                                       theta0=followers.theta)
    except (NoInnerEquilibriumError, NonConvergenceError) as exc:
        return fail(f"followers' real-time game fails at the leaders' fixed point: {exc}")
    alloc = _stackelberg_allocation(scenario, x.copy(), inner)
    return EquilibriumOutcome(alloc, Status.UNIQUE,
                              detail=f"best-response fixed point after {it} leader iterations"), trace


def foc_certificate(outcome: EquilibriumOutcome, scenario: MarketScenario) -> list[GeneratorResponse]:
    """Per-generator first/second-order evaluation at a returned outcome."""
    alloc = outcome.allocation
    out = []
    for j in range(scenario.G):
        br = generator_br_da_mpm(j, alloc.theta_r, alloc.total_d_d, alloc.total_d_r, scenario)
        s = sum(alloc.theta_r) - alloc.theta_r[j]
        K, cw = _day_ahead_terms(scenario)
        m, n = _mn(float(scenario.c[j]), float(cw[j]) * alloc.total_d_d, alloc.total_d_r, s)
        S = sum(alloc.theta_r)
        out.append(GeneratorResponse(alloc.theta_r[j], m, n, -alloc.total_d_r * n / S ** 3,
                                     br.is_maximum))
    return out


def audit_leader_optimality(outcome: EquilibriumOutcome, scenario: MarketScenario,
                            config: Optional[SolverConfig] = None, n_points: int = 1000,
                            span: float = 0.25) -> list[float]:
    """Largest relative payment saving each load finds on a deviation grid.

    Load l's day-ahead quantity is moved over ``x* + u * d`` for ``u`` in
    ``[-span, span]``; the followers' game is re-solved at every point and
    points where it has no equilibrium are skipped.
    """
    config = config or SolverConfig()
    alloc = outcome.allocation
    x_star = np.asarray(alloc.d_d)
    d = scenario.d
    K, _ = _day_ahead_terms(scenario)
    gains = []
    for l in range(scenario.L):
        followers = _Followers(scenario, config)
        o = float(x_star.sum() - x_star[l])
        d_l = float(scenario.demands[l])
        base = _load_payment(x_star[l], o, d_l, d, K, followers)
        best = 0.0
        grid = x_star[l] + np.linspace(-span, span, n_points) * d
        order = np.argsort(np.abs(grid - x_star[l]), kind="stable")
        for x in grid[order]:
            p = _load_payment(float(x), o, d_l, d, K, followers)
            if math.isfinite(p):
                best = max(best, (base - p) / max(abs(base), 1e-300))
        gains.append(best)
    return gains


# -- real-time MPM probe ----------------------------------------------------

def probe_rt_mpm_nonexistence(scenario: MarketScenario,
                              config: Optional[SolverConfig] = None) -> BestResponseTrace:
    """Alternate day-ahead best responses under real-time MPM and record the collapse.

    Generators play the symmetric turning point of their day-ahead slope,
    loads the symmetric solution of their payment problem.  The day-ahead
    demand contracts geometrically to zero; at the zero point a load
    deviation into day-ahead clears at price zero, so the zero point is not
    an equilibrium either.
    """
    if scenario.policy is not Policy.REAL_TIME_MPM or scenario.behavior is not Behavior.PRICE_ANTICIPATING:
        raise RegimeError("probe needs a RealTimeMPM / PriceAnticipating scenario")
    config = config or SolverConfig()
    G, L, d = scenario.G, scenario.L, scenario.d
    K = float(np.sum(1.0 / (scenario.c + scenario.eps)))
    lam_r = d / K
    trace = BestResponseTrace()
    d_l = scenario.demands.astype(float).copy()  # start with all demand day-ahead
    theta = 1.0 / (scenario.c + scenario.eps)
    if G == 1:
        trace.note = "one generator: it undercuts its own slope every round; loads follow"
    for it in range(1, config.probe_iters + 1):
        dd = float(d_l.sum())
        if G == 1:
            theta = theta / 2
        else:
            theta = np.full(G, K * (G - 2) / (G * (G - 1)) * dd / d)
        trace.log(TraceEntry(it, "generators", tuple(theta), lambda_r=lam_r,
                             note=f"day-ahead demand {dd!r}"))
        d_l = np.full(L, float(theta.sum()) / K * d / (L + 1))
        dd_new = float(d_l.sum())
        lam_d = clear_stage(theta, dd_new, lam_r).price if theta.sum() or dd_new else lam_r
        trace.log(TraceEntry(it, "loads", tuple(d_l), lambda_d=lam_d, lambda_r=lam_r,
                             note=f"day-ahead demand {dd_new!r}"))
        if dd_new == 0.0:
            break

    # zero point: no supply, no demand day-ahead -> inherits the real-time price
    zero = clear_stage(np.zeros(G), 0.0, lam_r)
    stay = lam_r * float(scenario.demands[0])
    gamma = 0.5 * float(scenario.demands[0])
    dev = clear_stage(np.zeros(G), gamma, lam_r)
    # a zero-price day-ahead stage shares the cleared demand evenly across loads
    got = even_split(gamma, L)[0] if dev.even_split else gamma
    moved = dev.price * got + lam_r * (float(scenario.demands[0]) - got)
    trace.log(TraceEntry(config.probe_iters + 1, "deviation", (gamma,), lambda_d=dev.price,
                         lambda_r=lam_r, objectives=(stay, moved),
                         note=f"zero point prices day-ahead at {zero.price!r} ({zero.rule.value}); "
                              f"load 0 moving {gamma!r} day-ahead clears at {dev.price!r} "
                              f"({dev.rule.value}) and pays {moved!r} instead of {stay!r}"))
    trace.rule2_deviation = bool(moved < stay)
    trace.note = (trace.note + "; " if trace.note else "") + (
        "no fixed point with positive day-ahead quantities; zero point broken by a "
        "zero-price deviation" if trace.rule2_deviation else "zero point not broken")
    return trace


def contraction_ratios(trace: BestResponseTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per-round ratios from a probe trace.

    Returns (aggregate new/old day-ahead demand, single-load new bid / old
    aggregate day-ahead demand).
    """
    loads = trace.phase("loads")
    agg = [sum(e.decisions) for e in loads]
    per_load = [e.decisions[0] for e in loads]
    start = [float(e.note.split()[-1]) for e in trace.phase("generators")]
    agg_ratio = np.array([n / o for n, o in zip(agg, start) if o > 0])
    load_ratio = np.array([p / o for p, o in zip(per_load, start) if o > 0])
    return agg_ratio, load_ratio
