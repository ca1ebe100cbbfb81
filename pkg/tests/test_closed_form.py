from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage_mpm import closed_form as cf
from twostage_mpm.core import (
    Behavior,
    MarketScenario,
    Policy,
    RegimeError,
    Status,
    clear_stage,
    settle,
    social_cost,
    solve_social_planner,
)

PT, PA = Behavior.PRICE_TAKING, Behavior.PRICE_ANTICIPATING


def build(c, d, eps=0.0, policy=Policy.STANDARD, behavior=PT):
    return MarketScenario.build(c, d, eps, policy, behavior)


def hom(G, L, policy, c=1.0, eps=0.0, d=1.0, behavior=PA):
    return MarketScenario.homogeneous(G, L, c, eps, d, policy, behavior)


def assert_clears(alloc):
    assert clear_stage(alloc.theta_d, alloc.total_d_d).price == pytest.approx(alloc.lambda_d, rel=1e-12)
    if sum(alloc.theta_r) > 0:
        assert clear_stage(alloc.theta_r, alloc.total_d_r).price == pytest.approx(alloc.lambda_r, rel=1e-12)


# -- competitive ------------------------------------------------------------

@pytest.mark.parametrize("c, d, lam, g", [
    ([1, 1], 2, 1.0, [1, 1]),
    ([1, 2], 3, 2.0, [2, 1]),
    ([1], 5, 5.0, [5]),
])
def test_competitive_standard(c, d, lam, g):
    out = cf.competitive_standard(build(c, [d]))
    a = out.allocation
    assert out.status is Status.NON_UNIQUE_FAMILY and out.family
    assert a.lambda_d == pytest.approx(lam) and a.lambda_r == pytest.approx(lam)
    assert np.allclose(a.g, g)
    assert np.allclose(a.g, solve_social_planner(build(c, [d]))[0])


def test_competitive_rt_mpm_examples():
    a = cf.competitive_rt_mpm(build([1, 1], [2], [1, 1], Policy.REAL_TIME_MPM)).allocation
    assert a.lambda_d == pytest.approx(2.0) and np.allclose(a.g, [1, 1])

    sc = build([1, 2], [3], [1, 0], Policy.REAL_TIME_MPM)
    a = cf.competitive_rt_mpm(sc).allocation
    assert a.lambda_d == pytest.approx(3.0) and np.allclose(a.g, [1.5, 1.5])
    assert social_cost(a.g, sc) > solve_social_planner(sc)[1]


def test_competitive_rt_mpm_without_error_matches_standard():
    a = cf.competitive_rt_mpm(build([1, 2, 3], [2, 4], 0.0, Policy.REAL_TIME_MPM)).allocation
    b = cf.competitive_standard(build([1, 2, 3], [2, 4])).allocation
    assert np.allclose(a.g, b.g)
    assert a.lambda_d == pytest.approx(b.lambda_d)


def test_competitive_da_mpm_examples():
    a = cf.competitive_da_mpm(build([1, 2], [3], [1, 0], Policy.DAY_AHEAD_MPM)).allocation
    assert a.lambda_d == pytest.approx(2) and a.lambda_r == pytest.approx(2)
    assert np.allclose(a.g_d, [1, 1]) and np.allclose(a.g_r, [1, 0])
    assert np.allclose(a.theta_r, [0.5, 0])
    assert a.total_d_d == pytest.approx(2) and a.total_d_r == pytest.approx(1)
    assert np.dot(a.theta_r, [a.lambda_r] * 2) == pytest.approx(a.total_d_r)

    a = cf.competitive_da_mpm(build([1, 3], [2, 2], 0.0, Policy.DAY_AHEAD_MPM)).allocation
    assert np.allclose(a.g_r, 0) and np.allclose(a.theta_r, 0) and a.total_d_r == pytest.approx(0)

    sc = build([1, 1], [2], [1, 1], Policy.DAY_AHEAD_MPM)
    a = cf.competitive_da_mpm(sc).allocation
    assert np.allclose(a.g, [1, 1]) and a.lambda_d == pytest.approx(1)
    assert social_cost(a.g, sc) == pytest.approx(solve_social_planner(sc)[1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 10), st.floats(0, 5)), min_size=1, max_size=8),
       st.lists(st.floats(0.1, 100), min_size=1, max_size=4))
def test_planner_alignment(gens, loads):
    c = [g[0] for g in gens]
    eps = [g[0] * g[1] for g in gens]
    sc = build(c, loads, eps, Policy.DAY_AHEAD_MPM)
    a = cf.competitive_da_mpm(sc).allocation
    a.validate(sc)
    best = solve_social_planner(sc)[1]
    assert social_cost(a.g, sc) == pytest.approx(best, rel=1e-10)

    rt = cf.competitive_rt_mpm(sc.with_regime(Policy.REAL_TIME_MPM)).allocation
    rt_cost = social_cost(rt.g, sc)
    ratios = np.asarray(eps) / np.asarray(c)
    if np.ptp(ratios) <= 1e-6:
        # no error, or errors proportional to cost: dispatch shares unchanged
        assert rt_cost == pytest.approx(best, rel=1e-9)
    else:
        assert rt_cost > best


# -- Nash, standard market --------------------------------------------------

def test_nash_standard_example():
    out = cf.nash_standard(hom(4, 1, Policy.STANDARD))
    a = out.allocation
    assert out.status is Status.UNIQUE
    assert a.theta_d[0] == pytest.approx(8 / 9) and a.theta_r[0] == pytest.approx(2 / 9)
    assert a.d_d[0] == pytest.approx(2 / 3)
    assert a.lambda_d == pytest.approx(3 / 16) and a.lambda_r == pytest.approx(3 / 8)
    assert 4 * (8 / 9) * (3 / 16) == pytest.approx(a.total_d_d)
    assert 4 * (2 / 9) * (3 / 8) == pytest.approx(a.total_d_r)


def test_nash_standard_three_generators():
    a = cf.nash_standard(hom(3, 1, Policy.STANDARD)).allocation
    assert a.lambda_r == pytest.approx(2 / 3) and a.lambda_d == pytest.approx(a.lambda_r / 2)


def test_nash_standard_large_market_prices_competitive():
    G = 10 ** 6
    a = cf.nash_standard(hom(G, 1, Policy.STANDARD)).allocation
    assert a.lambda_r == pytest.approx(1.0 / G, rel=1e-4)


def test_nash_standard_errors():
    out = cf.nash_standard(hom(2, 1, Policy.STANDARD))
    assert out.status is Status.CONDITION_VIOLATED and out.allocation is None
    with pytest.raises(RegimeError):
        cf.nash_standard(build([1, 2, 3], [1], policy=Policy.STANDARD, behavior=PA))
    with pytest.raises(RegimeError):
        cf.nash_standard(hom(4, 1, Policy.DAY_AHEAD_MPM))


@given(st.integers(3, 60), st.integers(1, 30))
def test_nash_standard_stage_bounds(G, L):
    a = cf.nash_standard(hom(G, L, Policy.STANDARD)).allocation
    assert 0.5 < a.total_d_d < 1 and 0 < a.total_d_r < 0.5
    assert_clears(a)


# -- Nash, mitigated markets ------------------------------------------------

@pytest.mark.parametrize("G", [1, 2, 5])
def test_nash_rt_mpm_never_exists(G):
    out = cf.nash_rt_mpm(hom(G, 2, Policy.REAL_TIME_MPM))
    assert out.status is Status.NO_EQUILIBRIUM and out.allocation is None
    assert ("one generator" in out.detail) == (G == 1)


def test_nash_rt_mpm_two_load_five_generator_case():
    sc = build([0.1] * 5, [99.4, 199.6], 0.0, Policy.REAL_TIME_MPM, PA)
    assert cf.nash_rt_mpm(sc).status is Status.NO_EQUILIBRIUM


def test_nash_da_mpm_example():
    a = cf.nash_da_mpm_symmetric(hom(4, 1, Policy.DAY_AHEAD_MPM)).allocation
    assert a.d_d[0] == pytest.approx(3 / 4) and a.theta_r[0] == pytest.approx(1 / 6)
    assert a.lambda_d == pytest.approx(3 / 16) and a.lambda_r == pytest.approx(3 / 8)
    assert a.g_d[0] == pytest.approx(3 / 16) and a.g_r[0] == pytest.approx(1 / 16)
    assert 4 * (1 / 6) * (3 / 8) == pytest.approx(a.total_d_r)


def test_nash_da_mpm_boundary_and_error_widening():
    out = cf.nash_da_mpm_symmetric(hom(4, 2, Policy.DAY_AHEAD_MPM))
    assert out.status is Status.NO_EQUILIBRIUM and "boundary" in out.detail
    out = cf.nash_da_mpm_symmetric(hom(4, 2, Policy.DAY_AHEAD_MPM, eps=0.2))
    assert out.status is Status.UNIQUE
    assert out.condition.rhs == pytest.approx(0.25)
    out = cf.nash_da_mpm_symmetric(hom(4, 3, Policy.DAY_AHEAD_MPM))
    assert out.status is Status.NO_EQUILIBRIUM and "negative" in out.detail


def test_nash_da_mpm_few_generators():
    out = cf.nash_da_mpm_symmetric(hom(2, 1, Policy.DAY_AHEAD_MPM))
    assert out.status is Status.CONDITION_VIOLATED
    with pytest.raises(RegimeError):
        cf.nash_da_mpm_symmetric(build([1, 1, 1], [1], [0, 0.1, 0], Policy.DAY_AHEAD_MPM, PA))


def test_load_count_condition_exact_boundary():
    # 1/L == rhs exactly in rational arithmetic
    cond = cf.load_count_condition(5, 3, 1.0, 0.0)
    assert cond.lhs == pytest.approx(cond.rhs) and not cond.satisfied
    fc, fe = Fraction(0.3), Fraction(0.1)
    rhs = (fc - fe * 3) / ((fc + fe) * 3)
    assert cf.load_count_condition(5, 7, 0.3, 0.1).satisfied == (Fraction(1, 7) > rhs)


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 30), st.integers(1, 30), st.floats(0.01, 10), st.floats(0, 1), st.floats(1, 1000))
def test_shared_prices_and_clearing(G, L, c, e, d):
    eps = e * c
    da = cf.nash_da_mpm_symmetric(hom(G, L, Policy.DAY_AHEAD_MPM, c, eps, d))
    std = cf.nash_standard(hom(G, L, Policy.STANDARD, c, 0.0, d))
    if not da.exists:
        return
    da.allocation.validate(hom(G, L, Policy.DAY_AHEAD_MPM, c, eps, d))
    assert_clears(da.allocation)
    assert_clears(std.allocation)
    assert da.allocation.lambda_d == pytest.approx(std.allocation.lambda_d, rel=1e-12)
    assert da.allocation.lambda_r == pytest.approx(std.allocation.lambda_r, rel=1e-12)
    if eps == 0:
        assert 0.5 * d < da.allocation.total_d_d < d


@pytest.mark.parametrize("G, L, eps", [(6, 1, 0.0), (6, 3, 0.0), (8, 2, 0.3), (5, 3, 0.5), (4, 3, 0.9), (6, 4, 0.4)])
def test_payment_side_of_competitive(G, L, eps):
    sc = hom(G, L, Policy.DAY_AHEAD_MPM, eps=eps)
    t = cf.aggregate_tables(sc)
    assert t.ne_payment is not None
    if L < G - 2:
        assert t.ne_payment < t.ce_payment
    else:
        assert t.ne_payment > t.ce_payment


# -- tables -----------------------------------------------------------------

@pytest.mark.parametrize("G, c, d", [(3, 1.0, 1.0), (7, 0.3, 20.0)])
def test_table_ce_row(G, c, d):
    t = cf.aggregate_tables(hom(G, 1, Policy.DAY_AHEAD_MPM, c, 0.0, d))
    assert t.ce_profit == pytest.approx(0.5 * c / G * d * d) and t.ce_payment == pytest.approx(c / G * d * d)


def test_table_ne_examples_match_settlement():
    sc = hom(4, 1, Policy.DAY_AHEAD_MPM)
    assert cf.aggregate_tables(sc).ne_payment == pytest.approx(0.234375)
    assert settle(cf.nash_da_mpm_symmetric(sc).allocation, sc).aggregate_payment == pytest.approx(0.234375)
    sc = hom(4, 1, Policy.STANDARD)
    assert cf.aggregate_tables(sc).ne_payment == pytest.approx(0.25)
    assert settle(cf.nash_standard(sc).allocation, sc).aggregate_payment == pytest.approx(0.25)


def test_tables_reject_rt_mpm():
    with pytest.raises(RegimeError):
        cf.aggregate_tables(hom(4, 1, Policy.REAL_TIME_MPM))


def test_normalized_difference_examples():
    assert cf.normalized_ne_difference(4, 1, 1.0, 0.0) == pytest.approx(-1 / 8)
    # G=3, L=1 sits on the existence boundary: only the bare expression is defined
    assert cf.normalized_ne_difference(3, 1, 1.0, 0.0, check=False) == pytest.approx(-1 / 2)
    with pytest.raises(cf.ConditionViolatedError):
        cf.normalized_ne_difference(3, 1, 1.0, 0.0)


def test_normalized_difference_vanishes_for_many_loads():
    vals = [abs(cf.normalized_ne_difference(L + 3, L, 1.0, 0.0)) for L in (10, 100, 1000)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-2


def test_normalized_difference_with_error_is_profit_difference():
    G, L, c, eps = 6, 2, 1.0, 0.3
    a = cf.aggregate_tables(hom(G, L, Policy.DAY_AHEAD_MPM, c, eps))
    b = cf.aggregate_tables(hom(G, L, Policy.STANDARD, c))
    diff = cf.normalized_ne_difference(G, L, c, eps)
    assert diff == pytest.approx(a.ne_profit / a.ce_profit - b.ne_profit / b.ce_profit, rel=1e-12)
    assert diff / 2 == pytest.approx(a.ne_payment / a.ce_payment - b.ne_payment / b.ce_payment, rel=1e-12)


def test_normalized_difference_requires_existence():
    with pytest.raises(cf.ConditionViolatedError):
        cf.normalized_ne_difference(4, 2, 1.0, 0.0)
