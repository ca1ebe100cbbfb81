import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage_mpm.core import (
    ClearingRule,
    DegenerateClearingError,
    EquilibriumOutcome,
    GeneratorParams,
    InconsistentAllocationError,
    LoadParams,
    MarketScenario,
    StageAllocation,
    Status,
    clear_stage,
    even_split,
    settle,
    social_cost,
    solve_social_planner,
)


def test_clear_stage_balanced():
    res = clear_stage([1, 1], 2.0)
    assert res.price == 1.0 and res.rule is ClearingRule.BALANCE


def test_clear_stage_zero_supply_zero_demand_takes_other_price():
    res = clear_stage([0, 0], 0.0, 3.5)
    assert res.price == 3.5 and res.rule is ClearingRule.SAME_PRICE


def test_clear_stage_zero_supply_positive_demand_clears_at_zero():
    res = clear_stage([0, 0], 4.0)
    assert res.price == 0.0 and res.even_split
    assert np.allclose(even_split(4.0, 2), [2.0, 2.0])


def test_clear_stage_missing_other_price():
    with pytest.raises(DegenerateClearingError):
        clear_stage([0.0], 0.0)


@pytest.mark.parametrize("bad", [dict(c=0.0), dict(c=-1.0), dict(c=1.0, eps=-0.1), dict(c=float("nan"))])
def test_generator_validation(bad):
    with pytest.raises(ValueError):
        GeneratorParams(**bad)


def test_load_and_scenario_validation():
    with pytest.raises(ValueError):
        LoadParams(0.0)
    with pytest.raises(ValueError):
        MarketScenario((), (LoadParams(1.0),))
    sc = MarketScenario.build([1, 2], [1, 2])
    assert (sc.G, sc.L, sc.d) == (2, 2, 3.0)


@pytest.mark.parametrize("c, d, g, cost", [
    ([1, 1], 2, [1, 1], 1.0),
    ([1, 2], 3, [2, 1], 3.0),
    ([0.1] * 5, 299, [59.8] * 5, 0.05 * 5 * 59.8 ** 2),
])
def test_social_planner_examples(c, d, g, cost):
    sc = MarketScenario.build(c, [d])
    disp, val = solve_social_planner(sc)
    assert np.allclose(disp, g) and val == pytest.approx(cost)


def test_social_planner_two_generator_grid_oracle():
    sc = MarketScenario.build([1, 2], [3])
    g1 = np.linspace(0, 3, 3001)
    costs = 0.5 * g1 ** 2 + 1.0 * (3 - g1) ** 2
    assert solve_social_planner(sc)[1] == pytest.approx(costs.min(), rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=8), st.floats(1, 1000), st.integers(0, 2 ** 31))
def test_planner_beats_random_dispatch(c, d, seed):
    sc = MarketScenario.build(c, [d])
    _, best = solve_social_planner(sc)
    w = np.random.default_rng(seed).dirichlet(np.ones(len(c)), 1000) * d
    assert np.all(0.5 * (np.asarray(c) * w * w).sum(axis=1) >= best * (1 - 1e-12))


def _equal_price_allocation(split):
    # two generators, one load of 2, both prices 1, stage split ``split`` of each
    return StageAllocation(theta_d=[split, split], theta_r=[1 - split, 1 - split],
                           g_d=[split, split], g_r=[1 - split, 1 - split],
                           d_d=[2 * split], d_r=[2 - 2 * split], lambda_d=1.0, lambda_r=1.0)


def test_settle_equal_prices_example():
    sc = MarketScenario.build([1, 1], [2])
    rep = settle(_equal_price_allocation(0.5), sc)
    assert rep.profits == pytest.approx((0.5, 0.5))
    assert rep.payments == pytest.approx((2.0,))
    assert rep.social_cost == pytest.approx(1.0)


@given(st.floats(0.0, 1.0))
def test_settle_split_invariance_at_equal_prices(split):
    sc = MarketScenario.build([1, 1], [2])
    rep = settle(_equal_price_allocation(split), sc)
    assert rep.payments == pytest.approx((2.0,))
    assert rep.aggregate_profit == pytest.approx(rep.aggregate_payment - rep.social_cost)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 5), min_size=2, max_size=5), st.lists(st.floats(0.1, 5), min_size=1, max_size=4),
       st.floats(0.05, 0.95))
def test_revenue_identity(theta_d, loads, frac):
    G = len(theta_d)
    theta_d = np.asarray(theta_d)
    d = np.asarray(loads)
    d_d = frac * d
    lam_d = d_d.sum() / theta_d.sum()
    theta_r = np.full(G, 1.0)
    lam_r = (d - d_d).sum() / G
    alloc = StageAllocation(theta_d, theta_r, theta_d * lam_d, theta_r * lam_r, d_d, d - d_d, lam_d, lam_r)
    sc = MarketScenario.build(np.ones(G), d)
    rep = settle(alloc, sc)
    assert rep.generator_revenue == pytest.approx(rep.aggregate_payment, rel=1e-12)
    assert rep.aggregate_profit == pytest.approx(rep.aggregate_payment - rep.social_cost, rel=1e-9, abs=1e-12)
    assert rep.social_cost == pytest.approx(social_cost(alloc.g, sc))


def test_settle_rejects_imbalance():
    sc = MarketScenario.build([1, 1], [2])
    a = _equal_price_allocation(0.5)
    bad = StageAllocation(a.theta_d, a.theta_r, (0.6, 0.5), a.g_r, a.d_d, a.d_r, 1.0, 1.0)
    with pytest.raises(InconsistentAllocationError):
        settle(bad, sc)


def test_outcome_invariants():
    with pytest.raises(ValueError):
        EquilibriumOutcome(None, Status.UNIQUE)
    with pytest.raises(ValueError):
        EquilibriumOutcome(_equal_price_allocation(0.5), Status.NO_EQUILIBRIUM)
    with pytest.raises(ValueError):
        EquilibriumOutcome(_equal_price_allocation(0.5), Status.NON_UNIQUE_FAMILY)
    assert not EquilibriumOutcome(None, Status.NO_EQUILIBRIUM).exists


def test_normalized_settlement_against_itself():
    sc = MarketScenario.build([1, 1], [2])
    a = _equal_price_allocation(0.3)
    rep = settle(a, sc, benchmark=a)
    assert rep.normalized_aggregate_profit == pytest.approx(1.0)
    assert rep.normalized_payments == pytest.approx((1.0,))
