import pytest

from twostage_mpm.core import Behavior, MarketScenario, Policy


def scenario(policy, behavior, G=None, L=None, c=1.0, eps=0.0, d=1.0, costs=None, loads=None):
    if costs is not None:
        return MarketScenario.build(costs, loads, eps, policy, behavior)
    return MarketScenario.homogeneous(G, L, c, eps, d, policy, behavior)


@pytest.fixture
def da_nash():
    def make(**kw):
        return scenario(Policy.DAY_AHEAD_MPM, Behavior.PRICE_ANTICIPATING, **kw)
    return make


@pytest.fixture
def std_nash():
    def make(**kw):
        return scenario(Policy.STANDARD, Behavior.PRICE_ANTICIPATING, **kw)
    return make
