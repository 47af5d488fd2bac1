import numpy as np
import pytest
from hypothesis import settings

from insiderlab.model import PayoffSpec, construct_weighting
from insiderlab.pricing import PricingRule
from insiderlab.scenarios import S2_PARTITION, s0, s1, s2

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def S0():
    return s0()


@pytest.fixture(scope="session")
def S1():
    return s1()


@pytest.fixture(scope="session")
def S2():
    return s2()


@pytest.fixture(scope="session")
def w2(S2):
    return construct_weighting(S2, S2_PARTITION)


@pytest.fixture(scope="session")
def rule_id():
    return PricingRule.markov(PayoffSpec("identity"))


@pytest.fixture(scope="session")
def rule_cubic():
    return PricingRule.markov(PayoffSpec("cubic"))


@pytest.fixture(scope="session")
def rule_s2(S2, w2):
    return PricingRule.weighted(S2.payoff, w2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def record(key, passed, detail):
    """Store one acceptance verdict for the terminal summary."""
    ACCEPTANCE[key] = (bool(passed), detail)
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
