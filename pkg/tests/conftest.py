import numpy as np
import pytest

from freebound.model import ProblemSpec, ReactionPair, builtin_catalog, cosine_data


def linear_pair(a1=0.0, a2=0.0, name="linear"):
    """``f1 = a1 u``, ``f2 = a2 v``."""
    return ReactionPair(lambda t, x, u, v: a1 * u, lambda t, x, u, v: a2 * v, name)


def zero_pair():
    return ReactionPair(lambda t, x, u, v: 0.0 * u, lambda t, x, u, v: 0.0 * v, "zero")


def make_spec(model="epidemic", t_final=0.5, h0=1.0, d=1.0, mu=1.0, beta=1.0, params=None,
              reactions=None, init=None):
    rp = reactions if reactions is not None else builtin_catalog(model, params)
    return ProblemSpec(rp, d, mu, beta, init if init is not None else cosine_data(h0), t_final)


@pytest.fixture
def epidemic_spec():
    return make_spec("epidemic", t_final=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
