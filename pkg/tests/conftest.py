import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from rfl.problem import ExpWindow, MissingPattern, build_problem
from rfl.spectra import Rational

settings.register_profile("rfl", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("rfl")

F_OU = Rational((2.0,), (1.0, 1.0))
G_OU2 = Rational((1.0,), (4.0, 1.0))
A_EXP = ExpWindow(1.0, 5.0)
GAP1 = MissingPattern(((-3.0, -2.0),))

ACCEPTANCE_LINES = []


def p1_problem(dt=0.05, n_freq=8192, pattern=GAP1, weight=A_EXP, horizon=8.0, obs_horizon=12.0):
    return build_problem(pattern, weight, dt=dt, horizon=horizon, obs_horizon=obs_horizon,
                         n_freq=n_freq, cutoff=64.0 if dt == 0.05 else None)


@pytest.fixture(scope="session")
def p1():
    """The full-size P1 fixture."""
    return p1_problem()


@pytest.fixture(scope="session")
def small():
    """P1 geometry on a coarse grid for quick tests."""
    return p1_problem(dt=0.1, n_freq=2048)


@st.composite
def rationals(draw, min_c1=0.0):
    """``(c0 + c1 l^2) / ((l^2 + a)(l^2 + b))`` with positive roots.

    ``min_c1 > 0`` keeps the tail at order ``l^-2``, which the filter's
    minimality check needs.
    """
    a = draw(st.floats(0.2, 6.0))
    b = draw(st.floats(0.2, 6.0))
    c0 = draw(st.floats(0.1, 5.0))
    c1 = draw(st.floats(min_c1, 2.0))
    return Rational((c0, c1), (a * b, a + b, 1.0))


def random_rational(rng: np.random.Generator) -> Rational:
    """Random draw from the same family with an ``l^-2`` tail."""
    a, b = rng.uniform(0.2, 6.0, 2)
    c0, c1 = rng.uniform(0.1, 5.0), rng.uniform(0.1, 2.0)
    return Rational((c0, c1), (a * b, a + b, 1.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
