import hypothesis.extra.numpy as npst
import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from freeutility.prob import Alphabet, CausalModel, VariableSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def simplex(draw, min_size=2, max_size=8, min_prob=1e-3):
    """Full-support probability vectors."""
    size = draw(st.integers(min_size, max_size))
    raw = draw(npst.arrays(np.float64, (size,), elements=st.floats(min_prob, 1.0)))
    return raw / raw.sum()


def binary(name, io=None, mode=None):
    kw = {}
    if io is not None:
        kw["io_type"] = io
    if mode is not None:
        kw["vp_mode"] = mode
    return VariableSpec(name, Alphabet.of_size(2), **kw)


@pytest.fixture
def chain():
    """P(x1) = (0.8, 0.2); P(x2=0 | x1=0) = 0.5, P(x2=0 | x1=1) = 0.9."""
    return CausalModel.from_arrays(
        [binary("x1"), binary("x2")], [[0.8, 0.2], [[0.5, 0.5], [0.9, 0.1]]]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
