from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from statepop.algebra import NCStatePoly, canonical_symbol, make_sword

settings.register_profile("default", deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    def add(criterion: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return add


N_VARS = 3


def words(max_len=3, n=N_VARS):
    return st.lists(st.integers(0, n - 1), max_size=max_len).map(tuple)


def symbols(max_len=3, n=N_VARS):
    return st.lists(st.integers(0, n - 1), min_size=1, max_size=max_len).map(canonical_symbol)


monomials = st.tuples(st.lists(symbols(), max_size=2).map(make_sword), words())
coefs = st.fractions(min_value=-5, max_value=5, max_denominator=6).filter(lambda c: c != 0)


@st.composite
def polys(draw, max_terms=4):
    terms = draw(st.dictionaries(monomials, coefs, max_size=max_terms))
    return NCStatePoly(terms)


@st.composite
def state_polys(draw, max_terms=4):
    terms = draw(st.dictionaries(st.lists(symbols(), max_size=3).map(make_sword), coefs, max_size=max_terms))
    return NCStatePoly({(s, ()): c for s, c in terms.items()})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
