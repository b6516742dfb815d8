from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statepop.algebra import (
    Alphabet, Evaluation, ModeError, NCStatePoly, ParseError, StatePoly, evaluate, involution, mul,
    parse_poly, random_evaluation, sigma, to_string,
)

from conftest import N_VARS, polys, state_polys

many = settings(max_examples=1000, deadline=None)


@many
@given(polys())
def test_involution_is_involutive(f):
    assert involution(involution(f)) == f


@many
@given(polys(), polys())
def test_involution_reverses_products(f, g):
    assert involution(mul(f, g)) == mul(involution(g), involution(f))


@many
@given(polys())
def test_sigma_fixes_adjoints(f):
    assert sigma(involution(f)) == sigma(f)


@many
@given(polys(), polys())
def test_sigma_linear(f, g):
    assert sigma(f + g) == sigma(f) + sigma(g)


@many
@given(state_polys(), polys())
def test_sigma_state_linear(s, f):
    # scalars pull out of the state map
    assert sigma(mul(s, f)) == mul(s, sigma(f))
    assert sigma(s) == s


def as_matrix(v, k=3):
    return v * np.eye(k) if np.ndim(v) == 0 else np.asarray(v)


@settings(max_examples=200, deadline=None)
@given(polys(), polys(), st.integers(0, 2**31))
def test_evaluation_is_multiplicative(f, g, seed):
    e = random_evaluation(N_VARS, 3, np.random.default_rng(seed))
    lhs = as_matrix(evaluate(mul(f, g).to_float(), e))
    rhs = as_matrix(evaluate(f.to_float(), e)) @ as_matrix(evaluate(g.to_float(), e))
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * (1 + np.max(np.abs(lhs))))


@settings(max_examples=200, deadline=None)
@given(polys(), st.integers(0, 2**31))
def test_evaluation_respects_involution(f, seed):
    e = random_evaluation(N_VARS, 3, np.random.default_rng(seed))
    a = np.atleast_2d(evaluate(f.to_float(), e))
    b = np.atleast_2d(evaluate(involution(f).to_float(), e))
    if a.shape == (1, 1):
        np.testing.assert_allclose(a, b, atol=1e-8 * (1 + abs(a).max()))
    else:
        np.testing.assert_allclose(a.T, b, atol=1e-8 * (1 + abs(a).max()))


@many
@given(polys())
def test_print_parse_roundtrip(f):
    al = Alphabet.default(N_VARS)
    assert parse_poly(to_string(f, al), al) == f


def test_example_value_minus_eighteen():
    X1 = np.array([[1.0, 1.0], [1.0, 0.0]])
    X2 = np.array([[0.0, 1.0], [1.0, 1.0]])
    v = np.array([1.0, 0.0])
    f = parse_poly("s(x1^6)*s(x2^6)^2 - s(x1^2*x2^4)^3")
    got = evaluate(f, Evaluation([X1, X2], v))
    mp = np.linalg.matrix_power
    ref = (v @ mp(X1, 6) @ v) * (v @ mp(X2, 6) @ v) ** 2 - (v @ mp(X1, 2) @ mp(X2, 4) @ v) ** 3
    assert got == ref == -18


def test_exact_evaluation_uses_fractions():
    F = Fraction
    X = np.array([[F(1), F(1, 2)], [F(1, 2), F(0)]], dtype=object)
    rho = np.array([[F(1, 3), F(0)], [F(0), F(2, 3)]], dtype=object)
    val = evaluate(parse_poly("s(x1^2) - s(x1)^2"), Evaluation([X], rho))
    assert isinstance(val, Fraction)
    # <X^2> = 1/3*(5/4) + 2/3*(1/4) = 7/12, <X> = 1/3
    assert val == F(7, 12) - F(1, 9)


def test_mixed_modes_rejected():
    with pytest.raises(ModeError):
        NCStatePoly.var(0) + NCStatePoly.var(0).to_float()


def test_degree_and_symbol_canonical():
    f = parse_poly("s(x2*x1) - s(x1*x2)")
    assert f.is_zero()
    g = parse_poly("s(x1*x2)*x1^2 + 3")
    assert g.degree == 4
    with pytest.raises(ValueError):
        NCStatePoly.zero().degree


def test_sigma_returns_state_poly():
    f = parse_poly("x1*x2 + s(x1)*x2")
    s = sigma(f)
    assert isinstance(s, StatePoly) and s.is_state()
    assert s == parse_poly("s(x1*x2) + s(x1)*s(x2)")


@pytest.mark.parametrize("text,line,col", [
    ("x1 + ", 1, 6),
    ("s(x1", 1, 5),
    ("x1 +\n  * x2", 2, 3),
    ("x1 ^ x2", 1, 6),
])
def test_parse_errors_carry_position(text, line, col):
    with pytest.raises(ParseError) as exc:
        parse_poly(text, Alphabet.default(2))
    assert (exc.value.line, exc.value.col) == (line, col)


def test_alphabet_split_and_names():
    al = Alphabet(["A1", "B1", "B12"])
    assert al.split("A1B1") == [0, 1]
    assert al.split("B12") == [2]
    assert parse_poly("A1*B1").degree == 2
