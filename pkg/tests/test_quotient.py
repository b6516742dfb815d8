import itertools

import pytest
from hypothesis import given, settings, strategies as st

from statepop.algebra import NCStatePoly, parse_poly
from statepop.quotient import (
    FREE, PROJECTION, UNITARY, QuotientContext, Subgroup, UnsupportedError, subgroup_level,
    support_generators, support_subgroup_filter,
)


def bell_context(linked=((0, 1),)):
    # parties {0,1} and {2,3}, binary observables
    return QuotientContext(4, (UNITARY,) * 4, [(a, b) for a in (0, 1) for b in (2, 3)],
                           party=(0, 0, 1, 1), linked=list(linked))


def mixed_context():
    kinds = (UNITARY, UNITARY, PROJECTION, PROJECTION)
    return QuotientContext(4, kinds, [(0, 2), (1, 3)], orthogonal=[(2, 3)])


def brute_normal_form(q, w):
    """Lex-least shortest word reachable by commutations and reductions (None for zero)."""
    seen = {tuple(w)}
    stack = [tuple(w)]
    while stack:
        u = stack.pop()
        for i in range(len(u) - 1):
            a, b = u[i], u[i + 1]
            nxt = []
            if a != b and q.commutes(a, b):
                nxt.append(u[:i] + (b, a) + u[i + 2:])
            if a == b and q.kinds[a] == UNITARY:
                nxt.append(u[:i] + u[i + 2:])
            if a == b and q.kinds[a] == PROJECTION:
                nxt.append(u[:i + 1] + u[i + 2:])
            if a != b and ((a, b) in q.orthogonal or (b, a) in q.orthogonal):
                return None
            for v in nxt:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    m = min(len(v) for v in seen)
    return min(v for v in seen if len(v) == m)


@pytest.mark.parametrize("make", [bell_context, mixed_context])
def test_confluence_exhaustive_to_length_six(make):
    q = make()
    for k in range(7):
        for w in itertools.product(range(4), repeat=k):
            assert q.normalize(w) == brute_normal_form(q, w), w


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=6), st.lists(st.integers(0, 3), max_size=6))
def test_normal_form_is_compatible_with_products(u, v):
    for q in (bell_context(), mixed_context()):
        nu, nv = q.normalize(u), q.normalize(v)
        direct = q.normalize(u + v)
        if nu is None or nv is None:
            assert direct is None
        else:
            assert q.normalize(nu + nv) == direct
            assert q.normalize(direct) == direct if direct is not None else True


def test_free_context_is_identity():
    q = QuotientContext(3)
    assert q.normalize((0, 0, 1, 2, 2)) == (0, 0, 1, 2, 2)


def test_factorization_components():
    q = bell_context(linked=())
    # parties unlinked: s(x1 y1) factorizes into s(x1) s(y1)
    assert q.canonical_state_symbol((0, 2)) == ((0,), (2,))
    linked = bell_context()
    assert len(linked.canonical_state_symbol((0, 2))) == 1


def test_tracial_symbols_are_cyclic():
    q = QuotientContext(2, (UNITARY, UNITARY), tracial=True)
    assert q.canonical_state_symbol((0, 1, 0, 1, 1)) == q.canonical_state_symbol((1, 0, 1, 1, 0))


def test_star_reverses():
    q = mixed_context()
    assert q.star((0, 1)) == q.normalize((1, 0))


def test_orthogonality_requires_projections():
    with pytest.raises(ValueError):
        QuotientContext(2, (UNITARY, UNITARY), orthogonal=[(0, 1)])


def test_cross_party_must_commute():
    with pytest.raises(ValueError):
        QuotientContext(2, (UNITARY, UNITARY), party=(0, 1))


def test_subgroup_filter_on_uffink_support():
    q = bell_context()
    a = parse_poly("(s(x1*x4) + s(x2*x3))^2 + (s(x1*x3) - s(x2*x4))^2")
    gens = support_generators(a, q)
    assert all(len(g) == 2 for g in gens)
    assert subgroup_level(a, q, 3) == 4
    H = Subgroup(q, gens, 4)
    assert () in H and (0, 2) in H and (0,) not in H


def test_subgroup_needs_group():
    q = mixed_context()
    with pytest.raises(UnsupportedError):
        support_subgroup_filter(NCStatePoly.symbol((0,)), q, [((), ())])
