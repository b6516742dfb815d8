import numpy as np
import pytest

from statepop.algebra import Evaluation
from statepop.extract import (
    ExtractionError, certify_finite_convergence, check_flatness, gns_extract, minimize_trace, read_model,
    write_model,
)
from statepop.moment import solve_relaxation
from statepop.relax import RelaxOptions, build_relaxation
from statepop.scenarios import parse_problem, verify_model

PRODUCT = """
scenario two { parties x y; sources s -> x y; inputs x:1 y:1 }
objective s(x1) + s(y1)
sense min
level 2
"""


def solved(text, level):
    pf = parse_problem(text)
    return pf, solve_relaxation(build_relaxation(pf.problem, RelaxOptions(level)))


@pytest.fixture(scope="module")
def rank_one():
    return solved(PRODUCT, 2)


@pytest.fixture(scope="module")
def exa3():
    from statepop.scenarios import builtin
    return solved(builtin("exa3").text, 2)


def test_rank_one_flat(rank_one):
    pf, res = rank_one
    assert abs(res.bound + 2) < 1e-7
    rep = check_flatness(res)
    assert rep.flat and rep.rank_full == 1


def test_rank_one_extraction(rank_one):
    pf, res = rank_one
    model = gns_extract(res, check_flatness(res))
    assert model.dimension == 1
    X, Y = model.operators
    assert np.max(np.abs(X @ Y - Y @ X)) < 1e-8
    ok, gap = certify_finite_convergence(model, res)
    assert ok and gap < 1e-7


def test_exa3_flat_and_extracted(exa3):
    pf, res = exa3
    rep = check_flatness(res)
    assert rep.flat
    model = gns_extract(res, rep)
    assert model.dimension == 4
    ok, gap = certify_finite_convergence(model, res)
    assert ok and gap < 1e-5
    for X in model.operators:
        assert np.max(np.abs(X @ X - np.eye(4))) < 1e-6
    assert model.moment_residual < 1e-6
    check = verify_model(pf.problem, model.operators, model.vector, tol=1e-6)
    assert check.feasible


def test_moments_reproduced_on_all_level_d_labels(exa3):
    pf, res = exa3
    model = gns_extract(res, check_flatness(res))
    ev = Evaluation(model.operators, model.vector, tol=1e-6)
    rel = res.relaxation
    worst = 0.0
    for k, lab in enumerate(rel.labels):
        if sum(len(w) for w in lab) > 2:
            continue
        val = 1.0
        for w in lab:
            val *= float(np.real(ev.expect(ev.word(w))))
        worst = max(worst, abs(val - res.moments[k]))
    assert worst < 1e-6


def test_non_flat_refuses():
    from statepop.scenarios import builtin
    pf, res = solved(builtin("chsh").text, 2)
    rep = check_flatness(res)
    if rep.flat:
        pytest.skip("solution happens to be flat")
    with pytest.raises(ExtractionError):
        gns_extract(res, rep)


def test_trace_minimization_keeps_value(rank_one):
    pf, res = rank_one
    rel2 = minimize_trace(res.relaxation, res.bound, slack=1e-6)
    res2 = solve_relaxation(rel2)
    assert res2.status in ("optimal", "near-optimal")
    obj = sum(c * res2.moments[k] for k, c in res.relaxation.objective.items())
    assert obj <= res.bound + 2e-6


def test_model_file_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3))
    h = (a + a.T) / 2 + 1j * np.triu(a, 1) - 1j * np.triu(a, 1).T
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    p = tmp_path / "m.txt"
    write_model(p, [a + a.T, h], v)
    ops, st = read_model(p)
    assert np.array_equal(ops[0], a + a.T) and np.array_equal(ops[1], h) and np.array_equal(st, v)
    rho = np.outer(v, v)
    write_model(p, [a + a.T], rho)
    ops, st = read_model(p)
    assert np.array_equal(st, rho)
