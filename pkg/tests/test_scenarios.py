import math
from fractions import Fraction

import numpy as np
import pytest

from statepop.algebra import ParseError, evaluate, Evaluation
from statepop.moment import solve_relaxation
from statepop.quotient import PROJECTION, UNITARY
from statepop.relax import RelaxOptions, build_relaxation
from statepop.scenarios import (
    BUILTIN_TEXT, NetworkScenario, ScenarioError, builtin, builtin_examples, deterministic_max, parse_problem,
    reference_model, spatial_model, verify_model,
)


def test_registry_contents():
    ex = builtin_examples()
    for name in ("uffink", "covariance", "exa3", "exa3-tracial", "bilocal-chaves", "bilocal-i3322", "z0", "z0-complex"):
        assert name in ex
    assert ex["uffink"].level == 3 and ex["uffink"].reference == 4
    assert ex["covariance"].level == 2 and ex["covariance"].reference == 5
    assert ex["bilocal-chaves"].reference == 4
    with pytest.raises(KeyError):
        builtin("nope")


def test_chsh_relations():
    q = builtin("chsh").load().problem.q
    assert q.kinds == (UNITARY,) * 4
    assert q.commutes(0, 2) and q.commutes(1, 3) and not q.commutes(0, 1)


def test_bilocal_factorization():
    q = builtin("bilocal-chaves").load().problem.q
    # x and z share no source
    assert q.canonical_state_symbol((0, 4)) == ((0,), (4,))
    assert len(q.canonical_state_symbol((0, 2))) == 1


def test_single_party_trivial():
    pf = parse_problem("scenario one { parties x; sources s -> x; inputs x:1 }\nobjective s(x1)\nlevel 1\n")
    res = solve_relaxation(build_relaxation(pf.problem, RelaxOptions(1)))
    assert abs(res.bound - 1) < 1e-6


def test_compile_is_deterministic():
    a = builtin("bilocal-i3322").load()
    b = builtin("bilocal-i3322").load()
    assert a.problem.objective == b.problem.objective
    assert a.problem.q.commuting == b.problem.q.commuting
    assert a.problem.alphabet.names == b.problem.alphabet.names
    assert a.digest == b.digest


def test_three_outcome_party_uses_projections():
    pf = parse_problem("scenario t { parties A B; sources s -> A B; outputs A:3 B:2; inputs A:1 B:1 }\n"
                       "objective s(A1_1) + s(A1_2*B1)\nlevel 1\n")
    q = pf.problem.q
    assert pf.problem.alphabet.names == ["A1_1", "A1_2", "A1_3", "B1"]
    assert q.kinds[:3] == (PROJECTION,) * 3 and q.kinds[3] == UNITARY
    assert q.normalize((0, 1)) is None
    assert [c.kind for c in pf.problem.constraints] == ["eq"]
    loose = solve_relaxation(build_relaxation(pf.problem, RelaxOptions(1)))
    res = solve_relaxation(build_relaxation(pf.problem, RelaxOptions(2)))
    # A1_1 + A1_2 <= 1 and s(A1_2 B1) <= s(A1_2): the optimum is 1
    assert abs(res.bound - 1) < 1e-5
    assert loose.bound >= res.bound - 1e-6


@pytest.mark.parametrize("text,line,col,msg", [
    ("scenario c { parties x y; sources s -> x y; inputs x:2 y:2 }\nobjective s(x1*y1) +\nlevel 1\n", 2, 21, "expected"),
    ("scenario c { parties x y; sources s -> x y; inputs x:2 y:2 }\nobjective s(x1*y9)\n", 2, 16, "undeclared"),
    ("scenario c { parties x y; sources s -> x y; inputs x:2 y:2 }\nfrobnicate\n", 2, 1, "unknown statement"),
    ("scenario c { parties x y; sources s -> x y; inputs x:2 y:2 }\nobjective s(x1)\nclass magic\n", 3, 7, "model class"),
    ("scenario c { parties x y; sources s -> x; inputs x:2 y:2 }\nobjective s(x1)\n", 1, 1, "accesses no source"),
    ("scenario c { parties x y;\n sources s -> x y; inputs x:2 y:2 \nobjective s(x1)\n", 1, 1, "unclosed"),
])
def test_parse_errors(text, line, col, msg):
    with pytest.raises(ParseError) as e:
        parse_problem(text)
    assert e.value.line == line
    if col:
        assert e.value.col == col
    assert msg in str(e.value)


def test_free_variables_without_scenario():
    pf = parse_problem("variables a b\nunitary a b\ncommute a | b\nobjective s(a*b) + s(a) \nsense max\nlevel 1\n")
    assert pf.problem.q.commutes(0, 1)
    res = solve_relaxation(build_relaxation(pf.problem, RelaxOptions(1)))
    assert abs(res.bound - 2) < 1e-6


def test_macros_in_any_order():
    pf = parse_problem("scenario c { parties x y; sources s -> x y; inputs x:1 y:1 }\n"
                       "objective 2*M\nmacro M = N + s(y1)\nmacro N = s(x1)\nlevel 1\n")
    assert pf.problem.objective == parse_problem(
        "scenario c { parties x y; sources s -> x y; inputs x:1 y:1 }\nobjective 2*s(x1) + 2*s(y1)\n").problem.objective


def test_chaves_explicit_model():
    pf = builtin("bilocal-chaves").load()
    ops, psi = reference_model("bilocal-chaves")
    chk = verify_model(pf.problem, ops, psi, tol=1e-9)
    assert chk.feasible and abs(chk.objective - 4) < 1e-9
    ev = Evaluation(ops, psi)
    j1 = float(evaluate(pf.macros["j1"].to_float(), ev))
    j2 = float(evaluate(pf.macros["j2"].to_float(), ev))
    assert abs(math.sqrt(abs(j1)) + math.sqrt(abs(j2)) - 2 * math.sqrt(2)) < 1e-9


def test_i3322_explicit_model():
    pf = builtin("bilocal-i3322").load()
    chk = verify_model(pf.problem, *reference_model("bilocal-i3322"), tol=1e-9)
    assert chk.feasible and abs(chk.objective - 13.3309) < 5e-4


def test_exa3_models():
    pf = builtin("exa3").load()
    chk = verify_model(pf.problem, *reference_model("exa3"), tol=1e-9)
    assert chk.feasible and abs(chk.objective - 3.51148) < 5e-4
    chk = verify_model(pf.problem, *reference_model("exa3-classical"))
    assert chk.feasible and chk.objective == Fraction(27, 8)


def test_deterministic_oracle():
    assert deterministic_max(builtin("exa3").load().problem)[0] == 2
    assert deterministic_max(builtin("chsh").load().problem)[0] == 2
    assert deterministic_max(builtin("uffink").load().problem)[0] == 4


def random_reflection(rng, k):
    a = rng.standard_normal((k, k))
    _, v = np.linalg.eigh(a + a.T)
    s = np.diag(np.where(rng.random(k) < 0.5, -1.0, 1.0))
    return v @ s @ v.T


@pytest.mark.parametrize("name", ["chsh", "uffink", "covariance", "exa3"])
def test_classical_models_below_reference(name, rng):
    ex = builtin(name)
    p = ex.load().problem
    for _ in range(50):
        k = 4
        ops = [np.diag(rng.choice([-1.0, 1.0], size=k)) for _ in range(p.q.n)]
        w = rng.random(k)
        chk = verify_model(p, ops, np.diag(w / w.sum()))
        assert chk.feasible
        assert chk.objective <= ex.reference + 1e-9


def test_factorization_holds_on_product_states(rng):
    sc = builtin("bilocal-chaves").load().scenario
    p = builtin("bilocal-chaves").load().problem
    local = {"x": [random_reflection(rng, 2) for _ in range(2)],
             "y": [random_reflection(rng, 4) for _ in range(2)],
             "z": [random_reflection(rng, 2) for _ in range(2)]}
    states = {}
    for s in ("s1", "s2"):
        v = rng.standard_normal(4)
        states[s] = v / np.linalg.norm(v)
    ops, psi = spatial_model(sc, local, states)
    chk = verify_model(p, ops, psi, tol=1e-12)
    fac = [v for n, v in chk.violations if n.startswith("factorization")]
    assert max(fac, default=0.0) <= 1e-12
    assert chk.feasible


def test_entangled_across_sources_violates_factorization(rng):
    # a state entangling the x and z factors breaks independence of the sources
    sc = builtin("bilocal-chaves").load().scenario
    p = builtin("bilocal-chaves").load().problem
    Z = np.diag([1.0, -1.0])
    local = {"x": [Z, Z], "y": [np.eye(4), np.eye(4)], "z": [Z, Z]}
    ops, _ = spatial_model(sc, local, {"s1": np.array([1.0, 0, 0, 0]), "s2": np.array([1.0, 0, 0, 0])})
    psi = np.zeros(16)
    psi[0] = psi[15] = 1 / math.sqrt(2)
    assert not verify_model(p, ops, psi).feasible


def test_builtin_texts_parse():
    for name, text in BUILTIN_TEXT.items():
        pf = parse_problem(text)
        assert pf.level is not None


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        NetworkScenario("x", ["A"], {"A": 0}, {"A": 2}, {"s": ["A"]})
