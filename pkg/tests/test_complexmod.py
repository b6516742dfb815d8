import math

import numpy as np
from hypothesis import given, settings, strategies as st

from statepop.complexmod import assemble_complex, complex_symbols, embed
from statepop.moment import solve_relaxation
from statepop.relax import RelaxOptions, build_relaxation
from statepop.scenarios import builtin


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31), st.booleans())
def test_embedding_preserves_psd(n, seed, make_psd):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = a @ a.conj().T if make_psd else (a + a.conj().T) / 2
    E = embed(H)
    assert np.allclose(E, E.T)
    lh, le = np.linalg.eigvalsh(H), np.linalg.eigvalsh(E)
    # every eigenvalue of H appears twice in the embedding
    assert np.allclose(np.sort(np.concatenate([lh, lh])), le, atol=1e-9)
    assert (lh.min() >= -1e-9) == (le.min() >= -1e-9)


def test_one_by_one_embedding():
    assert np.array_equal(embed(np.array([[2.0 + 0j]])), 2.0 * np.eye(2))


def test_real_problem_through_complex_path():
    p = builtin("chsh").load().problem
    real = solve_relaxation(build_relaxation(p, RelaxOptions(1))).bound
    cx = solve_relaxation(assemble_complex(p, 1))
    assert abs(cx.bound - real) < 1e-6
    assert abs(cx.bound - 2 * math.sqrt(2)) < 1e-6


def test_imaginary_symbols_only_for_non_selfadjoint():
    q = builtin("chsh").load().problem.q
    syms = complex_symbols(q, 2)
    for layer in syms:
        for part, rep in layer:
            if part == 1:
                assert q.star(rep) != rep
    # s(x1*x2) within one party is not self-adjoint; cross-party products are
    assert (1, (0, 1)) in syms[2]
    assert (1, (0, 2)) not in syms[2]


def test_complex_blocks_are_doubled():
    p = builtin("exa3").load().problem
    rel = assemble_complex(p, 1, sign_symmetry=True)
    assert [2 * h for h in rel.info["hermitian_sizes"]] == rel.block_sizes
