"""Complex moment relaxations through a real symmetric embedding.

Every state symbol ``s(w)`` splits into real-valued symbols ``re(w)`` and
``im(w)`` with ``s(w) = re(w) + i im(w)``, ``re(w*) = re(w)`` and
``im(w*) = -im(w)``; ``im(w)`` vanishes when ``w`` is self-adjoint.  A
complex label is a sorted tuple of ``(part, rep)`` pairs with ``part`` 0
for ``re`` and 1 for ``im``.  A hermitian block ``H = R + iI`` is passed
to the solver as ``[[R, -I], [I, R]]``.
"""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import NCSWord, NCWord, SWord, deglex_key
from .moment import (
    Basis, Block, BlockSpec, LevelError, MomentRelaxation, Problem, SizeError, ZeroFilter, _Collector,
    check_level, normal_words, state_symbols,
)
from .quotient import QuotientContext

RE, IM = 0, 1
CSymbol = Tuple[int, Tuple[int, ...]]
CLabel = Tuple[CSymbol, ...]


def csym_key(c: CSymbol):
    return (len(c[1]), c[1], c[0])


def clabel_key(lab: CLabel):
    return (sum(len(c[1]) for c in lab), tuple(csym_key(c) for c in lab))


def make_clabel(factors) -> CLabel:
    return tuple(sorted(factors, key=csym_key))


def cword_parity(m) -> int:
    s, t = m
    p = 0
    for a in t:
        p ^= 1 << a
    for _, w in s:
        for a in w:
            p ^= 1 << a
    return p


def complex_symbols(q: QuotientContext, d: int, zero: Optional[ZeroFilter] = None) -> List[List[CSymbol]]:
    syms = state_symbols(q, d, None, zero)
    out: List[List[CSymbol]] = [[] for _ in range(d + 1)]
    for k in range(1, d + 1):
        for s in syms[k]:
            out[k].append((RE, s))
            if q.star(s) != s:
                out[k].append((IM, s))
        out[k].sort(key=csym_key)
    return out


def build_complex_basis(q: QuotientContext, d: int, zero: Optional[ZeroFilter] = None) -> Basis:
    """Normal words times products of ``re``/``im`` symbols, degree at most ``d``."""
    if q.tracial:
        raise ValueError("complex relaxations are not defined for the tracial class")
    tails = normal_words(q, d)
    syms = complex_symbols(q, d, zero)
    flat = [c for k in range(1, d + 1) for c in syms[k]]
    flat.sort(key=csym_key)
    scal_by_deg: List[List[Tuple[CSymbol, ...]]] = [[] for _ in range(d + 1)]

    def rec(start, deg, acc):
        scal_by_deg[deg].append(tuple(acc))
        for i in range(start, len(flat)):
            k = len(flat[i][1])
            if deg + k <= d:
                acc.append(flat[i])
                rec(i, deg + k, acc)
                acc.pop()

    rec(0, 0, [])
    words = []
    for a in range(d + 1):
        for k in range(d - a + 1):
            for t in tails[k]:
                for s in scal_by_deg[a]:
                    words.append((s, t))
    words.sort(key=lambda m: (sum(len(c[1]) for c in m[0]) + len(m[1]), len(m[1]), m[1], clabel_key(m[0])))
    return Basis(words, d)


class ComplexLabelMaker:
    """Hermitian entries ``L(s(u* v))`` as complex combinations of labels."""

    def __init__(self, q: QuotientContext, zero: Optional[ZeroFilter] = None):
        self.q = q
        self.zero = zero
        self._tail: Dict[Tuple[NCWord, NCWord], List[Tuple[complex, CLabel]]] = {}

    def _expand(self, w: NCWord) -> List[Tuple[complex, CLabel]]:
        """``s(w)`` for a normal word as a combination of re/im products."""
        terms: List[Tuple[complex, Tuple[CSymbol, ...]]] = [(1 + 0j, ())]
        for comp in self.q.components(w):
            (rep,) = self.q.canonical_state_symbol(comp)
            parts = [(1 + 0j, (RE, rep))]
            if self.q.star(rep) != rep:
                sign = 1.0 if comp == rep else -1.0
                parts.append((1j * sign, (IM, rep)))
            terms = [(c1 * c2, acc + (f,)) for c1, acc in terms for c2, f in parts]
        return [(c, make_clabel(f)) for c, f in terms]

    def tail(self, tu: NCWord, tv: NCWord) -> List[Tuple[complex, CLabel]]:
        key = (tu, tv)
        r = self._tail.get(key)
        if r is None:
            w = self.q.normalize(tu[::-1] + tv)
            r = [] if w is None else self._expand(w)
            self._tail[key] = r
        return r

    def entry(self, u, v) -> Dict[CLabel, complex]:
        su, tu = u
        sv, tv = v
        out: Dict[CLabel, complex] = {}
        for c, lab in self.tail(tu, tv):
            full = make_clabel(su + sv + lab)
            if self.zero and self._is_zero(full):
                continue
            out[full] = out.get(full, 0) + c
        return out

    def _is_zero(self, lab: CLabel) -> bool:
        return self.zero(tuple(sorted((w for _, w in lab), key=deglex_key)))


def _hermitian_entries(rows: Sequence, lm: ComplexLabelMaker, coll: _Collector):
    n = len(rows)
    P, Q, L, V = [], [], [], []

    def put(p, q, k, v):
        if v != 0.0:
            P.append(p)
            Q.append(q)
            L.append(k)
            V.append(v)

    for i in range(n):
        for j in range(i, n):
            for lab, c in lm.entry(rows[i], rows[j]).items():
                k = coll.get(lab)
                re, im = c.real, c.imag
                put(i, j, k, re)
                put(n + i, n + j, k, re)
                if i != j:
                    # top-right block holds -I; I[j, i] = -I[i, j]
                    put(i, n + j, k, -im)
                    put(j, n + i, k, im)
    return (np.asarray(P, dtype=np.int64), np.asarray(Q, dtype=np.int64),
            np.asarray(L, dtype=np.int64), np.asarray(V, dtype=float))


def assemble_complex(problem: Problem, d: int, sign_symmetry: bool = False,
                     basis: Optional[Basis] = None) -> MomentRelaxation:
    """Complex relaxation; objective symbols are read as their real parts."""
    check_level(problem, d)
    if problem.constraints:
        raise NotImplementedError("complex relaxations support objective-only problems")
    q = problem.q
    zf = problem.zero_filter()
    if basis is None:
        basis = build_complex_basis(q, d, zf)
    groups: List[List[NCSWord]] = [list(basis.words)]
    tags = [""]
    if sign_symmetry:
        from .sparsity import symmetry_group
        gens = symmetry_group(problem)
        by: Dict[Tuple[int, ...], List] = {}
        for m in basis.words:
            p = cword_parity(m)
            key = tuple(bin(g & p).count("1") & 1 for g in gens)
            by.setdefault(key, []).append(m)
        keys = sorted(by, key=lambda k: (any(k), k))
        groups = [by[k] for k in keys]
        tags = ["class" + "".join(map(str, k)) for k in keys]
    lm = ComplexLabelMaker(q, zf)
    coll = _Collector(key=clabel_key)
    coll.get(())
    raw = [(rows, tag, _hermitian_entries(rows, lm, coll)) for rows, tag in zip(groups, tags)]
    obj: Dict[int, float] = {}
    for (s, _), c in problem.minimized.items():
        if zf and zf(s):
            continue
        k = coll.get(make_clabel((RE, w) for w in s))
        obj[k] = obj.get(k, 0.0) + float(c)
    labels, perm = coll.finish()
    blocks = []
    for rows, tag, (P, Q, L, V) in raw:
        blocks.append(Block("hankel", None, rows + rows, P, Q, perm[L] if len(L) else L, V, tag))
    objective = {int(perm[k]): v for k, v in obj.items() if v != 0.0}
    info = {"hermitian_sizes": [len(r) for r, _, _ in raw], "complex": True}
    return MomentRelaxation(labels, blocks, [], objective, problem.sense, d, problem, basis, info)


def embed(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re, -Im], [Im, Re]]`` of a hermitian matrix."""
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])
