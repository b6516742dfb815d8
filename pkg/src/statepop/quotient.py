"""Normal forms modulo structural relations.

A :class:`QuotientContext` fixes, per variable, whether ``x^2 = 1``
(unitary / binary observable), ``x^2 = x`` (projection) or nothing (free),
which pairs commute, which projection pairs are orthogonal, and an
optional party structure.  Parties that share no source factorize under
the state map: ``s(u w) = s(u) s(w)`` when ``u`` and ``w`` live on
disconnected groups of parties.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .algebra import NCStatePoly, NCWord, SSymbol, SWord, deglex_key, make_sword

FREE = "free"
UNITARY = "unitary"
PROJECTION = "projection"
ZERO = None


class UnsupportedError(ValueError):
    """The operation needs a structure the context does not have."""


def _pairs(pairs: Iterable[Tuple[int, int]]) -> FrozenSet[Tuple[int, int]]:
    out = set()
    for a, b in pairs:
        if a == b:
            raise ValueError("relation must be irreflexive")
        out.add((min(a, b), max(a, b)))
    return frozenset(out)


@dataclass(eq=False)
class QuotientContext:
    """Rewriting data for words in ``n`` letters.

    Parameters
    ----------
    n : number of letters
    kinds : per-letter kind, one of ``free``, ``unitary``, ``projection``
    commuting : unordered pairs of commuting letters
    orthogonal : unordered pairs with ``xy = yx = 0``
    party : optional party index per letter
    linked : unordered party pairs that share a source; parties in
        different connected components factorize under ``s``
    tracial : identify ``s(uv)`` with ``s(vu)``
    """

    n: int
    kinds: Tuple[str, ...] = ()
    commuting: FrozenSet[Tuple[int, int]] = frozenset()
    orthogonal: FrozenSet[Tuple[int, int]] = frozenset()
    party: Optional[Tuple[int, ...]] = None
    linked: Optional[FrozenSet[Tuple[int, int]]] = None
    tracial: bool = False
    _norm: Dict[NCWord, Optional[NCWord]] = field(default_factory=dict, repr=False)
    _sym: Dict[NCWord, SWord] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.kinds:
            self.kinds = (FREE,) * self.n
        self.kinds = tuple(self.kinds)
        if len(self.kinds) != self.n:
            raise ValueError("one kind per letter required")
        for k in self.kinds:
            if k not in (FREE, UNITARY, PROJECTION):
                raise ValueError(f"unknown kind {k!r}")
        self.commuting = _pairs(self.commuting)
        self.orthogonal = _pairs(self.orthogonal)
        for a, b in self.orthogonal:
            if self.kinds[a] != PROJECTION or self.kinds[b] != PROJECTION:
                raise ValueError("orthogonality is defined between projections")
        # orthogonal projections commute (both products vanish)
        self.commuting = self.commuting | self.orthogonal
        self._comm = [[False] * self.n for _ in range(self.n)]
        for a, b in self.commuting:
            self._comm[a][b] = self._comm[b][a] = True
        for a in range(self.n):
            self._comm[a][a] = True
        self._orth = [[False] * self.n for _ in range(self.n)]
        for a, b in self.orthogonal:
            self._orth[a][b] = self._orth[b][a] = True
        if self.party is not None:
            self.party = tuple(self.party)
            if len(self.party) != self.n:
                raise ValueError("one party per letter required")
            for a in range(self.n):
                for b in range(a + 1, self.n):
                    if self.party[a] != self.party[b] and not self._comm[a][b]:
                        raise ValueError("letters of different parties must commute")
            self.linked = _pairs(self.linked or ())
        # fast path: commute exactly across parties, parties numbered in blocks
        self._blocked = False
        if self.party is not None and list(self.party) == sorted(self.party):
            self._blocked = all(
                self._comm[a][b] == (self.party[a] != self.party[b])
                for a in range(self.n) for b in range(a + 1, self.n))

    # -- basic relations ----------------------------------------------------
    def commutes(self, a: int, b: int) -> bool:
        return self._comm[a][b]

    @property
    def is_group(self) -> bool:
        return all(k == UNITARY for k in self.kinds)

    @property
    def n_parties(self) -> int:
        return 0 if self.party is None else max(self.party) + 1

    # -- normal forms -------------------------------------------------------
    def normalize(self, w: Sequence[int]) -> Optional[NCWord]:
        """Normal form of ``w``, or ``None`` when ``w`` is zero."""
        w = tuple(w)
        r = self._norm.get(w, -1)
        if r != -1:
            return r
        for a in w:
            if not 0 <= a < self.n:
                raise IndexError(f"letter {a} out of range")
        r = self._normalize_blocked(w) if self._blocked else self._normalize_generic(w)
        self._norm[w] = r
        return r

    def _reduce_segment(self, seg: List[int]) -> Optional[List[int]]:
        out: List[int] = []
        for a in seg:
            if out:
                top = out[-1]
                if top == a:
                    k = self.kinds[a]
                    if k == UNITARY:
                        out.pop()
                        continue
                    if k == PROJECTION:
                        continue
                elif self._orth[top][a]:
                    return None
            out.append(a)
        return out

    def _normalize_blocked(self, w: NCWord) -> Optional[NCWord]:
        segs: Dict[int, List[int]] = {}
        for a in w:
            segs.setdefault(self.party[a], []).append(a)
        out: List[int] = []
        for p in sorted(segs):
            r = self._reduce_segment(segs[p])
            if r is None:
                return None
            out += r
        return tuple(out)

    def _can_meet(self, w: List[int], i: int, j: int) -> bool:
        """True if positions ``i < j`` can be made adjacent by commutations."""
        a, b = w[i], w[j]
        reach: List[int] = []
        for k in range(i + 1, j):
            c = w[k]
            if not self._comm[a][c] or any(not self._comm[r][c] for r in reach):
                reach.append(c)
        return all(self._comm[r][b] for r in reach)

    def _normalize_generic(self, w: NCWord) -> Optional[NCWord]:
        w = list(w)
        changed = True
        while changed:
            changed = False
            for i in range(len(w)):
                for j in range(i + 1, len(w)):
                    a, b = w[i], w[j]
                    if a == b and self.kinds[a] != FREE:
                        if self._can_meet(w, i, j):
                            del w[j]
                            if self.kinds[a] == UNITARY:
                                del w[i]
                            changed = True
                            break
                    elif self._orth[a][b] and self._can_meet(w, i, j):
                        return None
                if changed:
                    break
        return tuple(self._lex_least(w))

    def _lex_least(self, w: List[int]) -> List[int]:
        rest = list(w)
        out = []
        while rest:
            best = None
            for k, c in enumerate(rest):
                if all(self._comm[rest[t]][c] for t in range(k)):
                    if best is None or c < rest[best]:
                        best = k
            out.append(rest.pop(best))
        return out

    def star(self, w: Sequence[int]) -> Optional[NCWord]:
        """Normal form of the adjoint (reversed word)."""
        return self.normalize(tuple(w)[::-1])

    def product(self, *ws: Sequence[int]) -> Optional[NCWord]:
        out: Tuple[int, ...] = ()
        for w in ws:
            out += tuple(w)
        return self.normalize(out)

    # -- state symbols ------------------------------------------------------
    def components(self, w: NCWord) -> List[NCWord]:
        """Split a normal word into factorizing blocks."""
        if self.party is None or not w:
            return [w] if w else []
        present = sorted({self.party[a] for a in w})
        if len(present) == 1:
            return [w]
        root = {p: p for p in present}

        def find(p):
            while root[p] != p:
                root[p] = root[root[p]]
                p = root[p]
            return p

        for p, q in self.linked:
            if p in root and q in root:
                rp, rq = find(p), find(q)
                if rp != rq:
                    root[max(rp, rq)] = min(rp, rq)
        groups: Dict[int, List[int]] = {}
        for a in w:
            groups.setdefault(find(self.party[a]), []).append(a)
        return [tuple(g) for _, g in sorted(groups.items())]

    def _symbol_rep(self, w: NCWord) -> SSymbol:
        """Representative of ``s(w)`` for an unfactorizable normal word."""
        if not self.tracial:
            r = self.star(w)
            return w if deglex_key(w) <= deglex_key(r) else r
        seen = {w}
        todo = [w]
        while todo:
            u = todo.pop()
            cands = [self.star(u)] + [self.normalize(u[k:] + u[:k]) for k in range(1, len(u))]
            for c in cands:
                if c is not None and c not in seen:
                    seen.add(c)
                    todo.append(c)
        return min(seen, key=deglex_key)

    def canonical_state_symbol(self, w: Sequence[int]) -> SWord:
        """``s(w)`` for a normal word ``w`` as a canonical S-word."""
        w = tuple(w)
        r = self._sym.get(w)
        if r is not None:
            return r
        factors = []
        for c in self.components(w):
            rep = self._symbol_rep(c)
            if rep:
                # tracial reduction may expose a further factorization
                sub = self.components(rep)
                if len(sub) > 1:
                    factors.extend(self.canonical_state_symbol(s) for s in sub)
                    continue
                factors.append((rep,))
        out = make_sword(f for fs in factors for f in fs)
        self._sym[w] = out
        return out

    def state_of_word(self, w: Sequence[int]) -> Optional[SWord]:
        """Normalize ``w`` then apply ``s``; ``None`` when ``w`` is zero."""
        nw = self.normalize(w)
        if nw is None:
            return None
        return self.canonical_state_symbol(nw)

    def reduce_sword(self, s: SWord) -> Optional[SWord]:
        """Re-canonicalize every factor of an S-word in this quotient."""
        out: List[SSymbol] = []
        for f in s:
            r = self.state_of_word(f)
            if r is None:
                return None
            out.extend(r)
        return make_sword(out)

    def reduce(self, f: NCStatePoly) -> NCStatePoly:
        """Rewrite every term of ``f`` into quotient normal form."""
        def g(m):
            s, t = m
            s2 = self.reduce_sword(s)
            t2 = self.normalize(t)
            if s2 is None or t2 is None:
                return None
            return (s2, t2), 1
        return f.map_words(g)

    def is_self_adjoint(self, w: NCWord) -> bool:
        return self.star(w) == w


# ---------------------------------------------------------------------------
# subgroup filtering


def parity(w: Iterable[int], n: int) -> Tuple[int, ...]:
    p = [0] * n
    for a in w:
        p[a] ^= 1
    return tuple(p)


class Subgroup:
    """Subgroup of the quotient group generated by ``gens``.

    Membership is decided by closure up to a length bound, memoized.
    """

    def __init__(self, q: QuotientContext, gens: Iterable[NCWord], bound: int):
        if not q.is_group:
            raise UnsupportedError("subgroup filtering needs a group context")
        self.q = q
        self.gens = sorted({g for g in gens if g}, key=deglex_key)
        self.bound = bound
        step = max((len(g) for g in self.gens), default=0)
        limit = bound + 2 * step
        elems = {(): None}
        frontier = [()]
        moves = set(self.gens) | {q.star(g) for g in self.gens}
        while frontier:
            nxt = []
            for e in frontier:
                for g in moves:
                    h = q.normalize(e + g)
                    if len(h) <= limit and h not in elems:
                        elems[h] = None
                        nxt.append(h)
            frontier = nxt
        self.elements = frozenset(h for h in elems if len(h) <= bound)

    def __contains__(self, w: NCWord) -> bool:
        if len(w) > self.bound:
            raise ValueError("word longer than the closure bound")
        return w in self.elements

    @property
    def even_length(self) -> bool:
        return all(len(g) % 2 == 0 for g in self.gens)


def support_generators(a: NCStatePoly, q: QuotientContext) -> List[NCWord]:
    """Supports of the state factors of ``a`` after reduction."""
    gens = set()
    for s, t in q.reduce(a):
        if t:
            raise TypeError("objective must be a state polynomial")
        gens.update(f for f in s)
    return sorted(gens, key=deglex_key)


def subgroup_level(a: NCStatePoly, q: QuotientContext, d: int) -> int:
    """Truncation level used for the subgroup basis.

    When every generator has even length the subgroup contains only even
    words, so an odd level is rounded up to the next even one.
    """
    gens = support_generators(a, q)
    if gens and all(len(g) % 2 == 0 for g in gens) and d % 2 == 1:
        return d + 1
    return d


def support_subgroup_filter(a: NCStatePoly, q: QuotientContext, basis: Sequence) -> list:
    """Keep basis words whose symbols and tail all lie in the support subgroup."""
    if not q.is_group:
        raise UnsupportedError("subgroup filtering needs a group context")
    bound = max((max([len(t)] + [len(f) for f in s]) for s, t in basis), default=0)
    H = Subgroup(q, support_generators(a, q), bound)
    out = []
    for s, t in basis:
        if t in H and all(f in H for f in s):
            out.append((s, t))
    return out
