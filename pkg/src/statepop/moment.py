"""Moment relaxations of state polynomial optimization problems.

The relaxation at level ``d`` is indexed by all normal NCS-words of degree
at most ``d``.  Entry ``(u, v)`` of the Hankel block holds the moment of
the S-word ``s(u* v)``; equal labels share one moment variable.  The
constant label (empty S-word) is pinned to 1.

Minimization is native; problems with ``sense="max"`` are solved as
minimization of ``-a`` and the bound is negated on output.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import (
    Alphabet, NCStatePoly, NCSWord, NCWord, SSymbol, SWord, deglex_key, make_sword,
    ncsword_degree, ncsword_key, sword_degree, sword_key,
)
from .quotient import QuotientContext

Label = SWord


class LevelError(ValueError):
    """Relaxation level too small for the data."""


class SizeError(ValueError):
    """Enumeration exceeds the configured cap."""


@dataclass
class Constraint:
    """``poly >= 0`` (``kind="ineq"``) or ``poly = 0`` (``kind="eq"``)."""

    poly: NCStatePoly
    kind: str = "ineq"

    def __post_init__(self):
        if self.kind not in ("ineq", "eq"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @property
    def half_degree(self) -> int:
        return 0 if self.poly.is_zero() else math.ceil(self.poly.degree / 2)


@dataclass
class Problem:
    """An optimization problem over a quotient context.

    Parameters
    ----------
    objective : state polynomial to optimize
    q : quotient context
    constraints : state or nc state constraints
    zero : S-words whose moments vanish (labels containing one are dropped)
    sense : ``"min"`` or ``"max"``
    """

    objective: NCStatePoly
    q: QuotientContext
    constraints: List[Constraint] = field(default_factory=list)
    zero: Tuple[SWord, ...] = ()
    sense: str = "min"
    alphabet: Optional[Alphabet] = None
    name: str = ""

    def __post_init__(self):
        if not self.objective.is_state():
            raise TypeError("objective must be a state polynomial")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.objective = self.q.reduce(self.objective.to_float() if self.objective.mode == "exact"
                                       else self.objective)
        zs = []
        for z in self.zero:
            r = self.q.reduce_sword(tuple(z))
            if r:
                zs.append(r)
        self.zero = tuple(sorted(set(zs), key=sword_key))

    @property
    def minimized(self) -> NCStatePoly:
        return -self.objective if self.sense == "max" else self.objective

    def zero_filter(self) -> "ZeroFilter":
        return ZeroFilter(self.zero)


class ZeroFilter:
    """Detect labels that contain a vanishing S-word."""

    def __init__(self, zero: Iterable[SWord]):
        self.single = set()
        self.multi = []
        for z in zero:
            if len(z) == 1:
                self.single.add(z[0])
            elif z:
                self.multi.append(z)

    def __bool__(self):
        return bool(self.single or self.multi)

    def __call__(self, label: SWord) -> bool:
        for f in label:
            if f in self.single:
                return True
        for z in self.multi:
            rest = list(label)
            try:
                for f in z:
                    rest.remove(f)
                return True
            except ValueError:
                continue
        return False


# ---------------------------------------------------------------------------
# bases


def normal_words(q: QuotientContext, d: int, letters: Optional[Iterable[int]] = None) -> List[List[NCWord]]:
    """Normal words grouped by length ``0..d``."""
    alph = sorted(set(range(q.n) if letters is None else letters))
    layers = [[()]]
    seen = {()}
    for k in range(1, d + 1):
        layer = []
        for w in layers[-1]:
            for a in alph:
                r = q.normalize(w + (a,))
                if r is not None and len(r) == k and r not in seen:
                    seen.add(r)
                    layer.append(r)
        layer.sort()
        layers.append(layer)
    return layers


def state_symbols(q: QuotientContext, d: int, letters: Optional[Iterable[int]] = None,
                  zero: Optional[ZeroFilter] = None) -> List[List[SSymbol]]:
    """Unfactorizable symbol representatives grouped by degree ``0..d``."""
    layers = normal_words(q, d, letters)
    out: List[List[SSymbol]] = [[] for _ in range(d + 1)]
    seen = set()
    for k in range(1, d + 1):
        for w in layers[k]:
            s = q.canonical_state_symbol(w)
            if len(s) != 1 or len(s[0]) != k or s[0] in seen:
                continue
            if zero and zero(s):
                continue
            seen.add(s[0])
            out[k].append(s[0])
        out[k].sort()
    return out


def swords_of_degree(symbols: List[List[SSymbol]], a: int) -> List[SWord]:
    """All multisets of symbols of total degree ``a``."""
    flat = [(s, len(s)) for k in range(1, len(symbols)) for s in symbols[k]]
    flat.sort(key=lambda t: deglex_key(t[0]))
    out: List[SWord] = []

    def rec(start, left, acc):
        if left == 0:
            out.append(tuple(acc))
            return
        for i in range(start, len(flat)):
            s, k = flat[i]
            if k <= left:
                acc.append(s)
                rec(i, left - k, acc)
                acc.pop()

    rec(0, a, [])
    return out


@dataclass
class Basis:
    words: List[NCSWord]
    level: int

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    def __getitem__(self, i):
        return self.words[i]

    def upto(self, d: int) -> "Basis":
        return Basis([w for w in self.words if ncsword_degree(w) <= d], d)


def build_basis(q: QuotientContext, d: int, letters: Optional[Iterable[int]] = None,
                zero: Optional[ZeroFilter] = None, cap: int = 200_000) -> Basis:
    """All normal NCS-words of degree at most ``d`` in deglex order."""
    if d < 0:
        raise LevelError("level must be non-negative")
    tails = normal_words(q, d, letters)
    syms = state_symbols(q, d, letters, zero)
    words: List[NCSWord] = []
    for a in range(d + 1):
        scal = swords_of_degree(syms, a)
        if zero:
            scal = [s for s in scal if not zero(s)]
        for k in range(d - a + 1):
            for t in tails[k]:
                for s in scal:
                    words.append((s, t))
                    if len(words) > cap:
                        raise SizeError(f"basis exceeds {cap} words")
    words.sort(key=ncsword_key)
    return Basis(words, d)


# ---------------------------------------------------------------------------
# labels


class LabelMaker:
    """Compute moment labels ``s(u* c v)`` in a quotient context."""

    def __init__(self, q: QuotientContext, zero: Optional[ZeroFilter] = None):
        self.q = q
        self.zero = zero
        self._tail: Dict[Tuple[NCWord, NCWord, NCWord], Optional[SWord]] = {}
        self._lab: Dict[Tuple[SWord, SWord, SWord], Optional[SWord]] = {}

    def tail_symbol(self, tu: NCWord, tc: NCWord, tv: NCWord) -> Optional[SWord]:
        key = (tu, tc, tv)
        r = self._tail.get(key, -1)
        if r == -1:
            w = self.q.normalize(tu[::-1] + tc + tv)
            r = None if w is None else self.q.canonical_state_symbol(w)
            self._tail[key] = r
        return r

    def label(self, su: SWord, sv: SWord, sc: SWord, tu: NCWord, tc: NCWord, tv: NCWord) -> Optional[SWord]:
        t = self.tail_symbol(tu, tc, tv)
        if t is None:
            return None
        s = su + sv + sc
        key = (s, t, ())
        r = self._lab.get(key, -1)
        if r == -1:
            r = make_sword(s + t)
            if self.zero and self.zero(r):
                r = None
            self._lab[key] = r
        return r


def poly_terms(c: NCStatePoly) -> List[Tuple[SWord, NCWord, float]]:
    return [(s, t, float(v)) for (s, t), v in sorted(c.items(), key=lambda kv: ncsword_key(kv[0]))]


# ---------------------------------------------------------------------------
# relaxation


@dataclass
class Block:
    """Symbolic symmetric block: ``M[p, q] += val * y[label]`` for ``p <= q``."""

    kind: str
    constraint: Optional[int]
    rows: List[NCSWord]
    p: np.ndarray
    q: np.ndarray
    lab: np.ndarray
    val: np.ndarray
    tag: str = ""

    @property
    def size(self) -> int:
        return len(self.rows)

    def dense(self, values: np.ndarray) -> np.ndarray:
        """Numeric matrix for label values ``values``."""
        n = self.size
        m = np.zeros((n, n))
        np.add.at(m, (self.p, self.q), self.val * values[self.lab])
        off = self.p != self.q
        np.add.at(m, (self.q[off], self.p[off]), self.val[off] * values[self.lab[off]])
        return m


@dataclass
class MomentRelaxation:
    labels: List[Label]
    blocks: List[Block]
    equalities: List[Dict[int, float]]
    objective: Dict[int, float]
    sense: str
    level: int
    problem: Optional[Problem] = None
    basis: Optional[Basis] = None
    info: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def block_sizes(self) -> List[int]:
        return [b.size for b in self.blocks]

    def hankel_blocks(self) -> List[Block]:
        return [b for b in self.blocks if b.kind == "hankel"]


class _Collector:
    """Accumulate label occurrences, renumbered in deglex order at the end."""

    def __init__(self, key=sword_key):
        self.ids: Dict[object, int] = {}
        self.key = key

    def get(self, lab) -> int:
        i = self.ids.get(lab)
        if i is None:
            i = len(self.ids)
            self.ids[lab] = i
        return i

    def finish(self) -> Tuple[list, np.ndarray]:
        labels = sorted(self.ids, key=self.key)
        perm = np.empty(len(labels), dtype=np.int64)
        for new, lab in enumerate(labels):
            perm[self.ids[lab]] = new
        return labels, perm


def block_entries(rows: Sequence[NCSWord], terms, lm: LabelMaker, coll: _Collector):
    """Symbolic entries of the (localizing) block over ``rows``."""
    P, Q, L, V = [], [], [], []
    n = len(rows)
    for i in range(n):
        su, tu = rows[i]
        for j in range(i, n):
            sv, tv = rows[j]
            acc: Dict[int, float] = {}
            for sc, tc, c in terms:
                lab = lm.label(su, sv, sc, tu, tc, tv)
                if lab is None:
                    continue
                k = coll.get(lab)
                acc[k] = acc.get(k, 0.0) + c
            for k, c in acc.items():
                if c != 0.0:
                    P.append(i)
                    Q.append(j)
                    L.append(k)
                    V.append(c)
    return (np.asarray(P, dtype=np.int64), np.asarray(Q, dtype=np.int64),
            np.asarray(L, dtype=np.int64), np.asarray(V, dtype=float))


@dataclass
class BlockSpec:
    kind: str
    constraint: Optional[int]
    rows: List[NCSWord]
    tag: str = ""


def check_level(problem: Problem, d: int) -> None:
    a = problem.objective
    if not a.is_zero() and a.degree > 2 * d:
        raise LevelError(f"objective degree {a.degree} exceeds 2*level = {2 * d}")
    for c in problem.constraints:
        if c.half_degree > d:
            raise LevelError(f"constraint degree {c.poly.degree} exceeds 2*level = {2 * d}")


def dense_specs(problem: Problem, d: int, basis: Optional[Basis] = None,
                letters: Optional[Iterable[int]] = None, tag: str = "") -> List[BlockSpec]:
    zf = problem.zero_filter()
    if basis is None:
        basis = build_basis(problem.q, d, letters, zf)
    specs = [BlockSpec("hankel", None, list(basis.words), tag)]
    for ci, c in enumerate(problem.constraints):
        if c.kind == "ineq":
            specs.append(BlockSpec("localizing", ci, list(basis.upto(d - c.half_degree).words), tag))
    return specs


def equality_pairs(problem: Problem, d: int, basis: Basis, same_class=None):
    """Index pairs of basis words feeding each equality constraint."""
    out = []
    for ci, c in enumerate(problem.constraints):
        if c.kind != "eq":
            continue
        rows = basis.upto(d - c.half_degree).words
        pairs = []
        for i in range(len(rows)):
            for j in range(len(rows)):
                if same_class is None or same_class(rows[i], rows[j]):
                    pairs.append((rows[i], rows[j]))
        out.append((ci, pairs))
    return out


def assemble_specs(problem: Problem, d: int, specs: List[BlockSpec], eq_pairs=None,
                   basis: Optional[Basis] = None, info: Optional[dict] = None) -> MomentRelaxation:
    """Turn block specifications into a :class:`MomentRelaxation`."""
    check_level(problem, d)
    q = problem.q
    zf = problem.zero_filter()
    lm = LabelMaker(q, zf)
    coll = _Collector()
    coll.get(())
    one = [((), (), 1.0)]
    cterms = [poly_terms(q.reduce(c.poly.to_float() if c.poly.mode == "exact" else c.poly))
              for c in problem.constraints]
    raw_blocks = []
    for sp in specs:
        terms = one if sp.constraint is None else cterms[sp.constraint]
        raw_blocks.append((sp, block_entries(sp.rows, terms, lm, coll)))
    # equalities
    eq_rows = []
    seen = set()
    for ci, pairs in (eq_pairs or []):
        for (su, tu), (sv, tv) in pairs:
            acc: Dict[int, float] = {}
            for sc, tc, c in cterms[ci]:
                lab = lm.label(su, sv, sc, tu, tc, tv)
                if lab is None:
                    continue
                k = coll.get(lab)
                acc[k] = acc.get(k, 0.0) + c
            acc = {k: v for k, v in acc.items() if v != 0.0}
            if acc:
                key = tuple(sorted(acc.items()))
                if key not in seen:
                    seen.add(key)
                    eq_rows.append(acc)
    # objective
    obj: Dict[int, float] = {}
    for (s, _), c in problem.minimized.items():
        if zf and zf(s):
            continue
        k = coll.get(s)
        obj[k] = obj.get(k, 0.0) + float(c)
    labels, perm = coll.finish()
    blocks = []
    for sp, (P, Q, L, V) in raw_blocks:
        blocks.append(Block(sp.kind, sp.constraint, sp.rows, P, Q, perm[L] if len(L) else L, V, sp.tag))
    eqs = [{int(perm[k]): v for k, v in r.items()} for r in eq_rows]
    objective = {int(perm[k]): v for k, v in obj.items() if v != 0.0}
    return MomentRelaxation(labels, blocks, eqs, objective, problem.sense, d, problem, basis, dict(info or {}))


def assemble(problem: Problem, d: int, basis: Optional[Basis] = None) -> MomentRelaxation:
    """Dense level-``d`` relaxation (one Hankel block, one localizing block per inequality)."""
    check_level(problem, d)
    if basis is None:
        basis = build_basis(problem.q, d, zero=problem.zero_filter())
    specs = dense_specs(problem, d, basis)
    return assemble_specs(problem, d, specs, equality_pairs(problem, d, basis), basis)


# ---------------------------------------------------------------------------
# conversion to a numeric SDP


@dataclass
class AffineMap:
    """Label values as ``offset + coef @ y`` after eliminating equalities."""

    offset: np.ndarray
    rows: List[Dict[int, float]]
    n_free: int
    free_labels: List[int]

    def values(self, y: np.ndarray) -> np.ndarray:
        out = self.offset.copy()
        for i, r in enumerate(self.rows):
            for k, c in r.items():
                out[i] += c * y[k]
        return out


def eliminate(n_labels: int, equalities: List[Dict[int, float]], tol: float = 1e-12) -> AffineMap:
    """Solve the equalities for pivot labels; label 0 is the constant 1."""
    piv: Dict[int, Dict[int, float]] = {}  # label -> {label or -1: coef}, -1 = constant
    for row in equalities:
        r: Dict[int, float] = {}
        for k, c in row.items():
            if k == 0:
                r[-1] = r.get(-1, 0.0) + c
            elif k in piv:
                for kk, cc in piv[k].items():
                    r[kk] = r.get(kk, 0.0) + c * cc
            else:
                r[k] = r.get(k, 0.0) + c
        scale = max((abs(c) for k, c in r.items() if k != -1), default=0.0)
        r = {k: c for k, c in r.items() if abs(c) > tol * max(scale, 1.0)}
        vars_ = [k for k in r if k != -1]
        if not vars_:
            if abs(r.get(-1, 0.0)) > 1e-9:
                raise ValueError("inconsistent moment equalities")
            continue
        p = max(vars_, key=lambda k: (abs(r[k]), k))
        cp = r.pop(p)
        expr = {k: -c / cp for k, c in r.items()}
        for k2, e2 in piv.items():
            if p in e2:
                f = e2.pop(p)
                for k, c in expr.items():
                    e2[k] = e2.get(k, 0.0) + f * c
        piv[p] = expr
    free = [k for k in range(1, n_labels) if k not in piv]
    col = {k: i for i, k in enumerate(free)}
    offset = np.zeros(n_labels)
    offset[0] = 1.0
    rows: List[Dict[int, float]] = [dict() for _ in range(n_labels)]
    for k in free:
        rows[k] = {col[k]: 1.0}
    for k, e in piv.items():
        offset[k] = e.get(-1, 0.0)
        rows[k] = {col[kk]: c for kk, c in e.items() if kk != -1 and c != 0.0}
    return AffineMap(offset, rows, len(free), free)


def to_sdp(rel: MomentRelaxation):
    """Numeric instance ``min <C,X> s.t. <A_i,X> = b_i`` whose dual is the moment SDP.

    Returns ``(instance, affine_map, objective_constant)``; the minimized
    moment objective equals ``objective_constant - b @ y``.
    """
    from .solver import SDPInstance

    amap = eliminate(rel.n_labels, rel.equalities)
    simple = not rel.equalities
    mats, blks, ii, jj, vals = [], [], [], [], []
    for bi, b in enumerate(rel.blocks):
        if simple:
            # label k -> y index k-1, constant label 0 -> C
            mat = b.lab.copy()
            v = np.where(mat == 0, b.val, -b.val)
            mats.append(mat)
            blks.append(np.full(len(mat), bi))
            ii.append(b.p)
            jj.append(b.q)
            vals.append(v)
        else:
            M, B, I, J, Vv = [], [], [], [], []
            for p, q_, lab, v in zip(b.p, b.q, b.lab, b.val):
                off = amap.offset[lab]
                if off != 0.0:
                    M.append(0); B.append(bi); I.append(p); J.append(q_); Vv.append(v * off)
                for k, c in amap.rows[lab].items():
                    M.append(k + 1); B.append(bi); I.append(p); J.append(q_); Vv.append(-v * c)
            mats.append(np.asarray(M, dtype=np.int64))
            blks.append(np.asarray(B, dtype=np.int64))
            ii.append(np.asarray(I, dtype=np.int64))
            jj.append(np.asarray(J, dtype=np.int64))
            vals.append(np.asarray(Vv, dtype=float))
    m = amap.n_free
    bvec = np.zeros(m)
    const = 0.0
    for lab, c in rel.objective.items():
        const += c * amap.offset[lab]
        for k, cc in amap.rows[lab].items():
            bvec[k] -= c * cc
    inst = SDPInstance.from_arrays(
        [b.size for b in rel.blocks], bvec,
        np.concatenate(mats) if mats else np.zeros(0, dtype=np.int64),
        np.concatenate(blks) if blks else np.zeros(0, dtype=np.int64),
        np.concatenate(ii) if ii else np.zeros(0, dtype=np.int64),
        np.concatenate(jj) if jj else np.zeros(0, dtype=np.int64),
        np.concatenate(vals) if vals else np.zeros(0))
    return inst, amap, const


@dataclass
class RelaxationResult:
    relaxation: MomentRelaxation
    instance: object
    solution: object
    amap: AffineMap
    constant: float
    bound: float
    moments: np.ndarray
    status: str

    def moment(self, label: Label) -> float:
        i = self.relaxation.label_index.get(label)
        return 0.0 if i is None else float(self.moments[i])


def solve_relaxation(rel: MomentRelaxation, opts=None) -> RelaxationResult:
    """Solve and report the bound in the problem's own sense."""
    from .solver import SolverOptions, solve

    inst, amap, const = to_sdp(rel)
    sol = solve(inst, opts or SolverOptions())
    val = const - sol.dual_objective
    bound = -val if rel.sense == "max" else val
    moments = amap.values(sol.y)
    return RelaxationResult(rel, inst, sol, amap, const, bound, moments, sol.status)


@dataclass
class SOSDecomposition:
    grams: list
    m: float
    residual: float
    min_eig: float


def dual_sos_decomposition(res: RelaxationResult) -> SOSDecomposition:
    """Gram matrices of the sum-of-squares side and the identity residual.

    ``grams`` is a list of
    ``(constraint index or None, rows, G)`` with
    ``a - m = sum_c sum_{u,v} G[u,v] s(u* c v)`` up to ``residual``
    (infinity norm over moment labels, after removing any combination of
    equality rows).  ``a`` is the minimized objective.
    """
    rel = res.relaxation
    sol = res.solution
    if sol.X is None:
        raise ValueError("no primal (Gram) solution available")
    grams = []
    contrib = np.zeros(rel.n_labels)
    for b, X in zip(rel.blocks, sol.X):
        G = (X + X.T) / 2
        grams.append((b.constraint, b.rows, G))
        w = np.where(b.p == b.q, 1.0, 2.0) * b.val * G[b.p, b.q]
        np.add.at(contrib, b.lab, w)
    m = res.bound if rel.sense == "min" else -res.bound
    target = np.zeros(rel.n_labels)
    for k, c in rel.objective.items():
        target[k] += c
    target[0] -= m
    r = target - contrib
    if rel.equalities:
        E = np.zeros((len(rel.equalities), rel.n_labels))
        for i, row in enumerate(rel.equalities):
            for k, c in row.items():
                E[i, k] = c
        coef, *_ = np.linalg.lstsq(E.T, r, rcond=None)
        r = r - E.T @ coef
    worst = min((np.linalg.eigvalsh(G).min() for _, _, G in grams if G.size), default=0.0)
    return SOSDecomposition(grams, m, float(np.max(np.abs(r))) if r.size else 0.0, float(worst))
