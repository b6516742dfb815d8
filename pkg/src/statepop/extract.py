"""Flatness detection and GNS extraction of finite-dimensional minimizers.

A solved level-``D`` relaxation is flat over level ``d = D - delta`` when
the Hankel block restricted to basis words of degree at most ``d`` has the
same numerical rank as the whole block.  The column space then carries a
GNS representation: for a Cholesky factor ``G = L L^T`` of the Gram
matrix on ``r`` independent words ``B``, the operator of letter ``x`` is
``L^-1 H[B, x B] L^-T`` and the state vector is ``L^-1 H[B, 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .algebra import Evaluation, evaluate
from .moment import Basis, Block, MomentRelaxation, RelaxationResult, ncsword_degree


class ExtractionError(RuntimeError):
    """The flat solution does not yield a consistent model."""


@dataclass
class FlatnessReport:
    rank_low: int
    rank_full: int
    delta: int
    flat: bool
    tol: float
    eig_low: np.ndarray = field(repr=False, default=None)
    eig_full: np.ndarray = field(repr=False, default=None)


@dataclass
class ExtractedModel:
    dimension: int
    operators: List[np.ndarray]
    vector: np.ndarray
    scalar_residual: float
    objective: float = math.nan
    moment_residual: float = math.nan
    constraint_violations: List[Tuple[int, float]] = field(default_factory=list)

    def evaluation(self) -> Evaluation:
        return Evaluation(self.operators, self.vector, tol=1e-6)


def numerical_rank(eigs: np.ndarray, tol: float) -> int:
    if eigs.size == 0:
        return 0
    top = float(np.max(np.abs(eigs)))
    if top == 0.0:
        return 0
    return int(np.sum(eigs >= tol * top))


def hankel_matrix(res: RelaxationResult) -> Tuple[Block, np.ndarray]:
    """The single Hankel block of a dense relaxation and its numeric value."""
    hb = res.relaxation.hankel_blocks()
    if len(hb) != 1:
        raise ExtractionError("extraction needs a relaxation with a single Hankel block")
    return hb[0], hb[0].dense(res.moments)


def check_flatness(res: RelaxationResult, delta: Optional[int] = None, tol: float = 1e-6) -> FlatnessReport:
    """Compare numerical ranks of the Hankel block at levels ``D - delta`` and ``D``.

    ``delta`` defaults to the half degree of the objective and constraints
    (at least 1).
    """
    rel = res.relaxation
    block, H = hankel_matrix(res)
    if delta is None:
        delta = default_delta(rel)
    low = [i for i, w in enumerate(block.rows) if ncsword_degree(w) <= rel.level - delta]
    e_full = np.linalg.eigvalsh(H)
    e_low = np.linalg.eigvalsh(H[np.ix_(low, low)])
    scale_tol = tol
    r_full = numerical_rank(e_full, scale_tol)
    r_low = numerical_rank(e_low, scale_tol)
    return FlatnessReport(r_low, r_full, delta, r_low == r_full, tol, e_low, e_full)


def default_delta(rel: MomentRelaxation) -> int:
    p = rel.problem
    d = max(1, math.ceil(p.objective.degree / 2)) if not p.objective.is_zero() else 1
    for c in p.constraints:
        d = max(d, c.half_degree)
    return d


def _pivoted_cholesky(G: np.ndarray, r: int) -> List[int]:
    """Indices of ``r`` greedily chosen independent columns of a psd matrix."""
    n = G.shape[0]
    d = np.diag(G).astype(float).copy()
    Lc = np.zeros((n, r))
    piv = []
    for k in range(r):
        j = int(np.argmax(np.where(np.isin(np.arange(n), piv), -np.inf, d)))
        if d[j] <= 0:
            break
        piv.append(j)
        col = (G[:, j] - Lc[:, :k] @ Lc[j, :k]) / math.sqrt(d[j])
        Lc[:, k] = col
        d -= col ** 2
    return piv


def gns_extract(res: RelaxationResult, report: FlatnessReport, scalar_tol: float = 1e-5,
                check_tol: float = 1e-5) -> ExtractedModel:
    """Build ``(X_1..X_n, v)`` from a flat solution and check it against the moments."""
    if not report.flat:
        raise ExtractionError("solution is not flat; extraction inconclusive")
    rel = res.relaxation
    q = rel.problem.q
    block, H = hankel_matrix(res)
    rows = block.rows
    index = {w: i for i, w in enumerate(rows)}
    d = rel.level - report.delta
    low = [i for i, w in enumerate(rows) if ncsword_degree(w) <= d]
    piv_local = _pivoted_cholesky(H[np.ix_(low, low)], report.rank_low)
    B = [low[i] for i in piv_local]
    r = len(B)
    G = H[np.ix_(B, B)]
    L = np.linalg.cholesky((G + G.T) / 2)

    def whiten(M):
        T = sla.solve_triangular(L, M, lower=True)
        return sla.solve_triangular(L, T.T, lower=True).T

    def shifted(f):
        cols = []
        for b in B:
            w = f(rows[b])
            cols.append(H[B, index[w]] if w is not None else np.zeros(r))
        return np.array(cols).T

    ops = []
    for x in range(q.n):
        def mulx(w, x=x):
            s, t = w
            u = q.normalize((x,) + t)
            if u is None:
                return None
            key = (s, u)
            if key not in index:
                raise ExtractionError("multiplied basis word missing from the level; raise delta")
            return key
        X = whiten(shifted(mulx))
        ops.append((X + X.T) / 2)
    one = index[((), ())]
    v = sla.solve_triangular(L, H[B, one], lower=True)
    # scalar condition: state symbols act as multiples of the identity
    resid = 0.0
    for w, i in index.items():
        s, t = w
        if t or len(s) != 1 or ncsword_degree(w) > report.delta:
            continue
        sym = s[0]

        def muls(u, sym=sym):
            from .algebra import make_sword
            key = (make_sword(u[0] + (sym,)), u[1])
            return key if key in index else None

        P = whiten(shifted(muls))
        resid = max(resid, float(np.max(np.abs(P - H[one, i] * np.eye(r)))))
    model = ExtractedModel(r, ops, v, resid)
    if resid > scalar_tol:
        raise ExtractionError(f"extraction inconclusive: scalar residual {resid:.3e}")
    ev = Evaluation(ops, v, tol=1e-6)
    model.objective = float(evaluate(rel.problem.objective, ev))
    # moment reproduction on the level-d part of the Hankel block
    worst = 0.0
    for i in low:
        for j in low:
            if i > j:
                continue
            su, tu = rows[i]
            sv, tv = rows[j]
            w = q.normalize(tu[::-1] + tv)
            val = 0.0 if w is None else _sword_value(q.canonical_state_symbol(w) + su + sv, ev)
            worst = max(worst, abs(val - H[i, j]))
    model.moment_residual = worst
    for k, c in enumerate(rel.problem.constraints):
        val = evaluate(c.poly, ev)
        if c.poly.is_state():
            bad = abs(float(val)) if c.kind == "eq" else max(0.0, -float(val))
        else:
            h = np.asarray(val)
            bad = float(np.max(np.abs(h))) if c.kind == "eq" else max(0.0, -float(np.linalg.eigvalsh((h + h.T) / 2).min()))
        if bad > check_tol:
            model.constraint_violations.append((k, bad))
    return model


def _sword_value(s, ev: Evaluation) -> float:
    out = 1.0
    for w in s:
        out *= float(np.real(ev.expect(ev.word(w))))
    return out


def certify_finite_convergence(model: ExtractedModel, res: RelaxationResult, tol: float = 1e-5):
    """``(True, gap)`` when the feasible model attains the relaxation bound."""
    if model.constraint_violations:
        return False, math.inf
    gap = abs(model.objective - res.bound)
    return gap <= tol, gap


def minimize_trace(rel: MomentRelaxation, value: float, slack: float = 1e-7) -> MomentRelaxation:
    """Same feasible set with the objective pinned to ``value``; minimize the Hankel trace.

    Pinning uses the inequality ``a <= value + slack`` for minimization
    (``>=`` for maximization) realized as a 1x1 block.
    """
    from .moment import Block as _B
    hb = rel.hankel_blocks()[0]
    tr = {}
    for p, q_, lab, val in zip(hb.p, hb.q, hb.lab, hb.val):
        if p == q_:
            tr[int(lab)] = tr.get(int(lab), 0.0) + float(val)
    # 1x1 block: sign * (value + slack - a) >= 0 in the problem's own sense
    labs, vals = [0], [value + slack if rel.sense == "min" else -(value - slack)]
    for k, c in rel.objective.items():
        # rel.objective is the minimized objective
        labs.append(k)
        vals.append(-c if rel.sense == "min" else c)
    extra = _B("pin", None, [((), ())], np.zeros(len(labs), dtype=np.int64), np.zeros(len(labs), dtype=np.int64),
               np.asarray(labs, dtype=np.int64), np.asarray(vals, dtype=float), "pin")
    out = MomentRelaxation(rel.labels, list(rel.blocks) + [extra], rel.equalities, tr, "min", rel.level,
                           rel.problem, rel.basis, dict(rel.info))
    return out


# ---------------------------------------------------------------------------
# model files


def _fmt(z) -> str:
    from .solver import fmt_float
    z = complex(z)
    if z.imag == 0.0:
        return fmt_float(z.real)
    return f"{fmt_float(z.real)}{'+' if z.imag >= 0 else '-'}{fmt_float(abs(z.imag))}j"


def write_model(path, operators: Sequence[np.ndarray], state: np.ndarray) -> None:
    """Plain-text model bundle.

    ::

        dimension 2
        operators 2
        operator 1
        <row>
        ...
        vector            (or: density, followed by rows)
        <entries>

    Complex entries are written as ``a+bj``.
    """
    ops = [np.asarray(x) for x in operators]
    st = np.asarray(state)
    n = st.shape[0]
    lines = [f"dimension {n}", f"operators {len(ops)}"]
    for k, x in enumerate(ops):
        lines.append(f"operator {k + 1}")
        lines += [" ".join(_fmt(v) for v in row) for row in x]
    if st.ndim == 1:
        lines.append("vector")
        lines.append(" ".join(_fmt(v) for v in st))
    else:
        lines.append("density")
        lines += [" ".join(_fmt(v) for v in row) for row in st]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class ModelFormatError(ValueError):
    def __init__(self, msg: str, line: int = 0):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


def read_model(path) -> Tuple[List[np.ndarray], np.ndarray]:
    with open(path) as fh:
        raw = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(fh)]
    lines = [(i, ln) for i, ln in raw if ln]
    pos = 0

    def take(prefix=None):
        nonlocal pos
        if pos >= len(lines):
            raise ModelFormatError("unexpected end of file", raw[-1][0] if raw else 0)
        i, ln = lines[pos]
        pos += 1
        if prefix and not ln.startswith(prefix):
            raise ModelFormatError(f"expected {prefix!r}", i)
        return i, ln

    def row(n):
        i, ln = take()
        try:
            vals = [complex(t) for t in ln.split()]
        except ValueError:
            raise ModelFormatError("bad number", i)
        if len(vals) != n:
            raise ModelFormatError(f"expected {n} entries", i)
        return vals

    def as_array(rows):
        a = np.array(rows)
        return a.real.copy() if np.all(a.imag == 0) else a

    i, ln = take("dimension")
    n = int(ln.split()[1])
    i, ln = take("operators")
    k = int(ln.split()[1])
    ops = []
    for _ in range(k):
        take("operator")
        ops.append(as_array([row(n) for _ in range(n)]))
    i, ln = take()
    if ln == "vector":
        state = as_array(row(n))
    elif ln == "density":
        state = as_array([row(n) for _ in range(n)])
    else:
        raise ModelFormatError("expected 'vector' or 'density'", i)
    return ops, state
