"""Primal-dual interior-point solver for block-diagonal SDPs.

Primal:  min <C, X>  s.t. <A_i, X> = b_i,  X psd
Dual:    max b @ y   s.t. C - sum_i y_i A_i = S,  S psd

Search directions use the HKM scaling with a Mehrotra predictor-corrector
step.  The Schur complement ``M_ij = tr(A_i X A_j S^-1)`` is formed one
constraint at a time from dense block products and factored by Cholesky.

Instances are stored as SDPA-style coordinate arrays ``(mat, blk, i, j,
val)`` with 0-based ``i <= j``; ``mat == 0`` is ``C`` and ``mat == k`` is
``A_k``.

Statuses: ``optimal`` (all tolerances met), ``near-optimal`` (best iterate
within ``near_factor`` times the tolerances), ``stalled``, ``infeasible``,
``unbounded``.  The run stops early once the best iterate has not improved
for ``patience`` iterations.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)


class SDPAFormatError(ValueError):
    def __init__(self, msg: str, line: int = 0):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


@dataclass
class SDPInstance:
    block_sizes: List[int]
    b: np.ndarray
    mat: np.ndarray
    blk: np.ndarray
    i: np.ndarray
    j: np.ndarray
    val: np.ndarray

    @property
    def m(self) -> int:
        return len(self.b)

    @classmethod
    def from_arrays(cls, block_sizes, b, mat, blk, i, j, val, aggregate: bool = True) -> "SDPInstance":
        mat = np.asarray(mat, dtype=np.int64)
        blk = np.asarray(blk, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        order = np.lexsort((hi, lo, blk, mat))
        mat, blk, lo, hi, val = mat[order], blk[order], lo[order], hi[order], val[order]
        if len(mat):
            key = np.stack([mat, blk, lo, hi], axis=1)
            new = np.ones(len(mat), dtype=bool)
            new[1:] = np.any(key[1:] != key[:-1], axis=1)
            if not aggregate and not new.all():
                k = int(np.flatnonzero(~new)[0])
                raise ValueError(f"duplicate entry {tuple(key[k])}")
            grp = np.cumsum(new) - 1
            sums = np.zeros(grp[-1] + 1)
            np.add.at(sums, grp, val)
            mat, blk, lo, hi, val = mat[new], blk[new], lo[new], hi[new], sums
            keep = val != 0.0
            mat, blk, lo, hi, val = mat[keep], blk[keep], lo[keep], hi[keep], val[keep]
        inst = cls(list(int(s) for s in block_sizes), np.asarray(b, dtype=float), mat, blk, lo, hi, val)
        inst.validate()
        return inst

    def validate(self) -> None:
        m = len(self.b)
        if len(self.mat) and (self.mat.min() < 0 or self.mat.max() > m):
            raise ValueError("constraint index out of range")
        if len(self.blk) and (self.blk.min() < 0 or self.blk.max() >= len(self.block_sizes)):
            raise ValueError("block index out of range")
        sizes = np.asarray(self.block_sizes, dtype=np.int64)
        if len(self.i) and (np.any(self.i < 0) or np.any(self.j >= sizes[self.blk]) or np.any(self.i > self.j)):
            raise ValueError("entry index out of range")

    def matrix(self, k: int, block: int) -> np.ndarray:
        n = self.block_sizes[block]
        out = np.zeros((n, n))
        sel = (self.mat == k) & (self.blk == block)
        out[self.i[sel], self.j[sel]] = self.val[sel]
        out[self.j[sel], self.i[sel]] = self.val[sel]
        return out

    def same(self, other: "SDPInstance") -> bool:
        return (self.block_sizes == other.block_sizes and np.array_equal(self.b, other.b)
                and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("mat", "blk", "i", "j", "val")))


@dataclass
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    reg: float = 1e-12
    step: float = 0.98
    refine: int = 2
    patience: int = 15
    near_factor: float = 100.0
    verbose: bool = False


@dataclass
class SDPSolution:
    X: Optional[List[np.ndarray]]
    y: np.ndarray
    S: Optional[List[np.ndarray]]
    primal_objective: float
    dual_objective: float
    status: str
    iterations: int
    gap: float = math.nan
    primal_infeasibility: float = math.nan
    dual_infeasibility: float = math.nan
    seconds: float = 0.0
    history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# per-block data


class _Block:
    def __init__(self, n: int, m: int, mat, i, j, val):
        self.n = n
        cmask = mat == 0
        self.C = np.zeros((n, n))
        self.C[i[cmask], j[cmask]] = val[cmask]
        self.C[j[cmask], i[cmask]] = val[cmask]
        mat, i, j, val = mat[~cmask] - 1, i[~cmask], j[~cmask], val[~cmask]
        off = i != j
        # full symmetric entries
        fm = np.concatenate([mat, mat[off]])
        fi = np.concatenate([i, j[off]])
        fj = np.concatenate([j, i[off]])
        fv = np.concatenate([val, val[off]])
        order = np.lexsort((fj, fi, fm))
        fm, fi, fj, fv = fm[order], fi[order], fj[order], fv[order]
        self.active = np.unique(fm)
        self.BT = sp.csr_matrix((fv, (fm, fi * n + fj)), shape=(m, n * n))
        self.BTa = self.BT[self.active]
        starts = np.searchsorted(fm, self.active)
        ends = np.searchsorted(fm, self.active, side="right")
        self.rows = [fi[s:e] for s, e in zip(starts, ends)]
        self.cols = [fj[s:e] for s, e in zip(starts, ends)]
        self.vals = [fv[s:e] for s, e in zip(starts, ends)]
        self.fro = np.zeros(m)
        np.add.at(self.fro, fm, fv ** 2)
        self.fro = np.sqrt(self.fro)

    def A(self, Z: np.ndarray) -> np.ndarray:
        return self.BT @ Z.ravel()

    def AT(self, y: np.ndarray) -> np.ndarray:
        return (self.BT.T @ y).reshape(self.n, self.n)

    def schur(self, X: np.ndarray, Sinv: np.ndarray, M: np.ndarray) -> None:
        act = self.active
        BTa = self.BTa
        for k, r, c, v in zip(act, self.rows, self.cols, self.vals):
            U = (X[:, r] * v) @ Sinv[c, :]
            M[k, act] += BTa @ U.ravel()


def _sym(Z):
    return (Z + Z.T) * 0.5


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    W = sla.solve_triangular(L, dX, lower=True)
    W = sla.solve_triangular(L, W.T, lower=True)
    lam = sla.eigvalsh(_sym(W), subset_by_index=[0, 0])[0] if X.shape[0] > 1 else W[0, 0]
    return math.inf if lam >= 0 else -1.0 / lam


def _inner(As, Bs) -> float:
    return float(sum(np.vdot(a, b) for a, b in zip(As, Bs)))


def solve(inst: SDPInstance, opts: Optional[SolverOptions] = None) -> SDPSolution:
    """Solve ``inst`` with the HKM predictor-corrector method."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    m = inst.m
    b = inst.b
    blocks = []
    for bi, n in enumerate(inst.block_sizes):
        sel = inst.blk == bi
        blocks.append(_Block(abs(n), m, inst.mat[sel], inst.i[sel], inst.j[sel], inst.val[sel]))
    N = sum(B.n for B in blocks)
    if m == 0:
        # nothing to choose: X minimizes <C, X> over the psd cone
        X = [np.zeros((B.n, B.n)) for B in blocks]
        ok = all(np.linalg.eigvalsh(B.C).min() >= -opts.feas_tol for B in blocks if B.n)
        return SDPSolution(X, np.zeros(0), [B.C.copy() for B in blocks], 0.0, 0.0,
                           "optimal" if ok else "unbounded", 0, seconds=time.perf_counter() - t0)

    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + math.sqrt(sum(np.sum(B.C ** 2) for B in blocks))
    X, S = [], []
    for B in blocks:
        fro = B.fro[B.active] if len(B.active) else np.zeros(1)
        xi = max(10.0, math.sqrt(B.n), B.n * float(np.max((1 + np.abs(b[B.active])) / (1 + fro))) if len(B.active) else 10.0)
        eta = max(10.0, math.sqrt(B.n), float(fro.max()), float(np.linalg.norm(B.C)))
        X.append(xi * np.eye(B.n))
        S.append(eta * np.eye(B.n))
    y = np.zeros(m)

    def A(Zs):
        out = np.zeros(m)
        for B, Z in zip(blocks, Zs):
            out += B.A(Z)
        return out

    def AT(v):
        return [B.AT(v) for B in blocks]

    status = "stalled"
    best = None
    hist = []
    it = 0
    small_steps = 0
    last_gain = 0
    pobj = dobj = math.nan
    gap = pinf = dinf = math.inf
    for it in range(opts.max_iter + 1):
        Rp = b - A(X)
        ATy = AT(y)
        Rd = [B.C - Sb - Ay for B, Sb, Ay in zip(blocks, S, ATy)]
        pobj = sum(float(np.vdot(B.C, Xb)) for B, Xb in zip(blocks, X))
        dobj = float(b @ y)
        mu = _inner(X, S) / N
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(Rp)) / normb
        dinf = math.sqrt(sum(float(np.sum(R ** 2)) for R in Rd)) / normC
        hist.append((it, pobj, dobj, gap, pinf, dinf, mu))
        if opts.verbose:
            log.info("it %3d  p %.9g  d %.9g  gap %.2e  pinf %.2e  dinf %.2e", it, pobj, dobj, gap, pinf, dinf)
        score = max(gap / opts.gap_tol, pinf / opts.feas_tol, dinf / opts.feas_tol)
        if best is None or score < best[0]:
            if best is None or score < 0.9 * best[0]:
                last_gain = it
            best = (score, [x.copy() for x in X], y.copy(), [s.copy() for s in S], pobj, dobj, gap, pinf, dinf, it)
        if gap <= opts.gap_tol and pinf <= opts.feas_tol and dinf <= opts.feas_tol:
            status = "optimal"
            break
        if abs(dobj) > 1e12 * (1 + abs(pobj)) and dinf < 1e-6:
            status = "infeasible"
            break
        if abs(pobj) > 1e12 * (1 + abs(dobj)) and pinf < 1e-6:
            status = "unbounded"
            break
        if it == opts.max_iter or it - last_gain > opts.patience:
            break
        try:
            Sinv = []
            for Sb in S:
                Ls = np.linalg.cholesky(Sb)
                Li = sla.solve_triangular(Ls, np.eye(Sb.shape[0]), lower=True)
                Sinv.append(Li.T @ Li)
            M = np.zeros((m, m))
            for B, Xb, Si in zip(blocks, X, Sinv):
                B.schur(Xb, Si, M)
            M = _sym(M)
            M[np.diag_indices(m)] += opts.reg * max(1.0, float(np.max(np.diag(M))))
            cf = sla.cho_factor(M, lower=True, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            break

        XRS = [Xb @ R @ Si for Xb, R, Si in zip(X, Rd, Sinv)]
        base = b + A(XRS)

        def Mop(v):
            return A([Xb @ a @ Si for Xb, a, Si in zip(X, AT(v), Sinv)])

        def direction(rhs, extra):
            dy = sla.cho_solve(cf, rhs, check_finite=False)
            # refinement against the exact operator
            for _ in range(opts.refine):
                r = rhs - Mop(dy)
                dy = dy + sla.cho_solve(cf, r, check_finite=False)
            ATdy = AT(dy)
            dS = [R - a for R, a in zip(Rd, ATdy)]
            dX = [_sym(e - Xb @ d @ Si) for e, Xb, d, Si in zip(extra, X, dS, Sinv)]
            return dX, dy, dS

        # predictor
        dXa, dya, dSa = direction(base, [-Xb for Xb in X])
        ap = min(1.0, min(_max_step(Xb, d) for Xb, d in zip(X, dXa)))
        ad = min(1.0, min(_max_step(Sb, d) for Sb, d in zip(S, dSa)))
        mu_aff = _inner([Xb + ap * d for Xb, d in zip(X, dXa)], [Sb + ad * d for Sb, d in zip(S, dSa)]) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        corr = [dx @ ds @ Si for dx, ds, Si in zip(dXa, dSa, Sinv)]
        rhs = base - sigma * mu * A(Sinv) + A(corr)
        extra = [sigma * mu * Si - Xb - c for Si, Xb, c in zip(Sinv, X, corr)]
        dX, dy, dS = direction(rhs, extra)
        ap = min(_max_step(Xb, d) for Xb, d in zip(X, dX))
        ad = min(_max_step(Sb, d) for Sb, d in zip(S, dS))
        ap = min(1.0, opts.step * ap)
        ad = min(1.0, opts.step * ad)
        if ap < 1e-10 and ad < 1e-10:
            small_steps += 1
            if small_steps > 3:
                break
        else:
            small_steps = 0
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        y = y + ad * dy
        S = [Sb + ad * d for Sb, d in zip(S, dS)]

    if status == "stalled" and best is not None:
        score, X, y, S, pobj, dobj, gap, pinf, dinf, _ = best
        if score <= opts.near_factor:
            status = "near-optimal"
    return SDPSolution(X, y, S, pobj, dobj, status, it, gap, pinf, dinf, time.perf_counter() - t0, hist)


# ---------------------------------------------------------------------------
# SDPA sparse format


def fmt_float(x: float) -> str:
    """Shortest decimal that round-trips to ``x``."""
    r = repr(float(x))
    if r.endswith(".0"):
        r = r[:-2]
    return r


def export_sdpa(inst: SDPInstance, path) -> None:
    """Write ``inst`` in SDPA sparse format (1-based, ``matno 0`` = ``C``)."""
    lines = [str(inst.m), str(len(inst.block_sizes)),
             " ".join(str(s) for s in inst.block_sizes),
             " ".join(fmt_float(v) for v in inst.b)]
    for k, bl, i, j, v in zip(inst.mat, inst.blk, inst.i, inst.j, inst.val):
        lines.append(f"{k} {bl + 1} {i + 1} {j + 1} {fmt_float(v)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _numbers(line: str) -> List[str]:
    for ch in ",{}()":
        line = line.replace(ch, " ")
    return line.split()


def import_sdpa(path) -> SDPInstance:
    with open(path) as fh:
        raw = fh.read().splitlines()
    body = [(k + 1, ln) for k, ln in enumerate(raw)
            if ln.strip() and not ln.lstrip().startswith(('"', "*"))]
    if len(body) < 3:
        raise SDPAFormatError("truncated header")
    try:
        m = int(_numbers(body[0][1])[0])
        nb = int(_numbers(body[1][1])[0])
        sizes = [int(t) for t in _numbers(body[2][1])[:nb]]
    except (ValueError, IndexError):
        raise SDPAFormatError("malformed header", body[0][0])
    if len(sizes) != nb:
        raise SDPAFormatError("wrong number of block sizes", body[2][0])
    pos = 3
    b: List[float] = []
    while len(b) < m:
        if pos >= len(body):
            raise SDPAFormatError("missing objective vector", body[-1][0])
        try:
            b += [float(t) for t in _numbers(body[pos][1])]
        except ValueError:
            raise SDPAFormatError("malformed objective vector", body[pos][0])
        pos += 1
    if len(b) != m:
        raise SDPAFormatError("objective vector length differs from m", body[pos - 1][0])
    rows = []
    seen = set()
    for ln, text in body[pos:]:
        t = _numbers(text)
        if len(t) < 5:
            raise SDPAFormatError("entry needs 5 fields", ln)
        try:
            k, bl, i, j = (int(x) for x in t[:4])
            v = float(t[4])
        except ValueError:
            raise SDPAFormatError("malformed entry", ln)
        if not (0 <= k <= m and 1 <= bl <= nb and 1 <= i <= abs(sizes[bl - 1]) and 1 <= j <= abs(sizes[bl - 1])):
            raise SDPAFormatError("entry index out of range", ln)
        key = (k, bl, min(i, j), max(i, j))
        if key in seen:
            raise SDPAFormatError("duplicate entry", ln)
        seen.add(key)
        rows.append((k, bl - 1, min(i, j) - 1, max(i, j) - 1, v))
    arr = list(zip(*rows)) if rows else [[], [], [], [], []]
    return SDPInstance.from_arrays(sizes, b, *arr, aggregate=False)
