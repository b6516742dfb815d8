"""Exact verification of positivity certificates for state polynomials.

Two certificate shapes are checked:

* quotient certificates ``den * target = sum_k w_k prod_j s(h_kj h_kj*)``
  with nonnegative rational weights ``w_k``;
* membership witnesses ``a - m = sum_c sum_{u,v} G_c[u, v] s(u* c v)`` with
  positive semidefinite Gram matrices ``G_c``.

Certificate files hold one item per line::

    # comment
    target: s(x1^2)*s(x2^2) - s(x1*x2)^2
    denominator: s(x1^2)
    numerator: s(x1^2)*x2 - s(x1*x2)*x1
    numerator: [1/2] h1 | h2        # weight 1/2, product s(h1 h1*) s(h2 h2*)

A missing denominator means 1.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .algebra import (
    EXACT, FLOAT, Alphabet, ModeError, NCStatePoly, ParseError, ExprParser, infer_alphabet, involution, mul,
    sigma, to_string,
)
from .moment import SizeError
from .quotient import QuotientContext


class CertificateError(ValueError):
    pass


@dataclass
class QuotientCertificate:
    target: NCStatePoly
    denominator: NCStatePoly
    numerators: List[Tuple[Fraction, List[NCStatePoly]]]
    alphabet: Optional[Alphabet] = None
    q: Optional[QuotientContext] = None

    def _reduce(self, f: NCStatePoly) -> NCStatePoly:
        return self.q.reduce(f) if self.q is not None else f

    def sides(self) -> Tuple[NCStatePoly, NCStatePoly]:
        """Both sides of the claimed identity, expanded."""
        for f in [self.target, self.denominator] + [h for _, hs in self.numerators for h in hs]:
            if f.mode != EXACT:
                raise ModeError("certificates are verified in exact mode")
        lhs = self._reduce(self.denominator * self.target)
        rhs = NCStatePoly.zero()
        for w, hs in self.numerators:
            term = NCStatePoly.constant(Fraction(w))
            for h in hs:
                term = term * sigma(mul(h, involution(h)))
            rhs = rhs + term
        return lhs, self._reduce(rhs)


def verify_quotient_certificate(cert: QuotientCertificate) -> bool:
    """Exact check of ``den * target == sum w * prod s(h h*)``.

    Weights must be nonnegative and the denominator must itself be a
    weighted sum of products of squares or a positive constant for the
    certificate to imply ``target >= 0``; only the identity is checked
    here.
    """
    if any(Fraction(w) < 0 for w, _ in cert.numerators):
        return False
    if not cert.target.is_state() or not cert.denominator.is_state():
        raise CertificateError("target and denominator must be state polynomials")
    lhs, rhs = cert.sides()
    return lhs == rhs


def ldl_psd(G) -> bool:
    """Exact positive semidefiniteness of a symmetric rational matrix (LDL^T with pivoting)."""
    A = [[Fraction(x) for x in row] for row in G]
    n = len(A)
    for i in range(n):
        for j in range(n):
            if A[i][j] != A[j][i]:
                return False
    alive = list(range(n))
    while alive:
        p = max(alive, key=lambda k: A[k][k])
        piv = A[p][p]
        if piv < 0:
            return False
        if piv == 0:
            return all(A[i][j] == 0 for i in alive for j in alive)
        alive.remove(p)
        for i in alive:
            f = A[i][p] / piv
            if f:
                for j in alive:
                    A[i][j] -= f * A[p][j]
    return True


@dataclass
class MembershipReport:
    exact: bool
    verified: bool
    residual: float
    min_eigenvalue: float
    reason: str = ""


def _nc_poly(w, mode) -> NCStatePoly:
    return NCStatePoly({w: 1}, mode)


def verify_membership(a: NCStatePoly, m, grams: Sequence[Tuple[Optional[NCStatePoly], Sequence, object]],
                      q: Optional[QuotientContext] = None, tol: float = 1e-9) -> MembershipReport:
    """Check ``a - m = sum_c sum_{u,v} G[u, v] s(u* c v)``.

    ``grams`` holds ``(c, rows, G)`` with ``c`` a constraint polynomial
    (``None`` for 1) and ``rows`` the NCS-words indexing ``G``.  With
    rational data the identity and positive semidefiniteness are exact;
    with floats the residual is the largest coefficient mismatch and the
    Gram matrices must have eigenvalues above ``-tol``.
    """
    exact = a.mode == EXACT and all(
        np.asarray(G).dtype == object or isinstance(np.asarray(G).flat[0] if np.size(G) else Fraction(0), Fraction)
        for _, _, G in grams)
    mode = EXACT if exact else FLOAT
    red = (lambda f: q.reduce(f)) if q is not None else (lambda f: f)
    target = a if exact else a.to_float()
    target = red(target - NCStatePoly.constant(m if exact else float(m), mode))
    total = NCStatePoly.zero(mode)
    worst = np.inf
    for c, rows, G in grams:
        G = np.asarray(G, dtype=object if exact else float)
        if exact:
            if not ldl_psd(G.tolist()):
                return MembershipReport(True, False, np.inf, -np.inf, "Gram matrix is not positive semidefinite")
        else:
            if G.size:
                worst = min(worst, float(np.linalg.eigvalsh((G + G.T) / 2).min()))
        cpoly = NCStatePoly.constant(1, mode) if c is None else (c if exact else c.to_float())
        polys = [_nc_poly(r, mode) for r in rows]
        for i, j in itertools.product(range(len(rows)), repeat=2):
            g = G[i, j]
            if g == 0:
                continue
            total = total + NCStatePoly.constant(g, mode) * sigma(mul(mul(involution(polys[i]), cpoly), polys[j]))
    total = red(total)
    diff = target - total
    if exact:
        ok = diff.is_zero()
        return MembershipReport(True, ok, 0.0 if ok else float(max(abs(v) for v in diff.terms.values())),
                                float("nan"), "" if ok else "identity fails")
    res = max((abs(float(v)) for v in diff.terms.values()), default=0.0)
    worst = 0.0 if worst == np.inf else worst
    ok = worst >= -tol
    return MembershipReport(False, ok, res, worst, "" if ok else "Gram matrix has a negative eigenvalue")


# ---------------------------------------------------------------------------
# Hankel minors


def words_upto(n: int, d: int) -> List[Tuple[int, ...]]:
    """Free words of length at most ``d`` in deglex order."""
    out = [()]
    for k in range(1, d + 1):
        out += list(itertools.product(range(n), repeat=k))
    return out


def det(M: List[List[NCStatePoly]]) -> NCStatePoly:
    """Laplace expansion along the first row (entries commute)."""
    n = len(M)
    if n == 0:
        return NCStatePoly.constant(1)
    if n == 1:
        return M[0][0]
    out = NCStatePoly.zero(M[0][0].mode)
    for j in range(n):
        if M[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * det(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def hankel_matrix_symbolic(rows: Sequence[Sequence[int]]) -> List[List[NCStatePoly]]:
    """``[s(u v*)]`` for free words ``u, v`` in ``rows``."""
    return [[NCStatePoly.symbol(tuple(u) + tuple(v)[::-1]) for v in rows] for u in rows]


def hankel_minor(d: int, rows, n: Optional[int] = None) -> NCStatePoly:
    """Principal minor of ``H_d`` on ``rows`` (words, or indices into the deglex word list)."""
    rows = list(rows)
    if len(rows) > 5:
        raise SizeError("minors above 5x5 are not expanded")
    if rows and isinstance(rows[0], int):
        if n is None:
            raise ValueError("index rows need the number of variables")
        allw = words_upto(n, d)
        rows = [allw[i] for i in rows]
    for w in rows:
        if len(w) > d:
            raise ValueError(f"word {w} exceeds level {d}")
    return det(hankel_matrix_symbolic(rows))


def adjugate_certificate(rows: Sequence[Sequence[int]]) -> QuotientCertificate:
    """``e2(s) * det(s) = sum_j s(h_j h_j*)`` with ``h = adj(s) u``.

    ``s`` is the symbolic Hankel matrix on ``rows`` (size 3), ``e2`` the
    second elementary symmetric function of its eigenvalues and ``adj(s) =
    s^2 - tr(s) s + e2 I``.
    """
    S = hankel_matrix_symbolic(rows)
    n = len(S)
    if n != 3:
        raise ValueError("the adjugate identity is built for 3x3 minors")
    S2 = [[sum((S[i][k] * S[k][j] for k in range(n)), NCStatePoly.zero()) for j in range(n)] for i in range(n)]
    tr = S[0][0] + S[1][1] + S[2][2]
    tr2 = S2[0][0] + S2[1][1] + S2[2][2]
    e2 = NCStatePoly.constant(Fraction(1, 2)) * (tr * tr - tr2)
    adj = [[S2[i][j] - tr * S[i][j] + (e2 if i == j else NCStatePoly.zero()) for j in range(n)] for i in range(n)]
    us = [NCStatePoly.word(tuple(w)) for w in rows]
    hs = []
    for i in range(n):
        h = NCStatePoly.zero()
        for k in range(n):
            h = h + adj[i][k] * us[k]
        hs.append(h)
    return QuotientCertificate(det(S), e2, [(Fraction(1), [h]) for h in hs])


def cauchy_schwarz_certificate() -> QuotientCertificate:
    x1, x2 = NCStatePoly.var(0), NCStatePoly.var(1)
    s11 = NCStatePoly.symbol((0, 0))
    s22 = NCStatePoly.symbol((1, 1))
    s12 = NCStatePoly.symbol((0, 1))
    h = s11 * x2 - s12 * x1
    return QuotientCertificate(s11 * s22 - s12 * s12, s11, [(Fraction(1), [h])], Alphabet(["x1", "x2"]))


# ---------------------------------------------------------------------------
# text format

_WEIGHT = re.compile(r"\s*\[([^\]]*)\]\s*")


def parse_certificate(text: str) -> QuotientCertificate:
    items = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if ":" not in line:
            raise ParseError("expected 'key: polynomial'", ln, 1)
        key, body = line.split(":", 1)
        key = key.strip()
        if key not in ("target", "denominator", "numerator", "unitary"):
            raise ParseError(f"unknown key {key!r}", ln, 1)
        items.append((key, body, ln, len(line) - len(line.lstrip()) + len(key) + 2))
    names = " + ".join(b.replace("|", "+") for k, b, _, _ in items if k != "unitary")
    names = _WEIGHT.sub(" ", names)
    al = infer_alphabet(names)
    parser = ExprParser(al, {}, EXACT)
    target = None
    den = NCStatePoly.constant(1)
    nums = []
    unitary = []
    for key, body, ln, col in items:
        if key == "unitary":
            unitary += body.split()
            continue
        if key == "numerator":
            w = Fraction(1)
            m = _WEIGHT.match(body)
            if m:
                try:
                    w = Fraction(m.group(1).strip())
                except ValueError:
                    raise ParseError("bad weight", ln, col)
                body, col = body[m.end():], col + m.end()
            hs, off = [], 0
            for piece in body.split("|"):
                hs.append(parser.parse(piece, ln, col + off))
                off += len(piece) + 1
            nums.append((w, hs))
        else:
            f = parser.parse(body, ln, col)
            if key == "target":
                target = f
            else:
                den = f
    if target is None:
        raise ParseError("missing target", 1, 1)
    q = None
    if unitary:
        kinds = tuple("unitary" if nm in unitary else "free" for nm in al.names)
        q = QuotientContext(len(al), kinds, [])
    return QuotientCertificate(target, den, nums, al, q)


def format_certificate(cert: QuotientCertificate) -> str:
    al = cert.alphabet
    lines = [f"target: {to_string(cert.target, al)}"]
    if cert.denominator != NCStatePoly.constant(1):
        lines.append(f"denominator: {to_string(cert.denominator, al)}")
    for w, hs in cert.numerators:
        pre = "" if w == 1 else f"[{w}] "
        lines.append("numerator: " + pre + " | ".join(to_string(h, al) for h in hs))
    return "\n".join(lines) + "\n"


def load_certificate(path) -> QuotientCertificate:
    with open(path) as fh:
        return parse_certificate(fh.read())
