"""Words, state symbols and (nc) state polynomials.

Letters are 0-based integers.  An :class:`Alphabet` maps them to names
for parsing and printing.  A state symbol ``s(w)`` is stored as the
degree-lexicographic minimum of ``w`` and its reversal; a product of
symbols (an S-word) is a sorted tuple of such representatives.

Two coefficient modes are supported: ``"exact"`` (:class:`fractions.Fraction`)
and ``"float"``.  Arithmetic never mixes them silently.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

NCWord = Tuple[int, ...]
SSymbol = Tuple[int, ...]
SWord = Tuple[SSymbol, ...]
NCSWord = Tuple[SWord, NCWord]

EXACT = "exact"
FLOAT = "float"


class ModeError(TypeError):
    """Raised when exact and floating coefficients are combined."""


class ParseError(ValueError):
    """Syntax error with 1-based line and column."""

    def __init__(self, msg: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# words and symbols


def deglex_key(w: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
    return (len(w), tuple(w))


def sword_key(s: SWord):
    return (sum(len(f) for f in s), tuple(deglex_key(f) for f in s))


def ncsword_key(m: NCSWord):
    s, t = m
    return (sword_degree(s) + len(t), len(t), t, sword_key(s))


def canonical_symbol(w: Sequence[int]) -> SSymbol:
    """Free-algebra representative of ``s(w)``: min of ``w`` and its reverse."""
    w = tuple(w)
    r = w[::-1]
    return w if w <= r else r


def make_sword(factors: Iterable[SSymbol]) -> SWord:
    return tuple(sorted(factors, key=deglex_key))


def sword_mul(a: SWord, b: SWord) -> SWord:
    if not a:
        return b
    if not b:
        return a
    return make_sword(a + b)


def sword_degree(s: SWord) -> int:
    return sum(len(f) for f in s)


def ncsword_degree(m: NCSWord) -> int:
    return sword_degree(m[0]) + len(m[1])


# ---------------------------------------------------------------------------
# coefficients


def _coef_mode(c) -> str:
    if isinstance(c, (bool, np.bool_)):
        raise TypeError("boolean coefficient")
    if isinstance(c, (int, Fraction, np.integer)):
        return EXACT
    if isinstance(c, (float, np.floating)):
        return FLOAT
    raise TypeError(f"unsupported coefficient {c!r}")


def _coerce(c, mode: str):
    if mode == EXACT:
        if isinstance(c, (float, np.floating)):
            raise ModeError("float coefficient in exact polynomial")
        return Fraction(int(c)) if isinstance(c, (int, np.integer)) else c
    return float(c)


# ---------------------------------------------------------------------------
# polynomials


class NCStatePoly:
    """Sparse nc state polynomial ``sum c * s(u1)...s(uk) * v``.

    Parameters
    ----------
    terms : mapping from NCS-word ``(sword, tail)`` to coefficient
    mode : ``"exact"`` or ``"float"``; inferred from the coefficients if omitted
    """

    __slots__ = ("_terms", "mode", "_hash")

    def __init__(self, terms: Optional[Mapping[NCSWord, object]] = None, mode: Optional[str] = None):
        terms = dict(terms or {})
        if mode is None:
            modes = {_coef_mode(c) for c in terms.values()}
            if len(modes) > 1:
                raise ModeError("mixed coefficient modes")
            mode = modes.pop() if modes else EXACT
        if mode not in (EXACT, FLOAT):
            raise ValueError(f"unknown mode {mode!r}")
        clean = {}
        for (s, t), c in terms.items():
            if _coef_mode(c) != mode and not (mode == FLOAT and _coef_mode(c) == EXACT):
                raise ModeError("coefficient does not match polynomial mode")
            c = _coerce(c, mode)
            if c != 0:
                key = (make_sword(s), tuple(t))
                clean[key] = clean.get(key, 0) + c
                if clean[key] == 0:
                    del clean[key]
        self._terms = clean
        self.mode = mode
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c=1, mode: Optional[str] = None) -> "NCStatePoly":
        return cls({((), ()): c}, mode)

    @classmethod
    def var(cls, i: int, mode: str = EXACT) -> "NCStatePoly":
        return cls({((), (i,)): 1}, mode)

    @classmethod
    def word(cls, w: Sequence[int], mode: str = EXACT) -> "NCStatePoly":
        return cls({((), tuple(w)): 1}, mode)

    @classmethod
    def symbol(cls, w: Sequence[int], mode: str = EXACT) -> "NCStatePoly":
        """The state polynomial ``s(w)``; ``s(1) = 1``."""
        w = tuple(w)
        s = (canonical_symbol(w),) if w else ()
        return cls({(s, ()): 1}, mode)

    @classmethod
    def zero(cls, mode: str = EXACT) -> "NCStatePoly":
        return cls({}, mode)

    # -- container protocol -----------------------------------------------
    @property
    def terms(self) -> Dict[NCSWord, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[NCSWord]:
        return iter(self._terms)

    def coefficient(self, m: NCSWord):
        return self._terms.get(m, 0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_state(self) -> bool:
        return all(not t for (_, t) in self._terms)

    @property
    def degree(self) -> int:
        if not self._terms:
            raise ValueError("the zero polynomial has no degree")
        return max(ncsword_degree(m) for m in self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float, Fraction)):
            other = NCStatePoly.constant(other, self.mode)
        if not isinstance(other, NCStatePoly):
            return NotImplemented
        return self.mode == other.mode and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.mode, frozenset(self._terms.items())))
        return self._hash

    # -- arithmetic ---------------------------------------------------------
    def _lift(self, other) -> "NCStatePoly":
        if isinstance(other, NCStatePoly):
            if other.mode != self.mode:
                raise ModeError("mixed coefficient modes")
            return other
        if self.mode == EXACT and isinstance(other, (float, np.floating)):
            raise ModeError("float scalar in exact polynomial")
        return NCStatePoly.constant(other, self.mode)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return _raw(out, self.mode)

    __radd__ = __add__

    def __neg__(self):
        return _raw({m: -c for m, c in self._terms.items()}, self.mode)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, NCStatePoly):
            other = self._lift(other)
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self._lift(other), self)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = NCStatePoly.constant(1, self.mode)
        for _ in range(k):
            out = mul(out, self)
        return out

    def star(self) -> "NCStatePoly":
        return involution(self)

    # -- conversions --------------------------------------------------------
    def to_float(self) -> "NCStatePoly":
        return _raw({m: float(c) for m, c in self._terms.items()}, FLOAT)

    def to_exact(self) -> "NCStatePoly":
        return _raw({m: Fraction(c) for m, c in self._terms.items()}, EXACT)

    def map_words(self, f: Callable[[NCSWord], Optional[Tuple[NCSWord, object]]]) -> "NCStatePoly":
        """Rebuild through ``f(word) -> (word', factor)`` (``None`` drops the term)."""
        out: Dict[NCSWord, object] = {}
        for m, c in self._terms.items():
            r = f(m)
            if r is None:
                continue
            m2, k = r
            out[m2] = out.get(m2, 0) + c * k
        return _raw(out, self.mode)

    def __repr__(self) -> str:
        return f"NCStatePoly({to_string(self)!r}, mode={self.mode!r})"

    def __str__(self) -> str:
        return to_string(self)


class StatePoly(NCStatePoly):
    """An :class:`NCStatePoly` all of whose tails are empty."""

    __slots__ = ()

    def __init__(self, terms=None, mode=None):
        super().__init__(terms, mode)
        if not self.is_state():
            raise TypeError("StatePoly terms must have empty tails")

    @classmethod
    def of(cls, f: NCStatePoly) -> "StatePoly":
        return cls(f._terms, f.mode)


def _raw(terms: Dict[NCSWord, object], mode: str) -> NCStatePoly:
    p = NCStatePoly.__new__(NCStatePoly)
    p._terms = {m: c for m, c in terms.items() if c != 0}
    p.mode = mode
    p._hash = None
    return p


# ---------------------------------------------------------------------------
# core operations


def mul(f: NCStatePoly, g: NCStatePoly) -> NCStatePoly:
    """Product in the free algebra; scalars commute with everything."""
    if f.mode != g.mode:
        raise ModeError("mixed coefficient modes")
    out: Dict[NCSWord, object] = {}
    for (s1, t1), c1 in f._terms.items():
        for (s2, t2), c2 in g._terms.items():
            m = (sword_mul(s1, s2), t1 + t2)
            out[m] = out.get(m, 0) + c1 * c2
    return _raw(out, f.mode)


def involution(f: NCStatePoly) -> NCStatePoly:
    """Reverse every tail; symbols are fixed."""
    return _raw({(s, t[::-1]): c for (s, t), c in f._terms.items()}, f.mode)


def sigma(f: NCStatePoly) -> StatePoly:
    """Formal state map: ``s * v -> s * s(v)``."""
    out: Dict[NCSWord, object] = {}
    for (s, t), c in f._terms.items():
        m = (sword_mul(s, (canonical_symbol(t),)) if t else s, ())
        out[m] = out.get(m, 0) + c
    p = _raw(out, f.mode)
    return StatePoly.of(p)


def variables(f: NCStatePoly) -> set:
    out = set()
    for s, t in f:
        out.update(t)
        for sym in s:
            out.update(sym)
    return out


def nvars(f: NCStatePoly) -> int:
    v = variables(f)
    return max(v) + 1 if v else 0


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Evaluation:
    """A state together with a tuple of self-adjoint operators.

    ``state`` is either a unit vector or a density matrix.  Operators may be
    real symmetric or complex hermitian; a symbol ``s(w)`` evaluates to the
    real part of ``lambda(w(X))``, which is the value of the symmetrized word.
    Entries of ``object`` dtype (e.g. Fractions) are evaluated exactly.
    """

    operators: Sequence[np.ndarray]
    state: np.ndarray
    tol: float = 1e-9
    dim: int = field(init=False)

    def __post_init__(self):
        self.state = np.asarray(self.state)
        ops = [np.asarray(x) for x in self.operators]
        self.operators = ops
        k = self.state.shape[0]
        self.dim = k
        for x in ops:
            if x.shape != (k, k):
                raise ValueError("operator dimension does not match state")
        if self.state.dtype == object:
            return
        if self.state.ndim == 1:
            if abs(np.linalg.norm(self.state) - 1) > self.tol * max(1, k):
                raise ValueError("vector state is not normalized")
        elif self.state.ndim == 2:
            if self.state.shape != (k, k):
                raise ValueError("density matrix must be square")
            if abs(np.trace(self.state) - 1) > self.tol * max(1, k):
                raise ValueError("density matrix trace differs from 1")
            h = (self.state + self.state.conj().T) / 2
            if np.linalg.eigvalsh(h).min() < -self.tol:
                raise ValueError("density matrix is not positive semidefinite")
        else:
            raise ValueError("state must be a vector or a matrix")

    @property
    def exact(self) -> bool:
        return self.state.dtype == object

    def identity(self):
        if self.exact:
            return _obj_eye(self.dim)
        dt = np.result_type(self.state, *self.operators)
        return np.eye(self.dim, dtype=dt)

    def word(self, w: Sequence[int]):
        y = self.identity()
        for i in w:
            y = y.dot(self.operators[i])
        return y

    def expect(self, y):
        st = self.state
        if st.ndim == 1:
            val = st.conj().dot(y.dot(st)) if not self.exact else st.dot(y.dot(st))
        else:
            val = np.trace(st.dot(y))
        if self.exact:
            return val
        return float(np.real(val))


def _obj_eye(k: int) -> np.ndarray:
    e = np.empty((k, k), dtype=object)
    e.fill(Fraction(0))
    for i in range(k):
        e[i, i] = Fraction(1)
    return e


def evaluate(f: NCStatePoly, e: Evaluation):
    """Evaluate ``f`` at ``(lambda, X)``.

    Returns a scalar for state polynomials and a ``k x k`` array otherwise.
    """
    n = nvars(f)
    if n > len(e.operators):
        raise ValueError(f"polynomial uses {n} variables, evaluation has {len(e.operators)}")
    cache: Dict[SSymbol, object] = {}

    def sym(w):
        if w not in cache:
            cache[w] = e.expect(e.word(w))
        return cache[w]

    if f.is_state():
        total = Fraction(0) if e.exact else 0.0
        for (s, _), c in f.items():
            v = c if e.exact else float(c)
            for w in s:
                v = v * sym(w)
            total = total + v
        return total
    total = np.zeros((e.dim, e.dim), dtype=object if e.exact else np.result_type(float, *e.operators))
    if e.exact:
        total.fill(Fraction(0))
    for (s, t), c in f.items():
        v = c if e.exact else float(c)
        for w in s:
            v = v * sym(w)
        total = total + e.word(t) * v
    return total


def random_evaluation(n: int, dim: int, rng: np.random.Generator, density: bool = False) -> Evaluation:
    ops = []
    for _ in range(n):
        a = rng.standard_normal((dim, dim))
        ops.append((a + a.T) / 2)
    if density:
        b = rng.standard_normal((dim, dim))
        rho = b @ b.T
        return Evaluation(ops, rho / np.trace(rho))
    v = rng.standard_normal(dim)
    return Evaluation(ops, v / np.linalg.norm(v))


def random_nonzero_witness(f: NCStatePoly, trials: int = 20, tol: float = 1e-8,
                           rng: Optional[np.random.Generator] = None) -> Optional[Evaluation]:
    """Search random evaluations of dimension ``2 deg(f) + 1`` where ``f`` is nonzero."""
    if f.is_zero():
        raise ValueError("polynomial is symbolically zero")
    rng = np.random.default_rng(0) if rng is None else rng
    dim = 2 * f.degree + 1
    n = max(nvars(f), 1)
    for _ in range(trials):
        e = random_evaluation(n, dim, rng)
        val = evaluate(f.to_float() if f.mode == EXACT else f, e)
        if np.max(np.abs(val)) > tol:
            return e
    return None


# ---------------------------------------------------------------------------
# text format


_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


def _natural_key(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


@dataclass
class Alphabet:
    """Bidirectional map between letter indices and variable names."""

    names: list

    def __post_init__(self):
        self.names = list(self.names)
        self.index = {nm: i for i, nm in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise ValueError("duplicate variable names")

    @classmethod
    def default(cls, n: int) -> "Alphabet":
        return cls([f"x{i + 1}" for i in range(n)])

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "Alphabet":
        return cls(sorted(set(names), key=_natural_key))

    def __len__(self):
        return len(self.names)

    def name(self, i: int) -> str:
        return self.names[i] if i < len(self.names) else f"x{i + 1}"

    def split(self, token: str) -> Optional[list]:
        """Split a concatenation of names by greedy longest match."""
        out, pos = [], 0
        while pos < len(token):
            for end in range(len(token), pos, -1):
                if token[pos:end] in self.index:
                    out.append(self.index[token[pos:end]])
                    pos = end
                    break
            else:
                return None
        return out


def _fmt_coef(c, mode: str) -> str:
    if mode == EXACT:
        c = Fraction(c)
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def to_string(f: NCStatePoly, alphabet: Optional[Alphabet] = None) -> str:
    """Print ``f`` in the polynomial grammar, terms in deglex order."""
    if alphabet is None:
        alphabet = Alphabet.default(nvars(f))
    if f.is_zero():
        return "0"
    parts = []
    for m in sorted(f, key=ncsword_key):
        c = f.coefficient(m)
        s, t = m
        factors = [f"s({'*'.join(alphabet.name(i) for i in w)})" for w in s]
        factors += [alphabet.name(i) for i in t]
        neg = c < 0
        a = -c if neg else c
        cs = _fmt_coef(a, f.mode)
        if not factors:
            body = cs
        elif cs == "1":
            body = "*".join(factors)
        else:
            body = cs + "*" + "*".join(factors)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append(("- " if neg else "+ ") + body)
    return " ".join(parts)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, col: int = 1) -> list:
    toks = []
    pos = 0
    ln, base = line, col
    line_start = 0
    while pos < len(text):
        if text[pos] == "\n":
            ln += 1
            line_start = pos + 1
            base = 1
            pos += 1
            continue
        if text[pos] in " \t\r":
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", ln, base + pos - line_start)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), ln, base + start - line_start))
        pos = m.end()
    toks.append(_Tok("end", "", ln, base + pos - line_start))
    return toks


class ExprParser:
    """Recursive-descent parser for polynomial expressions.

    Accepts the polynomial grammar plus parentheses, ``/`` by numbers,
    integer powers ``^k`` and named macros.  Inside ``s(...)`` letters are
    separated by ``*``, by whitespace, or written as a concatenation of
    declared names.
    """

    def __init__(self, alphabet: Optional[Alphabet] = None, macros: Optional[Mapping[str, NCStatePoly]] = None,
                 mode: str = EXACT, allow_new: bool = False):
        self.alphabet = alphabet
        self.macros = dict(macros or {})
        self.mode = mode
        self.allow_new = allow_new

    def parse(self, text: str, line: int = 1, col: int = 1) -> NCStatePoly:
        self.toks = tokenize(text, line, col)
        self.i = 0
        if self.toks[0].kind == "end":
            raise self._err("empty expression")
        p = self._sum()
        if self._peek().kind != "end":
            raise self._err(f"unexpected {self._peek().text!r}")
        return p

    # helpers
    def _peek(self) -> _Tok:
        return self.toks[self.i]

    def _next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def _err(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        t = tok or self._peek()
        return ParseError(msg, t.line, t.col)

    def _expect(self, text: str) -> _Tok:
        t = self._next()
        if t.text != text:
            raise self._err(f"expected {text!r}", t)
        return t

    def _letter(self, tok: _Tok) -> list:
        name = tok.text
        if self.alphabet is not None and name in self.alphabet.index:
            return [self.alphabet.index[name]]
        if self.alphabet is not None:
            parts = self.alphabet.split(name)
            if parts is not None:
                return parts
        raise self._err(f"undeclared variable {name!r}", tok)

    # grammar
    def _sum(self) -> NCStatePoly:
        sign = 1
        if self._peek().text in "+-" and self._peek().kind == "op":
            sign = -1 if self._next().text == "-" else 1
        p = self._product()
        if sign < 0:
            p = -p
        while self._peek().kind == "op" and self._peek().text in "+-":
            op = self._next().text
            q = self._product()
            p = p + q if op == "+" else p - q
        return p

    def _product(self) -> NCStatePoly:
        p = self._power()
        while self._peek().kind == "op" and self._peek().text in "*/":
            op = self._next().text
            if op == "*":
                p = p * self._power()
            else:
                tok = self._peek()
                q = self._power()
                if not q.is_state() or len(q) != 1 or ((), ()) not in q.terms:
                    raise self._err("division only by numbers", tok)
                c = q.coefficient(((), ()))
                p = p * (Fraction(1) / c if self.mode == EXACT else 1.0 / c)
        return p

    def _power(self) -> NCStatePoly:
        p = self._atom()
        while self._peek().text == "^":
            self._next()
            t = self._next()
            if t.kind != "num" or not t.text.isdigit():
                raise self._err("exponent must be a non-negative integer", t)
            p = p ** int(t.text)
        return p

    def _atom(self) -> NCStatePoly:
        t = self._peek()
        if t.kind == "num":
            self._next()
            if self.mode == EXACT:
                if any(ch in t.text for ch in ".eE"):
                    return NCStatePoly.constant(Fraction(t.text), EXACT)
                return NCStatePoly.constant(int(t.text), EXACT)
            return NCStatePoly.constant(float(t.text), FLOAT)
        if t.text == "(":
            self._next()
            p = self._sum()
            self._expect(")")
            return p
        if t.kind == "name":
            self._next()
            if t.text == "s" and self._peek().text == "(":
                return self._state()
            if t.text in self.macros:
                m = self.macros[t.text]
                return m if m.mode == self.mode else (m.to_float() if self.mode == FLOAT else m.to_exact())
            return NCStatePoly.word(self._letter(t), self.mode)
        raise self._err(f"unexpected {t.text!r}" if t.text else "unexpected end of input", t)

    def _state(self) -> NCStatePoly:
        self._expect("(")
        # either a plain word or a general expression
        start = self.i
        letters = []
        ok = True
        while self._peek().kind == "name":
            tok = self._next()
            if tok.text in self.macros or (tok.text == "s" and self._peek().text == "("):
                ok = False
                break
            letters += self._letter(tok)
            if self._peek().text == "*":
                self._next()
                continue
        if ok and self._peek().text == ")" and letters:
            self._next()
            return NCStatePoly.symbol(letters, self.mode)
        self.i = start
        inner = self._sum()
        self._expect(")")
        return sigma(inner)


def infer_alphabet(text: str, macros: Optional[Mapping[str, NCStatePoly]] = None) -> Alphabet:
    """Variable names occurring in ``text``, naturally sorted."""
    names = {t.text for t in tokenize(text) if t.kind == "name" and t.text != "s"}
    names -= set(macros or {})
    # drop names that are concatenations of other names, e.g. x1x2
    for nm in sorted(names, key=len, reverse=True):
        rest = Alphabet.from_names(names - {nm})
        parts = rest.split(nm)
        if parts is not None and len(parts) > 1:
            names.discard(nm)
    return Alphabet.from_names(names)


def parse_poly(text: str, alphabet: Optional[Alphabet] = None, mode: str = EXACT,
               macros: Optional[Mapping[str, NCStatePoly]] = None) -> NCStatePoly:
    """Parse a polynomial.  Without an alphabet, names are collected and sorted."""
    if alphabet is None:
        alphabet = infer_alphabet(text, macros)
    return ExprParser(alphabet, macros, mode).parse(text)
