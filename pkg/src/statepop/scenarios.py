"""Bell and network scenarios, the problem file format, and builtin instances.

Problem files are line oriented; ``#`` starts a comment and braces may
span lines::

    scenario bilocal { parties A B C; sources s1 -> A B; s2 -> B C;
                       outputs 2; inputs A:2 B:3 C:2 }
    macro S = s(B1*C1) + s(B2*C2)
    objective (1/3)*S - s(A1*B1*C1)
    sense max                  # or min; default max
    level 3
    class reduced-quantum      # tracial | classical-bound-check | reduced-quantum-complex
    zero s(A1), s(A1*B2)       # moments forced to vanish
    ineq <expr>                # extra constraint  expr >= 0
    eq <expr>                  # extra constraint  expr = 0
    options ss subgroup cs     # default reductions

Without a scenario, ``variables x1 x2 ...`` declares free letters;
``unitary`` / ``projection`` lines set kinds and ``commute a b | c d``
makes every letter left of ``|`` commute with every letter right of it.

Two-outcome parties use binary observables named party + input
(``A1``); parties with ``k > 2`` outcomes use projections ``A1_1 .. A1_k``
with completeness imposed as a moment equality.
"""
from __future__ import annotations

import hashlib
import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import (
    EXACT, FLOAT, Alphabet, Evaluation, ExprParser, NCStatePoly, ParseError, SWord, evaluate,
)
from .moment import Constraint, Problem, normal_words
from .quotient import FREE, PROJECTION, UNITARY, QuotientContext

MODEL_CLASSES = ("reduced-quantum", "tracial", "classical-bound-check", "reduced-quantum-complex")


class ScenarioError(ValueError):
    pass


@dataclass
class NetworkScenario:
    """Parties with inputs/outputs and sources with their access relation."""

    name: str
    parties: List[str]
    inputs: Dict[str, int]
    outputs: Dict[str, int]
    sources: Dict[str, List[str]]

    def __post_init__(self):
        if not self.parties:
            raise ScenarioError("a scenario needs at least one party")
        if len(set(self.parties)) != len(self.parties):
            raise ScenarioError("duplicate party names")
        if not self.sources:
            raise ScenarioError("a scenario needs at least one source")
        for s, ps in self.sources.items():
            for p in ps:
                if p not in self.parties:
                    raise ScenarioError(f"source {s} reaches unknown party {p}")
        for p in self.parties:
            if not any(p in ps for ps in self.sources.values()):
                raise ScenarioError(f"party {p} accesses no source")
            if self.inputs.get(p, 0) < 1:
                raise ScenarioError(f"party {p} needs at least one input")
            if self.outputs.get(p, 2) < 2:
                raise ScenarioError(f"party {p} needs at least two outputs")

    def variable_names(self) -> List[str]:
        names = []
        for p in self.parties:
            b = self.outputs.get(p, 2)
            for i in range(1, self.inputs[p] + 1):
                if b == 2:
                    names.append(f"{p}{i}")
                else:
                    names += [f"{p}{i}_{j}" for j in range(1, b + 1)]
        return names

    def alphabet(self) -> Alphabet:
        return Alphabet(self.variable_names())

    def party_of(self) -> List[int]:
        out = []
        for k, p in enumerate(self.parties):
            b = self.outputs.get(p, 2)
            out += [k] * (self.inputs[p] * (1 if b == 2 else b))
        return out

    def linked(self) -> List[Tuple[int, int]]:
        idx = {p: k for k, p in enumerate(self.parties)}
        out = set()
        for ps in self.sources.values():
            for a, b in itertools.combinations(sorted(idx[p] for p in ps), 2):
                out.add((a, b))
        return sorted(out)

    def quotient(self, model_class: str = "reduced-quantum") -> QuotientContext:
        if model_class not in MODEL_CLASSES:
            raise ScenarioError(f"unsupported model class {model_class!r}")
        party = self.party_of()
        n = len(party)
        kinds, orth = [], []
        pos = 0
        for p in self.parties:
            b = self.outputs.get(p, 2)
            for _ in range(self.inputs[p]):
                if b == 2:
                    kinds.append(UNITARY)
                    pos += 1
                else:
                    kinds += [PROJECTION] * b
                    orth += [(pos + j, pos + k) for j in range(b) for k in range(j + 1, b)]
                    pos += b
        if model_class == "classical-bound-check":
            comm = [(a, c) for a in range(n) for c in range(a + 1, n)]
        else:
            comm = [(a, c) for a in range(n) for c in range(a + 1, n) if party[a] != party[c]]
        return QuotientContext(n, tuple(kinds), comm, orth, tuple(party), self.linked(),
                               tracial=(model_class == "tracial"))

    def completeness(self) -> List[Constraint]:
        out = []
        al = self.alphabet()
        for p in self.parties:
            b = self.outputs.get(p, 2)
            if b == 2:
                continue
            for i in range(1, self.inputs[p] + 1):
                f = NCStatePoly.constant(-1, FLOAT)
                for j in range(1, b + 1):
                    f = f + NCStatePoly.var(al.index[f"{p}{i}_{j}"], FLOAT)
                out.append(Constraint(f, "eq"))
        return out


def compile_problem(scenario: NetworkScenario, objective: NCStatePoly, model_class: str = "reduced-quantum",
                    constraints: Sequence[Constraint] = (), zero: Sequence[SWord] = (),
                    sense: str = "max", name: str = "") -> Problem:
    """Objective, constraints and quotient context for a scenario."""
    q = scenario.quotient(model_class)
    al = scenario.alphabet()
    used = set()
    for s, t in objective:
        used.update(t)
        for w in s:
            used.update(w)
    if used and max(used) >= q.n:
        raise ScenarioError("objective uses undeclared variables")
    cons = list(constraints) + scenario.completeness()
    return Problem(objective, q, cons, tuple(zero), sense, al, name or scenario.name)


# ---------------------------------------------------------------------------
# problem files


@dataclass
class ProblemFile:
    problem: Problem
    level: Optional[int]
    model_class: str
    options: List[str]
    scenario: Optional[NetworkScenario]
    macros: Dict[str, NCStatePoly]
    digest: str

    @property
    def complex(self) -> bool:
        return self.model_class == "reduced-quantum-complex"


@dataclass
class _Stmt:
    text: str
    line: int
    col: int


def _statements(text: str) -> List[_Stmt]:
    out: List[_Stmt] = []
    cur, start, depth = "", None, 0
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if depth == 0:
            if not line.strip():
                continue
            col = len(line) - len(line.lstrip()) + 1
            cur, start = line.strip(), (ln, col)
        else:
            cur += " " + line.strip()
        depth += line.count("{") - line.count("}")
        if depth < 0:
            raise ParseError("unbalanced '}'", ln, raw.index("}") + 1)
        if depth == 0:
            out.append(_Stmt(cur, *start))
    if depth:
        raise ParseError("unclosed '{'", *start)
    return out


_SCEN = re.compile(r"scenario\s+([A-Za-z][\w-]*)\s*\{(.*)\}\s*$")


def _parse_scenario(st: _Stmt) -> NetworkScenario:
    m = _SCEN.match(st.text)
    if not m:
        raise ParseError("malformed scenario block", st.line, st.col)
    name, body = m.group(1), m.group(2)
    parties: List[str] = []
    inputs: Dict[str, int] = {}
    outputs: Dict[str, int] = {}
    sources: Dict[str, List[str]] = {}
    default_out = 2
    for part in body.split(";"):
        toks = part.split()
        if not toks:
            continue
        key, args = toks[0], toks[1:]
        if key == "parties":
            parties = args
        elif key == "sources":
            if len(args) < 3 or args[1] != "->":
                raise ParseError("source needs 'name -> parties'", st.line, st.col)
            sources[args[0]] = args[2:]
        elif key in ("inputs", "outputs"):
            target = inputs if key == "inputs" else outputs
            for a in args:
                if ":" in a:
                    p, v = a.split(":", 1)
                    target[p] = int(v)
                elif key == "outputs":
                    default_out = int(a)
                else:
                    raise ParseError("inputs are given as party:count", st.line, st.col)
        elif toks[0] in sources or (len(toks) > 1 and toks[1] == "->"):
            sources[toks[0]] = toks[2:]
        else:
            raise ParseError(f"unknown scenario field {key!r}", st.line, st.col)
    for p in parties:
        outputs.setdefault(p, default_out)
    try:
        return NetworkScenario(name, parties, inputs, outputs, sources)
    except ScenarioError as e:
        raise ParseError(str(e), st.line, st.col)


def parse_problem(text: str) -> ProblemFile:
    """Parse a problem file; errors carry line and column."""
    stmts = _statements(text)
    scenario = None
    names: List[str] = []
    kinds: Dict[str, str] = {}
    commute: List[Tuple[List[str], List[str]]] = []
    macro_src: Dict[str, _Stmt] = {}
    objective_st = None
    level = None
    model_class = "reduced-quantum"
    sense = "max"
    options: List[str] = []
    zero_st: List[_Stmt] = []
    cons_st: List[Tuple[str, _Stmt]] = []
    for st in stmts:
        head = st.text.split(None, 1)
        key = head[0]
        rest = head[1] if len(head) > 1 else ""
        off = st.col + len(st.text) - len(rest)
        sub = _Stmt(rest, st.line, off)
        if key == "scenario":
            scenario = _parse_scenario(st)
        elif key == "variables":
            names += rest.split()
        elif key in ("unitary", "projection", "free"):
            for nm in rest.split():
                kinds[nm] = key
        elif key == "commute":
            if "|" not in rest:
                raise ParseError("commute needs 'a b | c d'", st.line, st.col)
            left, right = rest.split("|", 1)
            commute.append((left.split(), right.split()))
        elif key == "macro":
            m = re.match(r"([A-Za-z]\w*)\s*=\s*(.*)$", rest)
            if not m:
                raise ParseError("macro needs 'name = expression'", st.line, st.col)
            macro_src[m.group(1)] = _Stmt(m.group(2), st.line, off + m.start(2))
        elif key == "objective":
            objective_st = sub
        elif key == "level":
            try:
                level = int(rest)
            except ValueError:
                raise ParseError("level must be an integer", st.line, off)
        elif key == "class":
            if rest.strip() not in MODEL_CLASSES:
                raise ParseError(f"unsupported model class {rest.strip()!r}", st.line, off)
            model_class = rest.strip()
        elif key == "sense":
            if rest.strip() not in ("max", "min"):
                raise ParseError("sense must be max or min", st.line, off)
            sense = rest.strip()
        elif key == "options":
            options += rest.split()
        elif key == "zero":
            zero_st.append(sub)
        elif key in ("ineq", "eq"):
            cons_st.append((key, sub))
        else:
            raise ParseError(f"unknown statement {key!r}", st.line, st.col)
    if objective_st is None:
        raise ParseError("missing objective", stmts[-1].line if stmts else 1, 1)
    if scenario is not None:
        al = scenario.alphabet()
        q = scenario.quotient(model_class if model_class in MODEL_CLASSES else "reduced-quantum")
    else:
        if not names:
            raise ParseError("declare a scenario or variables", 1, 1)
        al = Alphabet(names)
        k = tuple(kinds.get(nm, FREE) for nm in names)
        pairs = []
        for left, right in commute:
            for a in left:
                for b in right:
                    for nm in (a, b):
                        if nm not in al.index:
                            raise ParseError(f"undeclared variable {nm!r}", 1, 1)
                    pairs.append((al.index[a], al.index[b]))
        q = QuotientContext(len(names), k, pairs, tracial=(model_class == "tracial"))
    macros: Dict[str, NCStatePoly] = {}
    busy = set()

    def macro(name: str) -> NCStatePoly:
        if name in macros:
            return macros[name]
        if name in busy:
            st = macro_src[name]
            raise ParseError(f"macro {name!r} refers to itself", st.line, st.col)
        busy.add(name)
        st = macro_src[name]
        deps = {t for t in re.findall(r"[A-Za-z]\w*", st.text) if t in macro_src}
        env = {d: macro(d) for d in deps}
        macros[name] = ExprParser(al, env, EXACT).parse(st.text, st.line, st.col)
        return macros[name]

    for nm in macro_src:
        macro(nm)
    parser = ExprParser(al, macros, EXACT)
    obj = parser.parse(objective_st.text, objective_st.line, objective_st.col)
    if not obj.is_state():
        raise ParseError("objective must be a state polynomial", objective_st.line, objective_st.col)
    zero: List[SWord] = []
    for st in zero_st:
        pos = 0
        for piece in _split_top(st.text):
            if piece.strip():
                z = parser.parse(piece, st.line, st.col + pos)
                if len(z) != 1 or not z.is_state():
                    raise ParseError("zero entries must be single moments", st.line, st.col + pos)
                zero.append(next(iter(z))[0])
            pos += len(piece) + 1
    cons = [Constraint(parser.parse(st.text, st.line, st.col), kind) for kind, st in cons_st]
    digest = hashlib.sha256("\n".join(s.text for s in stmts).encode()).hexdigest()[:16]
    if scenario is not None:
        problem = compile_problem(scenario, obj, model_class if model_class != "reduced-quantum-complex"
                                  else "reduced-quantum", cons, zero, sense)
    else:
        problem = Problem(obj, q, cons, tuple(zero), sense, al)
    return ProblemFile(problem, level, model_class, options, scenario, macros, digest)


def _split_top(text: str) -> List[str]:
    """Split on commas outside parentheses."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def load_problem(path) -> ProblemFile:
    with open(path) as fh:
        return parse_problem(fh.read())


# ---------------------------------------------------------------------------
# builtin instances


def _zero_list_tavakoli() -> str:
    items = [f"s({p}{i})" for p in "ABC" for i in (1, 2, 3)]
    for p, r in (("A", "B"), ("B", "C"), ("A", "C")):
        items += [f"s({p}{i}*{r}{j})" for i in (1, 2, 3) for j in (1, 2, 3) if i != j]
    items += [f"s(A{i}*B{j}*C{k})" for i in (1, 2, 3) for j in (1, 2, 3) for k in (1, 2, 3)
              if len({i, j, k}) <= 2]
    lines = []
    for k in range(0, len(items), 9):
        lines.append("zero " + ", ".join(items[k:k + 9]))
    return "\n".join(lines)


_BIPARTITE2 = "scenario {name} {{ parties x y; sources s -> x y; outputs 2; inputs x:{a} y:{a} }}"
_BILOCAL = "scenario {name} {{ parties {p}; sources s1 -> {l}; s2 -> {r}; outputs 2; inputs {inp} }}"

BUILTIN_TEXT: Dict[str, str] = {
    "chsh": "\n".join([
        _BIPARTITE2.format(name="chsh", a=2),
        "objective s(x1*y1) + s(x1*y2) + s(x2*y1) - s(x2*y2)",
        "level 1",
    ]),
    "uffink": "\n".join([
        _BIPARTITE2.format(name="uffink", a=2),
        "objective (s(x1*y2) + s(x2*y1))^2 + (s(x1*y1) - s(x2*y2))^2",
        "level 3",
    ]),
    "covariance": "\n".join([
        _BIPARTITE2.format(name="covariance", a=3),
        "macro cov11 = s(x1*y1) - s(x1)*s(y1)",
        "macro cov12 = s(x1*y2) - s(x1)*s(y2)",
        "macro cov13 = s(x1*y3) - s(x1)*s(y3)",
        "macro cov21 = s(x2*y1) - s(x2)*s(y1)",
        "macro cov22 = s(x2*y2) - s(x2)*s(y2)",
        "macro cov23 = s(x2*y3) - s(x2)*s(y3)",
        "macro cov31 = s(x3*y1) - s(x3)*s(y1)",
        "macro cov32 = s(x3*y2) - s(x3)*s(y2)",
        "objective cov11 + cov12 + cov13 + cov21 + cov22 - cov23 + cov31 - cov32",
        "level 2",
    ]),
    "exa3": "\n".join([
        _BIPARTITE2.format(name="exa3", a=2),
        "objective s(x2) + s(y1) + s(y2) - s(x1*y1) + s(x2*y1) + s(x1*y2) + s(x2*y2)"
        " - s(x1)*s(y1) - s(x2)*s(y1) - s(x2)*s(y2) - s(x1)^2 - s(y2)^2",
        "level 2",
    ]),
    "exa3-tracial": "\n".join([
        _BIPARTITE2.format(name="exa3", a=2),
        "objective s(x2) + s(y1) + s(y2) - s(x1*y1) + s(x2*y1) + s(x1*y2) + s(x2*y2)"
        " - s(x1)*s(y1) - s(x2)*s(y1) - s(x2)*s(y2) - s(x1)^2 - s(y2)^2",
        "level 2",
        "class tracial",
    ]),
    "bilocal-chaves": "\n".join([
        _BILOCAL.format(name="chaves", p="x y z", l="x y", r="y z", inp="x:2 y:2 z:2"),
        "macro j1 = s(x1*y1*z1) + s(x1*y1*z2) + s(x2*y1*z1) + s(x2*y1*z2)",
        "macro j2 = s(x1*y2*z1) - s(x1*y2*z2) - s(x2*y2*z1) + s(x2*y2*z2)",
        "objective -(1/8)*(j1 - j2)^2 + (j1 + j2)",
        "level 3",
        "options ss",
    ]),
    "bilocal-i3322": "\n".join([
        _BILOCAL.format(name="i3322", p="A B C", l="A B", r="B C", inp="A:3 B:3 C:2"),
        "macro J1 = (1/2)*s((A1 + A2 + A3 + 1)*B1*(C1 + C2))",
        "macro J2 = (1/2)*s((A1 + A2 - A3 + 1)*B2*(C1 - C2)) + (1/2)*s((A1 - A2)*B3*(C1 - C2))",
        "macro L = 4 + s(A1) + s(A2)",
        "objective 2*(J1*J2 + J1*L + J2*L) - J1^2 - J2^2 - L^2",
        "level 3",
        "options ss",
    ]),
    "z0": "\n".join([
        _BILOCAL.format(name="z0", p="A B C", l="A B", r="B C", inp="A:3 B:3 C:3"),
        "macro S = s(B1*C1) + s(B2*C2) + s(B3*C3) - s(A1*B1) - s(A2*B2) - s(A3*B3)",
        "macro T = s(A1*B2*C3) + s(A1*B3*C2) + s(A2*B1*C3) + s(A2*B3*C1) + s(A3*B1*C2) + s(A3*B2*C1)",
        "objective (1/3)*S - T",
        _zero_list_tavakoli(),
        "level 3",
        "options ss",
    ]),
}
BUILTIN_TEXT["z0-complex"] = BUILTIN_TEXT["z0"] + "\nclass reduced-quantum-complex"


@dataclass
class BuiltinExample:
    name: str
    text: str
    level: int
    reference: float
    tolerance: float
    options: List[str] = field(default_factory=list)
    note: str = ""

    def load(self) -> ProblemFile:
        return parse_problem(self.text)


_META = {
    "chsh": (1, 2 * np.sqrt(2), 1e-5, "Tsirelson bound"),
    "uffink": (3, 4.0, 1e-4, "quadratic Bell inequality, classical value 4"),
    "covariance": (2, 5.0, 1e-4, "covariance Bell inequality"),
    "exa3": (2, 3.51148, 5e-4, "attained by a two-qubit model"),
    "exa3-tracial": (2, 3.375, 5e-4, "tracial states; attained classically"),
    "bilocal-chaves": (3, 4.0, 1e-3, "bilocal nonlinear inequality"),
    "bilocal-i3322": (3, 15.6705, 5e-3, "bilocal I3322 analog"),
    "z0": (3, 4.46613, 1e-3, "zero-marginal bilocal inequality, real"),
    "z0-complex": (3, 4.46665, 1e-3, "zero-marginal bilocal inequality, complex"),
}


def builtin_examples() -> Dict[str, BuiltinExample]:
    out = {}
    for name, text in BUILTIN_TEXT.items():
        lvl, ref, tol, note = _META[name]
        pf = parse_problem(text)
        out[name] = BuiltinExample(name, text, lvl, float(ref), tol, pf.options, note)
    return out


def builtin(name: str) -> BuiltinExample:
    ex = builtin_examples()
    if name not in ex:
        raise KeyError(f"unknown example {name!r}; available: {', '.join(ex)}")
    return ex[name]


# ---------------------------------------------------------------------------
# models


@dataclass
class ModelCheck:
    feasible: bool
    objective: float
    violations: List[Tuple[str, float]]
    tol: float

    @property
    def worst(self) -> float:
        return max((v for _, v in self.violations), default=0.0)


def _comm_norm(a, b):
    return float(np.max(np.abs(a @ b - b @ a))) if a.size else 0.0


def verify_model(problem: Problem, operators: Sequence[np.ndarray], state: np.ndarray,
                 tol: float = 1e-8, factor_degree: int = 2) -> ModelCheck:
    """Check the structural relations and constraints of a model; evaluate the objective.

    Factorization is checked as ``lambda(u w) = lambda(u) lambda(w)`` for
    normal words ``u``, ``w`` of length at most ``factor_degree`` on
    disconnected groups of parties.
    """
    q = problem.q
    e = Evaluation(list(operators), state, tol=max(tol, 1e-9))
    ops = e.operators
    if len(ops) != q.n:
        raise ValueError(f"model has {len(ops)} operators, problem has {q.n} variables")
    exact = e.exact
    viol: List[Tuple[str, float]] = []
    names = problem.alphabet.names if problem.alphabet else [f"x{i + 1}" for i in range(q.n)]

    def mag(z) -> float:
        if exact:
            return float(max((abs(v) for v in np.asarray(z).ravel()), default=0))
        return float(np.max(np.abs(z))) if np.size(z) else 0.0

    eye = e.identity()
    for i, x in enumerate(ops):
        viol.append((f"{names[i]} self-adjoint", mag(x - x.conj().T) if not exact else mag(x - x.T)))
        if q.kinds[i] == UNITARY:
            viol.append((f"{names[i]}^2 = 1", mag(x.dot(x) - eye)))
        elif q.kinds[i] == PROJECTION:
            viol.append((f"{names[i]}^2 = {names[i]}", mag(x.dot(x) - x)))
    for a, b in sorted(q.commuting):
        viol.append((f"[{names[a]},{names[b]}] = 0", mag(ops[a].dot(ops[b]) - ops[b].dot(ops[a]))))
    for a, b in sorted(q.orthogonal):
        viol.append((f"{names[a]}{names[b]} = 0", mag(ops[a].dot(ops[b]))))
    if q.party is not None:
        words = [w for layer in normal_words(q, factor_degree)[1:] for w in layer]
        comps: Dict[frozenset, List] = {}
        for w in words:
            cs = q.components(w)
            if len(cs) == 1:
                comps.setdefault(frozenset(q.party[a] for a in w), []).append(w)
        seen = set()
        for u in words:
            for v in words:
                w = q.normalize(u + v)
                if w is None or w in seen or len(q.components(w)) < 2 or len(w) > 2 * factor_degree:
                    continue
                seen.add(w)
                parts = q.components(w)
                lhs = e.expect(e.word(w))
                rhs = Fraction(1) if exact else 1.0
                for c in parts:
                    rhs = rhs * e.expect(e.word(c))
                viol.append((f"factorization {''.join(names[a] for a in w)}", abs(float(lhs - rhs))))
    for k, c in enumerate(problem.constraints):
        val = evaluate(c.poly if exact or c.poly.mode == FLOAT else c.poly.to_float(), e)
        if c.poly.is_state():
            v = float(val)
            bad = abs(v) if c.kind == "eq" else max(0.0, -v)
        else:
            h = np.asarray(val, dtype=complex)
            bad = float(np.max(np.abs(h))) if c.kind == "eq" else max(0.0, -float(np.linalg.eigvalsh((h + h.conj().T) / 2).min()))
        viol.append((f"constraint {k + 1}", bad))
    for z in problem.zero:
        val = 1.0
        for w in z:
            val = val * e.expect(e.word(w))
        viol.append((f"zero moment {'*'.join(''.join(names[a] for a in w) for w in z)}", abs(float(val))))
    obj = evaluate(problem.objective if not exact else _exactify(problem.objective), e)
    feasible = all(v <= tol for _, v in viol)
    return ModelCheck(feasible, obj if exact else float(obj), [(n, v) for n, v in viol if v > 0], tol)


def _exactify(f: NCStatePoly) -> NCStatePoly:
    return f.map_words(lambda m: (m, 1)).to_exact() if f.mode == FLOAT else f


def deterministic_max(problem: Problem) -> Tuple[float, Tuple[int, ...]]:
    """Best value of the objective over deterministic +-1 assignments."""
    q = problem.q
    if not q.is_group:
        raise ValueError("deterministic enumeration needs binary observables")
    best = (-np.inf, ())
    sign = 1 if problem.sense == "max" else -1
    for vals in itertools.product((1, -1), repeat=q.n):
        tot = 0.0
        for (s, _), c in problem.objective.items():
            v = float(c)
            for w in s:
                for a in w:
                    v *= vals[a]
            tot += v
        if sign * tot > sign * best[0] or best[1] == ():
            best = (tot, vals)
    return best


# -- tensor-product models ---------------------------------------------------


def embed_operator(op: np.ndarray, positions: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Act with ``op`` on the subsystems ``positions`` of a tensor product."""
    k = len(dims)
    rest = [i for i in range(k) if i not in positions]
    order = list(positions) + rest
    drest = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(op, np.eye(drest))
    dord = [dims[i] for i in order]
    T = full.reshape(dord + dord)
    inv = list(np.argsort(order))
    T = T.transpose(inv + [k + i for i in inv])
    D = int(np.prod(dims))
    return T.reshape(D, D)


def spatial_model(scenario: NetworkScenario, local: Mapping[str, Sequence[np.ndarray]],
                  states: Mapping[str, np.ndarray], local_dim: int = 2):
    """Operators and state of a tensor-product network model.

    Each source ``s`` distributes ``states[s]`` over one ``local_dim``
    factor per party it reaches; party operators act on their factors in
    source order.
    """
    slots = [(s, p) for s in scenario.sources for p in scenario.sources[s]]
    dims = [local_dim] * len(slots)
    psi = np.ones(1)
    for s in scenario.sources:
        psi = np.kron(psi, np.asarray(states[s]))
    ops = []
    for p in scenario.parties:
        pos = [k for k, (s, pp) in enumerate(slots) if pp == p]
        for x in local[p]:
            ops.append(embed_operator(np.asarray(x), pos, dims))
    return ops, psi


def reference_model(name: str):
    """Explicit models used for verification: ``(operators, state)``."""
    Z = np.array([[1.0, 0.0], [0.0, -1.0]])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    Y = np.array([[0.0, -1j], [1j, 0.0]])
    I2 = np.eye(2)
    if name == "chsh":
        c = 1 / np.sqrt(2)
        ops = [np.kron(Z, I2), np.kron(X, I2), np.kron(I2, c * (Z + X)), np.kron(I2, c * (Z - X))]
        return ops, np.array([1, 0, 0, 1]) / np.sqrt(2)
    if name == "exa3":
        a, b = -4.525, 2.192
        R = np.array([[np.cos(a), np.sin(a)], [np.sin(a), -np.cos(a)]])
        psi = np.array([-np.cos(b) * np.sin(b / 3), np.cos(b) * np.cos(b / 3),
                        -np.sin(b) * np.cos((2 * b - a) / 3), np.sin(b) * np.sin((2 * b - a) / 3)])
        ops = [np.kron(Z, I2), np.kron(R, I2), np.kron(I2, Z), -np.kron(I2, R)]
        return ops, psi
    if name == "exa3-classical":
        F = Fraction

        def diag(*v):
            m = np.empty((3, 3), dtype=object)
            m.fill(F(0))
            for i, x in enumerate(v):
                m[i, i] = F(x)
            return m

        rho = diag(F(1, 4), F(3, 8), F(3, 8))
        A1, A2 = diag(1, -1, -1), diag(1, 1, -1)
        return [A1, A2, diag(1, 1, 1), A2.copy()], rho
    if name == "bilocal-chaves":
        sc = builtin("bilocal-chaves").load().scenario
        H = np.array([[1.0, 1.0], [1.0, -1.0]])
        K = np.array([[1.0, -1.0], [-1.0, -1.0]])
        psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        local = {"x": [Z, X], "y": [0.5 * np.kron(H, H), 0.5 * np.kron(K, K)], "z": [Z, X]}
        return spatial_model(sc, local, {"s1": psi, "s2": psi})
    if name == "bilocal-i3322":
        sc = builtin("bilocal-i3322").load().scenario
        al, be = 1.947, 1.639
        A1, A2, A3 = Z, X, Y
        r = 1 / np.sqrt(2)
        B1 = np.kron(np.sin(al) * A2 + np.cos(al) * A3, r * (A1 + A2))
        B2 = np.kron(np.sin(al) * A2 - np.cos(al) * A3, r * (A1 - A2))
        B3 = -np.kron(A1, r * (A1 - A2))
        psi1 = np.sin(be) / 2 * np.array([np.sqrt(2), -1, 0, -1]) + np.cos(be) / 2 * np.array([0, -1, np.sqrt(2), 1])
        psi2 = np.array([0, 1, -1, 0]) / np.sqrt(2)
        local = {"A": [A1, A2, A3], "B": [B1, B2, B3], "C": [A1, A2]}
        return spatial_model(sc, local, {"s1": psi1, "s2": psi2})
    raise KeyError(f"no reference model named {name!r}")
