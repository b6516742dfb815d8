"""Correlative sparsity (variable cliques) and sign symmetry (parity blocks)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .algebra import NCSWord, NCStatePoly
from .moment import (
    Basis, BlockSpec, MomentRelaxation, Problem, assemble_specs, build_basis, check_level, equality_pairs,
)
from .quotient import FREE, UNITARY, UnsupportedError


class DecompositionError(ValueError):
    """A clique decomposition violates the splitting or intersection conditions."""


# ---------------------------------------------------------------------------
# correlative sparsity


def term_variables(f: NCStatePoly) -> List[frozenset]:
    out = []
    for s, t in f:
        vs = set(t)
        for w in s:
            vs.update(w)
        out.append(frozenset(vs))
    return out


def poly_variables(f: NCStatePoly) -> frozenset:
    vs = set()
    for t in term_variables(f):
        vs |= t
    return frozenset(vs)


@dataclass
class CliqueDecomposition:
    cliques: List[frozenset]
    assignment: List[int] = field(default_factory=list)  # constraint -> clique

    def __len__(self):
        return len(self.cliques)


def satisfies_rip(cliques: Sequence[frozenset]) -> bool:
    """Running intersection property in the given order."""
    union = set()
    for k, c in enumerate(cliques):
        if k > 0:
            inter = set(c) & union
            if not any(inter <= set(cliques[i]) for i in range(k)):
                return False
        union |= set(c)
    return True


def verify_decomposition(problem: Problem, dec: CliqueDecomposition) -> None:
    cl = [set(c) for c in dec.cliques]
    for vs in term_variables(problem.objective):
        if not any(vs <= c for c in cl):
            raise DecompositionError(f"objective term on {sorted(vs)} spans several cliques")
    if len(dec.assignment) != len(problem.constraints):
        raise DecompositionError("every constraint needs a clique")
    for c, k in zip(problem.constraints, dec.assignment):
        if not poly_variables(c.poly) <= cl[k]:
            raise DecompositionError("constraint variables outside its clique")
    if not satisfies_rip(dec.cliques):
        raise DecompositionError("running intersection property fails")


def _assign(problem: Problem, cliques: List[frozenset]) -> Optional[List[int]]:
    out = []
    for c in problem.constraints:
        vs = poly_variables(c.poly)
        ks = [k for k, cl in enumerate(cliques) if vs <= cl]
        if not ks:
            return None
        out.append(ks[0])
    return out


def detect_cliques(problem: Problem) -> CliqueDecomposition:
    """Cliques of a minimum-degree chordal extension of the correlation graph.

    Falls back to the single clique of all variables when the result does
    not verify.
    """
    n = problem.q.n
    g = nx.Graph()
    g.add_nodes_from(range(n))
    groups = term_variables(problem.objective) + [poly_variables(c.poly) for c in problem.constraints]
    for vs in groups:
        vs = sorted(vs)
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                g.add_edge(vs[a], vs[b])
    cliques: List[frozenset] = []
    for comp in sorted(nx.connected_components(g), key=min):
        sub = g.subgraph(comp)
        if len(comp) == 1:
            cliques.append(frozenset(comp))
            continue
        _, tree = nx.algorithms.approximation.treewidth_min_degree(sub)
        bags = [b for b in tree.nodes if not any(b < o for o in tree.nodes)]
        tree = tree.subgraph(bags) if len(bags) == len(tree.nodes) else _contract(tree, bags)
        root = min(tree.nodes, key=lambda b: (sorted(b), len(b)))
        order = list(nx.bfs_tree(tree, root)) if len(tree) > 1 else [root]
        cliques.extend(frozenset(b) for b in order)
    full = CliqueDecomposition([frozenset(range(n))], [0] * len(problem.constraints))
    asg = _assign(problem, cliques)
    if asg is None:
        return full
    dec = CliqueDecomposition(cliques, asg)
    try:
        verify_decomposition(problem, dec)
    except DecompositionError:
        return full
    return dec


def _contract(tree: nx.Graph, bags: List[frozenset]) -> nx.Graph:
    """Drop non-maximal bags from a tree decomposition, keeping it a tree."""
    t = nx.Graph(tree)
    changed = True
    while changed:
        changed = False
        for b in list(t.nodes):
            for nb in list(t.neighbors(b)):
                if b < nb:
                    for o in t.neighbors(b):
                        if o != nb:
                            t.add_edge(nb, o)
                    t.remove_node(b)
                    changed = True
                    break
            if changed:
                break
    return t


def cs_specs(problem: Problem, d: int, dec: CliqueDecomposition,
             basis_filter=None) -> List[Tuple[BlockSpec, frozenset]]:
    out = []
    zf = problem.zero_filter()
    for k, clique in enumerate(dec.cliques):
        basis = build_basis(problem.q, d, clique, zf)
        if basis_filter is not None:
            basis = Basis(basis_filter(basis.words), d)
        out.append((BlockSpec("hankel", None, basis.words, f"clique{k}"), basis))
        for ci, c in enumerate(problem.constraints):
            if dec.assignment[ci] == k and c.kind == "ineq":
                out.append((BlockSpec("localizing", ci, basis.upto(d - c.half_degree).words, f"clique{k}"), basis))
    return out


def assemble_cs(problem: Problem, d: int, dec: Optional[CliqueDecomposition] = None,
                basis_filter=None, sign_symmetry: bool = False) -> MomentRelaxation:
    """One Hankel block per clique; labels are shared across cliques."""
    check_level(problem, d)
    dec = dec or detect_cliques(problem)
    verify_decomposition(problem, dec)
    pairs = cs_specs(problem, d, dec, basis_filter)
    same = same_class_fn(problem) if sign_symmetry else None
    eq = []
    for k in range(len(dec)):
        basis = next(b for sp, b in pairs if sp.kind == "hankel" and sp.tag == f"clique{k}")
        eq += [(ci, prs) for ci, prs in equality_pairs(problem, d, basis, same) if dec.assignment[ci] == k]
    specs = [sp for sp, _ in pairs]
    if sign_symmetry:
        specs = split_specs(problem, specs)
    return assemble_specs(problem, d, specs, eq, info={"cliques": [sorted(c) for c in dec.cliques]})


# ---------------------------------------------------------------------------
# sign symmetry


def word_parity(m: NCSWord) -> int:
    """Bitmask of letters occurring an odd number of times in scalars and tail."""
    s, t = m
    p = 0
    for a in t:
        p ^= 1 << a
    for w in s:
        for a in w:
            p ^= 1 << a
    return p


def term_parities(problem: Problem) -> List[int]:
    out = [word_parity(m) for m in problem.objective]
    for c in problem.constraints:
        out += [word_parity(m) for m in problem.q.reduce(c.poly)]
    return out


def gf2_basis(vectors: Iterable[int]) -> List[int]:
    """Reduced row-echelon basis of the span (bitmask rows)."""
    rows: List[int] = []
    for v in vectors:
        for r in rows:
            if v ^ r < v:
                v ^= r
        if v:
            hb = v.bit_length() - 1
            rows = [r ^ v if (r >> hb) & 1 else r for r in rows]
            rows.append(v)
            rows.sort(reverse=True)
    return rows


def orthogonal_complement(rows: List[int], n: int) -> List[int]:
    """Basis of ``{s : popcount(s & r) even for all r}``."""
    pivots = {}
    for r in rows:
        pivots[r.bit_length() - 1] = r
    out = []
    for f in range(n):
        if f in pivots:
            continue
        s = 1 << f
        for pc, r in pivots.items():
            if (r >> f) & 1:
                s |= 1 << pc
        out.append(s)
    return out


@dataclass
class ParityClass:
    key: Tuple[int, ...]
    parity: int
    members: List[int]


def symmetry_group(problem: Problem) -> List[int]:
    kinds = set(problem.q.kinds)
    if not kinds <= {FREE, UNITARY}:
        raise UnsupportedError("sign symmetry needs free or unitary variables")
    R = gf2_basis(term_parities(problem))
    return orthogonal_complement(R, problem.q.n)


def class_key(m: NCSWord, gens: List[int]) -> Tuple[int, ...]:
    p = word_parity(m)
    return tuple(bin(g & p).count("1") & 1 for g in gens)


def sign_symmetry_blocks(problem: Problem, basis: Sequence[NCSWord]) -> List[ParityClass]:
    """Partition ``basis`` into parity classes; the class of the word 1 comes first."""
    gens = symmetry_group(problem)
    classes: Dict[Tuple[int, ...], ParityClass] = {}
    for i, m in enumerate(basis):
        k = class_key(m, gens)
        if k not in classes:
            classes[k] = ParityClass(k, word_parity(m), [])
        classes[k].members.append(i)
    return sorted(classes.values(), key=lambda c: (any(c.key), c.key))


def split_specs(problem: Problem, specs: List[BlockSpec]) -> List[BlockSpec]:
    gens = symmetry_group(problem)
    out = []
    for sp in specs:
        groups: Dict[Tuple[int, ...], List[NCSWord]] = {}
        for m in sp.rows:
            groups.setdefault(class_key(m, gens), []).append(m)
        for k in sorted(groups, key=lambda k: (any(k), k)):
            out.append(BlockSpec(sp.kind, sp.constraint, groups[k], (sp.tag + " " if sp.tag else "") + "class" + "".join(map(str, k))))
    return out


def same_class_fn(problem: Problem):
    gens = symmetry_group(problem)
    return lambda u, v: class_key(u, gens) == class_key(v, gens)
