"""One entry point for building a relaxation with optional reductions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .moment import (
    Basis, MomentRelaxation, Problem, assemble, assemble_specs, build_basis, check_level, dense_specs,
    equality_pairs,
)
from .quotient import subgroup_level, support_subgroup_filter


@dataclass
class RelaxOptions:
    """Reductions applied on top of the dense relaxation.

    ``cs`` splits variables into cliques, ``ss`` block-diagonalizes by
    sign symmetry, ``subgroup`` restricts the basis to the subgroup
    generated by the objective's support, ``complex`` switches to the
    hermitian relaxation.
    """

    level: int
    cs: bool = False
    ss: bool = False
    subgroup: bool = False
    complex: bool = False

    def reductions(self) -> list:
        return [k for k in ("cs", "ss", "subgroup", "complex") if getattr(self, k)]


def build_relaxation(problem: Problem, opts: RelaxOptions) -> MomentRelaxation:
    d = opts.level
    check_level(problem, d)
    if opts.complex:
        if opts.cs or opts.subgroup:
            raise ValueError("the complex relaxation supports sign symmetry only")
        from .complexmod import assemble_complex
        rel = assemble_complex(problem, d, sign_symmetry=opts.ss)
        rel.info["basis_level"] = d
        return rel
    zf = problem.zero_filter()
    level = d
    filt = None
    if opts.subgroup:
        if problem.constraints:
            raise ValueError("subgroup reduction applies to unconstrained problems")
        level = subgroup_level(problem.objective, problem.q, d)

        def filt(words):
            return support_subgroup_filter(problem.objective, problem.q, words)

    if opts.cs:
        from .sparsity import assemble_cs
        rel = assemble_cs(problem, level, basis_filter=filt, sign_symmetry=opts.ss)
    else:
        basis = build_basis(problem.q, level, zero=zf)
        if filt is not None:
            basis = Basis(filt(basis.words), level)
        if opts.ss:
            from .sparsity import same_class_fn, split_specs
            specs = split_specs(problem, dense_specs(problem, level, basis))
            eq = equality_pairs(problem, level, basis, same_class_fn(problem))
            rel = assemble_specs(problem, level, specs, eq, basis)
        elif filt is None and level == d:
            rel = assemble(problem, d, basis)
        else:
            rel = assemble_specs(problem, level, dense_specs(problem, level, basis),
                                 equality_pairs(problem, level, basis), basis)
    rel.info["basis_level"] = level
    return rel
