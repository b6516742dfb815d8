"""Command line interface.

Verbs: ``solve``, ``export``, ``certify``, ``verify-model``, ``examples``.
Reports are ``key: value`` lines in a fixed order and contain no timings,
so identical inputs give identical bytes; timings go to standard error.

Exit codes: 0 solved (optimal or near-optimal), 1 other error, 2 solver
did not converge, 3 parse error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional

from .algebra import ParseError
from .moment import LevelError, SizeError, solve_relaxation, to_sdp
from .relax import RelaxOptions, build_relaxation
from .solver import SDPAFormatError, SolverOptions, export_sdpa, fmt_float, import_sdpa, solve

EXIT_OK, EXIT_ERROR, EXIT_SOLVER, EXIT_PARSE = 0, 1, 2, 3
SUCCESS = ("optimal", "near-optimal")


class Report:
    """Ordered key/value report."""

    def __init__(self):
        self.items: List[tuple] = []

    def add(self, key, value):
        self.items.append((key, value))

    def text(self) -> str:
        out = []
        for k, v in self.items:
            if isinstance(v, float):
                v = f"{v:.8f}"
            elif isinstance(v, (list, tuple)):
                v = " ".join(str(x) for x in v) if v else "-"
            out.append(f"{k}: {v}")
        return "\n".join(out) + "\n"

    def json(self) -> str:
        return json.dumps(dict(self.items), indent=1, default=str) + "\n"


def _load(path):
    from .scenarios import builtin, load_problem
    if path.startswith("builtin:"):
        ex = builtin(path.split(":", 1)[1])
        return ex.load(), ex
    return load_problem(path), None


def _relax_options(args, pf) -> RelaxOptions:
    level = args.level if args.level is not None else pf.level
    if level is None:
        raise LevelError("no level given in the file or on the command line")
    opt = set(pf.options)
    return RelaxOptions(level,
                        cs=args.cs or "cs" in opt,
                        ss=args.ss or "ss" in opt,
                        subgroup=args.subgroup or "subgroup" in opt,
                        complex=args.complex or pf.complex)


def _solver_options(args) -> SolverOptions:
    return SolverOptions(gap_tol=args.gap_tol, feas_tol=args.feas_tol, max_iter=args.max_iter)


def _shape(rep: Report, rel, inst) -> None:
    rep.add("blocks", rel.block_sizes)
    if "hermitian_sizes" in rel.info:
        rep.add("hermitian_blocks", rel.info["hermitian_sizes"])
    rep.add("moment_labels", rel.n_labels)
    rep.add("equalities", len(rel.equalities))
    rep.add("sdp_constraints", inst.m)


def _timing(name, t0):
    print(f"time {name}: {time.perf_counter() - t0:.3f}s", file=sys.stderr)


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    pf, _ = _load(args.file)
    ro = _relax_options(args, pf)
    rel = build_relaxation(pf.problem, ro)
    _timing("assemble", t0)
    rep = Report()
    rep.add("problem", pf.problem.name or args.file)
    rep.add("digest", pf.digest)
    rep.add("class", pf.model_class)
    rep.add("sense", pf.problem.sense)
    rep.add("level", ro.level)
    rep.add("basis_level", rel.info.get("basis_level", ro.level))
    rep.add("reductions", ro.reductions())
    inst, amap, const = to_sdp(rel)
    _shape(rep, rel, inst)
    if args.export_sdpa:
        export_sdpa(inst, args.export_sdpa)
        rep.add("sdpa_file", args.export_sdpa)
    t1 = time.perf_counter()
    res = solve_relaxation(rel, _solver_options(args))
    _timing("solve", t1)
    sol = res.solution
    rep.add("status", sol.status)
    rep.add("iterations", sol.iterations)
    rep.add("bound", float(res.bound))
    rep.add("gap", f"{sol.gap:.2e}")
    rep.add("primal_infeasibility", f"{sol.primal_infeasibility:.2e}")
    rep.add("dual_infeasibility", f"{sol.dual_infeasibility:.2e}")
    if args.extract:
        _extract(rep, res, args)
    _emit(rep, args)
    return EXIT_OK if sol.status in SUCCESS else EXIT_SOLVER


def _extract(rep: Report, res, args) -> None:
    from .extract import ExtractionError, certify_finite_convergence, check_flatness, gns_extract, write_model
    if len(res.relaxation.hankel_blocks()) != 1:
        rep.add("flat", "n/a (several Hankel blocks)")
        return
    fl = check_flatness(res, tol=args.rank_tol)
    rep.add("rank_low", fl.rank_low)
    rep.add("rank_full", fl.rank_full)
    rep.add("flat", "yes" if fl.flat else "no")
    if not fl.flat:
        rep.add("certified", "no (cannot certify without flatness)")
        return
    try:
        model = gns_extract(res, fl)
    except ExtractionError as e:
        rep.add("extraction", str(e))
        return
    ok, gap = certify_finite_convergence(model, res)
    rep.add("model_dimension", model.dimension)
    rep.add("model_objective", float(model.objective))
    rep.add("scalar_residual", f"{model.scalar_residual:.2e}")
    rep.add("moment_residual", f"{model.moment_residual:.2e}")
    rep.add("certified", "yes" if ok else "no")
    if args.model_out:
        write_model(args.model_out, model.operators, model.vector)
        rep.add("model_file", args.model_out)


def _emit(rep: Report, args) -> None:
    text = rep.json() if getattr(args, "json", False) else rep.text()
    if getattr(args, "report", None):
        with open(args.report, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def cmd_export(args) -> int:
    pf, _ = _load(args.file)
    ro = _relax_options(args, pf)
    rel = build_relaxation(pf.problem, ro)
    inst, _, const = to_sdp(rel)
    export_sdpa(inst, args.output)
    rep = Report()
    rep.add("problem", pf.problem.name or args.file)
    rep.add("level", ro.level)
    rep.add("reductions", ro.reductions())
    _shape(rep, rel, inst)
    # the SDPA primal optimum p gives the bound as constant - p (negated for max)
    rep.add("objective_constant", fmt_float(const))
    rep.add("bound_from_primal", "constant - p" if rel.sense == "min" else "p - constant")
    rep.add("sdpa_file", args.output)
    _emit(rep, args)
    return EXIT_OK


def cmd_sdpa(args) -> int:
    inst = import_sdpa(args.file)
    sol = solve(inst, _solver_options(args))
    rep = Report()
    rep.add("blocks", inst.block_sizes)
    rep.add("constraints", inst.m)
    rep.add("status", sol.status)
    rep.add("primal_objective", float(sol.primal_objective))
    rep.add("dual_objective", float(sol.dual_objective))
    _emit(rep, args)
    return EXIT_OK if sol.status in SUCCESS else EXIT_SOLVER


def cmd_certify(args) -> int:
    from .certify import load_certificate, verify_quotient_certificate
    cert = load_certificate(args.file)
    ok = verify_quotient_certificate(cert)
    print("EXACT: verified" if ok else "EXACT: rejected")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_verify_model(args) -> int:
    from .extract import read_model
    from .scenarios import verify_model
    pf, _ = _load(args.problem)
    ops, state = read_model(args.model)
    chk = verify_model(pf.problem, ops, state, tol=args.tol)
    rep = Report()
    rep.add("problem", pf.problem.name or args.problem)
    rep.add("feasible", "yes" if chk.feasible else "no")
    rep.add("objective", float(chk.objective))
    rep.add("worst_violation", f"{chk.worst:.2e}")
    for name, v in chk.violations:
        if v > args.tol:
            rep.add("violation", f"{name} {v:.2e}")
    _emit(rep, args)
    return EXIT_OK if chk.feasible else EXIT_ERROR


def cmd_examples(args) -> int:
    from .scenarios import builtin_examples
    ex = builtin_examples()
    if args.action == "list":
        for name, e in ex.items():
            print(f"{name:16s} level {e.level}  reference {e.reference:.6g}  {e.note}")
        return EXIT_OK
    names = list(ex) if args.name in (None, "all") else [args.name]
    if any(n not in ex for n in names):
        print(f"unknown example {args.name!r}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{'name':16s} {'level':>5s} {'bound':>12s} {'reference':>12s} {'delta':>10s} status")
    code = EXIT_OK
    for n in names:
        e = ex[n]
        pf = e.load()
        ro = RelaxOptions(e.level, ss="ss" in pf.options, cs="cs" in pf.options,
                          subgroup="subgroup" in pf.options, complex=pf.complex)
        t0 = time.perf_counter()
        res = solve_relaxation(build_relaxation(pf.problem, ro), _solver_options(args))
        _timing(n, t0)
        print(f"{n:16s} {e.level:5d} {res.bound:12.6f} {e.reference:12.6f} {res.bound - e.reference:10.2e} {res.status}")
        if res.status not in SUCCESS:
            code = EXIT_SOLVER
    return code


def _common(p, level=True):
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--feas-tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--report", help="also write the report to this file")
    p.add_argument("--json", action="store_true", help="structured report")


def _reductions(p):
    p.add_argument("--level", type=int)
    p.add_argument("--cs", action="store_true", help="correlative sparsity")
    p.add_argument("--ss", action="store_true", help="sign symmetry")
    p.add_argument("--subgroup", action="store_true", help="restrict to the support subgroup")
    p.add_argument("--complex", action="store_true", help="complex (hermitian) relaxation")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="statepop", description="State polynomial optimization")
    sub = ap.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("solve", help="solve a problem file (or builtin:NAME)")
    p.add_argument("file")
    _reductions(p)
    p.add_argument("--export-sdpa", metavar="PATH")
    p.add_argument("--extract", action="store_true", help="flatness check and GNS extraction")
    p.add_argument("--rank-tol", type=float, default=1e-6)
    p.add_argument("--model-out", metavar="PATH", help="write the extracted model")
    _common(p)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("export", help="write the SDP in SDPA sparse format")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    _reductions(p)
    _common(p)
    p.set_defaults(func=cmd_export)
    p = sub.add_parser("sdpa", help="solve an SDPA sparse file")
    p.add_argument("file")
    _common(p)
    p.set_defaults(func=cmd_sdpa)
    p = sub.add_parser("certify", help="verify a certificate file exactly")
    p.add_argument("file")
    p.set_defaults(func=cmd_certify)
    p = sub.add_parser("verify-model", help="check a model file against a problem")
    p.add_argument("problem")
    p.add_argument("model")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--report")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify_model)
    p = sub.add_parser("examples", help="list or run the builtin examples")
    p.add_argument("action", choices=["list", "run"])
    p.add_argument("name", nargs="?")
    _common(p)
    p.set_defaults(func=cmd_examples)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, SDPAFormatError) as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (LevelError, SizeError, ValueError, KeyError, OSError, NotImplementedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
