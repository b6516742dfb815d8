"""Solve builtin examples and print bound, reference, status and wall time."""
import argparse
import time

from statepop.moment import solve_relaxation
from statepop.relax import RelaxOptions, build_relaxation
from statepop.scenarios import builtin, builtin_examples

FAST = ["chsh", "covariance", "exa3", "exa3-tracial", "uffink"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", help=f"examples to run (default: {' '.join(FAST)})")
    args = ap.parse_args()
    names = args.names or FAST
    known = builtin_examples()
    for n in names:
        if n not in known:
            ap.error(f"unknown example {n!r}; choose from {', '.join(known)}")
    for n in names:
        ex = builtin(n)
        pf = ex.load()
        opts = RelaxOptions(ex.level, ss="ss" in pf.options, subgroup="subgroup" in pf.options,
                            complex=pf.complex)
        t0 = time.perf_counter()
        res = solve_relaxation(build_relaxation(pf.problem, opts))
        secs = time.perf_counter() - t0
        print(f"{n:16s} bound {res.bound:.6f} ref {ex.reference:.6f} tol {ex.tolerance:.0e} "
              f"{res.status:13s} {secs:8.1f}s")


if __name__ == "__main__":
    main()
