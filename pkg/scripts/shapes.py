"""Print SDP shapes (block sizes, moment labels) for the builtin problems."""
import argparse

from statepop.relax import RelaxOptions, build_relaxation
from statepop.scenarios import builtin

RUNS = [
    ("uffink", RelaxOptions(3)),
    ("uffink", RelaxOptions(3, subgroup=True)),
    ("z0", RelaxOptions(3, ss=True)),
    ("z0", RelaxOptions(4, ss=True)),
    ("z0-complex", RelaxOptions(3, ss=True, complex=True)),
    ("bilocal-chaves", RelaxOptions(3, ss=True)),
    ("bilocal-i3322", RelaxOptions(3, ss=True)),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", help="restrict to one problem name")
    args = ap.parse_args()
    for name, opts in RUNS:
        if args.only and name != args.only:
            continue
        rel = build_relaxation(builtin(name).load().problem, opts)
        herm = rel.info.get("hermitian_sizes")
        extra = f" hermitian {herm}" if herm else ""
        print(f"{name:16s} d={opts.level} {'+'.join(opts.reductions()) or 'dense':12s} "
              f"blocks {rel.block_sizes}{extra} labels {rel.n_labels}")


if __name__ == "__main__":
    main()
