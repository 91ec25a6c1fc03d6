"""Classical lock-type grid against the quantum grid over all number states.

    python3 scripts/grid_agreement.py [--t-end 300] [--copies 4] [--out DIR]
"""
import argparse
import collections
from pathlib import Path

from triplewell.fock import ModelParams
from triplewell.meanfield import classify_basis_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=300.0)
    ap.add_argument("--copies", type=int, default=4)
    ap.add_argument("--out", default="runs/grid")
    args = ap.parse_args()
    grid = classify_basis_grid(ModelParams(), t_end=args.t_end, copies=args.copies)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid.to_csv(out / "grid.csv")
    for excl in (("D",), ()):
        frac, n = grid.agreement(exclude=excl)
        print(f"agreement {frac:.3f} on {n} cells (excluding {excl or 'nothing'})")
    pairs = collections.Counter((c.label_classical, c.label_quantum) for c in grid.cells)
    print("classical / quantum pairs:")
    for (cl, qu), k in pairs.most_common():
        print(f"  {cl:>10} {qu:>10} {k:4d}")


if __name__ == "__main__":
    main()
