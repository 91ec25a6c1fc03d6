"""Population of well 3 for the self-trapping start, in both well orderings
and with the sign of the third amplitude flipped.

    python3 scripts/self_trapping.py [--t-end 500]
"""
import argparse

import numpy as np

from triplewell.fock import ModelParams
from triplewell.meanfield import AmplitudeState, detect_locking, evolve

START = np.sqrt([2.5, 5.5, 23.5])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=500.0)
    args = ap.parse_args()
    base = ModelParams()
    cases = [("default", base, START, 2), ("mirrored", base.mirrored(), START[::-1], 0)]
    cases += [(name + ", c3 -> -c3", p, c * np.where(np.arange(3) == k, -1, 1), k)
              for name, p, c, k in list(cases)]
    for name, params, c0, k in cases:
        tr = evolve(AmplitudeState(tuple(c0)), params, args.t_end)
        n = tr.actions[:, k]
        rep = detect_locking(tr)
        inside = np.all(np.abs(n - 23.5) <= 2.35)
        print(f"{name:>24}: trapped population in [{n.min():.2f}, {n.max():.2f}]"
              f"  within 10%: {inside}  label {rep.label}  locked {rep.locked}")


if __name__ == "__main__":
    main()
