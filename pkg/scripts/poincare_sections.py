"""Poincare sections psi1 = 0 at a few energies, written as CSV.

    python3 scripts/poincare_sections.py [--energies 27 55 80] [--out DIR]
"""
import argparse
from pathlib import Path

import numpy as np

from triplewell.classical import NoRoot, poincare_section, poincare_seed
from triplewell.fock import ModelParams


def admissible_seeds(energy, params, n):
    # scan (psi2, J2) and keep points with a root on the energy shell
    found = []
    for j in np.linspace(0.5, params.k_total - 0.5, 4 * n):
        for p in np.linspace(-np.pi, np.pi, 8, endpoint=False):
            try:
                poincare_seed(p, j, energy, params)
            except NoRoot:
                continue
            found.append((p, j))
    idx = np.linspace(0, len(found) - 1, min(n, len(found))).astype(int)
    return [found[i] for i in idx]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--energies", type=float, nargs="+", default=[27.0, 55.0, 80.0])
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--crossings", type=int, default=200)
    ap.add_argument("--out", default="runs/sections")
    args = ap.parse_args()
    params = ModelParams()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for e in args.energies:
        seeds = admissible_seeds(e, params, args.seeds)
        sec = poincare_section(e, params, seeds, args.crossings)
        sec.to_csv(out / f"section_E{e:g}.csv")
        print(f"E={e:g}: {len(sec.crossings)} crossings from {len(sec.seeds)} seeds, "
              f"{len(sec.failures)} seeds without a root")


if __name__ == "__main__":
    main()
