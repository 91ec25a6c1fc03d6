"""Harmonic expansion about the potential minimum and the two normal-mode
orbits continued to a given energy.

    python3 scripts/periodic_orbits.py [--energy 27]
"""
import argparse

import numpy as np

from triplewell.classical import harmonic_expansion, normal_mode_orbits
from triplewell.fock import ModelParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--energy", type=float, default=27.0)
    args = ap.parse_args()
    params = ModelParams()
    hx = harmonic_expansion(params)
    print(f"minimum E={hx.e_min:.4f} at J=({hx.j_min[0]:.4f}, {hx.j_min[1]:.4f})")
    print("small-oscillation periods", np.round(hx.periods, 4), "diagonal mode", hx.diagonal_mode)
    for name, orb in normal_mode_orbits(args.energy, params).items():
        s = orb.start
        print(f"{name:>12}: T={orb.period:.5f}  index={orb.stability_index:+.3f}  "
              f"{'stable' if orb.stable else 'unstable'}  closure={orb.closure:.1e}  "
              f"start psi=({s.psi1:.2f}, {s.psi2:.2f}) J=({s.j1:.4f}, {s.j2:.4f})")


if __name__ == "__main__":
    main()
