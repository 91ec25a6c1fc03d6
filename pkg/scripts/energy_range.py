"""Global extrema of the reduced Hamiltonian, with the location of each.

    python3 scripts/energy_range.py
"""
import numpy as np
from scipy.optimize import minimize

from triplewell.classical import ReducedState, energy_range, h_reduced
from triplewell.fock import ModelParams


def locate(params, sign):
    K = params.k_total
    best = None
    for psi in [(a, b) for a in (0.0, np.pi) for b in (0.0, np.pi)]:
        def f(j):
            if min(j[0], j[1], K - j[0] - j[1]) < 0:
                return np.inf
            return sign * h_reduced(ReducedState(*psi, j[0], j[1], K), params, True)
        for j0 in ([K / 3, K / 3], [K - 1, 0.5], [0.5, K - 1], [0.5, 0.5]):
            r = minimize(f, j0, method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-12))
            if best is None or r.fun < best[0]:
                best = (r.fun, psi, r.x)
    return sign * best[0], best[1], best[2]


def main():
    for label, params in (("default", ModelParams()), ("mirrored", ModelParams().mirrored())):
        lo, hi = energy_range(params)
        print(f"{label:>9}: [{lo:.4f}, {hi:.4f}]")
        for sign in (1, -1):
            e, psi, j = locate(params, sign)
            i2 = params.k_total - j.sum()
            print(f"           {'min' if sign > 0 else 'max'} {e:.4f} at psi={psi}, "
                  f"I=({j[0]:.3f}, {i2:.3f}, {j[1]:.3f})")


if __name__ == "__main__":
    main()
