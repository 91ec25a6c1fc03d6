"""Fixed-N number basis and the symmetrized three-mode Bose-Hubbard Hamiltonian."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the three-well Hamiltonian (hbar = 1).

    The default well ordering puts the negative linear frequency on well 1.
    ``mirrored()`` swaps wells 1 and 3, which leaves the spectrum unchanged
    and transposes every torus picture.
    """

    omega: tuple[float, float, float] = (-0.1, 0.0, 0.1)
    x: tuple[float, float, float] = (0.1, 0.1, 0.1)
    k12: float = 0.5
    k23: float = 0.5
    n_particles: int = 30

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if len(self.omega) != 3 or len(self.x) != 3:
            raise ValueError("omega and x need exactly three entries")
        if int(self.n_particles) != self.n_particles or self.n_particles < 0:
            raise ValueError(f"n_particles must be a non-negative integer, got {self.n_particles}")
        object.__setattr__(self, "n_particles", int(self.n_particles))

    @property
    def k_total(self) -> float:
        """Classical total action K = N + 3/2."""
        return self.n_particles + 1.5

    @property
    def zero_point(self) -> float:
        """H0 evaluated at I = (1/2, 1/2, 1/2)."""
        return float(sum(w * 0.5 + xx * 0.25 for w, xx in zip(self.omega, self.x)))

    def mirrored(self) -> "ModelParams":
        """Relabel wells 1 <-> 3."""
        return ModelParams(self.omega[::-1], self.x[::-1], self.k23, self.k12, self.n_particles)

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega"] = list(d["omega"])
        d["x"] = list(d["x"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {"omega", "x", "k12", "k23", "n_particles"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class FockBasis:
    """All (n1, n2, n3) with n1 + n2 + n3 = N.

    Ordering is lexicographic descending in n1, then in n2, so that
    ``(N, 0, 0)`` comes first and ``(0, 0, N)`` last.
    """

    n_particles: int
    states: tuple[tuple[int, int, int], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, state) -> int:
        n1, n2, n3 = (int(s) for s in state)
        N = self.n_particles
        if min(n1, n2, n3) < 0 or n1 + n2 + n3 != N:
            raise KeyError(state)
        # rows with larger n1 come first; row n1' holds N - n1' + 1 states
        m = N - n1
        return m * (m + 1) // 2 + (N - n1 - n2)

    @property
    def occupations(self) -> np.ndarray:
        """(L, 3) integer array of occupation numbers."""
        return np.array(self.states, dtype=int).reshape(-1, 3)


def enumerate_basis(n_particles: int) -> FockBasis:
    if n_particles < 0:
        raise ValueError("n_particles must be >= 0")
    N = int(n_particles)
    states = tuple(
        (n1, n2, N - n1 - n2) for n1 in range(N, -1, -1) for n2 in range(N - n1, -1, -1)
    )
    return FockBasis(N, states)


def build_hamiltonian(params: ModelParams, basis: FockBasis) -> np.ndarray:
    """Dense Hamiltonian matrix in ``basis`` order.

    The diagonal uses the symmetrized number operators, n + 1/2, with no
    further constant shift.
    """
    if basis.n_particles != params.n_particles:
        raise ValueError(
            f"basis is for N={basis.n_particles}, params have N={params.n_particles}"
        )
    return _assemble(params, basis.states, basis.index_of)


def _assemble(params, states, index_of) -> np.ndarray:
    omega = np.asarray(params.omega)
    x = np.asarray(params.x)
    L = len(states)
    h = np.zeros((L, L))
    for i, (n1, n2, n3) in enumerate(states):
        s = np.array([n1, n2, n3]) + 0.5
        h[i, i] = np.sum(omega * s + x * s**2)
        # a1^dag a2: (n1, n2, n3) -> (n1 + 1, n2 - 1, n3)
        if n2 > 0:
            try:
                j = index_of((n1 + 1, n2 - 1, n3))
            except KeyError:
                j = None
            if j is not None:
                h[i, j] = h[j, i] = -0.5 * params.k12 * np.sqrt((n1 + 1) * n2)
        # a2^dag a3: (n1, n2, n3) -> (n1, n2 + 1, n3 - 1)
        if n3 > 0:
            try:
                j = index_of((n1, n2 + 1, n3 - 1))
            except KeyError:
                j = None
            if j is not None:
                h[i, j] = h[j, i] = -0.5 * params.k23 * np.sqrt((n2 + 1) * n3)
    return h


def build_hamiltonian_multisector(params: ModelParams, n_values) -> tuple[np.ndarray, list]:
    """Hamiltonian on the direct sum of several particle-number sectors.

    Only used to check that no matrix element connects different N.
    """
    states = [s for n in n_values for s in enumerate_basis(n).states]
    lookup = {s: i for i, s in enumerate(states)}

    def index_of(s):
        return lookup[tuple(s)]

    return _assemble(params, states, index_of), states


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues; column k of ``vectors`` is eigenstate k + 1."""

    energies: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.energies)

    def state(self, label: int) -> np.ndarray:
        """Eigenvector for the 1-based label used throughout (Phi_1 = ground)."""
        if not 1 <= label <= len(self):
            raise IndexError(f"state label {label} outside 1..{len(self)}")
        return self.vectors[:, label - 1]

    def energy(self, label: int) -> float:
        return float(self.energies[label - 1])


def diagonalize(h: np.ndarray) -> EigenSystem:
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    asym = np.max(np.abs(h - h.T)) if h.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max deviation {asym:.3e})")
    energies, vectors = np.linalg.eigh(h)
    # sign convention: largest-magnitude coefficient positive
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs
    return EigenSystem(energies, vectors)


def solve(params: ModelParams) -> tuple[FockBasis, EigenSystem]:
    """Basis and eigensystem for ``params`` in one call."""
    basis = enumerate_basis(params.n_particles)
    return basis, diagonalize(build_hamiltonian(params, basis))


def mean_occupations(vec: np.ndarray, basis: FockBasis) -> np.ndarray:
    """<n_k> for a normalized state vector."""
    w = np.asarray(vec) ** 2
    return w @ basis.occupations


def write_spectrum_csv(path, energies) -> None:
    with open(path, "w") as fh:
        fh.write("index,energy\n")
        for i, e in enumerate(energies, start=1):
            fh.write(f"{i},{e:.12f}\n")
