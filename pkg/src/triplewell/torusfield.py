"""Semiclassical wave functions on the reduced configuration torus.

An eigenvector with coefficients c[n1, n2, n3] becomes the finite Fourier
series

    Phi(psi1, psi2) = sum c[n1, N - n1 - n3, n3] exp(i (n1 psi1 + n3 psi2))

with the cyclic-angle factor exp(i N theta) dropped.  Array convention:
``values[a, b]`` is Phi at (psi1[a], psi2[b]), so axis 0 runs along psi1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .fock import FockBasis

TWO_PI = 2.0 * np.pi
DENSITY_FLOOR = 1e-3
JUMP_LIMIT = 0.9 * np.pi


class LoopThroughNode(ValueError):
    """A winding loop passes through (near-)zero density or an unresolved phase jump."""


@dataclass(frozen=True)
class TorusGrid:
    m1: int = 128
    m2: int = 128
    psi1_start: float = -np.pi / 2
    psi2_start: float = -np.pi / 2

    def __post_init__(self):
        if self.m1 < 2 or self.m2 < 2:
            raise ValueError("grid needs at least 2 points per axis")

    @property
    def psi1(self) -> np.ndarray:
        return self.psi1_start + TWO_PI * np.arange(self.m1) / self.m1

    @property
    def psi2(self) -> np.ndarray:
        return self.psi2_start + TWO_PI * np.arange(self.m2) / self.m2

    @property
    def cell_area(self) -> float:
        return TWO_PI**2 / (self.m1 * self.m2)

    def resolves(self, n_particles: int) -> bool:
        """Grid spacing at most 2 pi / N in both directions."""
        return min(self.m1, self.m2) >= max(n_particles, 1)

    def index_near(self, psi1: float, psi2: float) -> tuple[int, int]:
        a = int(np.round((psi1 - self.psi1_start) / TWO_PI * self.m1)) % self.m1
        b = int(np.round((psi2 - self.psi2_start) / TWO_PI * self.m2)) % self.m2
        return a, b


@dataclass(frozen=True)
class TorusField:
    grid: TorusGrid
    values: np.ndarray
    coefficients: np.ndarray | None = None  # (N+1, N+1) matrix C[n1, n3]

    @cached_property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @cached_property
    def phase(self) -> np.ndarray:
        return np.mod(np.angle(self.values), TWO_PI)

    @property
    def floor(self) -> float:
        return DENSITY_FLOOR * float(self.density.max())

    def norm(self) -> float:
        """Mean of |Phi|^2 over the grid; equals sum |c|^2 when the grid resolves N."""
        return float(self.density.mean())


def density(field: TorusField) -> np.ndarray:
    return field.density


def phase(field: TorusField) -> np.ndarray:
    return field.phase


def coefficient_matrix(eigvec, basis: FockBasis) -> np.ndarray:
    """Arrange basis coefficients as C[n1, n3] (n2 implied)."""
    eigvec = np.asarray(eigvec)
    if eigvec.shape != (len(basis),):
        raise ValueError(f"vector has shape {eigvec.shape}, basis size is {len(basis)}")
    N = basis.n_particles
    occ = basis.occupations
    C = np.zeros((N + 1, N + 1), dtype=np.result_type(eigvec.dtype, float))
    C[occ[:, 0], occ[:, 2]] = eigvec
    return C


def synthesize_coefficients(C: np.ndarray, grid: TorusGrid) -> TorusField:
    n1 = np.arange(C.shape[0])
    n3 = np.arange(C.shape[1])
    e1 = np.exp(1j * np.outer(grid.psi1, n1))
    e2 = np.exp(1j * np.outer(grid.psi2, n3))
    return TorusField(grid, e1 @ C @ e2.T, C)


def synthesize(eigvec, basis: FockBasis, grid: TorusGrid | None = None) -> TorusField:
    grid = grid or TorusGrid()
    return synthesize_coefficients(coefficient_matrix(eigvec, basis), grid)


def evaluate(C: np.ndarray, psi1, psi2) -> np.ndarray:
    """Phi at arbitrary (psi1, psi2) points (broadcast), directly from coefficients."""
    psi1 = np.asarray(psi1, dtype=float)
    psi2 = np.asarray(psi2, dtype=float)
    n1 = np.arange(C.shape[0])
    n3 = np.arange(C.shape[1])
    e1 = np.exp(1j * psi1[..., None] * n1)
    e2 = np.exp(1j * psi2[..., None] * n3)
    return np.einsum("...i,ij,...j->...", e1, C, e2)


# --- loops and winding numbers -------------------------------------------

def row_loop(grid: TorusGrid, b: int) -> np.ndarray:
    """Closed loop at fixed psi2 index ``b``, running once around psi1."""
    return np.stack([np.arange(grid.m1), np.full(grid.m1, b % grid.m2)], axis=1)


def column_loop(grid: TorusGrid, a: int) -> np.ndarray:
    """Closed loop at fixed psi1 index ``a``, running once around psi2."""
    return np.stack([np.full(grid.m2, a % grid.m1), np.arange(grid.m2)], axis=1)


def diagonal_loop(grid: TorusGrid, a0: int = 0, b0: int = 0) -> np.ndarray:
    """Loop along psi1 = psi2 + const through (a0, b0); needs a square grid."""
    if grid.m1 != grid.m2:
        raise ValueError("diagonal loops need m1 == m2")
    s = np.arange(grid.m1)
    return np.stack([(a0 + s) % grid.m1, (b0 + s) % grid.m2], axis=1)


def path_winding(field: TorusField, loop) -> tuple[float, float]:
    """Unwrapped phase advance (in units of 2 pi) around ``loop``.

    Returns ``(advance, min_density_on_loop)``.  Raises LoopThroughNode when a
    step exceeds the jump limit.
    """
    loop = np.asarray(loop, dtype=int)
    vals = field.values[loop[:, 0] % field.grid.m1, loop[:, 1] % field.grid.m2]
    closed = np.append(vals, vals[:1])
    dphi = np.angle(closed[1:] * np.conj(closed[:-1]))
    if np.any(np.abs(dphi) > JUMP_LIMIT):
        raise LoopThroughNode("unresolved phase jump along loop")
    return float(dphi.sum() / TWO_PI), float(np.min(np.abs(vals) ** 2))


def winding_number(field: TorusField, loop, floor: float | None = None) -> tuple[int, float]:
    """Integer phase winding around a closed loop on the torus.

    Returns ``(winding, residual)`` where ``residual`` is the distance of the
    raw advance from the nearest integer.
    """
    floor = field.floor if floor is None else floor
    loop = np.asarray(loop, dtype=int)
    dens = field.density[loop[:, 0] % field.grid.m1, loop[:, 1] % field.grid.m2]
    if np.any(dens < floor):
        raise LoopThroughNode("loop passes below the density floor")
    advance, _ = path_winding(field, loop)
    w = int(np.round(advance))
    return w, abs(advance - w)


def trace_loop(grid: TorusGrid, steps) -> np.ndarray:
    """Turn a start point plus a sequence of unit steps into a loop array."""
    steps = np.asarray(steps, dtype=int)
    pts = np.cumsum(np.vstack([[0, 0], steps[:-1]]), axis=0)
    return pts % np.array([grid.m1, grid.m2])


# --- superlevel-set topology ---------------------------------------------

def wrapping_cycles(mask: np.ndarray) -> list[set[tuple[int, int]]]:
    """Homology of each connected component of ``mask`` on the torus.

    Returns one entry per periodic component: the set of primitive integer
    cycle vectors (windings around psi1, psi2) found in it.  An empty set
    means the component is contractible.
    """
    m1, m2 = mask.shape
    labels, n = ndimage.label(mask)
    if n == 0:
        return []
    # edges across the periodic seams, with the lattice offset they carry
    edges = set()
    a_left, a_right = labels[0, :], labels[-1, :]
    for u, v in zip(a_right, a_left):
        if u and v:
            edges.add((u, v, 1, 0))
    b_low, b_high = labels[:, 0], labels[:, -1]
    for u, v in zip(b_high, b_low):
        if u and v:
            edges.add((u, v, 0, 1))
    adj: dict[int, list] = {i: [] for i in range(1, n + 1)}
    for u, v, d1, d2 in edges:
        adj[u].append((v, d1, d2))
        adj[v].append((u, -d1, -d2))
    pot: dict[int, tuple[int, int]] = {}
    comps = []
    for root in range(1, n + 1):
        if root in pot:
            continue
        pot[root] = (0, 0)
        stack = [root]
        cycles: set[tuple[int, int]] = set()
        while stack:
            u = stack.pop()
            pu = pot[u]
            for v, d1, d2 in adj[u]:
                cand = (pu[0] + d1, pu[1] + d2)
                if v not in pot:
                    pot[v] = cand
                    stack.append(v)
                else:
                    c = (cand[0] - pot[v][0], cand[1] - pot[v][1])
                    if c != (0, 0):
                        cycles.add(_primitive(c))
        comps.append(cycles)
    return comps


def _primitive(c: tuple[int, int]) -> tuple[int, int]:
    g = np.gcd(abs(c[0]), abs(c[1]))
    p, q = c[0] // g, c[1] // g
    if p < 0 or (p == 0 and q < 0):
        p, q = -p, -q
    return (p, q)


def cycle_rank(cycles) -> int:
    vecs = [np.array(c) for c in cycles]
    if not vecs:
        return 0
    return int(np.linalg.matrix_rank(np.array(vecs)))


# --- diagnostics and export ----------------------------------------------

def overlap_kernel(n_particles: int, dpsi1, dpsi2) -> np.ndarray:
    """<psi'|psi> for the reduced angle states at separation (dpsi1, dpsi2).

    Only a diagnostic table; it approaches a delta comb as N grows.
    """
    dpsi1 = np.asarray(dpsi1, dtype=float)
    dpsi2 = np.asarray(dpsi2, dtype=float)
    out = np.zeros(np.broadcast(dpsi1, dpsi2).shape, dtype=complex)
    for n1 in range(n_particles + 1):
        for n3 in range(n_particles + 1 - n1):
            out += np.exp(-1j * (n1 * dpsi1 + n3 * dpsi2))
    return out


def write_csv_matrix(path, arr: np.ndarray) -> None:
    """Rows are psi1 indices, columns psi2 indices."""
    np.savetxt(path, arr, delimiter=",", fmt="%.10e")


def to_gray(arr: np.ndarray, vmax: float | None = None) -> np.ndarray:
    """Map 0 -> 255 (white) and vmax -> 0 (black)."""
    vmax = float(arr.max()) if vmax is None else vmax
    if vmax <= 0:
        return np.full(arr.shape, 255, dtype=np.uint8)
    scaled = np.clip(arr / vmax, 0.0, 1.0)
    return np.round(255 * (1.0 - scaled)).astype(np.uint8)


def write_pgm(path, arr: np.ndarray, vmax: float | None = None) -> None:
    """Binary PGM (P5), psi1 horizontal and psi2 increasing upwards.

    White is zero, black is ``vmax`` (the array maximum by default).
    """
    img = to_gray(arr, vmax).T[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of ``write_pgm`` for the grey levels (image orientation)."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    raw = parts[4]
    return np.frombuffer(raw[: w * h], dtype=np.uint8).reshape(h, w)
