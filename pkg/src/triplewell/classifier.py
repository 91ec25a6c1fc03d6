"""Organization-center classification of semiclassical wave functions.

Each eigenstate is matched against the structures a classical trajectory can
organize around on the reduced torus:

* E1: a point (all three modes frequency locked), quantum numbers
  (mu_td, mu_ta) = excitations along the diagonal and antidiagonal;
* B, C, D: a line psi2 = const, psi1 = const or psi1 = psi2 + const (one
  pair of modes locked, the third free), quantum numbers (mu_l, mu_t);
* A: the whole torus (no locking), quantum numbers = row/column windings.

The decision uses the topology of the density superlevel set, crest
tracing, overlaps with idealized templates built from two-mode blocks or a
harmonic expansion, and phase windings.
"""
from __future__ import annotations

import collections
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.special import eval_hermite, gammaln

from .fock import EigenSystem, FockBasis, ModelParams, mean_occupations
from .torusfield import (TWO_PI, LoopThroughNode, TorusField, TorusGrid, column_loop,
                         cycle_rank, evaluate, row_loop, synthesize, synthesize_coefficients,
                         winding_number, wrapping_cycles)


class Center(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E1 = "E1"
    E2 = "E2"
    UNASSIGNED = "UNASSIGNED"


ASSIGNED = (Center.E1, Center.C, Center.B, Center.D, Center.A)

# crest direction -> wrapping cycle of the superlevel set
DIRECTIONS = {
    "psi1_const": (0, 1),
    "psi2_const": (1, 0),
    "diagonal": (1, 1),
    "antidiagonal": (1, -1),
}
_LINE_CENTER = {"psi1_const": Center.C, "psi2_const": Center.B, "diagonal": Center.D}
_CENTER_DIRECTION = {v: k for k, v in _LINE_CENTER.items()}


class DegenerateFlat(ValueError):
    """Density is constant; every line is a crest."""


class NoCrest(ValueError):
    """No density maximum above the crest level."""


@dataclass(frozen=True)
class ClassifierConfig:
    """Frozen thresholds, calibrated once on the anchor states."""

    grid_size: int = 64
    topology_level: float = 0.2  # superlevel set at this fraction of the max density
    crest_level: float = 0.1  # transverse maxima must exceed this fraction
    crest_consistency: float = 0.9  # fraction of cuts showing the modal crest count
    line_overlap: float = 0.225  # locked two-mode template
    point_overlap: float = 0.3  # harmonic point-center template
    winding_consistency: float = 0.9  # A: rows/columns agreeing on the winding
    mode2_majority: float = 0.5  # D: <n2> / N above this
    max_point_quanta: int = 14
    node_depth: float = 0.02  # node minimum below this fraction of the cut max
    node_jump: float = np.pi / 2  # phase change across a node
    node_halfwidth: int = 6  # samples either side for the phase comparison
    gap_level: float = 0.1  # low-density gaps ...
    gap_width: float = np.pi  # ... wider than this are not nodes
    cut_samples: int = 256

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StateAssignment:
    state_index: int
    center: Center
    quantum_numbers: tuple[int, int] | None
    confidence: float
    energy: float = float("nan")
    details: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.center = Center(self.center)
        if self.quantum_numbers is not None:
            q = tuple(int(v) for v in self.quantum_numbers)
            if min(q) < 0:
                raise ValueError(f"negative quantum number {q}")
            self.quantum_numbers = q
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


# --- density features ---------------------------------------------------------

def topology_class(field_: TorusField, level: float) -> str:
    """'point', 'T2', one of the DIRECTIONS keys, or 'mixed'."""
    d = field_.density
    mask = d >= level * d.max()
    comps = wrapping_cycles(mask)
    cycles = set().union(*comps) if comps else set()
    if not cycles:
        return "point"
    if cycle_rank(cycles) >= 2:
        return "T2"
    if len(cycles) == 1:
        c = next(iter(cycles))
        for name, vec in DIRECTIONS.items():
            if c == vec:
                return name
    return "mixed"


def _profiles(density: np.ndarray, direction: str) -> np.ndarray:
    """Transverse density profiles, one per cut (rows of the result)."""
    if direction == "psi2_const":
        return density  # fixed psi1, profile over psi2
    return density.T  # fixed psi2, profile over psi1


def _peaks(p: np.ndarray, level: float) -> np.ndarray:
    return np.flatnonzero((p > np.roll(p, 1)) & (p >= np.roll(p, -1)) & (p > level))


def crest_counts(field_: TorusField, direction: str, level: float) -> np.ndarray:
    d = field_.density
    lev = level * d.max()
    return np.array([len(_peaks(p, lev)) for p in _profiles(d, direction)])


def crest_consistency(field_: TorusField, direction: str, level: float) -> tuple[int, float]:
    """Modal number of transverse maxima and the fraction of cuts showing it."""
    cnt = crest_counts(field_, direction, level)
    k, n = collections.Counter(cnt.tolist()).most_common(1)[0]
    return int(k), n / len(cnt)


def concentration_scores(field_: TorusField) -> dict:
    """Circular concentration of the density marginal transverse to each direction.

    1 means all density on one line of that direction, 0 means uniform.
    """
    d = field_.density / field_.density.sum()
    g = field_.grid
    p1, p2 = np.meshgrid(g.psi1, g.psi2, indexing="ij")
    transverse = {"psi1_const": p1, "psi2_const": p2, "diagonal": p1 - p2,
                  "antidiagonal": p1 + p2}
    return {k: float(abs(np.sum(d * np.exp(1j * v)))) for k, v in transverse.items()}


def crest_trace(field_: TorusField, direction: str, level: float = 0.1,
                max_jump: int | None = None) -> list[np.ndarray]:
    """Closed ridge paths running in ``direction``, one per crest.

    Each path lists one (a, b) grid index per transverse cut.  Only paths in
    the homotopy class of ``direction`` are returned.
    """
    d = field_.density
    if d.max() <= 0 or np.ptp(d) <= 1e-9 * d.max():
        raise DegenerateFlat("density is constant")
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    prof = _profiles(d, direction)
    n_cuts, m = prof.shape
    lev = level * d.max()
    peaks = [_peaks(p, lev) for p in prof]
    if not any(len(p) for p in peaks):
        raise NoCrest("no transverse maximum above the crest level")
    max_jump = max_jump or max(2, m // 8)
    expected = {"psi1_const": 0, "psi2_const": 0, "diagonal": m, "antidiagonal": -m}[direction]
    paths = []
    for start in peaks[0]:
        pos = [int(start)]
        unwrapped = int(start)
        ok = True
        for cut in range(1, n_cuts + 1):
            cand = peaks[cut % n_cuts]
            if len(cand) == 0:
                ok = False
                break
            delta = (cand - pos[-1] + m // 2) % m - m // 2
            k = int(np.argmin(np.abs(delta)))
            if abs(delta[k]) > max_jump:
                ok = False
                break
            unwrapped += int(delta[k])
            pos.append(int(cand[k]))
        if not ok or pos[-1] != pos[0]:
            continue
        if unwrapped - start != expected:
            continue
        cuts = np.arange(n_cuts)
        trans = np.array(pos[:-1])
        if direction == "psi2_const":
            paths.append(np.column_stack([cuts, trans]))
        else:
            paths.append(np.column_stack([trans, cuts]))
    return paths


def _path_angles(grid: TorusGrid, path: np.ndarray, refine: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Unwrapped angle coordinates along a closed index path, refined ``refine`` times."""
    step1 = TWO_PI / grid.m1
    step2 = TWO_PI / grid.m2
    a = np.append(path[:, 0], path[0, 0]).astype(float)
    b = np.append(path[:, 1], path[0, 1]).astype(float)
    da = (np.diff(a) + grid.m1 / 2) % grid.m1 - grid.m1 / 2
    db = (np.diff(b) + grid.m2 / 2) % grid.m2 - grid.m2 / 2
    ua = np.concatenate([[a[0]], a[0] + np.cumsum(da)])
    ub = np.concatenate([[b[0]], b[0] + np.cumsum(db)])
    s = np.linspace(0, len(ua) - 1, refine * (len(ua) - 1), endpoint=False)
    p1 = grid.psi1_start + step1 * np.interp(s, np.arange(len(ua)), ua)
    p2 = grid.psi2_start + step2 * np.interp(s, np.arange(len(ub)), ub)
    return p1, p2


def crest_winding(field_: TorusField, path: np.ndarray, refine: int = 8) -> tuple[int, float]:
    """Phase winding along a crest, from exact evaluation on a refined path."""
    if field_.coefficients is None:
        w, res = winding_number(field_, path)
        return w, res
    p1, p2 = _path_angles(field_.grid, path, refine)
    vals = evaluate(field_.coefficients, p1, p2)
    closed = np.append(vals, vals[:1])
    dphi = np.angle(closed[1:] * np.conj(closed[:-1]))
    if np.any(np.abs(dphi) > 0.9 * np.pi):
        raise LoopThroughNode("unresolved phase jump along crest")
    adv = dphi.sum() / TWO_PI
    return int(np.round(adv)), float(abs(adv - np.round(adv)))


# --- transverse nodes ---------------------------------------------------------

def transverse_cut(kind: str, offset: float = 0.0, samples: int = 256,
                   center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Closed sampled loop (samples, 2) of angles.

    ``kind``: "row" (psi1 varies at psi2 = offset), "column" (psi2 varies at
    psi1 = offset), "diagonal" or "antidiagonal" (through ``center``).
    """
    s = TWO_PI * np.arange(samples) / samples
    c1, c2 = center
    if kind == "row":
        return np.column_stack([s, np.full(samples, offset)])
    if kind == "column":
        return np.column_stack([np.full(samples, offset), s])
    if kind == "diagonal":
        return np.column_stack([c1 + s, c2 + s])
    if kind == "antidiagonal":
        return np.column_stack([c1 + s, c2 - s])
    raise ValueError(f"unknown cut kind {kind!r}")


def count_transverse_nodes(field_: TorusField, cut, config: ClassifierConfig = ClassifierConfig()) -> int:
    """Nodes on a closed cut: deep density minima with a phase jump near pi.

    ``cut`` is a (samples, 2) array of angles (see ``transverse_cut``).
    Minima inside a low-density gap wider than ``config.gap_width`` belong to
    empty regions of the torus, not to nodal lines, and are ignored.
    """
    cut = np.asarray(cut, dtype=float)
    if field_.coefficients is None:
        raise ValueError("node counting needs the coefficient matrix")
    f = evaluate(field_.coefficients, cut[:, 0], cut[:, 1])
    n = len(f)
    dens = np.abs(f) ** 2
    top = dens.max()
    if top <= 0:
        return 0
    # remove the carrier wave so that phase jumps stand out
    step = np.angle(np.roll(f, -1) * np.conj(f))
    weight = np.abs(f) * np.abs(np.roll(f, -1))
    rate = np.sum(weight * step) / max(np.sum(weight), 1e-300)
    k = int(np.round(rate * n / TWO_PI))
    g = f * np.exp(-1j * k * TWO_PI * np.arange(n) / n)
    is_min = (dens < np.roll(dens, 1)) & (dens <= np.roll(dens, -1)) & (dens < config.node_depth * top)
    low = dens < config.gap_level * top
    h = config.node_halfwidth
    ds = TWO_PI / n
    count = 0
    for i in np.flatnonzero(is_min):
        jump = np.angle(g[(i + h) % n] * np.conj(g[(i - h) % n]))
        if abs(jump) < config.node_jump:
            continue
        # width of the surrounding low-density gap
        left = right = 0
        while left < n and low[(i - left - 1) % n]:
            left += 1
        while right < n and low[(i + right + 1) % n]:
            right += 1
        if (left + right + 1) * ds >= config.gap_width:
            continue
        count += 1
    return count


# --- templates ------------------------------------------------------------------

def _dimer_block(params: ModelParams, kind: str, mu_l: int) -> np.ndarray:
    """Two-mode Hamiltonian for a line center with the free mode holding mu_l quanta.

    C: modes 1, 2 with n3 = mu_l; B: modes 2, 3 with n1 = mu_l (vector over
    n3); D: modes 1, 3 with n2 = N - mu_l, coupled at second order through
    mode 2 (vector over n1).
    """
    N = params.n_particles
    w = np.asarray(params.omega)
    x = np.asarray(params.x)

    def diag(n1, n2, n3):
        s = np.array([n1, n2, n3]) + 0.5
        return float(w @ s + x @ s**2)

    if kind in ("C", "B"):
        M = N - mu_l
        h = np.zeros((M + 1, M + 1))
        for i in range(M + 1):
            occ = (i, M - i, mu_l) if kind == "C" else (mu_l, M - i, i)
            h[i, i] = diag(*occ)
            if i < M:
                k = params.k12 if kind == "C" else params.k23
                h[i, i + 1] = h[i + 1, i] = -0.5 * k * np.sqrt((i + 1) * (M - i))
        return h
    # D: effective 1-3 dimer at fixed n2 via virtual hops into n2 +- 1
    n2 = N - mu_l
    M = mu_l
    h = np.zeros((M + 1, M + 1))
    for i in range(M + 1):
        h[i, i] = diag(i, n2, M - i)

    def hop(a, b):
        """<a|H|b> for single-hop neighbours a, b."""
        d = tuple(np.subtract(a, b))
        if d == (1, -1, 0):
            return -0.5 * params.k12 * np.sqrt((b[0] + 1) * b[1])
        if d == (-1, 1, 0):
            return -0.5 * params.k12 * np.sqrt((a[0] + 1) * a[1])
        if d == (0, 1, -1):
            return -0.5 * params.k23 * np.sqrt((b[1] + 1) * b[2])
        if d == (0, -1, 1):
            return -0.5 * params.k23 * np.sqrt((a[1] + 1) * a[2])
        return 0.0

    for i in range(M + 1):
        a = (i, n2, M - i)
        ea = diag(*a)
        mids = [(i + 1, n2 - 1, M - i), (i - 1, n2 + 1, M - i),
                (i, n2 + 1, M - i - 1), (i, n2 - 1, M - i + 1)]
        for q in mids:
            if min(q) < 0:
                continue
            eq = diag(*q)
            v1 = hop(a, q)
            for j in (i - 1, i, i + 1):
                if not 0 <= j <= M:
                    continue
                b = (j, n2, M - j)
                v2 = hop(q, b)
                if v1 == 0.0 or v2 == 0.0:
                    continue
                eb = diag(*b)
                h[i, j] += 0.5 * v1 * v2 * (1.0 / (ea - eq) + 1.0 / (eb - eq))
    return h


def _locked_mask(h: np.ndarray, energies: np.ndarray) -> np.ndarray:
    """+1 / -1 for eigenvalues inside the low / high libration zone of a dimer, else 0.

    Classical dimer energy h(n, chi) = h_nn + 2 t_n cos(chi); a level is
    locked when its contour cannot reach both chi = 0 and chi = pi.
    """
    if len(energies) == 1:
        return np.ones(1, dtype=int)
    t = np.diag(h, 1)
    t_site = np.concatenate([t[:1], 0.5 * (t[1:] + t[:-1]), t[-1:]])
    c0 = np.diag(h) + 2 * t_site
    cp = np.diag(h) - 2 * t_site
    lo = np.min(np.maximum(c0, cp))
    hi = np.max(np.minimum(c0, cp))
    return np.where(energies < lo, 1, np.where(energies > hi, -1, 0))


@dataclass
class LineTemplates:
    """Eigenvectors of the two-mode blocks, indexed by mu_l, per line center."""

    params: ModelParams

    @cached_property
    def blocks(self) -> dict:
        out = {}
        for kind in ("C", "B", "D"):
            for mu_l in range(self.params.n_particles + 1):
                h = _dimer_block(self.params, kind, mu_l)
                e, v = np.linalg.eigh(h)
                out[kind, mu_l] = (e, v, _locked_mask(h, e))
        return out

    @staticmethod
    def block_vector(C: np.ndarray, kind: str, mu_l: int) -> np.ndarray:
        N = C.shape[0] - 1
        if kind == "C":
            return C[: N - mu_l + 1, mu_l]
        if kind == "B":
            return C[mu_l, : N - mu_l + 1]
        return np.array([C[i, mu_l - i] for i in range(mu_l + 1)])

    def best(self, C: np.ndarray, kind: str) -> tuple[float, int, int, int]:
        """Best overlap with a locked template: (overlap, mu_l, block index, side)."""
        best = (0.0, 0, 0, 0)
        for mu_l in range(self.params.n_particles + 1):
            e, v, lock = self.blocks[kind, mu_l]
            ov = np.abs(v.T @ self.block_vector(C, kind, mu_l)) ** 2 * (lock != 0)
            j = int(np.argmax(ov))
            if ov[j] > best[0]:
                best = (float(ov[j]), mu_l, j, int(lock[j]))
        return best

    def overlap(self, C: np.ndarray, kind: str, mu_l: int, mu_t: int) -> float:
        """Overlap with the locked template of transverse order mu_t.

        For C and B mu_t counts block states from the libration end; for D the
        transverse count refers to the diagonal and the best locked state at
        this mu_l is used.
        """
        if not 0 <= mu_l <= self.params.n_particles:
            return 0.0
        e, v, lock = self.blocks[kind, mu_l]
        ov = np.abs(v.T @ self.block_vector(C, kind, mu_l)) ** 2
        if kind == "D":
            return float(np.max(ov * (lock != 0)))
        cands = [j for j in (mu_t, len(e) - 1 - mu_t) if 0 <= j < len(e) and lock[j] != 0]
        return float(max((ov[j] for j in cands), default=0.0))


class PointTemplates:
    """Harmonic-oscillator states about the minimum of the reduced Hamiltonian.

    With J = -i d/dpsi the quadratic expansion is a 2-d oscillator in psi;
    its eigenfunctions times the plane wave exp(i (J* - 1/2) . psi) serve as
    idealized point-center states.
    """

    def __init__(self, params: ModelParams, max_quanta: int = 14, grid_size: int = 64):
        from .classical import NoConvergence, harmonic_expansion

        self.params = params
        self.available = False
        try:
            hx = harmonic_expansion(params)
        except NoConvergence:
            return
        js, T = hx.j_min, hx.T
        self.frequencies = hx.frequencies
        self.diag_mode = hx.diagonal_mode
        self.j_min = js
        self.grid = TorusGrid(grid_size, grid_size, -np.pi, -np.pi)
        q1, q2 = np.meshgrid(self.grid.psi1, self.grid.psi2, indexing="ij")
        z = np.einsum("ij,jab->iab", T, np.array([q1, q2]))
        carrier = np.exp(1j * ((js[0] - 0.5) * q1 + (js[1] - 0.5) * q2))
        s = [np.sqrt(self.frequencies[k]) * z[k] for k in range(2)]
        self.templates = {}
        for m0 in range(max_quanta + 1):
            for m1 in range(max_quanta + 1 - m0):
                t = _hermite_fn(m0, s[0]) * _hermite_fn(m1, s[1]) * carrier
                t /= np.sqrt(np.sum(np.abs(t) ** 2))
                md, ma = (m0, m1) if self.diag_mode == 0 else (m1, m0)
                self.templates[md, ma] = t
        self.available = True

    def overlaps(self, C: np.ndarray) -> dict:
        if not self.available:
            return {}
        f = synthesize_coefficients(C, self.grid).values
        f = f / np.sqrt(np.sum(np.abs(f) ** 2))
        return {k: float(abs(np.vdot(t, f)) ** 2) for k, t in self.templates.items()}


def _hermite_fn(n: int, s: np.ndarray) -> np.ndarray:
    lognorm = 0.5 * (n * np.log(2.0) + gammaln(n + 1))
    return eval_hermite(n, s) * np.exp(-0.5 * s * s - lognorm)


def plane_wave_fit(field_: TorusField) -> tuple[np.ndarray, float]:
    """Least-squares phase gradient and plane-wave residual.

    Minimizing sum |grad phi - g|^2 over the grid gives the mean of the wrapped
    phase steps, i.e. the average row and column winding.  Returns
    ``(gradient, residual)``; the residual is 1 - |c_g|^2 for the nearest
    integer gradient g (0 for a pure plane wave).
    """
    f = field_.values
    d1 = np.angle(np.roll(f, -1, axis=0) * np.conj(f))
    d2 = np.angle(np.roll(f, -1, axis=1) * np.conj(f))
    g = np.array([d1.mean() * field_.grid.m1 / TWO_PI, d2.mean() * field_.grid.m2 / TWO_PI])
    if field_.coefficients is None:
        return g, float("nan")
    C = field_.coefficients
    n1, n3 = (int(v) for v in np.clip(np.round(g), 0, C.shape[0] - 1))
    return g, float(1.0 - abs(C[n1, n3]) ** 2 / np.sum(np.abs(C) ** 2))


def _modal_winding(field_: TorusField, loops) -> tuple[int | None, float]:
    ws = []
    for loop in loops:
        try:
            ws.append(winding_number(field_, loop)[0])
        except LoopThroughNode:
            ws.append(None)
    good = [w for w in ws if w is not None]
    if not good:
        return None, 0.0
    w, n = collections.Counter(good).most_common(1)[0]
    return int(w), n / len(ws)


# --- classifier -----------------------------------------------------------------

class Classifier:
    def __init__(self, params: ModelParams = ModelParams(), config: ClassifierConfig = ClassifierConfig(),
                 chaotic_bands=None):
        self.params = params
        self.config = config
        self.chaotic_bands = list(chaotic_bands or [])
        self.grid = TorusGrid(config.grid_size, config.grid_size)

    @cached_property
    def lines(self) -> LineTemplates:
        return LineTemplates(self.params)

    @cached_property
    def points(self) -> PointTemplates:
        return PointTemplates(self.params, self.config.max_point_quanta)

    def in_chaotic_band(self, energy: float) -> bool:
        # bands are in the shifted classical convention
        e = energy - self.params.zero_point
        return any(lo <= e <= hi for lo, hi in self.chaotic_bands)

    def classify(self, field_: TorusField, state_index: int = 0,
                 energy: float = float("nan")) -> StateAssignment:
        cfg = self.config
        N = self.params.n_particles
        C = field_.coefficients
        if C is None:
            raise ValueError("classification needs a field synthesized from coefficients")
        if C.shape[0] != N + 1:
            raise ValueError(f"coefficients are for N={C.shape[0] - 1}, params for N={N}")
        C = C / np.sqrt(np.sum(np.abs(C) ** 2))
        if N == 0:
            return StateAssignment(state_index, Center.E1, (0, 0), 1.0, energy, {"topology": "point"})
        if field_.grid.m1 != cfg.grid_size or field_.grid.m2 != cfg.grid_size:
            field_ = synthesize_coefficients(C, self.grid)
        d = field_.density
        details: dict = {}
        if np.ptp(d) <= 1e-9 * d.max():
            # a single Fourier mode: plane wave over the whole torus
            n1, n3 = np.unravel_index(np.argmax(np.abs(C)), C.shape)
            return StateAssignment(state_index, Center.A, (n1, n3), 1.0, energy, {"topology": "flat"})
        topo = topology_class(field_, cfg.topology_level)
        details["topology"] = topo
        result = None
        if topo == "point":
            result = self._point(C, details)
        elif topo in _LINE_CENTER:
            result = self._line(field_, C, topo, details)
        elif topo == "T2":
            result = self._torus(field_, C, details)
        if result is None:
            center = Center.E2 if self.in_chaotic_band(energy) else Center.UNASSIGNED
            return StateAssignment(state_index, center, None, 0.0, energy, details)
        center, qn, conf = result
        return StateAssignment(state_index, center, qn, float(np.clip(conf, 0.0, 1.0)), energy, details)

    def _point(self, C, details):
        ov = self.points.overlaps(C)
        if not ov:
            return None
        qn = max(ov, key=ov.get)
        details["template_overlap"] = ov[qn]
        if ov[qn] < self.config.point_overlap:
            return None
        return Center.E1, qn, ov[qn]

    def _line(self, field_, C, direction, details):
        cfg = self.config
        center = _LINE_CENTER[direction]
        n_crest, consistency = crest_consistency(field_, direction, cfg.crest_level)
        ov, mu_l_t, j, side = self.lines.best(C, center.value)
        details.update(crests=n_crest, crest_consistency=consistency, template_overlap=ov,
                       template=(mu_l_t, j, side))
        if consistency < cfg.crest_consistency or ov < cfg.line_overlap:
            return None
        if center == Center.D:
            n2 = float(np.sum(np.abs(C) ** 2 * _n2_grid(C)))
            details["n2"] = n2
            if n2 < cfg.mode2_majority * self.params.n_particles:
                return None
        # longitudinal number: phase winding along the crests
        windings = []
        try:
            for path in crest_trace(field_, direction, cfg.crest_level):
                try:
                    windings.append(abs(crest_winding(field_, path)[0]))
                except LoopThroughNode:
                    pass
        except (NoCrest, DegenerateFlat):
            pass
        details["crest_windings"] = windings
        mu_l = collections.Counter(windings).most_common(1)[0][0] if windings else mu_l_t
        if center == Center.D:
            mu_t = self._diagonal_nodes(field_)
            details["offset"] = self._diagonal_offset(field_)
        else:
            mu_t = n_crest - 1
        if mu_l > self.params.n_particles:
            return None
        return center, (mu_l, mu_t), ov

    def _diagonal_nodes(self, field_) -> int:
        cfg = self.config
        counts = [count_transverse_nodes(field_, transverse_cut("row", off, cfg.cut_samples), cfg)
                  for off in np.linspace(0, TWO_PI, 16, endpoint=False)]
        return int(np.median(counts))

    @staticmethod
    def _diagonal_offset(field_) -> float:
        """Which of psi1 - psi2 = 0 or pi carries more density."""
        g = field_.grid
        p1, p2 = np.meshgrid(g.psi1, g.psi2, indexing="ij")
        z = np.sum(field_.density * np.exp(1j * (p1 - p2)))
        return 0.0 if z.real >= 0 else float(np.pi)

    def _torus(self, field_, C, details):
        cfg = self.config
        g = field_.grid
        w1, f1 = _modal_winding(field_, [row_loop(g, b) for b in range(g.m2)])
        w2, f2 = _modal_winding(field_, [column_loop(g, a) for a in range(g.m1)])
        details.update(row_winding=w1, row_consistency=f1, column_winding=w2, column_consistency=f2)
        if w1 is None or w2 is None or min(f1, f2) < cfg.winding_consistency:
            return None
        if w1 < 0 or w2 < 0 or w1 + w2 > self.params.n_particles:
            return None
        details["template_overlap"] = float(abs(C[w1, w2]) ** 2)
        return Center.A, (w1, w2), min(f1, f2)

    def template_overlap(self, field_: TorusField, assignment: StateAssignment) -> float:
        """Overlap of the state with the idealized template of its assignment."""
        C = field_.coefficients / np.sqrt(np.sum(np.abs(field_.coefficients) ** 2))
        c, q = assignment.center, assignment.quantum_numbers
        if c in (Center.B, Center.C, Center.D):
            return self.lines.overlap(C, c.value, q[0], q[1])
        if c == Center.E1:
            if self.params.n_particles == 0:
                return 1.0
            return self.points.overlaps(C).get(q, 0.0)
        if c == Center.A:
            return float(abs(C[q[0], q[1]]) ** 2)
        return 0.0


def _n2_grid(C: np.ndarray) -> np.ndarray:
    N = C.shape[0] - 1
    n1, n3 = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    return np.clip(N - n1 - n3, 0, None)


_DEFAULT: dict = {}


def classify(field_: TorusField, params: ModelParams = ModelParams(),
             config: ClassifierConfig = ClassifierConfig(), state_index: int = 0,
             energy: float = float("nan")) -> StateAssignment:
    """Classify one field (templates are cached per parameter set)."""
    key = (params, config)
    if key not in _DEFAULT:
        _DEFAULT.clear()
        _DEFAULT[key] = Classifier(params, config)
    return _DEFAULT[key].classify(field_, state_index, energy)


def summarize(assignments) -> dict:
    counts = collections.Counter(a.center.value for a in assignments)
    out = {c.value: counts.get(c.value, 0) for c in Center}
    out["total_assigned"] = sum(out[c.value] for c in ASSIGNED)
    out["total_states"] = len(assignments)
    return out


def classify_all(eigensystem: EigenSystem, basis: FockBasis, grid: TorusGrid | None = None,
                 params: ModelParams = ModelParams(), config: ClassifierConfig = ClassifierConfig(),
                 chaotic_bands=None) -> tuple[list[StateAssignment], dict]:
    """Assignments for every eigenstate plus a histogram of centers."""
    if basis.n_particles != params.n_particles:
        raise ValueError("basis and params disagree on N")
    clf = Classifier(params, config, chaotic_bands)
    grid = grid or clf.grid
    out = []
    for k in range(1, len(eigensystem) + 1):
        f = synthesize(eigensystem.state(k), basis, grid)
        out.append(clf.classify(f, k, eigensystem.energy(k)))
    return out, summarize(out)


def write_assignments_csv(path, assignments) -> None:
    with open(path, "w") as fh:
        fh.write("index,energy,center,qn1,qn2,confidence\n")
        for a in assignments:
            q1, q2 = a.quantum_numbers if a.quantum_numbers is not None else ("", "")
            fh.write(f"{a.state_index},{a.energy:.12f},{a.center.value},{q1},{q2},{a.confidence:.6f}\n")


def write_summary_json(path, summary: dict, extra: dict | None = None) -> None:
    data = dict(summary)
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)


def mean_action_mode2(vec, basis: FockBasis) -> float:
    return float(mean_occupations(vec, basis)[1])
