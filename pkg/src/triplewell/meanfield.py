"""Mean-field (c-variable) dynamics of the three-mode system.

The amplitudes obey ``i dc_k/dt = dH/dc_k*`` with

    H = sum_k (omega_k |c_k|^2 + x_k |c_k|^4)
        - k12/2 (c1 c2* + c.c.) - k23/2 (c2 c3* + c.c.)

so a free mode rotates as exp(-i omega_eff t).  Reported phases are arg c_k;
the Hamiltonian angle of the action-angle picture is its negative.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .fock import FockBasis, ModelParams, mean_occupations

PAIRS = ((0, 1), (1, 2), (0, 2))
# lock pattern (12, 23, 13) -> trajectory type
_PATTERN_TYPE = {
    (False, False, False): "A",
    (False, True, False): "B",
    (True, False, False): "C",
    (False, False, True): "D",
}


class TooShort(ValueError):
    """Trajectory does not cover enough windows for lock detection."""


@dataclass(frozen=True)
class AmplitudeState:
    c: tuple[complex, complex, complex]

    def __post_init__(self):
        c = tuple(complex(v) for v in self.c)
        if len(c) != 3:
            raise ValueError("need exactly three amplitudes")
        object.__setattr__(self, "c", c)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.c, dtype=complex)

    @property
    def actions(self) -> np.ndarray:
        return np.abs(self.array) ** 2

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.array)

    @property
    def norm2(self) -> float:
        return float(self.actions.sum())


def hamiltonian(c, params: ModelParams) -> float:
    c = np.asarray(c, dtype=complex)
    n = np.abs(c) ** 2
    w = np.asarray(params.omega)
    x = np.asarray(params.x)
    hop = params.k12 * (c[0] * np.conj(c[1])).real + params.k23 * (c[1] * np.conj(c[2])).real
    return float(np.sum(w * n + x * n**2) - hop)


def _field(c1, c2, c3, p):
    w1, w2, w3, x1, x2, x3, h12, h23 = p
    d1 = -1j * ((w1 + 2 * x1 * (c1.real**2 + c1.imag**2)) * c1 - h12 * c2)
    d2 = -1j * ((w2 + 2 * x2 * (c2.real**2 + c2.imag**2)) * c2 - h12 * c1 - h23 * c3)
    d3 = -1j * ((w3 + 2 * x3 * (c3.real**2 + c3.imag**2)) * c3 - h23 * c2)
    return d1, d2, d3


def _coeffs(params: ModelParams) -> tuple:
    return (*params.omega, *params.x, 0.5 * params.k12, 0.5 * params.k23)


def eom_amplitudes(state, params: ModelParams) -> np.ndarray:
    """dc/dt for an AmplitudeState or a complex 3-vector."""
    c = state.array if isinstance(state, AmplitudeState) else np.asarray(state, dtype=complex)
    return np.array(_field(c[0], c[1], c[2], _coeffs(params)))


def real_rhs(params: ModelParams):
    """RHS on the packed real vector (Re c1, Im c1, Re c2, ...), for solve_ivp."""
    p = _coeffs(params)

    def rhs(t, y):
        d1, d2, d3 = _field(complex(y[0], y[1]), complex(y[2], y[3]), complex(y[4], y[5]), p)
        return [d1.real, d1.imag, d2.real, d2.imag, d3.real, d3.imag]

    return rhs


def pack(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    return np.column_stack([c.real, c.imag]).ravel()


def unpack(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y[..., 0::2] + 1j * y[..., 1::2]


def ic_from_number_state(n1, n2, n3, phases=(0.0, 0.0, 0.0)) -> AmplitudeState:
    n = np.array([n1, n2, n3], dtype=float)
    if np.any(n < 0):
        raise ValueError("occupation numbers must be non-negative")
    return AmplitudeState(tuple(np.sqrt(n + 0.5) * np.exp(1j * np.asarray(phases, float))))


def ic_from_eigenstate(vec, basis: FockBasis) -> AmplitudeState:
    """Amplitudes sqrt(<n_k> + 1/2) with zero phases; |c|^2 sums to N + 3/2."""
    occ = mean_occupations(vec, basis) / float(np.sum(np.asarray(vec) ** 2))
    return AmplitudeState(tuple(np.sqrt(occ + 0.5) + 0j))


@dataclass
class Trajectory:
    t: np.ndarray
    c: np.ndarray  # (T, 3) complex

    @property
    def actions(self) -> np.ndarray:
        return np.abs(self.c) ** 2

    @property
    def phases(self) -> np.ndarray:
        """Unwrapped arg c_k along the trajectory."""
        return np.unwrap(np.angle(self.c), axis=0)

    def energy(self, params: ModelParams) -> np.ndarray:
        return np.array([hamiltonian(ci, params) for ci in self.c])

    def to_csv(self, path) -> None:
        cols = ["t"]
        cols += [f"{p}_c{k}" for p in ("re", "im") for k in (1, 2, 3)]
        cols += [f"abs2_c{k}" for k in (1, 2, 3)] + [f"phase{k}" for k in (1, 2, 3)]
        data = np.column_stack(
            [self.t, self.c.real, self.c.imag, self.actions, np.angle(self.c)]
        )
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.12e")


# 6th-order composition of Strang steps (Yoshida's solution A)
_W1, _W2, _W3 = -1.17767998417887, 0.235573213359357, 0.784513610477560
_W0 = 1.0 - 2.0 * (_W1 + _W2 + _W3)
YOSHIDA6 = (_W3, _W2, _W1, _W0, _W1, _W2, _W3)


def _unitarize(u: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Newton-Schulz polish; removes the O(eps) non-unitarity of the eigh product."""
    eye = np.eye(u.shape[0])
    for _ in range(sweeps):
        u = u @ (3 * eye - u.conj().T @ u) / 2
    return u


class SplittingStepper:
    """Symplectic split-step propagator for a batch of amplitude vectors.

    The on-site part rotates each c_k by its own effective frequency (exact,
    |c_k| fixed) and the hopping part is a constant unitary, so sum |c_k|^2
    is conserved to roundoff.
    """

    def __init__(self, params: ModelParams, step: float):
        self.omega = np.asarray(params.omega, dtype=float)
        self.x = np.asarray(params.x, dtype=float)
        m = np.zeros((3, 3))
        m[0, 1] = m[1, 0] = -0.5 * params.k12
        m[1, 2] = m[2, 1] = -0.5 * params.k23
        lam, vec = np.linalg.eigh(m)
        self.step = float(step)
        # one hop propagator per distinct composition weight
        self._hop = {w: _unitarize((vec * np.exp(-1j * lam * w * self.step)) @ vec.T)
                     for w in set(YOSHIDA6)}

    def _onsite(self, c, tau):
        return c * np.exp(-1j * (self.omega + 2 * self.x * (c.real**2 + c.imag**2)) * tau)

    def advance(self, c, n_steps: int):
        """``n_steps`` steps on an array of shape (..., 3)."""
        c = np.array(c, dtype=complex)
        for _ in range(n_steps):
            for w in YOSHIDA6:
                tau = 0.5 * w * self.step
                c = self._onsite(c, tau)
                c = c @ self._hop[w].T
                c = self._onsite(c, tau)
        return c


def evolve_batch(c0, params: ModelParams, t_end: float, dt: float = 0.1,
                 step: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
    """Split-step evolution of many initial amplitude vectors at once.

    Returns ``(t, c)`` with ``c`` of shape (T, B, 3).
    """
    sub = max(1, int(round(dt / step)))
    stepper = SplittingStepper(params, dt / sub)
    n_out = int(round(t_end / dt))
    c = np.array(c0, dtype=complex).reshape(-1, 3)
    out = np.empty((n_out + 1,) + c.shape, dtype=complex)
    out[0] = c
    norm0 = np.sum(np.abs(c) ** 2, axis=-1, keepdims=True)
    for i in range(n_out):
        c = stepper.advance(c, sub)
        # the flow conserves sum |c|^2 exactly; strip the accumulated rounding bias
        norm = np.sum(np.abs(c) ** 2, axis=-1, keepdims=True)
        c = c * np.sqrt(np.divide(norm0, norm, out=np.ones_like(norm), where=norm > 0))
        out[i + 1] = c
    return dt * np.arange(n_out + 1), out


def evolve(state: AmplitudeState, params: ModelParams, t_end: float, dt: float = 0.1,
           method: str = "splitting", step: float = 0.02,
           rtol: float = 1e-12, atol: float = 1e-12) -> Trajectory:
    """Integrate the amplitude equations, sampled every ``dt``.

    ``method="splitting"`` (default) is the norm-conserving symplectic scheme
    with internal step ``step``; ``method="dop853"`` uses the adaptive
    8th-order Runge-Kutta integrator with tolerances ``rtol``/``atol``.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if method == "splitting":
        t, c = evolve_batch(state.array, params, t_end, dt, step)
        return Trajectory(t, c[:, 0, :])
    if method != "dop853":
        raise ValueError(f"unknown method {method!r}")
    n = int(round(t_end / dt))
    t_eval = np.linspace(0.0, n * dt, n + 1)
    sol = solve_ivp(real_rhs(params), (0.0, t_eval[-1]), pack(state.array), method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return Trajectory(sol.t, unpack(sol.y.T))


# --- lock detection ---------------------------------------------------------

@dataclass
class LockReport:
    locked: dict  # pair name -> bool, persistent over all windows
    window_velocities: list  # per window: mean phase velocities of the three modes
    window_patterns: list  # per window: (lock12, lock23, lock13)
    intermittent: bool
    label: str
    frequency_spread: float = 0.0  # std of windowed relative frequencies / mean phase speed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window_patterns"] = [list(p) for p in self.window_patterns]
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class LockConfig:
    window: float = 50.0
    threshold: float = 0.05  # fraction of the mean individual phase velocity
    min_windows: int = 3
    drift: float = 0.02  # spread of windowed relative frequencies that marks chaos


def pattern_type(pattern) -> str:
    pattern = tuple(bool(p) for p in pattern)
    if sum(pattern) >= 2:
        return "E1"
    return _PATTERN_TYPE[pattern]


def _established(types, run: int) -> list:
    """Types holding on at least ``run`` consecutive windows, in order of appearance."""
    out = []
    for key, grp in itertools.groupby(types):
        if len(list(grp)) >= run and key not in out:
            out.append(key)
    return out


def detect_locking(traj: Trajectory, config: LockConfig = LockConfig()) -> LockReport:
    """Windowed phase-velocity test for pairwise frequency locking.

    A pair is locked on a window when the fitted drift rate of its relative
    phase is below ``threshold`` times the mean phase speed of the modes.
    A type counts as established when it holds on ``min_windows``
    consecutive windows.  Two or more established types, or none at all,
    mark the trajectory E2.  Shorter episodes count as temporary locking
    (again E2) only when the windowed relative frequencies also spread by
    more than ``drift`` times the mean phase speed; on a regular torus
    they are fixed and such blips are threshold noise.
    """
    t = np.asarray(traj.t)
    span = t[-1] - t[0]
    n_win = int(np.floor(span / config.window + 1e-9))
    if n_win < config.min_windows:
        raise TooShort(f"{span:g} time units cover {n_win} windows, need {config.min_windows}")
    ph = traj.phases
    edges = t[0] + config.window * np.arange(n_win + 1)
    idx = np.searchsorted(t, edges - 1e-9 * config.window)
    idx = np.clip(idx, 0, len(t) - 1)
    velocities, patterns = [], []
    for i0, i1 in zip(idx[:-1], idx[1:]):
        tt = t[i0:i1 + 1] - t[i0]
        # least-squares phase velocities; libration inside a window averages out
        v = np.polyfit(tt, ph[i0:i1 + 1], 1)[0]
        scale = float(np.mean(np.abs(v)))
        pat = tuple(bool(abs(v[i] - v[j]) < config.threshold * scale) for i, j in PAIRS)
        velocities.append(v.tolist())
        patterns.append(pat)
    types = [pattern_type(p) for p in patterns]
    established = _established(types, config.min_windows)
    v = np.array(velocities)
    rel = np.column_stack([v[:, i] - v[:, j] for i, j in PAIRS])
    spread = float(np.max(np.std(rel, axis=0)) / np.mean(np.abs(v)))
    temporary = len(set(types)) > 1 and spread > config.drift
    changes = len(established) != 1 or temporary
    label = "E2" if changes else established[0]
    persistent = tuple(all(p[k] for p in patterns) for k in range(3))
    locked = {f"{i + 1}{j + 1}": persistent[k] for k, (i, j) in enumerate(PAIRS)}
    return LockReport(locked, velocities, patterns, changes, label, spread)


# --- classification grids ---------------------------------------------------

@dataclass
class GridCell:
    n1: int
    n3: int
    label_classical: str
    label_quantum: str


@dataclass
class BasisGrid:
    n_particles: int
    cells: list = field(default_factory=list)

    def lookup(self) -> dict:
        return {(c.n1, c.n3): c for c in self.cells}

    def agreement(self, exclude=("D",)) -> tuple[float, int]:
        """Fraction of mutually assigned cells with equal labels, and the count compared.

        Cells labelled with a type in ``exclude`` on either side are left out;
        D is too weak to be claimed from the classical lock test.
        """
        skip = {"UNASSIGNED", "", *exclude}
        both = [c for c in self.cells
                if c.label_classical not in skip and c.label_quantum not in skip]
        if not both:
            return float("nan"), 0
        return float(np.mean([c.label_classical == c.label_quantum for c in both])), len(both)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("n1,n3,label_classical,label_quantum\n")
            for c in self.cells:
                fh.write(f"{c.n1},{c.n3},{c.label_classical},{c.label_quantum}\n")


def quantum_labels(eigensystem, basis: FockBasis, assignments, min_weight: float = 0.05) -> dict:
    """Per basis state, the center of the assigned eigenstate carrying most of its weight."""
    w = np.asarray(eigensystem.vectors) ** 2  # (basis, eigenstate); sign-independent
    centers = np.array([str(getattr(a.center, "value", a.center)) for a in assignments], dtype=object)
    assigned = centers != "UNASSIGNED"
    out = {}
    for i, s in enumerate(basis.states):
        row = np.where(assigned, w[i], 0.0)
        k = int(np.argmax(row))
        out[(s[0], s[2])] = centers[k] if row[k] > min_weight else "UNASSIGNED"
    return out


def classical_grid(params: ModelParams, t_end: float = 300.0,
                   config: LockConfig = LockConfig(), dt: float = 0.1,
                   step: float = 0.02, copies: int = 4, jitter: float = 0.2,
                   seed: int = 0) -> dict:
    """Lock-detection label for the trajectory started at every number state.

    Each start is also run with ``copies`` random initial-phase offsets of
    at most ``jitter`` rad; a cell whose label is not unanimous sits on a zone
    fringe and is left UNASSIGNED.
    """
    from .fock import enumerate_basis

    basis = enumerate_basis(params.n_particles)
    c0 = np.array([ic_from_number_state(*s).array for s in basis.states])
    rng = np.random.default_rng(seed)
    starts = [c0] + [c0 * np.exp(1j * rng.uniform(-jitter, jitter, c0.shape))
                     for _ in range(copies)]
    t, c = evolve_batch(np.vstack(starts), params, t_end, dt, step)
    L = len(basis)
    out = {}
    for b, (n1, _, n3) in enumerate(basis.states):
        try:
            labels = {detect_locking(Trajectory(t, c[:, k * L + b, :]), config).label
                      for k in range(copies + 1)}
        except TooShort:
            labels = set()
        out[(n1, n3)] = labels.pop() if len(labels) == 1 else "UNASSIGNED"
    return out


def classify_basis_grid(params: ModelParams, t_end: float = 300.0,
                        config: LockConfig = LockConfig(), assignments=None,
                        eigensystem=None, basis: FockBasis | None = None,
                        min_weight: float = 0.05, copies: int = 4,
                        jitter: float = 0.2) -> BasisGrid:
    """Classical trajectory types for every number-state start, plus the quantum grid.

    ``assignments`` are classifier results for ``eigensystem``; when omitted
    they are computed here.
    """
    from .fock import solve
    from .classifier import classify_all

    if eigensystem is None or basis is None:
        basis, eigensystem = solve(params)
    if assignments is None:
        assignments, _ = classify_all(eigensystem, basis, params=params)
    qlab = quantum_labels(eigensystem, basis, assignments, min_weight)
    clab = classical_grid(params, t_end, config, copies=copies, jitter=jitter)
    grid = BasisGrid(params.n_particles)
    for n1, _, n3 in basis.states:
        grid.cells.append(GridCell(n1, n3, clab[(n1, n3)], qlab[(n1, n3)]))
    return grid
