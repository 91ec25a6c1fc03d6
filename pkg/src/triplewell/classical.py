"""Classical three-oscillator model, its reduction by the total action, and
Poincare sections of the reduced flow.

Angles follow Hamilton's convention (dphi/dt = dH/dI), so the mean-field
amplitude of mode k is c_k = sqrt(I_k) exp(-i phi_k).  Reduced variables:
psi1 = phi1 - phi2, psi2 = phi3 - phi2, J1 = I1, J2 = I3, K = I1 + I2 + I3,
and theta = phi2 is conjugate to K.

Energies passed to the section and orbit routines are measured in the
shifted convention E = H - H0(1/2, 1/2, 1/2) unless ``shifted=False``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect, minimize

from .fock import ModelParams
from .meanfield import evolve_batch, pack, real_rhs, unpack

ACTION_FLOOR = 1e-9
TWO_PI = 2.0 * np.pi


class DomainError(ValueError):
    """State outside the physical domain (negative action)."""


class SingularBoundary(DomainError):
    """An action under a square root in the reduced equations is at or below the floor."""


class NoRoot(ValueError):
    """No action value reaches the requested energy."""


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class FullState:
    phi: tuple[float, float, float]
    action: tuple[float, float, float]


@dataclass(frozen=True)
class ReducedState:
    psi1: float
    psi2: float
    j1: float
    j2: float
    k_total: float

    @property
    def i2(self) -> float:
        return self.k_total - self.j1 - self.j2

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.psi1, self.psi2, self.j1, self.j2])


def h0(actions, params: ModelParams) -> float:
    a = np.asarray(actions, dtype=float)
    return float(np.sum(np.asarray(params.omega) * a + np.asarray(params.x) * a**2))


def effective_frequencies(actions, params: ModelParams) -> np.ndarray:
    """dH0/dI_k = omega_k + 2 x_k I_k."""
    a = np.asarray(actions, dtype=float)
    return np.asarray(params.omega) + 2 * np.asarray(params.x) * a


def _check_actions(actions, tol: float = 1e-12):
    """Reject negative actions; roundoff below ``tol`` is clipped to zero."""
    a = np.asarray(actions, dtype=float)
    if np.any(a < -tol * max(1.0, float(np.abs(a).max()))):
        raise DomainError(f"negative action in {tuple(actions)}")
    return np.maximum(a, 0.0)


def h_full(state: FullState, params: ModelParams) -> float:
    I = _check_actions(state.action)
    p = np.asarray(state.phi, dtype=float)
    return (h0(I, params)
            - params.k12 * np.sqrt(I[0] * I[1]) * np.cos(p[0] - p[1])
            - params.k23 * np.sqrt(I[1] * I[2]) * np.cos(p[1] - p[2]))


def h_reduced(state: ReducedState, params: ModelParams, paper_convention: bool = False) -> float:
    """Reduced Hamiltonian; ``paper_convention`` subtracts the zero-point energy."""
    j1, j2, i2 = _check_actions((state.j1, state.j2, state.i2))
    w, x = params.omega, params.x
    h = (w[0] * j1 + w[1] * i2 + w[2] * j2 + x[0] * j1**2 + x[1] * i2**2 + x[2] * j2**2
         - params.k12 * np.sqrt(j1 * i2) * np.cos(state.psi1)
         - params.k23 * np.sqrt(j2 * i2) * np.cos(state.psi2))
    return float(h - params.zero_point) if paper_convention else float(h)


def reduce(state: FullState) -> ReducedState:
    p, I = state.phi, state.action
    return ReducedState(p[0] - p[1], p[2] - p[1], I[0], I[2], float(sum(I)))


def to_full(state: ReducedState, theta: float = 0.0) -> FullState:
    return FullState((theta + state.psi1, theta, theta + state.psi2),
                     (state.j1, state.i2, state.j2))


def amplitudes(state: ReducedState, theta: float = 0.0) -> np.ndarray:
    """Mean-field amplitudes c_k = sqrt(I_k) exp(-i phi_k)."""
    f = to_full(state, theta)
    return np.sqrt(_check_actions(f.action)) * np.exp(-1j * np.asarray(f.phi))


def reduced_from_amplitudes(c) -> np.ndarray:
    """(psi1, psi2, j1, j2) rows from amplitude rows, angles wrapped to (-pi, pi]."""
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    psi1 = np.angle(c[:, 1] * np.conj(c[:, 0]))
    psi2 = np.angle(c[:, 1] * np.conj(c[:, 2]))
    n = np.abs(c) ** 2
    return np.column_stack([psi1, psi2, n[:, 0], n[:, 2]])


def eom_reduced(state: ReducedState, params: ModelParams) -> np.ndarray:
    """(dpsi1/dt, dpsi2/dt, dJ1/dt, dJ2/dt)."""
    j1, j2, i2 = state.j1, state.j2, state.i2
    if min(j1, j2, i2) <= ACTION_FLOOR:
        raise SingularBoundary(f"actions ({j1:.3g}, {i2:.3g}, {j2:.3g}) touch the boundary")
    w, x = params.omega, params.x
    k12, k23 = params.k12, params.k23
    c1, c2 = np.cos(state.psi1), np.cos(state.psi2)
    base2 = w[1] + 2 * x[1] * i2
    dpsi1 = (w[0] + 2 * x[0] * j1 - base2
             - 0.5 * k12 * (np.sqrt(i2 / j1) - np.sqrt(j1 / i2)) * c1
             + 0.5 * k23 * np.sqrt(j2 / i2) * c2)
    dpsi2 = (w[2] + 2 * x[2] * j2 - base2
             - 0.5 * k23 * (np.sqrt(i2 / j2) - np.sqrt(j2 / i2)) * c2
             + 0.5 * k12 * np.sqrt(j1 / i2) * c1)
    dj1 = -k12 * np.sqrt(j1 * i2) * np.sin(state.psi1)
    dj2 = -k23 * np.sqrt(j2 * i2) * np.sin(state.psi2)
    return np.array([dpsi1, dpsi2, dj1, dj2])


def dtheta_dt(psi1, psi2, j1, j2, k_total, params: ModelParams):
    """dH/dK along a reduced trajectory (vectorized)."""
    i2 = k_total - j1 - j2
    return (params.omega[1] + 2 * params.x[1] * i2
            - 0.5 * params.k12 * np.sqrt(j1 / i2) * np.cos(psi1)
            - 0.5 * params.k23 * np.sqrt(j2 / i2) * np.cos(psi2))


# --- trajectories -----------------------------------------------------------

@dataclass
class Trajectory:
    """Reduced trajectory sampled at times ``t``; angles are unwrapped."""

    t: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    k_total: np.ndarray
    energy: np.ndarray
    c: np.ndarray | None = field(default=None, repr=False)
    dense: object = field(default=None, repr=False)

    def state(self, i: int) -> ReducedState:
        return ReducedState(float(self.psi1[i]), float(self.psi2[i]), float(self.j1[i]),
                            float(self.j2[i]), float(self.k_total[i]))

    def to_csv(self, path) -> None:
        data = np.column_stack([self.t, self.psi1, self.psi2, self.j1, self.j2, self.energy])
        np.savetxt(path, data, delimiter=",", header="t,psi1,psi2,j1,j2,energy",
                   comments="", fmt="%.12e")


def _energy_of_amplitudes(c, params: ModelParams) -> np.ndarray:
    n = np.abs(c) ** 2
    hop = (params.k12 * (c[:, 0] * np.conj(c[:, 1])).real
           + params.k23 * (c[:, 1] * np.conj(c[:, 2])).real)
    return n @ np.asarray(params.omega) + n**2 @ np.asarray(params.x) - hop


def _trajectory_from_amplitudes(t, c, params, dense=None) -> Trajectory:
    red = reduced_from_amplitudes(c)
    return Trajectory(t, np.unwrap(red[:, 0]), np.unwrap(red[:, 1]), red[:, 2], red[:, 3],
                      (np.abs(c) ** 2).sum(axis=1), _energy_of_amplitudes(c, params), c, dense)


def integrate(state0: ReducedState, params: ModelParams, t_end: float, dt: float = 0.01,
              method: str = "splitting", step: float = 0.02,
              rtol: float = 1e-12, atol: float = 1e-12) -> Trajectory:
    """Integrate the reduced system through the regular amplitude flow.

    ``method``: "splitting" (symplectic, K conserved to roundoff), "dop853"
    (adaptive, amplitude flow) or "reduced" (the singular reduced equations
    directly; interior trajectories only, raises SingularBoundary).
    The returned trajectory carries a cubic Hermite interpolant as ``dense``.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if method == "reduced":
        return _integrate_reduced(state0, params, t_end, dt, rtol, atol)
    c0 = amplitudes(state0)
    if method == "splitting":
        t, c = evolve_batch(c0, params, t_end, dt, min(step, dt))
        c = c[:, 0, :]
    elif method == "dop853":
        n = int(round(t_end / dt))
        t = dt * np.arange(n + 1)
        sol = solve_ivp(real_rhs(params), (0.0, t[-1]), pack(c0), method="DOP853",
                        t_eval=t, rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(f"integration failed: {sol.message}")
        c = unpack(sol.y.T)
    else:
        raise ValueError(f"unknown method {method!r}")
    rhs = real_rhs(params)
    dy = np.array([rhs(0.0, y) for y in pack_rows(c)])
    dense = CubicHermiteSpline(t, pack_rows(c), dy, axis=0)
    return _trajectory_from_amplitudes(t, c, params, dense)


def pack_rows(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    out = np.empty(c.shape[:-1] + (6,))
    out[..., 0::2] = c.real
    out[..., 1::2] = c.imag
    return out


def _integrate_reduced(state0, params, t_end, dt, rtol, atol) -> Trajectory:
    K = state0.k_total

    def rhs(t, y):
        return eom_reduced(ReducedState(y[0], y[1], y[2], y[3], K), params)

    n = int(round(t_end / dt))
    t = dt * np.arange(n + 1)
    sol = solve_ivp(rhs, (0.0, t[-1]), state0.vector, method="DOP853", t_eval=t,
                    rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    psi1, psi2, j1, j2 = sol.y
    energy = np.array([h_reduced(ReducedState(*row, K), params) for row in sol.y.T])
    return Trajectory(sol.t, psi1, psi2, j1, j2, np.full(len(t), K), energy, None, sol.sol)


@dataclass
class FullTrajectory:
    t: np.ndarray
    phi: np.ndarray  # (T, 3)
    action: np.ndarray  # (T, 3)


def lift(traj: Trajectory, theta0: float, params: ModelParams) -> FullTrajectory:
    """Recover the cyclic angle by quadrature of dH/dK and rebuild (phi, I)."""
    rate = dtheta_dt(traj.psi1, traj.psi2, traj.j1, traj.j2, traj.k_total, params)
    theta = theta0 + cumulative_trapezoid(rate, traj.t, initial=0.0)
    phi = np.column_stack([theta + traj.psi1, theta, theta + traj.psi2])
    action = np.column_stack([traj.j1, traj.k_total - traj.j1 - traj.j2, traj.j2])
    return FullTrajectory(traj.t, phi, action)


# --- Poincare sections ------------------------------------------------------

def _shift(params: ModelParams, shifted: bool) -> float:
    return params.zero_point if shifted else 0.0


def seed_roots(psi2: float, j2: float, energy: float, params: ModelParams,
               shifted: bool = True, samples: int = 1000) -> list[tuple[float, float]]:
    """All J1 on the psi1 = 0 plane with H = energy, as (J1, dpsi1/dt) pairs."""
    K = params.k_total
    lo, hi = ACTION_FLOOR, K - j2 - ACTION_FLOOR
    if hi <= lo:
        return []
    target = energy + _shift(params, shifted)

    def f(j1):
        return h_reduced(ReducedState(0.0, psi2, j1, j2, K), params) - target

    grid = np.linspace(lo, hi, samples)
    vals = np.array([f(j) for j in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            r = a
        elif fa * fb < 0:
            r = bisect(f, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
        else:
            continue
        v = eom_reduced(ReducedState(0.0, psi2, r, j2, K), params)[0]
        roots.append((float(r), float(v)))
    return roots


def poincare_seed(psi2: float, j2: float, energy: float, params: ModelParams,
                  shifted: bool = True, previous_j1: float | None = None) -> ReducedState:
    """Initial point on psi1 = 0 with dpsi1/dt > 0 at the given energy.

    With several admissible roots the one closest to ``previous_j1`` is used;
    without it the smallest J1.
    """
    roots = [r for r, v in seed_roots(psi2, j2, energy, params, shifted) if v > 0]
    if not roots:
        raise NoRoot(f"no J1 with dpsi1/dt > 0 at E={energy}, psi2={psi2}, J2={j2}")
    if previous_j1 is None:
        j1 = min(roots)
    else:
        j1 = min(roots, key=lambda r: abs(r - previous_j1))
    return ReducedState(0.0, float(psi2), j1, float(j2), params.k_total)


@dataclass
class PoincareSection:
    energy: float
    crossings: np.ndarray  # (n, 2): psi2 in (-pi, pi], j2
    seed_ids: np.ndarray
    seeds: list
    failures: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("seed_id,psi2,j2\n")
            for s, (p, j) in zip(self.seed_ids, self.crossings):
                fh.write(f"{int(s)},{p:.12e},{j:.12e}\n")


def _crossing_event(t, y):
    # sqrt(I1 I2) sin(psi1) = Im(c2 conj(c1))
    return y[3] * y[0] - y[2] * y[1]


_crossing_event.direction = 1.0


def section_crossings(state0: ReducedState, params: ModelParams, n_crossings: int,
                      t_max: float | None = None, rtol: float = 1e-13, atol: float = 1e-13,
                      backward: bool = False):
    """Oriented psi1 = 0 crossings after ``state0`` as (t, c) pairs."""
    rhs = real_rhs(params)
    y = pack(amplitudes(state0))
    t0 = 0.0
    span = 200.0
    t_max = t_max if t_max is not None else 200.0 * max(n_crossings, 1)
    sign = -1.0 if backward else 1.0
    event = _crossing_event
    if backward:
        def event(t, y):
            return _crossing_event(t, y)
        event.direction = -1.0
    out = []
    while len(out) < n_crossings and abs(t0) < t_max:
        sol = solve_ivp(rhs, (t0, t0 + sign * span), y, method="DOP853", events=event,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(f"integration failed: {sol.message}")
        for te, ye in zip(sol.t_events[0], sol.y_events[0]):
            if abs(te - t0) < 1e-12:
                continue
            c = unpack(ye)
            if (c[1] * np.conj(c[0])).real > 0:  # psi1 = 0, not pi
                out.append((te, c))
                if len(out) == n_crossings:
                    break
        t0, y = sol.t[-1], sol.y[:, -1]
    return out


def poincare_section(energy: float, params: ModelParams, seeds, crossings_per_seed: int = 100,
                     shifted: bool = True, rtol: float = 1e-13) -> PoincareSection:
    """Collect oriented psi1 = 0 crossings from seeds given as (psi2, j2) pairs."""
    pts, ids, failures, used = [], [], {}, []
    prev = None
    for k, (psi2, j2) in enumerate(seeds):
        try:
            s = poincare_seed(psi2, j2, energy, params, shifted, previous_j1=prev)
            prev = s.j1
            used.append(s)
            for _, c in section_crossings(s, params, crossings_per_seed, rtol=rtol, atol=rtol):
                r = reduced_from_amplitudes(c)[0]
                pts.append((r[1], r[3]))
                ids.append(k)
        except (NoRoot, RuntimeError) as exc:
            failures[k] = f"{type(exc).__name__}: {exc}"
    return PoincareSection(energy, np.array(pts).reshape(-1, 2), np.array(ids, dtype=int),
                           used, failures)


def section_map(psi2: float, j2: float, energy: float, params: ModelParams,
                shifted: bool = True, previous_j1: float | None = None):
    """One return of the section map: ((psi2', j2'), return time, seed)."""
    s = poincare_seed(psi2, j2, energy, params, shifted, previous_j1)
    hits = section_crossings(s, params, 1)
    if not hits:
        raise NoConvergence("trajectory did not return to the section")
    t, c = hits[0]
    r = reduced_from_amplitudes(c)[0]
    return (float(r[1]), float(r[3])), float(t), s


def _wrap(a):
    return (a + np.pi) % TWO_PI - np.pi


@dataclass
class HarmonicExpansion:
    """Quadratic expansion of the reduced Hamiltonian about its minimum at psi = 0.

    H ~ E_min + p.A.p / 2 + q.B.q / 2 with q = psi and p = J - J*.  Normal
    coordinates are z = T q; row k of ``q_dirs`` is the psi-space direction of
    mode k and ``p_dirs`` the matching action direction at q = 0.
    """

    j_min: np.ndarray
    e_min: float
    A: np.ndarray
    B: np.ndarray
    frequencies: np.ndarray
    T: np.ndarray
    q_dirs: np.ndarray
    p_dirs: np.ndarray

    @property
    def diagonal_mode(self) -> int:
        """Index of the mode whose psi components move in phase."""
        return int(np.argmax(self.q_dirs[:, 0] * self.q_dirs[:, 1]))

    @property
    def periods(self) -> np.ndarray:
        return TWO_PI / self.frequencies


def _shell_center(params: ModelParams, psi=(0.0, 0.0)) -> tuple[np.ndarray, float]:
    """Actions minimizing H at fixed angles, and the minimum value (unshifted)."""
    K = params.k_total

    def h(j):
        if min(j[0], j[1], K - j[0] - j[1]) <= 0:
            return np.inf
        return h_reduced(ReducedState(psi[0], psi[1], j[0], j[1], K), params)

    res = minimize(h, [K / 3, K / 3], method="Nelder-Mead",
                   options=dict(xatol=1e-11, fatol=1e-14, maxiter=4000))
    if not np.isfinite(res.fun):
        raise NoConvergence("no interior minimum")
    return res.x, float(res.fun)


def harmonic_expansion(params: ModelParams, eps: float = 1e-4) -> HarmonicExpansion:
    """Normal modes of small oscillations about the interior minimum at psi = 0.

    Raises NoConvergence when the minimum is not interior or not a proper
    minimum (e.g. without coupling).
    """
    K = params.k_total
    js, e_min = _shell_center(params)
    j0 = K - js.sum()
    if min(js[0], js[1], j0) < 0.25:
        raise NoConvergence("minimum lies at the boundary of the action simplex")

    def h(j):
        return h_reduced(ReducedState(0.0, 0.0, j[0], j[1], K), params)

    A = np.empty((2, 2))
    for i in range(2):
        for k in range(2):
            ei, ek = np.eye(2)[i] * eps, np.eye(2)[k] * eps
            A[i, k] = (h(js + ei + ek) - h(js + ei - ek) - h(js - ei + ek)
                       + h(js - ei - ek)) / (4 * eps**2)
    B = np.diag([params.k12 * np.sqrt(js[0] * j0), params.k23 * np.sqrt(js[1] * j0)])
    lam, U = np.linalg.eigh(A)
    if np.any(lam <= 0) or np.any(np.diag(B) <= 0):
        raise NoConvergence("expansion point is not a minimum")
    a_half = U @ np.diag(np.sqrt(lam)) @ U.T
    w2, R = np.linalg.eigh(a_half @ B @ a_half)
    T = R.T @ np.linalg.inv(a_half)
    q_dirs = np.linalg.inv(T).T
    # q = d sin(w t) needs p = A^-1 dq/dt ~ A^-1 d at q = 0
    p_dirs = np.linalg.solve(A, q_dirs.T).T
    p_dirs /= np.linalg.norm(p_dirs, axis=1)[:, None]
    return HarmonicExpansion(js, e_min - params.zero_point, A, B, np.sqrt(w2), T,
                             q_dirs, p_dirs)


@dataclass
class PeriodicOrbit:
    start: ReducedState
    period: float
    multipliers: np.ndarray  # monodromy eigenvalues in (psi1, psi2, J1, J2)
    closure: float

    @property
    def stability_index(self) -> float:
        """lambda + 1/lambda of the nontrivial multiplier pair."""
        return float(np.sum(self.multipliers).real - 2.0)

    @property
    def stable(self) -> bool:
        """Elliptic (|lambda + 1/lambda| < 2)."""
        return abs(self.stability_index) < 2.0


def _flow_reduced(state: ReducedState, params: ModelParams, t: float,
                  rtol: float = 1e-13) -> np.ndarray:
    """(psi1, psi2, J1, J2) after time t, angles continuous from the start."""
    sol = solve_ivp(real_rhs(params), (0.0, t), pack(amplitudes(state)), method="DOP853",
                    rtol=rtol, atol=rtol)
    if not sol.success:
        raise NoConvergence(sol.message)
    r = reduced_from_amplitudes(unpack(sol.y[:, -1]))[0]
    r[:2] = state.psi1 + _wrap(r[0] - state.psi1), state.psi2 + _wrap(r[1] - state.psi2)
    return r


def _monodromy(state: ReducedState, params: ModelParams, period: float,
               fd_step: float = 1e-6) -> np.ndarray:
    x = state.vector
    M = np.empty((4, 4))
    for k in range(4):
        dx = np.zeros(4)
        dx[k] = fd_step
        hi = _flow_reduced(ReducedState(*(x + dx), state.k_total), params, period)
        lo = _flow_reduced(ReducedState(*(x - dx), state.k_total), params, period)
        M[:, k] = (hi - lo) / (2 * fd_step)
    return M


def _on_reversal_set(guess: ReducedState, tol: float = 1e-9) -> bool:
    return all(min(abs(_wrap(a)), abs(_wrap(a - np.pi))) < tol for a in (guess.psi1, guess.psi2))


def find_periodic_orbit(guess: ReducedState, energy: float, params: ModelParams,
                        period_guess: float | None = None, shifted: bool = True,
                        tol: float = 1e-10, max_iter: int = 40) -> PeriodicOrbit:
    """Periodic orbit through the energy shell near ``guess``.

    A guess with both angles in {0, pi} is treated as a point on the
    fixed set of time reversal (psi -> -psi, t -> -t); the orbit is then found
    by shooting along the energy shell at those angles until the flow
    returns to the fixed set, which happens twice per period.  Other guesses
    go through a damped Newton iteration on the psi1 = 0 section map.
    """
    if _on_reversal_set(guess):
        if period_guess is None:
            raise ValueError("symmetric shooting needs period_guess")
        return _symmetric_orbit(guess, energy, params, period_guess, shifted, tol, max_iter)
    return _section_fixed_point(guess, energy, params, shifted, tol, max_iter)


def _symmetric_orbit(guess, energy, params, period_guess, shifted, tol, max_iter):
    K = params.k_total
    psi = (float(np.round(guess.psi1 / np.pi) * np.pi), float(np.round(guess.psi2 / np.pi) * np.pi))
    center, _ = _shell_center(params, psi)
    target = energy + _shift(params, shifted)

    def h(j):
        return h_reduced(ReducedState(psi[0], psi[1], j[0], j[1], K), params)

    def start(alpha):
        d = np.array([np.cos(alpha), np.sin(alpha)])
        # largest step keeping all actions positive
        lim = [(-center[i] / d[i]) if d[i] < 0 else np.inf for i in range(2)]
        lim.append((K - center.sum()) / d.sum() if d.sum() > 0 else np.inf)
        r_max = (1 - 1e-9) * min(lim)
        rs = np.linspace(0, r_max, 400)[1:]
        over = [r for r in rs if h(center + r * d) > target]
        if not over or h(center) > target:
            raise NoRoot(f"energy {energy} not reached along direction {alpha:.3f}")
        r = bisect(lambda r: h(center + r * d) - target, 0.0, over[0], xtol=1e-14)
        j = center + r * d
        return ReducedState(psi[0], psi[1], j[0], j[1], K)

    def resid(v):
        s = start(v[0])
        r = _flow_reduced(s, params, v[1])
        return np.array([np.sin(r[0]), np.sin(r[1])])

    j0 = np.array([guess.j1, guess.j2]) - center
    v = np.array([np.arctan2(j0[1], j0[0]), 0.5 * period_guess])
    r = resid(v)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            break
        jac = np.empty((2, 2))
        for k, hstep in enumerate((1e-7, 1e-7)):
            dv = np.zeros(2)
            dv[k] = hstep
            jac[:, k] = (resid(v + dv) - resid(v - dv)) / (2 * hstep)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        # damping: halve until the residual drops
        lam = 1.0
        while lam > 1e-3:
            try:
                trial = v + lam * step
                if trial[1] <= 0:
                    raise NoRoot("negative time")
                r_new = resid(trial)
                if np.max(np.abs(r_new)) < np.max(np.abs(r)):
                    break
            except (NoRoot, NoConvergence, DomainError):
                pass
            lam *= 0.5
        else:
            raise NoConvergence("symmetric shooting stalled")
        v, r = trial, r_new
    else:
        raise NoConvergence(f"symmetric shooting did not converge (|r|={np.abs(r).max():.2e})")
    s = start(v[0])
    half = _flow_reduced(s, params, v[1])
    # back at the starting point already: v[1] is a full period
    period = v[1] if np.max(np.abs(half[2:] - s.vector[2:])) < 1e-6 else 2 * v[1]
    end = _flow_reduced(s, params, period)
    closure = float(np.max(np.abs(np.concatenate([_wrap(end[:2] - s.vector[:2]),
                                                  end[2:] - s.vector[2:]]))))
    mults = np.linalg.eigvals(_monodromy(s, params, period))
    return PeriodicOrbit(s, float(period), mults, closure)


def _section_fixed_point(guess, energy, params, shifted, tol, max_iter, fd_step=1e-6):
    x = np.array([_wrap(guess.psi2), guess.j2], dtype=float)
    prev = guess.j1 if guess.j1 > 0 else None

    def residual(v):
        (p2, j2), t, s = section_map(v[0], v[1], energy, params, shifted, prev)
        return np.array([_wrap(p2 - v[0]), j2 - v[1]]), t, s

    r, period, seed = residual(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            break
        jac = np.empty((2, 2))
        for k in range(2):
            dx = np.zeros(2)
            dx[k] = fd_step
            jac[:, k] = (residual(x + dx)[0] - residual(x - dx)[0]) / (2 * fd_step)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-3:
            trial = x + lam * step
            trial[0] = _wrap(trial[0])
            try:
                out = residual(trial)
                if np.max(np.abs(out[0])) < np.max(np.abs(r)):
                    break
            except (NoRoot, NoConvergence, DomainError):
                pass
            lam *= 0.5
        else:
            raise NoConvergence("section-map Newton stalled")
        x = trial
        r, period, seed = out
        prev = seed.j1
    else:
        raise NoConvergence(f"no fixed point after {max_iter} Newton steps (|r|={np.abs(r).max():.2e})")
    end = _flow_reduced(seed, params, period)
    closure = float(np.max(np.abs(np.concatenate([_wrap(end[:2] - seed.vector[:2]),
                                                  end[2:] - seed.vector[2:]]))))
    mults = np.linalg.eigvals(_monodromy(seed, params, period))
    return PeriodicOrbit(seed, period, mults, closure)


def normal_mode_orbits(energy: float, params: ModelParams, shifted: bool = True) -> dict:
    """Continuations of the two small-oscillation modes to ``energy``.

    Returns {"diagonal": orbit, "antidiagonal": orbit}; the guesses come from
    the harmonic expansion (direction of J at psi = 0 and half the period).
    """
    hx = harmonic_expansion(params)
    out = {}
    for k in range(2):
        name = "diagonal" if k == hx.diagonal_mode else "antidiagonal"
        j = hx.j_min + 0.1 * hx.p_dirs[k]
        guess = ReducedState(0.0, 0.0, j[0], j[1], params.k_total)
        out[name] = find_periodic_orbit(guess, energy, params, hx.periods[k], shifted)
    return out


# --- global properties ------------------------------------------------------

def _simplex_point(u, K):
    a = np.clip(u[2], 0.0, 1.0)
    b = np.clip(u[3], 0.0, 1.0)
    j1 = K * a
    j2 = K * (1 - a) * b
    return ReducedState(u[0], u[1], j1, j2, K)


def energy_range(params: ModelParams, n_starts: int = 64, seed: int = 0,
                 paper_convention: bool = True) -> tuple[float, float]:
    """Global min and max of the reduced Hamiltonian by multi-start L-BFGS-B."""
    rng = np.random.default_rng(seed)
    K = params.k_total
    bounds = [(-np.pi, np.pi), (-np.pi, np.pi), (0.0, 1.0), (0.0, 1.0)]
    starts = np.column_stack([rng.uniform(-np.pi, np.pi, (n_starts, 2)),
                              rng.uniform(0, 1, (n_starts, 2))])
    # corners of the action simplex as extra starts
    extra = [(a, b, u, v) for a in (0.0, np.pi) for b in (0.0, np.pi)
             for u, v in ((1, 0), (0, 1), (0, 0), (0.5, 0.5))]
    starts = np.vstack([starts, extra])
    best = []
    for sign in (1.0, -1.0):
        def f(u):
            return sign * h_reduced(_simplex_point(u, K), params, paper_convention)
        vals = [minimize(f, s, method="L-BFGS-B", bounds=bounds).fun for s in starts]
        best.append(sign * min(vals))
    return best[0], best[1]


def divergence_factor(states, params: ModelParams, t_end: float = 1000.0,
                      delta: float = 1e-8, step: float = 0.02) -> np.ndarray:
    """Growth of a small amplitude-space separation over ``t_end`` for each start."""
    c0 = np.array([amplitudes(s) for s in states])
    kick = np.array([1.0, -1.0, 1.0]) * delta / np.sqrt(3)
    c1 = c0 + kick
    _, c = evolve_batch(np.vstack([c0, c1]), params, t_end, dt=t_end / 50, step=step)
    n = len(c0)
    sep = np.linalg.norm(c[:, :n] - c[:, n:], axis=2)
    return sep.max(axis=0) / delta


def chaotic_fraction(energy: float, params: ModelParams, n_seeds: int = 16, seed: int = 0,
                     t_end: float = 1000.0, factor: float = 1e4) -> float:
    """Fraction of random section seeds whose nearby-trajectory separation grows past ``factor``."""
    states = _random_seeds(energy, params, n_seeds, seed)
    if not states:
        return float("nan")
    return float(np.mean(divergence_factor(states, params, t_end) > factor))


def _random_seeds(energy, params, n_seeds, seed, max_tries: int = 2000):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        if len(out) == n_seeds:
            break
        psi2 = rng.uniform(-np.pi, np.pi)
        j2 = rng.uniform(0.0, params.k_total)
        try:
            out.append(poincare_seed(psi2, j2, energy, params))
        except NoRoot:
            continue
    return out


def chaotic_bands(energies, params: ModelParams, n_seeds: int = 16, seed: int = 0,
                  t_end: float = 1000.0, factor: float = 1e4,
                  min_fraction: float = 0.25) -> list[tuple[float, float]]:
    """Energy intervals where the chaotic seed fraction reaches ``min_fraction``.

    Consecutive grid energies flagged chaotic merge into one interval that
    extends halfway to the neighbouring unflagged grid points.
    """
    energies = np.sort(np.asarray(energies, dtype=float))
    all_states, owner = [], []
    for i, e in enumerate(energies):
        st = _random_seeds(e, params, n_seeds, seed + i)
        all_states += st
        owner += [i] * len(st)
    if not all_states:
        return []
    fac = divergence_factor(all_states, params, t_end)
    owner = np.array(owner)
    flag = np.array([np.mean(fac[owner == i] > factor) >= min_fraction if np.any(owner == i)
                     else False for i in range(len(energies))])
    mids = np.concatenate([[energies[0]], 0.5 * (energies[1:] + energies[:-1]), [energies[-1]]])
    bands, start = [], None
    for i, f in enumerate(flag):
        if f and start is None:
            start = mids[i]
        if not f and start is not None:
            bands.append((float(start), float(mids[i])))
            start = None
    if start is not None:
        bands.append((float(start), float(mids[-1])))
    return bands
