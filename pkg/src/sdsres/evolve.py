"""Time-domain wave evolution for one angular mode, energies and ringdown fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares

from .background import Background


class CFLError(ValueError):
    pass


class DivergenceError(ArithmeticError):
    pass


class RankWarning(RuntimeWarning):
    pass


@dataclass
class FieldState:
    grid: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    time: float = 0.0
    ell: int = 0

    def __post_init__(self):
        if not (len(self.u) == len(self.ut) == len(self.grid)):
            raise ValueError("u, ut and grid lengths differ")

    def scaled(self, s: float) -> "FieldState":
        return FieldState(self.grid, s * self.u, s * self.ut, self.time, self.ell)


@dataclass
class EnergyReport:
    E: float
    E_mod: float
    time: float


@dataclass
class Trajectory:
    """Probe series plus snapshots taken at ``snapshot_times``."""

    t: np.ndarray
    probe_u: np.ndarray
    probe_ut: np.ndarray
    probe_x: float
    snapshots: list[FieldState] = field(default_factory=list)


def uniform_grid(X: float, points: int) -> np.ndarray:
    return np.linspace(-X, X, points)


def discretize(ell: int, grid: np.ndarray, bg: Background | None = None) -> sp.csr_matrix:
    """Symmetric second-order discretization of P_ell on a uniform grid.

    Differences the factored form -r^{-1} d/dx r^2 d/dx r^{-1} with r^2 at
    half points and adds l(l+1) V on the diagonal. The ends carry the natural
    (zero flux of u/r) closure, so the matrix is symmetric positive
    semidefinite and annihilates samples of r exactly when ell = 0.
    """
    bg = bg or Background()
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-9, atol=0):
        raise ValueError("discretize needs a uniform grid")
    r = bg.r(grid)
    rh2 = bg.r(0.5 * (grid[1:] + grid[:-1])) ** 2
    n = len(grid)
    D = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
    Rinv = sp.diags(1.0 / r)
    A = Rinv @ D.T @ sp.diags(rh2) @ D @ Rinv
    if ell:
        A = A + sp.diags(ell * (ell + 1) * bg.V(grid))
    A = sp.csr_matrix(A)
    # exact symmetrization removes round-off asymmetry from the products
    return sp.csr_matrix((A + A.T) / 2)


class WaveEvolver:
    """Leapfrog for u_tt = -P_ell u with first-order outgoing boundaries.

    The boundary condition is ``u_t = -+ r d/dx(u/r)`` at ``x = +-X``: the
    Sommerfeld condition corrected by ``alpha^2/r``, so the static ell = 0
    solution ``r`` is not drained through the ends.

    Parameters
    ----------
    ell : int
        Angular index.
    X : float
        Half-width of the truncated domain.
    points : int
        Number of grid points on [-X, X].
    free : bool
        Drop the potential entirely (P = -d^2/dx^2).
    """

    def __init__(self, ell: int, X: float = 60.0, points: int = 4096, bg: Background | None = None,
                 free: bool = False):
        self.ell = ell
        self.bg = bg or Background()
        self.grid = uniform_grid(X, points)
        self.h = self.grid[1] - self.grid[0]
        self.free = free
        n = points
        if free:
            main = np.full(n, 2.0)
            main[0] = main[-1] = 1.0
            self.A = sp.csr_matrix(sp.diags([-np.ones(n - 1), main, -np.ones(n - 1)], [-1, 0, 1]) / self.h**2)
            self.Qb = (0.0, 0.0)
            self.beta = (0.0, 0.0)
        else:
            self.A = discretize(ell, self.grid, self.bg)
            Q = self.bg.Q(self.grid[[0, -1]], ell)
            self.Qb = (float(Q[0]), float(Q[1]))
            # boundary condition u_t = -+ r d/dx (u/r) keeps the static ell = 0 mode r exact
            ends = self.grid[[0, -1]]
            b = self.bg.alpha2(ends) / self.bg.r(ends)
            self.beta = (float(b[0]), float(b[1]))

    def energies(self, state: FieldState, chi=None) -> EnergyReport:
        return energies(state, self.A, chi)

    def evolve(self, initial: FieldState, T: float, dt: float, probe: float = 8.0,
               snapshot_times=(), check_every: int = 256) -> tuple[FieldState, Trajectory]:
        """Integrate to time T; returns the final state and the probe trajectory."""
        h = self.h
        if dt > 0.9 * h:
            raise CFLError(f"dt={dt} violates dt <= 0.9 h = {0.9 * h}")
        if not np.allclose(initial.grid, self.grid):
            raise ValueError("initial state lives on a different grid")
        nsteps = int(round(T / dt))
        A = self.A
        a = dt / h
        dt2 = dt * dt
        ip = int(np.argmin(np.abs(self.grid - probe)))
        u_prev = initial.u.astype(float).copy()
        # second-order Taylor start
        u = u_prev + dt * initial.ut - 0.5 * dt2 * (A @ u_prev)
        t_series = np.arange(nsteps + 1) * dt
        pu = np.empty(nsteps + 1)
        put = np.empty(nsteps + 1)
        pu[0], put[0] = u_prev[ip], initial.ut[ip]
        snaps = sorted(float(s) for s in snapshot_times)
        snapshots: list[FieldState] = []
        while snaps and snaps[0] <= 0.5 * dt:
            snapshots.append(FieldState(self.grid, u_prev.copy(), initial.ut.copy(), 0.0, self.ell))
            snaps.pop(0)
        Q0, QN = self.Qb
        b0, bN = 2.0 * a * a * h * self.beta[0], 2.0 * a * a * h * self.beta[1]
        ut = initial.ut
        for k in range(1, nsteps + 1):
            u_next = 2.0 * u - u_prev - dt2 * (A @ u)
            # outgoing conditions at x = +-X by ghost-point elimination
            u_next[0] = (2.0 * u[0] - (1.0 - a) * u_prev[0] + 2.0 * a * a * (u[1] - u[0])
                         - b0 * u[0] - dt2 * Q0 * u[0]) / (1.0 + a)
            u_next[-1] = (2.0 * u[-1] - (1.0 - a) * u_prev[-1] + 2.0 * a * a * (u[-2] - u[-1])
                          + bN * u[-1] - dt2 * QN * u[-1]) / (1.0 + a)
            ut = (u_next - u_prev) / (2.0 * dt)
            pu[k], put[k] = u[ip], ut[ip]
            while snaps and snaps[0] <= (k + 0.5) * dt:
                snapshots.append(FieldState(self.grid, u.copy(), ut.copy(), k * dt, self.ell))
                snaps.pop(0)
            if k % check_every == 0 and not np.isfinite(u_next.sum()):
                raise DivergenceError(f"non-finite field at step {k} (t={k * dt:.6g})")
            if k < nsteps:
                u_prev, u = u, u_next
        if not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite field at step {nsteps}")
        final = FieldState(self.grid, u.copy(), ut.copy(), nsteps * dt, self.ell)
        traj = Trajectory(t_series, pu, put, float(self.grid[ip]), snapshots)
        return final, traj


def energies(state: FieldState, A, chi=None) -> EnergyReport:
    """E = ||u_t||^2 + <P u, u>; E_mod adds int_0^1 |u|^2. chi is applied first."""
    g = state.grid
    h = g[1] - g[0]
    u, ut = state.u, state.ut
    if chi is not None:
        c = chi(g)
        u, ut = c * u, c * ut
    w = np.full(len(g), h)
    w[0] = w[-1] = h / 2
    kin = float(np.sum(w * ut * ut))
    pot = float(h * u @ (A @ u))
    m = (g >= 0) & (g <= 1)
    w01 = np.where(m, w, 0.0)
    if m.any():
        idx = np.nonzero(m)[0]
        w01[idx[0]] = w01[idx[-1]] = h / 2
    extra = float(np.sum(w01 * u * u))
    E = kin + pot
    return EnergyReport(E, E + extra, state.time)


@dataclass
class FittedMode:
    lam: complex
    amplitude: complex
    residual: float


def _pair_basis(t, lams):
    cols = []
    for lam in lams:
        env = np.exp(lam.imag * t)
        if abs(lam.real) < 1e-12:
            cols.append(env)
        else:
            cols.append(env * np.cos(lam.real * t))
            cols.append(env * np.sin(lam.real * t))
    return np.column_stack(cols)


def _matrix_pencil(t, y, n_exp):
    """Initial complex exponents s_k (y ~ sum c_k e^{s_k t}) from a matrix pencil."""
    dt = t[1] - t[0]
    L = len(y) // 2
    H = np.lib.stride_tricks.sliding_window_view(y, L + 1)
    Y0, Y1 = H[:, :-1], H[:, 1:]
    U, s, Vh = np.linalg.svd(Y0, full_matrices=False)
    k = min(n_exp, len(s))
    Uk, sk, Vk = U[:, :k], s[:k], Vh[:k].conj().T
    Z = np.diag(1 / sk) @ Uk.conj().T @ Y1 @ Vk
    z = np.linalg.eigvals(Z)
    return np.log(z.astype(complex)) / dt


def ringdown_fit(t, y, t_window=None, n_modes: int = 1, decimate: int | None = None) -> list[FittedMode]:
    """Variable-projection least squares over damped real oscillations.

    The model is ``sum_k Re(A_k e^{-i lam_k t})`` with ``Re lam_k >= 0`` and
    ``Im lam_k < 0``; amplitudes are eliminated by linear least squares.
    Returns the modes sorted by decreasing amplitude at the window start.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t_window is not None:
        m = (t >= t_window[0]) & (t <= t_window[1])
        t, y = t[m], y[m]
    if decimate is None:
        decimate = max(1, len(t) // 1500)
    t, y = t[::decimate], y[::decimate]
    t0 = t[0]
    tt = t - t0
    scale = np.max(np.abs(y)) or 1.0
    yy = y / scale
    s = _matrix_pencil(tt, yy, 2 * n_modes)
    # keep one member of each conjugate pair, decaying, largest contributions first
    cands = []
    for sk in s:
        lam = 1j * sk  # e^{s t} = e^{-i lam t}
        lam = complex(abs(lam.real), lam.imag)
        if not any(abs(lam - c) < 1e-6 * max(1, abs(lam)) for c in cands):
            cands.append(lam)
    cands = sorted(cands, key=lambda z: -z.imag)[:n_modes] if len(cands) > n_modes else cands
    while len(cands) < n_modes:
        cands.append(complex(0.5 * (len(cands) + 1), -0.05))
    p0 = np.ravel([[c.real, c.imag] for c in cands])

    def lams_of(p):
        return [complex(p[2 * k], p[2 * k + 1]) for k in range(n_modes)]

    def resid(p):
        B = _pair_basis(tt, lams_of(p))
        coef, *_ = np.linalg.lstsq(B, yy, rcond=None)
        return B @ coef - yy

    sol = least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    lams = lams_of(sol.x)
    B = _pair_basis(tt, lams)
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > 1e10:
        warnings.warn(f"ill-conditioned exponential basis (cond={cond:.3g})", RankWarning, stacklevel=2)
    coef, *_ = np.linalg.lstsq(B, yy, rcond=None)
    rms = float(np.sqrt(np.mean((B @ coef - yy) ** 2)))
    out = []
    i = 0
    for lam in lams:
        if abs(lam.real) < 1e-12:
            A = complex(coef[i])
            i += 1
        else:
            # c cos + s sin = Re((c + i s) e^{-i w t}) with w = Re lam
            A = complex(coef[i], coef[i + 1])
            i += 2
        # amplitude referenced to absolute time t = 0
        A = A * scale * np.exp(1j * lam * t0)
        lam = complex(lam.real, lam.imag)
        out.append(FittedMode(lam, A, rms * scale))
    out.sort(key=lambda f: -abs(f.amplitude * np.exp(-1j * f.lam * t0)))
    return out
