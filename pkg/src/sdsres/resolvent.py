"""Cut-off resolvents of P_ell and of the first-order wave generator L.

Kernels are sampled on a uniform grid covering the cutoff support and act on
functions through trapezoid weights. Operator norms conjugate by the square
roots of those weights so the matrix 2-norm approximates the L^2(dx) norm.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .jost import JostSolver


class NearResonanceWarning(RuntimeWarning):
    pass


class ContourError(ValueError):
    """A projector contour meets another resonance or the strip boundary."""


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        f1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return f0 / (f0 + f1)


@dataclass(frozen=True)
class CutoffFunction:
    """Smooth even bump: 1 on [-a/2, a/2], 0 outside [-a, a]."""

    a: float = 10.0

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return 1.0 - _smoothstep((x - self.a / 2) / (self.a / 2))

    def wider(self) -> "CutoffFunction":
        """Companion cutoff that equals 1 on the support of this one."""
        return CutoffFunction(2.0 * self.a)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass
class KernelMatrix:
    grid: np.ndarray
    values: np.ndarray
    lam: complex
    ell: int

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.values @ (self.weights * f)

    def l2_norm(self) -> float:
        s = np.sqrt(self.weights)
        return float(np.linalg.norm(s[:, None] * self.values * s[None, :], 2))


def kernel_from_jost(ep: np.ndarray, em: np.ndarray, w: complex) -> np.ndarray:
    """(e_+(x_>) e_-(x_<)) / w on a sorted grid."""
    n = len(ep)
    upper = np.triu(np.ones((n, n), dtype=bool))
    # rows index x, columns index y; x >= y takes e_+(x) e_-(y)
    K = np.where(upper.T, np.outer(ep, em), np.outer(em, ep))
    return K / w


class Resolvent:
    """Green kernels, cut-off norms and residue projectors for one geometry.

    Parameters
    ----------
    solver : JostSolver
        Jost solutions and Wronskian.
    a : float
        Half-width of the cutoff support.
    points : int
        Grid points on [-a, a].
    grid : array, optional
        Explicit uniform grid covering [-a, a]; overrides ``points``. Used to
        share nodes with a time-domain grid.
    """

    def __init__(self, solver: JostSolver | None = None, a: float = 10.0, points: int = 801,
                 near_tol: float = 1e-9, grid=None):
        self.solver = solver or JostSolver()
        self.chi = CutoffFunction(a)
        self.grid = np.linspace(-a, a, points) if grid is None else np.asarray(grid, dtype=float)
        self.weights = trapezoid_weights(self.grid)
        self.near_tol = near_tol
        self._cache: dict = {}

    def jost_pair(self, lam: complex, ell: int, grid=None):
        grid = self.grid if grid is None else grid
        key = (complex(lam), ell, id(grid) if grid is not self.grid else None)
        if key in self._cache:
            return self._cache[key]
        jp = self.solver.jost("plus", lam, ell, grid)
        jm = self.solver.jost("minus", lam, ell, grid)
        w = self.solver.w(lam, ell)
        out = (jp, jm, w)
        if len(self._cache) > 256:
            self._cache.clear()
        self._cache[key] = out
        return out

    def green_kernel(self, lam: complex, ell: int, grid=None) -> KernelMatrix:
        grid = self.grid if grid is None else np.asarray(grid, dtype=float)
        jp, jm, w = self.jost_pair(lam, ell, grid)
        ep, em = jp.e, jm.e
        # |w| relative to the size of e_+ e_- where the two are compared
        i0 = int(np.argmin(np.abs(grid)))
        scale = abs(ep[i0] * em[i0]) * (1.0 + abs(lam))
        if abs(w) < self.near_tol * scale:
            warnings.warn(f"lambda={lam} is near a resonance: |w|={abs(w):.3g}",
                          NearResonanceWarning, stacklevel=2)
        return KernelMatrix(grid, kernel_from_jost(ep, em, w), complex(lam), ell)

    def cutoff_kernel(self, lam: complex, ell: int) -> np.ndarray:
        chi = self.chi(self.grid)
        return chi[:, None] * self.green_kernel(lam, ell).values * chi[None, :]

    def cutoff_resolvent_norm(self, lam: complex, ell: int) -> float:
        """L^2 operator norm of chi (P_ell - lam^2)^{-1} chi."""
        K = self.cutoff_kernel(lam, ell)
        s = np.sqrt(self.weights)
        return float(np.linalg.norm(s[:, None] * K * s[None, :], 2))

    def residue_kernel(self, lam_j: complex, ell: int, radius: float = 1e-3) -> np.ndarray:
        """Residue of the P-resolvent kernel at a simple zero of w (analytic route)."""
        jp, jm, _ = self.jost_pair(lam_j, ell)
        wp = self.solver.w_derivative(lam_j, ell, radius)
        return kernel_from_jost(jp.e, jm.e, wp)

    def diagonal_jump(self, lam: complex, ell: int, x) -> np.ndarray:
        """(d_x R)(x+, x) - (d_x R)(x-, x) from exact Jost derivatives.

        Equals -1 for the kernel of (P - lam^2)^{-1} with P = -d_x^2 + Q.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        jp, jm, w = self.jost_pair(lam, ell, x)
        return (jp.e_prime * jm.e - jm.e_prime * jp.e) / w

    def _check_contour(self, lam_j, radius, others):
        if complex(lam_j).imag - radius <= -self.solver.strip_limit:
            raise ContourError(f"circle of radius {radius} about {lam_j} leaves the strip")
        for o in others or ():
            if abs(complex(o) - lam_j) <= radius * 1.5 and abs(complex(o) - lam_j) > 0:
                raise ContourError(f"circle about {lam_j} encloses or grazes resonance {o}")

    def projector(self, lam_j: complex, ell: int, radius: float = 0.01, n: int = 64,
                  others=None) -> dict[str, np.ndarray]:
        """Blocks of -(1/2 pi i) \\oint chi (L - lam)^{-1} chi d lam around lam_j.

        The (2,1) block's identity part is holomorphic and integrates to zero,
        so only kernel terms remain. Returns ``{"11", "12", "21", "22"}``.
        """
        self._check_contour(lam_j, radius, others)
        chi = self.chi(self.grid)
        cc = chi[:, None] * chi[None, :]
        blocks = {k: np.zeros((len(self.grid),) * 2, dtype=complex) for k in ("11", "12", "21", "22")}
        th = 2 * math.pi * np.arange(n) / n
        for t in th:
            lam = lam_j + radius * np.exp(1j * t)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NearResonanceWarning)
                R = cc * self.green_kernel(lam, ell).values
            dl = 1j * radius * np.exp(1j * t) * (2 * math.pi / n)
            blocks["11"] += lam * R * dl
            blocks["12"] += 1j * R * dl
            blocks["21"] += -1j * lam * lam * R * dl
            blocks["22"] += lam * R * dl
        f = -1.0 / (2j * math.pi)
        return {k: f * v for k, v in blocks.items()}

    def apply_blocks(self, blocks: dict[str, np.ndarray], u1: np.ndarray, u2: np.ndarray):
        w = self.weights
        a = blocks["11"] @ (w * u1) + blocks["12"] @ (w * u2)
        b = blocks["21"] @ (w * u1) + blocks["22"] @ (w * u2)
        return a, b

    def l_resolvent_apply(self, z: complex, ell: int, u1: np.ndarray, u2: np.ndarray,
                          outer: bool = True):
        """chi (L - z)^{-1} chi applied to (u1, u2) sampled on the grid.

        Uses (L - z)^{-1} = (P - z^2)^{-1} [[z, i], [-i P, z]] and
        (P - z^2)^{-1} P = 1 + z^2 (P - z^2)^{-1}.
        """
        chi = self.chi(self.grid)
        R = self.green_kernel(z, ell)
        f1, f2 = chi * u1, chi * u2
        Rf1, Rf2 = R.apply(f1), R.apply(f2)
        a = z * Rf1 + 1j * Rf2
        b = -1j * (f1 + z * z * Rf1) + z * Rf2
        if outer:
            a, b = chi * a, chi * b
        return a, b

    def l_resolvent_matrix(self, z: complex, ell: int) -> np.ndarray:
        """Matrix of chi (L - z)^{-1} chi acting on stacked grid samples (u1, u2)."""
        chi = self.chi(self.grid)
        K = chi[:, None] * self.green_kernel(z, ell).values * (chi * self.weights)[None, :]
        C2 = np.diag(chi * chi)
        return np.block([[z * K, 1j * K], [-1j * (C2 + z * z * K), z * K]])


def l_generator_apply(P: np.ndarray, u1: np.ndarray, u2: np.ndarray):
    """L (u1, u2) = (i u2, -i P u1) with P given as a matrix."""
    return 1j * u2, -1j * (P @ u1)


def emod_gram(A: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gram matrix of the discretized modified energy norm on (u0, u1).

    ``||u1||^2 + <P u0, u0> + int_0^1 |u0|^2`` with trapezoid weights; A is
    the symmetric finite-difference P, so ``<P u0, u0> ~ h u0.A.u0``.
    """
    w = trapezoid_weights(grid)
    in01 = (grid >= 0) & (grid <= 1)
    w01 = np.where(in01, w, 0.0)
    n = len(grid)
    h = grid[1] - grid[0]
    G = np.zeros((2 * n, 2 * n))
    G[:n, :n] = h * A + np.diag(w01)
    G[n:, n:] = np.diag(w)
    return G


def emod_operator_norm(T: np.ndarray, G: np.ndarray) -> float:
    """Operator norm of T in the inner product defined by the SPD Gram G."""
    Lc = np.linalg.cholesky(G)
    M = Lc.T @ T @ np.linalg.inv(Lc.T)
    return float(np.linalg.norm(M, 2))
