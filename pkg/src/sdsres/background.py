"""Exterior De Sitter--Schwarzschild geometry in the Regge--Wheeler coordinate.

All lengths are in the units of ``M``. The radial coordinate ``x`` satisfies
``dx/dr = 1/alpha^2`` and is anchored so that ``x = 0`` at the photon sphere
``r = 3M``; every x-dependent output is relative to that anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ParameterDomainError(ValueError):
    """Raised when (M, Lambda) lies outside 0 < 9 M^2 Lambda < 1."""


class CoordinateDomainError(ValueError):
    """Raised when a radius lies outside the open exterior (r_minus, r_plus)."""


class InversionError(ArithmeticError):
    """Raised when r(x) inversion fails to converge."""


def _cubic_roots(M: float, Lam: float) -> tuple[float, float, float]:
    # alpha^2 * r = -(Lam/3) (r - r1)(r - r2)(r - r3); roots of Lam r^3 - 3 r + 6 M
    roots = np.roots([Lam, 0.0, -3.0, 6.0 * M])
    roots = np.sort(roots.real)
    r3, rm, rp = roots
    # polish with Newton on the exact cubic
    out = []
    for r in (rm, rp, r3):
        for _ in range(50):
            f = Lam * r**3 - 3.0 * r + 6.0 * M
            df = 3.0 * Lam * r**2 - 3.0
            step = f / df
            r -= step
            if abs(step) <= 1e-16 * abs(r):
                break
        out.append(float(r))
    rm, rp, _ = out
    # the three roots sum to zero
    return rm, rp, -(rm + rp)


@dataclass(frozen=True)
class MetricParams:
    """Mass and cosmological constant with the derived horizon data.

    Parameters
    ----------
    M : float
        Black-hole mass (length units), ``M > 0``.
    Lam : float
        Cosmological constant (inverse length squared), ``Lam > 0``.
    """

    M: float = 1.0
    Lam: float = 0.04
    r_minus: float = field(init=False)
    r_plus: float = field(init=False)
    r_third: float = field(init=False)

    def __post_init__(self):
        M, Lam = float(self.M), float(self.Lam)
        if not (M > 0 and Lam > 0 and 9.0 * M * M * Lam < 1.0):
            raise ParameterDomainError(
                f"need M > 0, Lambda > 0 and 9 M^2 Lambda < 1; got M={M!r}, "
                f"Lambda={Lam!r} (9 M^2 Lambda = {9 * M * M * Lam!r})"
            )
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Lam", Lam)
        rm, rp, r3 = _cubic_roots(M, Lam)
        object.__setattr__(self, "r_minus", rm)
        object.__setattr__(self, "r_plus", rp)
        object.__setattr__(self, "r_third", r3)

    @property
    def kappa_minus(self) -> float:
        return abs(dalpha2_dr(self.r_minus, self))

    @property
    def kappa_plus(self) -> float:
        return abs(dalpha2_dr(self.r_plus, self))

    @property
    def z0(self) -> float:
        """Maximum of V, reached at r = 3M."""
        return (1.0 - 9.0 * self.Lam * self.M**2) / (27.0 * self.M**2)

    @property
    def lattice_constant(self) -> float:
        """(1 - 9 Lambda M^2)^(1/2) / (3^(3/2) M)."""
        return math.sqrt(1.0 - 9.0 * self.Lam * self.M**2) / (3.0**1.5 * self.M)

    def strip_limit(self, safety: float) -> float:
        """Depth of the Jost continuation strip, ``safety * min(kappa)/2``."""
        return safety * min(self.kappa_minus, self.kappa_plus) / 2.0

    def scaled(self, s: float) -> "MetricParams":
        """Dimensional rescaling M -> sM, Lambda -> Lambda/s^2."""
        return MetricParams(self.M * s, self.Lam / (s * s))


def horizon_radii(M: float, Lam: float) -> tuple[float, float]:
    """Return ``(r_minus, r_plus)``, the two positive roots of alpha^2."""
    p = MetricParams(M, Lam)
    return p.r_minus, p.r_plus


def alpha2(r, params: MetricParams):
    """alpha^2 = 1 - 2M/r - Lambda r^2 / 3 (works for complex r too)."""
    return 1.0 - 2.0 * params.M / r - params.Lam * r * r / 3.0


def dalpha2_dr(r, params: MetricParams):
    return 2.0 * params.M / (r * r) - 2.0 * params.Lam * r / 3.0


def decay_rates(params: MetricParams) -> tuple[float, float]:
    """Return ``(kappa_minus, kappa_plus)``: |d alpha^2/dr| at the horizons."""
    return params.kappa_minus, params.kappa_plus


class CoordinateMap:
    """Invertible monotone map between r in (r_minus, r_plus) and x in R.

    The closed form is the partial-fraction primitive of ``1/alpha^2`` over
    the three roots of the cubic, shifted so that ``x(3M) = 0``.
    """

    def __init__(self, params: MetricParams, rtol: float = 1e-13):
        self.params = params
        self.rtol = rtol
        p = params
        self.roots = (p.r_minus, p.r_plus, p.r_third)
        # 1/alpha^2 = sum_i A_i / (r - r_i), A_i = 1/(alpha^2)'(r_i)
        self.weights = tuple(1.0 / dalpha2_dr(ri, p) for ri in self.roots)
        self._shift = 0.0
        self._shift = -self._raw(3.0 * p.M)

    def _raw(self, r):
        return sum(A * np.log(np.abs(r - ri)) for A, ri in zip(self.weights, self.roots))

    def x_of_r(self, r):
        r = np.asarray(r, dtype=float)
        p = self.params
        if np.any((r <= p.r_minus) | (r >= p.r_plus)):
            raise CoordinateDomainError(
                f"r must lie in the open interval ({p.r_minus}, {p.r_plus})"
            )
        x = self._raw(r) + self._shift
        return float(x) if x.ndim == 0 else x

    def r_of_x(self, x):
        """Inverse map r(x) by safeguarded Newton on the horizon gap."""
        return self.gaps(x)[0]

    def gaps(self, x):
        """Return ``(r, r - r_minus, r_plus - r)`` at x.

        The gap to the nearer horizon is solved for in log scale, so it keeps
        full relative precision even when it underflows ``r``'s resolution.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        p = self.params
        rm, rp = p.r_minus, p.r_plus
        r = np.empty_like(x)
        dm = np.empty_like(x)
        dp = np.empty_like(x)
        right = x >= 0
        if np.any(right):
            d = self._solve_gap("plus", x[right])
            dp[right] = d
            r[right] = rp - d
            dm[right] = (rp - rm) - d
        if np.any(~right):
            d = self._solve_gap("minus", x[~right])
            dm[~right] = d
            r[~right] = rm + d
            dp[~right] = (rp - rm) - d
        if scalar:
            return float(r[0]), float(dm[0]), float(dp[0])
        return r, dm, dp

    def _solve_gap(self, side, x):
        p = self.params
        M = p.M
        if side == "plus":
            k, sgn, dmax, base = p.kappa_plus, -1.0, p.r_plus - 3.0 * M, p.r_plus
        else:
            k, sgn, dmax, base = p.kappa_minus, 1.0, 3.0 * M - p.r_minus, p.r_minus
        # F(u) = u + log g(r(e^u)) - sgn k x is increasing in u = log(gap)
        target = sgn * k * x
        u_hi = np.full_like(x, math.log(dmax))
        u = np.minimum(target - math.log(self.horizon_factor(side, 3.0 * M)), u_hi)
        u_lo = u - 60.0
        du = np.zeros_like(u)
        for _ in range(200):
            d = np.exp(u)
            r = base + sgn * d
            with np.errstate(invalid="ignore", divide="ignore"):
                F = u + np.log(self.horizon_factor(side, r)) - target
            F = np.where(np.isfinite(F), F, np.inf)
            u_hi = np.where(F > 0, u, u_hi)
            u_lo = np.where(F < 0, u, u_lo)
            dF = 1.0 + sgn * d * self._dlog_factor(side, r)
            un = u - F / dF
            bad = ~((un > u_lo) & (un < u_hi))
            un = np.where(bad, 0.5 * (u_lo + u_hi), un)
            du = np.abs(un - u)
            u = un
            if np.all(du <= self.rtol):
                break
        else:
            worst = int(np.argmax(du))
            raise InversionError(
                f"r(x) inversion did not converge at x={x[worst]!r} "
                f"(log-gap bracket [{u_lo[worst]!r}, {u_hi[worst]!r}])"
            )
        return np.exp(u)

    def _dlog_factor(self, side, r):
        # d/dr log horizon_factor(side, r)
        p = self.params
        rm, rp, r3 = self.roots
        Am, Ap, A3 = self.weights
        if side == "plus":
            return -p.kappa_plus * (Am / (r - rm) + A3 / (r - r3))
        return p.kappa_minus * (-Ap / (rp - r) + A3 / (r - r3))

    def alpha2(self, x):
        """alpha^2 at x from the factored cubic, accurate near both horizons."""
        r, dm, dp = self.gaps(x)
        p = self.params
        return p.Lam / 3.0 * dm * dp * (r - p.r_third) / r

    # near-horizon complex-analytic structure, used by the Jost series

    def horizon_factor(self, side: str, r):
        """Analytic g(r) with ``e^{-+kappa x} = |r - r_side| g(r)`` near a horizon.

        Accepts complex ``r`` near the horizon (principal-branch logs of the
        other two factors, which stay away from their branch cuts there).
        """
        p = self.params
        rm, rp, r3 = self.roots
        Am, Ap, A3 = self.weights
        if side == "plus":
            k = p.kappa_plus
            # -k x = log(rp - r) - k (Am log(r - rm) + A3 log(r - r3) + shift)
            return np.exp(-k * (Am * np.log(r - rm) + A3 * np.log(r - r3) + self._shift))
        k = p.kappa_minus
        # k x = log(r - rm) + k (Ap log(rp - r) + A3 log(r - r3) + shift)
        return np.exp(k * (Ap * np.log(rp - r) + A3 * np.log(r - r3) + self._shift))


def rw_coordinate(r, params: MetricParams):
    return CoordinateMap(params).x_of_r(r)


def rw_inverse(x, params: MetricParams):
    return CoordinateMap(params).r_of_x(x)


@dataclass
class PotentialPair:
    """Sampled V and W with the barrier-top data."""

    x: np.ndarray
    V: np.ndarray
    W: np.ndarray
    z0: float
    x0: float
    Vpp: float

    def total(self, ell: int) -> np.ndarray:
        return ell * (ell + 1) * self.V + self.W


def V_of_r(r, params: MetricParams):
    return alpha2(r, params) / (r * r)


def W_of_r(r, params: MetricParams):
    return alpha2(r, params) * dalpha2_dr(r, params) / r


def vpp_at_peak(params: MetricParams) -> float:
    """d^2V/dx^2 at r = 3M (exact: alpha^4 times d^2V/dr^2 since dV/dr = 0 there)."""
    M = params.M
    r = 3.0 * M
    # V(r) = 1/r^2 - 2M/r^3 - Lambda/3
    d2V_dr2 = 6.0 / r**4 - 24.0 * M / r**5
    return alpha2(r, params) ** 2 * d2V_dr2


def potentials(x, params: MetricParams, cmap: CoordinateMap | None = None) -> PotentialPair:
    """Evaluate V = alpha^2/r^2 and W = alpha^2 (d alpha^2/dr)/r at x."""
    cmap = cmap or CoordinateMap(params)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = cmap.r_of_x(x)
    a2 = cmap.alpha2(x)
    return PotentialPair(
        x=x,
        V=a2 / (r * r),
        W=a2 * dalpha2_dr(r, params) / r,
        z0=params.z0,
        x0=0.0,
        Vpp=vpp_at_peak(params),
    )


class Background:
    """Bundle of params, coordinate map and cached helpers for one geometry."""

    def __init__(self, params: MetricParams | None = None):
        self.params = params or MetricParams()
        self.cmap = CoordinateMap(self.params)

    @cached_property
    def c(self) -> float:
        return self.params.lattice_constant

    def r(self, x):
        return self.cmap.r_of_x(x)

    def x(self, r):
        return self.cmap.x_of_r(r)

    def alpha2(self, x):
        return self.cmap.alpha2(x)

    def V(self, x):
        return potentials(x, self.params, self.cmap).V

    def W(self, x):
        return potentials(x, self.params, self.cmap).W

    def Q(self, x, ell: int):
        """Full potential ell(ell+1) V + W of P_ell = -d^2/dx^2 + Q."""
        return potentials(x, self.params, self.cmap).total(ell)
