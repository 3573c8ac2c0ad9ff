"""Outgoing Jost solutions, the Wronskian and the zero-resonance constant.

The Jost solutions are handled through the reduced functions
``m_+(x) = e^{-i lam x} e_+(x)`` and ``m_-(x) = e^{i lam x} e_-(x)``, which
solve ``m'' +- 2 i lam m' = Q m`` with ``Q = l(l+1) V + W`` and tend to 1 at
their own end. Near each horizon ``Q`` is analytic in ``y = e^{-+kappa x}``,
so ``m`` is a convergent power series in ``y`` whose coefficients obey

    c_n n kappa (n kappa - 2 i lam) = sum_{k>=1} q_k c_{n-k},   c_0 = 1.

The series supplies exact boundary data at a moderate matching abscissa and
the ODE is integrated inward from there. The only singularities of the
recurrence are at ``lam = -i n kappa/2``, which bounds the usable strip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .background import Background, MetricParams, alpha2, dalpha2_dr

DEFAULT_STRIP_SAFETY = 0.98


class StripViolationError(ValueError):
    """Raised for a frequency at or below the Jost continuation strip."""


class JostNumericalError(ArithmeticError):
    """Raised when the inward integration or the series set-up fails."""


@dataclass
class JostEval:
    """Reduced Jost function sampled on a grid (``side`` is 'plus' or 'minus')."""

    lam: complex
    ell: int
    side: str
    grid: np.ndarray
    m: np.ndarray
    m_prime: np.ndarray
    x_cut: float

    @property
    def e(self) -> np.ndarray:
        s = 1 if self.side == "plus" else -1
        return np.exp(s * 1j * self.lam * self.grid) * self.m

    @property
    def e_prime(self) -> np.ndarray:
        s = 1 if self.side == "plus" else -1
        ph = np.exp(s * 1j * self.lam * self.grid)
        return ph * (s * 1j * self.lam * self.m + self.m_prime)


@dataclass
class WronskianValue:
    lam: complex
    ell: int
    w: complex
    x_match: float = 0.0


@dataclass(frozen=True)
class HorizonSeries:
    """Taylor data of V and W in y = exp(-+kappa x) near one horizon."""

    side: str
    kappa: float
    v: np.ndarray
    w: np.ndarray
    radius: float
    y_match: float
    x_match: float


def _r_of_y(bg: Background, side: str, y: np.ndarray) -> np.ndarray:
    # complex Newton on  gap * g(r) = y  with r = horizon -+ gap
    p, cm = bg.params, bg.cmap
    base, sgn = (p.r_plus, -1.0) if side == "plus" else (p.r_minus, 1.0)
    d = y / cm.horizon_factor(side, complex(base))
    with np.errstate(all="ignore"):
        return _r_of_y_newton(cm, base, sgn, d, y, side)


def _r_of_y_newton(cm, base, sgn, d, y, side):
    for _ in range(100):
        r = base + sgn * d
        g = cm.horizon_factor(side, r)
        F = d * g - y
        dF = g * (1.0 + sgn * d * cm._dlog_factor(side, r))
        step = F / dF
        d = d - step
        if np.all(np.abs(step) <= 1e-15 * np.abs(d)):
            break
    else:
        raise JostNumericalError(f"horizon series set-up failed on the {side} side")
    return base + sgn * d


def _taylor(bg: Background, side: str, rho: float, K: int):
    y = rho * np.exp(2j * np.pi * np.arange(K) / K)
    r = _r_of_y(bg, side, y)
    a2 = alpha2(r, bg.params)
    V = a2 / (r * r)
    W = a2 * dalpha2_dr(r, bg.params) / r
    # keep the lower half only: aliasing error there is O((rho/R)^(K/2))
    n = K // 2
    scale = rho ** -np.arange(n, dtype=float)
    return np.fft.fft(V)[:n] / K * scale, np.fft.fft(W)[:n] / K * scale


@lru_cache(maxsize=64)
def horizon_series(params: MetricParams, side: str, nterms: int = 48) -> HorizonSeries:
    """Taylor coefficients of V and W in ``y`` with a verified matching point."""
    bg = Background(params)
    kappa = params.kappa_plus if side == "plus" else params.kappa_minus
    sgn = -1.0 if side == "plus" else 1.0
    K = 2 * (nterms + 16)
    rho = 0.5
    for _ in range(30):
        try:
            v, w = _taylor(bg, side, rho, K)
        except JostNumericalError:
            v = w = None
        if v is not None and np.all(np.isfinite(v)) and np.all(np.isfinite(w)):
            break
        rho /= 2
    else:
        raise JostNumericalError(f"no convergent horizon series on the {side} side")
    v, w = v[: nterms + 1], w[: nterms + 1]
    n = np.arange(nterms + 1)
    # root-test radius estimate over coefficients still above the round-off floor
    c = np.abs(v[4:]) + np.abs(w[4:])
    floor = 1e-15 * (np.abs(v[0]) + np.abs(v[1]) + np.abs(w[1]) + 1e-300) * rho ** -n[4:]
    keep = c > 10 * floor
    radius = float(np.min(c[keep] ** (-1.0 / n[4:][keep]))) if np.any(keep) else rho
    radius = min(radius, rho)
    y_match = radius / 4.0
    for _ in range(40):
        x_match = sgn * math.log(y_match) / kappa
        ref = bg.V(x_match)[0], bg.W(x_match)[0]
        yp = y_match ** n
        if (abs(yp @ v - ref[0]) <= 1e-13 * abs(ref[0])
                and abs(yp @ w - ref[1]) <= 1e-13 * abs(ref[1]) + 1e-15 * abs(ref[0])):
            break
        y_match /= 1.5
    else:
        raise JostNumericalError(f"horizon series on the {side} side fails verification")
    return HorizonSeries(side, kappa, v.real.copy() if np.allclose(v.imag, 0, atol=1e-14) else v,
                         w.real.copy() if np.allclose(w.imag, 0, atol=1e-14) else w,
                         radius, y_match, x_match)


def series_coefficients(hs: HorizonSeries, lam: complex, ell: int) -> np.ndarray:
    q = ell * (ell + 1) * hs.v + hs.w
    N = len(q) - 1
    c = np.zeros(N + 1, dtype=complex)
    c[0] = 1.0
    for n in range(1, N + 1):
        denom = n * hs.kappa * (n * hs.kappa - 2j * lam)
        c[n] = np.dot(q[1 : n + 1], c[n - 1 :: -1]) / denom
    return c


def _series_eval(hs: HorizonSeries, c: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    sgn = -1.0 if hs.side == "plus" else 1.0
    y = np.exp(sgn * hs.kappa * x)
    n = np.arange(len(c))
    powers = y[..., None] ** n
    m = powers @ c
    mp = powers @ (sgn * n * hs.kappa * c)
    return m, mp


class JostSolver:
    """Jost solutions and Wronskian of P_ell for one background.

    Parameters
    ----------
    params : MetricParams
        Background geometry.
    strip_safety : float
        Fraction of ``min(kappa)/2`` admitted below the real axis.
    rtol : float
        Relative tolerance of the inward integration.
    free : bool
        Zero the potential (test fixture: then ``m == 1`` identically).
    """

    def __init__(self, params: MetricParams | None = None, strip_safety: float = DEFAULT_STRIP_SAFETY,
                 rtol: float = 1e-11, free: bool = False):
        self.bg = Background(params)
        self.params = self.bg.params
        self.strip_safety = strip_safety
        self.rtol = rtol
        self.free = free
        self._series = {s: horizon_series(self.params, s) for s in ("plus", "minus")}

    @property
    def strip_limit(self) -> float:
        return self.params.strip_limit(self.strip_safety)

    def check_strip(self, lam: complex) -> None:
        if complex(lam).imag <= -self.strip_limit:
            raise StripViolationError(
                f"Im lambda = {complex(lam).imag:.6g} is at or below the Jost strip "
                f"limit -{self.strip_limit:.6g}"
            )

    def x_cut(self, side: str) -> float:
        return self._series[side].x_match

    def _rhs(self, side: str, lam: complex, ell: int):
        p = self.params
        M, Lam = p.M, p.Lam
        L = ell * (ell + 1)
        s2 = 2j * lam if side == "plus" else -2j * lam

        def f(x, y):
            m, mp, r = y
            a2 = 1.0 - 2.0 * M / r - Lam * r * r / 3.0
            Q = (L * a2 / r + a2 * (2.0 * M / (r * r) - 2.0 * Lam * r / 3.0)) / r
            return np.array([mp, Q * m - s2 * mp, a2])

        return f

    def jost(self, side: str, lam: complex, ell: int, grid) -> JostEval:
        """Sample the reduced Jost function ``m_side(x, lam)`` on ``grid``."""
        if side not in ("plus", "minus"):
            raise ValueError(f"side must be 'plus' or 'minus', not {side!r}")
        lam = complex(lam)
        self.check_strip(lam)
        grid = np.asarray(grid, dtype=float)
        hs = self._series[side]
        xm = hs.x_match
        if self.free:
            return JostEval(lam, ell, side, grid, np.ones(grid.shape, complex),
                            np.zeros(grid.shape, complex), xm)
        m = np.empty(grid.shape, dtype=complex)
        mp = np.empty(grid.shape, dtype=complex)
        c = series_coefficients(hs, lam, ell)
        outer = grid >= xm if side == "plus" else grid <= xm
        if np.any(outer):
            m[outer], mp[outer] = _series_eval(hs, c, grid[outer])
        inner = ~outer
        if np.any(inner):
            m0, mp0 = _series_eval(hs, c, xm)
            r0 = self.bg.r(xm)
            pts = grid[inner]
            end = pts.min() if side == "plus" else pts.max()
            sol = solve_ivp(self._rhs(side, lam, ell), (xm, end),
                            np.array([m0, mp0, r0], dtype=complex), method="DOP853",
                            rtol=self.rtol, atol=1e-14, dense_output=True)
            if not sol.success:
                raise JostNumericalError(
                    f"inward integration failed for side={side}, lam={lam}, ell={ell}: {sol.message}"
                )
            vals = sol.sol(pts)
            m[inner], mp[inner] = vals[0], vals[1]
        return JostEval(lam, ell, side, grid, m, mp, xm)

    def _at(self, side, lam, ell, x):
        je = self.jost(side, lam, ell, np.array([float(x)]))
        return je.m[0], je.m_prime[0]

    def wronskian(self, lam: complex, ell: int, x_match: float = 0.0) -> WronskianValue:
        """w = e_-' e_+ - e_+' e_- evaluated at ``x_match``."""
        lam = complex(lam)
        mp_, dmp = self._at("plus", lam, ell, x_match)
        mm, dmm = self._at("minus", lam, ell, x_match)
        # the e^{+-i lam x} phases cancel between the two products
        w = -2j * lam * mp_ * mm + dmm * mp_ - dmp * mm
        return WronskianValue(lam, ell, complex(w), x_match)

    def w(self, lam: complex, ell: int) -> complex:
        return self.wronskian(lam, ell).w

    def w_derivative(self, lam0: complex, ell: int, radius: float, n: int = 64) -> complex:
        """w'(lam0) by trapezoid quadrature of w(lam)/(lam-lam0)^2 on a circle."""
        if complex(lam0).imag - radius <= -self.strip_limit:
            raise StripViolationError(
                f"derivative circle of radius {radius} around {lam0} leaves the strip"
            )
        th = 2 * np.pi * np.arange(n) / n
        pts = lam0 + radius * np.exp(1j * th)
        vals = np.array([self.w(z, ell) for z in pts])
        return complex(np.mean(vals * np.exp(-1j * th)) / radius)


def gamma_constant(solver: JostSolver, radius: float = 0.01, n: int = 64) -> tuple[float, complex]:
    """Return ``(gamma, w'(0))`` for ell = 0, gamma = 1/(i w'(0) r_+ r_-).

    Raises ``StripViolationError`` if the circle leaves the strip and
    ``ArithmeticError`` if gamma fails to be real and positive.
    """
    p = solver.params
    wp = solver.w_derivative(0.0, 0, radius, n)
    g = 1.0 / (1j * wp * p.r_plus * p.r_minus)
    if not (abs(g.imag) < 1e-8 * abs(g) and g.real > 0):
        raise ArithmeticError(f"gamma = {g!r} is not real positive (w'(0) = {wp!r})")
    return float(g.real), wp


def second_solution(x, bg: Background) -> np.ndarray:
    """r(x) * int_0^x r(t)^-2 dt, the growing ell = 0 static solution."""
    from scipy.integrate import quad

    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    f = lambda t: bg.r(t) ** -2
    for i, xi in enumerate(x):
        out[i] = bg.r(xi) * quad(f, 0.0, xi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return out
