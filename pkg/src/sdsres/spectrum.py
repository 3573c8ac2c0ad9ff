"""Locating zeros of the Wronskian: argument principle, subdivision, Newton.

Also carries the pseudo-pole lattice used as an asymptotic oracle and the
zone labels used by resolvent sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .background import MetricParams, vpp_at_peak
from .jost import JostSolver


class BoxTouchesZeroError(ArithmeticError):
    """A counting contour passes too close to a zero of w."""


@dataclass
class LatticePoint:
    ell: int
    j: int
    mu: complex


@dataclass
class Resonance:
    lam: complex
    ell: int
    order: int = 1
    source: str = "searched"
    residual: float = float("nan")
    box: tuple[float, float, float, float] | None = None
    converged: bool = True

    def as_dict(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "ell": self.ell,
            "order": self.order,
            "source": self.source,
            "residual": self.residual,
            "converged": self.converged,
            "box": list(self.box) if self.box else None,
        }


def lattice_pseudo_poles(params: MetricParams, ell: int, j_max: int) -> list[LatticePoint]:
    """c (ell + 1/2 - i (j + 1/2)/2) for j = 0..j_max (positive-real branch)."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    c = params.lattice_constant
    return [LatticePoint(ell, j, c * complex(ell + 0.5, -(j + 0.5) / 2.0)) for j in range(j_max + 1)]


def barrier_top_lattice(params: MetricParams, ell: int, j_max: int) -> list[complex]:
    """Semiclassical barrier-top points mapped to the lam plane.

    With ``h = (l(l+1))^{-1/2}`` the inverted oscillator at the top of V gives
    ``z_j = z0 - i h sqrt(|V''(0)|/2) (2j+1)`` for the rescaled operator, and
    ``lam_j = sqrt(z_j)/h``.
    """
    if ell < 1:
        raise ValueError("the rescaling needs ell >= 1")
    h = 1.0 / math.sqrt(ell * (ell + 1))
    s = math.sqrt(abs(vpp_at_peak(params)) / 2.0)
    return [np.sqrt(complex(params.z0, -h * s * (2 * j + 1))) / h for j in range(j_max + 1)]


def zone_classify(lam: complex, ell: int, R: float) -> str:
    """Zone label I-IV of ``lam`` for angular index ``ell``.

    Intervals in ``|Re lam|`` are left-closed, right-open. Points with
    ``|lam| < R`` or ``|Re lam| < R`` are zone I.
    """
    if R <= 1:
        raise ValueError("R must exceed 1")
    lam = complex(lam)
    a = abs(lam.real)
    if abs(lam) < R or a < R:
        return "I"
    if a < ell / R:
        return "II"
    if a < R * ell:
        return "III"
    return "IV"


# contour machinery

def _box_edges(box):
    re0, re1, im0, im1 = box
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    return [(corners[k], corners[(k + 1) % 4]) for k in range(4)]


class WindingCounter:
    """Adaptive phase tracking of an analytic function along a closed contour."""

    def __init__(self, f, initial: int = 12, max_dphase: float = 0.6, floor: float = 1e-10,
                 max_points: int = 20000):
        self.f = f
        self.initial = initial
        self.max_dphase = max_dphase
        self.floor = floor
        self.max_points = max_points
        self.cache: dict[complex, complex] = {}
        self.evaluations = 0

    def _val(self, z):
        z = complex(z)
        if z not in self.cache:
            self.cache[z] = complex(self.f(z))
            self.evaluations += 1
        return self.cache[z]

    def _track(self, param, t0, t1):
        """Accumulated phase change and the smallest local |f| ratio on one piece.

        Each sample is compared with the largest |f| among the coarse nodes
        bracketing it, so growth of |f| along a long contour does not trip the
        guard while a zero on or next to the contour does.
        """
        ts = list(np.linspace(t0, t1, self.initial + 1))
        vals = [self._val(param(t)) for t in ts]
        mags = [abs(v) for v in vals]
        scale = [max(mags[max(k - 1, 0):k + 2]) for k in range(len(mags))]
        total = 0.0
        i = 0
        n_points = len(ts)
        while i < len(ts) - 1:
            a, b = vals[i], vals[i + 1]
            if a == 0 or b == 0:
                raise BoxTouchesZeroError("contour passes through a zero")
            d = np.angle(b / a)
            # |d log f| bounds the step; phase and log-modulus vary at the same rate
            step = math.hypot(d, math.log(abs(b) / abs(a)))
            if step > self.max_dphase and ts[i + 1] - ts[i] > 1e-12 * abs(t1 - t0):
                tm = 0.5 * (ts[i] + ts[i + 1])
                ts.insert(i + 1, tm)
                vals.insert(i + 1, self._val(param(tm)))
                scale.insert(i + 1, max(scale[i], scale[i + 1]))
                n_points += 1
                if n_points > self.max_points:
                    raise BoxTouchesZeroError("phase tracking did not resolve the contour")
                continue
            total += d
            i += 1
        worst = min(abs(v) / sc for v, sc in zip(vals, scale))
        return total, worst

    def count_pieces(self, pieces) -> int:
        total, worst = 0.0, math.inf
        for param, t0, t1 in pieces:
            d, w = self._track(param, t0, t1)
            total += d
            worst = min(worst, w)
        if worst < self.floor:
            raise BoxTouchesZeroError(
                f"|w| on the contour falls to {worst:.3g} of its local scale (floor {self.floor:g})"
            )
        n = total / (2 * math.pi)
        k = int(round(n))
        if abs(n - k) > 0.05:
            raise BoxTouchesZeroError(f"non-integer winding number {n:.4f}")
        return k

    def count_box(self, box) -> int:
        pieces = [((lambda t, a=a, b=b: a + t * (b - a)), 0.0, 1.0) for a, b in _box_edges(box)]
        return self.count_pieces(pieces)

    def count_circle(self, center: complex, radius: float) -> int:
        param = lambda t: center + radius * np.exp(1j * t)
        return self.count_pieces([(param, 0.0, 2 * math.pi)])


class ResonanceFinder:
    """Search for Wronskian zeros of P_ell inside boxes of the lam plane.

    Parameters
    ----------
    solver : JostSolver
        Supplies ``w(lam, ell)`` and the strip limit.
    newton_tol : float
        Step-size tolerance of the Newton refinement.
    floor : float
        Relative boundary guard for winding numbers.
    """

    def __init__(self, solver: JostSolver | None = None, newton_tol: float = 1e-12,
                 floor: float = 1e-10, min_box: float = 1e-4, quad_points: int = 32):
        self.solver = solver or JostSolver()
        self.newton_tol = newton_tol
        self.floor = floor
        self.min_box = min_box
        self.quad_points = quad_points

    def _counter(self, ell):
        return WindingCounter(lambda z: self.solver.w(z, ell), floor=self.floor)

    def _check_box(self, box):
        re0, re1, im0, im1 = box
        if not (re1 > re0 and im1 > im0):
            raise ValueError(f"degenerate box {box}")
        self.solver.check_strip(complex(re0, im0))

    def count_zeros(self, ell: int, box) -> int:
        """Number of zeros of w (with multiplicity) inside ``box``."""
        box = tuple(float(b) for b in box)
        self._check_box(box)
        return self._counter(ell).count_box(box)

    def derivative(self, z: complex, ell: int, radius: float) -> complex:
        return self.solver.w_derivative(z, ell, radius, self.quad_points)

    def newton(self, ell: int, z: complex, box, max_iter: int = 40) -> tuple[complex, bool]:
        re0, re1, im0, im1 = box
        size = max(re1 - re0, im1 - im0)
        inside = lambda q: (re0 - size <= q.real <= re1 + size and im0 - size <= q.imag <= im1 + size)
        for _ in range(max_iter):
            margin = z.imag + self.solver.strip_limit
            if margin <= 0:
                return z, False
            radius = min(size / 4.0, 0.5 * margin, 0.05)
            wz = self.solver.w(z, ell)
            dz = wz / self.derivative(z, ell, radius)
            z = z - dz
            if not inside(z):
                return z, False
            if abs(dz) <= self.newton_tol * max(1.0, abs(z)):
                return z, True
        return z, False

    def order_at(self, ell: int, z: complex, radius: float) -> int:
        return self._counter(ell).count_circle(z, radius)

    def find_resonances(self, ell: int, region, max_depth: int = 14) -> list[Resonance]:
        """All zeros of w in ``region = (re0, re1, im0, im1)``.

        A region whose edge grazes a zero is padded outward until the
        boundary guard passes.
        """
        region = tuple(float(b) for b in region)
        self._check_box(region)
        counter = self._counter(ell)
        region = self._settle_region(counter, region)
        out: list[Resonance] = []
        queue = [(region, counter.count_box(region), 0)]
        while queue:
            box, n, depth = queue.pop()
            if n == 0:
                continue
            re0, re1, im0, im1 = box
            size = max(re1 - re0, im1 - im0)
            if n == 1 or depth >= max_depth or size < self.min_box:
                out.extend(self._refine(ell, box, n, counter))
                continue
            for sub in self._split(counter, box):
                queue.append((sub, counter.count_box(sub), depth + 1))
        out = _dedupe(out, 1e-8)
        out.sort(key=lambda r: (r.lam.real, r.lam.imag))
        return out

    def _settle_region(self, counter, region):
        re0, re1, im0, im1 = region
        pad = 1e-3 * max(re1 - re0, im1 - im0)
        for k in range(8):
            try:
                counter.count_box(region)
                return region
            except BoxTouchesZeroError:
                lo = max(im0 - pad * (k + 1), -self.solver.strip_limit * 0.999)
                region = (re0 - pad * (k + 1), re1 + pad * (k + 1), lo, im1 + pad * (k + 1))
        counter.count_box(region)
        return region

    def _split(self, counter, box):
        re0, re1, im0, im1 = box
        for frac in (0.5, 0.4637, 0.5371, 0.4129, 0.5833):
            if re1 - re0 >= im1 - im0:
                m = re0 + frac * (re1 - re0)
                subs = [(re0, m, im0, im1), (m, re1, im0, im1)]
            else:
                m = im0 + frac * (im1 - im0)
                subs = [(re0, re1, im0, m), (re0, re1, m, im1)]
            try:
                for s in subs:
                    counter.count_box(s)
                return subs
            except BoxTouchesZeroError:
                continue
        raise BoxTouchesZeroError(f"could not split box {box} away from zeros")

    def _refine(self, ell, box, n, counter) -> list[Resonance]:
        re0, re1, im0, im1 = box
        z0 = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
        z, ok = self.newton(ell, z0, box)
        inside = ok and re0 <= z.real <= re1 and im0 <= z.imag <= im1
        if not inside:
            return [Resonance(z0, ell, order=n, residual=float("nan"), box=box, converged=False)]
        size = min(re1 - re0, im1 - im0)
        margin = z.imag + self.solver.strip_limit
        radius = min(0.25 * size, 0.5 * margin, 1e-2)
        try:
            order = self.order_at(ell, z, radius)
        except BoxTouchesZeroError:
            order = n
        res = abs(self.solver.w(z, ell))
        return [Resonance(z, ell, order=order, residual=res, box=box)]


def _dedupe(res: list[Resonance], tol: float) -> list[Resonance]:
    out: list[Resonance] = []
    for r in res:
        if any(abs(r.lam - o.lam) <= tol * max(1.0, abs(o.lam)) for o in out):
            continue
        out.append(r)
    return out


def normalized_residual(solver: JostSolver, lam: complex, ell: int) -> float:
    """|w(lam)| in free-normalization units: |w| / (<lam> * scale).

    The scale is |w| at a reference point on the real axis, which removes the
    ell-dependent growth of the reduced Jost normalization.
    """
    ref = abs(solver.w(complex(abs(lam.real) + 0.5, 0.0), ell))
    return abs(solver.w(lam, ell)) / (ref * math.sqrt(1.0 + abs(lam) ** 2))


def nearest_lattice(params: MetricParams, lam: complex, ell: int, j_max: int = 3) -> tuple[complex, float]:
    pts = lattice_pseudo_poles(params, ell, j_max)
    mus = [p.mu if lam.real >= 0 else -p.mu.conjugate() for p in pts]
    d = [abs(lam - m) for m in mus]
    k = int(np.argmin(d))
    return mus[k], d[k]
