"""Truncated resonance expansion of the cut-off propagator and its residual."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .evolve import FieldState, Trajectory, discretize
from .resolvent import Resolvent, emod_gram


class PairingError(ValueError):
    """Synthesized field has an imaginary part that pairing should cancel."""


@dataclass
class ExpansionTerm:
    lam: complex
    ell: int
    blocks: dict
    k: int = 0
    source: str = "searched"


@dataclass
class ResidualReport:
    times: np.ndarray
    residual: np.ndarray
    signal: np.ndarray
    mu_target: float
    slope: float
    intercept: float
    r2: float
    window: tuple[float, float]
    floor: float
    floor_limited: bool
    signal_slope: float = float("nan")
    notes: list[str] = field(default_factory=list)

    @property
    def fitted_rate(self) -> float:
        return -self.slope

    @property
    def passes(self) -> bool:
        return bool(self.fitted_rate >= self.mu_target and not self.floor_limited)


def cutoff_grid(grid: np.ndarray, a: float) -> np.ndarray:
    """Indices of ``grid`` inside [-a, a]."""
    return np.flatnonzero(np.abs(grid) <= a * (1 + 1e-12))


def build_terms(res: Resolvent, ell: int, lams, mu: float | None = None, radius: float = 0.01,
                sources=None) -> list[ExpansionTerm]:
    """Residue projectors for every resonance with Im lam > -mu.

    Conjugate partners ``-conj(lam)`` are added when missing, so the sum is real.
    """
    lams = [complex(z) for z in lams]
    sources = list(sources) if sources is not None else ["searched"] * len(lams)
    full, src = [], []
    for z, s in zip(lams, sources):
        for c in (z, -z.conjugate()):
            if all(abs(c - f) > 1e-9 for f in full):
                full.append(c)
                src.append(s)
    terms = []
    for z, s in zip(full, src):
        if mu is not None and z.imag <= -mu:
            continue
        others = [o for o in full if o != z]
        rad = min([radius] + [abs(o - z) / 3 for o in others])
        margin = res.solver.strip_limit + z.imag
        if margin <= 0:
            continue
        rad = min(rad, 0.5 * margin)
        blocks = res.projector(z, ell, radius=rad, others=others)
        terms.append(ExpansionTerm(z, ell, blocks, 0, s))
    return terms


def expansion_eval(terms: list[ExpansionTerm], res: Resolvent, u1: np.ndarray, u2: np.ndarray,
                   t: float, real_tol: float = 1e-10) -> FieldState:
    """Sum of exp(-i lam_j t) pi_j (u1, u2) on the resolvent grid."""
    a = np.zeros(len(res.grid), dtype=complex)
    b = np.zeros(len(res.grid), dtype=complex)
    for term in terms:
        pa, pb = res.apply_blocks(term.blocks, u1, u2)
        ph = np.exp(-1j * term.lam * t)
        a += ph * pa
        b += ph * pb
    scale = max(np.linalg.norm(a.real) + np.linalg.norm(b.real), 1e-300)
    imag = np.linalg.norm(a.imag) + np.linalg.norm(b.imag)
    if imag > real_tol * scale and imag > 1e-300:
        raise PairingError(f"imaginary part {imag:.3g} vs real {scale:.3g} at t={t}")
    ell = terms[0].ell if terms else 0
    return FieldState(res.grid, a.real.copy(), b.real.copy(), float(t), ell)


def emod_norm(u: np.ndarray, ut: np.ndarray, G: np.ndarray) -> float:
    v = np.concatenate([u, ut])
    return float(math.sqrt(max(v @ G @ v, 0.0)))


def _affine_fit(t, y):
    A = np.vstack([t, np.ones_like(t)]).T
    (m, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = m * t + c
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 1.0
    return float(m), float(c), r2


def residual_decay(traj: Trajectory, terms: list[ExpansionTerm], res: Resolvent,
                   initial: FieldState, mu: float, t_start: float | None = None,
                   t_end: float | None = None, min_samples: int = 5,
                   floor_factor: float = 3.0) -> ResidualReport:
    """E^mod norm of chi u(t) minus the expansion at each stored snapshot.

    chi is applied to the field before the norm. The fit window opens at
    ``t_start`` (default 2a, when the direct transient has crossed the cutoff
    support) and closes at ``t_end`` (default: the smaller of the time boundary
    reflections can return, ``2X - 2a``, and the first time residual/signal
    comes within ``floor_factor`` of its minimum). Near that minimum the
    residual is the discretization error of the kept terms, which decays with
    the signal itself; the report records the residual there as the floor and
    flags the fit if fewer than ``min_samples`` remain.
    """
    idx = cutoff_grid(initial.grid, res.chi.a)
    if len(idx) != len(res.grid) or not np.allclose(initial.grid[idx], res.grid):
        raise ValueError("resolvent grid must be the cutoff part of the evolution grid")
    a = res.chi.a
    X = float(initial.grid[-1])
    A = discretize(initial.ell, res.grid, res.solver.bg).toarray()
    G = emod_gram(A, res.grid)
    chi = res.chi(res.grid)
    u1, u2 = initial.u[idx], initial.ut[idx]
    times, resid, sig = [], [], []
    for snap in traj.snapshots:
        cu, cut = chi * snap.u[idx], chi * snap.ut[idx]
        ex = expansion_eval(terms, res, u1, u2, snap.time)
        times.append(snap.time)
        resid.append(emod_norm(cu - ex.u, cut - ex.ut, G))
        sig.append(emod_norm(cu, cut, G))
    times, resid, sig = np.array(times), np.array(resid), np.array(sig)
    t_start = 2.0 * a if t_start is None else t_start
    notes = []
    if t_end is None:
        t_end = min(2.0 * X - 2.0 * a, float(times[-1]))
        cand = (times >= t_start) & (times <= t_end)
        if terms and cand.any():
            ratio = np.where(cand, resid / np.maximum(sig, 1e-300), np.inf)
            k = int(np.argmin(ratio))
            # stop before the floor makes up a third of the residual
            k = int(np.flatnonzero(ratio <= floor_factor * ratio[k])[0])
            t_end = float(times[k])
            notes.append(f"window closed at t={t_end:.6g}, residual/signal {ratio[k]:.3g} "
                         f"within {floor_factor:g}x of its minimum")
    sel = (times >= t_start) & (times <= t_end)
    floor = float(resid[sel][-1]) if sel.any() else float("nan")
    floor_limited = int(sel.sum()) < min_samples
    if floor_limited:
        notes.append(f"only {int(sel.sum())} samples in the fit window; slope untrustworthy")
        m = c = r2 = ms = float("nan")
    else:
        m, c, r2 = _affine_fit(times[sel], np.log(resid[sel]))
        ms, _, _ = _affine_fit(times[sel], np.log(sig[sel]))
    w = (float(times[sel][0]), float(times[sel][-1])) if sel.any() else (float("nan"),) * 2
    return ResidualReport(times, resid, sig, float(mu), m, c, r2, w, floor, floor_limited, ms, notes)
