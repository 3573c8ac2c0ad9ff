import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from sdsres.evolve import discretize
from sdsres.resolvent import (ContourError, CutoffFunction, Resolvent, emod_gram, emod_operator_norm,
                              kernel_from_jost, trapezoid_weights)

ELL10 = 1.61556699392 - 0.07707887255j


@pytest.fixture(scope="module")
def res(solver):
    return Resolvent(solver, points=401)


@settings(max_examples=40, deadline=None)
@given(st.floats(-25, 25))
def test_cutoff_bounds(x):
    chi = CutoffFunction(10.0)
    v = float(chi(x))
    assert 0.0 <= v <= 1.0
    assert float(chi(x) * chi.wider()(x)) == pytest.approx(v, abs=1e-15)


def test_cutoff_profile():
    chi = CutoffFunction(10.0)
    assert np.all(chi(np.linspace(-5, 5, 11)) == 1.0)
    assert np.all(chi(np.array([-10.0, 10.0, 12.0])) == 0.0)
    x = np.linspace(5, 10, 200)
    assert np.all(np.diff(chi(x)) <= 0)


def test_kernel_symmetric(res):
    K = res.green_kernel(0.5j, 2)
    assert np.max(np.abs(K.values - K.values.T)) < 1e-9


def test_diagonal_jump(res):
    x = np.linspace(-9, 9, 50)
    assert np.allclose(res.diagonal_jump(0.8 - 0.02j, 3, x), -1.0, atol=1e-9)


def test_kernel_fd_residual(res, solver):
    # -R'' + (Q - lam^2) R = 0 off the diagonal, to O(h^2)
    lam, ell = 0.6 + 0.2j, 2
    K = res.green_kernel(lam, ell).values
    g = res.grid
    h = g[1] - g[0]
    j = 100
    col = K[:, j]
    lap = (col[2:] - 2 * col[1:-1] + col[:-2]) / h**2
    r = -lap + (solver.bg.Q(g[1:-1], ell) - lam**2) * col[1:-1]
    mask = np.abs(np.arange(1, len(g) - 1) - j) > 2
    assert np.max(np.abs(r[mask])) < 5e-3 * np.max(np.abs(col))


def test_banded_solve_oracle(solver, res):
    lam, ell = 0.5j, 2
    N = 16001
    x = np.linspace(-60, 60, N)
    h = x[1] - x[0]
    Q = solver.bg.Q(x, ell)
    A = sp.diags([-np.ones(N - 1) / h**2, 2 / h**2 + Q - lam**2, -np.ones(N - 1) / h**2], [-1, 0, 1],
                 format="csc")
    j = int(np.argmin(np.abs(x - 1.0)))
    d = np.zeros(N)
    d[j] = 1 / h
    u = sla.spsolve(A, d)
    m = np.abs(x) < 10
    K = res.green_kernel(lam, ell, grid=x[m])
    col = K.values[:, int(np.argmin(np.abs(K.grid - x[j])))]
    assert np.max(np.abs(col - u[m])) / np.max(np.abs(col)) < 1e-5


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_spectral_bound(res, t):
    assert res.cutoff_resolvent_norm(1j * t, 1) <= 1 / t**2


def test_conjugation_symmetry(res):
    lam = 1.1 - 0.04j
    a = res.cutoff_resolvent_norm(lam, 3)
    b = res.cutoff_resolvent_norm(-lam.conjugate(), 3)
    assert abs(a - b) <= 1e-8 * a


def test_simple_pole_scaling(res):
    vals = [res.cutoff_resolvent_norm(ELL10 + d * u, 10) * d
            for d in (1e-3, 3e-3, 1e-2) for u in (1, 1j, -1)]
    assert max(vals) / min(vals) < 10


def test_projector_zero_resonance(res, solver):
    from sdsres.jost import gamma_constant

    gam, _ = gamma_constant(solver)
    P = res.projector(0.0, 0, radius=0.01)
    rc = solver.bg.r(res.grid) * res.chi(res.grid)
    target = gam * np.outer(rc, rc)
    assert np.max(np.abs(P["12"] - target)) < 1e-5 * np.max(np.abs(target))
    sv = np.linalg.svd(P["12"], compute_uv=False)
    assert sv[1] < 1e-6 * sv[0]
    P2 = res.projector(0.0, 0, radius=0.005)
    assert max(np.max(np.abs(P2[k] - P[k])) for k in P) < 1e-7


def test_projector_rank_one_blocks(solver):
    r = Resolvent(solver, points=201)
    P = r.projector(ELL10, 10, radius=0.001)
    for B in P.values():
        sv = np.linalg.svd(B, compute_uv=False)
        assert sv[1] < 1e-6 * sv[0]


def test_projector_matches_analytic_residue(solver):
    r = Resolvent(solver, points=201)
    P = r.projector(ELL10, 10, radius=0.001)
    chi = r.chi(r.grid)
    rho = chi[:, None] * r.residue_kernel(ELL10, 10, 1e-3) * chi[None, :]
    # the (1,2) block is -i times the residue of the P-resolvent
    assert np.max(np.abs(P["12"] + 1j * rho)) < 1e-6 * np.max(np.abs(rho))


def test_contour_errors(res):
    with pytest.raises(ContourError):
        res.projector(ELL10, 10, radius=0.01)
    with pytest.raises(ContourError):
        res.projector(0.5 - 0.01j, 10, radius=0.01, others=[0.505 - 0.01j])


def test_l_resolvent_residual(res, solver):
    z, ell = 0.7 + 0.5j, 2
    g = res.grid
    u1 = np.exp(-g**2)
    u2 = np.sin(g) * np.exp(-g**2 / 4)
    a, b = res.l_resolvent_apply(z, ell, u1, u2, outer=False)
    A = discretize(ell, g, solver.bg)
    chi = res.chi(g)
    ra = 1j * b - z * a - chi * u1
    rb = -1j * (A @ a) - z * b - chi * u2
    m = np.abs(g) < 9
    assert np.max(np.abs(ra[m])) < 1e-12
    assert np.max(np.abs(rb[m])) < 5e-3
    a2, b2 = res.l_resolvent_apply(z, ell, 2 * u1, 2 * u2)
    a1, b1 = res.l_resolvent_apply(z, ell, u1, u2)
    assert np.allclose(a2, 2 * a1) and np.allclose(b2, 2 * b1)


def test_rel_sampled_constant(solver):
    r = Resolvent(solver, points=121)
    zs = [complex(a, b) for a, b in zip(np.linspace(0.2, 4, 20), np.tile([0.5, 0.2, -0.02, 1.0], 5))]
    ratios = []
    for ell in (1, 5, 10):
        G = emod_gram(discretize(ell, r.grid, solver.bg).toarray(), r.grid)
        for z in zs:
            T = r.l_resolvent_matrix(z, ell)
            n = emod_operator_norm(T, G)
            ratios.append(n / (np.sqrt(1 + abs(z) ** 2) * r.cutoff_resolvent_norm(z, ell)))
    assert max(ratios) < 5.0


def test_kernel_helpers():
    g = np.linspace(0, 1, 5)
    assert trapezoid_weights(g).sum() == pytest.approx(1.0)
    K = kernel_from_jost(np.arange(1.0, 4.0), np.arange(4.0, 7.0), 2.0)
    assert np.allclose(K, K.T)
    assert K[2, 0] == pytest.approx(3 * 4 / 2)
