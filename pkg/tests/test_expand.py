import numpy as np
import pytest

from sdsres.evolve import FieldState, WaveEvolver
from sdsres.expand import (ExpansionTerm, PairingError, build_terms, cutoff_grid, expansion_eval,
                           residual_decay)
from sdsres.jost import gamma_constant
from sdsres.resolvent import Resolvent

ELL10 = 1.61556699392 - 0.07707887255j


@pytest.fixture(scope="module")
def setup0(solver):
    ev = WaveEvolver(0, X=30.0, points=1201, bg=solver.bg)
    idx = cutoff_grid(ev.grid, 10.0)
    res = Resolvent(solver, grid=ev.grid[idx])
    return ev, idx, res, build_terms(res, 0, [0.0])


def test_zero_term_is_static_main_term(setup0, solver):
    ev, idx, res, terms = setup0
    x = res.grid
    u1 = np.zeros_like(x)
    u2 = np.exp(-x**2 / 2)
    gam, _ = gamma_constant(solver)
    rc = solver.bg.r(x) * res.chi(x)
    main = gam * rc * np.sum(res.weights * rc * u2)
    for t in (0.0, 40.0, 300.0):
        ex = expansion_eval(terms, res, u1, u2, t)
        assert np.max(np.abs(ex.u - main)) < 1e-6 * np.max(np.abs(main))
        assert np.max(np.abs(ex.ut)) < 1e-9 * np.max(np.abs(main))


def test_linearity(setup0):
    _, _, res, terms = setup0
    x = res.grid
    a = (np.cos(x), np.exp(-x**2))
    b = (np.exp(-(x - 1) ** 2), np.sin(x))
    ea = expansion_eval(terms, res, *a, 5.0)
    eb = expansion_eval(terms, res, *b, 5.0)
    ec = expansion_eval(terms, res, 2 * a[0] - b[0], 2 * a[1] - b[1], 5.0)
    assert np.allclose(ec.u, 2 * ea.u - eb.u, atol=1e-12)


def test_empty_terms_residual_is_signal(setup0):
    ev, idx, res, _ = setup0
    g = ev.grid
    st = FieldState(g, 0 * g, np.exp(-g**2 / 2), 0.0, 0)
    _, tr = ev.evolve(st, 40.0, 0.5 * ev.h, snapshot_times=np.arange(0, 41, 4.0))
    rep = residual_decay(tr, [], res, st, mu=0.03, t_start=0.0)
    assert np.allclose(rep.residual, rep.signal)


def test_ell0_residual_decays(setup0):
    ev, idx, res, terms = setup0
    g = ev.grid
    st = FieldState(g, 0 * g, np.exp(-g**2 / 2), 0.0, 0)
    _, tr = ev.evolve(st, 60.0, 0.5 * ev.h, snapshot_times=np.arange(0, 61, 1.0))
    rep = residual_decay(tr, terms, res, st, mu=0.03)
    assert not rep.floor_limited
    assert rep.fitted_rate >= 0.03
    assert rep.residual[-1] < 1e-2 * rep.residual[0]


@pytest.fixture(scope="module")
def terms10(solver):
    res = Resolvent(solver, points=201)
    return res, build_terms(res, 10, [ELL10])


def test_pairing_adds_partner(terms10):
    _, terms = terms10
    lams = sorted((t.lam for t in terms), key=lambda z: z.real)
    assert lams[0] == pytest.approx(-ELL10.conjugate()) and lams[1] == pytest.approx(ELL10)


def test_pair_sum_is_real(terms10):
    res, terms = terms10
    x = res.grid
    ex = expansion_eval(terms, res, np.exp(-x**2 / 2), 0 * x, 30.0)
    assert np.max(np.abs(ex.u)) > 0


def test_unpaired_term_rejected(terms10):
    res, terms = terms10
    x = res.grid
    lone = [t for t in terms if t.lam.real > 0]
    with pytest.raises(PairingError):
        expansion_eval(lone, res, np.exp(-x**2 / 2), 0 * x, 30.0)


def test_projector_idempotence_proxy(terms10):
    # the cut-off residue is rank one, so applying it to its own output
    # reproduces that output up to one scalar
    res, terms = terms10
    x = res.grid
    t = terms[0]
    a, b = res.apply_blocks(t.blocks, np.exp(-x**2 / 2), 0 * x)
    a2, b2 = res.apply_blocks(t.blocks, a, b)
    v, v2 = np.concatenate([a, b]), np.concatenate([a2, b2])
    s = np.vdot(v, v2) / np.vdot(v, v)
    assert np.linalg.norm(v2 - s * v) < 1e-6 * np.linalg.norm(v2)


def test_terms_below_mu_dropped(solver):
    res = Resolvent(solver, points=101)
    assert build_terms(res, 10, [ELL10], mu=0.05) == []
    assert isinstance(build_terms(res, 0, [0.0], mu=0.05)[0], ExpansionTerm)
