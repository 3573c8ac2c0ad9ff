
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdsres.background import MetricParams
from sdsres.spectrum import (BoxTouchesZeroError, ResonanceFinder, WindingCounter, barrier_top_lattice,
                             lattice_pseudo_poles, nearest_lattice, zone_classify)

ELL10 = 1.61556699392 - 0.07707887255j


def test_lattice_points():
    p = MetricParams()
    c = p.lattice_constant
    pts = lattice_pseudo_poles(p, 10, 2)
    assert [q.j for q in pts] == [0, 1, 2]
    assert pts[0].mu == pytest.approx(c * (10.5 - 0.25j))
    assert pts[2].mu.imag == pytest.approx(-1.25 * c)


def test_barrier_top_tracks_lattice_real_part():
    p = MetricParams()
    top = barrier_top_lattice(p, 20, 0)[0]
    lat = lattice_pseudo_poles(p, 20, 0)[0].mu
    assert abs(top.real - lat.real) < 1e-2


def test_barrier_top_predicts_searched_zero():
    top = barrier_top_lattice(MetricParams(), 10, 0)[0]
    assert abs(top - ELL10) < 2e-3


@pytest.mark.parametrize("lam,ell,zone", [(0.5, 10, "I"), (6.0, 40, "II"), (30.0, 10, "III"),
                                          (300.0, 10, "IV"), (4.0 + 10j, 10, "I")])
def test_zones(lam, ell, zone):
    assert zone_classify(lam, ell, 5.0) == zone


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=4))
def test_winding_counts_polynomial_roots(roots):
    roots = [complex(round(z.real, 3) + 1e-4, round(z.imag, 3) + 1e-4) for z in roots]
    f = lambda z: np.prod([z - r for r in roots])
    wc = WindingCounter(f)
    box = (-1.0, 1.0, -1.0, 1.0)
    assert wc.count_box(box) == len(roots)


def test_winding_guard():
    wc = WindingCounter(lambda z: z - 0.5)
    with pytest.raises(BoxTouchesZeroError):
        wc.count_box((0.5, 1.0, -1.0, 1.0))


@pytest.fixture(scope="module")
def finder(solver):
    return ResonanceFinder(solver)


def test_find_ell10(finder):
    box = (1.5, 1.75, -0.99 * finder.solver.strip_limit, 0.0)
    found = finder.find_resonances(10, box)
    assert len(found) == 1
    r = found[0]
    assert r.order == 1 and r.converged
    assert r.lam == pytest.approx(ELL10, abs=1e-9)


def test_newton_from_lattice_seed(finder):
    mu = lattice_pseudo_poles(finder.solver.params, 10, 0)[0].mu
    z, ok = finder.newton(10, mu, (1.5, 1.75, -0.078, 0.0))
    assert ok and abs(z - ELL10) < 1e-9


def test_mirror_resonance(finder):
    box = (-1.75, -1.5, -0.99 * finder.solver.strip_limit, 0.0)
    found = finder.find_resonances(10, box)
    assert len(found) == 1
    assert found[0].lam == pytest.approx(-ELL10.conjugate(), abs=1e-9)


def test_no_zeros_upper_half_plane(finder):
    assert finder.count_zeros(5, (0.1, 2.0, 0.05, 1.0)) == 0


def test_nearest_lattice(solver):
    mu, d = nearest_lattice(solver.params, ELL10, 10)
    pts = [q.mu for q in lattice_pseudo_poles(solver.params, 10, 3)]
    assert d == pytest.approx(min(abs(ELL10 - q) for q in pts))
    assert any(mu == q for q in pts)
    # the computed zero sits half way between the j = 0 and j = 1 points
    assert d == pytest.approx(solver.params.lattice_constant / 4, rel=2e-2)


def test_lattice_consistency_with_barrier_top():
    # barrier-top j = 0 point against the lattice j = 0 point, gap < 5% by ell = 20
    p = MetricParams()
    top = barrier_top_lattice(p, 20, 0)[0]
    lat = lattice_pseudo_poles(p, 20, 0)[0].mu
    assert abs(top.imag - lat.imag) < 0.05 * abs(lat.imag)


@pytest.mark.parametrize("ell", range(0, 13))
def test_no_zeros_near_real_axis_or_above(finder, ell):
    assert finder.count_zeros(ell, (0.05, 2.5, 0.002, 0.6)) == 0
    for lam in (0.3, 1.0, 2.0):
        assert abs(finder.solver.w(lam, ell)) > 0


def test_searched_zero_residual_normalized(finder):
    from sdsres.spectrum import normalized_residual

    assert normalized_residual(finder.solver, ELL10, 10) < 1e-9
