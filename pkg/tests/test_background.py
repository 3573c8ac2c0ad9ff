import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sdsres.background import (Background, CoordinateDomainError, CoordinateMap, MetricParams,
                               ParameterDomainError, alpha2, dalpha2_dr, horizon_radii, potentials,
                               rw_coordinate, rw_inverse, vpp_at_peak)


def test_default_horizons():
    p = MetricParams()
    assert p.r_minus == pytest.approx(2.1285927458, abs=1e-9)
    assert p.r_plus == pytest.approx(7.3974894724, abs=1e-9)
    assert p.r_third == pytest.approx(-(p.r_minus + p.r_plus), abs=1e-14)
    assert horizon_radii(1.0, 0.04) == (p.r_minus, p.r_plus)


def test_surface_gravities():
    p = MetricParams()
    assert p.kappa_minus == pytest.approx(0.38465024, abs=1e-7)
    assert p.kappa_plus == pytest.approx(0.16071858, abs=1e-7)


@pytest.mark.parametrize("M,Lam", [(1.0, 0.2), (1.0, 0.0), (-1.0, 0.01), (1.0, 1 / 9)])
def test_inadmissible_parameters(M, Lam):
    with pytest.raises(ParameterDomainError):
        MetricParams(M, Lam)


def test_horizon_residuals():
    p = MetricParams()
    for r in (p.r_minus, p.r_plus):
        assert abs(alpha2(r, p)) < 1e-10
    assert dalpha2_dr(p.r_minus, p) > 0 > dalpha2_dr(p.r_plus, p)


def test_photon_sphere_peak():
    p = MetricParams()
    bg = Background(p)
    assert math.sqrt(float(bg.V(np.array([0.0]))[0])) == pytest.approx(p.lattice_constant, abs=1e-12)
    x = np.linspace(-1, 1, 201)
    assert np.argmax(bg.V(x)) == 100
    assert vpp_at_peak(p) < 0


def test_coordinate_anchor_and_quadrature():
    p = MetricParams()
    cm = CoordinateMap(p)
    assert cm.x_of_r(3.0) == pytest.approx(0.0, abs=1e-14)
    for r in (2.2, 2.9, 4.0, 6.0, 7.3):
        ref = quad(lambda s: 1.0 / alpha2(s, p), 3.0, r, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
        assert abs(cm.x_of_r(r) - ref) < 1e-9


def test_outside_interval_rejected():
    p = MetricParams()
    with pytest.raises(CoordinateDomainError):
        rw_coordinate(8.0, p)
    with pytest.raises(CoordinateDomainError):
        rw_coordinate(p.r_minus, p)


def test_inverse_keeps_horizon_gap_precision():
    p = MetricParams()
    cm = CoordinateMap(p)
    r, dm, dp = cm.gaps(np.array([-80.0, 150.0]))
    # gaps resolve far below double spacing of r itself
    assert 0 < dm[0] < 1e-12 and 0 < dp[1] < 1e-9
    a2 = cm.alpha2(np.array([-80.0, 150.0]))
    assert np.all(a2 > 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 60))
def test_round_trip_x_r(x):
    # past x ~ -30 the left gap is below 1e-5 and r alone cannot resolve x to 1e-9
    p = MetricParams()
    r = rw_inverse(x, p)
    assert rw_coordinate(r, p) == pytest.approx(x, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0))
def test_dimensional_scaling(s):
    p = MetricParams()
    q = p.scaled(s)
    assert q.r_plus == pytest.approx(s * p.r_plus, rel=1e-12)
    assert q.lattice_constant == pytest.approx(p.lattice_constant / s, rel=1e-12)


def test_potentials_positive_and_decay():
    p = MetricParams()
    x = np.array([-50.0, -40.0, 0.0, 40.0, 50.0])
    pp = potentials(x, p)
    assert np.all(pp.V > 0)
    # V ~ exp(kappa_- x) on the left and exp(-kappa_+ x) on the right
    assert np.log(pp.V[1] / pp.V[0]) / 10 == pytest.approx(p.kappa_minus, rel=1e-3)
    assert np.log(pp.V[3] / pp.V[4]) / 10 == pytest.approx(p.kappa_plus, rel=1e-3)
    assert np.allclose(pp.total(2), 6 * pp.V + pp.W)
