import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as spi

from levelmorph.regularize import (
    Regime,
    RegParams,
    dirac_eps,
    epsilon_for_sdt,
    epsilon_from_thickness,
    epsilon_linearized,
    heaviside_eps,
)

# frozen with math.erf, independent of the scipy erf used by the package
EPS_T25_S20 = 0.23401447095129946
EPS_T15_S10 = 0.2733726476231318


def test_heaviside_points():
    assert heaviside_eps(0.0, 0.3) == 0.5
    assert heaviside_eps(0.3, 0.3) == 1.0
    assert heaviside_eps(-0.3, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert heaviside_eps(0.15, 0.3) == pytest.approx(0.75 + 1 / (2 * math.pi), abs=1e-14)
    assert heaviside_eps(0.15, 0.3) == pytest.approx(0.90915, abs=1e-5)
    assert heaviside_eps(5.0, 0.3) == 1.0 and heaviside_eps(-5.0, 0.3) == 0.0


def test_dirac_points():
    assert dirac_eps(0.0, 0.25) == pytest.approx(4.0, rel=1e-15)
    assert dirac_eps(0.25, 0.25) == pytest.approx(0.0, abs=1e-15)
    assert dirac_eps(-0.25, 0.25) == pytest.approx(0.0, abs=1e-15)
    assert dirac_eps(0.26, 0.25) == 0.0


@pytest.mark.parametrize("eps", [1e-3, 0.25, 0.5, 1.25, 7.0])
def test_dirac_unit_mass(eps):
    mass, _ = spi.quad(lambda x: dirac_eps(x, eps), -eps, eps, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert abs(mass - 1.0) < 1e-10


@pytest.mark.parametrize("fn", [heaviside_eps, dirac_eps])
def test_nonpositive_eps_rejected(fn):
    with pytest.raises(ValueError):
        fn(0.1, 0.0)
    with pytest.raises(ValueError):
        fn(0.1, -1.0)


def test_vectorized_shapes():
    x = np.linspace(-1, 1, 12).reshape(2, 2, 3)
    assert heaviside_eps(x, 0.4).shape == x.shape
    assert isinstance(dirac_eps(0.1, 0.4), float)


@settings(max_examples=60, deadline=None)
@given(eps=st.floats(0.01, 5.0), u=st.floats(-0.999, 0.999))
def test_heaviside_derivative_is_dirac(eps, u):
    x = u * eps
    d = 1e-6 * eps
    lo, hi = max(x - d, -eps), min(x + d, eps)
    fd = (heaviside_eps(hi, eps) - heaviside_eps(lo, eps)) / (hi - lo)
    assert abs(fd - dirac_eps(x, eps)) * eps < 1e-6


@settings(max_examples=60, deadline=None)
@given(eps=st.floats(0.01, 5.0), xs=st.lists(st.floats(-10, 10), min_size=2, max_size=30))
def test_heaviside_monotone_bounded_and_dirac_support(eps, xs):
    xs = np.sort(np.array(xs))
    th = heaviside_eps(xs, eps)
    assert np.all(np.diff(th) >= -1e-15)
    assert np.all((th >= 0) & (th <= 1))
    de = dirac_eps(xs, eps)
    assert np.all(de >= 0)
    assert np.all(de[np.abs(xs) > eps] == 0)


def test_epsilon_from_thickness_frozen():
    assert abs(epsilon_from_thickness(2.5, 2.0) - EPS_T25_S20) < 1e-12
    assert abs(epsilon_from_thickness(1.5, 1.0) - EPS_T15_S10) < 1e-12


def test_epsilon_from_thickness_limits():
    assert epsilon_from_thickness(1e3, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert epsilon_from_thickness(1e-9, 1.0) < 1e-9


@pytest.mark.parametrize("t,s", [(0, 1), (-1, 1), (1, 0), (1, -2)])
def test_epsilon_from_thickness_rejects(t, s):
    with pytest.raises(ValueError):
        epsilon_from_thickness(t, s)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.05, 4), s=st.floats(0.2, 5), f=st.floats(1.01, 2))
def test_epsilon_monotone(r, s, f):
    # t / sigma kept where erf is not saturated in double precision
    t = r * s
    assert epsilon_from_thickness(t * f, s) > epsilon_from_thickness(t, s)
    assert epsilon_from_thickness(t, s * f) < epsilon_from_thickness(t, s)


def test_epsilon_linearized():
    assert epsilon_linearized(0.0, 2.0) == 0.0
    assert epsilon_linearized(0.5, 2.5) == pytest.approx(0.039894228040143274, rel=1e-14)
    assert epsilon_linearized(0.5, 2.5) == pytest.approx(0.03989, abs=1e-5)


def _lin_rel_err(ratio, sigma=2.0):
    exact = epsilon_from_thickness(ratio * sigma, sigma)
    return abs(epsilon_linearized(ratio * sigma, sigma) - exact) / exact


def test_epsilon_linearized_error_below_1pct():
    # relative error grows like (t / sigma)^2 / 24
    for ratio in np.linspace(0.01, 0.48, 48):
        assert _lin_rel_err(ratio) < 0.01
    assert _lin_rel_err(0.5) < 0.0105


def test_epsilon_for_sdt():
    assert epsilon_for_sdt(2.5) == 1.25
    assert epsilon_for_sdt(1.5) == 0.75
    with pytest.raises(ValueError):
        epsilon_for_sdt(0.0)


def test_width_contract_continuous():
    # the edge profile phi(x) = -0.5 erf(x / (sqrt(2) sigma)) crosses +-eps at x = -+t/2
    for sigma, t in [(1.0, 1.5), (2.0, 2.5), (2.5, 5.0)]:
        eps = epsilon_from_thickness(t, sigma)
        x = t / 2
        assert abs(0.5 * math.erf(x / (math.sqrt(2) * sigma)) - eps) < 1e-15


def test_regparams_constructors():
    g = RegParams.gaussian(2.5, 2.0)
    assert g.regime is Regime.UNITLESS and g.epsilon == pytest.approx(EPS_T25_S20, abs=1e-12)
    s = RegParams.sdt(2.5)
    assert s.regime is Regime.MM and s.epsilon == 1.25


@pytest.mark.parametrize(
    "kw",
    [
        dict(t=0.0, epsilon=0.1, regime=Regime.MM),
        dict(t=1.0, epsilon=0.6, regime=Regime.UNITLESS, sigma=1.0),
        dict(t=1.0, epsilon=0.1, regime=Regime.UNITLESS),
        dict(t=1.0, epsilon=0.1, regime=Regime.MM, T=1.0),
    ],
)
def test_regparams_invalid(kw):
    with pytest.raises(ValueError):
        RegParams(**kw)
