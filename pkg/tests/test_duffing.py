import math

import numpy as np
import pytest

from oracles import BBAR2_TIED, GOLDEN_S, ORBIT_X1_L2_SQUARED, RESONANCE_S2
from revhom import duffing
from revhom.duffing import ExampleParams
from revhom.system import ConfigurationError


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_resonance_values(ell):
    assert duffing.resonance_beta1(2, ell) == pytest.approx(RESONANCE_S2[ell], abs=1e-6)


@pytest.mark.parametrize("sign", [1, -1])
def test_exact_orbit_solves_the_system(sign):
    sysm = duffing.make_system(ExampleParams.at_resonance(2, 1, beta3=3.0))
    t = np.linspace(-8, 8, 81)
    x = duffing.homoclinic_exact(t, sign)
    h = 1e-5
    dx = (duffing.homoclinic_exact(t + h, sign) - duffing.homoclinic_exact(t - h, sign)) / (2 * h)
    assert np.allclose(dx, sysm.evaluate(x), atol=1e-9)
    # x(t) = R x(-t)
    assert np.allclose(x, duffing.homoclinic_exact(-t, sign) @ sysm.R.T)


def test_orbit_l2_norm():
    t = np.linspace(-40, 40, 400001)
    x1 = duffing.homoclinic_exact(t)[:, 0]
    assert np.trapezoid(x1**2, t) == pytest.approx(ORBIT_X1_L2_SQUARED, abs=1e-6)


@pytest.mark.parametrize("s", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("ell", [0, 1, 2])
def test_bounded_xi2_solves_block_two(s, ell):
    b1 = duffing.resonance_beta1(s, ell)
    t = np.linspace(-6, 6, 61)
    xi, dxi = duffing.bounded_xi2(t, s, ell)
    h = 1e-4
    d2 = (duffing.bounded_xi2(t + h, s, ell)[0] - 2 * xi + duffing.bounded_xi2(t - h, s, ell)[0]) / h**2
    assert np.allclose(d2, (s - 2 * b1 / np.cosh(t) ** 2) * xi, atol=1e-6)
    dfd = (duffing.bounded_xi2(t + h, s, ell)[0] - duffing.bounded_xi2(t - h, s, ell)[0]) / (2 * h)
    assert np.allclose(dxi, dfd, atol=1e-8)
    # ell interior zeros on the half-line
    tt = np.linspace(0, 30, 30001)
    v = duffing.bounded_xi2(tt, s, ell)[0]
    assert np.count_nonzero(np.diff(np.sign(v)) != 0) == ell


def test_xi2_out_of_range():
    with pytest.raises(ConfigurationError):
        duffing.xi2_coefficients(2.0, 3)


@pytest.mark.parametrize("block", [1, 2])
def test_planar_fundamentals_wronskian(block):
    fs = duffing.planar_fundamentals(block, ExampleParams.at_resonance(2, 1))
    t = np.linspace(-5, 5, 11)
    assert np.allclose(fs.wronskian(t), 1.0, atol=1e-9)
    b = fs.phi_b(t)
    assert np.allclose(np.sum(fs.psi_b(t) * b, axis=-1), 1.0, atol=1e-9)
    assert np.allclose(np.sum(fs.psi_u(t) * b, axis=-1), 0.0, atol=1e-12)
    assert np.max(np.abs(fs.phi_b(np.array([25.0])))) < 1e-8


def test_block_two_needs_resonance():
    with pytest.raises(ConfigurationError):
        duffing.planar_fundamentals(2, ExampleParams(s=2.0, beta1=2.5))


@pytest.mark.parametrize("key", sorted(BBAR2_TIED))
def test_closed_form_bbar2(key):
    s, ell = key
    assert duffing.bbar2_closed(s, ell) == pytest.approx(BBAR2_TIED[key], rel=1e-12)


def test_closed_form_root():
    assert abs(duffing.bbar2_closed(GOLDEN_S, 0)) < 1e-12


def test_params_validation():
    with pytest.raises(ConfigurationError):
        ExampleParams(s=0.0)
    p = ExampleParams(beta1=3.0, coupling=None)
    assert p.tied and p.c == 3.0
    assert math.isnan(p.as_dict()["coupling"])


def test_exact_orbit_analytic_derivative():
    sysm = duffing.make_system(ExampleParams.at_resonance(2, 0))
    t = np.linspace(-10, 10, 100)
    sh, th = 1 / np.cosh(t), np.tanh(t)
    r2 = math.sqrt(2)
    dx = np.stack([-r2 * sh * th, 0 * t, r2 * sh * (th**2 - sh**2), 0 * t], axis=-1)
    assert np.max(np.abs(dx - sysm.evaluate(duffing.homoclinic_exact(t)))) <= 1e-12


def test_x1x3_plane_is_invariant():
    sysm = duffing.make_system(ExampleParams(s=2.0, beta1=3.0, beta3=2.0))
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 4))
    x[:, [1, 3]] = 0.0
    f = sysm.evaluate(x)
    assert np.all(f[:, [1, 3]] == 0.0)


def test_xi2_parity_is_exact():
    t = np.linspace(0, 9, 37)
    for ell in (0, 1, 2):
        assert np.array_equal(duffing.bounded_xi2(t, 2.0, ell)[0], duffing.bounded_xi2(-t, 2.0, ell)[0])


def test_off_resonance_decaying_solution_grows_backwards():
    s = 2.0
    p = ExampleParams(s=s, beta1=duffing.resonance_beta1(s, 0) + 0.1)
    t0 = 12.0
    y0 = [math.exp(-math.sqrt(s) * t0), -math.sqrt(s) * math.exp(-math.sqrt(s) * t0)]
    ts = np.array([-8.0, -10.0])
    sol = duffing.integrate_block(2, p, (t0, -10.0), y0, t_eval=[t0, *ts])
    y = np.abs(sol.y[0][1:])
    rate = math.log(y[1] / y[0]) / 2.0
    assert rate == pytest.approx(math.sqrt(s), rel=0.05)
