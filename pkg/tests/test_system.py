from dataclasses import replace

import numpy as np
import pytest

from oracles import LEFT_STABLE
from revhom import duffing, system as S
from revhom.duffing import ExampleParams


def test_example_is_reversible():
    rep = S.check_reversibility(duffing.make_system(ExampleParams(beta2=0.3, beta3=1.0)))
    assert rep.passed and rep.involutive
    assert rep.fix_dims == (2, 2)
    assert rep.max_residual < 1e-12


def test_broken_reverser_is_reported():
    bad = replace(duffing.make_system(), R=np.eye(4))
    rep = S.check_reversibility(bad)
    assert not rep.passed
    assert rep.fix_dims == (4, 0)


def test_saddle_spectrum_and_left_vectors():
    sp = S.equilibrium_spectrum(duffing.make_system(ExampleParams(s=2.0)))
    assert np.allclose(np.sort(sp.stable_values.real), [-np.sqrt(2), -1.0])
    assert np.allclose(np.sort(sp.unstable_values.real), [1.0, np.sqrt(2)])
    Ls = S.build_Ls(sp)
    for w in LEFT_STABLE:
        w = w / np.linalg.norm(w)
        assert min(np.linalg.norm(r - w) for r in np.vstack([Ls, -Ls])) < 1e-12
    # kernel of Ls is the unstable eigenspace
    for v in sp.unstable_right:
        assert np.allclose(Ls @ v, 0, atol=1e-12)


def test_non_hyperbolic_raises():
    with pytest.raises(S.NonHyperbolicError):
        S.equilibrium_spectrum(duffing.make_system(ExampleParams(s=1e-18)))


def test_fix_projectors_split_state():
    sysm = duffing.make_system()
    Pp, Pm = S.fix_R_projector(sysm)
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(np.abs(Pp @ x), [1.0, 2.0])
    assert np.allclose(np.abs(Pm @ x), [3.0, 4.0])
    assert np.allclose(Pp @ Pm.T, 0)


def test_registry():
    assert "duffing4d" in S.registered_systems()
    sysm = S.get_system("duffing4d", s=3.0, beta1=1.0)
    assert sysm.params["s"] == 3.0
    with pytest.raises(S.ConfigurationError):
        S.get_system("no-such-system")


def test_derivatives_match_finite_differences():
    sysm = duffing.make_system(ExampleParams(s=2.0, beta1=1.3, beta2=0.2, beta3=0.7))
    rng = np.random.default_rng(1)
    x, u, v = rng.normal(size=(3, 4))
    h = 1e-6
    J = sysm.jacobian(x)
    fd = np.column_stack([(sysm.evaluate(x + h * e) - sysm.evaluate(x - h * e)) / (2 * h)
                          for e in np.eye(4)])
    assert np.allclose(J, fd, atol=1e-8)
    H = sysm.hessian_action(x, u, v)
    fdH = (sysm.jacobian(x + h * u) @ v - sysm.jacobian(x - h * u) @ v) / (2 * h)
    assert np.allclose(H, fdH, atol=1e-7)
    for name in ("beta1", "beta2", "beta3"):
        p_hi = sysm.with_params(**{name: sysm.params[name] + h})
        p_lo = sysm.with_params(**{name: sysm.params[name] - h})
        fd_mu = (p_hi.evaluate(x) - p_lo.evaluate(x)) / (2 * h)
        assert np.allclose(sysm.param_derivative(x, name), fd_mu, atol=1e-8)


def test_spectrum_pairing_and_biorthogonality():
    sp = S.equilibrium_spectrum(duffing.make_system(ExampleParams(s=3.0, beta2=0.2)))
    assert np.allclose(np.sort(sp.stable_values.real), np.sort(-sp.unstable_values.real))
    for w, lam in zip(sp.stable_left, sp.stable_values):
        for v in sp.unstable_right:
            assert abs(w @ v) < 1e-12


def test_Ls_characterizes_unstable_space():
    sysm = duffing.make_system(ExampleParams(s=2.0, beta2=0.1))
    sp = S.equilibrium_spectrum(sysm)
    Ls = S.build_Ls(sp)
    rng = np.random.default_rng(5)
    for _ in range(5):
        c = rng.normal(size=2)
        assert np.max(np.abs(Ls @ (sp.unstable_right.T @ c))) < 1e-12
    J = sysm.jacobian(np.zeros(4))
    w, V = np.linalg.eig(J)
    for k in np.flatnonzero(w.real < 0):
        assert np.linalg.norm(Ls @ V[:, k]) > 1e-3
