import numpy as np
import pytest

from oracles import A2, ABAR2, B2, BBAR2_C8_S2_L0, BBAR2_TIED
from revhom import duffing, melnikov as M
from revhom.duffing import ExampleParams
from revhom.system import ConfigurationError


@pytest.fixture(scope="module")
def sn_inputs():
    return M.example_inputs(ExampleParams.at_resonance(2, 0, beta3=4.0), "beta2")


def test_inputs_solve_their_equations(sn_inputs):
    chk = sn_inputs.check()
    assert chk["ok"], chk


def test_saddle_node_coefficients(sn_inputs):
    a2, b2 = M.compute_a2_b2(sn_inputs)
    assert a2.value == pytest.approx(A2, rel=1e-10)
    assert b2.value == pytest.approx(B2, rel=1e-10)
    assert M.classify("saddle_node", a2=a2, b2=b2) == "saddle-node-sub"


def test_abar2():
    inp = M.example_inputs(ExampleParams.at_resonance(2, 0), "beta1")
    assert M.compute_abar2(inp).value == pytest.approx(ABAR2, rel=1e-10)


def test_abar2_needs_xi_mu_when_forced():
    inp = M.example_inputs(ExampleParams.at_resonance(2, 0), "beta2")
    with pytest.raises(ConfigurationError):
        M.compute_abar2(inp)


def test_off_resonance_rejected():
    with pytest.raises(ConfigurationError):
        M.example_inputs(ExampleParams(s=2.0, beta1=2.5), "beta2")


@pytest.mark.parametrize("key", [(2, 0), (3, 1)])
def test_bbar2_quadrature_tied(key):
    s, ell = key
    rep = M.example_report(ExampleParams.at_resonance(s, ell, coupling=None), "pitchfork")
    assert rep.bbar2.value == pytest.approx(BBAR2_TIED[key], rel=1e-8)
    assert rep.bbar2_closed == pytest.approx(BBAR2_TIED[key], rel=1e-12)


def test_bbar2_displayed_coupling():
    rep = M.example_report(ExampleParams.at_resonance(2, 0), "pitchfork")
    assert rep.bbar2.value == pytest.approx(BBAR2_C8_S2_L0, rel=1e-8)
    assert rep.classification == "pitchfork-super"
    assert rep.bbar2_closed is None


def test_pitchfork_requires_beta3_zero():
    with pytest.raises(ConfigurationError):
        M.example_report(ExampleParams.at_resonance(2, 0, beta3=1.0), "pitchfork")


def test_classify_rules():
    assert M.classify("saddle_node", a2=1.0, b2=-1.0) == "saddle-node-super"
    assert M.classify("saddle-node", a2=1.0, b2=1.0) == "saddle-node-sub"
    assert M.classify("transcritical", abar2=-1.0, b2=2.0) == "transcritical"
    assert M.classify("pitchfork", abar2=-1.0, bbar2=-2.0) == "pitchfork-sub"
    assert M.classify("pitchfork", abar2=-1.0, bbar2=0.0) == "degenerate"
    with pytest.raises(ConfigurationError):
        M.classify("pitchfork", abar2=1.0)
    with pytest.raises(ConfigurationError):
        M.classify("hopf", a2=1.0, b2=1.0)
    assert set(M.CLASSIFICATIONS) >= {"saddle-node-super", "pitchfork-sub", "degenerate"}


def test_degeneracy_is_relative_to_scale():
    tiny = M.Estimate(1e-12, 1e-16, 1.0)
    assert tiny.is_zero()
    assert not M.Estimate(1e-12, 1e-16, 1e-6).is_zero()


def test_report_json_roundtrip():
    import json

    rep = M.example_report(ExampleParams.at_resonance(2, 0, beta3=4.0), "transcritical")
    doc = json.loads(rep.to_json())
    assert doc["classification"] == "transcritical"
    assert doc["abar2"] == pytest.approx(ABAR2, rel=1e-10)
    assert set(doc["errors"]) == {"abar2", "b2"}


def test_xi_alpha_rejects_out_of_block_forcing():
    p = ExampleParams.at_resonance(2, 0, beta3=4.0)
    inp = M.example_inputs(p, "beta1")
    fund = duffing.planar_fundamentals(1, p)
    with pytest.raises(ConfigurationError):
        M.xi_alpha(inp, fund)


def test_solvability_residual_small():
    inp = M.example_inputs(ExampleParams.at_resonance(3, 2), "beta1")
    assert abs(M.solvability_residual(inp)) < 1e-12
    assert np.isfinite(M.compute_a2_b2(inp)[1].value)


def test_halving_panel_width_within_error_estimate(sn_inputs):
    from revhom.quadrature import integrate_line

    inp = sn_inputs
    sysm = inp.system

    def g(t):
        return inp.inner(inp.psi(t), sysm.param_derivative(inp.orbit(t), inp.param))

    a2, _ = M.compute_a2_b2(inp)
    fine, _, _ = integrate_line(g, None, width=0.25)
    assert abs(fine - a2.value) <= max(a2.error, 1e-14 * a2.scale)
