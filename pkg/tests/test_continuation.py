import json

import numpy as np
import pytest
import scipy.sparse as sp

from revhom import bvp as B, continuation as C, duffing
from revhom.duffing import ExampleParams


def _coarse(p):
    bvp = B.HomoclinicBVP(duffing.make_system(p), T=14.0, n_intervals=140)
    return bvp, B.solve(bvp, duffing.homoclinic_exact(bvp.mesh))


@pytest.fixture(scope="module")
def fold_branch():
    bvp, o = _coarse(ExampleParams.at_resonance(2, 0, beta3=4.0))
    return C.continue_branch(bvp, o, "beta2", (-0.1, 0.1), ds=5e-3, ds_max=2e-2, both=True,
                             max_steps=60)


def test_bordered_solver_matches_dense():
    rng = np.random.default_rng(3)
    n = 30
    G = sp.csc_matrix(rng.normal(size=(n, n)) + 5 * np.eye(n))
    g = rng.normal(size=n)
    row = rng.normal(size=n + 1)
    full = np.block([[G.toarray(), g[:, None]], [row[None, :]]])
    rhs = rng.normal(size=n + 1)
    solver = C._Bordered(G, g, row)
    assert np.allclose(solver.solve(rhs), np.linalg.solve(full, rhs), atol=1e-12)
    sign, logdet = solver.det_info()
    ref_sign, ref_logdet = np.linalg.slogdet(full)
    assert sign == int(ref_sign)
    assert logdet == pytest.approx(ref_logdet, rel=1e-10)


def test_fold_found_near_zero(fold_branch):
    folds = fold_branch.specials(C.FOLD)
    assert len(folds) >= 1
    f = min(folds, key=lambda s: abs(s.param))
    assert abs(f.param) < 1e-3
    assert f.residual < 1e-8
    k = f.index
    assert fold_branch.points[k].special == C.FOLD


def test_orbits_at_resolves_at_target(fold_branch):
    f = min(fold_branch.specials(C.FOLD), key=lambda s: abs(s.param))
    side = -0.03 if np.mean(fold_branch.params) < f.param else 0.03
    orbits = C.orbits_at(fold_branch, side, f.index)
    assert len(orbits) == 2
    for o in orbits:
        assert o.params["beta2"] == side
        assert o.collocation_residual < 1e-9
    assert abs(orbits[0].measures.x2_at_0 - orbits[1].measures.x2_at_0) > 1e-3


def test_branch_without_special_points():
    bvp, o = _coarse(ExampleParams(s=2.0, beta1=1.0, beta3=0.0))
    br = C.continue_branch(bvp, o, "beta3", (-0.5, 0.5), ds=0.05, max_steps=30, both=True)
    assert br.special == []
    # marching stops at the first point past each end of the window
    assert -0.5 - 0.1 < br.params.min() <= -0.5
    assert 0.5 <= br.params.max() < 0.5 + 0.1
    assert np.all(np.diff(br.arclength) > 0)
    orbit = br.orbit(len(br.points) // 3)
    assert orbit.collocation_residual < 1e-8


def test_start_must_be_a_solution():
    bvp, o = _coarse(ExampleParams(s=2.0, beta1=1.0))
    with pytest.raises(C.ContinuationError):
        C.continue_branch(bvp, o.states * 1.1, "beta3", (-1, 1))
    with pytest.raises(C.ContinuationError):
        C.continue_branch(bvp, o, "gamma", (-1, 1))


def test_csv_and_json(fold_branch):
    text = C.branch_csv(fold_branch, "hdr")
    lines = text.splitlines()
    assert lines[0] == "# hdr"
    assert lines[1].startswith("index,param,x2_at_0")
    assert len(lines) == 2 + len(fold_branch.points)
    doc = json.loads(C.branch_json(fold_branch))
    assert doc["param"] == "beta2"
    assert any(s["type"] == C.FOLD for s in doc["special_points"])


def test_switch_respects_parameter_bound_and_crossing_keeps_its_bp():
    res = duffing.resonance_beta1(2, 2)
    lo, hi = res - 0.15, res + 0.15
    bvp, o = _coarse(ExampleParams(s=2.0, beta1=lo, beta3=4.0, ell=2))
    base = C.continue_branch(bvp, o, "beta1", (lo, hi), ds=2e-3, ds_max=5e-2, max_steps=200)
    bp = base.specials(C.BP)[0]
    assert abs(bp.param - res) < 1e-3
    orb, tan = C.switch_branch(bvp, base, 0, max_dmu=0.02)
    assert abs(orb.params["beta1"] - bp.param) <= 0.02
    cross = C.continue_branch(bvp, orb, "beta1", (lo, hi), ds=2e-3, ds_max=5e-2, max_steps=200,
                              tangent=tan, both=True)
    # no jump onto the base branch: the crossing branch meets the same branch point
    assert any(abs(s.param - bp.param) < 1e-4 for s in cross.specials(C.BP))


def test_special_points_stable_under_mesh_change():
    from revhom import cli

    p = ExampleParams.at_resonance(2, 0, beta3=4.0)
    found = []
    for n in (200, 400):
        d = cli.diagram(p, "beta2", switch=False, intervals=n)
        found.append(sorted(s.param for s in d.base.specials(C.FOLD)))
    assert len(found[0]) == len(found[1]) >= 2
    assert np.max(np.abs(np.subtract(*found))) <= 1e-4


def test_special_point_orbits_and_fold_structure(fold_branch):
    for sp_ in fold_branch.special:
        bvp = fold_branch.bvp.with_params(beta2=sp_.param)
        X = sp_.states.reshape(-1, 4)
        assert np.max(np.abs(bvp.residual(X))) <= 1e-8
    tmu = np.array([p.tangent_mu for p in fold_branch.points])
    regular = np.array([not p.special for p in fold_branch.points])
    changes = np.count_nonzero(np.diff(np.sign(tmu[regular])) != 0)
    assert changes == len(fold_branch.specials(C.FOLD))
