"""Acceptance criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary.
"""

import filecmp
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import GOLDEN_S, RESONANCE_S2
from revhom import bvp as B, cli, continuation as C, duffing, melnikov as M, monodromy as Mo
from revhom.duffing import ExampleParams

ELLS = (0, 1, 2)


def verdict(number: int, name: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_01_resonance_values():
    errs = [abs(duffing.resonance_beta1(2, ell) - RESONANCE_S2[ell]) for ell in ELLS]
    verdict(1, "resonance values", max(errs) <= 1e-6, f"max error {max(errs):.1e}")


def test_02_closed_form_cross_check():
    t0 = time.perf_counter()
    worst = 0.0
    for s in (2, 3):
        for ell in ELLS:
            rep = M.example_report(ExampleParams.at_resonance(s, ell, coupling=None), "pitchfork")
            closed = M.compute_bbar2_closed(s, ell)
            worst = max(worst, abs(rep.bbar2.value - closed) / abs(closed))
    elapsed = time.perf_counter() - t0
    verdict(2, "bbar2 quadrature vs closed form", worst <= 1e-6 and elapsed <= 30,
            f"max rel error {worst:.1e}, {elapsed:.1f} s")


def test_03_bbar2_root():
    closed = M.compute_bbar2_closed(GOLDEN_S, 0)
    rep = M.example_report(ExampleParams.at_resonance(GOLDEN_S, 0, coupling=None), "pitchfork")
    quad = rep.bbar2.value
    verdict(3, "bbar2 root at the golden ratio", abs(closed) <= 1e-12 and abs(quad) <= 1e-6,
            f"closed {closed:.1e}, quadrature {quad:.1e}")


def test_04_abar2_sign():
    vals = [M.compute_abar2(M.example_inputs(ExampleParams.at_resonance(s, ell), "beta1")).value
            for s in (1, 2, 3) for ell in ELLS]
    verdict(4, "abar2 negative", max(vals) < 0, f"largest abar2 {max(vals):.4f}")


def test_05_exact_orbit_recovery():
    # beta3 = 4 makes the orbit isolated; at beta3 = 0 the resonant orbit
    # family is degenerate and Newton's convergence rate is not defined
    p = ExampleParams.at_resonance(2, 0, beta3=4.0)
    bvp = B.HomoclinicBVP(duffing.make_system(p), T=20.0, n_intervals=400)
    exact = duffing.homoclinic_exact(bvp.mesh)
    rng = np.random.default_rng(0)
    guess = exact + 1e-3 * rng.standard_normal(exact.shape)
    orbit = B.solve(bvp, guess)
    err = float(np.max(np.abs(orbit.states - exact)))
    verdict(5, "exact orbit recovery", err <= 1e-6 and orbit.iterations <= 8,
            f"sup error {err:.1e}, {orbit.iterations} Newton iterations")


def _xi0(ell):
    return float(duffing.bounded_xi2(0.0, 2, ell)[0])


def test_06_saddle_node():
    details, ok = [], True
    for ell in ELLS:
        p = ExampleParams.at_resonance(2, ell, beta3=4.0)
        d = cli.diagram(p, "beta2", switch=False)
        rep = M.example_report(p, "saddle_node")
        cons = C.verify_against_melnikov(rep, 0.0, [d.base], phi2_at_0=_xi0(ell))
        good = cons.passed and cons.location_error <= 1e-4 and abs(cons.exponent - 2) <= 0.1
        ok &= good
        details.append(f"ell={ell}: |beta2|={cons.location_error:.1e} exponent={cons.exponent:.3f} "
                       f"side {cons.side_observed:+d}/{cons.side_expected:+d}")
    verdict(6, "saddle-node reproduction", ok, "; ".join(details))


def test_07_transcritical():
    details, ok = [], True
    for ell in ELLS:
        p = ExampleParams.at_resonance(2, ell, beta3=4.0)
        d = cli.diagram(p, "beta1")
        rep = M.example_report(p, "transcritical")
        cons = C.verify_against_melnikov(rep, p.beta1, d.branches, phi2_at_0=_xi0(ell))
        good = cons.passed and cons.location_error <= 1e-3
        ok &= good
        slope = float("nan") if cons.slope is None else cons.slope
        details.append(f"ell={ell}: BP offset {cons.location_error:.1e} slope {slope:.3f}")
    verdict(7, "transcritical reproduction", ok, "; ".join(details))


def test_08_pitchfork():
    details, ok = [], True
    for ell in ELLS:
        p = ExampleParams.at_resonance(2, ell, beta3=0.0)
        d = cli.diagram(p, "beta1")
        rep = M.example_report(p, "pitchfork")
        cons = C.verify_against_melnikov(rep, p.beta1, d.branches, phi2_at_0=_xi0(ell))
        good = (cons.passed and cons.location_error <= 1e-3 and cons.conjugacy is not None
                and cons.conjugacy <= 1e-6)
        ok &= good
        details.append(f"ell={ell}: BP offset {cons.location_error:.1e} "
                       f"conjugacy {cons.conjugacy:.1e} side {cons.side_observed:+d}/"
                       f"{cons.side_expected:+d}")
    verdict(8, "pitchfork reproduction", ok, "; ".join(details))


def test_09_solvability():
    res, a2s = [], []
    for ell in ELLS:
        inp = M.example_inputs(ExampleParams.at_resonance(2, ell, beta3=4.0), "beta1")
        res.append(abs(M.solvability_residual(inp)))
        a2s.append(abs(M.compute_a2_b2(inp)[0].value))
    verdict(9, "solvability property", max(res) <= 1e-10 and max(a2s) <= 1e-10,
            f"max residual {max(res):.1e}, max |a2| for beta1 {max(a2s):.1e}")


def test_10_monodromy():
    res = ExampleParams.at_resonance(2, 0)
    off = ExampleParams(s=2.0, beta1=2.5)
    R = {(blk, ch): Mo.monodromy_matrix(blk, Mo.ChartSpec(ch), res) for blk in (1, 2)
         for ch in Mo.CHARTS}
    det = max(r.det_residual for r in R.values())
    target = np.array(sorted([np.exp(2j * math.pi * math.sqrt(2)),
                              np.exp(-2j * math.pi * math.sqrt(2))], key=lambda w: w.imag))
    eig = max(float(np.max(np.abs(np.array(sorted(R[2, ch].eigenvalues, key=lambda w: w.imag))
                                  - target))) for ch in Mo.CHARTS)
    angle_res = Mo.check_triangularizable(R[2, "plus"], R[2, "minus"]).angle
    off_p = Mo.monodromy_matrix(2, Mo.ChartSpec("plus"), off)
    off_m = Mo.monodromy_matrix(2, Mo.ChartSpec("minus"), off)
    det = max(det, off_p.det_residual, off_m.det_residual)
    angle_off = Mo.check_triangularizable(off_p, off_m).angle
    I2 = np.eye(2)
    nil = max(np.linalg.norm((R[1, ch].matrix - I2) @ (R[1, ch].matrix - I2)) for ch in Mo.CHARTS)
    dev = min(np.linalg.norm(R[1, ch].matrix - I2) for ch in Mo.CHARTS)
    ok = (det <= 1e-8 and eig <= 1e-6 and angle_res <= 1e-5 and angle_off >= 0.1
          and nil <= 1e-6 and dev >= 1e-3)
    verdict(10, "monodromy", ok,
            f"|det-1| {det:.1e}, eigenvalue error {eig:.1e}, angle {angle_res:.1e} at resonance "
            f"and {angle_off:.3f} at beta1=2.5, |(M-I)^2| {nil:.1e}, |M-I| {dev:.3f}")


def test_11_scaling_invariance():
    c, d = -3.0, 0.5
    same = []
    p = ExampleParams.at_resonance(2, 0, beta3=4.0)
    sn = M.example_inputs(p, "beta2")
    for inp in (sn, sn.scaled(c, d)):
        a2, b2 = M.compute_a2_b2(inp)
        same.append(("saddle_node", M.classify("saddle_node", a2=a2, b2=b2)))
    tc = M.example_inputs(p, "beta1")
    for inp in (tc, tc.scaled(c, d)):
        same.append(("transcritical", M.classify("transcritical", abar2=M.compute_abar2(inp),
                                                 b2=M.compute_a2_b2(inp)[1])))
    q = ExampleParams.at_resonance(2, 0)
    pf = M.example_inputs(q, "beta1")
    fund = duffing.planar_fundamentals(1, q)
    for inp in (pf, pf.scaled(c, d)):
        same.append(("pitchfork", M.classify("pitchfork", abar2=M.compute_abar2(inp),
                                             bbar2=M.compute_bbar2_quadrature(inp, fund))))
    pairs = [(same[k], same[k + 1]) for k in range(0, len(same), 2)]
    ok = all(a == b for a, b in pairs)
    verdict(11, "scaling invariance", ok, ", ".join(f"{a[0]}: {a[1]}" for a, _ in pairs))


@pytest.fixture(scope="module")
def figure_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("figures")
    dirs = [root / "run1", root / "run2"]
    procs = [subprocess.Popen([sys.executable, "-m", "revhom.cli", "figures", "--svg",
                               "--out", str(d)], stdout=subprocess.PIPE, stderr=subprocess.PIPE)
             for d in dirs]
    for proc in procs:
        _, err = proc.communicate()
        assert proc.returncode == 0, err.decode()
    return dirs


def test_12_determinism(figure_runs):
    a, b = figure_runs
    names = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    ok = bool(names) and not mismatch and not errors and sorted(p.name for p in b.iterdir()) == names
    verdict(12, "determinism", ok, f"{len(match)} files identical, {len(mismatch) + len(errors)} differ")


def test_profile_extrema(figure_runs):
    manifest = json.loads((figure_runs[0] / "manifest.json").read_text())
    bad, total = [], 0
    for panel in manifest["panels"]:
        for k, n in enumerate(panel["profile_extrema"]):
            total += 1
            if n != panel["ell"] + 1:
                bad.append(f"{panel['profiles']} ell={panel['ell']} #{k + 1}: {n}")
    ok = total > 0 and not bad
    line = f"{'PASS' if ok else 'FAIL'} [--] profile extrema: {total - len(bad)}/{total} " \
           f"profiles have ell+1 extrema" + (f" ({'; '.join(bad)})" if bad else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
