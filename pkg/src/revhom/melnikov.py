"""Melnikov-type bifurcation coefficients for symmetric homoclinic orbits.

Given the homoclinic orbit ``x^h``, the bounded symmetric variational
solution ``phi2`` and the bounded adjoint solution ``psi``, the coefficients

    a2     = int <psi, D_mu f>
    b2     = 1/2 int <psi, D2f(phi2, phi2)>
    abar2  = int <psi, D_mu D_x f phi2 + D2f(xi_mu, phi2)>
    bbar2  = int <psi, 1/6 D3f(phi2, phi2, phi2) + D2f(xi_alpha, phi2)>

decide the type and direction of the bifurcation.  Inner products use the
system's Gram matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import duffing
from .duffing import ExampleParams, PlanarFundamentalSet
from .quadrature import WindowTooSmallError, cumulative_from, integrate_line, panels
from .system import ConfigurationError, ReversibleSystem

__all__ = [
    "Estimate",
    "MelnikovInputs",
    "MelnikovReport",
    "NumericalQualityError",
    "WindowTooSmallError",
    "compute_a2_b2",
    "compute_abar2",
    "xi_alpha",
    "compute_bbar2_quadrature",
    "compute_bbar2_closed",
    "classify",
    "solvability_residual",
    "example_inputs",
    "example_report",
    "CLASSIFICATIONS",
    "DEGENERACY_TOL",
]

DEGENERACY_TOL = 1e-8
CLASSIFICATIONS = (
    "persistence",
    "saddle-node-super",
    "saddle-node-sub",
    "transcritical",
    "pitchfork-super",
    "pitchfork-sub",
    "degenerate",
)
MODES = ("saddle_node", "transcritical", "pitchfork")


class NumericalQualityError(ArithmeticError):
    """A numerical consistency check (Wronskian, solvability) failed."""


@dataclass(frozen=True)
class Estimate:
    """Quadrature value with an error estimate and the integrand scale ``int |g|``."""

    value: float
    error: float
    scale: float

    def __float__(self):
        return float(self.value)

    def is_zero(self, tol: float = DEGENERACY_TOL) -> bool:
        return abs(self.value) <= tol * max(self.scale, np.finfo(float).tiny)

    def to_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "scale": self.scale}


@dataclass(frozen=True)
class MelnikovInputs:
    """Orbit, bounded variational solution and bounded adjoint solution.

    ``orbit``, ``phi2`` and ``psi`` are vectorized callables ``t -> (..., 2n)``.
    ``param`` names the bifurcation parameter; ``system`` is evaluated at
    its stored parameters, which must be the bifurcation point.
    ``dphi2``/``dpsi`` are optional analytic derivatives used for checks.
    """

    system: ReversibleSystem
    orbit: Callable
    phi2: Callable
    psi: Callable
    param: str
    T_q: float | None = None
    order: int = 10
    dphi2: Callable | None = None
    dpsi: Callable | None = None
    label: dict = field(default_factory=dict, compare=False)

    def inner(self, a, b):
        G = self.system.gram
        return np.einsum("...i,ij,...j->...", a, G, b)

    def scaled(self, c: float = 1.0, d: float = 1.0) -> "MelnikovInputs":
        """Inputs with ``phi2 -> c phi2`` and ``psi -> d psi``."""
        phi2, psi, dphi2, dpsi = self.phi2, self.psi, self.dphi2, self.dpsi
        return replace(
            self,
            phi2=lambda t: c * phi2(t),
            psi=lambda t: d * psi(t),
            dphi2=None if dphi2 is None else (lambda t: c * dphi2(t)),
            dpsi=None if dpsi is None else (lambda t: d * dpsi(t)),
        )

    def check(self, ts=None, tol: float = 1e-8) -> dict:
        """Equation residuals of ``phi2`` and ``psi`` and their symmetry at t = 0."""
        ts = np.linspace(-6, 6, 25) if ts is None else np.asarray(ts, float)
        sysm = self.system
        x = self.orbit(ts)
        J = sysm.jacobian(x)
        out = {}
        if self.dphi2 is not None:
            r = self.dphi2(ts) - np.einsum("...ij,...j->...i", J, self.phi2(ts))
            out["phi2"] = float(np.max(np.abs(r)))
        if self.dpsi is not None:
            G = sysm.gram
            adj = np.linalg.solve(G, np.einsum("...ji,jk,...k->...i", J, G, self.psi(ts))[..., None])[..., 0] \
                if sysm.inner is not None else np.einsum("...ji,...j->...i", J, self.psi(ts))
            out["psi"] = float(np.max(np.abs(self.dpsi(ts) + adj)))
        R = sysm.R
        p0, q0 = self.phi2(0.0), self.psi(0.0)
        out["phi2_fixR"] = float(np.max(np.abs(R @ p0 - p0)))
        out["psi_fix_minusR"] = float(np.max(np.abs(R.T @ q0 + q0)))
        out["ok"] = all(v <= tol for v in out.values())
        return out


def _integrate(inp: MelnikovInputs, g: Callable, T: float | None = None) -> Estimate:
    T = inp.T_q if T is None else T
    val, err, T_used = integrate_line(g, T, order=inp.order)
    scale, _, _ = integrate_line(lambda t: np.abs(g(t)), T_used, order=inp.order)
    return Estimate(float(val), float(err), float(scale))


def compute_a2_b2(inp: MelnikovInputs) -> tuple[Estimate, Estimate]:
    """Saddle-node coefficients ``(a2, b2)``."""
    sysm = inp.system

    def ga(t):
        return inp.inner(inp.psi(t), sysm.param_derivative(inp.orbit(t), inp.param))

    def gb(t):
        ph = inp.phi2(t)
        return 0.5 * inp.inner(inp.psi(t), sysm.hessian_action(inp.orbit(t), ph, ph))

    return _integrate(inp, ga), _integrate(inp, gb)


def compute_abar2(inp: MelnikovInputs, xi_mu: Callable | None = None) -> Estimate:
    """Transcritical/pitchfork coefficient ``abar2``.

    ``xi_mu`` solves the variational equation forced by ``D_mu f``.  When it
    is omitted, ``D_mu f`` must vanish along the orbit and ``xi_mu = 0``.
    """
    sysm = inp.system
    if xi_mu is None:
        ts = np.linspace(-10, 10, 41)
        forcing = sysm.param_derivative(inp.orbit(ts), inp.param)
        if np.max(np.abs(forcing)) > 1e-12:
            raise ConfigurationError("D_mu f does not vanish on the orbit; supply xi_mu")

    def g(t):
        x, ph, ps = inp.orbit(t), inp.phi2(t), inp.psi(t)
        v = sysm.param_jacobian_action(x, ph, inp.param)
        if xi_mu is not None:
            v = v + sysm.hessian_action(x, xi_mu(t), ph)
        return inp.inner(ps, v)

    return _integrate(inp, g)


def _block_indices(sysm: ReversibleSystem, block: int) -> tuple[int, int]:
    # planar blocks of a second-order system: (x_k, x_{k+n})
    return block - 1, block - 1 + sysm.n


def xi_alpha(inp: MelnikovInputs, fundamentals: PlanarFundamentalSet, *, T: float = 40.0,
             width: float = 0.5, solvability_tol: float = 1e-9):
    """Symmetric decaying solution of the VE forced by ``1/2 D2f(phi2, phi2)``.

    The forcing must lie in the plane of ``fundamentals``.  Returns
    ``(nodes, values)`` for t >= 0 on Gauss panels of [0, T]; the solution at
    -t is ``R xi(t)``.  Variation of constants:

        xi = phi_b int_0^t <psi_b, F> - phi_u int_t^inf <psi_u, F>.
    """
    sysm = inp.system
    i, j = _block_indices(sysm, fundamentals.block)
    other = [k for k in range(sysm.dim) if k not in (i, j)]

    def forcing(t):
        ph = inp.phi2(t)
        return 0.5 * sysm.hessian_action(inp.orbit(t), ph, ph)

    ts = np.linspace(-T / 2, T / 2, 201)
    F = forcing(ts)
    if np.max(np.abs(F[..., other])) > 1e-12 * max(1.0, np.max(np.abs(F))):
        raise ConfigurationError("forcing leaves the planar block; the example requires beta3 = 0")

    def fb(t):
        return forcing(t)[..., [i, j]]

    def pair_b(t):
        return np.sum(fundamentals.psi_b(t) * fb(t), axis=-1)

    def pair_u(t):
        return np.sum(fundamentals.psi_u(t) * fb(t), axis=-1)

    # the bounded adjoint must annihilate the forcing (otherwise a projection is needed)
    sv, _, _ = integrate_line(pair_u, T)
    ss, _, _ = integrate_line(lambda t: np.abs(pair_u(t)), T)
    if abs(sv) > solvability_tol * max(ss, 1e-300):
        raise NumericalQualityError(f"forcing is not orthogonal to the bounded adjoint ({sv:.3e})")

    pn = panels(0.0, T, width)
    A = cumulative_from(pair_b, pn, "left")
    B = cumulative_from(pair_u, pn, "right")
    blk = fundamentals.phi_b(pn.nodes) * A[:, None] - fundamentals.phi_u(pn.nodes) * B[:, None]
    xi = np.zeros((pn.nodes.size, sysm.dim))
    xi[:, i] = blk[:, 0]
    xi[:, j] = blk[:, 1]
    return pn, xi


def compute_bbar2_quadrature(inp: MelnikovInputs, fundamentals: PlanarFundamentalSet, *,
                             T: float = 40.0, width: float = 0.5,
                             wronskian_tol: float = 1e-8) -> Estimate:
    """Pitchfork coefficient ``bbar2`` by quadrature.

    ``fundamentals`` is the planar block carrying the orbit (block 1 for the
    example).  The integrand is even under the reverser, so it is evaluated
    on [0, T] at t and -t.
    """
    ws = fundamentals.wronskian(np.array([-5.0, 0.0, 5.0]))
    if np.max(np.abs(ws - 1.0)) > wronskian_tol:
        raise NumericalQualityError(f"Wronskian drift {np.max(np.abs(ws - 1)):.2e}")
    sysm = inp.system
    R = sysm.R

    def evaluate(w):
        pn, xi = xi_alpha(inp, fundamentals, T=T, width=w)
        t = pn.nodes
        total = np.zeros_like(t)
        absval = np.zeros_like(t)
        for sgn, xv in ((1.0, xi), (-1.0, xi @ R.T)):
            tt = sgn * t
            x, ph, ps = inp.orbit(tt), inp.phi2(tt), inp.psi(tt)
            v = sysm.third_action(x, ph, ph, ph) / 6.0 + sysm.hessian_action(x, xv, ph)
            g = inp.inner(ps, v)
            total += g
            absval += np.abs(g)
        edge = np.max(np.abs(total[-pn.order:]))
        return float(pn.weights @ total), float(pn.weights @ absval), edge

    val, scale, edge = evaluate(width)
    if edge > 1e-13 * max(scale, 1e-300):
        raise WindowTooSmallError(f"bbar2 integrand not decayed at T={T}", 2 * T)
    coarse, _, _ = evaluate(2 * width)
    return Estimate(val, abs(val - coarse), scale)


def compute_bbar2_closed(s: float, ell: int) -> float:
    """Closed-form ``bbar2`` for the example with coupling tied to beta1."""
    return duffing.bbar2_closed(s, ell)


def solvability_residual(inp: MelnikovInputs) -> float:
    """``int <psi, phi2'> + <psi', phi2> dt``, which vanishes for decaying pairs."""
    if inp.dphi2 is None or inp.dpsi is None:
        raise ConfigurationError("solvability check needs dphi2 and dpsi")

    def g(t):
        return inp.inner(inp.psi(t), inp.dphi2(t)) + inp.inner(inp.dpsi(t), inp.phi2(t))

    val, _, _ = integrate_line(g, inp.T_q, order=inp.order)
    return float(val)


def _mode_key(mode: str) -> str:
    key = mode.replace("-", "_")
    if key not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    return key


def classify(mode: str, *, a2=None, b2=None, abar2=None, bbar2=None,
             tol: float = DEGENERACY_TOL) -> str:
    """Bifurcation type from the coefficients required by ``mode``.

    Coefficients are :class:`Estimate` objects (zero when below ``tol`` times
    their integrand scale) or plain floats (compared with ``tol``).
    """
    key = _mode_key(mode)
    needed = {"saddle_node": ("a2", "b2"), "transcritical": ("abar2", "b2"),
              "pitchfork": ("abar2", "bbar2")}[key]
    given = {"a2": a2, "b2": b2, "abar2": abar2, "bbar2": bbar2}
    missing = [k for k in needed if given[k] is None]
    if missing:
        raise ConfigurationError(f"mode {key} needs coefficients {missing}")

    def zero(c):
        return c.is_zero(tol) if isinstance(c, Estimate) else abs(float(c)) <= tol

    c1, c2 = (given[k] for k in needed)
    if zero(c1) or zero(c2):
        return "degenerate"
    prod = float(c1) * float(c2)
    if key == "saddle_node":
        return "saddle-node-super" if prod < 0 else "saddle-node-sub"
    if key == "transcritical":
        return "transcritical"
    return "pitchfork-super" if prod < 0 else "pitchfork-sub"


@dataclass(frozen=True)
class MelnikovReport:
    mode: str
    classification: str
    a2: Estimate | None = None
    b2: Estimate | None = None
    abar2: Estimate | None = None
    bbar2: Estimate | None = None
    bbar2_closed: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        errors = {}
        for k in ("a2", "b2", "abar2", "bbar2"):
            e = getattr(self, k)
            out[k] = None if e is None else e.value
            if e is not None:
                errors[k] = e.error
        out["classification"] = self.classification
        out["errors"] = errors
        out["mode"] = self.mode
        if self.bbar2_closed is not None:
            out["bbar2_closed"] = self.bbar2_closed
        out["inputs"] = self.inputs
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=False, **kw)


# example specializations

def _xi2_second(t, s, beta1, ell):
    xi, _ = duffing.bounded_xi2(t, s, ell)
    sh = 1.0 / np.cosh(t)
    return (s - 2 * beta1 * sh * sh) * xi


def example_inputs(p: ExampleParams, param: str, T_q: float | None = None) -> MelnikovInputs:
    """Inputs for the example at ``beta2 = 0`` with beta1 at the ``ell`` resonance.

    ``phi2 = (0, xi2, 0, xi4)`` and ``psi = (0, -xi4, 0, xi2)``.
    """
    res = duffing.resonance_beta1(p.s, p.ell)
    if abs(p.beta1 - res) > 1e-9 * max(1.0, res):
        raise ConfigurationError(
            f"beta1={p.beta1} is off resonance (expected {res} for ell={p.ell})"
        )
    p0 = replace(p, beta2=0.0)
    sysm = duffing.make_system(p0)
    s, ell, b1 = p.s, p.ell, p.beta1

    def phi2(t):
        xi, dxi = duffing.bounded_xi2(t, s, ell)
        z = np.zeros_like(xi)
        return np.stack([z, xi, z, dxi], axis=-1)

    def dphi2(t):
        _, dxi = duffing.bounded_xi2(t, s, ell)
        z = np.zeros_like(dxi)
        return np.stack([z, dxi, z, _xi2_second(t, s, b1, ell)], axis=-1)

    def psi(t):
        xi, dxi = duffing.bounded_xi2(t, s, ell)
        z = np.zeros_like(xi)
        return np.stack([z, -dxi, z, xi], axis=-1)

    def dpsi(t):
        _, dxi = duffing.bounded_xi2(t, s, ell)
        z = np.zeros_like(dxi)
        return np.stack([z, -_xi2_second(t, s, b1, ell), z, dxi], axis=-1)

    return MelnikovInputs(
        system=sysm,
        orbit=duffing.homoclinic_exact,
        phi2=phi2,
        psi=psi,
        param=param,
        T_q=T_q,
        dphi2=dphi2,
        dpsi=dpsi,
        label={"s": p.s, "ell": ell, "beta1": b1, "beta3": p.beta3,
               "coupling": "beta1" if p.coupling is None else p.coupling, "param": param},
    )


def example_report(p: ExampleParams, mode: str, T_q: float | None = None) -> MelnikovReport:
    """Coefficients and classification for the example in the given mode."""
    key = _mode_key(mode)
    if key == "saddle_node":
        inp = example_inputs(p, "beta2", T_q)
        a2, b2 = compute_a2_b2(inp)
        cls = classify(key, a2=a2, b2=b2)
        return MelnikovReport(key, cls, a2=a2, b2=b2, inputs=inp.label)
    inp = example_inputs(p, "beta1", T_q)
    abar2 = compute_abar2(inp)
    if key == "transcritical":
        _, b2 = compute_a2_b2(inp)
        return MelnikovReport(key, classify(key, abar2=abar2, b2=b2), abar2=abar2, b2=b2,
                              inputs=inp.label)
    if p.beta3 != 0:
        raise ConfigurationError("pitchfork mode requires beta3 = 0")
    fund = duffing.planar_fundamentals(1, p)
    bbar2 = compute_bbar2_quadrature(inp, fund)
    closed = compute_bbar2_closed(p.s, p.ell) if p.coupling is None else None
    return MelnikovReport(key, classify(key, abar2=abar2, bbar2=bbar2), abar2=abar2,
                          bbar2=bbar2, bbar2_closed=closed, inputs=inp.label)
