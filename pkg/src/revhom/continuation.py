"""Pseudo-arclength continuation of homoclinic BVP solutions in one parameter.

The unknowns are the node states ``u`` and the parameter ``mu``.  Distances
use the weighted norm ``|(u, mu)|^2 = int |x(t)|^2 dt + mu^2`` (trapezoid
weights on the mesh), so step sizes are comparable to changes in the orbit
measures.

Folds are flagged by a sign change of the parameter component of the
tangent.  Branch points are flagged by a sign change of the determinant of
the bordered Jacobian ``[G_u G_mu; tau_prev^T W]``, whose sign comes from
the sparse LU factors.  Both are localized by Illinois iteration in
arclength.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .bvp import (ConvergenceError, HomoclinicBVP, HomoclinicOrbit, OrbitMeasures, _make_orbit,
                  solve)

log = logging.getLogger(__name__)

__all__ = [
    "FOLD",
    "BP",
    "BranchPoint",
    "SpecialPoint",
    "Branch",
    "ContinuationError",
    "SwitchError",
    "Consistency",
    "continue_branch",
    "switch_branch",
    "orbits_at",
    "verify_against_melnikov",
    "branch_csv",
    "branch_json",
]

FOLD = "FOLD"
BP = "BP"
# smallest accepted cosine between consecutive unit tangents
MIN_TURN_COS = 0.99


class ContinuationError(RuntimeError):
    """The continuation could not start."""


class SwitchError(RuntimeError):
    """Branch switching failed for both perturbation signs."""


@dataclass(frozen=True)
class BranchPoint:
    param: float
    measures: OrbitMeasures
    arclength: float
    tangent_mu: float
    det_sign: int
    logdet: float
    states: np.ndarray = field(repr=False)
    tangent: np.ndarray = field(repr=False)
    special: str = ""


@dataclass(frozen=True)
class SpecialPoint:
    kind: str
    param: float
    residual: float
    index: int
    states: np.ndarray = field(repr=False)
    tangent: np.ndarray = field(repr=False)
    bracket: tuple[float, float] = (float("nan"), float("nan"))


@dataclass
class Branch:
    """Continuation curve with localized special points.

    ``points`` are ordered along the branch; special points are also stored
    as points (with ``special`` set) at their position.
    """

    param: str
    fixed: dict
    points: list[BranchPoint]
    special: list[SpecialPoint]
    reason: str = ""
    bvp: HomoclinicBVP | None = field(default=None, repr=False)

    @property
    def params(self) -> np.ndarray:
        return np.array([p.param for p in self.points])

    def measure(self, name: str) -> np.ndarray:
        return np.array([getattr(p.measures, name) for p in self.points])

    @property
    def arclength(self) -> np.ndarray:
        return np.array([p.arclength for p in self.points])

    def specials(self, kind: str) -> list[SpecialPoint]:
        return [s for s in self.special if s.kind == kind]

    def orbit(self, k: int) -> HomoclinicOrbit:
        p = self.points[k]
        b = self.bvp.with_params(**{self.param: p.param})
        return _make_orbit(b, p.states.reshape(-1, b.dim), b.residual(p.states), 0)


# bordered linear algebra

def _weights(bvp: HomoclinicBVP) -> np.ndarray:
    h = bvp.h
    w = np.zeros(bvp.n_intervals + 1)
    w[:-1] += h / 2
    w[1:] += h / 2
    return np.concatenate([np.repeat(w, bvp.dim), [1.0]])


def _perm_parity(p: np.ndarray) -> int:
    p = np.asarray(p)
    seen = np.zeros(p.size, dtype=bool)
    cycles = 0
    for i in range(p.size):
        if not seen[i]:
            cycles += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = p[j]
    return -1 if (p.size - cycles) % 2 else 1


def _lu_det(lu) -> tuple[int, float]:
    d = lu.U.diagonal()
    sign = int(np.prod(np.sign(d))) * _perm_parity(lu.perm_r) * _perm_parity(lu.perm_c)
    return sign, float(np.sum(np.log(np.abs(d))))


class _Bordered:
    """Solver for ``[[Gu, g], [r_u, r_mu]]`` by block elimination on the LU of ``Gu``.

    One step of iterative refinement with the full matrix repairs the loss
    of accuracy of plain block elimination when ``Gu`` is nearly singular
    (near folds).
    """

    def __init__(self, Gu, g, row):
        self.Gu, self.g, self.r = Gu, g, row
        self.lu = splu(Gu)
        self.w = self.lu.solve(g)
        self.schur = row[-1] - row[:-1] @ self.w

    def _solve(self, rhs):
        v = self.lu.solve(rhs[:-1])
        xi = (rhs[-1] - self.r[:-1] @ v) / self.schur
        return np.concatenate([v - xi * self.w, [xi]])

    def matvec(self, z):
        return np.concatenate([self.Gu @ z[:-1] + self.g * z[-1], [self.r @ z]])

    def solve(self, rhs):
        z = self._solve(rhs)
        return z + self._solve(rhs - self.matvec(z))

    def det_info(self) -> tuple[int, float]:
        sign, logdet = _lu_det(self.lu)
        return sign * int(np.sign(self.schur)), logdet + float(np.log(abs(self.schur)))


class _Problem:
    """Residual, bordered Jacobian and helpers at parameter values of one BVP family."""

    def __init__(self, bvp: HomoclinicBVP, param: str):
        if param not in bvp.system.params:
            raise ContinuationError(f"unknown parameter {param!r}")
        self.base = bvp if bvp.Ls_ref is not None else bvp.with_params()
        self.param = param
        self.W = _weights(bvp)
        self.m = bvp.n_unknowns
        self._cache: dict[float, HomoclinicBVP] = {}

    def bvp(self, mu: float) -> HomoclinicBVP:
        b = self._cache.get(mu)
        if b is None:
            if len(self._cache) > 8:
                self._cache.clear()
            b = self.base.with_params(**{self.param: mu})
            self._cache[mu] = b
        return b

    def system(self, y):
        u, mu = y[:-1], float(y[-1])
        b = self.bvp(mu)
        res, Gu = b.residual_and_jacobian(u)
        Gmu = b.param_derivative(u, self.param)
        return res, Gu, Gmu

    def bordered(self, Gu, Gmu, row):
        return _Bordered(Gu, Gmu, row)

    @staticmethod
    def det_info(lu) -> tuple[int, float]:
        return lu.det_info()

    def tangent(self, y, row):
        """Tangent solving ``G_x z = 0, row . z = 1``, normalized in the W norm."""
        _, Gu, Gmu = self.system(y)
        lu = self.bordered(Gu, Gmu, row)
        e = np.zeros(self.m + 1)
        e[-1] = 1.0
        z = lu.solve(e)
        z /= np.sqrt(z @ (self.W * z))
        sign, logdet = self.det_info(lu)
        return z, sign, logdet

    def correct(self, y_pred, tau, y_anchor, ds, tol=1e-10, step_tol=1e-9, max_iter=10):
        """Newton on ``G = 0`` with the arclength condition ``tau.W.(y - y_anchor) = ds``."""
        y = y_pred.copy()
        row = self.W * tau
        for it in range(1, max_iter + 1):
            res, Gu, Gmu = self.system(y)
            lu = self.bordered(Gu, Gmu, row)
            rhs = np.concatenate([res, [row @ (y - y_anchor) - ds]])
            dy = lu.solve(-rhs)
            y = y + dy
            if not np.all(np.isfinite(y)):
                raise ConvergenceError("corrector diverged", np.inf, it)
            if np.max(np.abs(dy)) <= step_tol:
                res = self.system(y)[0]
                if np.max(np.abs(res)) <= tol:
                    return y, it, float(np.max(np.abs(res)))
        raise ConvergenceError("corrector did not converge", float(np.max(np.abs(res))), max_iter)

    def measures(self, y) -> OrbitMeasures:
        b = self.bvp(float(y[-1]))
        X = y[:-1].reshape(-1, b.dim)
        return _make_orbit(b, X, b.residual(X), 0).measures

    def dist(self, a, b) -> float:
        d = a - b
        return float(np.sqrt(d @ (self.W * d)))


def _point(prob: _Problem, y, tau, sign, logdet, s, special="") -> BranchPoint:
    return BranchPoint(float(y[-1]), prob.measures(y), float(s), float(tau[-1]), int(sign),
                       float(logdet), y[:-1].copy(), tau.copy(), special)


def _march(prob: _Problem, y0, tau0, mu_range, ds, ds_min, ds_max, max_steps):
    """One-directional continuation; returns points as (y, tau, sign, logdet, s)."""
    lo, hi = mu_range
    out = []
    y, tau = y0, tau0
    z, sign, logdet = prob.tangent(y, prob.W * tau)
    out.append((y, tau, sign, logdet, 0.0))
    s = 0.0
    reason = "max_steps"
    h = ds
    steps = 0
    while steps < max_steps:
        try:
            yn, its, _ = prob.correct(y + h * tau, tau, y, h)
        except (ConvergenceError, np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
            h /= 2
            if h < ds_min:
                reason = f"step below minimum: {exc}"
                break
            continue
        row = prob.W * tau
        tn, sign, logdet = prob.tangent(yn, row)
        if tn @ row < 0:
            tn = -tn
        if tn @ row < MIN_TURN_COS and h / 2 >= ds_min:
            # sharp turn: likely a jump onto a crossing branch near a branch point
            h /= 2
            continue
        steps += 1
        s += prob.dist(yn, y)
        y, tau = yn, tn
        out.append((y, tau, sign, logdet, s))
        if not lo <= y[-1] <= hi:
            reason = "range"
            break
        if its <= 3:
            h = min(h * 1.5, ds_max)
        elif its >= 7:
            h = max(h / 2, ds_min)
    return out, reason


def _illinois(g, a: float, b: float, ga: float, gb: float, width, max_iter: int = 60):
    """Root of ``g`` on [a, b] with ``ga * gb < 0``; stops when ``width(a, b)`` is small."""
    x, gx = a, ga
    for _ in range(max_iter):
        x = (a * gb - b * ga) / (gb - ga)
        gx = g(x)
        if gx == 0:
            break
        if gx * gb < 0:
            a, ga = b, gb
        else:
            ga /= 2
        b, gb = x, gx
        if width(a, b):
            break
    return x, gx


def _localize(prob: _Problem, P, Q, kind: str, tol_mu: float):
    """Localize a special point between consecutive raw points P and Q."""
    yP, tP, sP, lP = P[0], P[1], P[2], P[3]
    row = prob.W * tP
    ds_total = row @ (Q[0] - yP)
    cache = {}

    def at(sv):
        if sv not in cache:
            if sv == 0.0:
                y = yP
            else:
                # secant predictor between the bracketing points
                y, _, _ = prob.correct(yP + (sv / ds_total) * (Q[0] - yP), tP, yP, sv,
                                       max_iter=20)
            z, sign, logdet = prob.tangent(y, row)
            cache[sv] = (y, z, sign, logdet)
        return cache[sv]

    def g(sv):
        y, z, sign, logdet = at(sv)
        if kind == FOLD:
            return z[-1]
        return sign * np.exp(np.clip(logdet - lP, -50, 50))

    g0 = g(0.0)
    g1 = g(ds_total)
    if g0 * g1 > 0:
        return None
    def width(a, b):
        ya, yb = at(a)[0], at(b)[0]
        return abs(ya[-1] - yb[-1]) <= tol_mu and abs(a - b) <= 1e-6 * max(1.0, abs(ds_total)) \
            or abs(a - b) <= 1e-12

    try:
        x, gx = _illinois(g, 0.0, ds_total, g0, g1, width)
    except (ConvergenceError, RuntimeError):
        # the extended system is singular at a branch point; keep the best
        # point found so far
        x = min(cache, key=lambda sv: abs(g(sv)))
    y, z, _, _ = at(x)
    res = float(np.max(np.abs(prob.system(y)[0])))
    keys = sorted(cache)
    return y, z, res, (float(at(keys[0])[0][-1]), float(at(keys[-1])[0][-1]))


def _orient(prob: _Problem, z, direction: int):
    if abs(z[-1]) > 1e-6:
        return z if np.sign(z[-1]) == direction else -z
    k = int(np.argmax(np.abs(z[:-1])))
    return z if np.sign(z[k]) == direction else -z


def continue_branch(bvp: HomoclinicBVP, start: HomoclinicOrbit | np.ndarray, param: str,
                    mu_range: Sequence[float], *, ds: float = 1e-2, ds_min: float = 1e-5,
                    ds_max: float = 5e-2, max_steps: int = 400, direction: int = 1,
                    both: bool = False, tangent: np.ndarray | None = None,
                    detect: Sequence[str] = (FOLD, BP), tol_mu: float = 1e-7) -> Branch:
    """Continue a BVP solution in ``param`` within ``mu_range``.

    ``direction`` picks the initial sense (+1: increasing parameter; when the
    start is a fold, the sign of the largest state component of the
    tangent).  ``both=True`` continues both ways from the start.  A given
    ``tangent`` (length ``n_unknowns + 1``) overrides the initial tangent
    and is followed as given (reversed for negative ``direction``).
    An orbit start supplies its own parameter value.
    """
    prob = _Problem(bvp, param)
    mu0 = float(bvp.system.params[param])
    if isinstance(start, HomoclinicOrbit) and param in start.params:
        mu0 = float(start.params[param])
    u0 = np.asarray(start.states if isinstance(start, HomoclinicOrbit) else start, float).ravel()
    y0 = np.concatenate([u0, [mu0]])
    res0 = prob.system(y0)[0]
    if np.max(np.abs(res0)) > 1e-8:
        raise ContinuationError(f"start is not a solution (residual {np.max(np.abs(res0)):.2e})")
    if tangent is None:
        # a fixed generic bordering row keeps the start well posed at folds
        rng = np.random.default_rng(12345)
        r = rng.standard_normal(prob.m + 1)
        r[-1] = 10.0 * np.sqrt(prob.m)
        z, _, _ = prob.tangent(y0, r)
        z = _orient(prob, z, 1 if direction >= 0 else -1)
    else:
        z = np.asarray(tangent, float)
        z = np.sign(direction or 1) * z / np.sqrt(z @ (prob.W * z))

    fwd, reason_f = _march(prob, y0, z, mu_range, ds, ds_min, ds_max, max_steps)
    raw = fwd
    reason = reason_f
    if both:
        bwd, reason_b = _march(prob, y0, -z, mu_range, ds, ds_min, ds_max, max_steps)
        # reverse the backward half so tangents and determinant signs follow the branch
        rev = [(y, -t, -sg, ld, -s) for (y, t, sg, ld, s) in bwd[:0:-1]]
        raw = rev + fwd
        reason = f"backward: {reason_b}; forward: {reason_f}"
    s0 = raw[0][4]
    raw = [(y, t, sg, ld, s - s0) for (y, t, sg, ld, s) in raw]

    points: list[BranchPoint] = []
    special: list[SpecialPoint] = []
    for k, P in enumerate(raw):
        points.append(_point(prob, *P))
        if k + 1 == len(raw):
            break
        Q = raw[k + 1]
        found = []
        if FOLD in detect and np.sign(P[1][-1]) * np.sign(Q[1][-1]) < 0:
            found.append(FOLD)
        if BP in detect and P[2] * Q[2] < 0:
            found.append(BP)
        for kind in found:
            try:
                loc = _localize(prob, P, Q, kind, tol_mu)
            except (ConvergenceError, RuntimeError) as exc:
                log.warning("localization of %s failed: %s", kind, exc)
                loc = None
            if loc is None:
                continue
            y, zz, res, br = loc
            s_loc = P[4] + prob.dist(y, P[0])
            sp = SpecialPoint(kind, float(y[-1]), res, len(points), y[:-1].copy(), zz, br)
            special.append(sp)
            points.append(BranchPoint(float(y[-1]), prob.measures(y), float(s_loc), float(zz[-1]),
                                      P[2], P[3], y[:-1].copy(), zz, kind))
    return Branch(param, dict(bvp.system.params), points, special, reason, prob.base)


def _null_vector(prob: _Problem, y, tau, iters: int = 6):
    """Second null direction of G_x at a branch point, W-orthogonal to ``tau``."""
    row = prob.W * tau
    _, Gu, Gmu = prob.system(y)
    lu = prob.bordered(Gu, Gmu, row)
    rng = np.random.default_rng(7)
    v = rng.standard_normal(prob.m + 1)
    for _ in range(iters):
        v = lu.solve(v)
        v -= (row @ v) * tau
        v /= np.sqrt(v @ (prob.W * v))
    k = int(np.argmax(np.abs(v[:-1])))
    return v if v[k] > 0 else -v


def switch_branch(bvp: HomoclinicBVP, branch: Branch, point: SpecialPoint | int = 0, *,
                  amplitude: float = 0.05, sign: int = 1, tol: float = 1e-10,
                  max_dmu: float | None = None, min_amplitude: float = 1e-4):
    """Converged orbit on the branch bifurcating at a branch point.

    Returns ``(orbit, tangent)`` where ``tangent`` points away from the
    branch point.  The predictor is ``y_bp + amplitude * sign * phi`` with
    ``phi`` the null direction orthogonal to the branch tangent; the
    corrector fixes the component along ``phi``.  If that sign fails, the
    opposite sign is tried.  With ``max_dmu`` the amplitude is halved (down
    to ``min_amplitude``) until the switched point lies within ``max_dmu``
    of the branch point in the parameter; a steep crossing branch otherwise
    puts the first point far from the bifurcation or on another branch.
    """
    sp = branch.specials(BP)[point] if isinstance(point, int) else point
    prob = _Problem(branch.bvp if branch.bvp is not None else bvp, branch.param)
    y_bp = np.concatenate([sp.states, [sp.param]])
    tau = sp.tangent / np.sqrt(sp.tangent @ (prob.W * sp.tangent))
    phi = _null_vector(prob, y_bp, tau)
    last = None
    for sg in (sign, -sign):
        amp = amplitude
        while True:
            try:
                y, _, res = prob.correct(y_bp + sg * amp * phi, sg * phi, y_bp, amp,
                                         tol=tol, max_iter=15)
            except (ConvergenceError, RuntimeError) as exc:
                last, y = exc, None
            if y is None or max_dmu is None or abs(y[-1] - y_bp[-1]) <= max_dmu:
                break
            last = SwitchError(f"switched point {abs(y[-1] - y_bp[-1]):.3g} away in the parameter")
            if amp / 2 < min_amplitude:
                y = None
                break
            amp /= 2
        if y is None:
            continue
        # distance from the original branch: compare with its tangent line
        d = prob.dist(y, y_bp + (prob.W * tau) @ (y - y_bp) * tau)
        if d < 10 * tol:
            last = SwitchError("corrector returned to the original branch")
            continue
        t, _, _ = prob.tangent(y, prob.W * (sg * phi))
        if t @ (prob.W * phi) * sg < 0:
            t = -t
        b = prob.bvp(float(y[-1]))
        X = y[:-1].reshape(-1, b.dim)
        return _make_orbit(b, X, b.residual(X), 0), t
    raise SwitchError(f"branch switching failed for both signs: {last}")


def orbits_at(branch: Branch, value: float, start: int = 0, *, tol: float = 1e-10
              ) -> list[HomoclinicOrbit]:
    """Orbits on ``branch`` at ``param = value``, re-solved at that value.

    Walks from point ``start`` in both directions and takes the first
    crossing of ``value`` in each, not passing another special point.
    """
    mu = branch.params
    found = []
    for step in (-1, 1):
        k = start
        while 0 <= k + step < len(mu):
            a, b = mu[k] - value, mu[k + step] - value
            if a == 0 or a * b < 0:
                w = 0.0 if a == 0 else a / (a - b)
                X = (1 - w) * branch.points[k].states + w * branch.points[k + step].states
                bvp = branch.bvp.with_params(**{branch.param: value})
                found.append(solve(bvp, X.reshape(-1, bvp.dim), tol=tol))
                break
            k += step
            if branch.points[k].special and k != start:
                break
    return found


@dataclass(frozen=True)
class Consistency:
    mode: str
    location_error: float
    side_expected: int
    side_observed: int
    exponent: float | None = None
    slope: float | None = None
    predicted: float | None = None
    fitted: float | None = None
    evenness: float | None = None
    conjugacy: float | None = None
    passed: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _contiguous(br: Branch, k0: int, mask: np.ndarray) -> np.ndarray:
    """Points reachable from index ``k0`` along the branch without leaving
    ``mask`` or crossing another special point."""
    out = np.zeros(len(mask), bool)
    for step in (-1, 1):
        k = k0 + step
        while 0 <= k < len(mask) and mask[k] and not br.points[k].special:
            out[k] = True
            k += step
    return out


def _fit_power(dm, dmu):
    keep = (np.abs(dm) > 1e-10) & (np.abs(dmu) > 1e-14)
    if keep.sum() < 3:
        return None
    p, _ = np.polyfit(np.log(np.abs(dm[keep])), np.log(np.abs(dmu[keep])), 1)
    return float(p)


def verify_against_melnikov(report, mu_star: float, branches: Sequence[Branch], *,
                            phi2_at_0: float | None = None, window: float = 0.06,
                            measure: str = "x2_at_0") -> Consistency:
    """Compare continuation output with the Melnikov predictions.

    saddle_node: ``branches[0]`` contains a FOLD; the local shape ``mu ~ m^2``
    and the side ``sign(mu - mu*) = -sign(a2 b2)`` are checked.
    transcritical: ``branches`` = [base branch with BP, crossing branch]; the
    crossing branch slope must be nonzero.  With ``phi2_at_0`` the slope is
    compared with ``-(abar2/b2) phi2(0)``.
    pitchfork: ``branches`` = [base, A, B] or [base, A]; A is one-sided with
    side ``-sign(abar2 bbar2)``; if B is given, the branches must match
    index by index with ``mu_A = mu_B`` and ``max_x2(A) = -min_x2(B)``.
    ``window`` limits the fit to points with ``|m - m*| <= window``; points
    farther than a quarter of the distance to another special point are
    also dropped.
    """
    mode = report.mode
    if mode == "saddle_node":
        br = branches[0]
        folds = br.specials(FOLD)
        if not folds:
            return Consistency(mode, np.inf, 0, 0, note="inconclusive: no FOLD on branch")
        f = min(folds, key=lambda s: abs(s.param - mu_star))
        k_f = next(k for k, p in enumerate(br.points) if p.special == FOLD and p.param == f.param)
        m_f = getattr(br.points[k_f].measures, measure)
        mu = br.params
        m = br.measure(measure)
        others = [abs(o.param - f.param) for o in br.special if o is not f]
        mu_lim = 0.25 * min(others) if others else np.inf
        near = _contiguous(br, k_f, (np.abs(m - m_f) <= window) & (np.abs(mu - f.param) <= mu_lim))
        near &= np.abs(m - m_f) > 1e-12
        if near.sum() < 4:
            return Consistency(mode, abs(f.param - mu_star), 0, 0,
                               note="inconclusive: too few points near the fold")
        p = _fit_power(m[near] - m_f, mu[near] - f.param)
        prod = float(report.a2) * float(report.b2)
        expected = -int(np.sign(prod))
        sides = np.sign(mu[near] - mu_star)
        observed = int(sides[np.abs(mu[near] - mu_star) > 1e-9][0]) if np.any(
            np.abs(mu[near] - mu_star) > 1e-9) else 0
        one_sided = bool(np.all(sides[np.abs(mu[near] - mu_star) > 1e-9] == observed))
        pred = fit = None
        if phi2_at_0:
            pred = -float(report.b2) / float(report.a2) / phi2_at_0**2
            small = near & (np.abs(m - m_f) <= window / 3)
            if small.sum() >= 2:
                fit = float(np.median((mu[small] - f.param) / (m[small] - m_f) ** 2))
        ok = (p is not None and abs(p - 2) <= 0.1 and one_sided and observed == expected)
        return Consistency(mode, abs(f.param - mu_star), expected, observed, exponent=p,
                           predicted=pred, fitted=fit, passed=ok)

    base = branches[0]
    bps = base.specials(BP)
    if not bps:
        return Consistency(mode, np.inf, 0, 0, note="inconclusive: no branch point")
    bp = min(bps, key=lambda s: abs(s.param - mu_star))
    loc = abs(bp.param - mu_star)
    if mode == "transcritical":
        if len(branches) < 2:
            return Consistency(mode, loc, 0, 0, note="inconclusive: crossing branch missing")
        cr = branches[1]
        mu, m = cr.params, cr.measure(measure)
        near = np.abs(mu - bp.param) <= window
        if near.sum() < 3:
            return Consistency(mode, loc, 0, 0, note="inconclusive: too few crossing points")
        slope = float(np.polyfit(mu[near] - bp.param, m[near], 1)[0])
        pred = None
        if phi2_at_0 is not None:
            pred = -float(report.abar2) / float(report.b2) * phi2_at_0
        return Consistency(mode, loc, 0, 0, slope=slope, predicted=pred,
                           passed=abs(slope) > 0.01)
    # pitchfork
    if len(branches) < 2:
        return Consistency(mode, loc, 0, 0, note="inconclusive: bifurcating branch missing")
    A = branches[1]
    mu, m = A.params, A.measure(measure)
    off = np.abs(mu - bp.param) > 1e-9
    sides = np.sign(mu[off] - bp.param)
    observed = int(sides[0]) if sides.size else 0
    one_sided = bool(sides.size and np.all(sides == observed))
    expected = -int(np.sign(float(report.abar2) * float(report.bbar2)))
    even = conj = None
    if len(branches) > 2:
        B = branches[2]
        n = min(len(A.points), len(B.points))
        even = float(np.max(np.abs(mu[:n] - B.params[:n])))
        conj = float(np.max(np.abs(A.measure("max_x2")[:n] + B.measure("min_x2")[:n])))
    near = off & (np.abs(m - 0) <= window)
    p = _fit_power(m[near], mu[near] - bp.param) if near.sum() >= 3 else None
    pred = fit = None
    if phi2_at_0:
        pred = -float(report.bbar2) / float(report.abar2) / phi2_at_0**2
        small = near & (np.abs(m) <= window / 3)
        if small.sum() >= 2:
            fit = float(np.median((mu[small] - bp.param) / m[small] ** 2))
    ok = one_sided and observed == expected and (conj is None or (even <= 1e-6 and conj <= 1e-6))
    return Consistency(mode, loc, expected, observed, exponent=p, predicted=pred, fitted=fit,
                       evenness=even, conjugacy=conj, passed=ok)


def branch_csv(branch: Branch, header: str | None = None) -> str:
    """Branch table ``index,param,x2_at_0,max_x2,min_x2,l2_norm,arclength,special``."""
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "param", "x2_at_0", "max_x2", "min_x2", "l2_norm", "arclength", "special"])
    for i, p in enumerate(branch.points):
        m = p.measures
        w.writerow([i, f"{p.param:.12g}", f"{m.x2_at_0:.12g}", f"{m.max_x2:.12g}",
                    f"{m.min_x2:.12g}", f"{m.l2_norm:.12g}", f"{p.arclength:.12g}", p.special])
    return buf.getvalue()


def branch_json(branch: Branch, extra: dict | None = None) -> str:
    out = {
        "param": branch.param,
        "fixed": {k: (None if v != v else v) for k, v in branch.fixed.items() if k != branch.param},
        "n_points": len(branch.points),
        "range": [float(branch.params.min()), float(branch.params.max())],
        "termination": branch.reason,
        "special_points": [
            {"type": s.kind, "param": s.param, "residual": s.residual, "index": s.index,
             "bracket": list(s.bracket)}
            for s in branch.special
        ],
    }
    if extra:
        out.update(extra)
    return json.dumps(out, indent=2)
