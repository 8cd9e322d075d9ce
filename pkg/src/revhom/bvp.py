"""Symmetric homoclinic orbits as a boundary value problem on [-T, 0].

The orbit is discretized by three-stage Gauss collocation.  Stage values
are eliminated interval by interval (a local Newton solve), so the unknowns
are the node states ``x_0 .. x_N`` and the residual is

    [x_{i+1} - x_i - h sum_j b_j f(Y_ij)]_i,   L_s x_0,   P_- x_N

where ``L_s`` holds stable left eigenvectors of the equilibrium (projection
condition at t = -T) and ``P_-`` gives the Fix(-R) coordinates (so x(0) lies
in Fix(R)).  The full orbit follows from ``x(t) = R x(-t)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .system import ReversibleSystem, build_Ls, equilibrium_spectrum, fix_R_projector

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceError",
    "TrivialSolutionError",
    "HomoclinicBVP",
    "HomoclinicOrbit",
    "OrbitMeasures",
    "assemble_residual",
    "solve",
    "orbit_measures",
    "component_l2",
    "count_extrema",
    "orbit_csv",
    "orbit_json",
    "GAUSS_A",
    "GAUSS_B",
    "GAUSS_C",
]

_r15 = np.sqrt(15.0)
GAUSS_C = np.array([0.5 - _r15 / 10, 0.5, 0.5 + _r15 / 10])
GAUSS_B = np.array([5 / 18, 4 / 9, 5 / 18])
GAUSS_A = np.array([
    [5 / 36, 2 / 9 - _r15 / 15, 5 / 36 - _r15 / 30],
    [5 / 36 + _r15 / 24, 2 / 9, 5 / 36 - _r15 / 24],
    [5 / 36 + _r15 / 30, 2 / 9 + _r15 / 15, 5 / 36],
])


class ConvergenceError(RuntimeError):
    """Newton iteration did not converge."""

    def __init__(self, msg: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class TrivialSolutionError(ConvergenceError):
    """Newton converged to (near) the trivial solution x = 0."""


def _aligned_Ls(system: ReversibleSystem, ref: np.ndarray | None) -> np.ndarray:
    Ls = build_Ls(equilibrium_spectrum(system))
    if ref is None:
        return Ls
    # project the reference rows onto the current row space; keeps rows continuous in mu
    P = Ls.T @ np.linalg.solve(Ls @ Ls.T, Ls)
    L = ref @ P
    return L / np.linalg.norm(L, axis=1, keepdims=True)


@dataclass(frozen=True)
class HomoclinicBVP:
    """Discretized BVP for a symmetric homoclinic orbit on [-T, 0].

    ``Ls_ref`` (optional) fixes the basis of the projection rows: the rows
    become the reference rows projected onto the current stable left
    eigenspace, which keeps the residual smooth under parameter changes.
    """

    system: ReversibleSystem
    T: float = 20.0
    n_intervals: int = 400
    mesh: np.ndarray | None = None
    Ls_ref: np.ndarray | None = None
    stage_tol: float = 1e-14
    Ls: np.ndarray = field(init=False, repr=False)
    P_minus: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mesh is None:
            mesh = np.linspace(-self.T, 0.0, self.n_intervals + 1)
        else:
            mesh = np.asarray(self.mesh, dtype=float)
            if mesh.ndim != 1 or np.any(np.diff(mesh) <= 0):
                raise ValueError("mesh must be strictly increasing")
            if abs(mesh[-1]) > 1e-14 or mesh[0] >= 0:
                raise ValueError("mesh must cover [-T, 0]")
            object.__setattr__(self, "T", float(-mesh[0]))
            object.__setattr__(self, "n_intervals", len(mesh) - 1)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "Ls", _aligned_Ls(self.system, self.Ls_ref))
        object.__setattr__(self, "P_minus", fix_R_projector(self.system)[1])

    @property
    def dim(self) -> int:
        return self.system.dim

    @property
    def n_unknowns(self) -> int:
        return (self.n_intervals + 1) * self.dim

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.mesh)

    @property
    def params(self) -> dict:
        return dict(self.system.params)

    def with_params(self, **updates) -> "HomoclinicBVP":
        """Same discretization at new parameters; projection rows stay aligned."""
        ref = self.Ls if self.Ls_ref is None else self.Ls_ref
        return replace(self, system=self.system.with_params(**updates), Ls_ref=ref)

    def with_mesh(self, mesh) -> "HomoclinicBVP":
        return replace(self, mesh=np.asarray(mesh, dtype=float))

    def stage_times(self) -> np.ndarray:
        return self.mesh[:-1, None] + self.h[:, None] * GAUSS_C

    # stage elimination

    def _stages(self, X: np.ndarray, params=None):
        """Solve the stage equations on every interval; returns stages and local matrices."""
        sysm = self.system
        d = self.dim
        h = self.h
        x0, x1 = X[:-1], X[1:]
        Z = GAUSS_C[None, :, None] * (x1 - x0)[:, None, :]
        Ad = np.kron(GAUSS_A, np.eye(d))
        eye = np.eye(3 * d)
        for _ in range(30):
            Y = x0[:, None, :] + Z
            F = sysm.evaluate(Y, params)
            J = sysm.jacobian(Y, params)
            G = Z - h[:, None, None] * np.einsum("jk,nkd->njd", GAUSS_A, F)
            M = self._stage_matrix(J, h, Ad, eye)
            dZ = np.linalg.solve(M, G.reshape(len(h), 3 * d, 1)).reshape(Z.shape)
            Z = Z - dZ
            if np.max(np.abs(dZ)) <= self.stage_tol * (1.0 + np.max(np.abs(Z))):
                break
        else:
            raise ConvergenceError("stage equations did not converge", float(np.max(np.abs(dZ))))
        Y = x0[:, None, :] + Z
        J = sysm.jacobian(Y, params)
        M = self._stage_matrix(J, h, Ad, eye)
        return Y, J, M

    @staticmethod
    def _stage_matrix(J, h, Ad, eye):
        n, _, d, _ = J.shape
        blk = np.zeros((n, 3 * d, 3 * d))
        for k in range(3):
            blk[:, :, k * d:(k + 1) * d] = Ad[None, :, k * d:(k + 1) * d] @ J[:, k]
        return eye[None] - h[:, None, None] * blk

    def _check(self, states) -> np.ndarray:
        X = np.asarray(states, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim)
        if X.shape != (self.n_intervals + 1, self.dim):
            raise ValueError(f"states must have shape {(self.n_intervals + 1, self.dim)}")
        if not np.all(np.isfinite(X)):
            raise FloatingPointError("non-finite state values")
        return X

    def residual(self, states, params=None) -> np.ndarray:
        X = self._check(states)
        Y, _, _ = self._stages(X, params)
        F = self.system.evaluate(Y, params)
        D = X[1:] - X[:-1] - self.h[:, None] * np.einsum("j,njd->nd", GAUSS_B, F)
        return np.concatenate([D.ravel(), self.Ls @ X[0], self.P_minus @ X[-1]])

    def residual_and_jacobian(self, states, params=None):
        """Residual and its sparse Jacobian with respect to the node states."""
        X = self._check(states)
        d, N = self.dim, self.n_intervals
        h = self.h
        Y, J, M = self._stages(X, params)
        F = self.system.evaluate(Y, params)
        D = X[1:] - X[:-1] - h[:, None] * np.einsum("j,njd->nd", GAUSS_B, F)
        res = np.concatenate([D.ravel(), self.Ls @ X[0], self.P_minus @ X[-1]])
        # dY/dx_i = M^{-1} (1 (x) I)
        ones = np.tile(np.eye(d), (3, 1))
        dY = np.linalg.solve(M, np.broadcast_to(ones, (N, 3 * d, d))).reshape(N, 3, d, d)
        left = -np.eye(d)[None] - h[:, None, None] * np.einsum("j,njab,njbc->nac", GAUSS_B, J, dY)
        ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        base = np.arange(N) * d
        rows = [(base[:, None] + ii.ravel()[None]).ravel()]
        cols = [(base[:, None] + jj.ravel()[None]).ravel()]
        vals = [left.ravel()]
        rows.append(np.repeat(base, d) + np.tile(np.arange(d), N))
        cols.append(np.repeat(base + d, d) + np.tile(np.arange(d), N))
        vals.append(np.ones(N * d))
        n = self.system.n
        bi, bj = np.meshgrid(np.arange(n), np.arange(d), indexing="ij")
        rows.append((N * d + bi).ravel())
        cols.append(bj.ravel())
        vals.append(self.Ls.ravel())
        rows.append((N * d + n + bi).ravel())
        cols.append((N * d + bj).ravel())
        vals.append(self.P_minus.ravel())
        Jac = sparse.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_unknowns, self.n_unknowns),
        )
        return res, Jac

    def param_derivative(self, states, name: str) -> np.ndarray:
        """Derivative of the residual with respect to parameter ``name``."""
        X = self._check(states)
        d, N = self.dim, self.n_intervals
        h = self.h
        sysm = self.system
        Y, J, M = self._stages(X)
        Fmu = sysm.param_derivative(Y, name)
        rhs = h[:, None, None] * np.einsum("jk,nkd->njd", GAUSS_A, Fmu)
        dY = np.linalg.solve(M, rhs.reshape(N, 3 * d, 1)).reshape(N, 3, d)
        dF = Fmu + np.einsum("njab,njb->nja", J, dY)
        dD = -h[:, None] * np.einsum("j,njd->nd", GAUSS_B, dF)
        # projection rows depend on the parameter through the eigenvectors
        step = 1e-6 * max(1.0, abs(sysm.params[name]))
        Lp = self.with_params(**{name: sysm.params[name] + step}).Ls
        Lm = self.with_params(**{name: sysm.params[name] - step}).Ls
        dLs = (Lp - Lm) / (2 * step) @ X[0]
        return np.concatenate([dD.ravel(), dLs, np.zeros(self.system.n)])


def assemble_residual(bvp: HomoclinicBVP, states) -> np.ndarray:
    """Collocation defects followed by the two boundary blocks."""
    return bvp.residual(states)


@dataclass(frozen=True)
class OrbitMeasures:
    x2_at_0: float
    max_x2: float
    min_x2: float
    l2_norm: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x2_at_0, self.max_x2, self.min_x2, self.l2_norm)


@dataclass(frozen=True)
class HomoclinicOrbit:
    """Converged orbit on [-T, 0] with diagnostics."""

    mesh: np.ndarray
    states: np.ndarray
    params: Mapping[str, float]
    boundary_residual: tuple[float, float]
    collocation_residual: float
    iterations: int
    stages: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    measures: OrbitMeasures = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "measures", orbit_measures(self))

    @property
    def norm(self) -> float:
        return _l2(self, None)

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """Orbit on [-T, T] by the reversal ``x(t) = R x(-t)``."""
        t = np.concatenate([self.mesh, -self.mesh[-2::-1]])
        mirrored = self.states[-2::-1] @ self.R.T
        return t, np.vstack([self.states, mirrored])


def _l2(orbit: HomoclinicOrbit, k: int | None) -> float:
    h = np.diff(orbit.mesh)
    Y = orbit.stages if k is None else orbit.stages[..., k:k + 1]
    half = float(np.sum(h[:, None] * GAUSS_B[None, :] * np.sum(Y * Y, axis=-1)))
    return float(np.sqrt(2 * half))


def component_l2(orbit: HomoclinicOrbit, k: int) -> float:
    """L2 norm of component ``k`` over [-T, T] (Gauss quadrature on the stages)."""
    return _l2(orbit, k)


def count_extrema(orbit: HomoclinicOrbit, component: int = 1, rel_tol: float = 1e-2) -> int:
    """Number of extrema of one component on the half-line [-T, 0].

    t = 0 counts when the component is even under the reversal (its
    derivative vanishes there).  Extrema whose value is below ``rel_tol`` of
    the maximum modulus are not counted; the default of 1% is the
    resolution of a plotted profile and ignores shallow tail features.
    """
    x = orbit.states[:, component]
    thresh = rel_tol * float(np.max(np.abs(x)))
    inner = (np.diff(x[:-1]) * np.diff(x[1:]) < 0) & (np.abs(x[1:-1]) >= thresh)
    n = int(np.count_nonzero(inner))
    if orbit.R[component, component] > 0 and abs(x[-1]) >= thresh:
        n += 1
    return n


def orbit_measures(orbit: HomoclinicOrbit, component: int = 1) -> OrbitMeasures:
    """x2(0), max/min of x2 on the reflected orbit, and the L2 norm over [-T, T].

    Max/min include the reflected half, which for the example has the same x2
    values because R leaves x2 unchanged.
    """
    _, full = orbit.full()
    vals = np.concatenate([full[:, component], orbit.stages[..., component].ravel(),
                           (orbit.stages.reshape(-1, orbit.states.shape[1]) @ orbit.R.T)[:, component]])
    return OrbitMeasures(
        float(orbit.states[-1, component]),
        float(vals.max()),
        float(vals.min()),
        _l2(orbit, None),
    )


def _discrete_norm(bvp: HomoclinicBVP, X: np.ndarray) -> float:
    h = bvp.h
    sq = np.sum(X * X, axis=1)
    return float(np.sqrt(np.sum(h * (sq[:-1] + sq[1:]) / 2)))


def solve(bvp: HomoclinicBVP, initial_guess, *, tol: float = 1e-10, step_tol: float = 1e-8,
          max_iter: int = 25, delta_min: float | None = None,
          min_damping: float = 1.0 / 64, max_step: float | None = None) -> HomoclinicOrbit:
    """Damped Newton on the node states.

    Converged when the residual is at most ``tol`` and the last correction is
    at most ``step_tol`` (sup norms).  The step test matters near singular
    roots, where the residual is quadratic in the error.  An optional
    ``max_step`` caps each correction at ``max_step * max(1, |x|)`` (sup norm).

    ``initial_guess`` is a node array, a :class:`HomoclinicOrbit`, or a
    callable ``t -> state``.  A result whose norm is below ``delta_min``
    (default ``1e-3 * |guess|``) raises :class:`TrivialSolutionError`.
    """
    if isinstance(initial_guess, HomoclinicOrbit):
        X = np.array(initial_guess.states, dtype=float)
        if X.shape[0] != bvp.n_intervals + 1:
            X = np.column_stack([np.interp(bvp.mesh, initial_guess.mesh, c) for c in X.T])
    elif callable(initial_guess):
        X = np.asarray(initial_guess(bvp.mesh), dtype=float)
    else:
        X = np.array(initial_guess, dtype=float)
    X = bvp._check(X).copy()
    guess_norm = _discrete_norm(bvp, X)
    if delta_min is None:
        delta_min = 1e-3 * guess_norm
    if guess_norm < delta_min or guess_norm == 0.0:
        raise TrivialSolutionError("initial guess is below the nontriviality threshold", 0.0, 0)

    def trial(Xt):
        try:
            rt, Jt = bvp.residual_and_jacobian(Xt)
            return rt, Jt, float(np.max(np.abs(rt)))
        except (ConvergenceError, FloatingPointError):
            return None, None, np.inf

    res, Jac = bvp.residual_and_jacobian(X)
    rnorm = float(np.max(np.abs(res)))
    it = 0
    dx_prev = None
    last_step = np.inf
    while rnorm > tol or last_step > step_tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations "
                                   f"(residual {rnorm:.3e})", rnorm, it)
        it += 1
        try:
            lu = splu(Jac)
        except RuntimeError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}", rnorm, it) from exc
        dx = lu.solve(-res)
        dx_norm = float(np.linalg.norm(dx))

        def simplified(rt):
            # norm of the simplified Newton correction: affine-invariant merit
            return np.inf if rt is None else float(np.linalg.norm(lu.solve(-rt)))

        lam = 1.0
        if max_step is not None:
            cap = max_step * max(1.0, float(np.max(np.abs(X))))
            lam = min(1.0, cap / max(float(np.max(np.abs(dx))), 1e-300))
        while True:
            Xn = X + lam * dx.reshape(X.shape)
            rn, Jn, rn_norm = trial(Xn)
            merit = simplified(rn)
            if merit <= (1 - lam / 4) * dx_norm or lam <= min_damping:
                break
            lam /= 2
        if dx_prev is not None and lam == 1.0:
            # near a singular root Newton steps shrink geometrically along the
            # null direction; extrapolate to the limit (Aitken)
            rho = dx_norm / np.linalg.norm(dx_prev)
            cos = abs(dx @ dx_prev) / (dx_norm * np.linalg.norm(dx_prev))
            if cos > 0.99 and 0.2 < rho < 0.95:
                Xa = X + dx.reshape(X.shape) / (1 - rho)
                ra, Ja, ra_norm = trial(Xa)
                if simplified(ra) < merit:
                    Xn, rn, Jn, rn_norm = Xa, ra, Ja, ra_norm
                    log.debug("newton %d: extrapolated step (ratio %.3f)", it, rho)
        if not np.isfinite(rn_norm):
            raise ConvergenceError("Newton step produced non-finite values", rnorm, it)
        last_step = float(np.max(np.abs(Xn - X)))
        X, res, Jac, rnorm = Xn, rn, Jn, rn_norm
        dx_prev = dx
        log.debug("newton %d: residual %.3e damping %g step %.3e", it, rnorm, lam, dx_norm)

    if _discrete_norm(bvp, X) < delta_min:
        raise TrivialSolutionError("Newton converged to the trivial solution", rnorm, it)
    return _make_orbit(bvp, X, res, it)


def _make_orbit(bvp: HomoclinicBVP, X: np.ndarray, res: np.ndarray, iterations: int) -> HomoclinicOrbit:
    n, N, d = bvp.system.n, bvp.n_intervals, bvp.dim
    Y, _, _ = bvp._stages(X)
    return HomoclinicOrbit(
        mesh=bvp.mesh.copy(),
        states=X,
        params=dict(bvp.system.params),
        boundary_residual=(float(np.max(np.abs(res[N * d:N * d + n]))),
                           float(np.max(np.abs(res[N * d + n:])))),
        collocation_residual=float(np.max(np.abs(res[:N * d]))),
        iterations=iterations,
        stages=Y,
        R=bvp.system.R,
    )


def orbit_csv(orbit: HomoclinicOrbit, header: str | None = None) -> str:
    """CSV text ``t,x1,...`` of the full reflected orbit, optional ``#`` header lines."""
    t, X = orbit.full()
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{k + 1}" for k in range(X.shape[1])])
    for ti, xi in zip(t, X):
        w.writerow([f"{ti:.10g}"] + [f"{v:.15g}" for v in xi])
    return buf.getvalue()


def orbit_json(orbit: HomoclinicOrbit, extra: dict | None = None) -> str:
    m = orbit.measures
    out = {
        "params": {k: (None if v != v else v) for k, v in orbit.params.items()},
        "T": float(-orbit.mesh[0]),
        "n_intervals": len(orbit.mesh) - 1,
        "iterations": orbit.iterations,
        "residuals": {
            "projection": orbit.boundary_residual[0],
            "symmetry": orbit.boundary_residual[1],
            "collocation": orbit.collocation_residual,
        },
        "measures": {"x2_at_0": m.x2_at_0, "max_x2": m.max_x2, "min_x2": m.min_x2,
                     "l2_norm": m.l2_norm},
    }
    if extra:
        out.update(extra)
    return json.dumps(out, indent=2)
