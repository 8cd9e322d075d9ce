"""Reversible vector fields, saddle spectra and boundary projections.

A :class:`ReversibleSystem` bundles a vector field ``f(x, params)`` with its
derivative tensors and the involution ``R``.  All callbacks are vectorized
over leading axes of ``x``: ``f`` maps ``(..., dim) -> (..., dim)`` and
``df`` maps ``(..., dim) -> (..., dim, dim)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)

__all__ = [
    "ConfigurationError",
    "NonHyperbolicError",
    "DefectiveSpectrumError",
    "ReversibleSystem",
    "SaddleSpectrum",
    "ReversibilityReport",
    "check_reversibility",
    "equilibrium_spectrum",
    "build_Ls",
    "fix_R_projector",
    "register_system",
    "get_system",
    "registered_systems",
]

HYPERBOLICITY_TOL = 1e-8
_EPS = np.finfo(float).eps


class ConfigurationError(ValueError):
    """Invalid system definition or solver configuration."""


class NonHyperbolicError(ArithmeticError):
    """An equilibrium eigenvalue lies on the imaginary axis."""


class DefectiveSpectrumError(ArithmeticError):
    """The linearization at the equilibrium is not diagonalizable."""


def _fd_step(x: np.ndarray) -> float:
    scale = 1.0 + float(np.max(np.abs(x))) if np.size(x) else 1.0
    return np.cbrt(_EPS) * scale


@dataclass(frozen=True)
class ReversibleSystem:
    """Vector field with involution and derivative tensors.

    ``d2f``, ``d3f``, ``dmu_f`` and ``dmu_df`` may be omitted; central finite
    differences are substituted (step ``cbrt(eps) * (1 + |x|)``).  These lose
    about a third of the significant digits, which is noticeable in Melnikov
    quadratures, so analytic tensors are preferred.
    """

    name: str
    dim: int
    params: Mapping[str, float]
    f: Callable
    R: np.ndarray
    df: Callable | None = None
    d2f: Callable | None = None
    d3f: Callable | None = None
    dmu_f: Callable | None = None
    dmu_df: Callable | None = None
    inner: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ConfigurationError(f"state dimension must be even and positive, got {self.dim}")
        R = np.asarray(self.R, dtype=float)
        if R.shape != (self.dim, self.dim):
            raise ConfigurationError(f"R must be {self.dim}x{self.dim}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "params", dict(self.params))
        if self.inner is not None:
            object.__setattr__(self, "inner", np.asarray(self.inner, dtype=float))
        if self.df is None or self.d2f is None or self.d3f is None:
            warnings.warn(
                f"system {self.name!r}: derivative tensors approximated by finite differences",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def gram(self) -> np.ndarray:
        return np.eye(self.dim) if self.inner is None else self.inner

    def with_params(self, **updates) -> "ReversibleSystem":
        unknown = set(updates) - set(self.params)
        if unknown:
            raise ConfigurationError(f"unknown parameters {sorted(unknown)} for {self.name}")
        p = dict(self.params)
        p.update({k: float(v) for k, v in updates.items()})
        return replace(self, params=p)

    def _p(self, params):
        return self.params if params is None else params

    # evaluation with finite-difference fallbacks

    def evaluate(self, x, params=None):
        return self.f(np.asarray(x, dtype=float), self._p(params))

    def jacobian(self, x, params=None):
        x = np.asarray(x, dtype=float)
        p = self._p(params)
        if self.df is not None:
            return self.df(x, p)
        h = _fd_step(x)
        cols = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = h
            cols.append((self.f(x + e, p) - self.f(x - e, p)) / (2 * h))
        return np.stack(cols, axis=-1)

    def hessian_action(self, x, u, v, params=None):
        """D_x^2 f(x)(u, v)."""
        p = self._p(params)
        if self.d2f is not None:
            return self.d2f(x, u, v, p)
        x, u, v = (np.asarray(a, dtype=float) for a in (x, u, v))
        h = _fd_step(x)
        jp = self.jacobian(x + h * u, p)
        jm = self.jacobian(x - h * u, p)
        return np.einsum("...ij,...j->...i", (jp - jm) / (2 * h), v)

    def third_action(self, x, u, v, w, params=None):
        """D_x^3 f(x)(u, v, w)."""
        p = self._p(params)
        if self.d3f is not None:
            return self.d3f(x, u, v, w, p)
        x, u = np.asarray(x, dtype=float), np.asarray(u, dtype=float)
        # nested differences: a larger step keeps the cancellation in check
        h = max(_EPS ** 0.25 * (1.0 + float(np.max(np.abs(x)))), 1e-4)
        return (
            self.hessian_action(x + h * u, v, w, p) - self.hessian_action(x - h * u, v, w, p)
        ) / (2 * h)

    def param_derivative(self, x, name: str, params=None):
        """D_mu f(x) for the parameter ``name``."""
        p = self._p(params)
        if self.dmu_f is not None:
            return self.dmu_f(x, p, name)
        h = _fd_step(np.array([p[name]]))
        pp, pm = dict(p), dict(p)
        pp[name] += h
        pm[name] -= h
        return (self.evaluate(x, pp) - self.evaluate(x, pm)) / (2 * h)

    def param_jacobian_action(self, x, v, name: str, params=None):
        """D_mu D_x f(x) v."""
        p = self._p(params)
        if self.dmu_df is not None:
            return self.dmu_df(x, v, p, name)
        h = _fd_step(np.array([p[name]]))
        pp, pm = dict(p), dict(p)
        pp[name] += h
        pm[name] -= h
        dj = (self.jacobian(x, pp) - self.jacobian(x, pm)) / (2 * h)
        return np.einsum("...ij,...j->...i", dj, v)


@dataclass(frozen=True)
class ReversibilityReport:
    max_residual: float
    passed: bool
    involutive: bool
    fix_dims: tuple[int, int]
    n_samples: int


def check_reversibility(system: ReversibleSystem, n_samples: int = 64, seed: int = 0,
                        box: float = 2.0, param_spread: float = 0.5) -> ReversibilityReport:
    """Sample ``f(Rx) + R f(x)`` at random states and parameters.

    A sample passes when its residual is at most ``1e-10 * (1 + |f(x)|)``.
    Axiom failures (non-involutive ``R``, wrong fixed-space dimensions) are
    reported in the result rather than raised.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    R = system.R
    d = system.dim
    involutive = bool(np.allclose(R @ R, np.eye(d), atol=1e-12, rtol=0))
    fix_dims = (
        d - int(np.linalg.matrix_rank(R - np.eye(d))),
        d - int(np.linalg.matrix_rank(R + np.eye(d))),
    )
    worst = 0.0
    ok = involutive and fix_dims == (system.n, system.n)
    for k in range(n_samples):
        x = np.zeros(d) if k == 0 else rng.uniform(-box, box, d)
        p = {name: v + rng.uniform(-param_spread, param_spread) for name, v in system.params.items()}
        fx = system.evaluate(x, p)
        res = float(np.linalg.norm(system.evaluate(R @ x, p) + R @ fx))
        worst = max(worst, res)
        if res > 1e-10 * (1.0 + float(np.linalg.norm(fx))):
            ok = False
    return ReversibilityReport(worst, ok, involutive, fix_dims, n_samples)


def _normalize(v: np.ndarray) -> np.ndarray:
    """Unit Euclidean norm, first nonzero component real and positive."""
    v = np.asarray(v)
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size:
        c = v[nz[0]]
        v = v * (np.abs(c) / c)
    if np.all(np.abs(np.imag(v)) < 1e-14):
        v = np.real(v)
    return v


@dataclass(frozen=True)
class SaddleSpectrum:
    eigenvalues: np.ndarray
    unstable_right: np.ndarray
    stable_left: np.ndarray
    stable_values: np.ndarray
    unstable_values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.stable_values)


def equilibrium_spectrum(system: ReversibleSystem, params: Mapping[str, float] | None = None,
                         x0: np.ndarray | None = None) -> SaddleSpectrum:
    """Eigen-decomposition of the linearization at the equilibrium ``x0`` (default 0)."""
    d = system.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, float)
    J = np.asarray(system.jacobian(x0, params), dtype=float)
    w, V = linalg.eig(J)
    order = np.lexsort((np.imag(w), np.real(w)))
    w, V = w[order], V[:, order]
    if np.any(np.abs(np.real(w)) < HYPERBOLICITY_TOL):
        raise NonHyperbolicError(f"non-hyperbolic equilibrium: eigenvalues {w}")
    if np.linalg.cond(V) > 1e10:
        raise DefectiveSpectrumError("defective spectrum: eigenvector matrix is singular")
    # left eigenvectors are the rows of V^{-1}
    W = linalg.inv(V)
    stable = np.real(w) < 0
    if stable.sum() != d // 2:
        raise ConfigurationError(f"expected {d // 2} stable eigenvalues, found {stable.sum()}")
    right = np.array([_normalize(V[:, k]) for k in np.flatnonzero(~stable)])
    left = np.array([_normalize(W[k, :]) for k in np.flatnonzero(stable)])
    return SaddleSpectrum(w, right, left, w[stable], w[~stable])


def build_Ls(spectrum: SaddleSpectrum) -> np.ndarray:
    """Real ``n x 2n`` matrix whose kernel is the unstable eigenspace.

    Rows are the stable left eigenvectors with unit norm.  A complex
    conjugate pair contributes its real and imaginary parts.
    """
    rows = []
    vals = spectrum.stable_values
    used = set()
    for k, lam in enumerate(vals):
        if k in used:
            continue
        v = spectrum.stable_left[k]
        if abs(np.imag(lam)) < 1e-12:
            rows.append(np.real(v))
            used.add(k)
        else:
            partner = [j for j in range(len(vals)) if j not in used and j != k
                       and abs(vals[j] - np.conj(lam)) < 1e-9]
            if not partner:
                raise DefectiveSpectrumError("unpaired complex stable eigenvalue")
            used.update((k, partner[0]))
            rows.extend([np.real(v), np.imag(v)])
    Ls = np.array([r / np.linalg.norm(r) for r in rows])
    return Ls


def _canonical_basis(B: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """Deterministic G-orthonormal rows spanning the column space of ``B``."""
    # reduced row echelon form of B^T fixes the basis up to the subspace
    M = B.T.copy()
    r = 0
    rows, cols = M.shape
    for c in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(M[r:, c])))
        if abs(M[piv, c]) < 1e-10:
            continue
        M[[r, piv]] = M[[piv, r]]
        M[r] /= M[r, c]
        for i in range(rows):
            if i != r:
                M[i] -= M[i, c] * M[r]
        r += 1
    out = []
    for v in M[:r]:
        for u in out:
            v = v - (u @ gram @ v) * u
        out.append(v / np.sqrt(v @ gram @ v))
    return np.array(out)


def fix_R_projector(system: ReversibleSystem) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate maps onto Fix(R) and Fix(-R).

    Returns ``(P_plus, P_minus)``, each ``n x 2n``.  ``P_plus @ x`` are the
    coordinates of the Fix(R) component of ``x`` in a G-orthonormal basis,
    where G is the system's inner product (Euclidean by default).  The inner
    product must make Fix(-R) orthogonal to Fix(R).
    """
    d = system.dim
    G = system.gram
    Bp = linalg.null_space(system.R - np.eye(d))
    Bm = linalg.null_space(system.R + np.eye(d))
    if Bp.shape[1] != system.n or Bm.shape[1] != system.n:
        raise ConfigurationError("Fix(R) and Fix(-R) must both have dimension n")
    Up = _canonical_basis(Bp, G)
    Um = _canonical_basis(Bm, G)
    if np.max(np.abs(Up @ G @ Um.T)) > 1e-10:
        raise ConfigurationError(
            "Fix(-R) is not orthogonal to Fix(R); supply an adapted inner product matrix"
        )
    return Up @ G, Um @ G


_REGISTRY: dict[str, Callable[..., ReversibleSystem]] = {}


def register_system(name: str, factory: Callable[..., ReversibleSystem]) -> None:
    """Register a system factory under ``name`` (keyword parameters only)."""
    _REGISTRY[name] = factory


def get_system(name: str, **params) -> ReversibleSystem:
    if name not in _REGISTRY:
        # the example registers itself on import
        from . import duffing  # noqa: F401
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(f"unknown system {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def registered_systems() -> list[str]:
    from . import duffing  # noqa: F401

    return sorted(_REGISTRY)
