"""Monodromy of the planar variational blocks around the singular points at t = ±∞.

Each block of the example reads ``u'' = q(t) u`` with
``q = c0 - c2 sech^2 t``.  In the chart ``z = e^{lambda t}`` the points
t = ±∞ become regular singular points at z = 0, and a small circle
``|z| = eps`` corresponds to the vertical segment ``t = t1 - i theta / lambda``,
0 <= theta <= 2 pi, in the complex t-plane.  Continuing a fundamental
matrix along that segment gives the monodromy matrix.

The matrices are expressed in one global basis fixed at t = 0 and carried to
``±t1`` along the real axis.  That transport is badly conditioned (the
block-2 solutions grow like ``e^{sqrt(s) t1}``), so the primary integrator is
a Taylor series method in multiprecision arithmetic; a double precision
RK45 integration is kept as a cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

from .duffing import ExampleParams, planar_fundamentals, resonance_beta1
from .system import ConfigurationError

__all__ = [
    "CHARTS",
    "DomainError",
    "MonodromyQualityError",
    "ChartSpec",
    "MonodromyResult",
    "Triangularizability",
    "chart_coefficients",
    "fuchsian_residue",
    "block_coefficients",
    "global_basis",
    "monodromy_matrix",
    "check_triangularizable",
    "assemble",
    "common_flag",
    "monodromy_json",
]

CHARTS = ("plus", "minus")
DPS = 40
DET_TOL = 1e-6
ANGLE_TOL = 1e-5


class DomainError(ValueError):
    """A chart coordinate outside the punctured unit disc."""


class MonodromyQualityError(RuntimeError):
    """The computed monodromy violates the unit-determinant identity."""


@dataclass(frozen=True)
class ChartSpec:
    """Chart around t = +∞ (``"plus"``, z = e^{-t}) or t = -∞ (``"minus"``, z = e^{t}).

    ``eps`` is the radius of the loop in z; ``n_steps`` the number of
    segments the loop is split into.
    """

    chart: str = "plus"
    eps: float = 1e-4
    n_steps: int = 8

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ConfigurationError(f"chart must be one of {CHARTS}, got {self.chart!r}")
        if not 0 < self.eps**2 <= 1e-4:
            raise ConfigurationError(f"eps must satisfy 0 < eps^2 <= 1e-4, got eps={self.eps}")
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be positive")

    @property
    def rate(self) -> float:
        """Chart rate lambda: the orbit decays like e^{-|t|}, so -1 at +∞ and +1 at -∞."""
        return -1.0 if self.chart == "plus" else 1.0

    @property
    def t1(self) -> float:
        """Real basepoint of the loop."""
        return math.log(self.eps) / self.rate

    @property
    def loop_shift(self) -> complex:
        """Total change of t along the loop: ``2 pi i / lambda``."""
        return 2j * math.pi / self.rate


def block_coefficients(block: int, p: ExampleParams) -> tuple[float, float]:
    """``(c0, c2)`` with ``q(t) = c0 - c2 sech^2 t``."""
    if block == 1:
        return 1.0, 6.0
    if block == 2:
        return float(p.s), 2.0 * float(p.beta1)
    raise ConfigurationError(f"block must be 1 or 2, got {block}")


def chart_coefficients(block: int, chart: ChartSpec, z: complex, p: ExampleParams | None = None):
    """Coefficient of ``d xi / dz = B(z) xi`` in the chart coordinate ``z``.

    Uses ``sech t = 2 z / (1 + z^2)`` (valid in both charts since sech is
    even) and ``dt/dz = 1 / (lambda z)``.
    """
    p = ExampleParams() if p is None else p
    z = complex(z)
    if z == 0:
        raise DomainError("z = 0 is the singular point; use fuchsian_residue")
    if abs(z) >= 1:
        raise DomainError(f"|z| = {abs(z):.3g} is outside the chart (poles on |z| = 1)")
    c0, c2 = block_coefficients(block, p)
    sech = 2 * z / (1 + z * z)
    q = c0 - c2 * sech * sech
    return np.array([[0, 1], [q, 0]], dtype=complex) / (chart.rate * z)


def fuchsian_residue(block: int, chart: ChartSpec, p: ExampleParams | None = None) -> np.ndarray:
    """Finite limit of ``z B(z)`` at z = 0."""
    p = ExampleParams() if p is None else p
    c0, _ = block_coefficients(block, p)
    return np.array([[0, 1], [c0, 0]], dtype=float) / chart.rate


# multiprecision Taylor integrator

_POLES_STEP = 0.5


def _pole_distance(t: complex) -> float:
    # poles of tanh at i pi (n + 1/2)
    n = round(t.imag / math.pi - 0.5)
    return min(abs(t - 1j * math.pi * (k + 0.5)) for k in (n - 1, n, n + 1))


def _taylor_step(t0, h, U, c0, c2, tol):
    """Advance the 2x2 solution matrix ``U = [[u], [u']]`` from ``t0`` to ``t0 + h``."""
    T = [mp.tanh(t0)]
    h2 = h * h
    # scaled coefficients: T_k h^k, Q_k h^k, u_k h^k
    Q = [c0 - c2 + c2 * T[0] * T[0]]
    cols = [[U[0][j], U[1][j] * h] for j in range(2)]
    tol = tol * max(abs(c) for col in cols for c in col)
    out = [[mp.mpc(0), mp.mpc(0)], [mp.mpc(0), mp.mpc(0)]]
    k = 0
    small = 0
    while True:
        # tanh' = 1 - tanh^2
        conv = mp.fsum(T[j] * T[k - j] for j in range(k + 1))
        T.append(((1 if k == 0 else 0) - conv) * h / (k + 1))
        conv1 = mp.fsum(T[j] * T[k + 1 - j] for j in range(k + 2))
        Q.append(c2 * conv1)
        biggest = 0
        for col in cols:
            nxt = h2 * mp.fsum(Q[j] * col[k - j] for j in range(k + 1)) / ((k + 1) * (k + 2))
            col.append(nxt)
            biggest = max(biggest, abs(nxt))
        k += 1
        small = small + 1 if biggest <= tol else 0
        if small >= 3 or k > 400:
            break
    if k > 400:
        raise MonodromyQualityError("Taylor series did not converge; reduce the step")
    for j, col in enumerate(cols):
        out[0][j] = mp.fsum(col)
        out[1][j] = mp.fsum(i * c for i, c in enumerate(col)) / h
    return out


def _transport(U, t_from: complex, t_to: complex, c0, c2, max_step: float = 1.0):
    """Continue ``U`` along the straight segment from ``t_from`` to ``t_to``."""
    tol = mp.mpf(10) ** (-mp.mp.dps - 2)
    c0, c2 = mp.mpf(c0), mp.mpf(c2)
    t = complex(t_from)
    total = complex(t_to) - t
    length = abs(total)
    done = 0.0
    while done < length * (1 - 1e-15):
        step = min(max_step, _POLES_STEP * _pole_distance(t), length - done)
        h = mp.mpc(total * (step / length))
        U = _taylor_step(mp.mpc(t), h, U, c0, c2, tol)
        done += step
        t = complex(t_from) + total * (done / length)
    return U


def _mp_matrix(U):
    return mp.matrix([[U[0][0], U[0][1]], [U[1][0], U[1][1]]])


def _to_numpy(M):
    return np.array([[complex(M[i, j]) for j in range(2)] for i in range(2)])


def global_basis(block: int, p: ExampleParams) -> tuple[np.ndarray, str]:
    """Fundamental matrix at t = 0 (columns are solutions) and its label.

    Block 1 and block 2 at resonance use the bounded solution and its
    Wronskian-normalized mate, so the bounded direction is ``e1``.  Off
    resonance block 2 uses the even/odd pair with unit initial data.
    """
    block_coefficients(block, p)
    if block == 2 and abs(p.beta1 - resonance_beta1(p.s, p.ell)) > 1e-9 * max(1.0, abs(p.beta1)):
        return np.eye(2), "even-odd"
    fs = planar_fundamentals(block, p, grid=np.array([0.0]))
    return np.column_stack([fs.phi_b(0.0), fs.phi_u(0.0)]), "bounded-mate"


@dataclass(frozen=True)
class MonodromyResult:
    chart: ChartSpec
    block: int
    params: ExampleParams
    matrix: np.ndarray
    det_residual: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: np.ndarray
    basis_label: str
    rk_matrix: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rk_discrepancy(self) -> float | None:
        """Largest eigenvalue difference between the two integrators."""
        if self.rk_matrix is None:
            return None
        a = self.eigenvalues
        b = np.linalg.eigvals(self.rk_matrix)
        return float(min(np.max(np.abs(a - b)), np.max(np.abs(a - b[::-1]))))

    def to_dict(self) -> dict:
        return {
            "chart": self.chart.chart,
            "eps": self.chart.eps,
            "block": self.block,
            "params": self.params.as_dict(),
            "basis": self.basis_label,
            "matrix": {"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()},
            "eigenvalues": {"re": self.eigenvalues.real.tolist(),
                            "im": self.eigenvalues.imag.tolist()},
            "det_residual": self.det_residual,
            "rk_discrepancy": self.rk_discrepancy,
        }


def _eig(M: np.ndarray):
    w, V = np.linalg.eig(M)
    order = np.lexsort((w.imag, w.real))
    return w[order], V[:, order]


def _rk_loop(block: int, p: ExampleParams, chart: ChartSpec, rtol: float = 1e-12) -> np.ndarray:
    """Double precision RK45 transport once around the loop, started from the
    identity at ``t1``.  It is similar to the monodromy matrix, so it checks
    the eigenvalues without the ill-conditioned real-axis anchoring."""
    c0, c2 = block_coefficients(block, p)
    t1, dt = chart.t1 + 0j, chart.loop_shift

    def f(theta, y):
        q = c0 - c2 / np.cosh(t1 + dt * theta) ** 2
        Y = y.reshape(2, 2)
        return (dt * np.array([Y[1], q * Y[0]])).ravel()

    sol = solve_ivp(f, (0.0, 1.0), np.eye(2, dtype=complex).ravel(), method="RK45",
                    rtol=rtol, atol=1e-14)
    return sol.y[:, -1].reshape(2, 2)


def monodromy_matrix(block: int, chart: ChartSpec, p: ExampleParams | None = None, *,
                     dps: int = DPS, cross_check: bool = True) -> MonodromyResult:
    """Monodromy matrix of one block around the chart's singular point.

    The t = 0 basis of :func:`global_basis` is carried to ``t1`` on the real
    axis (``Phi(t1)``) and then along ``t1 -> t1 + 2 pi i / lambda``
    (``Phi_c``); ``M = Phi(t1)^{-1} Phi_c`` so that continuing the basis
    once around the loop multiplies it by ``M`` from the right.
    """
    p = ExampleParams() if p is None else p
    c0, c2 = block_coefficients(block, p)
    basis, label = global_basis(block, p)
    with mp.workdps(dps):
        U0 = [[mp.mpc(basis[i, j]) for j in range(2)] for i in range(2)]
        t1 = chart.t1
        U1 = _transport(U0, 0.0, t1, c0, c2)
        max_step = abs(chart.loop_shift) / chart.n_steps
        Uc = _transport(U1, t1, t1 + chart.loop_shift, c0, c2, max_step=max_step)
        Mmp = mp.inverse(_mp_matrix(U1)) * _mp_matrix(Uc)
        det = mp.det(Mmp)
        M = _to_numpy(Mmp)
        det_res = float(abs(det - 1))
    if det_res > DET_TOL:
        raise MonodromyQualityError(f"|det M - 1| = {det_res:.2e} exceeds {DET_TOL:g}")
    w, V = _eig(M)
    rk = _rk_loop(block, p, chart) if cross_check else None
    return MonodromyResult(chart, block, p, M, det_res, w, V, basis, label, rk,
                           {"t1": chart.t1, "dps": dps})


@dataclass(frozen=True)
class Triangularizability:
    triangularizable: bool
    angle: float
    common_line: np.ndarray | None
    bounded_fixed: bool | None
    bounded_residual: float | None

    def to_dict(self) -> dict:
        line = None
        if self.common_line is not None:
            line = {"re": self.common_line.real.tolist(), "im": self.common_line.imag.tolist()}
        return {"triangularizable": self.triangularizable, "angle": self.angle,
                "common_line": line, "bounded_fixed": self.bounded_fixed,
                "bounded_residual": self.bounded_residual}


def _line_angle(u: np.ndarray, v: np.ndarray) -> float:
    c = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(math.acos(min(1.0, c)))


def _eigen_lines(M: np.ndarray) -> list[np.ndarray]:
    w, V = _eig(M)
    if abs(w[0] - w[1]) <= 1e-8 * max(1.0, abs(w[0])):
        # repeated eigenvalue: the eigenspace is the kernel of M - w
        _, _, Vh = np.linalg.svd(M - w[0] * np.eye(2))
        return [Vh[-1].conj()]
    return [V[:, 0], V[:, 1]]


def check_triangularizable(M_plus: MonodromyResult, M_minus: MonodromyResult,
                           bounded_direction=None, *, tol: float = ANGLE_TOL) -> Triangularizability:
    """Look for an eigenvector line shared by both monodromy matrices.

    ``bounded_direction`` (coordinates in the common basis) is checked to be
    an eigenvector of both matrices.
    """
    if (M_plus.block != M_minus.block or M_plus.basis_label != M_minus.basis_label
            or not np.allclose(M_plus.basis, M_minus.basis, rtol=0, atol=1e-14)):
        raise ConfigurationError("monodromy matrices are expressed in different bases")
    best, line = np.inf, None
    for u in _eigen_lines(M_plus.matrix):
        for v in _eigen_lines(M_minus.matrix):
            a = _line_angle(u, v)
            if a < best:
                best, line = a, u
    fixed = resid = None
    if bounded_direction is not None:
        v = np.asarray(bounded_direction, complex)
        v = v / np.linalg.norm(v)
        resid = 0.0
        for M in (M_plus.matrix, M_minus.matrix):
            Mv = M @ v
            lam = np.vdot(v, Mv)
            resid = max(resid, float(np.linalg.norm(Mv - lam * v)))
        fixed = resid <= 1e-6
    ok = best <= tol
    return Triangularizability(ok, best, line if ok else None, fixed, resid)


def assemble(block1: MonodromyResult, block2: MonodromyResult) -> np.ndarray:
    """4x4 monodromy in the coordinates (x1, x2, x3, x4): block 1 acts on
    (x1, x3), block 2 on (x2, x4)."""
    if block1.chart != block2.chart:
        raise ConfigurationError("blocks come from different charts")
    M = np.zeros((4, 4), complex)
    M[np.ix_([0, 2], [0, 2])] = block1.matrix
    M[np.ix_([1, 3], [1, 3])] = block2.matrix
    return M


def common_flag(M4_plus: np.ndarray, M4_minus: np.ndarray, tol: float = 1e-6) -> dict:
    """Check that both 4x4 matrices preserve span{e_phi1} ⊂ span{e_phi1, e_phi2}.

    ``e_phi1`` is the bounded block-1 direction (coordinate 0) and
    ``e_phi2`` the bounded block-2 direction (coordinate 1).
    """
    e1 = np.zeros(4)
    e1[0] = 1
    e2 = np.zeros(4)
    e2[1] = 1
    P2 = np.outer(e1, e1) + np.outer(e2, e2)
    line = plane = 0.0
    for M in (M4_plus, M4_minus):
        v = M @ e1
        line = max(line, float(np.linalg.norm(v - np.vdot(e1, v) * e1)))
        for e in (e1, e2):
            w = M @ e
            plane = max(plane, float(np.linalg.norm(w - P2 @ w)))
    return {"line_residual": line, "plane_residual": plane,
            "preserved": bool(line <= tol and plane <= tol)}


def monodromy_json(results: list[MonodromyResult], diagnosis: Triangularizability | None = None,
                   flag: dict | None = None) -> str:
    doc = {"results": [r.to_dict() for r in results]}
    if diagnosis is not None:
        doc["triangularizability"] = diagnosis.to_dict()
    if flag is not None:
        doc["flag"] = flag
    return json.dumps(doc, indent=2, sort_keys=True)
