"""Four-dimensional coupled Duffing example and its closed-form objects.

The system is

    x1' = x3
    x2' = x4
    x3' = x1 - (x1^2 + c x2^2) x1 - beta2 x2
    x4' = s x2 - beta1 (x1^2 + 2 x2^2) x2 - beta2 x1 - beta3 x2^2

with coupling ``c = 8`` by default.  Setting ``coupling=None`` ties the
coupling to ``beta1``; that variant is a gradient system and is the one for
which the closed-form pitchfork coefficient holds.

At ``beta2 = 0`` the (x1, x3) plane is invariant and carries the homoclinic
orbit ``x1 = sqrt(2) sech t``.  The variational equation splits into

    xi1'' = (1 - 6 sech^2 t) xi1,       xi2'' = (s - 2 beta1 sech^2 t) xi2,

and the second block has a bounded even solution exactly at
``beta1 = nu (nu + 1) / 2`` with ``nu = sqrt(s) + 2 ell``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .special import gamma_ratio
from .system import ConfigurationError, ReversibleSystem, register_system

__all__ = [
    "ExampleParams",
    "PlanarFundamentalSet",
    "R_EXAMPLE",
    "vector_field",
    "jacobian",
    "d2f",
    "d3f",
    "dmu_f",
    "dmu_df",
    "make_system",
    "homoclinic_exact",
    "resonance_beta1",
    "xi2_coefficients",
    "bounded_xi2",
    "block_potential",
    "integrate_block",
    "planar_fundamentals",
    "involutions",
    "bbar2_closed",
    "P_poly",
    "Q_poly",
]

SQRT2 = math.sqrt(2.0)
R_EXAMPLE = np.diag([1.0, 1.0, -1.0, -1.0])
PARAM_NAMES = ("s", "beta1", "beta2", "beta3", "coupling")


@dataclass(frozen=True)
class ExampleParams:
    """Parameters of the example; ``coupling=None`` ties the coupling to beta1."""

    s: float = 2.0
    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    ell: int = 0
    coupling: float | None = 8.0

    def __post_init__(self):
        if not self.s > 0:
            raise ConfigurationError(f"s must be positive, got {self.s}")
        if self.ell < 0:
            raise ConfigurationError("ell must be nonnegative")

    @property
    def tied(self) -> bool:
        return self.coupling is None

    @property
    def c(self) -> float:
        return self.beta1 if self.coupling is None else self.coupling

    @classmethod
    def at_resonance(cls, s: float = 2.0, ell: int = 0, **kw) -> "ExampleParams":
        return cls(s=s, beta1=resonance_beta1(s, ell), ell=ell, **kw)

    def as_dict(self) -> dict:
        """Parameter map for :class:`ReversibleSystem`."""
        return {
            "s": float(self.s),
            "beta1": float(self.beta1),
            "beta2": float(self.beta2),
            "beta3": float(self.beta3),
            "coupling": float("nan") if self.coupling is None else float(self.coupling),
        }


def _coupling(p) -> float:
    c = p["coupling"]
    return p["beta1"] if math.isnan(c) else c


def _tied(p) -> bool:
    return math.isnan(p["coupling"])


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2], x[..., 3]


def vector_field(x, p):
    x1, x2, x3, x4 = _split(x)
    c = _coupling(p)
    b1, b2, b3, s = p["beta1"], p["beta2"], p["beta3"], p["s"]
    return np.stack(
        [
            x3,
            x4,
            x1 - (x1 * x1 + c * x2 * x2) * x1 - b2 * x2,
            s * x2 - b1 * (x1 * x1 + 2 * x2 * x2) * x2 - b2 * x1 - b3 * x2 * x2,
        ],
        axis=-1,
    )


def jacobian(x, p):
    x1, x2, _, _ = _split(x)
    c = _coupling(p)
    b1, b2, b3, s = p["beta1"], p["beta2"], p["beta3"], p["s"]
    J = np.zeros(np.shape(x)[:-1] + (4, 4))
    J[..., 0, 2] = 1.0
    J[..., 1, 3] = 1.0
    J[..., 2, 0] = 1 - 3 * x1 * x1 - c * x2 * x2
    J[..., 2, 1] = -2 * c * x1 * x2 - b2
    J[..., 3, 0] = -2 * b1 * x1 * x2 - b2
    J[..., 3, 1] = s - b1 * x1 * x1 - 6 * b1 * x2 * x2 - 2 * b3 * x2
    return J


def d2f(x, u, v, p):
    x1, x2, _, _ = _split(x)
    u1, u2 = np.asarray(u)[..., 0], np.asarray(u)[..., 1]
    v1, v2 = np.asarray(v)[..., 0], np.asarray(v)[..., 1]
    c = _coupling(p)
    b1, b3 = p["beta1"], p["beta3"]
    mixed = u1 * v2 + u2 * v1
    f3 = -6 * x1 * u1 * v1 - c * (2 * x2 * mixed + 2 * x1 * u2 * v2)
    f4 = -b1 * (2 * x2 * u1 * v1 + 2 * x1 * mixed) - 12 * b1 * x2 * u2 * v2 - 2 * b3 * u2 * v2
    z = np.zeros_like(f3)
    return np.stack([z, z, f3, f4], axis=-1)


def d3f(x, u, v, w, p):
    u1, u2 = np.asarray(u)[..., 0], np.asarray(u)[..., 1]
    v1, v2 = np.asarray(v)[..., 0], np.asarray(v)[..., 1]
    w1, w2 = np.asarray(w)[..., 0], np.asarray(w)[..., 1]
    c = _coupling(p)
    b1 = p["beta1"]
    f3 = -6 * u1 * v1 * w1 - 2 * c * (u1 * v2 * w2 + u2 * v1 * w2 + u2 * v2 * w1)
    f4 = -2 * b1 * (u2 * v1 * w1 + u1 * v2 * w1 + u1 * v1 * w2) - 12 * b1 * u2 * v2 * w2
    z = np.zeros_like(f3)
    return np.stack([z, z, f3, f4], axis=-1)


def dmu_f(x, p, name):
    x1, x2, _, _ = _split(x)
    z = np.zeros_like(x1)
    if name == "beta2":
        f3, f4 = -x2, -x1
    elif name == "beta1":
        f3 = -x1 * x2 * x2 if _tied(p) else z
        f4 = -(x1 * x1 + 2 * x2 * x2) * x2
    elif name == "beta3":
        f3, f4 = z, -x2 * x2
    elif name == "s":
        f3, f4 = z, x2
    elif name == "coupling":
        f3, f4 = (z if _tied(p) else -x1 * x2 * x2), z
    else:
        raise ConfigurationError(f"unknown parameter {name!r}")
    return np.stack([z, z, f3 + z, f4 + z], axis=-1)


def dmu_df(x, v, p, name):
    x1, x2, _, _ = _split(x)
    v1, v2 = np.asarray(v)[..., 0], np.asarray(v)[..., 1]
    z = np.zeros_like(x1 * v1)
    if name == "beta2":
        f3, f4 = -v2 + z, -v1 + z
    elif name == "beta1":
        f3 = (-x2 * x2 * v1 - 2 * x1 * x2 * v2) if _tied(p) else z
        f4 = -2 * x1 * x2 * v1 - (x1 * x1 + 6 * x2 * x2) * v2
    elif name == "beta3":
        f3, f4 = z, -2 * x2 * v2
    elif name == "s":
        f3, f4 = z, v2 + z
    elif name == "coupling":
        f3 = z if _tied(p) else (-x2 * x2 * v1 - 2 * x1 * x2 * v2)
        f4 = z
    else:
        raise ConfigurationError(f"unknown parameter {name!r}")
    return np.stack([z, z, f3, f4], axis=-1)


def make_system(p: ExampleParams | None = None, **kw) -> ReversibleSystem:
    """The example as a :class:`ReversibleSystem` (registered as ``duffing4d``)."""
    if p is None:
        p = ExampleParams(**kw)
    return ReversibleSystem(
        name="duffing4d",
        dim=4,
        params=p.as_dict(),
        f=vector_field,
        R=R_EXAMPLE,
        df=jacobian,
        d2f=d2f,
        d3f=d3f,
        dmu_f=dmu_f,
        dmu_df=dmu_df,
        meta={"ell": p.ell},
    )


register_system("duffing4d", make_system)


def involutions() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The reverser R and the two equivariance involutions S and S'."""
    return (
        R_EXAMPLE.copy(),
        np.diag([1.0, -1.0, 1.0, -1.0]),
        np.diag([-1.0, 1.0, -1.0, 1.0]),
    )


def _sech(t):
    # 1/cosh without overflow warnings for large |t|
    e = np.exp(-np.abs(t))
    return 2 * e / (1 + e * e)


def homoclinic_exact(t, sign: int = 1) -> np.ndarray:
    """Homoclinic orbit ``(±√2 sech t, 0, ∓√2 sech t tanh t, 0)`` of the beta2 = 0 system."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    t = np.asarray(t, dtype=float)
    sh, th = _sech(t), np.tanh(t)
    z = np.zeros_like(sh)
    return sign * SQRT2 * np.stack([sh, z, -sh * th, z], axis=-1)


def resonance_beta1(s: float, ell: int) -> float:
    """Value of beta1 at which block 2 has a bounded even solution."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    return ((2 * math.sqrt(s) + 4 * ell + 1) ** 2 - 1) / 8


def xi2_coefficients(s: float, ell: int) -> np.ndarray:
    """Coefficients c_k with ``xi2 = sech^r sum_k c_k sech^(2k)``, ``r = sqrt(s)``, c_0 = 1.

    Plugging the ansatz into ``xi'' = (s - nu(nu+1) sech^2) xi`` gives the
    two-term recurrence used here; it terminates at k = ell.
    """
    if ell not in (0, 1, 2):
        raise ConfigurationError(f"bounded solutions are provided for ell in {{0,1,2}}, got {ell}")
    r = math.sqrt(s)
    nu = r + 2 * ell
    c = [1.0]
    for k in range(1, ell + 1):
        m = r + 2 * k - 2
        c.append(c[-1] * (m * (m + 1) - nu * (nu + 1)) / (4 * k * (r + k)))
    return np.array(c)


def bounded_xi2(t, s: float, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Bounded even solution ``(xi2, xi4)`` of block 2 at resonance, xi2(0) = sum c_k."""
    coef = xi2_coefficients(s, ell)
    r = math.sqrt(s)
    t = np.asarray(t, dtype=float)
    sh, th = _sech(t), np.tanh(t)
    xi = np.zeros_like(sh)
    dxi = np.zeros_like(sh)
    for k, ck in enumerate(coef):
        m = r + 2 * k
        term = ck * sh**m
        xi = xi + term
        dxi = dxi - m * term * th
    return xi, dxi


def block_potential(block: int, p: ExampleParams) -> Callable:
    """q(t) with ``xi'' = q(t) xi`` for the given block (beta2 = 0)."""
    if block == 1:
        return lambda t: 1 - 6 * _sech(t) ** 2
    if block == 2:
        return lambda t: p.s - 2 * p.beta1 * _sech(t) ** 2
    raise ConfigurationError(f"block must be 1 or 2, got {block}")


def integrate_block(block: int, p: ExampleParams, t_span, y0, t_eval=None, rtol=1e-12, atol=1e-14):
    """Integrate a planar variational block; returns the solve_ivp result."""
    q = block_potential(block, p)

    def rhs(t, y):
        return [y[1], q(t) * y[0]]

    return solve_ivp(rhs, t_span, y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol,
                     dense_output=True)


@dataclass(frozen=True)
class PlanarFundamentalSet:
    """Fundamental and adjoint solutions of one planar block.

    ``phi_b`` is the bounded solution and ``phi_u`` its mate, normalized so
    the Wronskian ``phi_b ^ phi_u`` is 1.  The adjoints satisfy
    ``<psi_j, phi_k> = delta_jk``.  All four are callables ``t -> (..., 2)``.
    ``values`` holds them sampled on ``grid``.
    """

    block: int
    params: ExampleParams
    phi_b: Callable
    phi_u: Callable
    grid: np.ndarray
    growth: tuple[float, float]
    bounded_parity: str

    def psi_b(self, t):
        u = self.phi_u(t)
        return np.stack([u[..., 1], -u[..., 0]], axis=-1)

    def psi_u(self, t):
        b = self.phi_b(t)
        return np.stack([-b[..., 1], b[..., 0]], axis=-1)

    def wronskian(self, t):
        b, u = self.phi_b(t), self.phi_u(t)
        return b[..., 0] * u[..., 1] - b[..., 1] * u[..., 0]

    @property
    def values(self) -> dict:
        g = self.grid
        return {"phi_b": self.phi_b(g), "phi_u": self.phi_u(g),
                "psi_b": self.psi_b(g), "psi_u": self.psi_u(g)}


def _block1_pair(t):
    """u_b = sech tanh and its even mate u_u with W(u_b, u_u) = 1."""
    t = np.asarray(t, dtype=float)
    sh, th = _sech(t), np.tanh(t)
    ub = sh * th
    dub = 2 * sh**3 - sh
    ch = np.cosh(np.clip(t, -700, 700))
    uu = 0.5 * ch - 1.5 * sh + 1.5 * t * th * sh
    duu = 0.5 * np.sinh(np.clip(t, -700, 700)) + 3 * sh * th + 1.5 * t * (2 * sh**3 - sh)
    return ub, dub, uu, duu


def _phi1_b(t):
    ub, dub, _, _ = _block1_pair(t)
    return -SQRT2 * np.stack([ub, dub], axis=-1)


def _phi1_u(t):
    _, _, uu, duu = _block1_pair(t)
    return -np.stack([uu, duu], axis=-1) / SQRT2


def planar_fundamentals(block: int, p: ExampleParams, grid=None, *, t_max: float = 30.0,
                        tol: float = 1e-9) -> PlanarFundamentalSet:
    """Fundamental solutions of a decoupled variational block at beta2 = 0.

    Block 1 is closed-form: ``phi_b = (x1', x1'')`` of the homoclinic orbit
    and ``phi_u`` the even mate.  Block 2 requires beta1 at resonance;
    ``phi_b = (xi2, xi4)`` and the odd mate is integrated from t = 0 and
    continued by oddness.  ``t_max`` bounds the integrated range.
    """
    grid = np.linspace(-10, 10, 201) if grid is None else np.asarray(grid, dtype=float)
    if block == 1:
        return PlanarFundamentalSet(1, p, _phi1_b, _phi1_u, grid, (1.0, 1.0), "odd")
    if block != 2:
        raise ConfigurationError(f"block must be 1 or 2, got {block}")
    if abs(p.beta1 - resonance_beta1(p.s, p.ell)) > tol * max(1.0, abs(p.beta1)):
        raise ConfigurationError("no bounded symmetric solution (R5 violated): beta1 off resonance")
    s, ell = p.s, p.ell
    xi0 = float(np.sum(xi2_coefficients(s, ell)))
    t_max = max(t_max, float(np.max(np.abs(grid))))
    sol = integrate_block(2, p, (0.0, t_max), [0.0, 1.0 / xi0])

    def phi_b(t):
        return np.stack(bounded_xi2(t, s, ell), axis=-1)

    def phi_u(t):
        t = np.asarray(t, dtype=float)
        y = sol.sol(np.abs(t).ravel()).T.reshape(t.shape + (2,))
        sgn = np.where(t < 0, -1.0, 1.0)
        return np.stack([sgn * y[..., 0], y[..., 1]], axis=-1)

    r = math.sqrt(s)
    return PlanarFundamentalSet(2, p, phi_b, phi_u, grid, (r, r), "even")


# closed-form pitchfork coefficient (tied coupling)

_P_COEFS = {
    0: [1.0, -1.0, -1.0, 0.0],
    1: [145.0, 530.0, 115.0, -1971.0, -3502.0, -2427.0, -630.0],
    2: [27.0 * c for c in (16627, 242984, 1310501, 2451387, -4949646, -34833051,
                           -76574422, -86008220, -49776200, -12012000)],
}


def P_poly(x: float, ell: int) -> float:
    """Numerator polynomial of the closed-form pitchfork coefficient."""
    if ell not in _P_COEFS:
        raise ConfigurationError(f"closed form available for ell in {{0,1,2}}, got {ell}")
    return float(np.polyval(_P_COEFS[ell], x))


def Q_poly(x: float, ell: int) -> float:
    """Denominator ``prod_{j<=ell} (x+j)^3 prod_{j<=4 ell} (4x+2j-1)``; Q_0 = 1."""
    if ell not in _P_COEFS:
        raise ConfigurationError(f"closed form available for ell in {{0,1,2}}, got {ell}")
    q = 1.0
    for j in range(1, ell + 1):
        q *= (x + j) ** 3
    for j in range(1, 4 * ell + 1):
        q *= 4 * x + 2 * j - 1
    return q


def bbar2_closed(s: float, ell: int) -> float:
    """Closed-form pitchfork coefficient at resonance for the tied-coupling example."""
    if not s > 0:
        raise ValueError("s must be positive")
    x = math.sqrt(s)
    pref = math.sqrt(math.pi) * gamma_ratio(2 * x, 2 * x + 0.5)
    return pref * P_poly(x, ell) / Q_poly(x, ell)
