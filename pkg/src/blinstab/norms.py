"""Weighted boundary-layer sup norms, the triple norm, C_{nu,alpha} and the
critical time scales of the instability argument.

The boundary-layer norm of index p is

    ||f||_{beta,gamma,p} = sup_z  W_p(z)^{-1} exp(beta z) |f(z)|,
    W_p(z) = 1 + sum_{q=1..p} delta^{-q} phi_{P-1+q}(z/delta),

with phi_k(Z) = 1/(1 + Z^k) and delta = gamma nu^{1/8}.  It tolerates
delta^{-q}-large values confined to a layer of width delta at the wall.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError, UsageError
from .grid import GridFunction, ModeFamily


@dataclass(frozen=True)
class BLNormParams:
    """Parameters (beta, gamma, nu, p, P) of the boundary-layer norm.

    ``delta_override`` fixes delta directly (used by sweeps in delta).
    ``z_cap`` limits the sup to z <= z_cap, guarding against round-off
    amplified by exp(beta z) in the far field; ``None`` means no cap.
    """

    beta: float = 0.25
    gamma: float = 1.0
    nu: float = 1e-4
    p: int = 1
    P_weight: int = 4
    delta_override: float | None = None
    z_cap: float | None = None
    midpoints: bool = True
    refine: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("norm.beta", f"must be positive, got {self.beta}")
        if not self.gamma > 0:
            raise ConfigError("norm.gamma", f"must be positive, got {self.gamma}")
        if not self.nu > 0:
            raise ConfigError("norm.nu", f"must be positive, got {self.nu}")
        if int(self.p) != self.p or self.p < 0:
            raise ConfigError("norm.p", f"must be a nonnegative integer, got {self.p}")
        if int(self.P_weight) != self.P_weight or self.P_weight <= 1:
            raise ConfigError("norm.P_weight", f"must be an integer > 1, got {self.P_weight}")
        if self.delta_override is not None and not self.delta_override > 0:
            raise ConfigError("norm.delta_override", "must be positive")

    @property
    def delta(self) -> float:
        if self.delta_override is not None:
            return float(self.delta_override)
        return self.gamma * self.nu ** 0.125

    @classmethod
    def from_delta(cls, delta: float, **kw) -> "BLNormParams":
        return cls(delta_override=delta, **kw)

    def with_(self, **kw) -> "BLNormParams":
        return replace(self, **kw)

    def describe(self) -> dict:
        d = asdict(self)
        d["delta"] = self.delta
        return d


def phi_k(Z, k: int) -> np.ndarray:
    return 1.0 / (1.0 + np.asarray(Z, float) ** k)


def layer_weight(z, params: BLNormParams, p: int | None = None) -> np.ndarray:
    """W_p(z) = 1 + sum_q delta^{-q} phi_{P-1+q}(z/delta)."""
    p = params.p if p is None else p
    z = np.asarray(z, float)
    d = params.delta
    W = np.ones_like(z)
    for q in range(1, p + 1):
        W = W + d ** (-q) * phi_k(z / d, params.P_weight - 1 + q)
    return W


def bl_weight(z, params: BLNormParams, p: int | None = None) -> np.ndarray:
    """Full multiplier W_p(z)^{-1} exp(beta z) applied to |f|."""
    z = np.asarray(z, float)
    return np.exp(params.beta * z) / layer_weight(z, params, p)


def weighted_sup(z, values, params: BLNormParams, p: int | None = None) -> float:
    """Weighted sup over sample points (no interpolation)."""
    z = np.asarray(z, float)
    v = np.abs(np.asarray(values))
    if params.z_cap is not None:
        keep = z <= params.z_cap
        z, v = z[keep], v[keep]
    if v.size == 0:
        return 0.0
    return float(np.max(bl_weight(z, params, p) * v))


def _samples(f: GridFunction, params: BLNormParams):
    g = f.grid
    if not params.midpoints:
        return g.z, f.values
    zm = 0.5 * (g.z[1:] + g.z[:-1])
    vm = g.midpoint_matrix @ f.values
    return np.concatenate([g.z, zm]), np.concatenate([f.values, vm])


def bl_norm(f: GridFunction, params: BLNormParams, p: int | None = None) -> float:
    """Boundary-layer norm on nodes plus interpolated midpoints.

    ``p`` overrides ``params.p``; p = 0 gives the plain weighted sup.  With
    ``params.refine`` the best sample is polished by a bounded maximization
    of the weighted interpolant between its neighbouring samples.
    """
    z, v = _samples(f, params)
    best = weighted_sup(z, v, params, p)
    if not params.refine or best == 0.0:
        return best
    return max(best, _refine_sup(f, z, v, params, p))


def _refine_sup(f: GridFunction, z, v, params: BLNormParams, p) -> float:
    order = np.argsort(z)
    z, v = z[order], np.abs(v[order])
    zmax = params.z_cap if params.z_cap is not None else f.grid.z_max
    vals = np.where(z <= zmax, bl_weight(z, params, p) * v, -np.inf)
    k = int(np.argmax(vals))
    lo, hi = z[max(k - 1, 0)], min(z[min(k + 1, z.size - 1)], zmax)
    if not hi > lo:
        return float(vals[k])

    def neg(s):
        return -float(bl_weight(s, params, p) * abs(f.grid.evaluate(f.values, s)[0]))

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(hi, 1.0)})
    return -float(res.fun) if res.success else float(vals[k])


@dataclass(frozen=True)
class AlgebraCheck:
    lhs: float
    rhs: float
    constant: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12)

    @property
    def holds_with_constant(self) -> bool:
        return self.lhs <= self.constant * self.rhs * (1 + 1e-12)


def algebra_constant(params: BLNormParams, p: int, q: int, z=None) -> float:
    """sup_z W_p W_q / (W_{p+q} exp(beta z)), the pointwise product constant.

    The product inequality holds with this factor in place of 1; the factor
    exceeds 1 only for weights concentrated in the sublayer.
    """
    if z is None:
        d = params.delta
        z = np.concatenate([np.linspace(0, 20 * d, 4001), np.linspace(20 * d, 60, 2001)])
    W = lambda r: layer_weight(z, params, r)
    return float(np.max(W(p) * W(q) / (W(p + q) * np.exp(params.beta * z))))


def bl_norm_algebra_check(f: GridFunction, g: GridFunction, params: BLNormParams,
                          p: int, q: int) -> AlgebraCheck:
    """lhs = ||fg||_{p+q}, rhs = ||f||_p ||g||_q, and the sharp product constant."""
    if f.grid is not g.grid and f.grid.key != g.grid.key:
        raise UsageError("algebra check needs functions on the same grid")
    fg = GridFunction(f.grid, f.values * g.values)
    lhs = bl_norm(fg, params, p + q)
    rhs = bl_norm(f, params, p) * bl_norm(g, params, q)
    return AlgebraCheck(lhs, rhs, algebra_constant(params, p, q))


def _members(field_) -> list[GridFunction]:
    if isinstance(field_, ModeFamily):
        return [f for _, f in field_.items()]
    if isinstance(field_, dict):
        return list(field_.values())
    return list(field_)


def sup_alpha_norm(field_, params: BLNormParams, p: int | None = None) -> float:
    """sup over the wavenumber family of bl_norm of each member."""
    members = _members(field_)
    if not members:
        raise UsageError("sup over an empty wavenumber family")
    return max(bl_norm(f, params, p) for f in members)


@dataclass(frozen=True)
class TripleNorm:
    value: float
    plain: float
    dx: float
    dz: float


def triple_norm(omega: ModeFamily, nu: float, params: BLNormParams,
                dz: ModeFamily | None = None) -> float:
    """||w|| + nu^{1/8} ||d_x w|| + nu^{1/8} ||d_z w|| in the sup-over-alpha sense."""
    return triple_norm_parts(omega, nu, params, dz).value


def triple_norm_parts(omega: ModeFamily, nu: float, params: BLNormParams,
                      dz: ModeFamily | None = None) -> TripleNorm:
    """Triple norm with its three components.

    x-derivatives are Fourier multipliers i n alpha; z-derivatives come from
    ``dz`` when given, else from the grid operators.
    """
    plain = dxn = dzn = 0.0
    for n, f in omega.items():
        a = omega.alpha(n)
        plain = max(plain, bl_norm(f, params))
        dxn = max(dxn, abs(a) * bl_norm(f, params))
        fz = dz[n] if dz is not None else f.derivative(1)
        dzn = max(dzn, bl_norm(fz, params))
    e = nu ** 0.125
    return TripleNorm(plain + e * dxn + e * dzn, plain, dxn, dzn)


def c_nu_alpha(nu: float, alpha: float, cutoff: float = 1.0) -> float:
    """1 + alpha^2 nu^{-1/4} for |alpha| < cutoff, else 1."""
    if not nu > 0:
        raise DomainError("nu must be positive")
    if abs(alpha) < cutoff:
        return 1.0 + alpha * alpha * nu ** -0.25
    return 1.0


@dataclass(frozen=True)
class TimeScales:
    """Critical times; inputs first, derived values filled by critical_times."""

    p_exp: float
    tau: float
    gamma0: float
    nu: float
    epsilon: float = 0.01
    theta0: float = 0.1
    re_lambda0: float | None = None
    T_star: float = field(default=float("nan"))
    T_1: float = field(default=float("nan"))
    T_nu: float = field(default=float("nan"))

    def as_dict(self) -> dict:
        return asdict(self)


def critical_times(ts: TimeScales) -> TimeScales:
    """Fill T_star, T_1 and T_nu (each clamped at 0)."""
    if not ts.gamma0 > 0:
        raise DomainError(f"gamma0 must be positive, got {ts.gamma0}")
    if not ts.nu > 0:
        raise DomainError("nu must be positive")
    if not ts.theta0 > 0:
        raise DomainError("theta0 must be positive")
    ln = math.log(1.0 / ts.nu)
    rate = ts.gamma0 * ts.nu ** 0.25
    re_l = ts.re_lambda0 if ts.re_lambda0 is not None else rate
    if not re_l > 0:
        raise DomainError("Re lambda_0 must be positive")
    T_star = max(0.0, (ts.p_exp - ts.tau) * ln / rate)
    T_1 = max(0.0, ((ts.p_exp - 0.625) * ln - math.log(1.0 / ts.theta0)) / rate)
    T_nu = max(0.0, (ts.p_exp - 0.25 - ts.epsilon) * ln / re_l)
    return replace(ts, T_star=T_star, T_1=T_1, T_nu=T_nu)
