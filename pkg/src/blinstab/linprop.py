"""Time propagation of (d_t - L_alpha) w = F and empirical semigroup bounds.

The state is the stream function in the clamped basis of the grid, so the two
no-slip conditions phi = phi' = 0 hold at every step by construction and the
vorticity is read off as w = Delta_alpha phi.  One step of the Crank-Nicolson
scheme solves

    (B - dt/2 A) g+ = (B + dt/2 A) g + dt/2 (F(t) + F(t + dt))

with A, B the matrices of the Orr-Sommerfeld pencil.  The first step from
t = 0 is replaced by two backward-Euler half steps, which damp the stiff
components that CN would carry along undamped.  The IMEX variant keeps
diffusion implicit and moves the U terms to an Adams-Bashforth extrapolation.

The zero wavenumber is special: phi is only defined up to the gauge
phi(0) = 0 and the physical conditions act on the mean velocity u = d_z phi,
so the mean mode evolves u with u(0) = u(z_max) = 0 and w = d_z u.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalFailure, UsageError
from .grid import GridFunction, SemiInfiniteGrid
from .norms import BLNormParams, bl_norm, c_nu_alpha
from .profiles import ShearProfile
from .stability import EigenSolution, os_operators, tail_start

SCHEMES = ("cn", "imex")


class LinearSystem:
    """Discrete L_alpha on one grid with cached step factorizations."""

    def __init__(self, profile: ShearProfile, alpha: float, nu: float, grid: SemiInfiniteGrid):
        self.profile, self.alpha, self.nu, self.grid = profile, float(alpha), float(nu), grid
        self.mean = alpha == 0
        cb = grid.clamped
        self.basis = cb
        if self.mean:
            self.rows = np.arange(1, grid.N - 1)
            D2 = grid.D[2]
            I = np.eye(grid.N) if grid.dense else sp.identity(grid.N, format="csr")
            self.B = I[self.rows][:, self.rows]
            self.A = math.sqrt(nu) * D2[self.rows][:, self.rows]
            self.A_diff, self.A_adv = self.A, 0 * self.A
        else:
            self.rows = cb.rows
            A, B = os_operators(profile, alpha, nu, grid)
            self.A, self.B = A, B
            a2 = alpha * alpha
            Z = [M[self.rows] for M in cb.E]
            self.A_diff = math.sqrt(nu) * (Z[4] - 2 * a2 * Z[2] + a2 * a2 * Z[0])
            self.A_adv = A - self.A_diff
            E = cb.E
            self._omega = E[2] - alpha * alpha * E[0]
            self._domega = E[3] - alpha * alpha * E[1]
        self._lu: dict = {}

    @property
    def size(self) -> int:
        return self.B.shape[1]

    def _factor(self, M):
        if self.grid.dense:
            lu = sla.lu_factor(M)
            return lambda b: sla.lu_solve(lu, b)
        lu = spla.splu(sp.csc_matrix(M))
        return lu.solve

    def solver(self, dt: float, implicit):
        key = (round(dt, 14), id(implicit))
        if key not in self._lu:
            self._lu[key] = self._factor(self.B - 0.5 * dt * implicit)
        return self._lu[key]

    # state <-> fields ---------------------------------------------------
    def omega(self, g: np.ndarray) -> np.ndarray:
        if self.mean:
            return self.grid.diff(self._full(g), 1)
        return self._omega @ g

    def domega(self, g: np.ndarray) -> np.ndarray:
        if self.mean:
            return self.grid.diff(self._full(g), 2)
        return self._domega @ g

    def phi(self, g: np.ndarray) -> np.ndarray:
        if self.mean:
            from .elliptic import cumulative_integral
            return cumulative_integral(GridFunction(self.grid, self._full(g)))
        return self.basis.E[0] @ g

    def dphi(self, g: np.ndarray) -> np.ndarray:
        if self.mean:
            return self._full(g)
        return self.basis.E[1] @ g

    def _full(self, g: np.ndarray) -> np.ndarray:
        u = np.zeros(self.grid.N, complex)
        u[self.rows] = g
        return u

    def state_from_omega(self, omega: np.ndarray) -> np.ndarray:
        """Coefficients whose vorticity matches ``omega`` on the equation rows.

        For alpha != 0 this is the no-slip projection: the two wall values not
        covered by the rows absorb any incompatibility of the data.
        """
        omega = np.asarray(omega, complex)
        if self.mean:
            from .elliptic import cumulative_integral
            c = cumulative_integral(GridFunction(self.grid, omega))
            return (c - c[-1])[self.rows]
        E = self.basis.E
        B = E[2][self.rows] - self.alpha ** 2 * E[0][self.rows]
        if self.grid.dense:
            return sla.solve(B, omega[self.rows])
        return spla.spsolve(sp.csc_matrix(B), omega[self.rows])

    def state_from_phi(self, phi: np.ndarray) -> np.ndarray:
        phi = np.asarray(phi, complex)
        if self.mean:
            return self.grid.diff(phi, 1)[self.rows]
        E0 = self.basis.E[0][self.rows]
        if self.grid.dense:
            return sla.solve(E0, phi[self.rows])
        return spla.spsolve(sp.csc_matrix(E0), phi[self.rows])

    def forcing_rows(self, f: np.ndarray) -> np.ndarray:
        """Project a vorticity-space forcing onto the state equation."""
        if self.mean:
            # d_t u = sqrt(nu) u'' + F_u, with w-forcing F = d_z F_u; callers
            # pass the velocity forcing F_u for the mean mode
            return np.asarray(f, complex)[self.rows]
        return np.asarray(f, complex)[self.rows]


@dataclass
class PropagatorRun:
    alpha: float
    nu: float
    system: LinearSystem = field(repr=False)
    times: np.ndarray
    states: list = field(repr=False)
    norms: np.ndarray
    dnorms: np.ndarray
    params: BLNormParams
    scheme: str
    dt: float
    solve_residual: float

    @property
    def grid(self) -> SemiInfiniteGrid:
        return self.system.grid

    def omega(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.system.omega(self.states[k]), self.alpha)

    def domega(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.system.domega(self.states[k]), self.alpha)

    def phi(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.system.phi(self.states[k]), self.alpha)

    @property
    def omega0(self) -> GridFunction:
        return self.omega(0)

    def write_csv(self, path, envelope: Sequence[float] | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "norm_omega", "norm_dz_omega", "envelope"])
            env = envelope if envelope is not None else [float("nan")] * len(self.times)
            for row in zip(self.times, self.norms, self.dnorms, env):
                w.writerow(row)


def default_dt(alpha: float, profile: ShearProfile, lam_scale: float | None = None) -> float:
    """0.05 / |lambda|, with |lambda| estimated by the advection rate |alpha| U_plus."""
    scale = lam_scale or max(abs(alpha) * max(abs(profile.U_plus), 1.0), 1e-3)
    return min(1.0, 0.05 / scale)


def _time_grid(t_end: float, dt: float, times: Sequence[float] | None) -> np.ndarray:
    if times is None:
        n = max(1, int(math.ceil(t_end / dt - 1e-12)))
        return np.linspace(0.0, t_end, n + 1)
    times = np.asarray(times, float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise UsageError("snapshot times must start at 0 and increase")
    return times


def propagate(omega0: GridFunction | None, alpha: float, nu: float, profile: ShearProfile,
              t_end: float, dt: float | None = None, *, grid: SemiInfiniteGrid | None = None,
              times: Sequence[float] | None = None, scheme: str = "cn",
              forcing: Callable[[float], np.ndarray] | None = None,
              state0: np.ndarray | None = None, params: BLNormParams | None = None,
              system: LinearSystem | None = None, max_retries: int = 2) -> PropagatorRun:
    """Advance w by (d_t - L_alpha) w = forcing from w(0) = omega0.

    Snapshots are stored at ``times`` (default: every step up to t_end);
    between snapshots the step is at most ``dt``.  ``state0`` (clamped
    coefficients, e.g. ``EigenSolution.coeffs``) overrides ``omega0``.
    A non-finite step is retried with dt halved up to ``max_retries``
    times before failing with the last good state attached.
    """
    if scheme not in SCHEMES:
        raise UsageError(f"scheme must be one of {SCHEMES}")
    if grid is None:
        if omega0 is None:
            raise UsageError("need omega0 or grid")
        grid = omega0.grid
    system = system or LinearSystem(profile, alpha, nu, grid)
    params = params or BLNormParams(nu=nu, z_cap=tail_start(grid, profile))
    dt = dt or default_dt(alpha, profile)
    if not dt > 0:
        raise DomainError("dt must be positive")
    ts = _time_grid(t_end, dt, times)
    if state0 is not None:
        g = np.array(state0, complex)
    elif omega0 is not None:
        g = system.state_from_omega(omega0.values)
    else:
        g = np.zeros(system.size, complex)
    states = [g.copy()]
    worst = 0.0
    f_rows = (lambda t: system.forcing_rows(forcing(t))) if forcing is not None else None
    prev_adv = None
    t = 0.0
    for t_next in ts[1:]:
        span = t_next - t
        n_sub = max(1, int(math.ceil(span / dt - 1e-9)))
        for attempt in range(max_retries + 1):
            h = span / n_sub
            g_try, adv_try, res = _advance(system, g, t, h, n_sub, scheme, f_rows, prev_adv)
            if np.all(np.isfinite(g_try)):
                break
            n_sub *= 2
        else:
            raise NumericalFailure(f"step rejected at t = {t:.6g} after {max_retries} retries; "
                                   f"last good state kept in exception.state") from None
        g, prev_adv, t = g_try, adv_try, t_next
        worst = max(worst, res)
        states.append(g.copy())
    norms = np.array([bl_norm(GridFunction(grid, system.omega(s)), params) for s in states])
    dnorms = np.array([bl_norm(GridFunction(grid, system.domega(s)), params) for s in states])
    return PropagatorRun(alpha=float(alpha), nu=float(nu), system=system, times=ts,
                         states=states, norms=norms, dnorms=dnorms, params=params,
                         scheme=scheme, dt=float(dt), solve_residual=worst)


def _advance(system: LinearSystem, g, t, h, n_sub, scheme, f_rows, prev_adv):
    B = system.B
    res = 0.0
    if scheme == "cn":
        solve = system.solver(h, system.A)
        M = system.A
        for k in range(n_sub):
            if t == 0.0 and k == 0:
                # Rannacher start: two backward-Euler half steps damp the stiff
                # wall components of incompatible data, which CN would not.
                # (B - h/2 M) is the CN factorization already cached.
                for s in (0.5, 1.0):
                    rhs = B @ g
                    if f_rows is not None:
                        rhs = rhs + 0.5 * h * f_rows(t + s * h)
                    g = solve(rhs)
                continue
            rhs = B @ g + 0.5 * h * (M @ g)
            if f_rows is not None:
                rhs = rhs + 0.5 * h * (f_rows(t + k * h) + f_rows(t + (k + 1) * h))
            g_new = solve(rhs)
            res = max(res, _rel_residual(system, h, M, g_new, rhs))
            g = g_new
        return g, None, res
    # IMEX: CN on diffusion, AB2 on advection/coupling (AB1 on the first step)
    solve = system.solver(h, system.A_diff)
    Ad, Aa = system.A_diff, system.A_adv
    for k in range(n_sub):
        adv = Aa @ g
        if f_rows is not None:
            adv = adv + f_rows(t + (k + 0.5) * h)
        ext = adv if prev_adv is None else 1.5 * adv - 0.5 * prev_adv
        rhs = B @ g + 0.5 * h * (Ad @ g) + h * ext
        g_new = solve(rhs)
        res = max(res, _rel_residual(system, h, Ad, g_new, rhs))
        prev_adv, g = adv, g_new
    return g, prev_adv, res


def _rel_residual(system, h, M, g_new, rhs) -> float:
    r = system.B @ g_new - 0.5 * h * (M @ g_new) - rhs
    return float(np.abs(r).max() / max(np.abs(rhs).max(), 1e-300))


def random_initial_data(system: LinearSystem, rng: np.random.Generator,
                        sublayer: bool = False) -> np.ndarray:
    """Random clamped coefficients with smooth decaying stream function.

    phi = z^2 exp(-k z) (a0 + a1 z + a2 sin(b z)) with random real/complex
    coefficients; with ``sublayer`` an extra z^2 exp(-z/delta) term gives the
    vorticity a wall layer of width delta = nu^{1/8}.
    """
    z = system.grid.z
    k = rng.uniform(0.8, 1.5)
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    b = rng.uniform(0.2, 0.8)
    phi = z ** 2 * np.exp(-k * z) * (a[0] + a[1] * z + a[2] * np.sin(b * z))
    if sublayer:
        d = system.nu ** 0.125
        phi = phi + (rng.normal() + 1j * rng.normal()) * z ** 2 * np.exp(-z / d)
    return system.state_from_phi(phi)


# ---------------------------------------------------------------- bound fits

@dataclass
class BoundFit:
    C: float
    ratios: np.ndarray
    envelope: np.ndarray
    gamma1: float
    c_nu_alpha: float
    argmax_t: float

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.C))

    def violations(self, C_global: float, tol: float = 1e-9) -> int:
        """Snapshots where the envelope with C_global is exceeded."""
        return int(np.count_nonzero(self.ratios > C_global * (1 + tol)))


def semigroup_envelope(t, alpha, nu, gamma1, cutoff: float = 1.0) -> np.ndarray:
    t = np.asarray(t, float)
    return (c_nu_alpha(nu, alpha, cutoff) * np.exp(gamma1 * nu ** 0.25 * t)
            * np.exp(-alpha ** 2 * math.sqrt(nu) * t / 4))


def verify_semigroup_bound(run: PropagatorRun, gamma1: float, params: BLNormParams | None = None,
                           cutoff: float = 1.0) -> BoundFit:
    """C_gamma = max_t ||w(t)|| / (C_{nu,alpha} e^{gamma1 nu^{1/4} t} e^{-alpha^2 sqrt(nu) t/4} ||w0||)."""
    norms = run.norms if params is None else np.array(
        [bl_norm(run.omega(k), params) for k in range(len(run.times))])
    env = semigroup_envelope(run.times, run.alpha, run.nu, gamma1, cutoff)
    n0 = norms[0]
    if n0 == 0:
        ratios = np.zeros_like(norms)
    else:
        ratios = norms / (env * n0)
    j = int(np.argmax(ratios))
    return BoundFit(float(ratios[j]), ratios, env, gamma1,
                    c_nu_alpha(run.nu, run.alpha, cutoff), float(run.times[j]))


def derivative_envelope(t, alpha, nu, gamma1, cutoff: float = 1.0) -> np.ndarray:
    t = np.asarray(t, float)
    with np.errstate(divide="ignore"):
        short = np.where(t > 0, (math.sqrt(nu) * t) ** -0.5, np.inf)
    return (nu ** -0.125 + short) * semigroup_envelope(t, alpha, nu, gamma1, cutoff)


def verify_derivative_bound(run: PropagatorRun, gamma1: float, params: BLNormParams | None = None,
                            cutoff: float = 1.0) -> BoundFit:
    """Fit C in ||d_z w(t)|| <= C C_{nu,alpha}(nu^{-1/8} + (sqrt(nu) t)^{-1/2}) e^{...} ||w0||."""
    dn = run.dnorms if params is None else np.array(
        [bl_norm(run.domega(k), params) for k in range(len(run.times))])
    n0 = run.norms[0] if params is None else bl_norm(run.omega(0), params)
    env = derivative_envelope(run.times, run.alpha, run.nu, gamma1, cutoff)
    ratios = np.zeros_like(dn) if n0 == 0 else dn / (env * n0)
    j = int(np.argmax(ratios))
    return BoundFit(float(ratios[j]), ratios, env, gamma1,
                    c_nu_alpha(run.nu, run.alpha, cutoff), float(run.times[j]))


def eigen_run(sol: EigenSolution, profile: ShearProfile, t_end: float, dt: float | None = None,
              **kw) -> PropagatorRun:
    """Propagate starting exactly from an eigenmode's clamped coefficients."""
    return propagate(None, sol.alpha, sol.nu, profile, t_end, dt, grid=sol.grid,
                     state0=sol.coeffs, **kw)
