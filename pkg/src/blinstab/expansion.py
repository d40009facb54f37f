"""Approximate solution built from the growing mode by Duhamel iteration.

omega_app = nu^p sum_{j<=M} nu^{j/8} omega_j with omega_j = sum_n omega_{j,n} e^{i n alpha x}.
Level 0 is the growing mode pair n = +-1; each higher level solves

    (d_t - L_{alpha_n}) omega_{j,n} = R_{j,n},   omega_{j,n}(0) = 0,
    R_{j,n} = -S omega_{j-1,n} - sum_{k+l+8p=j} sum_{n1+n2=n} Q(omega_{k,n1}, omega_{l,n2}),

so that the assembled omega_app solves (d_t - L) w + nu^{1/8} S w + Q(w, w) = R_app
with only the terms of order beyond M left in R_app.

Conventions: Delta phi = omega with phi = phi' = 0 at the wall, u1 = d_z phi,
u2 = -d_x phi, and Q(w, w~) = u . grad w~ with u built from w.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .elliptic import solve_halfline
from .errors import DomainError, UsageError
from .grid import GridFunction, ModeFamily, SemiInfiniteGrid
from .linprop import LinearSystem, default_dt
from .norms import BLNormParams, bl_norm
from .profiles import ShearProfile, heat_evolve
from .stability import EigenSolution, _conjugate_solution, build_growing_mode, tail_start

MODES = ("stationary", "time-dependent")


@dataclass(frozen=True)
class ModeField:
    """Vorticity of one Fourier mode together with its stream function."""

    alpha: float
    omega: np.ndarray
    domega: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray

    def conj(self) -> "ModeField":
        return ModeField(-self.alpha, self.omega.conj(), self.domega.conj(),
                         self.phi.conj(), self.dphi.conj())

    def scaled(self, c: complex) -> "ModeField":
        return ModeField(self.alpha, c * self.omega, c * self.domega, c * self.phi, c * self.dphi)

    def __add__(self, other: "ModeField") -> "ModeField":
        return ModeField(self.alpha, self.omega + other.omega, self.domega + other.domega,
                         self.phi + other.phi, self.dphi + other.dphi)

    @classmethod
    def from_omega(cls, omega: GridFunction, alpha: float) -> "ModeField":
        """Invert Delta_alpha phi = omega with phi(0) = 0 (Dirichlet)."""
        grid = omega.grid
        if alpha == 0:
            from .elliptic import cumulative_integral
            c = cumulative_integral(omega)
            dphi = c - c[-1]
            phi = cumulative_integral(GridFunction(grid, dphi))
        else:
            r = solve_halfline(omega, alpha, cross_check=False)
            phi, dphi = r.phi.values, r.dphi.values
        return cls(alpha, omega.values, grid.diff(omega.values, 1), phi, dphi)

    @classmethod
    def from_state(cls, system: LinearSystem, g: np.ndarray) -> "ModeField":
        return cls(system.alpha, system.omega(g), system.domega(g), system.phi(g), system.dphi(g))

    @classmethod
    def zero(cls, grid: SemiInfiniteGrid, alpha: float) -> "ModeField":
        z = np.zeros(grid.N, complex)
        return cls(alpha, z, z, z, z)


def _as_field(f, alpha: float) -> ModeField:
    return f if isinstance(f, ModeField) else ModeField.from_omega(f, alpha)


def apply_Q(a, n1: int, b, n2: int, alpha_nu: float) -> np.ndarray:
    """Mode n1 + n2 of u_a . grad w_b.

    i alpha_nu (n2 d_z phi_a w_b - n1 phi_a d_z w_b), where phi_a inverts w_a
    at its own wavenumber n1 alpha_nu.  ``a`` and ``b`` are ModeFields or
    GridFunctions (then inverted here).
    """
    fa = _as_field(a, n1 * alpha_nu)
    fb = _as_field(b, n2 * alpha_nu)
    if n1 == 0 and n2 == 0:
        return np.zeros_like(fb.omega)
    return 1j * alpha_nu * (n2 * fa.dphi * fb.omega - n1 * fa.phi * fb.domega)


def apply_Q_flux(a, n1: int, b, n2: int, alpha_nu: float) -> np.ndarray:
    """u2_a w_b for n1 + n2 = 0: the z-flux whose derivative is the mean of Q."""
    if n1 + n2 != 0:
        raise UsageError("flux form applies to the mean mode only")
    fa = _as_field(a, n1 * alpha_nu)
    fb = _as_field(b, n2 * alpha_nu)
    return -1j * n1 * alpha_nu * fa.phi * fb.omega


def q_physical_oracle(a: ModeField, n1: int, b: ModeField, n2: int, alpha_nu: float,
                      grid: SemiInfiniteGrid, n_x: int = 32) -> np.ndarray:
    """u . grad w~ evaluated on an x-z grid and projected back onto mode n1 + n2.

    x-derivatives by FFT, z-derivatives by differentiating nodal values with the
    grid operators; shares nothing with apply_Q beyond the stream function.
    """
    x = 2 * np.pi / alpha_nu * np.arange(n_x) / n_x
    k = alpha_nu * np.fft.fftfreq(n_x, d=1.0 / n_x)
    ea = np.exp(1j * n1 * alpha_nu * x)[:, None]
    eb = np.exp(1j * n2 * alpha_nu * x)[:, None]
    phi = ea * a.phi[None, :]
    w = eb * b.omega[None, :]
    dx = lambda f: np.fft.ifft(1j * k[:, None] * np.fft.fft(f, axis=0), axis=0)
    dz = lambda f: np.stack([grid.diff(row, 1) for row in f])
    u1, u2 = dz(phi), -dx(phi)
    prod = u1 * dx(w) + u2 * dz(w)
    coef = np.fft.fft(prod, axis=0) / n_x
    return coef[(n1 + n2) % n_x]


class SlowProfile:
    """U_s(s) - U and d_z^2 U_s(s) - U'' on grid nodes for s in [0, s_max].

    Tabulated at Chebyshev points in r = sqrt(s) (the heat flow of a profile
    with U''(0) != 0 is smooth in sqrt(s), not in s) and interpolated.
    """

    def __init__(self, profile: ShearProfile, grid: SemiInfiniteGrid, s_max: float, n_nodes: int = 33):
        if not s_max > 0:
            raise DomainError("s_max must be positive")
        self.s_max = float(s_max)
        r_max = math.sqrt(s_max)
        k = np.arange(n_nodes)
        r = 0.5 * r_max * (1 - np.cos(np.pi * k / (n_nodes - 1)))
        z = grid.z
        U0, U2 = profile.U(z), profile.d2U(z)
        dU = np.array([heat_evolve(profile, ri * ri, z) - U0 for ri in r])
        dU2 = np.array([heat_evolve(profile, ri * ri, z, derivative=2) - U2 for ri in r])
        dU[0] = dU2[0] = 0.0
        self._dU = BarycentricInterpolator(r, dU)
        self._dU2 = BarycentricInterpolator(r, dU2)

    def deltas(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        if s <= 0:
            return 0.0, 0.0
        if s > self.s_max * (1 + 1e-12):
            raise DomainError(f"slow time {s} beyond tabulated range {self.s_max}")
        r = math.sqrt(s)
        return self._dU(r), self._dU2(r)


def apply_S(f, alpha_n: float, t: float, nu: float, slow: SlowProfile | None) -> np.ndarray:
    """nu^{-1/8}[(U_s - U) i alpha_n w + u2 (d_z^2 U_s - U'')], u2 = -i alpha_n phi.

    ``slow = None`` is the stationary profile, for which S vanishes.
    """
    fa = _as_field(f, alpha_n)
    if slow is None or t == 0:
        return np.zeros_like(fa.omega)
    dU, dU2 = slow.deltas(math.sqrt(nu) * t)
    return nu ** -0.125 * (dU * 1j * alpha_n * fa.omega - 1j * alpha_n * fa.phi * dU2)


# ---------------------------------------------------------------- ladder

def support_sets(p_exp: int, M: int, mode: str) -> dict[int, list[int]]:
    """Wavenumber indices that can be nonzero at each level.

    Level 0 is {+-1}; S keeps the index (time-dependent mode only) and the
    level-j Q terms combine indices of levels k, l with k + l + 8p = j.
    Pairs n1 = n2 = 0 are dropped because Q vanishes on them identically.
    """
    act: dict[int, set[int]] = {0: {-1, 1}}
    for j in range(1, M + 1):
        s: set[int] = set(act[j - 1]) if mode == "time-dependent" else set()
        for k in range(0, j - 8 * p_exp + 1):
            l = j - 8 * p_exp - k
            if l < 0:
                continue
            for n1 in act[k]:
                for n2 in act[l]:
                    if n1 == 0 and n2 == 0:
                        continue
                    s.add(n1 + n2)
        act[j] = s
    return {j: sorted(v) for j, v in act.items()}


@dataclass
class ModeLadder:
    p_exp: int
    M: int
    mode: str
    nu: float
    alpha_nu: float
    lambda_nu: complex
    gamma0: float
    times: np.ndarray
    grid: SemiInfiniteGrid = field(repr=False)
    profile: ShearProfile = field(repr=False)
    support: dict = field(repr=False)
    systems: dict = field(repr=False)
    states: dict = field(repr=False)
    forcings: dict = field(repr=False)
    params: BLNormParams = field(repr=False)
    slow: SlowProfile | None = field(repr=False, default=None)
    base_coeffs: np.ndarray = field(repr=False, default=None)
    dt: float = 0.0
    failure: dict | None = None

    @property
    def complete(self) -> bool:
        return self.failure is None

    @property
    def n_snapshots(self) -> int:
        return min(len(v) for v in self.states.values())

    def field(self, j: int, n: int, k: int) -> ModeField:
        if abs(n) not in [abs(m) for m in self.support.get(j, [])] or (j, abs(n)) not in self.states:
            return ModeField.zero(self.grid, n * self.alpha_nu)
        f = ModeField.from_state(self.systems[abs(n)], self.states[(j, abs(n))][k])
        return f.conj() if n < 0 else f

    def omega(self, j: int, n: int, k: int) -> GridFunction:
        return GridFunction(self.grid, self.field(j, n, k).omega, n * self.alpha_nu)

    def family(self, j: int, k: int) -> ModeFamily:
        ns = self.support.get(j, [])
        modes = {n: self.omega(j, n, k) for n in ns}
        if not modes:
            modes = {0: GridFunction.zeros(self.grid, 0.0)}
        return ModeFamily(self.alpha_nu, modes)

    def norm_trace(self, j: int, n: int, b: int = 0) -> np.ndarray:
        out = []
        for k in range(self.n_snapshots):
            f = self.field(j, n, k)
            v = f.omega if b == 0 else f.domega
            out.append(bl_norm(GridFunction(self.grid, v), self.params))
        return np.array(out)

    def max_support_violation(self) -> int:
        """Largest |n| with a nonzero entry and |n| >= 2^{j+1}; 0 if none."""
        worst = 0
        for (j, n), snaps in self.states.items():
            if n >= 2 ** (j + 1) and any(np.any(s != 0) for s in snaps):
                worst = max(worst, n)
        return worst

    def reality_defect(self, j: int, k: int) -> float:
        """max_n |w_{j,-n} - conj(w_{j,n})|; zero by construction."""
        return self.family(j, k).max_asymmetry()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "n", "t", "norm_omega", "norm_dz_omega"])
            for j in range(self.M + 1):
                for n in self.support[j]:
                    if n < 0 or (j, n) not in self.states:
                        continue
                    a, b = self.norm_trace(j, n, 0), self.norm_trace(j, n, 1)
                    for t, x, y in zip(self.times, a, b):
                        w.writerow([j, n, repr(float(t)), repr(float(x)), repr(float(y))])

    def manifest(self) -> dict:
        return {
            "p_exp": self.p_exp, "M": self.M, "mode": self.mode, "nu": self.nu,
            "alpha_nu": self.alpha_nu,
            "lambda_nu": [self.lambda_nu.real, self.lambda_nu.imag],
            "gamma0": self.gamma0, "dt": self.dt,
            "t_end": float(self.times[-1]), "n_snapshots": int(len(self.times)),
            "support": {str(j): v for j, v in self.support.items()},
            "complete": self.complete, "failure": self.failure,
            "grid": self.grid.describe(), "norm": self.params.describe(),
        }


def _level0_state(coeffs: np.ndarray, lam: complex, t: float) -> np.ndarray:
    return coeffs * np.exp(lam * t)


def build_ladder(p_exp: int, M: int, sol: EigenSolution, t_grid, mode: str = "stationary", *,
                 profile: ShearProfile, dt: float | None = None,
                 params: BLNormParams | None = None, amplitude: float = 1.0) -> ModeLadder:
    """Build omega_{j,n}, 0 <= j <= M, at the snapshot times ``t_grid``.

    All levels advance together with Crank-Nicolson steps of size <= dt; the
    forcing of level j at each step end is formed from the already-updated
    lower levels, so Duhamel's integral is the trapezoid rule in s with the
    discrete propagator.  Level 0 is exact: e^{lambda t} times the eigenmode,
    scaled so that its physical velocity sup is ``amplitude``.  Only n >= 0 is
    evolved; negative n are conjugates, so reality holds exactly.
    """
    if mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}")
    if int(p_exp) != p_exp or p_exp < 1:
        raise DomainError("p_exp must be a positive integer")
    if int(M) != M or M < 0:
        raise DomainError("M must be a nonnegative integer")
    if sol.alpha < 0:
        sol = _conjugate_solution(sol)
    times = np.asarray(t_grid, float)
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise UsageError("t_grid must start at 0 and increase")
    grid, nu, a_nu, lam = sol.grid, sol.nu, sol.alpha, sol.lam
    params = params or BLNormParams(nu=nu, z_cap=tail_start(grid, profile))
    dt = dt or default_dt(a_nu, profile)
    support = support_sets(p_exp, M, mode)
    slow = None
    if mode == "time-dependent":
        slow = SlowProfile(profile, grid, math.sqrt(nu) * times[-1])
    fam = build_growing_mode(sol, amplitude)
    scale = fam[1].values[np.argmax(np.abs(sol.omega.values))] / sol.omega.values[np.argmax(np.abs(sol.omega.values))]
    coeffs0 = sol.coeffs * scale
    systems = {1: LinearSystem(profile, a_nu, nu, grid)}
    levels = [(j, n) for j in range(1, M + 1) for n in support[j] if n >= 0]
    for _, n in levels:
        if n not in systems:
            systems[n] = LinearSystem(profile, n * a_nu, nu, grid)
    states = {(0, 1): [coeffs0.copy()]}
    forcings: dict = {}
    cur = {key: np.zeros(systems[key[1]].size, complex) for key in levels}
    for key in levels:
        states[key] = [cur[key].copy()]
        forcings[key] = []
    ladder = ModeLadder(p_exp, M, mode, nu, a_nu, lam, lam.real / nu ** 0.25, times, grid,
                        profile, support, systems, states, forcings, params, slow, coeffs0, dt)

    def fields_at(t: float, level_states: dict) -> dict:
        f = {}
        f0 = ModeField.from_state(systems[1], _level0_state(coeffs0, lam, t))
        f[(0, 1)], f[(0, -1)] = f0, f0.conj()
        for (j, n), g in level_states.items():
            fj = ModeField.from_state(systems[n], g)
            f[(j, n)] = fj
            if n != 0:
                f[(j, -n)] = fj.conj()
        return f

    def forcing(j: int, n: int, t: float, flds: dict) -> np.ndarray:
        """State-equation forcing: vorticity R_{j,n}, or velocity form for n = 0."""
        an = n * a_nu
        out = np.zeros(grid.N, complex)
        if mode == "time-dependent" and n != 0 and (j - 1, n) in flds:
            out -= apply_S(flds[(j - 1, n)], an, t, nu, slow)
        for k in range(0, j - 8 * p_exp + 1):
            l = j - 8 * p_exp - k
            for n1 in support[k]:
                n2 = n - n1
                if n2 not in support[l] or (n1 == 0 and n2 == 0):
                    continue
                fa, fb = flds[(k, n1)], flds[(l, n2)]
                if n == 0:
                    out -= apply_Q_flux(fa, n1, fb, n2, a_nu)
                else:
                    out -= apply_Q(fa, n1, fb, n2, a_nu)
        return out

    unit0 = ModeField.from_state(systems[1], coeffs0)
    flds = fields_at(0.0, cur)
    F_prev = {}
    for key in levels:
        F_prev[key] = forcing(*key, 0.0, flds)
        forcings[key].append(F_prev[key])
    t = 0.0
    for t_next in times[1:]:
        n_sub = max(1, int(math.ceil((t_next - t) / dt - 1e-9)))
        h = (t_next - t) / n_sub
        for step in range(n_sub):
            t1 = t + (step + 1) * h
            f0 = unit0.scaled(np.exp(lam * t1))
            new_flds = {(0, 1): f0, (0, -1): f0.conj()}
            for key in levels:
                j, n = key
                sys_ = systems[n]
                F1 = forcing(j, n, t1, new_flds)
                solve = sys_.solver(h, sys_.A)
                rhs = sys_.B @ cur[key] + 0.5 * h * (sys_.A @ cur[key]) \
                    + 0.5 * h * (sys_.forcing_rows(F_prev[key]) + sys_.forcing_rows(F1))
                g = solve(rhs)
                if not np.all(np.isfinite(g)):
                    ladder.failure = {"j": j, "n": n, "t": t1,
                                      "reason": "non-finite state"}
                    return ladder
                cur[key], F_prev[key] = g, F1
                if j == M:
                    continue  # top level is never a source
                fj = ModeField.from_state(sys_, g)
                new_flds[key] = fj
                if n != 0:
                    new_flds[(j, -n)] = fj.conj()
        t = t_next
        states[(0, 1)].append(_level0_state(coeffs0, lam, t))
        for key in levels:
            states[key].append(cur[key].copy())
            forcings[key].append(F_prev[key])
    return ladder


# ---------------------------------------------------------------- checks

def _floor_ratio(j: int, p_exp: int) -> int:
    return j // (8 * p_exp)


def inductive_envelope(j: int, a: int, b: int, t, nu: float, gamma0: float, p_exp: int) -> np.ndarray:
    t = np.asarray(t, float)
    return (nu ** (a / 8) * nu ** (-b / 8) * nu ** (-0.25 * _floor_ratio(j, p_exp))
            * np.exp(gamma0 * (1 + j / (8 * p_exp)) * nu ** 0.25 * t))


@dataclass
class InductiveBound:
    j: int
    a: int
    b: int
    C0: float
    ratios: np.ndarray
    growth_factor: float

    def as_dict(self) -> dict:
        return {"j": self.j, "a": self.a, "b": self.b, "C0": self.C0,
                "growth_factor": self.growth_factor}


def check_inductive_bounds(ladder: ModeLadder, params: BLNormParams | None = None,
                           a_max: int = 2, gamma0: float | None = None) -> dict:
    """Fitted C0 per (j, a, b) for the inductive level-j norm bound.

    ratio(t) = sup_n |alpha_n|^a ||d_z^b w_{j,n}(t)|| / envelope(t).
    ``growth_factor`` = max over the whole window / max over its first half;
    it is 1 when the sup is attained early and stays near 1 when the ratio is
    uniformly bounded in t.
    """
    if not ladder.complete:
        raise UsageError("inductive bounds need a complete ladder")
    params = params or ladder.params
    g0 = ladder.gamma0 if gamma0 is None else gamma0
    times = ladder.times
    half = times <= 0.5 * times[-1] * (1 + 1e-12)
    out = {}
    for j in range(ladder.M + 1):
        ns = ladder.support[j]
        for b in (0, 1):
            per_n = {}
            for n in ns:
                tr = []
                for k in range(len(times)):
                    f = ladder.field(j, n, k)
                    v = f.omega if b == 0 else f.domega
                    tr.append(bl_norm(GridFunction(ladder.grid, v), params))
                per_n[n] = np.array(tr)
            for a in range(a_max + 1):
                num = np.zeros(len(times))
                for n, tr in per_n.items():
                    num = np.maximum(num, abs(n * ladder.alpha_nu) ** a * tr)
                env = inductive_envelope(j, a, b, times, ladder.nu, g0, ladder.p_exp)
                r = num / env
                first = r[half].max()
                gf = float(r.max() / first) if first > 0 else (1.0 if r.max() == 0 else math.inf)
                out[(j, a, b)] = InductiveBound(j, a, b, float(r.max()), r, gf)
    return out


@dataclass
class ResidualReport:
    t: float
    terms: dict
    total: float
    envelope: float
    family: ModeFamily = field(repr=False)

    @property
    def parts_sum(self) -> float:
        return float(sum(self.terms.values()))

    def as_dict(self) -> dict:
        return {"t": self.t, "terms": self.terms, "total": self.total,
                "parts_sum": self.parts_sum, "envelope": self.envelope}


def residual_envelope(M: int, t: float, nu: float, gamma0: float, p_exp: int) -> float:
    amp = nu ** p_exp * math.exp(gamma0 * nu ** 0.25 * t)
    js = range(M + 1, 2 * M + 1) if M > 0 else [1]
    return nu ** 0.25 * sum(nu ** (-0.25 * _floor_ratio(j, p_exp)) * amp ** (1 + j / (8 * p_exp))
                            for j in js)


def assemble_and_residual(ladder: ModeLadder, k: int,
                          params: BLNormParams | None = None) -> tuple[ModeFamily, ResidualReport]:
    """omega_app and R_app at snapshot k.

    R_app = nu^{p+(M+1)/8} S omega_M + sum_{k+l > M-8p} nu^{2p+(k+l)/8} Q(omega_k, omega_l),
    the leftover of (d_t - L) w + nu^{1/8} S w + Q(w, w) for w = omega_app.
    Term norms and the total are sups over n of the boundary-layer norm.
    """
    if k >= ladder.n_snapshots:
        raise UsageError("snapshot index out of range")
    params = params or ladder.params
    nu, p, M, a_nu = ladder.nu, ladder.p_exp, ladder.M, ladder.alpha_nu
    t = float(ladder.times[k])
    grid = ladder.grid
    support = ladder.support
    fields = {(j, n): ladder.field(j, n, k) for j in range(M + 1) for n in support[j]}
    app: dict[int, np.ndarray] = {}
    for (j, n), f in fields.items():
        app[n] = app.get(n, 0) + nu ** p * nu ** (j / 8) * f.omega
    omega_app = ModeFamily(a_nu, {n: GridFunction(grid, v, n * a_nu) for n, v in sorted(app.items())})
    parts: dict[str, dict[int, np.ndarray]] = {}
    if ladder.mode == "time-dependent":
        sM = {n: nu ** (p + (M + 1) / 8) * apply_S(fields[(M, n)], n * a_nu, t, nu, ladder.slow)
              for n in support[M] if n != 0}
        parts["S_M"] = sM
    for kk in range(M + 1):
        for ll in range(M + 1):
            if kk + ll <= M - 8 * p:
                continue
            acc: dict[int, np.ndarray] = {}
            for n1 in support[kk]:
                for n2 in support[ll]:
                    if n1 == 0 and n2 == 0:
                        continue
                    q = apply_Q(fields[(kk, n1)], n1, fields[(ll, n2)], n2, a_nu)
                    acc[n1 + n2] = acc.get(n1 + n2, 0) + nu ** (2 * p + (kk + ll) / 8) * q
            parts[f"Q_{kk}_{ll}"] = acc
    total_modes: dict[int, np.ndarray] = {}
    terms = {}
    for name, modes in parts.items():
        terms[name] = max((bl_norm(GridFunction(grid, v), params) for v in modes.values()), default=0.0)
        for n, v in modes.items():
            total_modes[n] = total_modes.get(n, 0) + v
    total = max((bl_norm(GridFunction(grid, v), params) for v in total_modes.values()), default=0.0)
    fam = ModeFamily(a_nu, {n: GridFunction(grid, v, n * a_nu) for n, v in sorted(total_modes.items())}
                     or {0: GridFunction.zeros(grid, 0.0)})
    env = residual_envelope(M, t, nu, ladder.gamma0, p)
    return omega_app, ResidualReport(t, terms, total, env, fam)


def duhamel_defect(ladder: ModeLadder, j: int, n: int) -> np.ndarray:
    """Relative defect of B dg/dt = A g + F at interior snapshots.

    dg/dt by centred differences in t, so the defect is O(dt_snap^2) for a
    uniform snapshot grid.
    """
    key = (j, abs(n))
    if key not in ladder.states or j == 0:
        raise UsageError("defect is defined for evolved levels only")
    sys_ = ladder.systems[abs(n)]
    g = ladder.states[key]
    F = ladder.forcings[key]
    ts = ladder.times
    out = []
    for k in range(1, len(g) - 1):
        dg = (g[k + 1] - g[k - 1]) / (ts[k + 1] - ts[k - 1])
        lhs = sys_.B @ dg
        rhs = sys_.A @ g[k] + sys_.forcing_rows(F[k])
        out.append(np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), np.abs(lhs).max(), 1e-300))
    return np.array(out)


def write_ladder_outputs(ladder: ModeLadder, csv_path, json_path, extra: dict | None = None) -> None:
    ladder.write_csv(csv_path)
    man = ladder.manifest()
    if extra:
        man.update(extra)
    with open(json_path, "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
