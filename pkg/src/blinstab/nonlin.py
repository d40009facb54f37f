"""Nonlinear evolution of a perturbation of a stationary boundary layer.

The perturbation vorticity w = sum_{|n|<=N} w_n(z) e^{i n alpha x} solves

    (d_t - L) w + u . grad w = F,      u = (d_z phi, -d_x phi),  Delta phi = w,

with phi = phi' = 0 at the wall for every n != 0 and u1 = 0 at the wall for
the mean mode.  The linear part is Crank-Nicolson on each mode (the linprop
systems), transport is Adams-Bashforth 2 evaluated pseudo-spectrally in x on
a 3/2-padded grid, which removes all quadratic aliasing (equivalent to the
2/3 rule).  The mean mode evolves its velocity with the flux form
d_t u1 = sqrt(nu) u1'' - <u2 w>.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .errors import DomainError, NumericalFailure, UsageError
from .grid import GridFunction, ModeFamily, SemiInfiniteGrid
from .linprop import LinearSystem, default_dt
from .norms import BLNormParams, bl_norm
from .profiles import ShearProfile
from .stability import EigenSolution, _conjugate_solution, build_growing_mode, tail_start

BLOWUP_FACTOR = 1e6
TAIL_RATIO = 1e-3


@dataclass(frozen=True)
class NonlinConfig:
    """Parameters of one nonlinear run; amplitudes refer to the velocity sup."""

    p_exp: float = 1.0
    seed_amplitude: float | None = None  # default nu^p_exp
    t_end: float | None = None  # default 1.25 T_1
    N_modes: int = 16
    dt: float | None = None
    theta0: float = 0.1
    record_every: int = 10
    blowup_factor: float = BLOWUP_FACTOR
    tail_ratio: float = TAIL_RATIO

    def __post_init__(self):
        if self.N_modes < 1:
            raise UsageError("N_modes must be at least 1")
        if self.record_every < 1:
            raise UsageError("record_every must be at least 1")
        if not self.theta0 > 0:
            raise DomainError("theta0 must be positive")


@dataclass
class SimState:
    t: float
    states: dict  # n >= 0 -> coefficients (velocity on rows for n = 0)
    prev_nl: dict | None = None
    steps: int = 0


@dataclass
class SimSeries:
    t: np.ndarray
    v_sup: np.ndarray
    w_sup: np.ndarray
    triple: np.ndarray
    tail_ratio: np.ndarray
    nu: float
    alpha_nu: float
    lambda_nu: complex
    seed: float
    flags: dict = field(default_factory=dict)
    final: SimState | None = field(default=None, repr=False)

    def running_rate(self) -> np.ndarray:
        """d ln ||v|| / dt by centred differences (NaN where undefined)."""
        lv = np.log(np.maximum(self.v_sup, 1e-300))
        r = np.full_like(lv, np.nan)
        if lv.size >= 3:
            r[1:-1] = (lv[2:] - lv[:-2]) / (self.t[2:] - self.t[:-2])
        return r

    def write_csv(self, path) -> None:
        rate = self.running_rate()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v_sup", "w_sup", "triple_norm", "tail_ratio", "growth_rate"])
            for row in zip(self.t, self.v_sup, self.w_sup, self.triple, self.tail_ratio, rate):
                w.writerow([repr(float(x)) for x in row])


class NonlinearSolver:
    """Mode-lattice integrator around one stationary profile."""

    def __init__(self, profile: ShearProfile, nu: float, alpha_nu: float, grid: SemiInfiniteGrid,
                 N_modes: int, params: BLNormParams | None = None):
        self.profile, self.nu, self.alpha_nu, self.grid = profile, nu, alpha_nu, grid
        self.N = N_modes
        self.systems = {n: LinearSystem(profile, n * alpha_nu, nu, grid) for n in range(N_modes + 1)}
        self.params = params or BLNormParams(nu=nu, z_cap=tail_start(grid, profile))
        # 3/2 padding: products of modes |n| <= N are exact for |n| <= N
        self.n_x = int(2 ** math.ceil(math.log2(3 * N_modes + 2)))

    # fields ---------------------------------------------------------------
    def _spectra(self, state: SimState):
        """Modal arrays (n = 0..N) of phi, d_z phi, w, d_z w."""
        N, grid = self.N, self.grid
        out = {k: np.zeros((N + 1, grid.N), complex) for k in ("phi", "dphi", "w", "dw")}
        s0, g0 = self.systems[0], state.states[0]
        out["phi"][0], out["dphi"][0] = s0.phi(g0), s0.dphi(g0)
        out["w"][0], out["dw"][0] = s0.omega(g0), s0.domega(g0)
        # the clamped basis does not depend on n: one product per derivative
        G = np.stack([state.states[n] for n in range(1, N + 1)], axis=1)
        E = self.systems[1].basis.E
        a2 = ((np.arange(1, N + 1) * self.alpha_nu) ** 2)[None, :]
        F = [E[k] @ G for k in range(4)]
        out["phi"][1:], out["dphi"][1:] = F[0].T, F[1].T
        out["w"][1:] = (F[2] - a2 * F[0]).T
        out["dw"][1:] = (F[3] - a2 * F[1]).T
        return out

    def _to_physical(self, c: np.ndarray) -> np.ndarray:
        """Real field sum_{|n|<=N} c_n e^{i n alpha x} on n_x points (rows)."""
        full = np.zeros((self.n_x // 2 + 1, c.shape[1]), complex)
        full[: c.shape[0]] = c
        return np.fft.irfft(full, n=self.n_x, axis=0) * self.n_x

    def _to_modes(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfft(f, axis=0)[: self.N + 1] / self.n_x

    def physical_fields(self, state: SimState) -> dict:
        sp_ = self._spectra(state)
        ik = 1j * self.alpha_nu * np.arange(self.N + 1)[:, None]
        P = self._to_physical
        return {
            "u1": P(sp_["dphi"]), "u2": P(-ik * sp_["phi"]),
            "w": P(sp_["w"]), "wx": P(ik * sp_["w"]), "wz": P(sp_["dw"]),
            "spectra": sp_,
        }

    def nonlinear_term(self, state: SimState) -> dict:
        """State-equation forcing of -u . grad w per mode (flux form for n = 0)."""
        f = self.physical_fields(state)
        adv = self._to_modes(f["u1"] * f["wx"] + f["u2"] * f["wz"])
        flux = self._to_modes(f["u2"] * f["w"])
        out = {n: -adv[n] for n in range(1, self.N + 1)}
        out[0] = -flux[0]
        return out

    # diagnostics -----------------------------------------------------------
    def diagnostics(self, state: SimState) -> tuple[float, float, float, float]:
        f = self.physical_fields(state)
        v = float(np.sqrt(f["u1"] ** 2 + f["u2"] ** 2).max())
        w = float(np.abs(f["w"]).max())
        sp_ = f["spectra"]
        e = nu8 = self.nu ** 0.125
        plain = dx = dz = 0.0
        energy = np.zeros(self.N + 1)
        for n in range(self.N + 1):
            if not np.any(sp_["w"][n]):
                continue
            nw = bl_norm(GridFunction(self.grid, sp_["w"][n]), self.params)
            plain = max(plain, nw)
            dx = max(dx, n * self.alpha_nu * nw)
            dz = max(dz, bl_norm(GridFunction(self.grid, sp_["dw"][n]), self.params))
            energy[n] = float(np.real(self.grid.integrate(np.abs(sp_["dphi"][n]) ** 2
                                                           + (n * self.alpha_nu) ** 2 * np.abs(sp_["phi"][n]) ** 2)))
        triple = plain + nu8 * dx + e * dz
        top = max(1, self.N - self.N // 3)
        tot = energy.sum()
        tail = float(energy[top:].sum() / tot) if tot > 0 else 0.0
        return v, w, triple, tail

    # stepping ----------------------------------------------------------------
    def step(self, state: SimState, dt: float, forcing: Callable[[float], dict] | None = None) -> SimState:
        nl = self.nonlinear_term(state)
        if forcing is not None:
            extra = forcing(state.t)
            for n, v in extra.items():
                nl[n] = nl[n] + v
        new = {}
        for n, g in state.states.items():
            s = self.systems[n]
            cur = s.forcing_rows(nl[n])
            if state.prev_nl is None:
                ext = cur
            else:
                ext = 1.5 * cur - 0.5 * s.forcing_rows(state.prev_nl[n])
            rhs = s.B @ g + 0.5 * dt * (s.A @ g) + dt * ext
            new[n] = s.solver(dt, s.A)(rhs)
        return SimState(state.t + dt, new, nl, state.steps + 1)

    def zero_state(self) -> SimState:
        return SimState(0.0, {n: np.zeros(s.size, complex) for n, s in self.systems.items()})

    def seeded_state(self, sol: EigenSolution, amplitude: float) -> SimState:
        """The growing mode pair with physical velocity sup = amplitude."""
        st = self.zero_state()
        if amplitude == 0:
            return st
        base = sol if sol.alpha > 0 else _conjugate_solution(sol)
        fam = build_growing_mode(base, amplitude)
        i = int(np.argmax(np.abs(base.omega.values)))
        st.states[1] = base.coeffs * (fam[1].values[i] / base.omega.values[i])
        return st

    def family(self, state: SimState) -> ModeFamily:
        sp_ = self._spectra(state)
        modes = {}
        for n in range(-self.N, self.N + 1):
            v = sp_["w"][abs(n)]
            modes[n] = GridFunction(self.grid, v if n >= 0 else v.conj(), n * self.alpha_nu)
        return ModeFamily(self.alpha_nu, modes)


def save_checkpoint(path, state: SimState, meta: dict) -> None:
    arrays = {f"g{n}": g for n, g in state.states.items()}
    if state.prev_nl is not None:
        arrays.update({f"nl{n}": v for n, v in state.prev_nl.items()})
    tmp = Path(str(path) + ".tmp.npz")
    np.savez(tmp, t=state.t, steps=state.steps, meta=json.dumps(meta), **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[SimState, dict]:
    d = np.load(path, allow_pickle=False)
    states = {int(k[1:]): d[k] for k in d.files if k.startswith("g")}
    nls = {int(k[2:]): d[k] for k in d.files if k.startswith("nl")}
    st = SimState(float(d["t"]), states, nls or None, int(d["steps"]))
    return st, json.loads(str(d["meta"]))


def run_experiment(p_exp: float, nu: float, sol: EigenSolution, profile: ShearProfile,
                   config: NonlinConfig | None = None, *, t_end: float | None = None,
                   forcing: Callable[[float], dict] | None = None,
                   checkpoint: str | Path | None = None, resume: bool = False) -> SimSeries:
    """Evolve the seeded perturbation and record amplitude diagnostics.

    Stops early when the triple norm exceeds blowup_factor x its seed value
    (flag ``blowup``); flags ``under_resolved`` when the energy share of the
    top third of the mode lattice exceeds tail_ratio.
    """
    cfg = config or NonlinConfig(p_exp=p_exp)
    if sol.nu != nu:
        raise UsageError("eigen-solution computed at a different nu")
    a_nu = abs(sol.alpha)
    solver = NonlinearSolver(profile, nu, a_nu, sol.grid, cfg.N_modes)
    seed = nu ** p_exp if cfg.seed_amplitude is None else cfg.seed_amplitude
    if t_end is None:
        t_end = cfg.t_end
    if t_end is None:
        from .norms import TimeScales, critical_times
        ts = critical_times(TimeScales(p_exp, 0.3, sol.lam.real / nu ** 0.25, nu, theta0=cfg.theta0))
        t_end = 1.25 * ts.T_1
    dt = cfg.dt or default_dt(a_nu, profile)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    dt = t_end / n_steps
    if resume and checkpoint is not None and Path(checkpoint).exists():
        state, _ = load_checkpoint(checkpoint)
    else:
        state = solver.seeded_state(sol, seed)
    rows = []
    flags = {"blowup": False, "under_resolved": False, "stopped_at": None}
    d0 = solver.diagnostics(state)
    ref = d0[2] if d0[2] > 0 else None
    rows.append((state.t, *d0))
    while state.steps < n_steps:
        state = solver.step(state, dt, forcing)
        if not all(np.all(np.isfinite(g)) for g in state.states.values()):
            raise NumericalFailure(f"non-finite state at t = {state.t:.6g}")
        if state.steps % cfg.record_every == 0 or state.steps == n_steps:
            d = solver.diagnostics(state)
            rows.append((state.t, *d))
            if d[3] > cfg.tail_ratio:
                flags["under_resolved"] = True
            if ref is not None and d[2] > cfg.blowup_factor * ref:
                flags["blowup"] = True
                flags["stopped_at"] = state.t
                break
            if checkpoint is not None:
                save_checkpoint(checkpoint, state, {"nu": nu, "alpha_nu": a_nu, "dt": dt})
    arr = np.array(rows, float)
    return SimSeries(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], nu, a_nu, sol.lam,
                     seed, flags, state)


@dataclass
class InstabilityReport:
    growth_rate: float
    growth_rate_stderr: float
    fit_window: tuple
    crossings: dict
    final_w_sup: float
    reached_order_one: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _crossing(t: np.ndarray, v: np.ndarray, level: float) -> float | None:
    above = np.nonzero(v >= level)[0]
    if above.size == 0:
        return None
    k = int(above[0])
    if k == 0:
        return float(t[0])
    l0, l1 = math.log(v[k - 1]), math.log(v[k])
    return float(t[k - 1] + (math.log(level) - l0) / (l1 - l0) * (t[k] - t[k - 1]))


def measure_instability(series: SimSeries, linear_cap: float | None = None,
                        levels: dict | None = None, theta0: float = 0.1) -> InstabilityReport:
    """Log-linear fit of ||v|| on the linear phase and level-crossing times.

    The linear phase is ||v|| < linear_cap (default 1e-2 nu^{5/8}); the fit
    is refused when fewer than three samples lie below the cap.
    """
    nu = series.nu
    cap = 1e-2 * nu ** 0.625 if linear_cap is None else linear_cap
    keep = (series.v_sup < cap) & (series.v_sup > 0)
    if keep.sum() < 3:
        raise DomainError("no linear phase: seed amplitude too large or too few samples")
    fit = stats.linregress(series.t[keep], np.log(series.v_sup[keep]))
    lv = levels or {"nu^3/4": nu ** 0.75, "nu^5/8": nu ** 0.625, "theta0 nu^5/8": theta0 * nu ** 0.625}
    cross = {k: _crossing(series.t, series.v_sup, v) for k, v in lv.items()}
    w_final = float(series.w_sup[-1])
    return InstabilityReport(float(fit.slope), float(fit.stderr),
                             (float(series.t[keep][0]), float(series.t[keep][-1])),
                             cross, w_final, w_final >= 1.0)


def sublayer_factor(series: SimSeries) -> float:
    """||w(0)||_inf / ||v(0)||_inf of the seed: vorticity concentration at the wall."""
    if series.v_sup[0] == 0:
        raise DomainError("sublayer factor undefined for a zero seed")
    return float(series.w_sup[0] / series.v_sup[0])


def write_verdict(path, series: SimSeries, report: InstabilityReport, T_1: float, extra: dict | None = None) -> dict:
    out = {
        "nu": series.nu, "alpha_nu": series.alpha_nu,
        "lambda_nu": [series.lambda_nu.real, series.lambda_nu.imag],
        "seed": series.seed, "flags": series.flags, "T_1": T_1,
        "report": report.as_dict(),
        "growth_rate_rel_error": abs(report.growth_rate / series.lambda_nu.real - 1),
    }
    if extra:
        out.update(extra)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
    return out
