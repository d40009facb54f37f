"""The twelve acceptance experiments.

Each ``criterion_k(cfg)`` runs one experiment at its stated tolerances and
returns a :class:`CriterionResult`.  The ``judge_*`` helpers turn already
computed results into verdicts so the CLI can attach checks to its outputs.
Settings not fixed by a criterion come from the RunConfig.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .config import RunConfig
from .elliptic import (check_estimate_A1, check_estimate_A2, check_estimate_A2bis,
                       invert_laplace_2d, solve_halfline)
from .expansion import (ModeField, apply_Q, assemble_and_residual, build_ladder,
                        check_inductive_bounds, q_physical_oracle, support_sets)
from .grid import GridFunction, GridSpec, ModeFamily
from .linprop import (LinearSystem, eigen_run, propagate, random_initial_data,
                      verify_derivative_bound, verify_semigroup_bound)
from .nonlin import NonlinConfig, measure_instability, run_experiment, sublayer_factor
from .norms import (BLNormParams, TimeScales, algebra_constant, bl_norm,
                    bl_norm_algebra_check, bl_weight, critical_times)
from .profiles import BUILTIN, ShearProfile, profile_from_config
from .stability import (EigenSolution, GrowthScan, NeutralCurve, estimate_gamma0,
                        leading_eigenvalue, max_growth, mode_structure,
                        rayleigh_spectrum, trace_neutral_curve, viscosity)

NAMES = {
    1: "growth-rate scaling",
    2: "most-unstable wavenumber scaling",
    3: "neutral branches",
    4: "Rayleigh stability",
    5: "dual-method eigenvalue agreement",
    6: "elliptic estimate suite",
    7: "norm calculus",
    8: "semigroup bounds",
    9: "ladder correctness",
    10: "residual closure",
    11: "nonlinear experiment",
    12: "mode-structure scaling",
}

# stated lattices and tolerances
GROWTH_NUS = tuple(np.geomspace(1e-8, 1e-5, 7))
NEUTRAL_RS = tuple(np.geomspace(3e6, 1e8, 5))
RAYLEIGH_ALPHAS = tuple(np.linspace(0.1, 2.0, 10))
DUAL_NUS = (1e-8, 3e-9, 1e-9)
DUAL_ALPHAS = (0.1, 0.12, 0.14)
DUAL_FD = GridSpec(N=1200, backend="fd", fd_width=9)
ELLIPTIC_ALPHAS = tuple(range(1, 9))
ELLIPTIC_DELTAS = (0.2, 0.1, 0.05)
ELLIPTIC_NS = (150, 200, 300)
STRUCTURE_RS = (1e6, 1.6e7)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} ({self.name}): {self.detail}"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "detail": self.detail, "metrics": _jsonable(self.metrics)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _result(n: int, passed: bool, metrics: dict, detail: str) -> CriterionResult:
    return CriterionResult(n, NAMES[n], bool(passed), metrics, detail)


def _profile(cfg: RunConfig, name: str | None = None) -> ShearProfile:
    if name is None:
        return profile_from_config(cfg.profile.as_mapping())
    return BUILTIN[name]()


# ---------------------------------------------------------------- shared mode

@lru_cache(maxsize=8)
def _reference_mode_cached(profile_key: tuple, nu: float, alpha: float | None,
                           grid: GridSpec, workers: int) -> EigenSolution:
    profile = profile_from_config(dict(profile_key))
    if alpha is None:
        mg = max_growth(profile, nu, grid, workers=workers)
        if mg.alpha_star is None:
            from .errors import DomainError
            raise DomainError(f"profile {profile.name} has no unstable mode at nu = {nu:g}")
        alpha = mg.alpha_star
    sol = leading_eigenvalue(profile, alpha, nu, grid)
    if sol is None:
        from .errors import NumericalFailure
        raise NumericalFailure(f"no resolved mode at alpha = {alpha:g}, nu = {nu:g}")
    return sol


def reference_mode(cfg: RunConfig) -> tuple[ShearProfile, EigenSolution]:
    """Leading mode of the configured profile at cfg.nu and cfg.alpha
    (default: the most unstable wavenumber)."""
    key = tuple(sorted(cfg.profile.as_mapping().items()))
    sol = _reference_mode_cached(key, cfg.nu, cfg.alpha, cfg.grid.spec(), cfg.workers)
    return _profile(cfg), sol


def time_scales(cfg: RunConfig, sol: EigenSolution) -> TimeScales:
    g0 = sol.lam.real / sol.nu ** 0.25
    return critical_times(TimeScales(cfg.expansion.p_exp, cfg.expansion.tau, g0, sol.nu,
                                     theta0=cfg.nonlin.theta0, re_lambda0=sol.lam.real))


# ---------------------------------------------------------------- 1, 2

@lru_cache(maxsize=4)
def _growth_scan(N: int, workers: int) -> GrowthScan:
    return estimate_gamma0(BUILTIN["exponential"](), GROWTH_NUS, GridSpec(N=N),
                           n_alpha=20, workers=workers)


def judge_growth(scan: GrowthScan) -> tuple[CriterionResult, CriterionResult]:
    unstable = [r for r in scan.rows if r["re_lambda"] > 0]
    n_u = len(unstable)
    gs, asl = scan.growth_fit["slope"], scan.alpha_fit["slope"]
    base = {"profile": scan.profile, "n_points": len(scan.rows), "n_unstable": n_u,
            "rows": scan.rows}
    ok1 = n_u >= 7 and abs(gs - 0.25) <= 0.03
    ok2 = n_u >= 7 and abs(asl - 0.125) <= 0.02
    why = "" if n_u >= 7 else f"; only {n_u} of {len(scan.rows)} viscosities unstable"
    r1 = _result(1, ok1, {**base, "fit": scan.growth_fit},
                 f"slope {gs:.4g} vs 0.25 +- 0.03{why}")
    r2 = _result(2, ok2, {**base, "fit": scan.alpha_fit},
                 f"slope {asl:.4g} vs 0.125 +- 0.02{why}")
    return r1, r2


def criterion_1(cfg: RunConfig) -> CriterionResult:
    return judge_growth(_growth_scan(cfg.grid.N, cfg.workers))[0]


def criterion_2(cfg: RunConfig) -> CriterionResult:
    return judge_growth(_growth_scan(cfg.grid.N, cfg.workers))[1]


# ---------------------------------------------------------------- 3

def judge_neutral(nc: NeutralCurve) -> CriterionResult:
    lo, up = nc.low_fit["slope"], nc.up_fit["slope"]
    decades = math.log10(max(nc.R) / min(nc.R)) if nc.R else 0.0
    finite = all(np.isfinite(nc.alpha_low)) and all(np.isfinite(nc.alpha_up))
    ok = (finite and not nc.failures and decades >= 1.5
          and abs(lo + 0.25) <= 0.04 and abs(up + 1 / 6) <= 0.04)
    return _result(3, ok, {**nc.summary(), "decades": decades},
                   f"lower slope {lo:.4g} vs -0.25 +- 0.04, upper slope {up:.4g} "
                   f"vs -0.167 +- 0.04 over {decades:.2f} decades")


def criterion_3(cfg: RunConfig) -> CriterionResult:
    nc = trace_neutral_curve(BUILTIN["erf"](), NEUTRAL_RS, GridSpec(N=200), n_alpha=24,
                             workers=cfg.workers)
    return judge_neutral(nc)


# ---------------------------------------------------------------- 4

def rayleigh_table(profiles: dict[str, ShearProfile], alphas, grid: GridSpec) -> dict:
    out = {}
    for name, prof in profiles.items():
        rows = []
        for a in alphas:
            r = rayleigh_spectrum(prof, float(a), grid.build(float(a)), threshold=1e-8)
            rows.append({"alpha": float(a), "n_unstable": len(r.modes),
                         "max_im_c": max((c.imag for c, _ in r.modes), default=0.0)})
        out[name] = rows
    return out


def judge_rayleigh(table: dict) -> CriterionResult:
    stable = {n: all(r["n_unstable"] == 0 for r in rows) for n, rows in table.items()}
    monotone_ok = stable.get("exponential", False) and stable.get("erf", False)
    control = not stable.get("shear-layer", True)
    return _result(4, monotone_ok and control, {"table": table, "all_stable": stable},
                   f"exponential stable: {stable.get('exponential')}, erf stable: "
                   f"{stable.get('erf')}, inflected control unstable: {control}")


def criterion_4(cfg: RunConfig) -> CriterionResult:
    profiles = {n: BUILTIN[n]() for n in ("exponential", "erf", "shear-layer")}
    return judge_rayleigh(rayleigh_table(profiles, RAYLEIGH_ALPHAS, GridSpec(N=150)))


# ---------------------------------------------------------------- 5

def dual_method_table(profile: ShearProfile, nus, alphas, spectral: GridSpec,
                      fd: GridSpec) -> list[dict]:
    rows = []
    for nu in nus:
        for a in alphas:
            s = leading_eigenvalue(profile, a, nu, spectral)
            f = leading_eigenvalue(profile, a, nu, fd)
            rel = (abs(f.lam - s.lam) / abs(s.lam)) if (s is not None and f is not None) else math.inf
            rows.append({"nu": nu, "alpha": a,
                         "lam_spectral": None if s is None else s.lam,
                         "lam_fd": None if f is None else f.lam, "rel_diff": rel})
    return rows


def judge_dual(rows: list[dict]) -> CriterionResult:
    worst = max(r["rel_diff"] for r in rows)
    return _result(5, worst <= 1e-4, {"rows": rows, "worst_rel_diff": worst},
                   f"worst relative difference {worst:.3g} over {len(rows)} lattice points "
                   f"(tolerance 1e-4)")


def criterion_5(cfg: RunConfig) -> CriterionResult:
    return judge_dual(dual_method_table(BUILTIN["erf"](), DUAL_NUS, DUAL_ALPHAS,
                                        GridSpec(N=150), DUAL_FD))


# ---------------------------------------------------------------- 6

def sublayer_test_function(grid, delta: float, beta: float) -> GridFunction:
    """f = delta^{-1} exp(-z/delta) exp(-beta z)."""
    return GridFunction.from_callable(grid, lambda z: np.exp(-z / delta - beta * z) / delta)


ESTIMATES = ("A1", "A2", "A2bis", "phi_velocity", "velocity_gradient", "psi_inverse_v2")


def elliptic_constants(N: int, beta: float = 0.25, alphas=ELLIPTIC_ALPHAS,
                       deltas=ELLIPTIC_DELTAS, z_max: float = 60.0, z_cap: float = 30.0) -> dict:
    """Measured constants of the six estimates on the (alpha, delta) lattice."""
    g = GridSpec(N=N, z_max=z_max).build()
    out = {k: [] for k in ESTIMATES}
    for a in alphas:
        for d in deltas:
            P = BLNormParams(beta=beta, p=1, delta_override=d, z_cap=z_cap)
            f = sublayer_test_function(g, d, beta)
            out["A1"].append(check_estimate_A1(f, a, beta, z_cap=z_cap).C)
            out["A2"].append(check_estimate_A2(f, a, P).C)
            out["A2bis"].append(check_estimate_A2bis(f, a, P).C)
            inv = invert_laplace_2d(ModeFamily(float(a), {1: f}), P)
            for k in ESTIMATES[3:]:
                out[k].append(inv.constants[k])
    return out


def closed_form_error(N: int = 150) -> float:
    """sup |phi + z e^{-z}/2| for phi'' - phi = e^{-z}, phi(0) = 0."""
    g = GridSpec(N=N, z_max=60.0).build()
    r = solve_halfline(GridFunction.from_callable(g, lambda z: np.exp(-z)), 1.0)
    return float(np.abs(r.phi.values + 0.5 * g.z * np.exp(-g.z)).max())


def judge_elliptic(by_N: dict[int, dict], closed: float, refine_tol: float = 1e-6) -> CriterionResult:
    Ns = sorted(by_N)
    coarse = by_N[Ns[0]]
    spreads = {k: max(v) / min(v) for k, v in coarse.items()}
    fitted = {N: {k: max(v) for k, v in by_N[N].items()} for N in Ns}
    finite = all(np.isfinite(v).all() for d in by_N.values() for v in d.values())
    monotone = {k: all(fitted[b][k] <= fitted[a][k] * (1 + refine_tol)
                       for a, b in zip(Ns, Ns[1:])) for k in ESTIMATES}
    stable = {k: s <= 2.0 for k, s in spreads.items()}
    ok = finite and all(stable.values()) and all(monotone.values()) and closed <= 1e-8
    bad = [k for k in ESTIMATES if not stable[k]]
    detail = (f"spreads {', '.join(f'{k} {spreads[k]:.3g}' for k in ESTIMATES)} (limit 2); "
              f"refinement non-increasing: {all(monotone.values())}; closed form error {closed:.2g}")
    if bad:
        detail += f"; spread above 2 for {', '.join(bad)}"
    return _result(6, ok, {"spreads": spreads, "fitted": fitted, "non_increasing": monotone,
                           "closed_form_error": closed, "finite": finite}, detail)


def criterion_6(cfg: RunConfig) -> CriterionResult:
    by_N = {N: elliptic_constants(N) for N in ELLIPTIC_NS}
    return judge_elliptic(by_N, closed_form_error())


# ---------------------------------------------------------------- 7

def _random_smooth(rng: np.random.Generator, z: np.ndarray, delta: float) -> np.ndarray:
    """Decaying smooth function, optionally with a wall layer of width delta."""
    k = rng.uniform(0.5, 2.0)
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    b = rng.uniform(0.2, 1.0)
    f = np.exp(-k * z) * (c[0] + c[1] * z + c[2] * np.sin(b * z))
    if rng.random() < 0.5:
        f = f + c[3] * np.exp(-z / delta) / delta
    return f


# analytic functions for the brute-force oracle: (f, beta, p, delta)
BRUTE_CASES = (
    (lambda z: np.exp(-2 * z) * (1 + 10.0 / (1 + (z / 0.1) ** 4)), 1.0, 1, 0.1),
    (lambda z: z * np.exp(-z) * np.cos(z), 0.25, 0, 0.1),
    (lambda z: z ** 2 * np.exp(-0.7 * z), 0.25, 1, 0.1),
    (lambda z: np.exp(-2 * z) * (z / 0.1) / (1 + (z / 0.1) ** 3), 1.0, 1, 0.1),
    (lambda z: np.exp(-2 * z) * (z / 0.1) / (1 + (z / 0.1) ** 3), 1.0, 2, 0.1),
    (lambda z: (1 - z) * np.exp(-1.5 * z) + 0.2 * np.exp(-z / 0.05), 0.25, 2, 0.05),
)


def brute_force_errors(N: int = 200, z_cap: float = 20.0, n_dense: int = 10 ** 6) -> list[float]:
    g = GridSpec(N=N, z_max=60.0).build()
    zz = np.linspace(0.0, z_cap, n_dense + 1)
    errs = []
    for fn, beta, p, d in BRUTE_CASES:
        P = BLNormParams(beta=beta, p=p, delta_override=d, z_cap=z_cap)
        dense = float(np.max(bl_weight(zz, P) * np.abs(fn(zz))))
        errs.append(abs(bl_norm(GridFunction.from_callable(g, fn), P) - dense) / dense)
    return errs


def norm_calculus_checks(seed: int = 0, n_trials: int = 1000, N: int = 150) -> dict:
    rng = np.random.default_rng(seed)
    g = GridSpec(N=N, z_max=60.0).build()
    P = BLNormParams(beta=0.25, gamma=1.0, nu=1e-8, p=1, z_cap=30.0)
    z = g.z
    algebra_fail, containment_fail = 0, 0
    worst_alg = 0.0
    for _ in range(n_trials):
        f = GridFunction(g, _random_smooth(rng, z, P.delta))
        h = GridFunction(g, _random_smooth(rng, z, P.delta))
        chk = bl_norm_algebra_check(f, h, P, 1, 1)
        worst_alg = max(worst_alg, chk.lhs / chk.rhs)
        algebra_fail += not chk.holds
        norms = [bl_norm(f, P, q) for q in range(4)]
        containment_fail += any(norms[q + 1] > norms[q] * (1 + 1e-9) for q in range(3))
    return {"trials": n_trials, "algebra_failures": algebra_fail,
            "algebra_worst_ratio": worst_alg, "containment_failures": containment_fail,
            "pointwise_product_constant": algebra_constant(P, 1, 1)}


def judge_norms(checks: dict, brute: list[float]) -> CriterionResult:
    worst = max(brute)
    ok = checks["algebra_failures"] == 0 and checks["containment_failures"] == 0 and worst <= 1e-6
    return _result(7, ok, {**checks, "brute_force_rel_errors": brute},
                   f"algebra failures {checks['algebra_failures']}/{checks['trials']} "
                   f"(worst lhs/rhs {checks['algebra_worst_ratio']:.3g}), containment failures "
                   f"{checks['containment_failures']}/{checks['trials']}, brute-force sup "
                   f"error {worst:.2g} (tolerance 1e-6)")


def criterion_7(cfg: RunConfig) -> CriterionResult:
    return judge_norms(norm_calculus_checks(cfg.seed), brute_force_errors())


# ---------------------------------------------------------------- 8

@dataclass
class SemigroupStudy:
    gamma0: float
    gamma1: float
    t_end: float
    runs: list  # (label, PropagatorRun)
    fit_fraction: float = 0.5

    def _fit_mask(self, times):
        return times <= self.fit_fraction * self.t_end * (1 + 1e-12)

    def evaluate(self) -> dict:
        sem = [(lab, verify_semigroup_bound(r, self.gamma1)) for lab, r in self.runs]
        der = [(lab, verify_derivative_bound(r, self.gamma1)) for lab, r in self.runs]
        t = self.runs[0][1].times
        m = self._fit_mask(t)
        C_sem = max(f.ratios[m].max() for _, f in sem)
        C_der = max(f.ratios[m].max() for _, f in der)
        return {
            "gamma0": self.gamma0, "gamma1": self.gamma1, "t_end": self.t_end,
            "fit_window": [0.0, self.fit_fraction * self.t_end],
            "C_semigroup": C_sem, "C_derivative": C_der,
            "semigroup_violations": {lab: f.violations(C_sem) for lab, f in sem},
            "derivative_violations": {lab: f.violations(C_der) for lab, f in der},
            "per_run_C": {lab: f.C for lab, f in sem},
            "per_run_C_derivative": {lab: f.C for lab, f in der},
        }


def semigroup_study(cfg: RunConfig, profile: ShearProfile, sol: EigenSolution) -> SemigroupStudy:
    g0 = sol.lam.real / sol.nu ** 0.25
    g1 = cfg.linprop.gamma1_factor * g0
    t_end = cfg.linprop.t_end or 5.0 / sol.lam.real
    times = np.linspace(0.0, t_end, cfg.linprop.n_snapshots)
    system = LinearSystem(profile, sol.alpha, sol.nu, sol.grid)
    dt = cfg.linprop.dt
    runs = [("eigenfunction", eigen_run(sol, profile, t_end, dt, times=times, system=system))]
    rng = np.random.default_rng(cfg.seed)
    for k in range(cfg.linprop.n_random):
        g = random_initial_data(system, rng, sublayer=bool(k % 2))
        runs.append((f"random_{k:02d}", propagate(None, sol.alpha, sol.nu, profile, t_end, dt,
                                                 grid=sol.grid, times=times, state0=g,
                                                 system=system)))
    return SemigroupStudy(g0, g1, t_end, runs)


def judge_semigroup(ev: dict) -> CriterionResult:
    vs = sum(ev["semigroup_violations"].values())
    vd = sum(ev["derivative_violations"].values())
    n = len(ev["semigroup_violations"])
    ok = vs == 0 and vd == 0 and np.isfinite(ev["C_semigroup"]) and np.isfinite(ev["C_derivative"])
    return _result(8, ok, ev,
                   f"{n} runs, C fitted on the first half of [0, {ev['t_end']:.4g}]: "
                   f"C_gamma {ev['C_semigroup']:.3g} with {vs} violations, derivative C "
                   f"{ev['C_derivative']:.3g} with {vd} violations")


def criterion_8(cfg: RunConfig) -> CriterionResult:
    profile, sol = reference_mode(cfg)
    return judge_semigroup(semigroup_study(cfg, profile, sol).evaluate())


# ---------------------------------------------------------------- 9, 10

_LADDERS: dict = {}


def ladder_for(cfg: RunConfig):
    """Ladder over [0, T_star] for the reference mode (M raised to 3 if lower)."""
    key = (tuple(sorted(cfg.profile.as_mapping().items())), cfg.nu, cfg.alpha,
           cfg.grid.spec(), cfg.expansion, cfg.nonlin.theta0)
    if key not in _LADDERS:
        profile, sol = reference_mode(cfg)
        ts = time_scales(cfg, sol)
        e = cfg.expansion
        t_grid = np.linspace(0.0, ts.T_star, e.n_snapshots)
        ladder = build_ladder(e.p_exp, max(e.M, 3), sol, t_grid, e.mode, profile=profile,
                              dt=e.dt)
        _LADDERS.clear()
        _LADDERS[key] = (ladder, ts)
    return _LADDERS[key]


def q_oracle_errors(sol: EigenSolution, seed: int = 1) -> list[float]:
    rng = np.random.default_rng(seed)
    g, a = sol.grid, abs(sol.alpha)
    z = g.z

    def rf():
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        return GridFunction(g, (c[0] * (1 - z) + c[1] * z ** 2) * np.exp(-z))

    errs = []
    for n1, n2 in [(1, 1), (1, -1), (2, -1), (-1, 2), (0, 1), (1, 0), (2, 2), (-2, 1)]:
        A = ModeField.from_omega(rf(), n1 * a)
        B = ModeField.from_omega(rf(), n2 * a)
        q = apply_Q(A, n1, B, n2, a)
        o = q_physical_oracle(A, n1, B, n2, a, g)
        errs.append(float(np.abs(q - o).max() / max(np.abs(o).max(), 1e-300)))
    return errs


def support_law_violations(ladder, p_max: int = 1, M_max: int = 12) -> dict:
    """Indices outside |n| < 2^{j+1}: in the stored ladder and in the support sets."""
    sets_bad = 0
    for mode in ("stationary", "time-dependent"):
        for p in range(1, p_max + 1):
            for j, ns in support_sets(p, M_max, mode).items():
                sets_bad += sum(abs(n) >= 2 ** (j + 1) for n in ns)
    return {"ladder_max_violation": ladder.max_support_violation(), "support_set_violations": sets_bad}


def judge_ladder(support: dict, q_errs: list[float], bounds: dict, j_max: int = 3) -> CriterionResult:
    growth = {f"j{j}_a{a}_b{b}": v.growth_factor for (j, a, b), v in bounds.items() if j <= j_max}
    worst_key = max(growth, key=growth.get)
    ok = (support["ladder_max_violation"] == 0 and support["support_set_violations"] == 0
          and max(q_errs) <= 1e-6 and growth[worst_key] <= 3.0)
    return _result(9, ok, {**support, "q_oracle_rel_errors": q_errs, "growth_factors": growth,
                           "C0": {f"j{j}_a{a}_b{b}": v.C0 for (j, a, b), v in bounds.items()}},
                   f"support violations: ladder {support['ladder_max_violation']}, "
                   f"index sets {support['support_set_violations']}; Q oracle error {max(q_errs):.2g} "
                   f"(tolerance 1e-6), worst growth factor {growth[worst_key]:.3g} at "
                   f"{worst_key} (limit 3)")


def criterion_9(cfg: RunConfig) -> CriterionResult:
    ladder, _ = ladder_for(cfg)
    _, sol = reference_mode(cfg)
    return judge_ladder(support_law_violations(ladder), q_oracle_errors(sol),
                        check_inductive_bounds(ladder))


def residual_sequence(ladder, k: int, Ms=(1, 2, 3)) -> dict:
    out = {}
    for M in Ms:
        _, rep = assemble_and_residual(replace(ladder, M=M), k)
        out[M] = rep.as_dict()
    return out


def judge_residual(seq: dict) -> CriterionResult:
    Ms = sorted(seq)
    totals = [seq[M]["total"] for M in Ms]
    ok = all(b < a for a, b in zip(totals, totals[1:]))
    return _result(10, ok, {"t": seq[Ms[0]]["t"], "by_M": seq},
                   "||R_app|| at t = {:.4g}: {}".format(
                       seq[Ms[0]]["t"], ", ".join(f"M={M} {x:.3g}" for M, x in zip(Ms, totals))))


def criterion_10(cfg: RunConfig) -> CriterionResult:
    ladder, _ = ladder_for(cfg)
    k = (len(ladder.times) - 1) // 2
    return judge_residual(residual_sequence(ladder, k))


# ---------------------------------------------------------------- 11

def nonlinear_runs(cfg: RunConfig, profile: ShearProfile, sol: EigenSolution):
    n = cfg.nonlin
    base = dict(p_exp=n.p_exp, N_modes=n.N_modes, dt=n.dt, theta0=n.theta0,
                record_every=n.record_every, t_end=n.t_end)
    zero = run_experiment(n.p_exp, sol.nu, sol, profile, NonlinConfig(**base, seed_amplitude=0.0))
    seeded = run_experiment(n.p_exp, sol.nu, sol, profile,
                            NonlinConfig(**base, seed_amplitude=n.seed_amplitude))
    return zero, seeded


def judge_nonlinear(zero, seeded, T_1: float, theta0: float) -> CriterionResult:
    drift = float(max(zero.v_sup.max(), zero.w_sup.max()))
    rep = measure_instability(seeded, theta0=theta0)
    rate_err = abs(rep.growth_rate / seeded.lambda_nu.real - 1)
    t_cross = rep.crossings.get("theta0 nu^5/8")
    cross_err = abs(t_cross / T_1 - 1) if t_cross is not None else math.inf
    s = sublayer_factor(seeded)
    v_gain = seeded.v_sup[-1] / seeded.v_sup[0]
    w_gain = seeded.w_sup[-1] / seeded.v_sup[0]
    gain_ok = s > 1 and w_gain >= 0.99 * v_gain * s
    ok = drift <= 1e-9 and rate_err <= 0.1 and cross_err <= 0.25 and gain_ok
    flags = seeded.flags
    return _result(11, ok, {"zero_seed_drift": drift, "growth_rate": rep.growth_rate,
                            "re_lambda": seeded.lambda_nu.real, "growth_rate_rel_error": rate_err,
                            "crossing_time": t_cross, "T_1": T_1, "crossing_rel_error": cross_err,
                            "sublayer_factor": s, "velocity_gain": v_gain,
                            "vorticity_over_seed_velocity": w_gain, "flags": flags,
                            "report": rep.as_dict()},
                   f"drift {drift:.2g}, growth rate error {rate_err:.2%}, crossing at "
                   f"{t_cross if t_cross is None else round(t_cross, 1)} vs T_1 {T_1:.1f} "
                   f"({cross_err:.2%}), |w|/|v0| {w_gain:.4g} vs velocity gain x sublayer factor "
                   f"{v_gain:.4g} x {s:.4g}")


def criterion_11(cfg: RunConfig) -> CriterionResult:
    profile, sol = reference_mode(cfg)
    ts = time_scales(replace(cfg, expansion=replace(cfg.expansion, p_exp=int(cfg.nonlin.p_exp))), sol)
    zero, seeded = nonlinear_runs(cfg, profile, sol)
    return judge_nonlinear(zero, seeded, ts.T_1, cfg.nonlin.theta0)


# ---------------------------------------------------------------- 12

def structure_rows(profile: ShearProfile, Rs, grid: GridSpec, workers: int = 1) -> list[dict]:
    rows = []
    for R in Rs:
        nu = viscosity(R)
        mg = max_growth(profile, nu, grid, n_alpha=16, workers=workers)
        a = mg.alpha_star if mg.alpha_star is not None else nu ** 0.125
        sol = leading_eigenvalue(profile, a, nu, grid)
        rep = mode_structure(sol, profile)
        rows.append({"R": R, "nu": nu, "alpha": a, "lambda": sol.lam,
                     "delta_bl": rep.delta_bl_fit, "delta_cr": rep.delta_cr_fit,
                     "pred_bl": rep.predictions["nu_1_8"],
                     "pred_cr": rep.predictions["critical_layer"],
                     "fit_ok": rep.fit_ok, "fit_residuals": rep.fit_residuals})
    return rows


def judge_structure(rows: list[dict]) -> CriterionResult:
    within = all(1 / 3 <= r["delta_bl"] / r["pred_bl"] <= 3 and 1 / 3 <= r["delta_cr"] / r["pred_cr"] <= 3
                 for r in rows)
    a, b = rows[0], rows[-1]
    halving = {}
    for k, pk in (("delta_bl", "pred_bl"), ("delta_cr", "pred_cr")):
        measured, predicted = a[k] / b[k], a[pk] / b[pk]
        halving[k] = {"measured": measured, "predicted": predicted,
                      "rel_error": abs(measured / predicted - 1)}
    halve_ok = all(h["rel_error"] <= 0.3 for h in halving.values())
    ok = within and halve_ok and all(r["fit_ok"] for r in rows)
    return _result(12, ok, {"rows": rows, "halving": halving},
                   "width/prediction " + "; ".join(
                       f"R={r['R']:.3g}: bl {r['delta_bl'] / r['pred_bl']:.3g}, cr "
                       f"{r['delta_cr'] / r['pred_cr']:.3g}" for r in rows)
                   + "; ratio errors " + ", ".join(f"{k} {h['rel_error']:.1%}" for k, h in halving.items()))


def criterion_12(cfg: RunConfig) -> CriterionResult:
    return judge_structure(structure_rows(BUILTIN["erf"](), STRUCTURE_RS, GridSpec(N=200),
                                          cfg.workers))


CRITERIA = {k: globals()[f"criterion_{k}"] for k in NAMES}


def run_all(cfg: RunConfig, which=None) -> list[CriterionResult]:
    return [CRITERIA[k](cfg) for k in (which or sorted(CRITERIA))]
