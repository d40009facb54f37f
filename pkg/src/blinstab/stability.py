"""Rayleigh and Orr-Sommerfeld eigenproblems for the linearized operator

    L_alpha w = sqrt(nu) Delta_alpha w - i alpha U w + i alpha U'' phi,
    Delta_alpha phi = w,  phi = phi' = 0 at z = 0,

plus growth-rate scans, gamma0 estimation, neutral curves and eigenmode
diagnostics.  The eigenproblem is posed for the stream function in a clamped
basis (phi = phi' = 0 built in):

    sqrt(nu) Delta_alpha^2 phi - i alpha U Delta_alpha phi + i alpha U'' phi
        = lambda Delta_alpha phi.

Conventions: lambda = -i alpha c, so Im c > 0 exactly when Re lambda > 0, and
R = nu^{-1/2}.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, NumericalFailure, UnderResolvedError
from .grid import GridFunction, GridSpec, ModeFamily, SemiInfiniteGrid, build_grid
from .profiles import ShearProfile

SUBLAYER_NODES = 12
TAIL_TOL = 1e-6
RESIDUAL_TOL = 1e-6
CONTINUUM_BAND = 1e-2


def unstable_threshold(nu: float) -> float:
    """Re lambda above this counts as unstable."""
    return 1e-10 * nu ** 0.25


def reynolds(nu: float) -> float:
    return nu ** -0.5


def viscosity(R: float) -> float:
    return R ** -2.0


# ---------------------------------------------------------------- eigen solutions

@dataclass(frozen=True, eq=False)
class EigenSolution:
    """One discrete mode of L_alpha.

    ``coeffs`` are the clamped-basis coordinates of phi on ``grid``; they let
    the propagator start exactly from the eigenmode.
    """

    alpha: float
    nu: float
    lam: complex
    phi: GridFunction
    omega: GridFunction
    residual: float
    backend: str
    tail_energy: float
    coeffs: np.ndarray = field(repr=False)

    @property
    def c(self) -> complex:
        """Phase speed with lambda = -i alpha c."""
        return 1j * self.lam / self.alpha

    @property
    def c_alt(self) -> complex:
        """Phase speed under the alternative convention lambda = i alpha c."""
        return -self.c

    @property
    def grid(self) -> SemiInfiniteGrid:
        return self.phi.grid

    @property
    def R(self) -> float:
        return reynolds(self.nu)

    def summary(self) -> dict:
        return {"alpha": self.alpha, "nu": self.nu, "R": self.R,
                "lambda_re": self.lam.real, "lambda_im": self.lam.imag,
                "c_re": self.c.real, "c_im": self.c.imag,
                "c_alt_re": self.c_alt.real, "c_alt_im": self.c_alt.imag,
                "residual": self.residual, "tail_energy": self.tail_energy,
                "backend": self.backend, "N": self.grid.N}


def check_sublayer_resolution(grid: SemiInfiniteGrid, nu: float,
                              nodes: int = SUBLAYER_NODES) -> None:
    """Refuse grids with fewer than ``nodes`` points inside delta = nu^{1/8}."""
    delta = nu ** 0.125
    have = grid.nodes_within(delta)
    if have < nodes:
        # node count inside a fixed depth scales about linearly with N
        need = int(math.ceil(grid.N * nodes / max(have, 1) * 1.05))
        raise UnderResolvedError(
            f"only {have} nodes inside the sublayer delta = {delta:.3g}", need)


def os_operators(profile: ShearProfile, alpha: float, nu: float, grid: SemiInfiniteGrid):
    """Matrices (A, B) of A g = lambda B g on the clamped basis rows."""
    cb = grid.clamped
    rows = cb.rows
    Z = [M[rows] for M in cb.E]
    z = grid.z[rows]
    U = profile.U(z)
    U2 = profile.d2U(z)
    a2 = alpha * alpha
    s = math.sqrt(nu)
    if grid.dense:
        B = Z[2] - a2 * Z[0]
        A = (s * (Z[4] - 2 * a2 * Z[2] + a2 * a2 * Z[0]) - 1j * alpha * U[:, None] * B
             + 1j * alpha * U2[:, None] * Z[0])
        return A, B
    B = (Z[2] - a2 * Z[0]).tocsc()
    A = (s * (Z[4] - 2 * a2 * Z[2] + a2 * a2 * Z[0]) - 1j * alpha * sp.diags(U) @ B
         + 1j * alpha * sp.diags(U2) @ Z[0])
    return A.tocsc(), B


def tail_start(grid: SemiInfiniteGrid, profile: ShearProfile) -> float:
    """Start of the far field used by the tail-energy test.

    min(z_max/2, 40/eta0): beyond 40/eta0 the profile equals U_plus to double
    precision, so vorticity living there belongs to the free-stream continuum
    rather than to a discrete mode of the boundary layer.
    """
    return min(0.5 * grid.z_max, 40.0 / profile.eta0)


def _tail_energy(grid: SemiInfiniteGrid, values: np.ndarray, z_tail: float) -> float:
    e = grid.w * np.abs(values) ** 2
    tot = e.sum()
    if tot == 0:
        return 0.0
    return float(e[grid.z > z_tail].sum() / tot)


def _make_solution(profile, alpha, nu, grid, lam, g, A, B) -> EigenSolution:
    cb = grid.clamped
    phi = cb.E[0] @ g
    i = int(np.argmax(np.abs(phi)))
    scale = np.abs(phi[i]) / phi[i]
    g = g * scale
    phi = phi * scale
    omega = cb.E[2] @ g - alpha ** 2 * phi
    r = A @ g - lam * (B @ g)
    res = float(np.abs(r).max() / max(np.abs(B @ g).max(), 1e-300))
    return EigenSolution(alpha=alpha, nu=nu, lam=complex(lam),
                         phi=GridFunction(grid, phi, alpha),
                         omega=GridFunction(grid, omega, alpha), residual=res,
                         backend=grid.backend, tail_energy=_tail_energy(grid, omega, tail_start(grid, profile)),
                         coeffs=g)


def in_continuum(s: EigenSolution, profile: ShearProfile) -> bool:
    """Free-stream continuum: phase speed within CONTINUUM_BAND of U_plus.

    Truncated discretizations approximate the continuous spectrum
    {c = U_plus - i k^2 ...} by eigenvalues whose vorticity sits where U is
    within round-off of U_plus; they are not modes of the boundary layer.
    On very long domains round-off can push one of them to Re lambda ~ 1e-8,
    so the sign of the growth rate is not used: a critical layer in the
    free stream, where U'' vanishes, cannot carry an instability.
    """
    if s.alpha == 0:
        return False
    band = CONTINUUM_BAND * max(abs(profile.U_plus), 1.0)
    return abs(s.c.real - profile.U_plus) <= band


def _conjugate_solution(s: EigenSolution) -> EigenSolution:
    return EigenSolution(alpha=-s.alpha, nu=s.nu, lam=s.lam.conjugate(), phi=s.phi.conj(),
                         omega=s.omega.conj(), residual=s.residual, backend=s.backend,
                         tail_energy=s.tail_energy, coeffs=s.coeffs.conj())


def _shift_invert(A, B, sigma: complex, k: int):
    """Eigenpairs of A g = lambda B g nearest sigma via (A - sigma B)^{-1} B.

    ARPACK's generalized shift-invert mode assumes a Hermitian B, which
    Delta_alpha on the clamped basis is not, so the standard problem for the
    shifted inverse is solved instead.
    """
    try:
        lu = spla.splu((A - sigma * B).tocsc())
    except RuntimeError as exc:
        raise NumericalFailure(f"shift-invert factorization failed at {sigma}: {exc}")
    n = A.shape[0]
    op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(B @ x), dtype=complex)
    try:
        mu, V = spla.eigs(op, k=min(k, n - 2), which="LM")
    except spla.ArpackNoConvergence as exc:
        raise NumericalFailure(f"shift-invert eigensolve failed near {sigma}: {exc}")
    return sigma + 1.0 / mu, V


def os_spectrum(profile: ShearProfile, alpha: float, nu: float, grid: SemiInfiniteGrid, *,
                n_modes: int | None = None, sigma: complex | None = None,
                filter_spurious: bool = True, check_resolution: bool = True,
                keep_vectors: bool = True) -> list[EigenSolution]:
    """Filtered discrete spectrum of L_alpha sorted by Re lambda descending.

    Spectral grids use a dense generalized eigensolve.  FD grids use
    shift-invert Arnoldi around ``sigma``; without ``sigma`` a spectral solve
    at N = 150 on the same truncation supplies it.  Negative alpha is
    handled by conjugation.
    """
    if not nu > 0:
        raise DomainError("nu must be positive")
    if alpha < 0:
        return [_conjugate_solution(s) for s in os_spectrum(
            profile, -alpha, nu, grid, n_modes=n_modes,
            sigma=None if sigma is None else complex(sigma).conjugate(),
            filter_spurious=filter_spurious, check_resolution=check_resolution)]
    if check_resolution:
        check_sublayer_resolution(grid, nu)
    A, B = os_operators(profile, alpha, nu, grid)
    if grid.dense:
        try:
            lam, V = sla.eig(A, B)
        except (np.linalg.LinAlgError, ValueError) as exc:
            cond = np.linalg.cond(B)
            raise NumericalFailure(f"eigensolve failed ({exc}); cond(B) = {cond:.3g}")
        ok = np.isfinite(lam)
        lam, V = lam[ok], V[:, ok]
    else:
        if sigma is None:
            guide = build_grid(150, "spectral", grid.mapping, grid.L, grid.z_max,
                               grid.stretch)
            lead = os_spectrum(profile, alpha, nu, guide, n_modes=1,
                               check_resolution=False)
            if not lead:
                raise NumericalFailure("no resolved spectral guide mode for shift-invert")
            sigma = lead[0].lam
        lam, V = _shift_invert(A, B, sigma, n_modes or 6)
    order = np.argsort(-lam.real)
    out = []
    for j in order:
        s = _make_solution(profile, alpha, nu, grid, lam[j], V[:, j], A, B)
        if filter_spurious and (s.tail_energy >= TAIL_TOL or s.residual > RESIDUAL_TOL
                                or in_continuum(s, profile)):
            continue
        out.append(s)
        if n_modes is not None and len(out) >= n_modes:
            break
    return out


def leading_eigenvalue(profile: ShearProfile, alpha: float, nu: float,
                       grid_spec: GridSpec) -> EigenSolution | None:
    modes = os_spectrum(profile, alpha, nu, grid_spec.build(alpha), n_modes=1)
    return modes[0] if modes else None


def leading_growth(profile: ShearProfile, alpha: float, nu: float, grid_spec: GridSpec) -> float:
    """Re lambda of the leading resolved mode (-inf when none survives)."""
    s = leading_eigenvalue(profile, alpha, nu, grid_spec)
    return -math.inf if s is None else s.lam.real


# ---------------------------------------------------------------- Rayleigh

@dataclass
class RayleighResult:
    alpha: float
    modes: list  # (c, GridFunction phi)
    removed: int
    candidates: int

    @property
    def stable(self) -> bool:
        return not self.modes


def _rayleigh_raw(profile: ShearProfile, alpha: float, grid: SemiInfiniteGrid, threshold: float):
    N = grid.N
    inner = np.arange(1, N - 1)
    D2 = grid.D[2].toarray() if not grid.dense else grid.D[2]
    La = (D2 - alpha ** 2 * np.eye(N))[np.ix_(inner, inner)]
    z = grid.z[inner]
    A = profile.U(z)[:, None] * La - np.diag(profile.d2U(z))
    c, V = sla.eig(A, La)
    keep = np.isfinite(c) & (c.imag > threshold)
    return c[keep], V[:, keep]


def rayleigh_spectrum(profile: ShearProfile, alpha: float, grid: SemiInfiniteGrid,
                      threshold: float = 1e-8, rel_tol: float = 1e-4) -> RayleighResult:
    """Unstable eigenvalues of (U - c)(phi'' - alpha^2 phi) - U'' phi = 0.

    Dirichlet conditions at both ends.  Candidates with Im c > threshold are
    kept only if they lie in the Howard semicircle and reappear within
    ``rel_tol`` on a grid refined by N -> 3N/2 (resolution test).
    """
    if not alpha > 0:
        raise DomainError("Rayleigh solve needs alpha > 0")
    c, V = _rayleigh_raw(profile, alpha, grid, threshold)
    Uz = profile.U(grid.z)
    lo, hi = float(Uz.min()), float(Uz.max())
    centre, radius = 0.5 * (lo + hi), 0.5 * (hi - lo)
    fine = build_grid(3 * grid.N // 2, grid.backend, grid.mapping, grid.L, grid.z_max,
                      grid.stretch, grid.fd_width)
    c_fine = _rayleigh_raw(profile, alpha, fine, threshold)[0] if c.size else np.array([])
    modes = []
    for j, cj in enumerate(c):
        if abs(cj - centre) > radius * (1 + 1e-9):
            continue
        if c_fine.size == 0 or np.min(np.abs(c_fine - cj)) > rel_tol * max(1.0, abs(cj)):
            continue
        phi = np.zeros(grid.N, complex)
        phi[1:-1] = V[:, j] / V[np.argmax(np.abs(V[:, j])), j]
        modes.append((complex(cj), GridFunction(grid, phi, alpha)))
    modes.sort(key=lambda m: -m[0].imag)
    return RayleighResult(alpha, modes, removed=len(c) - len(modes), candidates=len(c))


# ---------------------------------------------------------------- growth scans

@dataclass
class MaxGrowth:
    nu: float
    alpha_star: float | None
    lam_star: complex
    samples: list  # (alpha, Re lambda)
    covers_required_range: bool = True

    @property
    def growth(self) -> float:
        return self.lam_star.real


def default_alpha_range(nu: float) -> tuple[float, float]:
    return nu ** 0.125 / 4.0, 4.0 * nu ** (1.0 / 12.0)


def _map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def max_growth(profile: ShearProfile, nu: float, grid_spec: GridSpec,
               alpha_range: tuple[float, float] | None = None, n_alpha: int = 20,
               workers: int = 1, xtol: float = 1e-4) -> MaxGrowth:
    """Maximize leading Re lambda over alpha: log-spaced sampling, then
    bounded golden-section refinement around the best sample."""
    req = default_alpha_range(nu)
    lo, hi = alpha_range or req
    covers = lo <= req[0] * (1 + 1e-12) and hi >= req[1] * (1 - 1e-12)
    alphas = np.geomspace(lo, hi, n_alpha)
    growth = _map(lambda a: leading_growth(profile, a, nu, grid_spec), list(alphas), workers)
    samples = list(zip(map(float, alphas), map(float, growth)))
    j = int(np.argmax(growth))
    if not growth[j] > unstable_threshold(nu):
        return MaxGrowth(nu, None, 0j, samples, covers)
    la, lb = math.log(alphas[max(j - 1, 0)]), math.log(alphas[min(j + 1, n_alpha - 1)])
    res = minimize_scalar(lambda t: -leading_growth(profile, math.exp(t), nu, grid_spec),
                          bounds=(la, lb), method="bounded", options={"xatol": xtol})
    a_star = math.exp(res.x)
    best = leading_eigenvalue(profile, a_star, nu, grid_spec)
    if best is None or best.lam.real < growth[j]:
        a_star = float(alphas[j])
        best = leading_eigenvalue(profile, a_star, nu, grid_spec)
    return MaxGrowth(nu, a_star, best.lam, samples, covers)


def loglog_fit(x: Sequence[float], y: Sequence[float], confidence: float = 0.95) -> dict:
    """Least-squares slope of ln y against ln x with a t-based interval."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        return {"slope": float("nan"), "intercept": float("nan"), "ci": [float("nan")] * 2,
                "stderr": float("nan"), "n": int(lx.size)}
    r = stats.linregress(lx, ly)
    dof = lx.size - 2
    half = stats.t.ppf(0.5 + confidence / 2, dof) * r.stderr if dof > 0 else float("nan")
    return {"slope": float(r.slope), "intercept": float(r.intercept),
            "ci": [float(r.slope - half), float(r.slope + half)],
            "stderr": float(r.stderr), "n": int(lx.size)}


@dataclass
class GrowthScan:
    rows: list  # dicts: nu, alpha_star, re_lambda, im_lambda
    gamma0_estimate: float
    growth_fit: dict
    alpha_fit: dict
    grid: dict
    profile: str

    @property
    def gamma0_band(self) -> float:
        """Ratio max/min of nu^{-1/4} Re lambda over unstable entries."""
        g = [r["gamma0_local"] for r in self.rows if r["re_lambda"] > 0]
        return max(g) / min(g) if g else float("nan")

    def write_csv(self, path) -> None:
        keys = ["nu", "R", "alpha_star", "re_lambda", "im_lambda", "gamma0_local",
                "residual", "N", "backend"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: r.get(k) for k in keys})

    def summary(self) -> dict:
        return {"profile": self.profile, "gamma0_estimate": self.gamma0_estimate,
                "gamma0_band": self.gamma0_band, "growth_fit": self.growth_fit,
                "alpha_fit": self.alpha_fit, "grid": self.grid}


def estimate_gamma0(profile: ShearProfile, nus: Sequence[float], grid_spec: GridSpec,
                    n_alpha: int = 20, workers: int = 1) -> GrowthScan:
    """max growth across a viscosity lattice, gamma0 and log-log fits.

    Stable entries record lambda = 0 and are excluded from the fits.
    """
    nus = sorted(float(v) for v in nus)
    rows = []
    for nu in nus:
        mg = max_growth(profile, nu, grid_spec, n_alpha=n_alpha, workers=workers)
        re = max(mg.lam_star.real, 0.0) if mg.alpha_star is not None else 0.0
        res = float("nan")
        if mg.alpha_star is not None:
            s = leading_eigenvalue(profile, mg.alpha_star, nu, grid_spec)
            res = s.residual
        rows.append({"nu": nu, "R": reynolds(nu), "alpha_star": mg.alpha_star,
                     "re_lambda": re, "im_lambda": mg.lam_star.imag if re > 0 else 0.0,
                     "gamma0_local": re * nu ** -0.25, "residual": res,
                     "N": grid_spec.N, "backend": grid_spec.backend})
    unstable = [r for r in rows if r["re_lambda"] > 0]
    gfit = loglog_fit([r["nu"] for r in unstable], [r["re_lambda"] for r in unstable])
    afit = loglog_fit([r["nu"] for r in unstable], [r["alpha_star"] for r in unstable])
    g0 = max((r["gamma0_local"] for r in rows), default=0.0)
    return GrowthScan(rows, g0, gfit, afit, asdict(grid_spec), profile.name)


# ---------------------------------------------------------------- neutral curve

@dataclass
class NeutralCurve:
    R: list
    alpha_low: list
    alpha_up: list
    low_fit: dict
    up_fit: dict
    failures: dict
    brackets: dict

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "alpha_low", "alpha_up"])
            for r, a, b in zip(self.R, self.alpha_low, self.alpha_up):
                w.writerow([r, a, b])

    def summary(self) -> dict:
        return {"R": self.R, "alpha_low": self.alpha_low, "alpha_up": self.alpha_up,
                "low_fit": self.low_fit, "up_fit": self.up_fit,
                "failures": {str(k): v for k, v in self.failures.items()}}


def neutral_points(profile: ShearProfile, R: float, grid_spec: GridSpec,
                   n_alpha: int = 32, alpha_range: tuple[float, float] | None = None,
                   widen: int = 3, xtol: float = 1e-7):
    """Lower/upper neutral wavenumbers at one R by sign-change bisection.

    Returns (alpha_low, alpha_up, info); entries are None when absent.
    """
    nu = viscosity(R)
    thr = unstable_threshold(nu)
    lo, hi = alpha_range or (0.2 * R ** -0.25, 2.0 * R ** (-1.0 / 6.0))
    g = lambda a: leading_growth(profile, a, nu, grid_spec) - thr
    info = {"R": R}
    for attempt in range(widen + 1):
        alphas = np.geomspace(lo, hi, n_alpha)
        vals = np.array([g(a) for a in alphas])
        pos = vals > 0
        if not pos.any():
            info["status"] = "stable"
            return None, None, info
        if pos[0] or pos[-1]:
            lo, hi = (lo / 2 if pos[0] else lo), (hi * 2 if pos[-1] else hi)
            continue
        i0 = int(np.argmax(pos))
        i1 = int(len(pos) - 1 - np.argmax(pos[::-1]))
        # crossings must bracket finite values on both sides
        f = lambda a: max(g(a), -1.0)
        a_low = brentq(f, alphas[i0 - 1], alphas[i0], xtol=xtol * alphas[i0])
        a_up = brentq(f, alphas[i1], alphas[i1 + 1], xtol=xtol * alphas[i1])
        info.update(status="ok", bracket_low=[float(alphas[i0 - 1]), float(alphas[i0])],
                    bracket_up=[float(alphas[i1]), float(alphas[i1 + 1])])
        return float(a_low), float(a_up), info
    info["status"] = "single-signed after widening"
    return None, None, info


def trace_neutral_curve(profile: ShearProfile, R_values: Sequence[float], grid_spec: GridSpec,
                        n_alpha: int = 32, workers: int = 1) -> NeutralCurve:
    R_values = [float(r) for r in R_values]
    res = _map(lambda R: neutral_points(profile, R, grid_spec, n_alpha), R_values, workers)
    lows, ups, fails, brackets = [], [], {}, {}
    for R, (a, b, info) in zip(R_values, res):
        lows.append(a)
        ups.append(b)
        brackets[R] = info
        if info["status"] != "ok":
            fails[R] = info["status"]
    ok = [(R, a, b) for R, a, b in zip(R_values, lows, ups) if a is not None and b is not None]
    low_fit = loglog_fit([o[0] for o in ok], [o[1] for o in ok])
    up_fit = loglog_fit([o[0] for o in ok], [o[2] for o in ok])
    return NeutralCurve(R_values, lows, ups, low_fit, up_fit, fails, brackets)


# ---------------------------------------------------------------- growing mode

def velocity_from_stream(phi: GridFunction, alpha: float):
    """(v1, v2) = (d_z phi, -i alpha phi) for one Fourier mode."""
    return phi.derivative(1), phi.scaled(-1j * alpha)


def physical_velocity_sup(family_phi: ModeFamily, n_x: int = 64) -> float:
    """sup over one period and the grid of |v| for a stream-function family."""
    x = np.linspace(0.0, 2 * math.pi / family_phi.alpha_base, n_x, endpoint=False)
    v1 = np.zeros((n_x, family_phi.grid.N))
    v2 = np.zeros_like(v1)
    for n, phi in family_phi.items():
        a = family_phi.alpha(n)
        e = np.exp(1j * a * x)[:, None]
        v1 = v1 + (e * phi.derivative(1).values[None, :]).real
        v2 = v2 + (e * (-1j * a) * phi.values[None, :]).real
    return float(np.sqrt(v1 ** 2 + v2 ** 2).max())


def build_growing_mode(sol: EigenSolution, amplitude: float, phase: float = 0.0) -> ModeFamily:
    """Two-mode family {omega at +alpha, conjugate at -alpha}.

    Scaled so that the physical velocity sup |v| equals ``amplitude``;
    ``phase`` multiplies the +alpha mode by exp(i phase).
    """
    if not sol.lam.real > unstable_threshold(sol.nu):
        raise DomainError("growing mode requested from a non-growing eigenpair")
    a = abs(sol.alpha)
    base = sol if sol.alpha > 0 else _conjugate_solution(sol)
    unit = ModeFamily(a, {1: base.omega, -1: base.omega.conj()},
                      {1: base.phi, -1: base.phi.conj()})
    vmax = physical_velocity_sup(ModeFamily(a, unit.streams))
    k = amplitude / vmax * complex(math.cos(phase), math.sin(phase))
    modes = {1: base.omega.scaled(k), -1: base.omega.scaled(k).conj()}
    streams = {1: base.phi.scaled(k), -1: base.phi.scaled(k).conj()}
    return ModeFamily(a, modes, streams)


# ---------------------------------------------------------------- mode structure

@dataclass
class StructureReport:
    delta_bl_fit: float
    delta_cr_fit: float
    inviscid_tail_rate: float
    z_critical: float
    wall_window: float
    predictions: dict
    fit_residuals: dict
    fit_ok: bool
    model: str = ("|w| ~ a exp(-z/delta_bl) + b on the wall layer; "
                  "w ~ A Ai(e^{i pi/6}(z - z_c)/delta_cr) + B + C z (Langer-variable Airy "
                  "model, whose decay |d^k phi_cr| <= C delta_cr^{-k} exp(-eta z/delta_cr) "
                  "is the predicted critical-layer behaviour)")

    def as_dict(self) -> dict:
        return asdict(self)


def _lstsq_rel(cols, y):
    M = np.column_stack(cols)
    coef = np.linalg.lstsq(M, y, rcond=None)[0]
    r = y - M @ coef
    return float(np.linalg.norm(r) / max(np.linalg.norm(y), 1e-300)), coef


def critical_point(profile: ShearProfile, c_re: float, z_hi: float = 60.0) -> float:
    """Height where U(z) = Re c (nan when Re c is outside the profile range)."""
    f = lambda z: float(profile.U(np.array([z]))[0]) - c_re
    if not f(0.0) < 0 < f(z_hi):
        return float("nan")
    return float(brentq(f, 0.0, z_hi, xtol=1e-14))


def mode_structure(sol: EigenSolution, profile: ShearProfile) -> StructureReport:
    """Fit sublayer and critical-layer widths of an eigenmode's vorticity.

    The wall window runs from z = 0 to the first local minimum of |w|, where
    the wall layer hands over to the slowly varying outer part.
    """
    from scipy.special import airy

    z = sol.grid.z
    w = sol.omega.values / sol.omega.values[0] if sol.omega.values[0] != 0 else sol.omega.values
    aw = np.abs(w)
    i = 1
    while i + 1 < len(aw) and aw[i + 1] < aw[i]:
        i += 1
    found_min = i + 1 < len(aw) and i >= 4
    z_min = float(z[i])
    zc = critical_point(profile, sol.c.real)
    a, R = abs(sol.alpha), sol.R
    sel = z <= z_min
    bounds = (math.log(max(z_min, 1e-12) / 50), math.log(max(z_min, 1e-12) * 2))
    fb = lambda t: _lstsq_rel([np.exp(-z[sel] / math.exp(t)), np.ones(sel.sum())], aw[sel])[0]
    rb = minimize_scalar(fb, bounds=bounds, method="bounded")
    sel2 = z <= 2 * z_min
    zc0 = 0.0 if not math.isfinite(zc) else zc
    rot = np.exp(1j * math.pi / 6)
    fc = lambda t: _lstsq_rel([airy(rot * (z[sel2] - zc0) / math.exp(t))[0],
                               np.ones(sel2.sum()), z[sel2]], w[sel2])[0]
    rc = minimize_scalar(fc, bounds=bounds, method="bounded")
    # inviscid far field: phi ~ exp(-alpha z) once U = U_plus and w ~ 0
    ap = np.abs(sol.phi.values)
    far = ((z > tail_start(sol.grid, profile) / 4) & (z < sol.grid.z_max / 4)
           & (ap > 1e-8 * ap.max()))
    tail = -float(np.polyfit(z[far], np.log(ap[far]), 1)[0]) if far.sum() >= 3 else float("nan")
    c = sol.c
    U1 = float(profile.dU(np.array([0.0]))[0])
    pred = {
        "nu_1_8": sol.nu ** 0.125,
        "critical_layer": (a * R) ** (-1.0 / 3.0),
        "sublayer_U0_is_U(0)": (a * abs(0.0 - c) * R) ** -0.5,
        "sublayer_U0_is_U'(0)": (a * abs(U1 - c) * R) ** -0.5,
        "tail_rate": a,
    }
    ok = found_min and rb.fun < 0.2 and rc.fun < 0.2
    return StructureReport(delta_bl_fit=math.exp(rb.x), delta_cr_fit=math.exp(rc.x),
                           inviscid_tail_rate=tail, z_critical=zc, wall_window=z_min,
                           predictions=pred,
                           fit_residuals={"sublayer": float(rb.fun), "critical": float(rc.fun)},
                           fit_ok=bool(ok))
