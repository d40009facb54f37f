"""Half-line inversion of Delta_alpha = d_z^2 - alpha^2 and estimate checkers.

Two independent solvers are provided and cross-checked:

* Green quadrature: phi(z) = -(1/2a) int_0^inf (e^{-a|x-z|} - e^{-a(x+z)}) f(x) dx
  with composite Gauss-Legendre panels between consecutive grid nodes, so the
  kernel kink at x = z always falls on a panel edge.
* Operator solve: the grid's second-derivative operator with Dirichlet rows
  at z = 0 and z = z_max.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, UsageError
from .grid import GridFunction, ModeFamily, SemiInfiniteGrid
from .norms import BLNormParams, bl_norm, weighted_sup

_GL_ORDER = 8


@dataclass(frozen=True)
class EllipticSolveResult:
    phi: GridFunction
    dphi: GridFunction
    d2phi: GridFunction
    alpha: float
    method: str
    phi_check: GridFunction | None = None

    @property
    def dual_gap(self) -> float:
        """Sup-norm gap between the two solvers (nan if no cross-check)."""
        if self.phi_check is None:
            return float("nan")
        return float(np.abs(self.phi.values - self.phi_check.values).max())

    def residual(self, f: GridFunction) -> float:
        r = self.d2phi.values - self.alpha ** 2 * self.phi.values - f.values
        return float(np.abs(r[1:-1]).max())


class _PanelQuadrature:
    """Gauss-Legendre nodes on every inter-node panel and the interpolation
    matrix from nodal values to those points."""

    def __init__(self, grid: SemiInfiniteGrid):
        x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
        a, b = grid.z[:-1], grid.z[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        self.x = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        self.w = (half[:, None] * w[None, :]).ravel()
        self.panel = np.repeat(np.arange(grid.N - 1), _GL_ORDER)
        self.interp = grid.interpolation_matrix(self.x)


_QUAD_CACHE: "OrderedDict[tuple, _PanelQuadrature]" = OrderedDict()


def _quadrature(grid: SemiInfiniteGrid) -> _PanelQuadrature:
    q = _QUAD_CACHE.get(grid.key)
    if q is None:
        q = _PanelQuadrature(grid)
        _QUAD_CACHE[grid.key] = q
        if len(_QUAD_CACHE) > 16:
            _QUAD_CACHE.popitem(last=False)
    return q


_GREEN_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()


def green_matrices(grid: SemiInfiniteGrid, alpha: float):
    """Dense matrices (G0, G1) with phi = G0 @ f and phi' = G1 @ f."""
    a = abs(float(alpha))
    key = (grid.key, a)
    hit = _GREEN_CACHE.get(key)
    if hit is not None:
        return hit
    q = _quadrature(grid)
    z = grid.z[:, None]
    x = q.x[None, :]
    near = np.exp(-a * np.abs(x - z))
    image = np.exp(-a * (x + z))
    K0 = -(near - image) / (2.0 * a)
    K1 = -0.5 * (np.sign(x - z) * near + image)
    G0 = (K0 * q.w) @ q.interp
    G1 = (K1 * q.w) @ q.interp
    _GREEN_CACHE[key] = (G0, G1)
    if len(_GREEN_CACHE) > 64:
        _GREEN_CACHE.popitem(last=False)
    return G0, G1


def _dirichlet_solve(grid: SemiInfiniteGrid, alpha: float, rhs: np.ndarray) -> np.ndarray:
    """Solve phi'' - alpha^2 phi = rhs with phi = 0 at both ends of the grid."""
    N = grid.N
    b = np.array(rhs, dtype=complex)
    b[0] = b[-1] = 0.0
    if grid.dense:
        A = grid.D[2] - alpha ** 2 * np.eye(N)
        A[0] = 0.0
        A[-1] = 0.0
        A[0, 0] = A[-1, -1] = 1.0
        return sla.solve(A, b)
    A = (grid.D[2] - alpha ** 2 * sp.identity(N)).tolil()
    A[0, :] = 0.0
    A[N - 1, :] = 0.0
    A[0, 0] = A[N - 1, N - 1] = 1.0
    return spla.spsolve(A.tocsc(), b)


def solve_halfline(f: GridFunction, alpha: float, method: str = "green",
                   cross_check: bool = True) -> EllipticSolveResult:
    """Solve phi'' - alpha^2 phi = f, phi(0) = 0, phi bounded.

    ``method`` selects the primary answer ("green" or "operator"); with
    ``cross_check`` the other solver's phi is returned as ``phi_check``.
    """
    if alpha == 0:
        raise DomainError("Green function degenerates at alpha = 0; use solve_zero_mode")
    if method not in ("green", "operator"):
        raise UsageError(f"unknown elliptic method {method!r}")
    grid = f.grid
    a = abs(float(alpha))

    def green():
        G0, G1 = green_matrices(grid, a)
        return G0 @ f.values, G1 @ f.values

    def operator():
        phi = _dirichlet_solve(grid, a, f.values)
        return phi, grid.diff(phi, 1)

    first, second = (green, operator) if method == "green" else (operator, green)
    phi, dphi = first()
    phi[0] = 0.0
    check = None
    if cross_check:
        check = GridFunction(grid, second()[0], f.alpha)
    d2phi = a * a * phi + f.values
    tag = "green-quadrature" if method == "green" else "operator-solve"
    return EllipticSolveResult(GridFunction(grid, phi, f.alpha), GridFunction(grid, dphi, f.alpha),
                               GridFunction(grid, d2phi, f.alpha), a, tag, check)


def cumulative_integral(f: GridFunction) -> np.ndarray:
    """int_0^{z_k} f at every node by panel Gauss-Legendre quadrature."""
    q = _quadrature(f.grid)
    wf = q.w * (q.interp @ f.values)
    per_panel = wf.reshape(f.grid.N - 1, _GL_ORDER).sum(axis=1)
    return np.concatenate([[0.0], np.cumsum(per_panel)])


def solve_zero_mode(omega0: GridFunction) -> EllipticSolveResult:
    """Solve -phi'' = omega0 with phi(0) = 0 and phi' -> 0 at infinity.

    phi'(z) = int_z^inf omega0 and phi(z) = int_0^z phi'; both by quadrature.
    """
    grid = omega0.grid
    c = cumulative_integral(omega0)
    dphi = c[-1] - c
    phi = cumulative_integral(GridFunction(grid, dphi))
    return EllipticSolveResult(GridFunction(grid, phi, 0.0), GridFunction(grid, dphi, 0.0),
                               GridFunction(grid, -omega0.values, 0.0), 0.0,
                               "double-quadrature")


@dataclass
class EstimateResult:
    C: float
    terms: dict
    hypothesis_ok: bool = True
    notes: str = ""


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0
    return num / den


def check_estimate_A1(f: GridFunction, alpha: float, beta: float,
                      z_cap: float | None = None) -> EstimateResult:
    """max(a^2 ||phi||_b, |a| ||phi'||_b, ||phi''||_b) / ||f||_b in L^inf_beta."""
    ok = beta < 0.5
    params = BLNormParams(beta=beta, p=0, z_cap=z_cap)
    r = solve_halfline(f, alpha, cross_check=False)
    a = abs(alpha)
    terms = {"a2_phi": a * a * bl_norm(r.phi, params), "a_dphi": a * bl_norm(r.dphi, params),
             "d2phi": bl_norm(r.d2phi, params), "f": bl_norm(f, params)}
    C = _ratio(max(terms["a2_phi"], terms["a_dphi"], terms["d2phi"]), terms["f"])
    return EstimateResult(C, terms, ok, "" if ok else "beta >= 1/2: bound not asserted")


def check_estimate_A2(f: GridFunction, alpha: float, params: BLNormParams) -> EstimateResult:
    """(|a| ||phi||_{b,0} + ||phi'||_{b,0}) / ||f||_{b,g,1}."""
    r = solve_halfline(f, alpha, cross_check=False)
    a = abs(alpha)
    terms = {"a_phi": a * bl_norm(r.phi, params, 0), "dphi": bl_norm(r.dphi, params, 0),
             "f": bl_norm(f, params, 1)}
    C = _ratio(terms["a_phi"] + terms["dphi"], terms["f"])
    return EstimateResult(C, terms, params.beta < 0.5)


def check_estimate_A2bis(f: GridFunction, alpha: float, params: BLNormParams) -> EstimateResult:
    """(a^2||phi||_{b,0} + |a|||phi'||_{b,0} + ||phi''||_{b,g,1}) / ||a f||_{b,g,1}."""
    r = solve_halfline(f, alpha, cross_check=False)
    a = abs(alpha)
    terms = {"a2_phi": a * a * bl_norm(r.phi, params, 0), "a_dphi": a * bl_norm(r.dphi, params, 0),
             "d2phi": bl_norm(r.d2phi, params, 1), "af": a * bl_norm(f, params, 1),
             "equation_residual": r.residual(f)}
    C = _ratio(terms["a2_phi"] + terms["a_dphi"] + terms["d2phi"], terms["af"])
    ok = params.beta < 0.5 and float(alpha).is_integer()
    return EstimateResult(C, terms, ok)


@dataclass
class Inversion2D:
    phi: ModeFamily
    v1: ModeFamily
    v2: ModeFamily
    constants: dict = field(default_factory=dict)


def invert_laplace_2d(omega: ModeFamily, params: BLNormParams,
                      method: str = "green") -> Inversion2D:
    """Mode-wise solve of -Delta phi = omega, with v1 = d_z phi, v2 = -i alpha phi.

    Returns the families and measured constants of the three 2D estimates
    (phi/velocity bound, velocity-gradient bound, and the psi^{-1} v2 bound
    with psi = z/(1+z)).  The zero mode is solved by double quadrature and
    excluded from the constants, whose weighted norms it does not satisfy.
    """
    phi, v1, v2 = {}, {}, {}
    dz_v2 = {}
    dz_v1 = {}
    for n, w in omega.items():
        a = omega.alpha(n)
        if n == 0 or a == 0:
            r = solve_zero_mode(w)
        else:
            r = solve_halfline(w.scaled(-1.0), a, method=method, cross_check=False)
        phi[n] = r.phi
        v1[n] = r.dphi
        v2[n] = r.phi.scaled(-1j * a)
        dz_v1[n] = r.d2phi
        dz_v2[n] = r.dphi.scaled(-1j * a)
    ab = omega.alpha_base
    fam = lambda d: ModeFamily(ab, d)
    out = Inversion2D(fam(phi), fam(v1), fam(v2))
    nz = [n for n in omega.indices() if n != 0]
    if nz:
        grid = omega.grid
        z = grid.z
        psi = z / (1.0 + z)
        p0 = lambda f: bl_norm(f, params, 0)
        p1 = lambda f: bl_norm(f, params, 1)
        sup = lambda vals: max(vals) if vals else 0.0
        w1 = sup([p1(omega[n]) for n in nz])
        wx1 = sup([abs(omega.alpha(n)) * p1(omega[n]) for n in nz])
        lap4 = sup([p0(phi[n]) for n in nz]) + sup([p0(v1[n]) for n in nz]) + sup([p0(v2[n]) for n in nz])
        lap5 = (sup([abs(omega.alpha(n)) * p0(v1[n]) for n in nz])
                + sup([abs(omega.alpha(n)) * p0(v2[n]) for n in nz])
                + sup([p1(dz_v1[n]) for n in nz]) + sup([p0(dz_v2[n]) for n in nz]))
        ratios = []
        for n in nz:
            vals = np.empty(grid.N, complex)
            vals[1:] = v2[n].values[1:] / psi[1:]
            vals[0] = dz_v2[n].values[0]
            ratios.append(weighted_sup(z, vals, params, 0))
        lap6 = sup(ratios)
        out.constants = {
            "phi_velocity": _ratio(lap4, w1),
            "velocity_gradient": _ratio(lap5, w1 + wx1),
            "psi_inverse_v2": _ratio(lap6, w1 + wx1),
            "omega_norm": w1, "dx_omega_norm": wx1,
        }
    return out
