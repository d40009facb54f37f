"""Discretizations of the half-line z >= 0.

Two back-ends share one interface:

* ``spectral``: Chebyshev collocation in xi in [-1, 1] pulled back through a
  coordinate map z(xi), dense operators.
* ``fd``: high-order finite differences (Fornberg weights) on the images of
  uniformly spaced xi, sparse operators.

Two maps are available: the algebraic map z = L(1 + xi)/(b - xi) truncated at
z_max (b = 1 + 2L/z_max, so xi = 1 lands on z_max instead of infinity), and a
tanh-clustered map of [0, z_max].  Map derivatives are generated with sympy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import sympy as sym
from scipy.interpolate import BarycentricInterpolator

from .errors import ConfigError, DomainError, UsageError

BACKENDS = ("spectral", "fd")
MAPPINGS = ("algebraic", "tanh")


# ---------------------------------------------------------------- coordinate maps

def _map_expressions():
    z, xi, L, b, zm, a = sym.symbols("z xi L b zm a", positive=True)
    forward = {
        "algebraic": L * (1 + xi) / (b - xi),
        "tanh": zm * (1 - sym.tanh(a * (1 - xi) / 2) / sym.tanh(a)),
    }
    inverse = {
        "algebraic": (b * z - L) / (z + L),
        "tanh": 1 - 2 / a * sym.atanh((1 - z / zm) * sym.tanh(a)),
    }
    args = (L, b, zm, a)
    out = {}
    for name in MAPPINGS:
        inv = inverse[name]
        dinv = [inv] + [sym.diff(inv, z, k) for k in range(1, 5)]
        out[name] = (
            sym.lambdify((xi, *args), forward[name], "numpy"),
            [sym.lambdify((z, *args), e, "numpy") for e in dinv],
        )
    return out


_MAPS = _map_expressions()


def _map_args(mapping: str, L: float, z_max: float, stretch: float):
    return (L, 1.0 + 2.0 * L / z_max, z_max, stretch)


# ---------------------------------------------------------------- primitives

def cheb(N: int):
    """Chebyshev points (ascending) and differentiation matrix on [-1, 1]."""
    x = np.cos(np.pi * np.arange(N) / (N - 1))
    c = np.ones(N)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N))
    D -= np.diag(D.sum(axis=1))
    return x[::-1].copy(), D[::-1, ::-1].copy()


def clenshaw_curtis(N: int) -> np.ndarray:
    """Clenshaw-Curtis weights for the N Chebyshev points of ``cheb``."""
    n = N - 1
    theta = np.pi * np.arange(N) / n
    w = np.zeros(N)
    v = np.ones(N - 2)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(n * theta[1:-1]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    return w[::-1].copy()


def fornberg_weights(z0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights at z0 on nodes x for derivatives 0..m.

    Returns an array of shape (len(x), m + 1).
    """
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _chain(dxi: list[np.ndarray], F: list) -> list:
    """z-derivatives 1..4 from xi-derivatives F[1..4] (Faa di Bruno)."""
    x1, x2, x3, x4 = (dxi[k] for k in range(1, 5))
    if isinstance(F[1], np.ndarray):
        m = lambda v, A: v[:, None] * A
    else:
        m = lambda v, A: sp.diags(v) @ A
    d1 = m(x1, F[1])
    d2 = m(x1 ** 2, F[2]) + m(x2, F[1])
    d3 = m(x1 ** 3, F[3]) + m(3 * x1 * x2, F[2]) + m(x3, F[1])
    d4 = (m(x1 ** 4, F[4]) + m(6 * x1 ** 2 * x2, F[3])
          + m(3 * x2 ** 2 + 4 * x1 * x3, F[2]) + m(x4, F[1]))
    return [d1, d2, d3, d4]


# ---------------------------------------------------------------- grid

@dataclass(frozen=True, eq=False)
class SemiInfiniteGrid:
    """Immutable discretization; build with :func:`build_grid`.

    ``D[k]`` is the k-th z-derivative operator (k = 1..4; ``D[0]`` is the
    identity), dense for the spectral back-end and sparse CSR for FD.
    """

    N: int
    backend: str
    mapping: str
    L: float
    z_max: float
    stretch: float
    fd_width: int
    xi: np.ndarray
    z: np.ndarray
    dxi: list  # xi^(k)(z) at nodes, k = 0..4
    D: list
    w: np.ndarray
    _Dxi: np.ndarray | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple:
        return (self.N, self.backend, self.mapping, self.L, self.z_max,
                self.stretch, self.fd_width)

    @property
    def dense(self) -> bool:
        return self.backend == "spectral"

    def diff(self, values: np.ndarray, k: int = 1) -> np.ndarray:
        """Apply the k-th derivative operator to nodal values."""
        if k == 0:
            return np.asarray(values)
        return self.D[k] @ values

    def integrate(self, values: np.ndarray) -> complex:
        return self.w @ values

    def xi_of_z(self, z) -> np.ndarray:
        return _MAPS[self.mapping][1][0](np.asarray(z, float), *_map_args(
            self.mapping, self.L, self.z_max, self.stretch))

    def nodes_within(self, depth: float) -> int:
        """Number of nodes with 0 < z <= depth (wall node excluded)."""
        return int(np.count_nonzero((self.z > 0) & (self.z <= depth)))

    def interpolation_matrix(self, zq) -> np.ndarray:
        """Dense matrix E with E @ values = interpolant at zq."""
        zq = np.atleast_1d(np.asarray(zq, float))
        if np.any(zq < 0):
            raise DomainError("interpolation abscissae must be nonnegative")
        zq = np.minimum(zq, self.z_max)
        if self.backend == "spectral":
            bi = BarycentricInterpolator(self.xi, np.eye(self.N))
            E = np.atleast_2d(bi(self.xi_of_z(zq)))
            # exactness at nodes: snap rows for abscissae equal to a node
            hit = np.searchsorted(self.z, zq)
            for r, (q, h) in enumerate(zip(zq, hit)):
                for j in (h - 1, h):
                    if 0 <= j < self.N and self.z[j] == q:
                        E[r] = 0.0
                        E[r, j] = 1.0
            return E
        width = min(8, self.N)
        E = np.zeros((zq.size, self.N))
        pos = np.searchsorted(self.z, zq)
        for r, (q, h) in enumerate(zip(zq, pos)):
            lo = int(np.clip(h - width // 2, 0, self.N - width))
            idx = np.arange(lo, lo + width)
            E[r, idx] = fornberg_weights(q, self.z[idx], 0)[:, 0]
        return E

    @cached_property
    def _bary_weights(self) -> np.ndarray:
        x = self.xi
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        # products of N differences overflow; accumulate in log space
        logw = -np.log(np.abs(diff)).sum(axis=1)
        sign = np.prod(np.sign(diff), axis=1)
        return sign * np.exp(logw - logw.max())

    def evaluate(self, values: np.ndarray, zq) -> np.ndarray:
        """Interpolant of nodal values at zq without forming a matrix."""
        zq = np.minimum(np.atleast_1d(np.asarray(zq, float)), self.z_max)
        if self.backend != "spectral":
            return self.interpolation_matrix(zq) @ values
        xq = self.xi_of_z(zq)
        d = xq[:, None] - self.xi[None, :]
        exact = d == 0
        d[exact] = 1.0
        c = self._bary_weights / d
        out = (c @ values) / c.sum(axis=1)
        rows, cols = np.nonzero(exact)
        out[rows] = np.asarray(values)[cols]
        return out

    @cached_property
    def midpoint_matrix(self) -> np.ndarray:
        """Interpolation onto the N - 1 midpoints between consecutive nodes."""
        return self.interpolation_matrix(0.5 * (self.z[1:] + self.z[:-1]))

    @cached_property
    def clamped(self) -> "ClampedBasis":
        return ClampedBasis.build(self)

    def describe(self) -> dict:
        return {"N": self.N, "backend": self.backend, "mapping": self.mapping,
                "L": self.L, "z_max": self.z_max, "stretch": self.stretch,
                "fd_width": self.fd_width}


def build_grid(N: int, backend: str = "spectral", mapping: str = "algebraic",
               L: float = 1.0, z_max: float = 50.0, stretch: float = 3.0,
               fd_width: int = 9) -> SemiInfiniteGrid:
    """Construct a grid; raises ConfigError for invalid parameters."""
    if not isinstance(N, (int, np.integer)) or N < 8:
        raise ConfigError("grid.N", f"need an integer N >= 8, got {N!r}")
    if backend not in BACKENDS:
        raise ConfigError("grid.backend", f"must be one of {BACKENDS}")
    if mapping not in MAPPINGS:
        raise ConfigError("grid.mapping", f"must be one of {MAPPINGS}")
    if not (L > 0 and math.isfinite(L)):
        raise ConfigError("grid.L", f"map scale must be positive, got {L}")
    if not (z_max > 0 and math.isfinite(z_max)):
        raise ConfigError("grid.z_max", f"must be positive and finite, got {z_max}")
    if mapping == "tanh" and not stretch > 0:
        raise ConfigError("grid.stretch", f"must be positive, got {stretch}")
    if backend == "fd" and (fd_width < 5 or fd_width > N):
        raise ConfigError("grid.fd_width", "stencil width must lie in [5, N]")
    N = int(N)
    fwd, inv = _MAPS[mapping]
    args = _map_args(mapping, L, z_max, stretch)
    if backend == "spectral":
        xi, Dxi = cheb(N)
    else:
        xi, Dxi = np.linspace(-1.0, 1.0, N), None
    z = np.asarray(fwd(xi, *args), float)
    z[0], z[-1] = 0.0, z_max
    dxi = [np.asarray(inv[k](z, *args), float) * np.ones(N) for k in range(5)]
    if backend == "spectral":
        # powers of D1 keep D2 = D1 @ D1 exact; accuracy matches the
        # chain-rule construction used for the clamped basis
        D = [np.eye(N), dxi[1][:, None] * Dxi]
        for _ in range(3):
            D.append(D[1] @ D[-1])
        w = clenshaw_curtis(N) / dxi[1]
    else:
        D = [sp.identity(N, format="csr")] + _fd_operators(z, fd_width)
        h = xi[1] - xi[0]
        tw = np.full(N, h)
        tw[0] = tw[-1] = 0.5 * h
        w = tw / dxi[1]
    return SemiInfiniteGrid(N=N, backend=backend, mapping=mapping, L=float(L),
                            z_max=float(z_max), stretch=float(stretch),
                            fd_width=int(fd_width), xi=xi, z=z, dxi=dxi, D=D, w=w,
                            _Dxi=Dxi)


def _fd_operators(z: np.ndarray, width: int) -> list:
    N = len(z)
    h = width // 2
    rows, cols = [], []
    vals = [[] for _ in range(4)]
    for i in range(N):
        lo = min(max(i - h, 0), N - width)
        idx = np.arange(lo, lo + width)
        c = fornberg_weights(z[i], z[idx], 4)
        rows.extend([i] * width)
        cols.extend(idx)
        for k in range(4):
            vals[k].extend(c[:, k + 1])
    return [sp.csr_matrix((v, (rows, cols)), shape=(N, N)) for v in vals]


# ---------------------------------------------------------------- clamped basis

@dataclass(frozen=True, eq=False)
class ClampedBasis:
    """Basis of grid functions with f = f' = 0 at both ends of the grid.

    A coefficient vector g of length ``m`` represents nodal values E[0] @ g;
    E[k] @ g are the k-th z-derivatives.  ``rows`` are the collocation rows on
    which fourth-order equations are imposed.

    Spectral: f = (1 - xi^2) p(xi) with p the Chebyshev interpolant of g on
    the interior nodes.  FD: the two outermost nodal values at each end are
    eliminated through the four boundary conditions.
    """

    E: list
    rows: np.ndarray
    m: int

    @staticmethod
    def build(grid: SemiInfiniteGrid) -> "ClampedBasis":
        N = grid.N
        if grid.backend == "spectral":
            x, Dx = grid.xi, grid._Dxi
            I = np.eye(N)
            W = (1.0 - x * x)[:, None]
            X = x[:, None]
            D2 = Dx @ Dx
            D3 = D2 @ Dx
            D4 = D2 @ D2
            P = [W * I, W * Dx - 2 * X * I, W * D2 - 4 * X * Dx - 2 * I,
                 W * D3 - 6 * X * D2 - 6 * Dx, W * D4 - 8 * X * D3 - 12 * D2]
            E = [P[0]] + _chain(grid.dxi, P)
            E = [M[:, 1:-1] for M in E]
            return ClampedBasis(E=E, rows=np.arange(1, N - 1), m=N - 2)
        D1 = grid.D[1]
        C = np.zeros((4, N))
        C[0, 0] = 1.0
        C[1] = D1[0].toarray().ravel()
        C[2, N - 1] = 1.0
        C[3] = D1[N - 1].toarray().ravel()
        b = [0, 1, N - 2, N - 1]
        inner = np.arange(2, N - 2)
        Tb = -np.linalg.solve(C[:, b], C[:, inner])
        T = sp.lil_matrix((N, N - 4))
        T[inner, np.arange(N - 4)] = 1.0
        for r, i in enumerate(b):
            T[i, :] = Tb[r]
        T = T.tocsr()
        E = [T] + [grid.D[k] @ T for k in range(1, 5)]
        return ClampedBasis(E=E, rows=inner, m=N - 4)


# ---------------------------------------------------------------- grid specs

@dataclass(frozen=True)
class GridSpec:
    """Recipe for wavenumber-adapted grids.

    With ``z_max=None`` the truncation is max(z_max_min, z_max_factor/alpha),
    long enough for the exp(-alpha z) far field of stream functions.
    """

    N: int = 150
    backend: str = "spectral"
    mapping: str = "algebraic"
    L: float = 1.0
    z_max: float | None = None
    z_max_factor: float = 100.0
    z_max_min: float = 60.0
    stretch: float = 3.0
    fd_width: int = 9

    def z_max_for(self, alpha: float | None) -> float:
        if self.z_max is not None:
            return float(self.z_max)
        a = abs(alpha) if alpha else 0.0
        if a == 0.0:
            return float(self.z_max_min)
        # round to 3 significant digits so nearby alphas share a cached grid
        zm = max(self.z_max_min, self.z_max_factor / a)
        return float(f"{zm:.3g}")

    def build(self, alpha: float | None = None) -> SemiInfiniteGrid:
        return _cached_grid(self.N, self.backend, self.mapping, self.L,
                            self.z_max_for(alpha), self.stretch, self.fd_width)

    def with_(self, **kw) -> "GridSpec":
        return replace(self, **kw)


@lru_cache(maxsize=64)
def _cached_grid(*args) -> SemiInfiniteGrid:
    return build_grid(*args)


# ---------------------------------------------------------------- grid functions

@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex nodal values on a grid, optionally tagged with a wavenumber."""

    grid: SemiInfiniteGrid
    values: np.ndarray
    alpha: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.N,):
            raise UsageError(f"expected {self.grid.N} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function has non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid, f, alpha=None) -> "GridFunction":
        return cls(grid, np.asarray(f(grid.z), dtype=complex), alpha)

    @classmethod
    def zeros(cls, grid, alpha=None) -> "GridFunction":
        return cls(grid, np.zeros(grid.N, complex), alpha)

    def derivative(self, k: int = 1) -> "GridFunction":
        return GridFunction(self.grid, self.grid.diff(self.values, k), self.alpha)

    def interpolate(self, z) -> np.ndarray | complex:
        scalar = np.ndim(z) == 0
        out = self.grid.interpolation_matrix(z) @ self.values
        return out[0] if scalar else out

    def conj(self) -> "GridFunction":
        a = None if self.alpha is None else -self.alpha
        return GridFunction(self.grid, self.values.conj(), a)

    def scaled(self, c: complex) -> "GridFunction":
        return GridFunction(self.grid, c * self.values, self.alpha)

    def _check(self, other: "GridFunction"):
        if other.grid is not self.grid and other.grid.key != self.grid.key:
            raise UsageError("grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values + other.values, self.alpha)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values - other.values, self.alpha)

    def __mul__(self, c) -> "GridFunction":
        if isinstance(c, GridFunction):
            self._check(c)
            return GridFunction(self.grid, self.values * c.values, self.alpha)
        return self.scaled(c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ModeFamily:
    """Fourier modes f_n(z) exp(i n alpha_base x) on one grid.

    ``modes`` maps integer n to a GridFunction; missing n are zero.  The
    optional ``streams`` holds matching stream functions when known exactly
    (eigenmodes), so velocities need not be re-derived by elliptic inversion.
    """

    alpha_base: float
    modes: Mapping[int, GridFunction]
    streams: Mapping[int, GridFunction] | None = None

    @property
    def grid(self) -> SemiInfiniteGrid:
        return next(iter(self.modes.values())).grid

    def alpha(self, n: int) -> float:
        return n * self.alpha_base

    def indices(self) -> list[int]:
        return sorted(self.modes)

    def __getitem__(self, n: int) -> GridFunction:
        if n in self.modes:
            return self.modes[n]
        return GridFunction.zeros(self.grid, self.alpha(n))

    def __len__(self):
        return len(self.modes)

    def items(self) -> Iterable[tuple[int, GridFunction]]:
        return ((n, self.modes[n]) for n in self.indices())

    def scaled(self, c: complex) -> "ModeFamily":
        s = None if self.streams is None else {n: f.scaled(c) for n, f in self.streams.items()}
        return ModeFamily(self.alpha_base, {n: f.scaled(c) for n, f in self.modes.items()}, s)

    def physical(self, x: np.ndarray) -> np.ndarray:
        """Real-space samples sum_n f_n(z) exp(i n alpha x), shape (len(x), N)."""
        x = np.asarray(x, float)
        out = np.zeros((x.size, self.grid.N), complex)
        for n, f in self.items():
            out += np.exp(1j * n * self.alpha_base * x)[:, None] * f.values[None, :]
        return out

    def max_asymmetry(self) -> float:
        """max |f_{-n} - conj(f_n)| over the family (reality defect)."""
        worst = 0.0
        for n, f in self.items():
            worst = max(worst, float(np.abs(self[-n].values - f.values.conj()).max()))
        return worst
