"""Boundary-layer shear profiles, hypothesis checks and heat evolution.

A profile is a monotone velocity U(z) on z >= 0 with U(0) = 0 that converges
exponentially to a far-field value U_plus.  The module ships two closed-form
families (exponential and error-function) and a tabulated family built from a
two-column CSV file.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import erf

from .errors import ConfigError, DomainError, ProfileEvaluationError

Evaluator = Callable[[np.ndarray], np.ndarray]

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class ShearProfile:
    """Base flow U(z) with its first four derivatives.

    ``derivs[k]`` evaluates the k-th derivative, k = 0..4.  ``analytic`` is a
    declared attribute only; real analyticity cannot be checked numerically.
    """

    name: str
    derivs: tuple[Evaluator, Evaluator, Evaluator, Evaluator, Evaluator]
    U_plus: float
    eta0: float
    analytic: bool = True
    source: str = "builtin"

    def __post_init__(self):
        if len(self.derivs) != 5:
            raise ConfigError("profile.derivs", "need evaluators for k = 0..4")
        if not self.eta0 > 0:
            raise ConfigError("profile.eta0", f"must be positive, got {self.eta0}")

    def d(self, k: int, z) -> np.ndarray:
        """k-th derivative at z (array-valued)."""
        z = np.asarray(z, dtype=float)
        return np.asarray(self.derivs[k](z), dtype=float)

    def U(self, z):
        return self.d(0, z)

    def dU(self, z):
        return self.d(1, z)

    def d2U(self, z):
        return self.d(2, z)

    def describe(self) -> dict:
        return {"name": self.name, "U_plus": self.U_plus, "eta0": self.eta0,
                "analytic": self.analytic, "source": self.source}


def exponential_profile(eta0: float = 0.9) -> ShearProfile:
    """U(z) = 1 - exp(-z)."""
    e = lambda z: np.exp(-z)
    return ShearProfile(
        name="exponential",
        derivs=(lambda z: -np.expm1(-z), e, lambda z: -e(z), e, lambda z: -e(z)),
        U_plus=1.0, eta0=eta0)


def erf_profile(eta0: float = 0.9) -> ShearProfile:
    """U(z) = erf(z/2), the Rayleigh (impulsively started plate) profile."""
    # d/dz erf(z/2) = g(z) = exp(-z^2/4)/sqrt(pi); higher derivatives are
    # Hermite-type polynomials in z times g.
    g = lambda z: np.exp(-0.25 * z * z) / _SQRT_PI
    return ShearProfile(
        name="erf",
        derivs=(
            lambda z: erf(0.5 * z),
            g,
            lambda z: -0.5 * z * g(z),
            lambda z: (0.25 * z * z - 0.5) * g(z),
            lambda z: (0.75 * z - 0.125 * z ** 3) * g(z),
        ),
        U_plus=1.0, eta0=eta0)


def tabulated_profile(z_tab: Sequence[float], u_tab: Sequence[float], *,
                      name: str = "tabulated", eta0: float = 0.9,
                      U_plus: float | None = None) -> ShearProfile:
    """Profile from samples, interpolated by a quintic spline.

    Beyond the last sample the profile is continued as the constant end value
    with vanishing derivatives.  ``U_plus`` defaults to the last sample.
    """
    z_tab = np.asarray(z_tab, dtype=float)
    u_tab = np.asarray(u_tab, dtype=float)
    if z_tab.ndim != 1 or z_tab.shape != u_tab.shape or len(z_tab) < 6:
        raise ConfigError("profile.table", "need at least 6 (z, U) rows")
    if np.any(np.diff(z_tab) <= 0):
        raise ConfigError("profile.table", "z column must be strictly increasing")
    spline = make_interp_spline(z_tab, u_tab, k=5)
    z_end = z_tab[-1]
    u_end = float(spline(z_end))

    def make(k):
        dk = spline.derivative(k) if k else spline

        def ev(z):
            z = np.asarray(z, dtype=float)
            inside = z <= z_end
            out = np.full(z.shape, u_end if k == 0 else 0.0)
            out[inside] = dk(z[inside])
            return out
        return ev

    return ShearProfile(name=name, derivs=tuple(make(k) for k in range(5)),
                        U_plus=u_end if U_plus is None else float(U_plus),
                        eta0=eta0, analytic=False, source="table")


def read_profile_csv(path: str | Path, **kwargs) -> ShearProfile:
    """Read a two-column (z, U) CSV; a non-numeric first row is a header."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("profile.table_path", f"file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ConfigError("profile.table_path", f"bad row {i + 1} in {path}")
    arr = np.array(rows)
    kwargs.setdefault("name", path.stem)
    return tabulated_profile(arr[:, 0], arr[:, 1], **kwargs)


def write_profile_csv(path: str | Path, z, u) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "U"])
        for a, b in zip(z, u):
            w.writerow([repr(float(a)), repr(float(b))])


def shear_layer_profile(z_center: float = 2.0, n_table: int = 400,
                        z_end: float = 20.0) -> ShearProfile:
    """Inflected negative-control profile tanh(z - zc) + tanh(zc), tabulated.

    It is monotone with U(0) = 0 but has an inflection point, so it is
    Rayleigh-unstable.  Built through the tabulated path on purpose.
    """
    z = np.linspace(0.0, z_end, n_table)
    u = np.tanh(z - z_center) + np.tanh(z_center)
    return tabulated_profile(z, u, name="shear-layer", eta0=1.5)


BUILTIN = {"exponential": exponential_profile, "erf": erf_profile,
           "shear-layer": shear_layer_profile}


def profile_from_config(cfg: dict) -> ShearProfile:
    """Build a profile from a config mapping.

    Keys: ``name`` (builtin id) or ``table_path``; optional ``eta0``, ``U_plus``.
    """
    if cfg.get("table_path"):
        kw = {k: cfg[k] for k in ("eta0", "U_plus") if cfg.get(k) is not None}
        if cfg.get("name"):
            kw["name"] = cfg["name"]
        return read_profile_csv(cfg["table_path"], **kw)
    name = cfg.get("name", "exponential")
    if name not in BUILTIN:
        raise ConfigError("profile.name", f"unknown profile {name!r}; "
                          f"choose from {sorted(BUILTIN)} or give table_path")
    kw = {"eta0": cfg["eta0"]} if cfg.get("eta0") is not None and name != "shear-layer" else {}
    return BUILTIN[name](**kw)


@dataclass
class ValidationReport:
    profile: str
    U0: float
    dU0: float
    min_dU: float
    argmin_dU: float
    weighted_constants: list[float]
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        return {"profile": self.profile, "U0": self.U0, "dU0": self.dU0,
                "min_dU": self.min_dU, "argmin_dU": self.argmin_dU,
                "weighted_constants": self.weighted_constants,
                "checks": dict(self.checks), "passed": self.passed}


def default_check_grid(p: ShearProfile, n: int = 4001) -> np.ndarray:
    """Uniform sample grid on [0, 40/eta0]."""
    return np.linspace(0.0, 40.0 / p.eta0, n)


def _evaluate(p: ShearProfile, k: int, z: np.ndarray) -> np.ndarray:
    v = p.d(k, z)
    bad = ~np.isfinite(v)
    if bad.any():
        raise ProfileEvaluationError(float(z[np.argmax(bad)]), k)
    return v


def validate_profile(p: ShearProfile, grid=None, tol: float = 1e-8) -> ValidationReport:
    """Check the quantitative hypotheses on a sample grid.

    Weighted constants are sup |d^k(U - U_plus)| exp(eta0 z).  A constant is
    declared finite when the weighted sequence does not grow over the outer
    quarter of the grid, a discrete proxy for boundedness on the half-line.
    """
    z = default_check_grid(p) if grid is None else np.sort(np.asarray(grid, float))
    if z.size == 0:
        raise DomainError("sample grid is empty")
    if not tol > 0:
        raise DomainError("tol must be positive")
    vals = [_evaluate(p, k, z) for k in range(5)]
    U0 = float(_evaluate(p, 0, np.array([0.0]))[0])
    dU0 = float(_evaluate(p, 1, np.array([0.0]))[0])
    dU = vals[1]
    i_min = int(np.argmin(dU))
    weight = np.exp(p.eta0 * z)
    consts, bounded = [], []
    q = max(1, (3 * z.size) // 4)
    for k in range(5):
        dev = vals[0] - p.U_plus if k == 0 else vals[k]
        w = np.abs(dev) * weight
        consts.append(float(w.max()))
        if z.size < 8:
            bounded.append(bool(np.isfinite(w).all()))
        else:
            bounded.append(bool(w[q:].max() <= w[:q].max() * (1 + tol) + tol))
    # strict monotonicity: U' > 0 up to tol; the far tail where U' is below tol
    # only counts against the profile if it is negative
    checks = {
        "U(0)=0": abs(U0) <= tol,
        "U'(0)>0": dU0 > tol,
        "U'>0": bool(dU.min() > -tol) and bool(np.all((dU > 0) | (np.abs(dU) <= tol))),
    }
    for k in range(5):
        checks[f"weighted_sup_k{k}_finite"] = bounded[k]
    return ValidationReport(profile=p.name, U0=U0, dU0=dU0, min_dU=float(dU[i_min]),
                            argmin_dU=float(z[i_min]), weighted_constants=consts,
                            checks=checks)


def stationary_forcing(p: ShearProfile, z) -> np.ndarray:
    """Body force f^P = -U'' that keeps U stationary."""
    return -p.d2U(z)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_KERNEL_WIDTH = 8.0  # kernel support in units of 2 sqrt(s)


def _panels(a: np.ndarray, b: np.ndarray, n_panels: int):
    """Composite Gauss-Legendre nodes/weights on [a_i, b_i] (rows)."""
    b = np.maximum(a, b)
    edges = a[:, None] + (b - a)[:, None] * np.linspace(0, 1, n_panels + 1)[None, :]
    mid = 0.5 * (edges[:, :-1] + edges[:, 1:])
    half = 0.5 * (edges[:, 1:] - edges[:, :-1])
    x = mid[:, :, None] + half[:, :, None] * _GL_X
    w = half[:, :, None] * _GL_W
    return x.reshape(a.size, -1), w.reshape(a.size, -1)


def _heat_kernel_apply(func: Evaluator, s: float, z: np.ndarray, y_max: float) -> np.ndarray:
    """int_0^inf [G(z-y) - G(z+y)] func(y) dy with G the heat kernel at time s.

    ``func`` must be negligible beyond ``y_max``.  Panels are sized by the
    smaller of the kernel width and the unit profile scale.
    """
    r = 2.0 * math.sqrt(s)
    h = 0.5 * min(r, 1.0)
    n_p = int(math.ceil(min(2 * _KERNEL_WIDTH * r, y_max) / h)) + 1
    a = np.clip(z - _KERNEL_WIDTH * r, 0.0, y_max)
    b = np.clip(z + _KERNEL_WIDTH * r, 0.0, y_max)
    y, w = _panels(a, b, n_p)
    direct = (w * np.exp(-((z[:, None] - y) / r) ** 2) * func(y.ravel()).reshape(y.shape)).sum(1)
    b2 = np.clip(_KERNEL_WIDTH * r - z, 0.0, y_max)
    y2, w2 = _panels(np.zeros_like(z), b2, n_p)
    image = (w2 * np.exp(-((z[:, None] + y2) / r) ** 2) * func(y2.ravel()).reshape(y2.shape)).sum(1)
    return (direct - image) / (r * _SQRT_PI)


@dataclass(frozen=True)
class EvolvedProfile:
    """U_s(s, z): heat evolution of the base profile with U_s(s, 0) = 0."""

    base: ShearProfile
    s: float

    def __post_init__(self):
        if self.s < 0:
            raise DomainError(f"slow time must be nonnegative, got {self.s}")

    def U(self, z) -> np.ndarray:
        return heat_evolve(self.base, self.s, z)

    def d2U(self, z) -> np.ndarray:
        return heat_evolve(self.base, self.s, z, derivative=2)


def heat_evolve(p: ShearProfile, s: float, z, derivative: int = 0) -> np.ndarray:
    """Odd-extension heat-kernel solution of U_s = U_zz started from U.

    ``derivative=2`` returns d^2/dz^2 U_s, obtained by applying the same
    Dirichlet kernel to U'' (valid for s > 0 because U(0) = 0).
    """
    if s < 0:
        raise DomainError(f"slow time must be nonnegative, got {s}")
    if derivative not in (0, 2):
        raise DomainError("derivative must be 0 or 2")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < 0):
        raise DomainError("z must be nonnegative")
    y_max = 40.0 / p.eta0
    if s == 0.0:
        out = p.d(derivative, z)
    elif derivative == 0:
        # split off the constant far field, whose odd extension is explicit
        out = p.U_plus * erf(z / (2.0 * math.sqrt(s)))
        out = out + _heat_kernel_apply(lambda y: p.U(y) - p.U_plus, s, z, y_max)
    else:
        out = _heat_kernel_apply(p.d2U, s, z, y_max)
    return out[0] if scalar else out
