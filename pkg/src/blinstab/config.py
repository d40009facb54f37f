"""Run configuration: nested dataclasses loaded from JSON with field-path errors."""
from __future__ import annotations

import json
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .errors import ConfigError
from .grid import GridSpec
from .norms import BLNormParams


@dataclass(frozen=True)
class ProfileConfig:
    name: str = "erf"
    eta0: float | None = None
    table_path: str | None = None
    U_plus: float | None = None

    def as_mapping(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GridConfig:
    N: int = 150
    backend: str = "spectral"
    mapping: str = "algebraic"
    L: float = 1.0
    z_max: float | None = None
    z_max_factor: float = 100.0
    z_max_min: float = 60.0
    stretch: float = 3.0
    fd_width: int = 9

    def spec(self) -> GridSpec:
        return GridSpec(**asdict(self))


@dataclass(frozen=True)
class NormConfig:
    beta: float = 0.25
    gamma: float = 1.0
    p: int = 1
    P_weight: int = 4

    def params(self, nu: float, z_cap: float | None = None) -> BLNormParams:
        return BLNormParams(beta=self.beta, gamma=self.gamma, nu=nu, p=self.p,
                            P_weight=self.P_weight, z_cap=z_cap)


@dataclass(frozen=True)
class ScanConfig:
    nus: list = field(default_factory=lambda: [1e-8, 3e-8, 1e-7, 3e-7, 1e-6, 3e-6, 1e-5])
    alphas: list = field(default_factory=lambda: [0.1 + 0.19 * k for k in range(10)])
    Rs: list = field(default_factory=lambda: [3e6, 7.5e6, 1.7e7, 4e7, 1e8])
    n_alpha: int = 20


@dataclass(frozen=True)
class LinpropConfig:
    gamma1_factor: float = 1.2
    dt: float | None = None
    t_end: float | None = None  # default 5 / Re lambda
    n_random: int = 20
    n_snapshots: int = 41


@dataclass(frozen=True)
class ExpansionConfig:
    p_exp: int = 1
    M: int = 3
    tau: float = 0.3
    mode: str = "time-dependent"
    n_snapshots: int = 21
    dt: float | None = None


@dataclass(frozen=True)
class NonlinRunConfig:
    p_exp: float = 1.0
    theta0: float = 0.1
    t_end: float | None = None
    N_modes: int = 16
    seed_amplitude: float | None = None
    dt: float | None = None
    record_every: int = 10


@dataclass(frozen=True)
class RunConfig:
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    norm: NormConfig = field(default_factory=NormConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    linprop: LinpropConfig = field(default_factory=LinpropConfig)
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    nonlin: NonlinRunConfig = field(default_factory=NonlinRunConfig)
    nu: float = 1e-8
    alpha: float | None = None  # default: most unstable alpha at nu
    out: str | None = None
    seed: int = 0
    workers: int = 1

    def as_dict(self) -> dict:
        return asdict(self)


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def _coerce(value, hint, path: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected a table, got {type(value).__name__}")
        return _build(hint, value, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if hint is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        if not value:
            raise ConfigError(path, "list must be nonempty")
        for k, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}[{k}]", f"expected a number, got {v!r}")
        return [float(v) for v in value]
    return value


def _build(cls, data: dict, prefix: str = ""):
    hints = _hints(cls)
    names = {f.name for f in fields(cls)}
    kw = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in names:
            raise ConfigError(path, "unknown key")
        kw[key] = _coerce(value, hints[key], path)
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix or "config", str(exc)) from None


def validate(cfg: RunConfig) -> RunConfig:
    """Range checks that the dataclass types cannot express."""
    checks = [
        ("nu", cfg.nu > 0, "must be positive"),
        ("workers", cfg.workers >= 1, "must be >= 1"),
        ("grid.N", cfg.grid.N >= 16, "must be >= 16"),
        ("grid.backend", cfg.grid.backend in ("spectral", "fd"), "must be 'spectral' or 'fd'"),
        ("grid.mapping", cfg.grid.mapping in ("algebraic", "tanh"), "must be 'algebraic' or 'tanh'"),
        ("scan.n_alpha", cfg.scan.n_alpha >= 3, "must be >= 3"),
        ("scan.nus", all(v > 0 for v in cfg.scan.nus), "entries must be positive"),
        ("scan.alphas", all(v > 0 for v in cfg.scan.alphas), "entries must be positive"),
        ("scan.Rs", all(v > 0 for v in cfg.scan.Rs), "entries must be positive"),
        ("linprop.gamma1_factor", cfg.linprop.gamma1_factor > 1, "must exceed 1"),
        ("linprop.n_random", cfg.linprop.n_random >= 0, "must be >= 0"),
        ("linprop.n_snapshots", cfg.linprop.n_snapshots >= 2, "must be >= 2"),
        ("expansion.p_exp", cfg.expansion.p_exp >= 1, "must be >= 1"),
        ("expansion.M", cfg.expansion.M >= 0, "must be >= 0"),
        ("expansion.tau", cfg.expansion.tau > 0.25, "must exceed 1/4"),
        ("expansion.mode", cfg.expansion.mode in ("stationary", "time-dependent"),
         "must be 'stationary' or 'time-dependent'"),
        ("expansion.n_snapshots", cfg.expansion.n_snapshots >= 2, "must be >= 2"),
        ("nonlin.N_modes", cfg.nonlin.N_modes >= 1, "must be >= 1"),
        ("nonlin.theta0", cfg.nonlin.theta0 > 0, "must be positive"),
        ("nonlin.record_every", cfg.nonlin.record_every >= 1, "must be >= 1"),
    ]
    if cfg.alpha is not None:
        checks.append(("alpha", cfg.alpha > 0, "must be positive"))
    if cfg.profile.table_path is not None:
        checks.append(("profile.table_path", Path(cfg.profile.table_path).exists(),
                       f"file not found: {cfg.profile.table_path}"))
    for path, ok, msg in checks:
        if not ok:
            raise ConfigError(path, msg)
    return cfg


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a table")
    return validate(_build(RunConfig, data))


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return validate(RunConfig())
    p = Path(path)
    if not p.exists():
        raise ConfigError("--config", f"file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)


def apply_override(cfg: RunConfig, dotted: str, raw: str) -> RunConfig:
    """Set one field from a ``section.key=value`` override; value parsed as JSON."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = dotted.split(".")
    data = cfg.as_dict()
    node = data
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(dotted, "unknown section")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(dotted, "unknown key")
    node[parts[-1]] = value
    return config_from_dict(data)
