"""Command-line front end: one subcommand per experiment plus ``report``.

Every subcommand writes ``<out>/<command>.json`` (resolved config, code
version, results and per-criterion checks), a plain-text summary
``<out>/<command>.txt`` and CSV tables where relevant.  Files are written to
a temporary name and renamed into place.  Exit codes: 0 success, 1 failed
check, 2 configuration or usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance as acc
from .config import RunConfig, apply_override, load_config
from .errors import BlinstabError, ConfigError
from .expansion import check_inductive_bounds
from .profiles import BUILTIN, profile_from_config, validate_profile
from .stability import estimate_gamma0, leading_eigenvalue, trace_neutral_curve

OUT_ENV = "BLINSTAB_OUT"
DEFAULT_OUT = "blinstab-out"


# ---------------------------------------------------------------- output helpers

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


class Output:
    """Collects one subcommand's artifacts and commits them atomically."""

    def __init__(self, root: Path, command: str, cfg: RunConfig):
        self.root, self.command, self.cfg = root, command, cfg
        self.results: dict = {}
        self.checks: dict[str, dict] = {}
        self.lines: list[str] = []
        self.tables: dict[str, str] = {}

    def table(self, name: str, header: list[str], rows) -> None:
        self.tables[name] = _csv_text(header, rows)

    def check(self, res: acc.CriterionResult) -> None:
        self.checks[str(res.number)] = res.as_dict()
        self.lines.append(res.line())

    def check_named(self, name: str, passed: bool, detail: str) -> None:
        self.checks[name] = {"name": name, "passed": bool(passed), "detail": detail}
        self.lines.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def commit(self) -> Path:
        for name, text in self.tables.items():
            _atomic_write(self.root / name, text)
        doc = {"command": self.command, "version": __version__,
               "config": self.cfg.as_dict(), "results": acc._jsonable(self.results),
               "checks": self.checks, "passed": self.passed,
               "tables": sorted(self.tables)}
        path = self.root / f"{self.command}.json"
        _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
        head = [f"{self.command} (blinstab {__version__})",
                f"profile {self.cfg.profile.name}, nu {self.cfg.nu:g}, grid N {self.cfg.grid.N}"]
        _atomic_write(self.root / f"{self.command}.txt", "\n".join(head + self.lines) + "\n")
        return path


# ---------------------------------------------------------------- subcommands

def cmd_profile_check(cfg: RunConfig, out: Output, args) -> None:
    prof = profile_from_config(cfg.profile.as_mapping())
    rep = validate_profile(prof)
    out.results = rep.as_dict()
    out.check_named("profile", rep.passed,
                    f"{prof.name}: U(0) = {rep.U0:.3g}, U'(0) = {rep.dU0:.4g}, min U' = "
                    f"{rep.min_dU:.3g}; " + ", ".join(f"{k} {'ok' if v else 'FAILED'}"
                                                      for k, v in rep.checks.items()))


def cmd_rayleigh_scan(cfg: RunConfig, out: Output, args) -> None:
    profiles = {n: BUILTIN[n]() for n in ("exponential", "erf", "shear-layer")}
    if cfg.profile.name not in profiles or cfg.profile.table_path:
        profiles[cfg.profile.name] = profile_from_config(cfg.profile.as_mapping())
    table = acc.rayleigh_table(profiles, cfg.scan.alphas, cfg.grid.spec())
    out.results = {"alphas": cfg.scan.alphas, "table": table}
    out.table("rayleigh-scan.csv", ["profile", "alpha", "n_unstable", "max_im_c"],
              [(n, r["alpha"], r["n_unstable"], r["max_im_c"]) for n, rows in table.items()
               for r in rows])
    out.check(acc.judge_rayleigh(table))


def cmd_os_scan(cfg: RunConfig, out: Output, args) -> None:
    prof = profile_from_config(cfg.profile.as_mapping())
    grid = cfg.grid.spec()
    rows = []
    for a in cfg.scan.alphas:
        s = leading_eigenvalue(prof, a, cfg.nu, grid)
        rows.append((a, cfg.nu, s.lam.real if s else float("nan"), s.lam.imag if s else float("nan"),
                     s.c.real if s else float("nan"), s.c.imag if s else float("nan"),
                     s.residual if s else float("nan")))
    out.table("os-scan.csv", ["alpha", "nu", "re_lambda", "im_lambda", "c_re", "c_im", "residual"],
              rows)
    dual = acc.dual_method_table(prof, acc.DUAL_NUS, acc.DUAL_ALPHAS, grid.with_(N=150), acc.DUAL_FD)
    out.results = {"leading": [dict(zip(["alpha", "nu", "re_lambda", "im_lambda", "c_re", "c_im",
                                         "residual"], r)) for r in rows], "dual_method": dual}
    out.check(acc.judge_dual(dual))


def cmd_gamma0(cfg: RunConfig, out: Output, args) -> None:
    prof = profile_from_config(cfg.profile.as_mapping())
    scan = estimate_gamma0(prof, cfg.scan.nus, cfg.grid.spec(), n_alpha=cfg.scan.n_alpha,
                           workers=cfg.workers)
    keys = ["nu", "R", "alpha_star", "re_lambda", "im_lambda", "gamma0_local", "residual"]
    out.table("gamma0.csv", keys, [[r[k] if r[k] is not None else "" for k in keys] for r in scan.rows])
    out.results = {**scan.summary(), "rows": scan.rows}
    out.lines.append(f"gamma0 estimate {scan.gamma0_estimate:.4g}")
    for r in acc.judge_growth(scan):
        out.check(r)


def cmd_neutral_curve(cfg: RunConfig, out: Output, args) -> None:
    prof = profile_from_config(cfg.profile.as_mapping())
    nc = trace_neutral_curve(prof, cfg.scan.Rs, cfg.grid.spec(), n_alpha=cfg.scan.n_alpha,
                             workers=cfg.workers)
    out.table("neutral-curve.csv", ["R", "alpha_low", "alpha_up"],
              list(zip(nc.R, nc.alpha_low, nc.alpha_up)))
    out.results = nc.summary()
    out.check(acc.judge_neutral(nc))


def cmd_mode_structure(cfg: RunConfig, out: Output, args) -> None:
    prof = profile_from_config(cfg.profile.as_mapping())
    rows = acc.structure_rows(prof, acc.STRUCTURE_RS, cfg.grid.spec(), cfg.workers)
    out.table("mode-structure.csv", ["R", "nu", "alpha", "delta_bl", "pred_bl", "delta_cr", "pred_cr"],
              [(r["R"], r["nu"], r["alpha"], r["delta_bl"], r["pred_bl"], r["delta_cr"],
                r["pred_cr"]) for r in rows])
    out.results = {"rows": rows}
    out.check(acc.judge_structure(rows))


def cmd_semigroup_verify(cfg: RunConfig, out: Output, args) -> None:
    prof, sol = acc.reference_mode(cfg)
    study = acc.semigroup_study(cfg, prof, sol)
    ev = study.evaluate()
    rows = []
    for lab, run in study.runs:
        for t, a, b in zip(run.times, run.norms, run.dnorms):
            rows.append((lab, t, a, b))
    out.table("semigroup-verify.csv", ["run", "t", "norm_omega", "norm_dz_omega"], rows)
    out.results = {"mode": sol.summary(), **ev}
    out.check(acc.judge_semigroup(ev))


def cmd_elliptic_verify(cfg: RunConfig, out: Output, args) -> None:
    by_N = {N: acc.elliptic_constants(N) for N in acc.ELLIPTIC_NS}
    closed = acc.closed_form_error()
    lattice = [(a, d) for a in acc.ELLIPTIC_ALPHAS for d in acc.ELLIPTIC_DELTAS]
    out.table("elliptic-verify.csv", ["N", "alpha", "delta", *acc.ESTIMATES],
              [(N, a, d, *(c[k][i] for k in acc.ESTIMATES))
               for N, c in by_N.items() for i, (a, d) in enumerate(lattice)])
    checks = acc.norm_calculus_checks(cfg.seed)
    brute = acc.brute_force_errors()
    out.results = {"constants": by_N, "closed_form_error": closed, "norm_calculus": checks,
                   "brute_force_rel_errors": brute}
    out.check(acc.judge_elliptic(by_N, closed))
    out.check(acc.judge_norms(checks, brute))


def cmd_expansion_build(cfg: RunConfig, out: Output, args) -> None:
    ladder, ts = acc.ladder_for(cfg)
    _, sol = acc.reference_mode(cfg)
    bounds = check_inductive_bounds(ladder)
    rows = []
    for j in range(ladder.M + 1):
        for n in ladder.support[j]:
            if n < 0 or (j, n) not in ladder.states:
                continue
            a, b = ladder.norm_trace(j, n, 0), ladder.norm_trace(j, n, 1)
            rows += [(j, n, t, x, y) for t, x, y in zip(ladder.times, a, b)]
    out.table("expansion-build.csv", ["j", "n", "t", "norm_omega", "norm_dz_omega"], rows)
    k = (len(ladder.times) - 1) // 2
    seq = acc.residual_sequence(ladder, k)
    out.results = {"ladder": ladder.manifest(), "time_scales": ts.as_dict(),
                   "inductive_bounds": {f"{j},{a},{b}": v.as_dict() for (j, a, b), v in bounds.items()},
                   "residual": seq}
    out.check(acc.judge_ladder(acc.support_law_violations(ladder), acc.q_oracle_errors(sol), bounds))
    out.check(acc.judge_residual(seq))


def cmd_nonlin_run(cfg: RunConfig, out: Output, args) -> None:
    prof, sol = acc.reference_mode(cfg)
    ts = acc.time_scales(replace(cfg, expansion=replace(cfg.expansion, p_exp=int(cfg.nonlin.p_exp))), sol)
    zero, seeded = acc.nonlinear_runs(cfg, prof, sol)
    rate = seeded.running_rate()
    out.table("nonlin-run.csv", ["t", "v_sup", "w_sup", "triple_norm", "tail_ratio", "growth_rate"],
              zip(seeded.t, seeded.v_sup, seeded.w_sup, seeded.triple, seeded.tail_ratio, rate))
    res = acc.judge_nonlinear(zero, seeded, ts.T_1, cfg.nonlin.theta0)
    out.results = {"mode": sol.summary(), "time_scales": ts.as_dict(), **res.metrics}
    out.check(res)


def cmd_report(cfg: RunConfig, out: Output, args) -> None:
    found: dict[str, dict] = {}
    sources: dict[str, str] = {}
    for path in sorted(out.root.glob("*.json")):
        if path.name == "report.json":
            continue
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError:
            continue
        for key, chk in doc.get("checks", {}).items():
            if key.isdigit():
                found[key] = chk
                sources[key] = path.name
    entries = {}
    for n, name in acc.NAMES.items():
        chk = found.get(str(n))
        status = "missing" if chk is None else ("pass" if chk["passed"] else "fail")
        entries[str(n)] = {"name": name, "status": status, "source": sources.get(str(n)),
                           "detail": None if chk is None else chk["detail"]}
        out.lines.append(f"[{status.upper():7s}] criterion {n:2d} ({name})"
                         + ("" if chk is None else f": {chk['detail']}"))
    out.results = {"criteria": entries,
                   "counts": {s: sum(e["status"] == s for e in entries.values())
                              for s in ("pass", "fail", "missing")}}
    for key, e in entries.items():
        if e["status"] == "fail":
            out.checks[key] = {"name": e["name"], "passed": False, "detail": e["detail"]}


COMMANDS = {
    "profile-check": (cmd_profile_check, "validate the configured shear profile"),
    "rayleigh-scan": (cmd_rayleigh_scan, "inviscid spectra of the built-in profiles (criterion 4)"),
    "os-scan": (cmd_os_scan, "leading Orr-Sommerfeld modes and spectral/FD agreement (criterion 5)"),
    "gamma0": (cmd_gamma0, "maximal growth over the viscosity lattice (criteria 1, 2)"),
    "neutral-curve": (cmd_neutral_curve, "lower and upper neutral branches (criterion 3)"),
    "mode-structure": (cmd_mode_structure, "sublayer and critical-layer widths (criterion 12)"),
    "semigroup-verify": (cmd_semigroup_verify, "empirical semigroup bounds (criterion 8)"),
    "elliptic-verify": (cmd_elliptic_verify, "elliptic estimates and norm calculus (criteria 6, 7)"),
    "expansion-build": (cmd_expansion_build, "mode ladder and residual (criteria 9, 10)"),
    "nonlin-run": (cmd_nonlin_run, "nonlinear instability experiment (criterion 11)"),
    "report": (cmd_report, "aggregate all result files into one acceptance summary"),
}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--workers", type=int, help="worker threads for scans")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--profile", help="profile name (exponential, erf, shear-layer)")
    common.add_argument("--nu", type=float, help="viscosity")
    common.add_argument("--alpha", type=float, help="wavenumber (default: most unstable)")
    common.add_argument("--N", type=int, dest="grid_N", help="grid size")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config field, e.g. --set expansion.M=2")
    p = argparse.ArgumentParser(prog="blinstab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"blinstab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    pairs = [("workers", args.workers), ("seed", args.seed), ("profile.name", args.profile),
             ("nu", args.nu), ("alpha", args.alpha), ("grid.N", args.grid_N)]
    for key, val in pairs:
        if val is not None:
            cfg = apply_override(cfg, key, json.dumps(val))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "override must have the form KEY=VALUE")
        key, raw = item.split("=", 1)
        cfg = apply_override(cfg, key.strip(), raw.strip())
    return cfg


def output_root(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        root = output_root(args, cfg)
        out = Output(root, args.command, cfg)
        COMMANDS[args.command][0](cfg, out, args)
        path = out.commit()
    except BlinstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for line in out.lines:
        print(line)
    print(f"wrote {path}")
    return 0 if out.passed else 1


if __name__ == "__main__":
    sys.exit(main())
