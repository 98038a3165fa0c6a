"""
Command-line front end.

Subcommands: solve, convergence, infsup, spectral, condtable, perf.
Options can also come from a JSON file (``--config``); flags given on the
command line win. Results go to ``--out`` (stdout by default) as CSV or JSON; the format
follows ``--format``, then the file extension, then the subcommand
(JSON reports for solve and perf, CSV tables otherwise).

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(a ``solve`` run that hits ``maxit``, or a failed level in a study).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, fields

from . import experiments as ex
from .problems import PROBLEMS, check_consistency, gaussian_1d, high_mode_1d, traveling_wave

__all__ = ["RunConfig", "ConfigError", "build_parser", "load_config", "run", "main"]

log = logging.getLogger("kronschro")

SUBCOMMANDS = ("solve", "convergence", "infsup", "spectral", "condtable", "perf")

SCHEMAS = {
    "solve": ("problem", "p", "nel", "Ndof", "iters", "converged", "residual", "errL2", "errV",
              "setup_s", "solve_s"),
    "convergence": ("h", "Ndof", "errL2", "errV", "order"),
    "condtable": ("p", "nel", "kappa2"),
    "perf": ("problem", "p", "nel", "prec", "iters", "setup_s", "solve_s", "converged"),
    "infsup": ("method", "p", "nel", "alpha"),
    "spectral": ("kind", "p", "nel", "lambda_min", "lambda_max"),
}
TIMING_FIELDS = ("setup_s", "solve_s")

DEFAULTS = {
    "solve": dict(problem="gaussian1d", p=[3], nel=[16]),
    "convergence": dict(problem="gaussian1d", p=[3], nel=[8, 16, 32, 64]),
    "infsup": dict(p=[2], nel=[8, 16, 32, 64]),
    "spectral": dict(p=[2, 3, 4], nel=[8, 16, 32, 64, 128]),
    "condtable": dict(p=[2, 3, 4, 5, 6, 7, 8], nel=[32, 64, 128, 256]),
    "perf": dict(problem="wave2d", p=[2], nel=[8, 16, 32]),
}


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass
class RunConfig:
    subcommand: str
    problem: str | None = None
    d: int | None = None
    p: list | None = None
    nel: list | None = None
    T: float | None = None
    nu: float | None = None
    tol: float | None = None
    maxit: int = 200
    prec: str = "fd"
    out: str | None = None
    format: str | None = None
    seed: int = 0
    threads: int | None = None
    method: list | None = None
    kind: list | None = None
    strict: bool = False

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        for key, val in DEFAULTS[self.subcommand].items():
            if getattr(self, key) is None:
                setattr(self, key, val)
        if self.problem is not None and self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        for name in ("p", "nel"):
            vals = getattr(self, name)
            if not vals or any(not isinstance(v, int) or v <= 0 for v in vals):
                raise ConfigError(f"{name} must be a non-empty list of positive integers")
        for name in ("T", "nu", "tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.maxit <= 0:
            raise ConfigError("maxit must be positive")
        if self.d is not None and self.d not in (1, 2, 3):
            raise ConfigError("d must be 1, 2 or 3")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads is not None and self.threads < 0:
            raise ConfigError("threads must be >= 0 (0 = auto)")
        if self.prec not in ("fd", "none"):
            raise ConfigError("prec must be 'fd' or 'none'")
        if self.format is None:
            ext = os.path.splitext(self.out or "")[1].lower()
            if ext in (".csv", ".json"):
                self.format = ext[1:]
            else:
                self.format = "json" if self.subcommand in ("solve", "perf") else "csv"
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        self.method = self.method or ["least_squares", "galerkin"]
        if any(m not in ("least_squares", "galerkin") for m in self.method):
            raise ConfigError("method must be least_squares and/or galerkin")
        self.kind = self.kind or ["space", "time"]
        if any(k not in ("space", "time") for k in self.kind):
            raise ConfigError("kind must be space and/or time")
        return self


# --------------------------------------------------------------------------
# parsing

def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="kronschro", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with run options")
        sp.add_argument("--problem", choices=sorted(PROBLEMS))
        sp.add_argument("--d", type=int)
        sp.add_argument("--p", type=_int_list, help="degree(s), e.g. 2,3,4")
        sp.add_argument("--nel", type=_int_list, help="elements per direction, e.g. 8,16,32")
        sp.add_argument("--T", type=float)
        sp.add_argument("--nu", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--maxit", type=int)
        sp.add_argument("--prec", choices=("fd", "none"))
        sp.add_argument("--strict", action="store_true", default=None,
                        help="check the true residual every CG iteration")
        sp.add_argument("--method", type=_str_list, help="least_squares,galerkin")
        sp.add_argument("--kind", type=_str_list, help="space,time")
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="BLAS threads (0 = auto)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in fields(RunConfig)} - {"subcommand"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key in ("p", "nel", "method", "kind"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    return data


def config_from_args(argv):
    args = build_parser().parse_args(argv)
    if args.subcommand is None:
        raise ConfigError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
    opts = load_config(args.config) if args.config else {}
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None and f.name != "subcommand":
            opts[f.name] = val
    try:
        cfg = RunConfig(subcommand=args.subcommand, **opts)
    except TypeError as exc:
        raise ConfigError(str(exc))
    if cfg.threads is None and os.environ.get("KRONSCHRO_THREADS"):
        try:
            cfg.threads = int(os.environ["KRONSCHRO_THREADS"])
        except ValueError:
            raise ConfigError("KRONSCHRO_THREADS must be an integer")
    try:
        return cfg.validate(), bool(args.verbose)
    except TypeError as exc:
        raise ConfigError(f"malformed option value: {exc}")


# --------------------------------------------------------------------------
# commands

def _exact(cfg):
    name = cfg.problem
    kw = {k: v for k, v in (("T", cfg.T), ("nu", cfg.nu)) if v is not None}
    if name == "highmode1d":
        if kw.pop("nu", 1.0) != 1.0:
            raise ConfigError("highmode1d is defined for nu = 1 only")
        if cfg.d not in (None, 1):
            raise ConfigError("highmode1d is one-dimensional")
        return high_mode_1d(**kw)
    if name == "gaussian1d":
        if cfg.d not in (None, 1):
            raise ConfigError("gaussian1d is one-dimensional")
        return gaussian_1d(**kw)
    return traveling_wave(d=cfg.d or 2, **kw)


def _tol(cfg, default):
    return cfg.tol if cfg.tol is not None else default


def cmd_solve(cfg):
    exact = _exact(cfg)
    rows, ok = [], True
    for p in cfg.p:
        for n in cfg.nel:
            sol = ex.solve(exact, p, n, tol=_tol(cfg, 1e-8), maxit=cfg.maxit,
                           preconditioner=cfg.prec, strict=cfg.strict)
            rep = sol.report
            ok &= rep.converged
            l2, ev = ex.error_norms(sol.problem, sol.coeffs, exact)
            rows.append(dict(problem=exact.name, p=p, nel=n, Ndof=sol.problem.N_dof,
                             iters=rep.iterations, converged=rep.converged,
                             residual=rep.final_residual, errL2=l2, errV=ev,
                             setup_s=sol.setup_time, solve_s=rep.timings["solve"]))
    extra = {}
    if exact.moments is None:
        extra["data_consistency"] = check_consistency(exact, seed=cfg.seed)
    return rows, (0 if ok else 3), extra


def cmd_convergence(cfg):
    exact = _exact(cfg)
    default_tol = 1e-8 if exact.moments is not None else 1e-12
    rows = []
    for p in cfg.p:
        recs = ex.convergence_study(exact, p, cfg.nel, tol=_tol(cfg, default_tol),
                                    maxit=cfg.maxit)
        rows.extend(r.as_row() for r in recs)
    return rows, 0, {}


def cmd_infsup(cfg):
    rows = []
    for m in cfg.method:
        for p in cfg.p:
            for n in cfg.nel:
                a = ex.infsup_constant(m, p, n, T=cfg.T or 1.0, nu=cfg.nu or 1.0)
                rows.append(dict(method=m, p=p, nel=n, alpha=a))
    return rows, 0, {}


def cmd_spectral(cfg):
    rows = []
    for kind in cfg.kind:
        for p in cfg.p:
            for n in cfg.nel:
                if kind == "space":
                    ev = ex.spectral_equivalence_space(p, n, d=cfg.d or 1)
                else:
                    ev = ex.spectral_equivalence_time(p, n)
                rows.append(dict(kind=kind, p=p, nel=n, lambda_min=float(ev.min()),
                                 lambda_max=float(ev.max())))
    return rows, 0, {}


def cmd_condtable(cfg):
    return ex.condition_table(cfg.p, cfg.nel), 0, {}


def cmd_perf(cfg):
    exact = _exact(cfg)
    rows = []
    for p in cfg.p:
        for n in cfg.nel:
            _, row = ex.performance_run(exact, p, n, preconditioner=cfg.prec,
                                        tol=_tol(cfg, 1e-8), maxit=cfg.maxit, strict=cfg.strict)
            rows.append(row)
    return rows, 0, {}


COMMANDS = dict(solve=cmd_solve, convergence=cmd_convergence, infsup=cmd_infsup,
                spectral=cmd_spectral, condtable=cmd_condtable, perf=cmd_perf)


# --------------------------------------------------------------------------
# output

def _plain(v):
    if hasattr(v, "item"):
        v = v.item()
    return v


def format_rows(cfg, rows, extra=None):
    cols = SCHEMAS[cfg.subcommand]
    rows = [{c: _plain(r.get(c)) for c in cols} for r in rows]
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: ("" if v is None else repr(v) if isinstance(v, float) else v)
                        for c, v in r.items()})
        return buf.getvalue()
    for r in rows:
        if "iters" in r:
            r["iterations"] = r["iters"]
    doc = dict(subcommand=cfg.subcommand, rows=rows)
    if cfg.problem is not None:
        doc["problem"] = cfg.problem
    doc.update({k: _plain(v) for k, v in (extra or {}).items()})
    return json.dumps(doc, indent=2) + "\n"


def _limit_threads(n):
    if not n:
        return None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def run(argv=None):
    """Parse ``argv``, run the subcommand and write its results; returns the exit code."""
    try:
        cfg, verbose = config_from_args(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"kronschro: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    limiter = _limit_threads(cfg.threads)
    try:
        rows, code, extra = COMMANDS[cfg.subcommand](cfg)
    except ValueError as exc:
        print(f"kronschro: error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"kronschro: {exc}", file=sys.stderr)
        return 3
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    text = format_rows(cfg, rows, extra)
    if cfg.out:
        try:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"kronschro: error: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    if code == 3:
        print("kronschro: CG did not converge", file=sys.stderr)
    return code


def main():
    sys.exit(run())
