"""Command-line runner: configuration, artifacts and pass/fail reporting.

Usage::

    bgboltz {lemmas,spectrum,semigroup,heat,chi1,all} [--config PATH] [--out DIR]
            [--jobs N] [--no-cache] [--strict]
    bgboltz diff REPORT_A REPORT_B

Exit status: 0 when every gating verdict passes, 1 when one fails, 2 for a
configuration error and 3 for a numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import platform
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checks
from .chi_experiment import ChiConfig, CrossCheckError
from .collision import QuadratureError
from .fitting import FitError
from .grid import ConfigError
from .maxwell import DomainError, MaxwellianParams
from .semigroup import SemigroupError
from .spectrum import TrackingError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("lemmas", "spectrum", "semigroup", "heat", "chi1", "all")
ORDER = ("heat", "lemmas", "spectrum", "semigroup", "chi1")
NUMERIC_ERRORS = (FitError, CrossCheckError, TrackingError, SemigroupError, QuadratureError,
                  DomainError, np.linalg.LinAlgError, FloatingPointError)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    return tuple(float(x) for x in v.replace(",", " ").split())


SCHEMA = {
    "run": {"seed": int, "jobs": int, "cache": _bool},
    "grid": {"n_speed": int, "n_cosine": int, "s_max": float},
    "model": {"gamma": float, "cross_section": str},
    "background": {"rho": float, "mu": float, "lam": float},
    "heat": {"drift": float, "lam": float, "window_start": float, "window_end": float,
             "slope_tolerance": float},
    "spectrum": {"refine": _bool},
    "semigroup": {"window_start": float, "window_end": float},
    "chi1": {"n_speed": int, "n_cosine": int, "max_sector": int, "n_theta": int, "beta": float,
             "epsilon": float, "t_max": float, "window_start": float, "window_end": float,
             "datum": str, "linearity": _bool, "scales": _floats,
             "linearity_components": _bool},
}


def read_config(path=None):
    """Parse an INI file into a nested dict of typed values.

    Raises :class:`ConfigError` naming the offending ``section.key``.
    """
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
    out = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        out[sec] = {}
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            try:
                out[sec][key] = SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
    return out


def _window(sec, default, name):
    w = (sec.get("window_start", default[0]), sec.get("window_end", default[1]))
    if not (w[0] > 0 and w[1] / w[0] >= 10 - 1e-9):
        raise ConfigError(f"{name}.window_start/window_end must span at least one decade")
    return w


def settings_from_config(cfg, jobs=None, use_cache=None):
    """Build :class:`checks.Settings` from a parsed config and flag overrides."""
    d = checks.Settings()
    run = cfg.get("run", {})
    grid = cfg.get("grid", {})
    model = cfg.get("model", {})
    bg = cfg.get("background", {})
    ht = cfg.get("heat", {})
    sg = cfg.get("semigroup", {})
    sp = cfg.get("spectrum", {})
    ch = cfg.get("chi1", {})
    env_jobs = os.environ.get("BGBOLTZ_JOBS")
    n_jobs = jobs if jobs is not None else (int(env_jobs) if env_jobs else run.get("jobs", d.jobs))
    if n_jobs < 1:
        raise ConfigError("run.jobs must be positive")
    try:
        b = MaxwellianParams(bg.get("rho", d.b.rho), bg.get("mu", d.b.mu_axial),
                             bg.get("lam", d.b.lam))
    except ConfigError as exc:
        raise ConfigError(f"background: {exc}") from exc
    tol = ht.get("slope_tolerance", d.heat_slope_tol)
    if not tol > 0:
        raise ConfigError("heat.slope_tolerance must be positive")
    for sec, key in (("grid", "n_speed"), ("grid", "n_cosine"), ("chi1", "n_speed"), ("chi1", "n_cosine")):
        if cfg.get(sec, {}).get(key, 4) < 4:
            raise ConfigError(f"{sec}.{key} must be at least 4")
    gamma = model.get("gamma", d.gamma)
    xs = model.get("cross_section", d.cross_section)
    try:
        chi_cfg = ChiConfig(
            b=b, gamma=gamma, cross_section=xs,
            beta=ch.get("beta", d.chi.beta), epsilon=ch.get("epsilon", d.chi.epsilon),
            n_speed=ch.get("n_speed", d.chi.n_speed), n_cosine=ch.get("n_cosine", d.chi.n_cosine),
            max_sector=ch.get("max_sector", d.chi.max_sector),
            n_theta=ch.get("n_theta", d.chi.n_theta), t_max=ch.get("t_max", d.chi.t_max),
            window=_window(ch, d.chi.window, "chi1"), datum=ch.get("datum", d.chi.datum))
    except ConfigError as exc:
        raise ConfigError(f"chi1: {exc}") from exc
    st = replace(d, seed=run.get("seed", d.seed), jobs=n_jobs,
                 use_cache=run.get("cache", d.use_cache) if use_cache is None else use_cache,
                 n_speed=grid.get("n_speed", d.n_speed), n_cosine=grid.get("n_cosine", d.n_cosine),
                 s_max=grid.get("s_max", d.s_max), gamma=gamma, cross_section=xs, b=b,
                 heat_drift=ht.get("drift", d.heat_drift), heat_lam=ht.get("lam", d.heat_lam),
                 heat_window=_window(ht, d.heat_window, "heat"), heat_slope_tol=tol,
                 semigroup_window=_window(sg, d.semigroup_window, "semigroup"), chi=chi_cfg,
                 linearity_scales=ch.get("scales", d.linearity_scales),
                 linearity_components=ch.get("linearity_components", d.linearity_components),
                 refine=sp.get("refine", d.refine))
    return st


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12e" % float(v)
    if isinstance(v, complex):
        return "%.12e%+.12ej" % (v.real, v.imag)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(type(v))


def gating(verdict, strict):
    return strict or not verdict.exploratory


def build_report(results, st, strict):
    verdicts = [v for r in results for v in r.verdicts]
    gate = [v for v in verdicts if gating(v, strict)]
    return {
        "schema_version": SCHEMA_VERSION,
        "experiments": [r.name for r in results],
        "strict": bool(strict),
        "seed": st.seed,
        "settings": {"grid": [st.n_speed, st.n_cosine, st.s_max], "gamma": st.gamma,
                     "cross_section": st.cross_section,
                     "background": [st.b.rho, list(st.b.mu), st.b.lam]},
        "verdicts": sorted((v.to_dict() for v in verdicts), key=lambda d: d["check_id"]),
        "all_passed": all(v.passed for v in gate),
    }


def summary_text(report):
    lines = []
    for v in report["verdicts"]:
        tag = "PASS" if v["passed"] else "FAIL"
        if v["exploratory"] and not report["strict"]:
            tag += " (exploratory)"
        lines.append(f"[{tag}] C{v['criterion']:>2} {v['check_id']}: measured={_short(v['measured'])}"
                     f" predicted={_short(v['predicted'])} tol={_short(v['tolerance'])}"
                     f"  {v['note']}")
    lines.append("overall: " + ("PASS" if report["all_passed"] else "FAIL"))
    return "\n".join(lines) + "\n"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def write_artifacts(out, results, report, started):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        for name, (header, rows) in sorted(r.tables.items()):
            write_csv(out / f"{name}.csv", header, rows)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1, default=_json_default)
        fh.write("\n")
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(summary_text(report))
    meta = {"started": started, "finished": time.time(), "python": platform.python_version(),
            "numpy": np.__version__}
    with open(out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)


# --------------------------------------------------------------------------
# report comparison
# --------------------------------------------------------------------------

class SchemaError(ValueError):
    pass


def report_diff(report_a, report_b):
    """Field-wise differences of two reports, one line per changed field."""
    va, vb = report_a.get("schema_version"), report_b.get("schema_version")
    if va != vb:
        raise SchemaError(f"schema version mismatch: {va} vs {vb}")
    a = {v["check_id"]: v for v in report_a.get("verdicts", [])}
    b = {v["check_id"]: v for v in report_b.get("verdicts", [])}
    lines = []
    for cid in sorted(set(a) | set(b)):
        if cid not in a:
            lines.append(f"+ {cid}")
        elif cid not in b:
            lines.append(f"- {cid}")
        else:
            for key in sorted(set(a[cid]) | set(b[cid])):
                if a[cid].get(key) != b[cid].get(key):
                    lines.append(f"~ {cid}.{key}: {a[cid].get(key)!r} -> {b[cid].get(key)!r}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def run(command, st, out, strict=False, linearity=True):
    """Run one experiment (or all) and write the artifacts; returns the exit code."""
    started = time.time()
    names = ORDER if command == "all" else (command,)
    results = []
    for name in names:
        if name == "chi1":
            results.append(checks.run_chi1(st, linearity=linearity))
        else:
            results.append(checks.EXPERIMENTS[name](st))
    report = build_report(results, st, strict)
    write_artifacts(out, results, report, started)
    sys.stdout.write(summary_text(report))
    return EXIT_OK if report["all_passed"] else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="bgboltz", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS + ("diff",))
    p.add_argument("reports", nargs="*", help="two report.json files for 'diff'")
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--out", help="output directory (default ./bgboltz-out)")
    p.add_argument("--jobs", type=int, help="worker threads for wavenumber sweeps")
    p.add_argument("--no-cache", action="store_true", help="reassemble collision matrices")
    p.add_argument("--strict", action="store_true", help="exploratory checks become gating")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "diff":
        if len(args.reports) != 2:
            sys.stderr.write("diff needs two report files\n")
            return EXIT_CONFIG
        try:
            a, b = (json.loads(Path(p).read_text(encoding="utf-8")) for p in args.reports)
            text = report_diff(a, b)
        except (OSError, ValueError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_CONFIG
        if text:
            sys.stdout.write(text + "\n")
        return EXIT_OK if not text else EXIT_FAIL
    try:
        cfg = read_config(args.config)
        st = settings_from_config(cfg, jobs=args.jobs,
                                  use_cache=False if args.no_cache else None)
        linearity = cfg.get("chi1", {}).get("linearity", True)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    out = args.out or os.environ.get("BGBOLTZ_OUT") or "bgboltz-out"
    try:
        return run(args.command, st, out, args.strict, linearity)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        traceback.print_exc(file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
