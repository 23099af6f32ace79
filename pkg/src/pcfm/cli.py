"""Command-line front end: profiles, fits, NLI runs, oracle runs and comparisons.

All tabular output is CSV with a header row and fixed float formatting, so
identical inputs give byte-identical data files.  Wall-clock timings go to
manifest.json only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, engine, kernels
from .domain import KM, LumpedLoss, load_scenario_file
from .errors import PcfmError
from .oracle import OracleSettings
from .polyfit import DEFAULT_DEGREE, MAX_DEGREE, coeffs_table, eval_poly_spp, fit_spp
from .spp import emit_profile_table, emit_spp

logger = logging.getLogger("pcfm")

EXIT_CODES = {
    0: "success",
    1: "unexpected library error",
    2: "usage error (bad flags or arguments)",
    3: "configuration parse error",
    4: "scenario validation error",
    5: "malformed tabular input (external SPP)",
    6: "numerical failure (accuracy, convergence, singular dispersion)",
    7: "file system error (missing or unreadable input, unwritable output)",
    8: "cancelled",
}

ENV_VARS = {
    "scenario": "PCFM_SCENARIO",
    "out": "PCFM_OUT",
    "threads": "PCFM_THREADS",
    "seed": "PCFM_SEED",
    "log_level": "PCFM_LOG_LEVEL",
    "degree": "PCFM_DEGREE",
    "kernel": "PCFM_KERNEL",
    "rel_tol": "PCFM_ORACLE_REL_TOL",
}


def _epilog():
    codes = "\n".join(f"  {k}  {v}" for k, v in EXIT_CODES.items())
    env = "\n".join(f"  {v:<22} default for --{k.replace('_', '-')}" for k, v in ENV_VARS.items())
    return f"exit codes:\n{codes}\n\nenvironment overrides (flags win):\n{env}"


def _env(name, default, cast=str):
    raw = os.environ.get(ENV_VARS[name])
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        print(f"error: bad value {raw!r} in {ENV_VARS[name]}", file=sys.stderr)
        raise SystemExit(2) from None


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 0 or v > MAX_DEGREE for v in vals):
        raise argparse.ArgumentTypeError(f"degrees must lie in 0..{MAX_DEGREE}")
    return vals


_LUMPED_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*dB\s*@\s*([0-9.eE+-]+)\s*km\s*$")


def _lumped(text):
    m = _LUMPED_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected <loss>dB@<z>km, e.g. 2dB@5km, got {text!r}")
    return LumpedLoss(z=float(m.group(2)) * KM, loss_dB=float(m.group(1)))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--scenario", default=_env("scenario", None), help="scenario JSON file")
    g.add_argument("--out", default=_env("out", "pcfm_out"), help="output directory (created if missing)")
    g.add_argument("--threads", type=int, default=_env("threads", 1, int), help="worker threads for per-CUT work")
    g.add_argument("--seed", type=int, default=_env("seed", 0, int),
                   help="seed recorded in the manifest for randomized scenarios")
    g.add_argument("--log-level", default=_env("log_level", "WARNING"),
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    g.add_argument("--lumped-loss", type=_lumped, action="append", default=[], metavar="LOSS@Z",
                   help="add a lumped loss to every span, e.g. 2dB@5km (repeatable)")

    parser = argparse.ArgumentParser(prog="pcfm", description="Polynomial closed-form NLI estimation.",
                                     epilog=_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"pcfm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_, epilog=_epilog(),
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("profile", "emit sampled spatial power profiles (spp.csv)")
    p.add_argument("--fit-degree", type=_int_list, default=None, help="comma-separated fit degrees, e.g. 3,5,9")
    p.add_argument("--emit-fit", action="store_true", help="also write fitted curves on the sample grid")

    p = add("fit", "fit polynomial profiles and write their coefficients")
    p.add_argument("--degree", type=_int_list, default=[_env("degree", DEFAULT_DEGREE, int)])

    p = add("nli", "closed-form NLI and NLI-only GSNR per channel")
    p.add_argument("--degree", type=int, default=_env("degree", DEFAULT_DEGREE, int), choices=range(MAX_DEGREE + 1),
                   metavar=f"0..{MAX_DEGREE}")
    p.add_argument("--kernel", default=_env("kernel", "auto"), choices=["auto", "closed", "semianalytic"])

    p = add("oracle", "numerically integrated reference NLI on the sampled profiles")
    p.add_argument("--rel-tol", type=float, default=_env("rel_tol", 1e-5, float))

    p = add("compare", "per-channel NLI error of the closed forms against the oracle, per degree")
    p.add_argument("--degrees", type=_int_list, default=[1, 3, 5, 7, 9])
    p.add_argument("--kernel", default=_env("kernel", "auto"), choices=["auto", "closed", "semianalytic"])
    p.add_argument("--rel-tol", type=float, default=_env("rel_tol", 1e-5, float))
    return parser


class _Run:
    """Output directory, artifact list and stage timings for one invocation."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []
        self.timings = {}
        self.diagnostics = []

    def write(self, name, text):
        (self.out / name).write_text(text)
        self.artifacts.append(name)

    def stage(self, name, seconds):
        self.timings[name] = self.timings.get(name, 0.0) + seconds

    def manifest(self, status="ok"):
        data = {
            "tool": "pcfm",
            "version": __version__,
            "command": self.args.command,
            "scenario": self.args.scenario,
            "argv": self.argv,
            "options": {k: _jsonable(v) for k, v in sorted(vars(self.args).items())},
            "output_dir": str(self.out),
            "status": status,
            "timings_s": self.timings,
            "diagnostics": self.diagnostics,
            "artifacts": sorted(self.artifacts + ["manifest.json"]),
        }
        (self.out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _jsonable(v):
    if isinstance(v, LumpedLoss):
        return f"{v.loss_dB:g}dB@{v.z / KM:g}km"
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _load(run):
    t = time.perf_counter()
    scenario = load_scenario_file(run.args.scenario)
    if run.args.lumped_loss:
        spans = tuple(replace(s, spp_spec=replace(s.spp_spec, lumped=s.spp_spec.lumped + tuple(run.args.lumped_loss)))
                      for s in scenario.spans)
        scenario = replace(scenario, spans=spans)
    run.stage("load", time.perf_counter() - t)
    t = time.perf_counter()
    profiles = engine.link_profiles(scenario)
    run.stage("profile", time.perf_counter() - t)
    for s, spp in enumerate(profiles):
        run.diagnostics.extend(f"span {s}: {w}" for w in spp.warnings)
    return scenario, profiles


def _span_name(stem, s, n, ext="csv"):
    return f"{stem}.{ext}" if n == 1 else f"{stem}_span{s}.{ext}"


def cmd_profile(run):
    scenario, profiles = _load(run)
    n = len(profiles)
    for s, spp in enumerate(profiles):
        run.write(_span_name("spp", s, n), emit_spp(spp))
        for d in run.args.fit_degree or []:
            t = time.perf_counter()
            fits = fit_spp(spp, d)
            run.stage("fit", time.perf_counter() - t)
            run.diagnostics.extend(f"span {s} ch {i} degree {d}: {w}" for i, f in fits.items() for w in f.warnings)
            if run.args.emit_fit:
                curves = np.array([eval_poly_spp(fits[i], spp.z) for i in spp.channel_indices])
                run.write(_span_name(f"spp_fit_deg{d}", s, n),
                          emit_profile_table(spp.z, curves, spp.channel_indices))


def cmd_fit(run):
    scenario, profiles = _load(run)
    n = len(profiles)
    for s, spp in enumerate(profiles):
        for d in run.args.degree:
            t = time.perf_counter()
            fits = fit_spp(spp, d)
            run.stage("fit", time.perf_counter() - t)
            run.write(_span_name(f"coeffs_deg{d}", s, n), coeffs_table(fits))


def _record_guard(run, report):
    for sr in report.span_results:
        for cut, other, margin in sr.guard_failures:
            run.diagnostics.append(f"span {sr.span_index}: XCI guard fails for cut {cut} <- channel {other} "
                                   f"(margin {margin:.3g})")


def _write_report(run, stem, report):
    run.write(f"{stem}_channels.csv", engine.channel_table(report))
    run.write(f"{stem}_spans.csv", engine.span_table(report))


def cmd_nli(run):
    scenario, profiles = _load(run)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", kernels.GuardWarning)
        report = engine.run_pcfm(scenario, run.args.degree, run.args.kernel, profiles, run.args.threads)
    for k, v in report.timings.items():
        if k != "profile":
            run.stage(k, v)
    _record_guard(run, report)
    _write_report(run, "nli", report)


def _oracle(run, scenario, profiles):
    settings = OracleSettings(rel_tol=run.args.rel_tol)
    report = engine.run_oracle(scenario, settings, profiles, run.args.threads)
    run.stage("oracle", report.timings["oracle"])
    return report


def cmd_oracle(run):
    scenario, profiles = _load(run)
    report = _oracle(run, scenario, profiles)
    _record_guard(run, report)
    _write_report(run, "oracle", report)


def cmd_compare(run):
    scenario, profiles = _load(run)
    ref = _oracle(run, scenario, profiles)
    _record_guard(run, ref)
    _write_report(run, "oracle", ref)
    lines = ["degree, ch, err_dB"]
    for d in run.args.degrees:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", kernels.GuardWarning)
            rep = engine.run_pcfm(scenario, d, run.args.kernel, profiles, run.args.threads)
        run.stage("fit", rep.timings["fit"])
        run.stage("kernels", rep.timings["kernels"])
        err = engine.nli_error_db(rep, ref)
        lines += [f"{d}, {c}, {e:.6f}" for c, e in zip(rep.cut_indices, err)]
    run.write("compare.csv", "\n".join(lines) + "\n")


COMMANDS = {"profile": cmd_profile, "fit": cmd_fit, "nli": cmd_nli, "oracle": cmd_oracle, "compare": cmd_compare}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if not args.scenario:
        parser.error(f"no scenario given (--scenario or {ENV_VARS['scenario']})")
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        run = _Run(args, argv)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 7
    try:
        COMMANDS[args.command](run)
    except PcfmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.manifest(status=f"error: {type(exc).__name__}")
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.manifest(status="error: OSError")
        return 7
    for line in run.diagnostics:
        print(f"warning: {line}", file=sys.stderr)
    run.manifest()
    return 0


if __name__ == "__main__":
    sys.exit(main())
