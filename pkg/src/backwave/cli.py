"""Command-line entry point.

Subcommands map one-to-one onto the scenario pipelines:

    validate      solver oracle gate (no config needed, defaults)
    homogeneous   scattering from radiation data
    tlimit        data-horizon Cauchy study
    weaknull      coupled weak-null system
    nullradial    radial classical null-form model
    backscatter   retarded-kernel audit
    audit         estimate audit battery
    convergence   discrete-operator refinement study

Exit codes: 0 all acceptance items pass; 1 run completed with failing
items; 2 configuration error; 3 runtime error.  A summary.json is always
written to the output directory, with an error block on failure.  The
output directory may also be set through BACKWAVE_OUT.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

from backwave.config import ConfigError, canonical_text, parse_config
from backwave.outputs import write_bundle, write_summary_json
from backwave.scenarios import (RunSpec, ScenarioError, ScenarioReport,
                                run_scenario)

SUBCOMMANDS = ("validate", "homogeneous", "tlimit", "weaknull", "nullradial",
               "backscatter", "audit", "convergence")

_SCENARIO_OF = {
    "validate": "free_wave",
    "homogeneous": "homogeneous",
    "tlimit": "tlimit",
    "weaknull": "weaknull",
    "nullradial": "nullradial",
    "backscatter": "backscatter",
    "audit": "audit",
    "convergence": "convergence",
}

EXIT_PASS = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="backwave",
        description="Backward-from-infinity wave scattering runs and estimate audits.",
        epilog="Config keys and defaults: see README (sections [run], [data.F0], "
               "[data.G0], [grid], [params], [acceptance]).")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", metavar="PATH",
                   help="run configuration file (required except for 'validate')")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="output bundle directory (default: ./out_<command>; "
                        "env override: BACKWAVE_OUT)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker hint for independent sub-runs (outputs are "
                        "bit-identical for any value)")
    p.add_argument("--seed", type=int, default=None,
                   help="seed recorded for any randomized sampling")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching the config-error code
        return EXIT_CONFIG if exc.code else EXIT_PASS

    out_dir = args.out or os.environ.get("BACKWAVE_OUT") or f"out_{args.command}"
    config_text = None
    try:
        if args.command == "validate":
            spec = RunSpec(scenario="free_wave")
        else:
            if not args.config:
                print(f"error: --config is required for '{args.command}'", file=sys.stderr)
                parser.print_usage(sys.stderr)
                return EXIT_CONFIG
            try:
                with open(args.config, encoding="utf-8") as fh:
                    raw = fh.read()
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            spec = parse_config(raw)
            spec.scenario = _SCENARIO_OF[args.command]
            spec.validate()
            config_text = canonical_text(spec)
        spec.threads = max(args.threads, 1)
        if args.seed is not None:
            spec.seed = args.seed
    except (ConfigError, ScenarioError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run_scenario(spec)
    except Exception as exc:  # runtime failure: still write a summary
        os.makedirs(out_dir, exist_ok=True)
        fail = ScenarioReport(name=spec.scenario, spec={}, status="error",
                              error=f"{type(exc).__name__}: {exc}")
        write_summary_json(fail, os.path.join(out_dir, "summary.json"),
                           config_text=config_text, error=str(exc))
        if not args.quiet:
            traceback.print_exc()
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    payload = write_bundle(report, out_dir, config_text=config_text)
    if not args.quiet:
        print(f"scenario: {report.name}  status: {payload['status']}")
        for it in report.items:
            flag = "PASS" if it.passed else "FAIL"
            tgt = "" if it.target is None else f" target={it.target:g}"
            tol = "" if it.tol is None else f" tol={it.tol:g}"
            print(f"  [{flag}] {it.name}: measured={it.measured:.6g}{tgt}{tol}")
        print(f"bundle: {out_dir}")
    if report.status != "ok":
        return EXIT_RUNTIME
    return EXIT_PASS if report.passed else EXIT_FAILURES


def console_entry():
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    console_entry()
