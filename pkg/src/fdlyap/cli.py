"""Command-line entry point: ``fdlyap {list-presets,run-preset,run-config,verify}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigSyntaxError, SchemaError, loads, with_overrides
from .loop import LoopError
from .presets import PRESETS, UnknownPresetError, get_preset, run_preset, run_single
from .quantum import PhysicsError

log = logging.getLogger("fdlyap")

EXIT_OK = 0
EXIT_FAILED = 1  # invariant violation, failed criterion, aborted run
EXIT_USAGE = 2  # unknown preset, bad arguments
EXIT_JSON = 3
EXIT_SCHEMA = 4
EXIT_PHYSICS = 5
EXIT_IO = 6


def _out_dir(args) -> str:
    return args.out or os.environ.get("FDLYAP_OUT") or "fdlyap-out"


def _prepare(out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir!r} is not writable")


def cmd_list(args) -> int:
    for name, p in PRESETS.items():
        print(f"{name:16s} {p.description}")
    return EXIT_OK


def cmd_run_preset(args) -> int:
    try:
        get_preset(args.name)
    except UnknownPresetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args)
    _prepare(out)
    report, ok = run_preset(
        args.name, out, seed=args.seed, steps=args.steps, shots=args.shots, eta_max=args.eta_max,
        figures=not args.no_figures,
    )
    print(json.dumps({k: v for k, v in report.items() if k != "runs"}, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_FAILED


def cmd_run_config(args) -> int:
    with open(args.path, encoding="utf-8") as fh:
        text = fh.read()
    resolved = with_overrides(loads(text), steps=args.steps, seed=args.seed, shots=args.shots, eta_max=args.eta_max)
    doc = json.loads(text)
    preset_name = doc.get("preset") if isinstance(doc, dict) else None
    plan = ("descent", "plateau", "iss")
    if preset_name in PRESETS and not PRESETS[preset_name].sweep_param:
        plan = PRESETS[preset_name].analysis_plan
    else:
        preset_name = None
    out = _out_dir(args)
    _prepare(out)
    report, ok = run_single(resolved, out, plan, preset_name, figures=not args.no_figures)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_FAILED


def cmd_verify(args) -> int:
    from .verify import Suite

    out = _out_dir(args)
    _prepare(out)
    suite = Suite(substeps=args.substeps)
    results = suite.run_all(echo=print)
    passed = all(c.passed for c in results)
    with open(os.path.join(out, "verify-report.json"), "w", encoding="utf-8") as fh:
        json.dump({"passed": passed, "criteria": [c.to_dict() for c in results]}, fh, indent=2, default=float)
        fh.write("\n")
    print(f"{sum(c.passed for c in results)}/{len(results)} criteria passed")
    return EXIT_OK if passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: $FDLYAP_OUT or ./fdlyap-out)")
    common.add_argument("-v", "--verbose", action="store_true")

    runopts = argparse.ArgumentParser(add_help=False)
    runopts.add_argument("--seed", type=int)
    runopts.add_argument("--steps", type=int)
    runopts.add_argument("--shots", type=int, help="switch the observable to shot-noise mode with this many shots")
    runopts.add_argument("--eta-max", type=float, help="switch the observable to bounded-noise mode")
    runopts.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    parser = argparse.ArgumentParser(prog="fdlyap", description="Model-free finite-difference Lyapunov stabilization")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("list-presets", parents=[common], help="list shipped experiments")
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("run-preset", parents=[common, runopts], help="run a shipped experiment")
    p.add_argument("name")
    p.set_defaults(func=cmd_run_preset)
    p = sub.add_parser("run-config", parents=[common, runopts], help="run a JSON config or run-metadata file")
    p.add_argument("path")
    p.set_defaults(func=cmd_run_config)
    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--substeps", type=int, default=64, help="RK4 substeps used by the integrator criterion")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigSyntaxError as exc:
        print(f"config error (JSON): {exc}", file=sys.stderr)
        return EXIT_JSON
    except SchemaError as exc:
        print(f"config error (schema): {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except PhysicsError as exc:
        print(f"physics invariant violated: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except LoopError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
