"""Command-line entry point.

    su11 run CONFIG [--out DIR] [--threads N] [--seed S]
    su11 check formulary [--out DIR]
    su11 check mc [--out DIR] [--seed S] [--samples N]

Exit codes: 0 success, 1 configuration error, 2 validation failure,
3 internal error. SU11_THREADS and SU11_OUT supply defaults for --threads and
--out.
"""

import argparse
import json
import os
import sys
import traceback

import numpy as np

from . import __version__, scenarios

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_INTERNAL = 0, 1, 2, 3


def _env_int(name):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise scenarios.ConfigError(f"{name} must be an integer, got {raw!r}",
                                    source="environment") from None
    if value < 1:
        raise scenarios.ConfigError(f"{name} must be >= 1", source="environment")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="su11", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file and write its CSV")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: $SU11_OUT or .)")
    run.add_argument("--threads", type=int, help="worker threads (default: $SU11_THREADS or 1)")
    run.add_argument("--seed", type=int, help="seed for mc-check scenarios")

    check = sub.add_parser("check", help="run a built-in validation suite")
    check.add_argument("suite", choices=["formulary", "mc"])
    check.add_argument("--out", help="also write the report CSV to this directory")
    check.add_argument("--threads", type=int)
    check.add_argument("--seed", type=int)
    check.add_argument("--samples", type=int, help="records per batch for the mc suite")
    return parser


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _report(result, paths, stream):
    status = "ok" if result.passed else "FAILED"
    print(f"{result.scenario}: {len(result.rows)} rows, {status}", file=stream)
    if result.summary:
        print(json.dumps(_jsonable(result.summary), indent=2), file=stream)
    for p in paths:
        print(f"wrote {p}", file=stream)


def _print_failures(result, stream):
    if "status" not in result.columns:
        return
    k = result.columns.index("status")
    for row in result.rows:
        if row[k] == "fail":
            print("FAIL " + ", ".join(scenarios._fmt(v) for v in row), file=stream)


def _dispatch(args, stream):
    threads = args.threads if args.threads is not None else (_env_int("SU11_THREADS") or 1)
    if threads < 1:
        raise scenarios.ConfigError("--threads must be >= 1", source="command line")
    out = args.out or os.environ.get("SU11_OUT") or None
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        raise scenarios.ConfigError("--seed must be an unsigned 64-bit integer",
                                    source="command line")

    if args.command == "run":
        cfg = scenarios.load_config(args.config)
        result = scenarios.run_scenario(cfg, threads=threads, seed=args.seed)
        paths = scenarios.write_outputs(cfg, result, out or ".")
    else:
        name = "formulary-check" if args.suite == "formulary" else "mc-check"
        cfg = scenarios.builtin_config(name)
        if args.suite == "mc":
            if args.samples is not None and args.samples < scenarios.montecarlo.MIN_SAMPLES:
                raise scenarios.ConfigError(
                    f"--samples must be >= {scenarios.montecarlo.MIN_SAMPLES}",
                    source="command line")
            result = scenarios.run_mc_check(cfg, threads, n_samples=args.samples, seed=args.seed)
        else:
            result = scenarios.run_formulary_check(cfg, threads)
        paths = scenarios.write_outputs(cfg, result, out) if out else []
    _report(result, paths, stream)
    _print_failures(result, stream)
    return EXIT_OK if result.passed else EXIT_VALIDATION


def main(argv=None, stream=None):
    """Run the CLI and return its exit code."""
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse usage errors count as config errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return _dispatch(args, stream)
    except scenarios.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:  # noqa: BLE001 - map any failure to the internal-error code
        traceback.print_exc(file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
