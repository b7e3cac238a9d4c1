"""Command line entry point: ``bergman-rays <command> --config FILE [options]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 invariant violation.  Failures write ``failure.json`` to the output
directory with the offending data.
"""
import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .config import THREADS_ENV, default_threads, load_config
from .errors import BergmanRayError, ConfigError, InvariantViolation, NumericalFailure
from .grid import write_csv, write_json
from . import pipeline

logger = logging.getLogger("bergman_rays")

COMMANDS = ("ray", "bounds", "triangular", "mass", "compare", "regularity", "moments",
            "futaki", "all")


def build_parser():
    p = argparse.ArgumentParser(prog="bergman-rays", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", action="append", required=True,
                   help="TOML run configuration (repeat for 'all')")
    p.add_argument("--out", help="output directory (default: [run] output of the config)")
    p.add_argument("--k", type=int, help="single level for 'triangular'")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--resolution", type=int,
                   help="grid cells per axis for the main grid (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit(out, cfg, payload, tables, json_name):
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in tables.items():
        write_csv(out / name, header, rows, cfg.hash)
    write_json(out / json_name, payload, cfg.hash)


def _run_one(command, cfg, args, threads):
    out = Path(args.out or cfg.output)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.resolution is not None:
        cfg.resolutions = [max(args.resolution // 2, 4), args.resolution]
    ctx = pipeline.Context(cfg, threads)
    if command == "futaki":
        payload, fx = pipeline.futaki_report(ctx)
        _emit(out, cfg, payload, {}, "futaki.json")
        print(f"F0={fx.F0} F1={fx.F1}")
        return
    reports = {
        "ray": (lambda: pipeline.ray_report(ctx), "diagnostics.json"),
        "bounds": (lambda: pipeline.bounds_report(ctx), "bounds.json"),
        "triangular": (lambda: pipeline.triangular_report(
            ctx, [args.k] if args.k is not None else None), "triangular.json"),
        "mass": (lambda: pipeline.mass_report(ctx), "mass.json"),
        "compare": (lambda: pipeline.compare_report(ctx), "compare.json"),
        "regularity": (lambda: pipeline.regularity_report(ctx), "regularity.json"),
        "moments": (lambda: pipeline.moments_report(ctx), "moments.json"),
    }
    fn, json_name = reports[command]
    payload, tables = fn()
    _emit(out, cfg, payload, tables, json_name)
    print(f"{command}: wrote {', '.join(sorted(tables) + [json_name])} to {out}")


def _failure(exc, out, chash):
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    if isinstance(exc, NumericalFailure):
        record["achieved"] = exc.achieved
    if isinstance(exc, InvariantViolation):
        record["record"] = exc.record
    print(f"error: {exc}", file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "failure.json", record, chash)
        except OSError:
            pass
    print(json.dumps(record, default=str, sort_keys=True)[:4000], file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out, chash = None, ""
    try:
        threads = args.threads if args.threads is not None else default_threads()
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", UserWarning)
            configs = [load_config(p) for p in args.config]
        if args.command == "all":
            from .acceptance import run_acceptance
            results = run_acceptance(configs, threads)
            for r in results:
                print(r.line())
            out = Path(args.out or "out/acceptance")
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "acceptance.json",
                       {"results": [{"criterion": r.number, "title": r.title,
                                     "passed": r.passed, "detail": r.detail} for r in results]},
                       "+".join(c.hash for c in configs))
            return 0 if all(r.passed for r in results) else 3
        if len(configs) != 1:
            raise ConfigError(f"'{args.command}' takes exactly one --config")
        cfg = configs[0]
        out, chash = Path(args.out or cfg.output), cfg.hash
        _run_one(args.command, cfg, args, threads)
        return 0
    except BergmanRayError as exc:
        _failure(exc, out, chash)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
