"""Command-line entry point.

    fieldlock analyze FILE.adt
    fieldlock run --mode {compat|static-av|dynamic-av} --seed N --workers N [--trace P] [--log P] FILE.wl

Exit status: 0 pass, 1 verification failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import format_vector
from .dsl import DslError, commutativity_matrix, parse_adts
from .harness import DRIVERS, RunConfig, run
from .interp import SchemaMismatch
from .txn import MODES
from .workload import load_workload

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def format_analysis(schemas) -> str:
    out = []
    for schema in schemas:
        out.append(f"adt {schema.name} ({', '.join(schema.field_names)})")
        ops = list(schema.operations.values())
        width = max([len(op.name) for op in ops] + [4])
        for op in ops:
            out.append(f"  {op.name:<{width}}  {format_vector(op.static_dav)}")
        if ops:
            matrix = commutativity_matrix(schema)
            out.append("  commutes:")
            out.append("  " + " " * width + "  " + " ".join(f"{op.name:>{max(3, len(op.name))}}" for op in ops))
            for a in ops:
                cells = " ".join(
                    f"{('yes' if matrix[a.name, b.name] else 'no'):>{max(3, len(b.name))}}" for b in ops
                )
                out.append(f"  {a.name:<{width}}  {cells}")
        out.append("")
    return "\n".join(out)


def format_report(report: dict) -> str:
    lines = []
    for key, value in report.items():
        if isinstance(value, float):
            value = f"{value:.3f}"
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def _analyze(args) -> int:
    try:
        schemas = parse_adts(Path(args.file).read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"fieldlock: {args.file}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except DslError as exc:
        print(f"fieldlock: {args.file}:{exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(format_analysis(schemas))
    return EXIT_OK


def _run(args) -> int:
    try:
        workload = load_workload(args.file)
    except OSError as exc:
        print(f"fieldlock: {args.file}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except (DslError, SchemaMismatch) as exc:
        print(f"fieldlock: {args.file}:{exc}", file=sys.stderr)
        return EXIT_USAGE
    config = RunConfig(
        mode=args.mode,
        driver=args.driver,
        workers=args.workers,
        seed=args.seed,
        iterations=args.iterations,
        trace_path=args.trace,
        log_path=args.log,
    )
    metrics, verdict, results = run(config, workload)
    report = {"mode": config.mode, "driver": config.driver, "seed": config.seed, "iterations": config.iterations}
    report.update({k: v for k, v in metrics.as_dict().items() if k != "mode"})
    notes = sorted({n for r in results for n in r.notes})
    report["serializability"] = "skipped" if notes else "checked"
    report["verdict"] = "pass" if verdict else "fail"
    if args.json:
        json.dump(report, sys.stdout, indent=2, sort_keys=False)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(format_report(report))
    return EXIT_OK if verdict else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldlock", description="Field-level concurrency control for tuple-based ADTs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="print static access vectors and the commutativity matrix")
    p.add_argument("file", help=".adt source file")
    p.set_defaults(func=_analyze)

    p = sub.add_parser("run", help="run a workload and verify serializability")
    p.add_argument("file", help=".wl workload file")
    p.add_argument("--mode", choices=MODES, default="dynamic-av")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--driver", choices=DRIVERS, default="step",
                   help="step: seeded deterministic interleaving; threads: real worker threads")
    p.add_argument("--iterations", type=int, default=1, help="runs with seeds seed, seed+1, ...")
    p.add_argument("--trace", help="write the event trace (JSON lines) of the last run here")
    p.add_argument("--log", help="write undo log records here")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=_run)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1 or getattr(args, "iterations", 1) < 1:
        parser.error("--workers and --iterations must be positive")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
