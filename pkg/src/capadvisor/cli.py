"""``capadvisor`` command line.

Exit codes: 0 success, 1 I/O or input error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .ingest import ingest_manifest, load_matrix, save_matrix
from .model import validate_matrix
from .report import build_report, write_report
from .sim import check_caps, load_workload, oracle_profiles, simulate_experiment

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INVALID = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would collide with "validation failure"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_caps(text: str) -> list[int]:
    """``200,300,400`` or ``200:1000:100`` (inclusive stop)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            caps = list(range(parts[0], parts[1] + 1, parts[2]))
        else:
            caps = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cap list {text!r}") from None
    if not caps or any(c <= 0 for c in caps) or len(set(caps)) != len(caps):
        raise argparse.ArgumentTypeError(f"caps must be distinct positive watts, got {text!r}")
    return caps


def _fail(msg: str, code: int = EXIT_INPUT) -> int:
    print(f"capadvisor: {msg}", file=sys.stderr)
    return code


def cmd_ingest(args) -> int:
    try:
        if args.matrix:
            matrix = load_matrix(args.matrix)
        else:
            matrix = ingest_manifest(args.manifest, min_gap_ns=args.min_gap_ns)
        save_matrix(args.out, matrix)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    report = validate_matrix(matrix)
    print(f"wrote {args.out}: {len(matrix.tasks)} tasks x {len(matrix.caps)} caps, "
          f"baseline {matrix.baseline_cap} W")
    if not report.ok:
        print(report.summary(), file=sys.stderr)
        return EXIT_INVALID
    print(report.summary())
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        matrix = load_matrix(args.matrix)
        if args.baseline_cap is not None:
            matrix = matrix.with_baseline(args.baseline_cap)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    report = validate_matrix(matrix)
    if not report.ok:
        print(report.summary(), file=sys.stderr)
        return EXIT_INVALID
    try:
        bundle = build_report(matrix, weighted=args.weighted_projection)
        written = write_report(bundle, args.out_dir, args.metric, figures=not args.no_figures)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        workload, chip = load_workload(args.spec)
        check_caps(args.caps, chip)
        simulate_experiment(workload, chip, args.caps, args.runs, args.seed, args.out_dir,
                            sample_period_ms=args.sample_period_ms, sigma=args.noise)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    n = len(args.caps) * args.runs
    print(f"wrote {n} trace pairs and {Path(args.out_dir) / 'manifest.json'}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        workload, chip = load_workload(args.spec)
        matrix = oracle_profiles(workload, chip, args.caps)
        save_matrix(args.out, matrix)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    print(f"wrote {args.out}: {len(matrix.tasks)} tasks x {len(matrix.caps)} caps")
    return EXIT_OK


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="capadvisor", description="Per-task GPU power-cap recommendations from power/task traces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="build a profile matrix from traces (or re-validate a matrix CSV)")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", type=Path, help="experiment manifest (JSON)")
    src.add_argument("--matrix", type=Path, help="existing matrix CSV to validate and normalize")
    s.add_argument("--out", type=Path, required=True, help="output matrix CSV")
    s.add_argument("--min-gap-ns", type=int, default=0, help="drop idle gaps shorter than this")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("analyze", help="metrics, per-task selections, tables and figures")
    s.add_argument("--matrix", type=Path, required=True)
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--metric", choices=["sed", "ed", "both"], default="both")
    s.add_argument("--baseline-cap", type=int, default=None, help="baseline cap in W (default: max cap)")
    s.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    s.add_argument("--weighted-projection", action="store_true",
                   help="also report the baseline-weighted projection")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="synthesize traces and a manifest")
    s.add_argument("--spec", type=Path, required=True, help="workload spec (JSON)")
    s.add_argument("--caps", type=parse_caps, required=True, help="e.g. 200,300,400 or 200:1000:100")
    s.add_argument("--runs", type=_positive_int, required=True)
    s.add_argument("--seed", type=_u64, required=True)
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--noise", type=float, default=0.0, help="relative sigma of sample noise")
    s.add_argument("--sample-period-ms", type=float, default=5.0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("oracle", help="closed-form matrix for a workload spec")
    s.add_argument("--spec", type=Path, required=True)
    s.add_argument("--caps", type=parse_caps, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
