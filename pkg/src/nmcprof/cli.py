"""``nmcprof`` command line.

Exit codes: 0 success (undefined metrics included), 1 usage error,
2 invalid trace, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys

from .report import AnalysisConfig, analyze_trace, emit, oracle_report
from .synth import KINDS, GeneratorSpec, generate
from .trace import TraceError, load_trace, write_trace

EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _analysis_flags(p):
    p.add_argument("trace", help="JSON-Lines trace file")
    p.add_argument("--word-size", type=int, default=None,
                   help="smallest access granularity in bytes (default: trace header)")
    p.add_argument("--max-line", type=int, default=64, help="largest cache-line size in bytes")
    p.add_argument("--entropy-lsb-max", type=int, default=16, help="largest LSB cut for the entropy sweep")
    p.add_argument("--memory-deps", action="store_true", help="store->load edges constrain schedules")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmcprof", description="Memory and parallelism characterization of instruction traces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _analysis_flags(sub.add_parser("analyze", help="compute all metrics for a trace"))
    _analysis_flags(sub.add_parser("oracle", help="same report via the brute-force reference path"))

    g = sub.add_parser("gen", help="write a synthetic trace")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=1024, help="size: elements, iterations or matrix dimension")
    g.add_argument("--lanes", type=int, default=8)
    g.add_argument("--body", type=int, default=6)
    g.add_argument("--passes", type=int, default=1)
    g.add_argument("--space", type=int, default=1 << 20)
    g.add_argument("--word-size", type=int, default=4)
    g.add_argument("--out", default=None)
    return parser


def _write(text_or_writer, out):
    if out is None:
        text_or_writer(sys.stdout)
        return
    with open(out, "w", encoding="utf-8") as fh:
        text_or_writer(fh)


def _run_analysis(args, oracle: bool) -> int:
    config = AnalysisConfig(
        word_size=args.word_size,
        max_line_size=args.max_line,
        k_max=args.entropy_lsb_max,
        memory_deps=args.memory_deps,
    )
    trace = load_trace(args.trace)
    try:
        report = (oracle_report if oracle else analyze_trace)(trace, config)
    except ValueError as exc:
        print(f"nmcprof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = emit(report, args.format)
    _write(lambda fh: fh.write(text), args.out)
    return 0


def _run_gen(args) -> int:
    try:
        spec = GeneratorSpec(
            kind=args.kind, n=args.n, seed=args.seed, lanes=args.lanes, body=args.body,
            passes=args.passes, space=args.space, word_size=args.word_size,
        )
    except ValueError as exc:
        print(f"nmcprof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    trace = generate(spec)
    _write(lambda fh: write_trace(trace, fh), args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _run_gen(args)
        return _run_analysis(args, oracle=args.command == "oracle")
    except TraceError as exc:
        print(f"nmcprof: invalid trace: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"nmcprof: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
