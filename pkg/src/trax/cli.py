"""Command-line surface.

    trax run   --tracker "<command>" --sequence DIR [--mode ...]   experiments
    trax test  --tracker "<command>"                               conformance
    trax dummy [--delay MS] [--fail-after K] ...                   reference tracker
    trax synth --output DIR [--frames N]                           synthetic sequence

Exit codes: 0 completed, 1 usage error, 2 launch/handshake error,
3 conformance failure, 4 protocol violation inside the dummy tracker.
All diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys

from . import conformance, dummy, harness, synth
from .errors import (
    AcceptTimeout,
    ProtocolViolation,
    SpawnFailure,
    TrackerExited,
    TraxError,
    VersionMismatch,
    WatchdogTimeout,
)
from .model import MEMORY, PATH, POLYGON, RECTANGLE, Special
from .transport import STDIO, TCP
from .wire import KEY_RE

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LAUNCH = 2
EXIT_CONFORMANCE = 3
EXIT_PROTOCOL = 4

_LAUNCH_ERRORS = (SpawnFailure, AcceptTimeout, VersionMismatch, WatchdogTimeout,
                  TrackerExited, ProtocolViolation)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this repo reserves 2 for launch
    failures, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trax", description="Tracker exchange protocol tools")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a tracking experiment")
    run.add_argument("--tracker", required=True, help="tracker command line")
    run.add_argument("--sequence", required=True, help="sequence directory")
    run.add_argument("--mode", choices=harness.MODES, default=harness.UNSUPERVISED)
    run.add_argument("--output", default="./trial", help="trial output directory")
    run.add_argument("--transport", choices=(STDIO, TCP), default=STDIO)
    run.add_argument("--skip", type=int, default=5,
                     help="frames between failure and reinitialization")
    run.add_argument("--fps", type=float, default=None,
                     help="override sequence fps (realtime mode)")
    run.add_argument("--param", action="append", default=[], metavar="K=V",
                     help="extra initialization parameter (repeatable)")
    run.add_argument("--sweep", action="append", default=[], metavar="K=V1,V2",
                     help="sweep a parameter over several values (repeatable)")
    run.add_argument("--timeout", type=float, default=30.0,
                     help="watchdog seconds per tracker response")
    run.add_argument("--image", choices=(PATH, MEMORY), default=PATH,
                     help="send frames as paths or in-memory payloads")
    run.set_defaults(func=cmd_run)

    test = sub.add_parser("test", help="check a tracker for protocol conformance")
    test.add_argument("--tracker", required=True, help="tracker command line")
    test.add_argument("--transport", choices=(STDIO, TCP), default=STDIO)
    test.add_argument("--timeout", type=float, default=10.0)
    test.add_argument("--json", action="store_true", help="machine-readable report")
    test.set_defaults(func=cmd_test)

    dummy_p = sub.add_parser("dummy", help="run the built-in static tracker")
    dummy_p.add_argument("--delay", type=int, default=0, metavar="MS")
    dummy_p.add_argument("--fail-after", type=int, default=0, metavar="K")
    dummy_p.add_argument("--region", choices=(RECTANGLE, POLYGON), default=RECTANGLE)
    dummy_p.add_argument("--hang", action="store_true")
    dummy_p.add_argument("--chatter", action="store_true")
    dummy_p.add_argument("--violate", choices=dummy.VIOLATIONS, help=argparse.SUPPRESS)
    dummy_p.set_defaults(func=cmd_dummy)

    synth_p = sub.add_parser("synth", help="generate a synthetic test sequence")
    synth_p.add_argument("--output", required=True, help="target directory")
    synth_p.add_argument("--frames", type=int, default=20)
    synth_p.add_argument("--size", default="320x240", metavar="WxH")
    synth_p.set_defaults(func=cmd_synth)

    return parser


def _parse_pairs(pairs: list[str], parser: argparse.ArgumentParser) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, eq, value = pair.partition("=")
        if not eq or not KEY_RE.fullmatch(key):
            parser.error(f"expected KEY=VALUE with key [A-Za-z0-9_.]+, got {pair!r}")
        out[key] = value
    return out


def cmd_run(args, parser) -> int:
    tracker = shlex.split(args.tracker)
    if not tracker:
        parser.error("empty --tracker command")
    try:
        seq = harness.load_sequence(args.sequence)
    except TraxError as exc:
        print(f"trax run: cannot load sequence: {exc}", file=sys.stderr)
        return EXIT_USAGE

    opts = harness.ExperimentOptions(
        mode=args.mode,
        skip=args.skip,
        fps_override=args.fps,
        init_params=_parse_pairs(args.param, parser),
        image_kind=args.image,
    )
    kwargs = dict(transport=args.transport, watchdog=args.timeout)

    if args.sweep:
        grid = {}
        for sweep_arg in args.sweep:
            key, eq, values = sweep_arg.partition("=")
            if not eq or not key:
                parser.error(f"expected K=V1,V2,..., got {sweep_arg!r}")
            grid[key] = [v for v in values.split(",") if v]
            if not grid[key]:
                print(f"trax run: sweep key {key!r} has no values", file=sys.stderr)
                return EXIT_OK
        results = harness.sweep(tracker, seq, opts, grid, **kwargs)
        code = EXIT_OK
        for result in results:
            name = "_".join(f"{k}={_safe(v)}" for k, v in sorted(result.params.items()))
            if result.trial is None:
                print(f"trax run: {name}: {result.error}", file=sys.stderr)
                code = EXIT_LAUNCH
                continue
            out_dir = os.path.join(args.output, name)
            harness.write_trial(result.trial, out_dir)
            print(_summary(name, result.trial, out_dir))
        return code

    try:
        trial = harness.run_experiment(tracker, seq, opts, **kwargs)
    except _LAUNCH_ERRORS as exc:
        print(f"trax run: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_LAUNCH
    harness.write_trial(trial, args.output)
    print(_summary(seq.name, trial, args.output))
    return EXIT_OK


def _safe(value: str) -> str:
    return value.replace(os.sep, "_")


def _summary(name: str, trial: harness.Trial, out_dir: str) -> str:
    processed = sum(1 for t in trial.timings if t > 0)
    failures = sum(1 for r in trial.trajectory
                   if isinstance(r, Special) and r.code == 2)
    return (f"{name}: frames={len(trial.trajectory)} processed={processed} "
            f"failures={failures} mode={trial.mode} -> {out_dir}")


def cmd_test(args, parser) -> int:
    tracker = shlex.split(args.tracker)
    if not tracker:
        parser.error("empty --tracker command")
    try:
        report = conformance.run_conformance(
            tracker, transport=args.transport, timeout=args.timeout)
    except (SpawnFailure, AcceptTimeout) as exc:
        print(f"trax test: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_LAUNCH
    if args.json:
        print(report.to_json())
    else:
        print(report.render())
    return EXIT_OK if report.overall else EXIT_CONFORMANCE


def cmd_dummy(args, parser) -> int:
    return dummy.run_dummy(
        region_kind=args.region,
        delay_ms=args.delay,
        fail_after=args.fail_after,
        hang=args.hang,
        chatter=args.chatter,
        violate=args.violate,
    )


def cmd_synth(args, parser) -> int:
    try:
        width, height = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        parser.error(f"expected WxH, got {args.size!r}")
    seq = synth.generate_sequence(args.output, args.frames, (width, height))
    print(f"{seq.name}: {len(seq)} frames at {args.size} -> {args.output}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
