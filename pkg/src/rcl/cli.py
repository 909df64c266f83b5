"""Command-line entry point: ``rcl check|graph|run|federate|compare``."""

from __future__ import annotations

import argparse
import importlib
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

from .compiler import CompiledProgram, compile_file
from .errors import Diagnostic, DiagnosticError, RclError
from .graph import to_dot
from .tags import parse_time
from .trace import Trace, compare

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_FAULT = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _duration(text: str) -> int:
    try:
        return parse_time(text)
    except (RclError, ValueError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _workers(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid worker count {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("worker count must be at least 1")
    return n


def bundled_programs() -> dict[str, Path]:
    root = resources.files("rcl") / "programs"
    return {p.name: Path(str(p)) for p in root.iterdir() if p.name.endswith(".rcl")}


def resolve_source(path: str) -> Path:
    """The file itself, or a bundled program with the same file name."""
    p = Path(path)
    if p.exists():
        return p
    return bundled_programs().get(p.name, p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcl", description="Compile, run and federate deterministic reactor programs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="parse and validate a program")
    p.add_argument("file", help=".rcl source file")

    p = sub.add_parser("graph", help="print the reaction graph")
    p.add_argument("file", help=".rcl source file")
    p.add_argument("--dot", action="store_true", help="emit Graphviz DOT (default: a level table)")

    def runtime_flags(p):
        p.add_argument("--fast", action="store_true", help="use virtual time instead of the wall clock")
        p.add_argument("--workers", type=_workers, default=None,
                       help="worker threads per level (default: $RCL_WORKERS or 1)")
        p.add_argument("--timeout", type=_duration, default=None, help="stop tag time, e.g. '100 ms'")
        p.add_argument("--trace", metavar="PATH", help="write the canonical trace here (default: stdout)")
        p.add_argument("--clock-script", metavar="PATH", help="JSON-lines injections and stalls")
        p.add_argument("--jitter-seed", type=int, default=None, help="seed for scheduling jitter")
        p.add_argument("--externs", metavar="MODULE", help="import MODULE and use its EXTERNS dict for extern bodies")

    p = sub.add_parser("run", help="execute a program")
    p.add_argument("file", help=".rcl source file")
    runtime_flags(p)
    p.add_argument("--golden", metavar="PATH", help="compare the trace against this golden trace (exit 3 on divergence)")
    p.add_argument("--update-golden", action="store_true", help="overwrite the --golden file with this run's trace")

    p = sub.add_parser("federate", help="execute a federated program")
    p.add_argument("file", help=".rcl source file")
    p.add_argument("--mode", choices=("centralized", "decentralized"), required=True, help="coordination mode")
    p.add_argument("--simulate-net", metavar="SCRIPT", help="run in-process over a simulated network with this latency script")
    p.add_argument("--rti", metavar="ADDR", help="HOST:PORT of the RTI; alone, serve an RTI there (port 0 picks one)")
    p.add_argument("--federate", metavar="NAME", help="with --rti, run only this federate")
    runtime_flags(p)

    p = sub.add_parser("compare", help="compare two canonical traces")
    p.add_argument("golden", help="known-good trace")
    p.add_argument("candidate", help="trace to check")
    return parser


def _compile(path: str) -> CompiledProgram:
    src = resolve_source(path)
    if not src.exists():
        raise DiagnosticError([Diagnostic(1, 1, "file not found", file=path)])
    return compile_file(src)


def _load_externs(name: Optional[str]) -> dict:
    if not name:
        return {}
    sys.path.insert(0, os.getcwd())
    module = importlib.import_module(name)
    return dict(getattr(module, "EXTERNS"))


def _workers_default(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("RCL_WORKERS")
    if env:
        try:
            return _workers(env)
        except argparse.ArgumentTypeError as e:
            raise UsageError(f"RCL_WORKERS: {e}") from None
    return 1


def _emit(trace: Trace, phys: Optional[list], path: Optional[str]) -> None:
    if path:
        if phys is not None:
            from .runtime.engine import write_trace
            write_trace(trace, phys, path)
        else:
            trace.write(path)
    else:
        sys.stdout.write(trace.dumps())


def cmd_check(args) -> int:
    program = _compile(args.file)
    ig = program.ig
    print(f"{args.file}: ok ({len(ig.reactors)} reactors, {len(ig.reactions)} reactions, "
          f"{max(program.levels.values(), default=-1) + 1} levels)")
    return EXIT_OK


def cmd_graph(args) -> int:
    program = _compile(args.file)
    if args.dot:
        sys.stdout.write(to_dot(program.graph, program.levels))
    else:
        for name in sorted(program.levels, key=lambda n: (program.levels[n], n)):
            print(f"{program.levels[name]:3d}  {name}")
    return EXIT_OK


def _script(args):
    from .runtime.engine import load_clock_script
    if not args.clock_script:
        return []
    try:
        return load_clock_script(args.clock_script)
    except (OSError, ValueError) as e:
        raise UsageError(f"--clock-script: {e}") from None


def cmd_run(args) -> int:
    from .runtime.engine import RunConfig, run_program
    if args.update_golden and not args.golden:
        raise UsageError("--update-golden needs --golden PATH")
    program = _compile(args.file)
    script = _script(args)
    config = RunConfig(mode="fast" if args.fast else "realtime", workers=_workers_default(args),
                       timeout=args.timeout, trace_path=None, jitter_seed=args.jitter_seed)
    result = run_program(program, config, script, _load_externs(args.externs))
    _emit(result.trace, result.phys, args.trace)
    if result.exit_code:
        print(f"rcl: runtime fault: {result.error}", file=sys.stderr)
        return EXIT_FAULT
    if args.golden:
        if args.update_golden:
            result.trace.write(args.golden)
            print(f"rcl: golden trace updated: {args.golden}", file=sys.stderr)
            return EXIT_OK
        div = compare(Trace.read(args.golden), result.trace)
        if div is not None:
            print(f"rcl: diverged from golden: {div}", file=sys.stderr)
            return EXIT_DIVERGED
    return EXIT_OK


def cmd_federate(args) -> int:
    program = _compile(args.file)
    if not program.ig.federates:
        print(f"{args.file}: error: not a federated program", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    if args.timeout is None:
        raise UsageError("federate needs --timeout")
    if args.federate and not args.rti:
        raise UsageError("--federate needs --rti ADDR")
    workers = _workers_default(args)
    externs = _load_externs(args.externs)

    if args.simulate_net:
        from .federation.simnet import LatencyScript, simulate
        try:
            latencies = LatencyScript.load(args.simulate_net)
        except (OSError, ValueError) as e:
            raise UsageError(f"--simulate-net: {e}") from None
        result = simulate(program, args.mode, latencies, _script(args), args.timeout, externs, args.jitter_seed)
        _emit(result.trace, None, args.trace)
        if args.mode == "decentralized":
            c = result.classification
            print(f"rcl: {c.on_time} messages on time, {len(c.faults)} late", file=sys.stderr)
        if result.exit_code:
            print(f"rcl: federation failed: {result.error}", file=sys.stderr)
            return EXIT_FAULT
        return EXIT_OK

    if args.rti and not args.federate:
        from .federation.sockets import RtiServer, parse_addr
        host, port = parse_addr(args.rti)
        server = RtiServer(program, args.mode, args.timeout, host, port)
        print(f"listening {server.address}", flush=True)
        error = server.serve()
        if error:
            print(f"rcl: {error}", file=sys.stderr)
            return EXIT_FAULT
        return EXIT_OK

    if args.rti:
        from .federation.sockets import FederateClient
        client = FederateClient(program, args.federate, args.rti, args.mode, args.timeout, args.fast,
                                externs, workers, _script(args), args.jitter_seed)
        result = client.run()
        _emit(result.trace, result.phys, args.trace)
        if result.exit_code:
            print(f"rcl: runtime fault: {result.error}", file=sys.stderr)
            return EXIT_FAULT
        return EXIT_OK

    from .federation.launch import launch
    if args.mode == "decentralized" and args.fast:
        raise UsageError("decentralized coordination over sockets needs real time (drop --fast)")
    result = launch(program, str(resolve_source(args.file)), args.mode, args.timeout, args.fast,
                    args.clock_script, workers)
    _emit(result.trace, None, args.trace)
    if result.exit_code:
        print(f"rcl: federation failed: {result.error}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def cmd_compare(args) -> int:
    traces = []
    for path in (args.golden, args.candidate):
        try:
            traces.append(Trace.read(path))
        except FileNotFoundError:
            print(f"{path}:1:1: error: file not found", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        except (ValueError, KeyError) as e:
            print(f"{path}:1:1: error: not a canonical trace: {e}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
    div = compare(*traces)
    if div is None:
        print("equal")
        return EXIT_OK
    print(f"{'header mismatch' if div.kind == 'header' else 'diverged'}: {div}")
    return EXIT_DIVERGED


COMMANDS = {"check": cmd_check, "graph": cmd_graph, "run": cmd_run, "federate": cmd_federate,
            "compare": cmd_compare}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"rcl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DiagnosticError as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except (RclError, OSError) as e:
        print(f"rcl: error: {e}", file=sys.stderr)
        return EXIT_FAULT
    except ImportError as e:
        print(f"rcl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
