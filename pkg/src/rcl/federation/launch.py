"""Spawn an RTI and one process per federate, then merge their traces."""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..compiler import CompiledProgram
from ..trace import Trace, TraceRecord, canonicalize, dedupe_markers, make_header

ABORT_GRACE_S = 5.0


@dataclass
class LaunchResult:
    trace: Trace
    exit_code: int
    error: Optional[str] = None


def _cli(*args: str) -> list[str]:
    return [sys.executable, "-m", "rcl", *args]


def launch(program: CompiledProgram, path: str, mode: str, timeout: int, fast: bool = False,
           clock_script: Optional[str] = None, workers: int = 1, wall_limit: float = 120.0) -> LaunchResult:
    """Run every federate of ``path`` as its own OS process over TCP."""
    names = list(program.ig.federates)
    common = ["--mode", mode, "--timeout", f"{timeout} ns"]
    env = dict(os.environ)
    src = str(Path(__file__).resolve().parents[2])
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
    with tempfile.TemporaryDirectory(prefix="rcl-fed-") as tmp:
        rti = subprocess.Popen(_cli("federate", path, "--rti", "127.0.0.1:0", *common),
                               stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, env=env)
        line = rti.stdout.readline().strip()
        if not line.startswith("listening "):
            rti.kill()
            _, err = rti.communicate()
            return LaunchResult(canonicalize(make_header(program.digest, timeout, mode), []), 2,
                                f"RTI failed to start: {err.strip() or line}")
        addr = line.split()[1]
        procs = {}
        for name in names:
            args = ["federate", path, "--rti", addr, "--federate", name,
                    "--trace", str(Path(tmp) / f"{name}.jsonl"), "--workers", str(workers), *common]
            if fast:
                args.append("--fast")
            if clock_script:
                args += ["--clock-script", clock_script]
            with open(Path(tmp) / f"{name}.err", "w") as err:
                procs[name] = subprocess.Popen(_cli(*args), stdout=subprocess.DEVNULL, stderr=err, env=env)
        errors = []
        deadline = time.monotonic() + wall_limit
        running = dict(procs)
        aborting = False
        while running:
            for name, p in list(running.items()):
                if p.poll() is None:
                    continue
                del running[name]
                if p.returncode != 0:
                    err = (Path(tmp) / f"{name}.err").read_text().strip()
                    errors.append(f"federate {name} exited with {p.returncode}: {err}")
            if errors and not aborting:
                # one failure aborts the whole federation; the RTI tells the
                # others, which get a moment to flush their partial traces
                aborting = True
                deadline = min(deadline, time.monotonic() + ABORT_GRACE_S)
            if running and time.monotonic() > deadline:
                for name, p in running.items():
                    p.kill()
                    p.wait()
                    errors.append(f"federate {name} {'killed' if aborting else 'timed out'}")
                break
            time.sleep(0.01)
        try:
            _, rti_err = rti.communicate(timeout=10)
        except subprocess.TimeoutExpired:
            rti.kill()
            _, rti_err = rti.communicate()
        if rti.returncode not in (0, None) and not errors:
            errors.append(f"RTI exited with {rti.returncode}: {rti_err.strip()}")
        records: list[TraceRecord] = []
        for name in names:
            f = Path(tmp) / f"{name}.jsonl"
            if f.exists():
                records += Trace.read(f).records
    trace = canonicalize(make_header(program.digest, timeout, mode), [])
    trace.records = dedupe_markers(sorted(records, key=TraceRecord.sort_key))
    return LaunchResult(trace, 2 if errors else 0, "; ".join(errors) or None)
