"""Canonical traces: recording, serialization and golden comparison."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .tags import Tag, tag_from_json, tag_to_json
from .values import decode_value, encode_value

FORMAT = "rcl-trace/1"
KINDS = ("startup", "reaction", "deadline_handler", "stp_fault", "shutdown")
MARKER_LEVEL = -1
_PHASE = {"startup": 0, "shutdown": 2}


@dataclass
class TraceRecord:
    tag: Tag
    level: int
    kind: str
    subject: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    note: Optional[str] = None

    def sort_key(self) -> tuple:
        # markers bracket everything else at their tag
        return (self.tag, _PHASE.get(self.kind, 1), self.level, self.subject, KINDS.index(self.kind))

    def to_json(self) -> dict:
        return {
            "tag": tag_to_json(self.tag),
            "level": self.level,
            "kind": self.kind,
            "subject": self.subject,
            "inputs": {k: encode_value(v) for k, v in sorted(self.inputs.items())},
            "outputs": {k: encode_value(v) for k, v in sorted(self.outputs.items())},
            "note": self.note,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TraceRecord":
        return cls(tag_from_json(obj["tag"]), obj["level"], obj["kind"], obj["subject"],
                   {k: decode_value(v) for k, v in obj.get("inputs", {}).items()},
                   {k: decode_value(v) for k, v in obj.get("outputs", {}).items()},
                   obj.get("note"))


@dataclass
class Trace:
    header: dict
    records: list

    def lines(self) -> list[str]:
        out = [_dump(self.header)]
        out += [_dump(r.to_json()) for r in self.records]
        return out

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "Trace":
        lines = [ln for ln in text.split("\n") if ln.strip()]
        if not lines:
            raise ValueError("empty trace")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT:
            raise ValueError(f"not a trace file (format {header.get('format')!r})")
        return cls(header, [TraceRecord.from_json(json.loads(ln)) for ln in lines[1:]])

    @classmethod
    def read(cls, path) -> "Trace":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=False, separators=(",", ":"), ensure_ascii=False)


def config_digest(timeout: Optional[int]) -> str:
    data = json.dumps({"timeout": timeout}, sort_keys=True)
    return hashlib.sha256(data.encode()).hexdigest()[:16]


def make_header(program_digest: str, timeout: Optional[int], mode: str) -> dict:
    return {"format": FORMAT, "program": program_digest, "config": config_digest(timeout), "mode": mode}


def canonicalize(header: dict, records: list) -> Trace:
    """Sort records canonically; idempotent."""
    return Trace(dict(header), sorted(records, key=TraceRecord.sort_key))


def dedupe_markers(records: list) -> list:
    """Merge per-federate startup/shutdown markers into one of each per tag."""
    seen = set()
    out = []
    for r in records:
        if r.kind in _PHASE:
            key = (r.kind, r.tag)
            if key in seen:
                continue
            seen.add(key)
        out.append(r)
    return out


@dataclass
class Divergence:
    kind: str  # "header" | "record" | "length"
    index: Optional[int] = None
    field: Optional[str] = None
    golden: Any = None
    candidate: Any = None

    def __str__(self) -> str:
        if self.kind == "header":
            return f"header mismatch in '{self.field}': golden {self.golden!r}, candidate {self.candidate!r}"
        if self.kind == "length":
            return f"record {self.index}: golden has {self.golden}, candidate has {self.candidate}"
        return f"record {self.index}: field '{self.field}' differs: golden {self.golden}, candidate {self.candidate}"


def compare(golden: Trace, candidate: Trace) -> Optional[Divergence]:
    """None when equal, else the first divergence.

    Only the program hash and format of the header matter; mode and
    config are informational.
    """
    for key in ("format", "program"):
        if golden.header.get(key) != candidate.header.get(key):
            return Divergence("header", field=key, golden=golden.header.get(key),
                              candidate=candidate.header.get(key))
    g_lines = [_dump(r.to_json()) for r in golden.records]
    c_lines = [_dump(r.to_json()) for r in candidate.records]
    for i, (a, b) in enumerate(zip(g_lines, c_lines)):
        if a != b:
            ja, jb = json.loads(a), json.loads(b)
            for k in ja:
                if ja[k] != jb.get(k):
                    return Divergence("record", i, k, json.dumps(ja[k]), json.dumps(jb.get(k)))
    if len(g_lines) != len(c_lines):
        i = min(len(g_lines), len(c_lines))
        return Divergence("length", i, None,
                          f"{len(g_lines)} records", f"{len(c_lines)} records")
    return None
