"""Federation wire messages and their length-prefixed JSON framing."""

from __future__ import annotations

import json
import socket
import struct
from typing import Any, Optional

from ..errors import ProtocolError
from ..tags import Tag, tag_from_json, tag_to_json
from ..values import decode_value, encode_value

TYPES = ("HELLO", "NET", "TAG", "MSG", "LTC", "STOP", "FAULT")
MAX_FRAME = 16 * 1024 * 1024
_LEN = struct.Struct(">I")


def hello(federate: str, fed_count: int, **extra) -> dict:
    return {"type": "HELLO", "federate": federate, "fed_count": fed_count, **extra}


def tagged(kind: str, tag: Tag, **extra) -> dict:
    if kind not in ("NET", "TAG", "LTC", "STOP"):
        raise ValueError(kind)
    return {"type": kind, "tag": tag_to_json(tag), **extra}


def msg(conn: str, tag: Tag, value: Any) -> dict:
    return {"type": "MSG", "conn": conn, "tag": tag_to_json(tag), "value": encode_value(value)}


def fault(conn: str, tag: Tag, lateness: int) -> dict:
    return {"type": "FAULT", "conn": conn, "tag": tag_to_json(tag), "lateness": lateness}


def tag_of(m: dict) -> Tag:
    return tag_from_json(m["tag"])


def value_of(m: dict) -> Any:
    return decode_value(m["value"])


def validate(m: Any) -> dict:
    if not isinstance(m, dict) or m.get("type") not in TYPES:
        raise ProtocolError(f"malformed message: {m!r}")
    if m["type"] != "HELLO" and "tag" not in m:
        raise ProtocolError(f"{m['type']} without a tag")
    if "tag" in m:
        try:
            tag_of(m)
        except Exception as e:
            raise ProtocolError(f"bad tag in {m['type']}: {e}") from None
    return m


def encode(m: dict) -> bytes:
    body = json.dumps(m, separators=(",", ":"), sort_keys=True).encode("utf-8")
    return _LEN.pack(len(body)) + body


def decode(frame: bytes) -> dict:
    """Decode exactly one complete frame."""
    if len(frame) < 4:
        raise ProtocolError("short frame")
    (n,) = _LEN.unpack_from(frame)
    if len(frame) != 4 + n:
        raise ProtocolError(f"frame length {n} does not match {len(frame) - 4} payload bytes")
    return validate(json.loads(frame[4:].decode("utf-8")))


class FrameReader:
    """Incremental decoder for a byte stream of frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict]:
        self._buf.extend(data)
        out = []
        while len(self._buf) >= 4:
            (n,) = _LEN.unpack_from(self._buf)
            if n > MAX_FRAME:
                raise ProtocolError(f"frame of {n} bytes exceeds limit")
            if len(self._buf) < 4 + n:
                break
            body = bytes(self._buf[4:4 + n])
            del self._buf[:4 + n]
            out.append(validate(json.loads(body.decode("utf-8"))))
        return out


def send(sock: socket.socket, m: dict) -> None:
    sock.sendall(encode(m))


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


def recv(sock: socket.socket) -> Optional[dict]:
    """Read one message; None on a clean close."""
    head = _recv_exact(sock, 4)
    if head is None:
        return None
    (n,) = _LEN.unpack(head)
    if n > MAX_FRAME:
        raise ProtocolError(f"frame of {n} bytes exceeds limit")
    body = _recv_exact(sock, n)
    if body is None:
        raise ProtocolError("connection closed mid-frame")
    return validate(json.loads(body.decode("utf-8")))
