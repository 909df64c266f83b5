"""Payload values carried by events and ports.

Values are ordinary immutable Python objects: ``None`` (unit), ``bool``,
``int`` (64-bit range enforced), ``float``, ``str`` and ``bytes``.  The
:data:`ABSENT` sentinel marks a port or trigger without a value at the
current tag and is never itself a value.
"""

from __future__ import annotations

import base64
import math
import struct
from typing import Any

from .errors import ValueKindError
from .tags import INT64_MAX, INT64_MIN


class _Absent:
    __slots__ = ()

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False


ABSENT = _Absent()

KINDS = ("void", "bool", "int", "float", "string", "bytes")


def kind_of(value: Any) -> str:
    if value is None:
        return "void"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    if isinstance(value, bytes):
        return "bytes"
    raise ValueKindError(f"unsupported value {value!r}")


def check_int(value: int) -> int:
    if value > INT64_MAX or value < INT64_MIN:
        raise ValueKindError(f"integer {value} overflows 64 bits")
    return value


def coerce(kind: str, value: Any) -> Any:
    """Check ``value`` against a declared port kind; ints widen to float."""
    actual = kind_of(value)
    if actual == kind:
        if kind == "int":
            check_int(value)
        return value
    if kind == "float" and actual == "int":
        return float(value)
    if kind == "void":
        # a void port carries presence only
        return None
    raise ValueKindError(f"expected {kind} value, got {actual} {value!r}")


def values_equal(a: Any, b: Any) -> bool:
    """Structural equality; floats compare by bit pattern."""
    if a is ABSENT or b is ABSENT:
        return a is b
    ka, kb = kind_of(a), kind_of(b)
    if ka != kb:
        return False
    if ka == "float":
        return _float_bits(a) == _float_bits(b)
    return a == b


def _float_bits(x: float) -> str:
    return struct.pack(">d", x).hex()


def encode_value(value: Any) -> Any:
    """JSON-ready encoding; floats keep their exact bit pattern."""
    if value is ABSENT:
        return {"absent": True}
    kind = kind_of(value)
    if kind in ("void", "bool", "string"):
        return value
    if kind == "int":
        return check_int(value)
    if kind == "float":
        return {"f64": _float_bits(value)}
    return {"bytes": base64.b64encode(value).decode("ascii")}


def decode_value(obj: Any) -> Any:
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, int):
        return check_int(obj)
    if isinstance(obj, dict) and len(obj) == 1:
        (key, val), = obj.items()
        if key == "absent" and val is True:
            return ABSENT
        if key == "f64":
            return struct.unpack(">d", bytes.fromhex(val))[0]
        if key == "bytes":
            return base64.b64decode(val)
    raise ValueKindError(f"cannot decode value {obj!r}")


def render(value: Any) -> str:
    """Human-oriented rendering used by ``log``."""
    if value is None:
        return "()"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and math.isfinite(value) and value == int(value):
        return f"{value:.1f}"
    return str(value)
