"""Framing for the simulator protocol: u32 LE header length + JSON + payload."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

PROTOCOL_VERSION = 1
KINDS = ("HELLO", "RESET", "OBS", "ACTION", "SCORE", "DONE", "ERROR")
MAX_HEADER_BYTES = 1 << 20


class WireError(Exception):
    """Malformed frame or unexpected protocol state."""


@dataclass
class Frame:
    kind: str
    header: dict = field(default_factory=dict)
    payload: bytes = b""


def encode(frame: Frame) -> bytes:
    if frame.kind not in KINDS:
        raise WireError(f"unknown message kind {frame.kind!r}")
    header = dict(frame.header)
    header["kind"] = frame.kind
    header["payload_bytes"] = len(frame.payload)
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(hdr)) + hdr + frame.payload


def read_frame(stream) -> Frame:
    head = _read_exact(stream, 4)
    (hdr_len,) = struct.unpack("<I", head)
    if hdr_len > MAX_HEADER_BYTES:
        raise WireError(f"header length {hdr_len} exceeds limit")
    try:
        header = json.loads(_read_exact(stream, hdr_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WireError(f"unreadable header: {e}") from e
    if not isinstance(header, dict):
        raise WireError("header must be a JSON object")
    kind = header.pop("kind", None)
    if kind not in KINDS:
        raise WireError(f"unknown message kind {kind!r}")
    n = header.pop("payload_bytes", 0)
    if not isinstance(n, int) or n < 0:
        raise WireError(f"bad payload_bytes {n!r}")
    return Frame(kind, header, _read_exact(stream, n))


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise WireError(
                f"connection closed mid-frame: wanted {n} bytes, got {len(buf)}")
        buf += chunk
    return buf


def unpack_images(payload: bytes, shapes: list) -> list[np.ndarray]:
    """Exact u8 decode of concatenated row-major images, no conversion."""
    images = []
    off = 0
    for shape in shapes:
        n = int(np.prod(shape))
        if off + n > len(payload):
            raise WireError(
                f"payload too short for shape {shape}: need {n} bytes "
                f"at offset {off}, have {len(payload) - off}")
        images.append(np.frombuffer(payload, dtype=np.uint8, count=n,
                                    offset=off).reshape(shape).copy())
        off += n
    if off != len(payload):
        raise WireError(f"payload has {len(payload) - off} trailing bytes")
    return images
