"""Wire protocol: length-prefixed JSON headers with raw binary payloads.

Framing: u32 little-endian header byte length, UTF-8 JSON header, payload.
The header's "payload_bytes" field must equal the payload length exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ProtocolError

PROTOCOL_VERSION = 1
KINDS = ("HELLO", "RESET", "OBS", "ACTION", "SCORE", "DONE", "ERROR")
MAX_HEADER_BYTES = 1 << 20


@dataclass
class Message:
    kind: str
    header: dict = field(default_factory=dict)
    payload: bytes = b""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProtocolError(f"unknown message kind {self.kind!r}")


def encode(msg: Message) -> bytes:
    header = dict(msg.header)
    header["kind"] = msg.kind
    header["payload_bytes"] = len(msg.payload)
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(hdr)) + hdr + msg.payload


def decode(data: bytes) -> tuple[Message, bytes]:
    """Parse one message from a buffer; returns (message, remaining bytes)."""
    if len(data) < 4:
        raise ProtocolError("truncated frame: missing header length")
    (hdr_len,) = struct.unpack("<I", data[:4])
    if hdr_len > MAX_HEADER_BYTES:
        raise ProtocolError(f"header length {hdr_len} exceeds limit")
    if len(data) < 4 + hdr_len:
        raise ProtocolError("truncated frame: header cut short")
    try:
        header = json.loads(data[4:4 + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"unreadable header: {e}") from e
    if not isinstance(header, dict):
        raise ProtocolError("header must be a JSON object")
    kind = header.pop("kind", None)
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    n = header.pop("payload_bytes", 0)
    if not isinstance(n, int) or n < 0:
        raise ProtocolError(f"bad payload_bytes {n!r}")
    start = 4 + hdr_len
    if len(data) < start + n:
        raise ProtocolError(
            f"payload length mismatch: expected {n} bytes, "
            f"have {len(data) - start}")
    return Message(kind, header, bytes(data[start:start + n])), data[start + n:]


def read_message(stream) -> Message:
    """Blocking read of one message from a file-like byte stream."""
    head = _read_exact(stream, 4)
    (hdr_len,) = struct.unpack("<I", head)
    if hdr_len > MAX_HEADER_BYTES:
        raise ProtocolError(f"header length {hdr_len} exceeds limit")
    raw = head + _read_exact(stream, hdr_len)
    try:
        header = json.loads(raw[4:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"unreadable header: {e}") from e
    if not isinstance(header, dict):
        raise ProtocolError("header must be a JSON object")
    n = header.pop("payload_bytes", 0)
    if not isinstance(n, int) or n < 0:
        raise ProtocolError(f"bad payload_bytes {n!r}")
    kind = header.pop("kind", None)
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    return Message(kind, header, _read_exact(stream, n))


def write_message(stream, msg: Message) -> None:
    stream.write(encode(msg))
    stream.flush()


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise ProtocolError(
                f"connection closed mid-frame: wanted {n} bytes, got {len(buf)}")
        buf += chunk
    return buf


def pack_images(images: list[np.ndarray]) -> tuple[bytes, list]:
    """u8 RGB images -> (payload, shape list) in rig order."""
    shapes = []
    chunks = []
    for img in images:
        u8 = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
        u8 = (u8 * 255.0 + 0.5).astype(np.uint8)
        shapes.append(list(u8.shape))
        chunks.append(u8.tobytes())
    return b"".join(chunks), shapes


def unpack_images(payload: bytes, shapes: list) -> list[np.ndarray]:
    images = []
    off = 0
    for shape in shapes:
        n = int(np.prod(shape))
        if off + n > len(payload):
            raise ProtocolError(
                f"payload too short for shape {shape}: need {n} bytes "
                f"at offset {off}, have {len(payload) - off}")
        images.append(np.frombuffer(payload, dtype=np.uint8, count=n,
                                    offset=off).reshape(shape).copy())
        off += n
    if off != len(payload):
        raise ProtocolError(
            f"payload length mismatch: shapes describe {off} bytes, "
            f"payload has {len(payload)}")
    return images
