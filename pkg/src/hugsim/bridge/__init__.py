from .protocol import (
    KINDS,
    PROTOCOL_VERSION,
    Message,
    decode,
    encode,
    pack_images,
    read_message,
    unpack_images,
    write_message,
)
from .server import Session, serve_pipe, serve_tcp

__all__ = [
    "KINDS",
    "Message",
    "PROTOCOL_VERSION",
    "Session",
    "decode",
    "encode",
    "pack_images",
    "read_message",
    "serve_pipe",
    "serve_tcp",
    "unpack_images",
    "write_message",
]
