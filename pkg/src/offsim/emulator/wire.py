"""Framed binary messages exchanged between the device and the edge server.

Frame layout (16-byte header, all integers little-endian)::

    magic "OFLD" | version 0x01 | msg_type | exit | split | payload_length (u64)

followed by ``payload_length`` bytes.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

MAGIC = b"OFLD"
VERSION = 0x01
TASK = 0x01
RESULT = 0x02
ERROR = 0x03
MSG_TYPES = (TASK, RESULT, ERROR)

HEADER = struct.Struct("<4sBBBBQ")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 1 << 30
CLASS_ID = struct.Struct("<H")


class EmulationError(Exception):
    """Base class for emulator failures."""


class ProtocolError(EmulationError):
    """A peer sent something that is not a valid frame."""


class TransportError(EmulationError):
    """Connection refused, reset, or a stage timed out."""


@dataclass(frozen=True)
class FrameHeader:
    msg_type: int
    exit: int
    split: int
    payload_length: int

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, self.msg_type, self.exit, self.split, self.payload_length)


def decode_header(data: bytes) -> FrameHeader:
    if len(data) != HEADER_SIZE:
        raise ProtocolError(f"short header: {len(data)} of {HEADER_SIZE} bytes")
    magic, version, msg_type, exit, split, length = HEADER.unpack(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    if msg_type not in MSG_TYPES:
        raise ProtocolError(f"unknown message type 0x{msg_type:02x}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit {MAX_PAYLOAD}")
    return FrameHeader(msg_type, exit, split, length)


def kilobits_to_bytes(kb: float) -> int:
    return int(round(kb * 1000 / 8))


def task_frame_size(d_ul_kb: float) -> int:
    """Total on-wire bytes of a TASK frame; the header counts toward the volume."""
    return max(kilobits_to_bytes(d_ul_kb), HEADER_SIZE)


def result_frame_size(d_dl_kb: float) -> int:
    return max(kilobits_to_bytes(d_dl_kb), HEADER_SIZE + CLASS_ID.size)


def encode_task(exit: int, split: int, total_bytes: int) -> bytes:
    payload = total_bytes - HEADER_SIZE
    return FrameHeader(TASK, exit, split, payload).pack() + bytes(payload)


def encode_result(exit: int, split: int, class_id: int, total_bytes: int) -> bytes:
    payload = total_bytes - HEADER_SIZE
    body = CLASS_ID.pack(class_id) + bytes(payload - CLASS_ID.size)
    return FrameHeader(RESULT, exit, split, payload).pack() + body


def encode_error(message: str, exit: int = 0, split: int = 0) -> bytes:
    body = message.encode("utf-8")[:4096]
    return FrameHeader(ERROR, exit, split, len(body)).pack() + body


def recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(min(n - len(buf), 1 << 16))
        except socket.timeout as exc:
            raise TransportError("timed out waiting for data") from exc
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if not chunk:
            raise TransportError(f"connection closed after {len(buf)} of {n} bytes")
        buf += chunk
    return bytes(buf)


def read_frame(sock: socket.socket):
    """Return ``(header, payload)``; raises ProtocolError on a malformed header."""
    header = decode_header(recv_exact(sock, HEADER_SIZE))
    return header, recv_exact(sock, header.payload_length)
