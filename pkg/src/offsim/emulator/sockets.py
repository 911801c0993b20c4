"""Loopback harness: the device side as a client, the edge server as a TCP server.

Compute stages are real timed waits; transfers are real bytes paced by a
token bucket. Payloads are zero-filled and the frame header counts toward
the configured volume.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

from ..profiles import ExecutionPlan, SystemProfile
from .bucket import TokenBucket, shaped_send
from .config import EmulationConfig, EmulationTrace, TraceEvent, parse_endpoint
from .events import stage_plan
from .wire import (
    ERROR, HEADER_SIZE, RESULT, TASK, EmulationError, ProtocolError, TransportError,
    decode_header, encode_error, encode_result, encode_task, recv_exact,
    result_frame_size, task_frame_size,
)

logger = logging.getLogger(__name__)

NUM_CLASSES = 43
CHUNK_BYTES = 1448  # one TCP segment on a 1500-byte MTU


def paced_bucket(rate: float, burst_bytes: int) -> TokenBucket:
    # starts empty so a transfer takes volume / rate, not (volume - burst) / rate
    return TokenBucket(rate, burst_bytes * 8, initial=0.0)


def chunk_size(burst_bytes: int) -> int:
    return min(CHUNK_BYTES, burst_bytes)


def synthetic_class_id(exit: int, split: int) -> int:
    """Placeholder label returned by the server; no image is classified."""
    return (7 * exit + split) % NUM_CLASSES


def _drain_and_close(conn: socket.socket, limit: int = 1 << 24, grace: float = 1.0) -> None:
    # closing with unread input would send RST and could drop the ERROR frame
    conn.shutdown(socket.SHUT_WR)
    conn.settimeout(grace)
    seen = 0
    while seen < limit:
        try:
            chunk = conn.recv(1 << 16)
        except OSError:
            return
        if not chunk:
            return
        seen += len(chunk)


def _wait(seconds: float) -> None:
    if seconds > 0:
        time.sleep(seconds)


@dataclass
class RoundLog:
    plan: ExecutionPlan
    bytes_in: int
    bytes_out: int
    service_time: float   # s, from TASK received to RESULT sent

    def line(self) -> str:
        return (f"round exit={self.plan.exit} split={self.plan.split} "
                f"bytes_in={self.bytes_in} bytes_out={self.bytes_out} "
                f"service_ms={self.service_time * 1e3:.3f}")


class OffloadServer:
    """Single-threaded edge server; serves one connection at a time.

    For every TASK frame it waits the server-side compute time of the
    requested plan, then replies with a RESULT frame of the profile's
    downlink volume. Malformed input gets an ERROR frame and the
    connection is closed; the server keeps running.
    """

    def __init__(self, profile: SystemProfile, endpoint: str = "127.0.0.1:5050",
                 shaping_rate_dl: Optional[float] = None, burst_bytes: int = 8192,
                 timeout: float = 30.0, refined: bool = True,
                 on_round: Optional[Callable[[RoundLog], None]] = None):
        self.profile = profile
        self.host, self.port = parse_endpoint(endpoint)
        self.rate_dl = shaping_rate_dl or profile.network.b_dl_si
        self.burst_bytes = burst_bytes
        self.timeout = timeout
        self.refined = refined
        self.on_round = on_round
        self.rounds: List[RoundLog] = []
        self._stop = threading.Event()
        self._sock: Optional[socket.socket] = None

    def bind(self) -> "OffloadServer":
        """Bind and listen; raises OSError when the endpoint is unavailable."""
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, self.port))
        except OSError:
            sock.close()
            raise
        sock.listen(1)
        sock.settimeout(0.2)
        self.port = sock.getsockname()[1]
        self._sock = sock
        return self

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def serve_forever(self) -> None:
        if self._sock is None:
            self.bind()
        try:
            while not self._stop.is_set():
                try:
                    conn, _ = self._sock.accept()
                except socket.timeout:
                    continue
                with conn:
                    conn.settimeout(self.timeout)
                    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                    self._handle(conn)
        finally:
            self._sock.close()
            self._sock = None

    def shutdown(self) -> None:
        self._stop.set()

    def start_background(self) -> threading.Thread:
        self.bind()
        thread = threading.Thread(target=self.serve_forever, name="offload-server", daemon=True)
        thread.start()
        return thread

    def _mec_time(self, plan: ExecutionPlan) -> float:
        return sum(const + work for name, _, const, work, _ in
                   stage_plan(plan, self.profile, self.refined) if name == "mec")

    def _handle(self, conn: socket.socket) -> None:
        while not self._stop.is_set():
            try:
                first = conn.recv(HEADER_SIZE)
                if not first:
                    return  # client closed between rounds
                head = first + recv_exact(conn, HEADER_SIZE - len(first))
                header = decode_header(head)
                if header.msg_type != TASK:
                    raise ProtocolError(f"expected TASK, got message type {header.msg_type}")
                recv_exact(conn, header.payload_length)
                received = time.monotonic()
                plan = ExecutionPlan(header.exit, header.split)
                try:
                    self.profile.check_plan(plan)
                except ValueError as exc:
                    raise ProtocolError(str(exc)) from exc
                if not plan.offload_active:
                    raise ProtocolError(f"plan {plan} is fully local; nothing to offload")
            except ProtocolError as exc:
                logger.warning("protocol violation: %s", exc)
                try:
                    conn.sendall(encode_error(str(exc)))
                    _drain_and_close(conn)
                except OSError:
                    pass
                return
            except TransportError as exc:
                logger.warning("connection dropped: %s", exc)
                return

            _wait(self._mec_time(plan))
            entry = self.profile.splits[plan.split]
            frame = encode_result(plan.exit, plan.split,
                                  synthetic_class_id(plan.exit, plan.split),
                                  result_frame_size(entry.d_dl))
            bucket = paced_bucket(self.rate_dl, self.burst_bytes)
            chunk = chunk_size(self.burst_bytes)
            try:
                # header first marks the end of server compute; the constant
                # downlink delay then precedes the paced payload
                conn.sendall(frame[:HEADER_SIZE])
                _wait(self.profile.network.d_dl_si)
                shaped_send(conn, frame[HEADER_SIZE:], bucket, chunk)
            except OSError as exc:
                logger.warning("send failed: %s", exc)
                return
            record = RoundLog(plan, HEADER_SIZE + header.payload_length, len(frame),
                              time.monotonic() - received)
            self.rounds.append(record)
            if self.on_round is not None:
                self.on_round(record)


def emulate_socket(plan: ExecutionPlan, profile: SystemProfile,
                   cfg: Optional[EmulationConfig] = None) -> EmulationTrace:
    """Run one round against a server at ``cfg.listen_endpoint`` using wall-clock time."""
    cfg = cfg or EmulationConfig(mode="socket")
    if cfg.mode != "socket":
        raise ValueError("emulate_socket requires mode 'socket'")
    profile.check_plan(plan)
    stages = stage_plan(plan, profile, cfg.refined)
    t0 = time.monotonic()
    events: List[TraceEvent] = []

    def record(stage, segment=None):
        events.append(TraceEvent(time.monotonic() - t0, stage, segment))

    for name, segment, const, work, _ in stages:
        if name != "seg":
            break
        record("seg_start", segment)
        _wait(const + work)
        record("seg_end", segment)

    if plan.offload_active:
        _offload_round(plan, profile, cfg, stages, record)
    record("done")
    # the first event is the round start by definition
    base = events[0].time
    return EmulationTrace(plan, tuple(TraceEvent(e.time - base, e.stage, e.segment) for e in events))


def _offload_round(plan, profile, cfg, stages, record) -> None:
    host, port = parse_endpoint(cfg.listen_endpoint)
    by_name = {name: (const, work) for name, _, const, work, _ in stages}
    if "prep" in by_name:
        record("prep_start")
        _wait(sum(by_name["prep"]))
        record("prep_end")

    entry = profile.splits[plan.split]
    frame = encode_task(plan.exit, plan.split, task_frame_size(entry.d_ul))
    rate_ul = cfg.shaping_rate_ul or profile.network.b_ul_si
    try:
        sock = socket.create_connection((host, port), timeout=cfg.timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    with sock:
        sock.settimeout(cfg.timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        record("ul_start")
        _wait(profile.network.d_ul_si)
        try:
            shaped_send(sock, frame, paced_bucket(rate_ul, cfg.burst_bytes),
                        chunk_size(cfg.burst_bytes))
        except OSError as exc:
            raise TransportError(f"uplink failed: {exc}") from exc
        record("ul_end")
        record("mec_start")
        header, _ = _read_reply_header(sock)
        record("mec_end")
        record("dl_start")
        recv_exact(sock, header.payload_length)
        record("dl_end")


def _read_reply_header(sock):
    header = decode_header(recv_exact(sock, HEADER_SIZE))
    if header.msg_type == ERROR:
        message = recv_exact(sock, header.payload_length).decode("utf-8", "replace")
        raise ProtocolError(f"server reported error: {message}")
    if header.msg_type != RESULT:
        raise ProtocolError(f"expected RESULT, got message type {header.msg_type}")
    return header, None
