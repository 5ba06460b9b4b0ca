"""Per-camera edge service.

Ingests frames, applies the deterministic drop policy, and, while at least
one dispatched query is active, runs preprocess -> infer -> region
extraction and ships the encoded feature message to the fog. With no
active query the agent only marks frames, so operators can audit coverage.
"""

from __future__ import annotations

import glob
import logging
import os
import socket
import socketserver
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from . import protocol, regions
from .errors import FogDisconnected, IviseError
from .provider import FrameRef

log = logging.getLogger("ivise.edge")

STATS_HEADER = "ivise-stats v1"
LATENCY_BUCKETS_MS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
STAGES = ("preprocess", "infer", "extract", "encode_send")


@dataclass
class EdgeConfig:
    camera_id: str
    drop_ratio: float = 0.5
    query_ttl: float = 300.0
    buffer_capacity: int = 100
    heartbeat_secs: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.drop_ratio < 1.0:
            raise ValueError("drop_ratio must be in [0, 1)")
        if len(self.camera_id.encode("ascii", "ignore")) > protocol.SENDER_BYTES:
            raise ValueError(f"camera_id must fit {protocol.SENDER_BYTES} ASCII bytes")


class StageHistogram:
    """Fixed-bucket latency histogram plus count/total for mean lookups."""

    def __init__(self):
        self.count = 0
        self.total_ms = 0.0
        self.buckets = [0] * (len(LATENCY_BUCKETS_MS) + 1)

    def record(self, millis: float) -> None:
        self.count += 1
        self.total_ms += millis
        for i, bound in enumerate(LATENCY_BUCKETS_MS):
            if millis <= bound:
                self.buckets[i] += 1
                return
        self.buckets[-1] += 1


@dataclass
class EdgeStats:
    frames_seen: int = 0
    frames_processed: int = 0
    persons_detected: int = 0
    bytes_sent: int = 0
    messages_dropped: int = 0
    send_failures: int = 0
    stages: dict = field(default_factory=lambda: {s: StageHistogram() for s in STAGES})

    def render_text(self) -> str:
        lines = [STATS_HEADER]
        for name in ("frames_seen", "frames_processed", "persons_detected",
                     "bytes_sent", "messages_dropped", "send_failures"):
            lines.append(f"{name} {getattr(self, name)}")
        for stage in STAGES:
            hist = self.stages[stage]
            lines.append(f"stage {stage} count {hist.count} total_ms {hist.total_ms:.3f}")
            for bound, n in zip(LATENCY_BUCKETS_MS, hist.buckets):
                lines.append(f"stage {stage} le_{bound:g} {n}")
            lines.append(f"stage {stage} le_inf {hist.buckets[-1]}")
        return "\n".join(lines) + "\n"


class CollectTransport:
    """In-memory sink used by tests and the in-process topology runner."""

    def __init__(self, deliver: Optional[Callable[[bytes], None]] = None):
        self.messages: list[bytes] = []
        self.deliver = deliver

    def send(self, data: bytes) -> None:
        self.messages.append(data)
        if self.deliver is not None:
            self.deliver(data)

    def close(self) -> None:
        pass


class TcpTransport:
    """Persistent stream to the fog; a reader thread hands every inbound
    envelope (query dispatches) to the supplied callback."""

    def __init__(self, addr: tuple[str, int],
                 on_message: Optional[Callable[[bytes], None]] = None,
                 connect_timeout: float = 5.0):
        self.sock = socket.create_connection(addr, timeout=connect_timeout)
        self.sock.settimeout(None)
        self._lock = threading.Lock()
        self._closed = False
        if on_message is not None:
            self._reader = threading.Thread(
                target=self._read_loop, args=(on_message,), daemon=True)
            self._reader.start()

    def _read_loop(self, on_message: Callable[[bytes], None]) -> None:
        while not self._closed:
            try:
                data = read_envelope(self.sock.recv)
            except OSError:
                return
            if data is None:
                return
            on_message(data)

    def send(self, data: bytes) -> None:
        try:
            with self._lock:
                self.sock.sendall(data)
        except OSError as exc:
            raise FogDisconnected(str(exc)) from exc

    def close(self) -> None:
        self._closed = True
        try:
            self.sock.close()
        except OSError:
            pass


def read_envelope(recv: Callable[[int], bytes]) -> Optional[bytes]:
    """Read exactly one envelope's bytes from a blocking reader; None on EOF."""
    header = _read_exact(recv, protocol.HEADER.size)
    if header is None:
        return None
    length = protocol.HEADER.unpack(header)[3]
    if length == 0:
        return header
    payload = _read_exact(recv, length)
    if payload is None:
        return None
    return header + payload


def _read_exact(recv: Callable[[int], bytes], n: int) -> Optional[bytes]:
    chunks = []
    remaining = n
    while remaining:
        chunk = recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class EdgeAgent:
    """The frame pipeline for one camera.

    `offer` is synchronous and deterministic; the service wrappers push
    frames through it from whatever source the config names.
    """

    def __init__(self, config: EdgeConfig, provider, transport=None,
                 clock: Callable[[], float] = time.perf_counter,
                 wall: Callable[[], float] = time.time):
        self.config = config
        self.provider = provider
        self.transport = transport
        self.clock = clock
        self.wall = wall
        self.stats = EdgeStats()
        self._lock = threading.Lock()
        self._buffer: deque[bytes] = deque()
        self._active: dict[int, float] = {}  # query_id -> expiry (wall seconds)
        self._seen = 0

    # -- query activation --------------------------------------------------

    def receive(self, data: bytes) -> None:
        msg = protocol.decode(data)
        if isinstance(msg, protocol.QueryDispatch):
            self.handle_query_dispatch(msg)

    def handle_query_dispatch(self, msg: protocol.QueryDispatch) -> bool:
        """Activate or cancel a query; returns whether any query is active."""
        with self._lock:
            if msg.action == protocol.DISPATCH_CANCEL:
                self._active.pop(msg.query_id, None)
            else:
                self._active[msg.query_id] = self.wall() + (
                    msg.ttl_seconds if msg.ttl_seconds > 0 else self.config.query_ttl)
        return self.query_active()

    def query_active(self) -> bool:
        now = self.wall()
        with self._lock:
            expired = [qid for qid, end in self._active.items() if end <= now]
            for qid in expired:
                del self._active[qid]
            return bool(self._active)

    # -- frame pipeline ----------------------------------------------------

    def _keeps_frame(self, index: int) -> bool:
        keep = 1.0 - self.config.drop_ratio
        return int((index + 1) * keep) > int(index * keep)

    def offer(self, frame: FrameRef) -> Optional[protocol.FrameFeaturesMsg]:
        """Run one frame through the pipeline; returns the transmitted
        feature message, or None when idle, dropped, or empty."""
        index = self._seen
        self._seen += 1
        self.stats.frames_seen += 1
        if not self.query_active():
            return None
        if not self._keeps_frame(index):
            return None
        self.stats.frames_processed += 1

        t0 = self.clock()
        pre = regions.preprocess(frame)
        t1 = self.clock()
        try:
            pose = self.provider.infer(pre)
        except IviseError as exc:
            # provider failure skips the frame, never the pipeline
            log.warning("pose backend failed on %s/%s: %s",
                        frame.camera_id, frame.sequence, exc)
            self.stats.stages["preprocess"].record((t1 - t0) * 1000.0)
            return None
        t2 = self.clock()
        sx, sy = pre.scale
        native_pose = type(pose)(pose.camera_id, pose.sequence,
                                 [regions.scale_skeleton(s, sx, sy) for s in pose.skeletons],
                                 pose.inference_millis)
        sets = regions.extract_all(native_pose, frame)
        self.stats.persons_detected += len(native_pose.skeletons)
        t3 = self.clock()

        msg = None
        if protocol.should_transmit(native_pose):
            msg = protocol.frame_features(frame.camera_id, frame.sequence,
                                          frame.timestamp, native_pose, sets)
            self._enqueue(protocol.encode(msg))
            self.flush()
        t4 = self.clock()

        self.stats.stages["preprocess"].record((t1 - t0) * 1000.0)
        self.stats.stages["infer"].record((t2 - t1) * 1000.0)
        self.stats.stages["extract"].record((t3 - t2) * 1000.0)
        self.stats.stages["encode_send"].record((t4 - t3) * 1000.0)
        return msg

    def _enqueue(self, data: bytes) -> None:
        with self._lock:
            self._buffer.append(data)
            while len(self._buffer) > self.config.buffer_capacity:
                self._buffer.popleft()
                self.stats.messages_dropped += 1

    def flush(self) -> int:
        """Drain the send buffer; stops (and keeps the rest) on disconnect."""
        if self.transport is None:
            return 0
        sent = 0
        while True:
            with self._lock:
                if not self._buffer:
                    return sent
                data = self._buffer[0]
            try:
                self.transport.send(data)
            except FogDisconnected:
                self.stats.send_failures += 1
                return sent
            with self._lock:
                if self._buffer and self._buffer[0] is data:
                    self._buffer.popleft()
            self.stats.bytes_sent += len(data)
            sent += 1

    def send_heartbeat(self) -> None:
        beat = protocol.Heartbeat(self.config.camera_id,
                                  int(self.wall() * 1000), self.stats.frames_seen)
        self._enqueue(protocol.encode(beat))
        self.flush()

    def run(self, frames: Iterator[FrameRef], stop: Optional[threading.Event] = None) -> None:
        """Consume a frame source, heartbeating on the configured period."""
        next_beat = 0.0
        for frame in frames:
            if stop is not None and stop.is_set():
                return
            now = self.wall()
            if now >= next_beat:
                self.send_heartbeat()
                next_beat = now + self.config.heartbeat_secs
            self.offer(frame)


def directory_frames(camera_id: str, path: str) -> Iterator[FrameRef]:
    """Numerically ordered image files become the camera's frame sequence."""
    from PIL import Image
    import numpy as np

    names = [p for p in glob.glob(os.path.join(path, "*"))
             if os.path.splitext(p)[1].lower() in (".png", ".jpg", ".jpeg", ".bmp")]

    def order(p):
        stem = os.path.splitext(os.path.basename(p))[0]
        return (0, int(stem)) if stem.isdigit() else (1, stem)

    for sequence, name in enumerate(sorted(names, key=order)):
        with Image.open(name) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        yield FrameRef(camera_id, sequence, int(time.time() * 1000),
                       arr.shape[1], arr.shape[0], arr.tobytes())


class _StatusHandler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.sendall(self.server.agent.stats.render_text().encode("utf-8"))


class StatusServer(socketserver.ThreadingTCPServer):
    """One-shot TCP endpoint: connect, receive the stats text, done."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], agent: EdgeAgent):
        super().__init__(addr, _StatusHandler)
        self.agent = agent

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def read_status(addr: tuple[str, int], timeout: float = 5.0) -> str:
    with socket.create_connection(addr, timeout=timeout) as sock:
        chunks = []
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            chunks.append(chunk)
    return b"".join(chunks).decode("utf-8")
