"""Binary message schemas for edge->fog feature transfer and fog dispatch.

Envelope (bit-exact): 1-byte version, 1-byte kind, 8-byte NUL-padded ASCII
sender id, 4-byte big-endian payload length, payload. Region pixels travel
as row spans plus run-length-encoded RGB values, which is what keeps a
feature message far under the raw frame it replaces.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import kernels
from .errors import TruncatedPayload, UnknownKind, VersionMismatch
from .geometry import PART_INDEX, PART_KINDS
from .provider import PoseResult
from .regions import SECTION_INDEX, SECTIONS, PixelRegion

VERSION = 1
SENDER_BYTES = 8
HEADER = struct.Struct(">BB8sI")

KIND_QUERY_DISPATCH = 1
KIND_FRAME_FEATURES = 2
KIND_MATCH_REPORT = 3
KIND_HEARTBEAT = 4
KIND_ACK = 5
KIND_NAMES = {
    KIND_QUERY_DISPATCH: "QueryDispatch",
    KIND_FRAME_FEATURES: "FrameFeatures",
    KIND_MATCH_REPORT: "MatchReport",
    KIND_HEARTBEAT: "Heartbeat",
    KIND_ACK: "Ack",
}

DISPATCH_ACTIVATE = 1
DISPATCH_CANCEL = 2


def rle_encode(values: np.ndarray) -> bytes:
    """Pack (n, 3) uint8 values as (r, g, b, count:u16be) runs."""
    run_vals, run_lens = kernels.rle_encode_runs(np.ascontiguousarray(values, dtype=np.uint8))
    out = np.empty((run_vals.shape[0], 5), dtype=np.uint8)
    out[:, :3] = run_vals
    out[:, 3] = run_lens >> 8
    out[:, 4] = run_lens & 0xFF
    return out.tobytes()


def rle_decode(data: bytes) -> np.ndarray:
    if len(data) % 5 != 0:
        raise TruncatedPayload("RLE block length not a multiple of 5")
    runs = np.frombuffer(data, dtype=np.uint8).reshape(-1, 5)
    lengths = runs[:, 3].astype(np.int64) * 256 + runs[:, 4]
    return np.repeat(runs[:, :3], lengths, axis=0)


def spans_from_coords(coords: np.ndarray) -> np.ndarray:
    """Collapse (y, x)-sorted coordinates into (y, x0, length) row spans."""
    if coords.shape[0] == 0:
        return np.zeros((0, 3), dtype=np.int64)
    xs = coords[:, 0]
    ys = coords[:, 1]
    brk = np.nonzero((ys[1:] != ys[:-1]) | (xs[1:] != xs[:-1] + 1))[0] + 1
    starts = np.concatenate(([0], brk))
    ends = np.concatenate((brk, [coords.shape[0]]))
    return np.stack([ys[starts], xs[starts], ends - starts], axis=1).astype(np.int64)


def spans_to_coords(spans: np.ndarray) -> np.ndarray:
    if spans.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.int64)
    total = int(spans[:, 2].sum())
    xs = np.empty(total, dtype=np.int64)
    ys = np.empty(total, dtype=np.int64)
    pos = 0
    for y, x0, length in spans:
        xs[pos:pos + length] = np.arange(x0, x0 + length)
        ys[pos:pos + length] = y
        pos += length
    return np.stack([xs, ys], axis=1)


@dataclass
class RegionBlob:
    """Wire form of one PixelRegion: bounding box, row spans, RLE values."""

    section: str
    box: tuple[int, int, int, int]
    spans: bytes  # packed >HHH per span
    rle: bytes

    @classmethod
    def from_region(cls, region: PixelRegion) -> "RegionBlob":
        if region.coords is None:
            raise ValueError("region lacks coordinates; cannot build spans")
        spans = spans_from_coords(region.coords)
        packed = np.empty((spans.shape[0], 3), dtype=">u2")
        packed[:, 0] = spans[:, 0]
        packed[:, 1] = spans[:, 1]
        packed[:, 2] = spans[:, 2]
        return cls(region.section, region.bounding_box, packed.tobytes(),
                   rle_encode(region.pixels))

    def to_region(self, source: tuple[str, int, int]) -> PixelRegion:
        coords = spans_to_coords(self.span_array())
        values = rle_decode(self.rle)
        if values.shape[0] != coords.shape[0]:
            raise TruncatedPayload("region values do not cover its spans")
        return PixelRegion(self.section, values, source, self.box, coords)

    def span_array(self) -> np.ndarray:
        if len(self.spans) % 6 != 0:
            raise TruncatedPayload("span block length not a multiple of 6")
        return np.frombuffer(self.spans, dtype=">u2").reshape(-1, 3).astype(np.int64)

    @property
    def pixel_count(self) -> int:
        return int(self.span_array()[:, 2].sum())


@dataclass
class QueryDispatch:
    query_id: int
    action: int  # DISPATCH_ACTIVATE | DISPATCH_CANCEL
    ttl_seconds: int
    text: str


@dataclass
class PersonFeatures:
    person_index: int
    keypoints: list[tuple[str, float, float, float]]  # kind, x, y, confidence
    regions: list[RegionBlob]


@dataclass
class FrameFeaturesMsg:
    camera_id: str
    sequence: int
    timestamp: int
    persons: list[PersonFeatures]


@dataclass
class MatchReportMsg:
    query_id: int
    camera_id: str
    sequence: int
    timestamp: int
    latitude: float
    longitude: float
    person_index: int
    clauses: list[tuple[str, str, int]]  # section, color, expected count
    evidence: list[RegionBlob] = field(default_factory=list)


@dataclass
class Heartbeat:
    camera_id: str
    timestamp: int
    frames_seen: int


@dataclass
class Ack:
    token: int


Message = Union[QueryDispatch, FrameFeaturesMsg, MatchReportMsg, Heartbeat, Ack]


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u8(self, v): self.parts.append(struct.pack(">B", v))
    def u16(self, v): self.parts.append(struct.pack(">H", v))
    def u32(self, v): self.parts.append(struct.pack(">I", v))
    def u64(self, v): self.parts.append(struct.pack(">Q", v))
    def f64(self, v): self.parts.append(struct.pack(">d", v))

    def text(self, s: str):
        raw = s.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError("string too long for wire")
        self.u16(len(raw))
        self.parts.append(raw)

    def blob(self, b: bytes):
        self.u32(len(b))
        self.parts.append(b)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayload(
                f"payload ends at byte {len(self.data)}, needed {self.pos + n}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self): return struct.unpack(">B", self._take(1))[0]
    def u16(self): return struct.unpack(">H", self._take(2))[0]
    def u32(self): return struct.unpack(">I", self._take(4))[0]
    def u64(self): return struct.unpack(">Q", self._take(8))[0]
    def f64(self): return struct.unpack(">d", self._take(8))[0]
    def text(self): return self._take(self.u16()).decode("utf-8")
    def blob(self): return self._take(self.u32())

    def done(self):
        if self.pos != len(self.data):
            raise TruncatedPayload(f"{len(self.data) - self.pos} trailing payload bytes")


def _write_region(w: _Writer, blob: RegionBlob):
    w.u8(SECTION_INDEX[blob.section])
    for v in blob.box:
        w.u16(v)
    w.blob(blob.spans)
    w.blob(blob.rle)


def _read_region(r: _Reader) -> RegionBlob:
    section_idx = r.u8()
    if section_idx >= len(SECTIONS):
        raise TruncatedPayload(f"bad section index {section_idx}")
    box = (r.u16(), r.u16(), r.u16(), r.u16())
    spans = r.blob()
    rle = r.blob()
    return RegionBlob(SECTIONS[section_idx], box, spans, rle)


def _encode_payload(msg: Message) -> tuple[int, bytes, str]:
    w = _Writer()
    if isinstance(msg, QueryDispatch):
        w.u64(msg.query_id)
        w.u8(msg.action)
        w.u32(msg.ttl_seconds)
        w.text(msg.text)
        return KIND_QUERY_DISPATCH, w.getvalue(), "fog"
    if isinstance(msg, FrameFeaturesMsg):
        w.text(msg.camera_id)
        w.u64(msg.sequence)
        w.u64(msg.timestamp)
        w.u16(len(msg.persons))
        for person in msg.persons:
            w.u16(person.person_index)
            w.u8(len(person.keypoints))
            for kind, x, y, conf in person.keypoints:
                w.u8(PART_INDEX[kind])
                w.f64(x)
                w.f64(y)
                w.f64(conf)
            w.u8(len(person.regions))
            for region in person.regions:
                _write_region(w, region)
        return KIND_FRAME_FEATURES, w.getvalue(), msg.camera_id
    if isinstance(msg, MatchReportMsg):
        w.u64(msg.query_id)
        w.text(msg.camera_id)
        w.u64(msg.sequence)
        w.u64(msg.timestamp)
        w.f64(msg.latitude)
        w.f64(msg.longitude)
        w.u16(msg.person_index)
        w.u8(len(msg.clauses))
        for section, color, count in msg.clauses:
            w.u8(SECTION_INDEX[section])
            w.text(color)
            w.u16(count)
        w.u8(len(msg.evidence))
        for region in msg.evidence:
            _write_region(w, region)
        return KIND_MATCH_REPORT, w.getvalue(), "fog"
    if isinstance(msg, Heartbeat):
        w.text(msg.camera_id)
        w.u64(msg.timestamp)
        w.u64(msg.frames_seen)
        return KIND_HEARTBEAT, w.getvalue(), msg.camera_id
    if isinstance(msg, Ack):
        w.u64(msg.token)
        return KIND_ACK, w.getvalue(), "fog"
    raise TypeError(f"not a wire message: {type(msg).__name__}")


def encode(msg: Message) -> bytes:
    kind, payload, sender = _encode_payload(msg)
    raw_sender = sender.encode("ascii")
    if len(raw_sender) > SENDER_BYTES:
        raise ValueError(f"sender id {sender!r} exceeds {SENDER_BYTES} bytes")
    return HEADER.pack(VERSION, kind, raw_sender.ljust(SENDER_BYTES, b"\0"),
                       len(payload)) + payload


def decode(data: bytes) -> Message:
    """Inverse of encode; rejects foreign versions, unknown kinds, and any
    length mismatch between the declared and actual payload."""
    if len(data) < HEADER.size:
        raise TruncatedPayload(f"{len(data)} bytes is shorter than the header")
    version, kind, _sender, length = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatch(f"version {version}, expected {VERSION}")
    if kind not in KIND_NAMES:
        raise UnknownKind(f"kind byte {kind}")
    if len(data) != HEADER.size + length:
        raise TruncatedPayload(
            f"declared {length} payload bytes, got {len(data) - HEADER.size}")
    r = _Reader(data[HEADER.size:])
    msg = _decode_payload(kind, r)
    r.done()
    return msg


def _decode_payload(kind: int, r: _Reader) -> Message:
    if kind == KIND_QUERY_DISPATCH:
        return QueryDispatch(r.u64(), r.u8(), r.u32(), r.text())
    if kind == KIND_FRAME_FEATURES:
        camera_id = r.text()
        sequence = r.u64()
        timestamp = r.u64()
        persons = []
        for _ in range(r.u16()):
            person_index = r.u16()
            keypoints = []
            for _ in range(r.u8()):
                part_idx = r.u8()
                if part_idx >= len(PART_KINDS):
                    raise TruncatedPayload(f"bad part index {part_idx}")
                keypoints.append((PART_KINDS[part_idx], r.f64(), r.f64(), r.f64()))
            regions = [_read_region(r) for _ in range(r.u8())]
            persons.append(PersonFeatures(person_index, keypoints, regions))
        return FrameFeaturesMsg(camera_id, sequence, timestamp, persons)
    if kind == KIND_MATCH_REPORT:
        query_id = r.u64()
        camera_id = r.text()
        sequence = r.u64()
        timestamp = r.u64()
        lat = r.f64()
        lon = r.f64()
        person_index = r.u16()
        clauses = []
        for _ in range(r.u8()):
            section_idx = r.u8()
            if section_idx >= len(SECTIONS):
                raise TruncatedPayload(f"bad section index {section_idx}")
            clauses.append((SECTIONS[section_idx], r.text(), r.u16()))
        evidence = [_read_region(r) for _ in range(r.u8())]
        return MatchReportMsg(query_id, camera_id, sequence, timestamp, lat, lon,
                              person_index, clauses, evidence)
    if kind == KIND_HEARTBEAT:
        return Heartbeat(r.text(), r.u64(), r.u64())
    return Ack(r.u64())


def byte_size(msg: Message) -> int:
    """Exact encoded length, the unit of the traffic accounting."""
    return len(encode(msg))


def should_transmit(pose: PoseResult) -> bool:
    """Frames without any detected person are never transmitted."""
    return len(pose.skeletons) > 0


def frame_features(camera_id: str, sequence: int, timestamp: int,
                   pose: PoseResult, region_sets) -> FrameFeaturesMsg:
    """Assemble the per-frame feature message from a pose and its regions."""
    persons = []
    by_index = {rs.person[2]: rs for rs in region_sets}
    for skel in pose.skeletons:
        rs = by_index.get(skel.person_index)
        regions = []
        if rs is not None:
            for section in SECTIONS:
                if section in rs.regions:
                    regions.append(RegionBlob.from_region(rs.regions[section]))
        keypoints = [
            (kind, kp.position.x, kp.position.y, kp.confidence)
            for kind, kp in sorted(skel.keypoints.items(), key=lambda kv: PART_INDEX[kv[0]])
        ]
        persons.append(PersonFeatures(skel.person_index, keypoints, regions))
    return FrameFeaturesMsg(camera_id, sequence, timestamp, persons)
