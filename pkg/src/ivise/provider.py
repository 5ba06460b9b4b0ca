"""Pluggable per-frame keypoint sources.

Three backends satisfy the same `infer` contract so the pipeline never
embeds a neural network: fixture playback from a versioned text file,
synthetic ground truth from the scene harness, and a remote-inference HTTP
client. Keypoint coordinates in fixtures and responses live in the
preprocessed frame space (INFERENCE_SIZE square).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import FixtureMiss, MalformedResponse, ParseError, RemoteUnavailable
from .geometry import (
    DEFAULT_LIMBS,
    AffinityField,
    CandidateKeypoint,
    PART_INDEX,
    Point2D,
    Skeleton,
    group_keypoints,
)

INFERENCE_SIZE = 160  # the accepted square input size for pose inference

FIXTURE_HEADER = "ivise-pose v1"
UNGROUPED = -1  # person_index marking candidates the backend did not group


@dataclass
class FrameRef:
    """One captured frame; the pixel buffer is optional for fixture-only runs."""

    camera_id: str
    sequence: int
    timestamp: int  # wall-clock milliseconds
    width: int
    height: int
    pixels: Optional[bytes] = None
    scale: Optional[tuple[float, float]] = None  # native px per inference px

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.pixels is not None and len(self.pixels) != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 3}")

    def as_array(self) -> np.ndarray:
        if self.pixels is None:
            raise ValueError("frame has no pixel buffer")
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)


@dataclass
class PoseResult:
    camera_id: str
    sequence: int
    skeletons: list[Skeleton] = field(default_factory=list)
    inference_millis: float = 0.0


def _check_bounds(skeletons: list[Skeleton], width: float, height: float, where: str) -> None:
    for skel in skeletons:
        for kp in skel.keypoints.values():
            x, y = kp.position
            if not (0 <= x < width and 0 <= y < height):
                raise ParseError(
                    f"keypoint {kp.kind} at ({x}, {y}) outside {width}x{height} in {where}")


class PoseFixture:
    """Recorded pose results keyed by (camera_id, sequence)."""

    def __init__(self, entries: dict[tuple[str, int], list[Skeleton]]):
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, camera_id: str, sequence: int) -> list[Skeleton]:
        key = (camera_id, sequence)
        if key not in self.entries:
            raise FixtureMiss(f"no recorded result for {key}")
        return self.entries[key]


def _parse_keypoint_line(tokens: list[str], lineno: int):
    if len(tokens) != 7:
        raise ParseError(f"expected 7 fields, got {len(tokens)}", line=lineno)
    camera_id, seq_s, person_s, kind, x_s, y_s, conf_s = tokens
    try:
        sequence = int(seq_s)
        person = int(person_s)
        x = float(x_s)
        y = float(y_s)
        conf = float(conf_s)
    except ValueError as exc:
        raise ParseError(f"bad numeric field: {exc}", line=lineno) from exc
    if kind not in PART_INDEX:
        raise ParseError(f"unknown part kind {kind!r}", line=lineno, field="part_kind")
    if sequence < 0:
        raise ParseError("sequence must be non-negative", line=lineno, field="sequence")
    if not 0.0 <= conf <= 1.0:
        raise ParseError("confidence outside [0,1]", line=lineno, field="confidence")
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ParseError("coordinates must be finite", line=lineno)
    return camera_id, sequence, person, kind, x, y, conf


def load_fixture(path: str) -> PoseFixture:
    """Parse a fixture file; keypoints must lie inside the inference square."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    stripped = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not stripped:
        raise ParseError("fixture file is empty")
    first_no, first = stripped[0]
    if first != FIXTURE_HEADER:
        raise ParseError(f"bad header {first!r}, expected {FIXTURE_HEADER!r}", line=first_no)

    entries: dict[tuple[str, int], dict[int, Skeleton]] = {}
    for lineno, line in stripped[1:]:
        camera_id, sequence, person, kind, x, y, conf = _parse_keypoint_line(
            line.split(), lineno)
        if person < 0:
            raise ParseError("person_index must be non-negative", line=lineno,
                             field="person_index")
        if not (0 <= x < INFERENCE_SIZE and 0 <= y < INFERENCE_SIZE):
            raise ParseError(
                f"keypoint outside {INFERENCE_SIZE}x{INFERENCE_SIZE} frame bounds",
                line=lineno)
        persons = entries.setdefault((camera_id, sequence), {})
        skel = persons.setdefault(person, Skeleton(person_index=person))
        if kind in skel.keypoints:
            raise ParseError(f"duplicate keypoint {kind!r} for person {person}",
                             line=lineno)
        skel.keypoints[kind] = CandidateKeypoint(kind, Point2D(x, y), conf)

    return PoseFixture({
        key: [persons[p] for p in sorted(persons)] for key, persons in entries.items()
    })


def save_fixture(fixture: PoseFixture, path: str) -> None:
    """Write the canonical text form: sorted keys, shortest float repr."""
    out = [FIXTURE_HEADER]
    for (camera_id, sequence) in sorted(fixture.entries):
        for skel in fixture.entries[(camera_id, sequence)]:
            for kind in sorted(skel.keypoints, key=PART_INDEX.__getitem__):
                kp = skel.keypoints[kind]
                out.append(f"{camera_id} {sequence} {skel.person_index} {kind} "
                           f"{kp.position.x!r} {kp.position.y!r} {kp.confidence!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


class FixturePoseProvider:
    """Replays recorded keypoints per (camera_id, sequence)."""

    def __init__(self, fixture: PoseFixture):
        self.fixture = fixture

    def infer(self, frame: FrameRef) -> PoseResult:
        start = time.perf_counter()
        skeletons = self.fixture.get(frame.camera_id, frame.sequence)
        _check_bounds(skeletons, frame.width, frame.height, "fixture playback")
        millis = (time.perf_counter() - start) * 1000.0
        return PoseResult(frame.camera_id, frame.sequence, list(skeletons), millis)


class SyntheticPoseProvider:
    """Returns the harness's ground-truth skeletons for each frame."""

    def __init__(self, truth: Callable[[str, int], list[Skeleton]]):
        self.truth = truth

    def infer(self, frame: FrameRef) -> PoseResult:
        start = time.perf_counter()
        skeletons = self.truth(frame.camera_id, frame.sequence)
        _check_bounds(skeletons, frame.width, frame.height, "synthetic scene")
        millis = (time.perf_counter() - start) * 1000.0
        return PoseResult(frame.camera_id, frame.sequence, skeletons, millis)


class RemotePoseProvider:
    """Posts frames to an external inference endpoint over HTTP.

    Request: POST of the raw RGB buffer with X-Camera-Id / X-Sequence /
    X-Width / X-Height headers. Response: fixture-format text where
    person_index -1 marks ungrouped candidates, optionally followed by
    `paf <limb_id> <x> <y> <vx> <vy>` field samples used to group them.
    """

    def __init__(self, url: str, timeout: float = 5.0, limb_catalog=DEFAULT_LIMBS):
        self.url = url
        self.timeout = timeout
        self.limb_catalog = limb_catalog

    def infer(self, frame: FrameRef) -> PoseResult:
        import requests

        start = time.perf_counter()
        try:
            resp = requests.post(
                self.url,
                data=frame.pixels or b"",
                headers={
                    "X-Camera-Id": frame.camera_id,
                    "X-Sequence": str(frame.sequence),
                    "X-Width": str(frame.width),
                    "X-Height": str(frame.height),
                    "Content-Type": "application/octet-stream",
                },
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise RemoteUnavailable(f"pose endpoint {self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise MalformedResponse(f"pose endpoint returned HTTP {resp.status_code}")
        try:
            skeletons = self._parse_response(resp.text, frame)
        except ParseError as exc:
            raise MalformedResponse(f"unparseable pose response: {exc}") from exc
        _check_bounds(skeletons, frame.width, frame.height, "remote response")
        millis = (time.perf_counter() - start) * 1000.0
        return PoseResult(frame.camera_id, frame.sequence, skeletons, millis)

    def _parse_response(self, text: str, frame: FrameRef) -> list[Skeleton]:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != FIXTURE_HEADER:
            raise ParseError("missing response header")
        grouped: dict[int, Skeleton] = {}
        loose: list[CandidateKeypoint] = []
        samples: dict[str, list[tuple[int, int, float, float]]] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            tokens = line.split()
            if tokens[0] == "paf":
                if len(tokens) != 6:
                    raise ParseError("paf line needs 6 fields", line=lineno)
                limb = tokens[1]
                try:
                    x, y = int(tokens[2]), int(tokens[3])
                    vx, vy = float(tokens[4]), float(tokens[5])
                except ValueError as exc:
                    raise ParseError(f"bad paf field: {exc}", line=lineno) from exc
                samples.setdefault(limb, []).append((x, y, vx, vy))
                continue
            _, sequence, person, kind, x, y, conf = _parse_keypoint_line(tokens, lineno)
            if sequence != frame.sequence:
                raise ParseError("response sequence does not match request", line=lineno)
            kp = CandidateKeypoint(kind, Point2D(x, y), conf)
            if person == UNGROUPED:
                loose.append(kp)
            else:
                skel = grouped.setdefault(person, Skeleton(person_index=person))
                skel.keypoints[kind] = kp
        skeletons = [grouped[p] for p in sorted(grouped)]
        if loose:
            fields = [_field_from_samples(limb, pts) for limb, pts in samples.items()]
            extra = group_keypoints(loose, fields, self.limb_catalog)
            for skel in extra:
                skel.person_index = len(skeletons)
                skeletons.append(skel)
        return skeletons


def _field_from_samples(limb: str, pts: list[tuple[int, int, float, float]]) -> AffinityField:
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, y0 = min(xs), min(ys)
    w = max(xs) - x0 + 1
    h = max(ys) - y0 + 1
    vx = np.zeros((h, w), dtype=np.float64)
    vy = np.zeros((h, w), dtype=np.float64)
    for x, y, fx, fy in pts:
        vx[y - y0, x - x0] = fx
        vy[y - y0, x - x0] = fy
    return AffinityField(limb, x0, y0, vx, vy)
