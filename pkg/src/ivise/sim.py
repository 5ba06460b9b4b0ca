"""Deterministic synthetic scenes with ground truth, the in-process
topology runner, and metric capture.

Persons are flat-colored geometric figures: the section geometry is real
(the same triangles, lines, and head square the extractor crops), the
colors are palette anchors, so every stage downstream of the stubbed
neural model can be checked against exact expectations.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .colors import DEFAULT_PALETTES, PaletteSet
from .edge import CollectTransport, EdgeAgent, EdgeConfig
from .errors import OverlapError
from .fog import FogNode
from .geometry import CandidateKeypoint, Point2D, Skeleton
from .provider import INFERENCE_SIZE, FrameRef, PoseResult, SyntheticPoseProvider
from .query import CameraInfo, CameraRegistry, FeatureIndex
from .regions import extract_all

# Raw-frame baseline: the uncompressed RGB buffer scaled so a 1080p frame
# sits at the ~100KB mark the byte-accounting figures are drawn against.
RAW_BASELINE_SCALE = 100_000 / (1920 * 1080 * 3)

# Skeleton template on the inference grid; a person spans 11x34 grid cells.
_TEMPLATE = {
    "left_ear": (2, 4), "right_ear": (8, 4),
    "left_eye": (3, 5), "right_eye": (7, 5),
    "nose": (5, 6),
    "neck": (5, 8),
    "left_shoulder": (2, 9), "right_shoulder": (8, 9),
    "left_elbow": (1, 13), "right_elbow": (9, 13),
    "left_wrist": (1, 17), "right_wrist": (9, 17),
    "left_hip": (3, 18), "right_hip": (7, 18),
    "left_knee": (3, 26), "right_knee": (7, 26),
    "left_ankle": (3, 33), "right_ankle": (7, 33),
}


@dataclass(frozen=True)
class PersonSpec:
    """One synthetic person: inference-grid origin plus section color names
    (palette anchors for the section's dictionary)."""

    origin: tuple[int, int]
    torso_color: str = "grey"
    leg_color: str = "blue"
    face_color: str = "white"
    hair_color: str = "brown"


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int = 1920
    height: int = 1080
    persons: tuple[PersonSpec, ...] = (PersonSpec((70, 40)),)
    background: tuple[int, int, int] = (18, 52, 30)
    noise: int = 0

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise level must be non-negative")


def _anchor(palettes: PaletteSet, section: str, name: str) -> tuple[int, int, int]:
    palette = palettes.for_section(section)
    for entry_name, rgb in palette.entries:
        if entry_name == name:
            if rgb is None:
                raise ValueError(f"{name!r} has no anchor in the {palette.palette_kind} palette")
            return rgb
    raise ValueError(f"{name!r} is not a {palette.palette_kind} palette name")


def _person_colors(spec: PersonSpec, palettes: PaletteSet) -> dict[str, tuple[int, int, int]]:
    return {
        "torso": _anchor(palettes, "torso", spec.torso_color),
        "left_leg": _anchor(palettes, "left_leg", spec.leg_color),
        "right_leg": _anchor(palettes, "right_leg", spec.leg_color),
        "face": _anchor(palettes, "face", spec.face_color),
        "hair": _anchor(palettes, "hair", spec.hair_color),
    }


def _person_color_names(spec: PersonSpec) -> dict[str, str]:
    return {
        "torso": spec.torso_color,
        "left_leg": spec.leg_color,
        "right_leg": spec.leg_color,
        "face": spec.face_color,
        "hair": spec.hair_color,
    }


def scene_skeletons(spec: SceneSpec, sequence: int) -> list[Skeleton]:
    """Ground-truth skeletons in inference coordinates, confidence 1."""
    del sequence  # persons are static; frames differ only by noise
    out = []
    for index, person in enumerate(spec.persons):
        ox, oy = person.origin
        skel = Skeleton(person_index=index)
        for kind, (dx, dy) in _TEMPLATE.items():
            x, y = float(ox + dx), float(oy + dy)
            if not (0 <= x < INFERENCE_SIZE and 0 <= y < INFERENCE_SIZE):
                raise ValueError(f"person {index} keypoint {kind} outside the inference grid")
            skel.keypoints[kind] = CandidateKeypoint(kind, Point2D(x, y), 1.0)
        out.append(skel)
    return out


def _native_skeletons(spec: SceneSpec) -> list[Skeleton]:
    sx = spec.width / INFERENCE_SIZE
    sy = spec.height / INFERENCE_SIZE
    out = []
    for index, person in enumerate(spec.persons):
        ox, oy = person.origin
        skel = Skeleton(person_index=index)
        for kind, (dx, dy) in _TEMPLATE.items():
            skel.keypoints[kind] = CandidateKeypoint(
                kind, Point2D((ox + dx) * sx, (oy + dy) * sy), 1.0)
        out.append(skel)
    return out


def render_scene(spec: SceneSpec, sequence: int,
                 camera_id: str = "cam0",
                 palettes: PaletteSet = DEFAULT_PALETTES):
    """Draw one frame.

    Returns (frame, ground-truth inference-space PoseResult, expected
    per-person section descriptions as {section: (color name, pixels)}).
    """
    canvas = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    canvas[:] = spec.background
    timestamp = sequence * 100  # synthetic 10 fps clock

    base = FrameRef(camera_id, sequence, timestamp, spec.width, spec.height,
                    canvas.tobytes())
    native = _native_skeletons(spec)
    pose = PoseResult(camera_id, sequence, native)
    region_sets = extract_all(pose, base)

    boxes = []
    expected = []
    for person, rs in zip(spec.persons, region_sets):
        colors = _person_colors(person, palettes)
        names = _person_color_names(person)
        person_box = None
        exp = {}
        for section, region in rs.regions.items():
            xs = region.coords[:, 0]
            ys = region.coords[:, 1]
            canvas[ys, xs] = colors[section]
            x0, y0, x1, y1 = region.bounding_box
            person_box = _merge_box(person_box, (x0, y0, x1, y1))
            exp[section] = (names[section], region.pixel_count)
        if rs.missing:
            raise ValueError(f"template person lost sections {rs.missing}")
        boxes.append(person_box)
        expected.append(exp)

    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if _boxes_intersect(boxes[i], boxes[j]):
                raise OverlapError(f"persons {i} and {j} overlap")

    if spec.noise > 0:
        rng = np.random.default_rng((spec.seed, sequence))
        jitter = rng.integers(-spec.noise, spec.noise + 1, size=canvas.shape,
                              dtype=np.int16)
        canvas = np.clip(canvas.astype(np.int16) + jitter, 0, 255).astype(np.uint8)

    frame = FrameRef(camera_id, sequence, timestamp, spec.width, spec.height,
                     canvas.tobytes())
    truth = PoseResult(camera_id, sequence, scene_skeletons(spec, sequence))
    return frame, truth, expected


def _merge_box(box, new):
    if box is None:
        return new
    return (min(box[0], new[0]), min(box[1], new[1]),
            max(box[2], new[2]), max(box[3], new[3]))


def _boxes_intersect(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


@dataclass
class FrameMetric:
    camera_id: str
    sequence: int
    processed: bool
    preprocess_ms: float
    infer_ms: float
    extract_ms: float
    encode_send_ms: float
    raw_bytes: int
    baseline_bytes: int
    sent_bytes: int
    persons: int
    matches: int

    @property
    def ratio(self) -> Optional[float]:
        if self.sent_bytes <= 0 or self.baseline_bytes <= 0:
            return None
        return self.sent_bytes / self.baseline_bytes


@dataclass
class RunMetrics:
    frames: list[FrameMetric] = field(default_factory=list)
    expected: set = field(default_factory=set)  # (query_id, cam, seq, person)
    found: set = field(default_factory=set)
    query_ids: list[int] = field(default_factory=list)

    @property
    def precision(self) -> float:
        if not self.found:
            return float("nan")
        return len(self.found & self.expected) / len(self.found)

    @property
    def recall(self) -> float:
        if not self.expected:
            return float("nan")
        return len(self.found & self.expected) / len(self.expected)

    @property
    def mean_ratio(self) -> float:
        ratios = [m.ratio for m in self.frames if m.ratio is not None]
        if not ratios:
            return float("nan")
        return sum(ratios) / len(ratios)


def run_topology(edges: int, frames: int, queries: Sequence[str],
                 spec_for_edge: Callable[[int], SceneSpec] | SceneSpec,
                 drop_ratio: float = 0.5,
                 palettes: PaletteSet = DEFAULT_PALETTES,
                 index_path: Optional[str] = None,
                 clock: Callable[[], float] = time.perf_counter) -> RunMetrics:
    """Run an in-process fog plus N synthetic edges over the wire codecs.

    Fully deterministic given the scene seeds and an injected clock; the
    default clock only affects the recorded latencies.
    """
    if edges < 1 or frames < 1:
        raise ValueError("need at least one edge and one frame")
    specs = [spec_for_edge(i) if callable(spec_for_edge) else spec_for_edge
             for i in range(edges)]
    registry = CameraRegistry([
        CameraInfo(f"cam{i}", "in-process", 42.0 + 0.5 * i, -75.9 - 0.25 * i)
        for i in range(edges)
    ])
    fog = FogNode(registry, palettes, FeatureIndex(index_path))

    agents = []
    for i in range(edges):
        provider = SyntheticPoseProvider(
            lambda cam, seq, s=specs[i]: scene_skeletons(s, seq))
        agent = EdgeAgent(
            EdgeConfig(f"cam{i}", drop_ratio=drop_ratio, heartbeat_secs=1e9),
            provider,
            CollectTransport(deliver=fog.receive),
            clock=clock,
        )
        fog.attach_edge(f"cam{i}", agent.receive)
        agents.append(agent)
        agent.send_heartbeat()

    metrics = RunMetrics()
    sessions = []
    for text in queries:
        query_id, _ = fog.submit_query(text)
        metrics.query_ids.append(query_id)
        sessions.append(fog.sessions[query_id])

    for sequence in range(frames):
        for i, agent in enumerate(agents):
            camera_id = f"cam{i}"
            frame, truth, expected = render_scene(specs[i], sequence, camera_id,
                                                  palettes)
            reports_before = sum(len(s.reports) for s in sessions)
            stage_before = {name: agent.stats.stages[name].total_ms
                            for name in agent.stats.stages}
            sent_before = agent.stats.bytes_sent
            processed_before = agent.stats.frames_processed

            msg = agent.offer(frame)

            processed = agent.stats.frames_processed > processed_before
            sent_bytes = agent.stats.bytes_sent - sent_before
            raw = frame.width * frame.height * 3
            metrics.frames.append(FrameMetric(
                camera_id=camera_id,
                sequence=sequence,
                processed=processed,
                preprocess_ms=agent.stats.stages["preprocess"].total_ms - stage_before["preprocess"],
                infer_ms=agent.stats.stages["infer"].total_ms - stage_before["infer"],
                extract_ms=agent.stats.stages["extract"].total_ms - stage_before["extract"],
                encode_send_ms=agent.stats.stages["encode_send"].total_ms - stage_before["encode_send"],
                raw_bytes=raw,
                baseline_bytes=int(raw * RAW_BASELINE_SCALE),
                sent_bytes=sent_bytes,
                persons=len(truth.skeletons) if processed else 0,
                matches=sum(len(s.reports) for s in sessions) - reports_before,
            ))

            if processed and msg is not None:
                for session in sessions:
                    if not session.query.in_scope(camera_id):
                        continue
                    wanted = {c.section for c in session.query.clauses}
                    for person_index, exp in enumerate(expected):
                        if not wanted.issubset(exp.keys()):
                            continue
                        if all(exp[c.section][0] == c.color
                               for c in session.query.clauses):
                            metrics.expected.add(
                                (session.query_id, camera_id, sequence, person_index))

    for session in sessions:
        for report in session.reports:
            metrics.found.add(report.key())
    fog.index.close()
    return metrics


_COLUMNS = ("camera_id", "sequence", "processed", "preprocess_ms", "infer_ms",
            "extract_ms", "encode_send_ms", "raw_bytes", "baseline_bytes",
            "sent_bytes", "persons", "matches", "ratio")


def emit_metrics(metrics: RunMetrics, out_dir: str) -> str:
    """Write per-frame rows plus a trailing summary row to metrics.csv.

    Columns: camera_id, sequence, processed, per-stage milliseconds,
    raw/baseline/sent byte counts, person and match counts, and the
    sent/baseline ratio (blank for untransmitted frames). The summary row
    carries totals and, in the ratio column, the mean reduction ratio.
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "metrics.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for m in metrics.frames:
            writer.writerow([
                m.camera_id, m.sequence, int(m.processed),
                f"{m.preprocess_ms:.3f}", f"{m.infer_ms:.3f}",
                f"{m.extract_ms:.3f}", f"{m.encode_send_ms:.3f}",
                m.raw_bytes, m.baseline_bytes, m.sent_bytes,
                m.persons, m.matches,
                f"{m.ratio:.6f}" if m.ratio is not None else "",
            ])
        if metrics.frames:
            done = [m for m in metrics.frames if m.processed]
            n = max(len(done), 1)
            writer.writerow([
                "summary", len(metrics.frames), len(done),
                f"{sum(m.preprocess_ms for m in done) / n:.3f}",
                f"{sum(m.infer_ms for m in done) / n:.3f}",
                f"{sum(m.extract_ms for m in done) / n:.3f}",
                f"{sum(m.encode_send_ms for m in done) / n:.3f}",
                sum(m.raw_bytes for m in metrics.frames),
                sum(m.baseline_bytes for m in metrics.frames),
                sum(m.sent_bytes for m in metrics.frames),
                sum(m.persons for m in metrics.frames),
                sum(m.matches for m in metrics.frames),
                f"{metrics.mean_ratio:.6f}" if metrics.frames else "",
            ])
    return path
