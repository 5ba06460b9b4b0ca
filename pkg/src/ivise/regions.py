"""Frame preprocessing and cropping of keypoint-derived body regions.

Five sections per person: the torso triangle (hips + lower neck), two
hip-to-knee pixel lines, the face triangle (ears + neck), and the hair
square sitting on the ear line. Regions are cropped from the native frame;
inference runs on the blurred INFERENCE_SIZE square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateRegion, EmptyFrame, MissingKeypoint
from .geometry import Point2D, Skeleton
from .provider import INFERENCE_SIZE, FrameRef, PoseResult

SECTIONS = ("torso", "left_leg", "right_leg", "face", "hair")
SECTION_INDEX = {name: i for i, name in enumerate(SECTIONS)}

LEG_LINE_WIDTH = 3  # line pixel plus one neighbor to each side

_SECTION_PARTS = {
    "torso": ("left_hip", "right_hip", "neck"),
    "left_leg": ("left_hip", "left_knee"),
    "right_leg": ("right_hip", "right_knee"),
    "face": ("left_ear", "right_ear", "neck"),
    "hair": ("left_ear", "right_ear"),
}


@dataclass
class PixelRegion:
    """Pixels cropped from one body section of one person.

    `pixels` are RGB triples in canonical (y, x) scan order; `coords` holds
    the matching native-frame coordinates when the region was cropped
    locally (wire-decoded regions reconstruct them from spans).
    """

    section: str
    pixels: np.ndarray  # (n, 3) uint8
    source: tuple[str, int, int]  # camera_id, sequence, person_index
    bounding_box: tuple[int, int, int, int]  # min_x, min_y, max_x, max_y inclusive
    coords: np.ndarray | None = None  # (n, 2) int64 as (x, y)

    def __post_init__(self):
        if self.section not in SECTION_INDEX:
            raise ValueError(f"unknown section {self.section!r}")
        if len(self.pixels) == 0:
            raise ValueError("region must hold at least one pixel")

    @property
    def pixel_count(self) -> int:
        return int(self.pixels.shape[0])


@dataclass
class RegionSet:
    """All extractable sections of one person; absent ones are listed, never
    silently dropped, so regions plus missing always cover the catalog."""

    person: tuple[str, int, int]
    regions: dict[str, PixelRegion] = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)


def preprocess(frame: FrameRef) -> FrameRef:
    """Resize to the inference square (bilinear) and smooth with a 3x3 box
    blur; the native-to-inference scale pair is recorded on the result."""
    if frame.pixels is None:
        raise EmptyFrame(f"frame {frame.camera_id}/{frame.sequence} has no pixels")
    img = frame.as_array()
    resized = kernels.bilinear_resize(img, INFERENCE_SIZE, INFERENCE_SIZE)
    smoothed = kernels.box_blur3(resized)
    return FrameRef(
        camera_id=frame.camera_id,
        sequence=frame.sequence,
        timestamp=frame.timestamp,
        width=INFERENCE_SIZE,
        height=INFERENCE_SIZE,
        pixels=smoothed.tobytes(),
        scale=(frame.width / INFERENCE_SIZE, frame.height / INFERENCE_SIZE),
    )


def scale_skeleton(skeleton: Skeleton, sx: float, sy: float) -> Skeleton:
    """Map keypoints between coordinate spaces (inference -> native)."""
    from .geometry import CandidateKeypoint

    out = Skeleton(person_index=skeleton.person_index)
    for kind, kp in skeleton.keypoints.items():
        out.keypoints[kind] = CandidateKeypoint(
            kind, Point2D(kp.position.x * sx, kp.position.y * sy), kp.confidence)
    return out


def _require(skeleton: Skeleton, section: str, parts: tuple[str, ...]) -> list[Point2D]:
    absent = tuple(p for p in parts if p not in skeleton.keypoints)
    if absent:
        raise MissingKeypoint(section, absent)
    return [skeleton.keypoints[p].position for p in parts]


def _gather(frame: FrameRef, xs: np.ndarray, ys: np.ndarray, section: str,
            person_index: int) -> PixelRegion:
    if frame.pixels is None:
        raise EmptyFrame(f"frame {frame.camera_id}/{frame.sequence} has no pixels")
    keep = (xs >= 0) & (xs < frame.width) & (ys >= 0) & (ys < frame.height)
    xs, ys = xs[keep], ys[keep]
    if xs.size == 0:
        raise DegenerateRegion(section, "no pixels inside the frame")
    order = np.lexsort((xs, ys))
    xs, ys = xs[order], ys[order]
    img = frame.as_array()
    return PixelRegion(
        section=section,
        pixels=img[ys, xs],
        source=(frame.camera_id, frame.sequence, person_index),
        bounding_box=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
        coords=np.stack([xs, ys], axis=1),
    )


def _triangle_pixels(a: Point2D, b: Point2D, c: Point2D, section: str):
    area2 = abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
    if area2 <= 1e-9:
        raise DegenerateRegion(section, "zero-area triangle")
    x_lo = int(math.floor(min(a.x, b.x, c.x)))
    x_hi = int(math.ceil(max(a.x, b.x, c.x)))
    y_lo = int(math.floor(min(a.y, b.y, c.y)))
    y_hi = int(math.ceil(max(a.y, b.y, c.y)))
    return kernels.triangle_interior(a.x, a.y, b.x, b.y, c.x, c.y,
                                     x_lo, x_hi, y_lo, y_hi)


def torso_region(skeleton: Skeleton, frame: FrameRef) -> PixelRegion:
    """Triangle spanned by the two hips and the lower neck."""
    hl, hr, neck = _require(skeleton, "torso", _SECTION_PARTS["torso"])
    xs, ys = _triangle_pixels(hl, hr, neck, "torso")
    return _gather(frame, xs, ys, "torso", skeleton.person_index)


def face_region(skeleton: Skeleton, frame: FrameRef) -> PixelRegion:
    """Triangle spanned by the two ears and the neck."""
    el, er, neck = _require(skeleton, "face", _SECTION_PARTS["face"])
    xs, ys = _triangle_pixels(el, er, neck, "face")
    return _gather(frame, xs, ys, "face", skeleton.person_index)


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    """Classic integer line walk, endpoints inclusive."""
    points = []
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy
    return points


def _leg_region(skeleton: Skeleton, frame: FrameRef, side: str) -> PixelRegion:
    section = f"{side}_leg"
    hip, knee = _require(skeleton, section, _SECTION_PARTS[section])
    if math.dist(hip, knee) <= 1e-9:
        raise DegenerateRegion(section, "hip and knee coincide")
    x0 = int(math.floor(hip.x + 0.5))
    y0 = int(math.floor(hip.y + 0.5))
    x1 = int(math.floor(knee.x + 0.5))
    y1 = int(math.floor(knee.y + 0.5))
    line = _bresenham(x0, y0, x1, y1)
    # width-3 dilation: each line pixel plus its two neighbors across the
    # dominant axis
    if abs(y1 - y0) >= abs(x1 - x0):
        offs = ((-1, 0), (0, 0), (1, 0))
    else:
        offs = ((0, -1), (0, 0), (0, 1))
    xs = np.array([x + ox for x, y in line for ox, oy in offs], dtype=np.int64)
    ys = np.array([y + oy for x, y in line for ox, oy in offs], dtype=np.int64)
    return _gather(frame, xs, ys, section, skeleton.person_index)


def leg_regions(skeleton: Skeleton, frame: FrameRef):
    """Hip-to-knee lines, one per side; a side whose pair is absent comes
    back as None. Raises MissingKeypoint only when both pairs are absent."""
    out = []
    misses = []
    for side in ("left", "right"):
        try:
            out.append(_leg_region(skeleton, frame, side))
        except MissingKeypoint as exc:
            misses.append(exc)
            out.append(None)
    if len(misses) == 2:
        raise MissingKeypoint("legs", tuple(p for m in misses for p in m.parts))
    return out[0], out[1]


def hair_region(skeleton: Skeleton, frame: FrameRef) -> PixelRegion:
    """Head square of side equal to the ear distance, horizontally centered
    on the ear midpoint and extending away from the neck, minus the face
    triangle when one exists."""
    el, er = _require(skeleton, "hair", _SECTION_PARTS["hair"])
    side = math.dist(el, er)
    if side <= 1e-9:
        raise DegenerateRegion("hair", "ears coincide")
    mid_x = (el.x + er.x) / 2.0
    ear_y = (el.y + er.y) / 2.0
    neck = skeleton.position("neck")
    upward = neck is None or neck.y >= ear_y

    x_lo = int(math.ceil(mid_x - side / 2.0))
    x_hi = int(math.ceil(mid_x + side / 2.0)) - 1  # half-open on the right
    if upward:
        y_lo = int(math.ceil(ear_y - side))
        y_hi = int(math.ceil(ear_y)) - 1  # ear line itself excluded
    else:
        y_lo = int(math.floor(ear_y)) + 1
        y_hi = int(math.floor(ear_y + side))
    if x_hi < x_lo or y_hi < y_lo:
        raise DegenerateRegion("hair", "square contains no pixel centers")
    gx, gy = np.meshgrid(np.arange(x_lo, x_hi + 1, dtype=np.int64),
                         np.arange(y_lo, y_hi + 1, dtype=np.int64))
    xs = gx.ravel()
    ys = gy.ravel()

    if neck is not None:
        try:
            fx, fy = _triangle_pixels(el, er, neck, "face")
        except DegenerateRegion:
            fx, fy = None, None
        if fx is not None:
            face = set(zip(fx.tolist(), fy.tolist()))
            keep = np.fromiter(
                ((x, y) not in face for x, y in zip(xs.tolist(), ys.tolist())),
                dtype=bool, count=xs.size)
            xs, ys = xs[keep], ys[keep]
    if xs.size == 0:
        raise DegenerateRegion("hair", "face triangle covers the head square")
    return _gather(frame, xs, ys, "hair", skeleton.person_index)


def extract_all(pose: PoseResult, frame: FrameRef) -> list[RegionSet]:
    """One RegionSet per skeleton; per-section failures become entries in
    `missing` rather than failing the frame. Keypoints must already be in
    the frame's coordinate space."""
    out = []
    for skel in pose.skeletons:
        rs = RegionSet(person=(frame.camera_id, frame.sequence, skel.person_index))
        for section in SECTIONS:
            try:
                if section == "torso":
                    rs.regions[section] = torso_region(skel, frame)
                elif section == "left_leg":
                    rs.regions[section] = _leg_region(skel, frame, "left")
                elif section == "right_leg":
                    rs.regions[section] = _leg_region(skel, frame, "right")
                elif section == "face":
                    rs.regions[section] = face_region(skel, frame)
                else:
                    rs.regions[section] = hair_region(skel, frame)
            except (MissingKeypoint, DegenerateRegion):
                rs.missing.append(section)
        out.append(rs)
    return out
