"""Part-affinity geometry and bottom-up grouping of keypoints into skeletons.

A limb's affinity field stores, per pixel, the unit vector of the limb when
the pixel lies inside the limb band (a rectangle of the limb's length and
twice its width) and the zero vector everywhere else. Candidate keypoints
are paired per limb type by the mean field alignment along their connecting
segment, and accepted pairs are stitched into per-person skeletons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateLimb, EmptyField

DEGENERATE_TOL = 1e-9

# Fixed body-part catalog; indices double as wire identifiers.
PART_KINDS = (
    "nose", "neck",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    "left_hip", "right_hip",
    "left_knee", "right_knee",
    "left_ankle", "right_ankle",
    "left_eye", "right_eye",
    "left_ear", "right_ear",
)
PART_INDEX = {name: i for i, name in enumerate(PART_KINDS)}


class Point2D(NamedTuple):
    """Continuous pixel coordinate in frame space."""

    x: float
    y: float


@dataclass(frozen=True)
class LimbSpec:
    """A catalog entry connecting two part kinds; width is the band half-height
    in pixels. The limb length is derived from actual endpoints at use time."""

    part_a: str
    part_b: str
    width: float

    def __post_init__(self):
        if self.part_a not in PART_INDEX or self.part_b not in PART_INDEX:
            raise ValueError(f"unknown part kind in limb {self.part_a}->{self.part_b}")
        if self.part_a == self.part_b:
            raise ValueError("limb endpoints must differ")
        if not self.width > 0:
            raise ValueError("limb width must be positive")

    @property
    def limb_id(self) -> str:
        return f"{self.part_a}:{self.part_b}"


# Tree over all 18 part kinds; order also fixes the greedy matching order.
DEFAULT_LIMBS = tuple(
    LimbSpec(a, b, 8.0)
    for a, b in (
        ("neck", "left_shoulder"), ("neck", "right_shoulder"),
        ("left_shoulder", "left_elbow"), ("left_elbow", "left_wrist"),
        ("right_shoulder", "right_elbow"), ("right_elbow", "right_wrist"),
        ("neck", "left_hip"), ("neck", "right_hip"),
        ("left_hip", "left_knee"), ("left_knee", "left_ankle"),
        ("right_hip", "right_knee"), ("right_knee", "right_ankle"),
        ("neck", "nose"),
        ("nose", "left_eye"), ("nose", "right_eye"),
        ("left_eye", "left_ear"), ("right_eye", "right_ear"),
    )
)


@dataclass(frozen=True)
class CandidateKeypoint:
    kind: str
    position: Point2D
    confidence: float

    def __post_init__(self):
        if self.kind not in PART_INDEX:
            raise ValueError(f"unknown part kind {self.kind!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


@dataclass
class AffinityField:
    """Per-limb 2D vector field sampled on the integer pixel grid.

    The grid covers the window starting at (x0, y0); lookups snap to the
    nearest stored sample (half rounds away from the origin) and clamp to
    the window edge.
    """

    limb: str
    x0: int
    y0: int
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        if self.vx.shape != self.vy.shape:
            raise ValueError("vx/vy grids must share a shape")
        mag2 = self.vx * self.vx + self.vy * self.vy
        if mag2.size and float(mag2.max()) > (1.0 + 1e-9) ** 2:
            raise ValueError("affinity samples must be unit vectors or zero")

    @property
    def is_empty(self) -> bool:
        return self.vx.size == 0

    def sample_at(self, p: Point2D) -> tuple[float, float]:
        if self.is_empty:
            raise EmptyField(f"field {self.limb} has no samples")
        ix = int(math.floor(p[0] + 0.5)) - self.x0
        iy = int(math.floor(p[1] + 0.5)) - self.y0
        h, w = self.vx.shape
        ix = min(max(ix, 0), w - 1)
        iy = min(max(iy, 0), h - 1)
        return float(self.vx[iy, ix]), float(self.vy[iy, ix])

    @classmethod
    def constant(cls, limb: str, vector: tuple[float, float],
                 x0: int = 0, y0: int = 0, width: int = 1, height: int = 1) -> "AffinityField":
        vx = np.full((height, width), vector[0], dtype=np.float64)
        vy = np.full((height, width), vector[1], dtype=np.float64)
        return cls(limb, x0, y0, vx, vy)

    @classmethod
    def from_limb(cls, limb: str, a: Point2D, b: Point2D, width: float,
                  margin: int = 3) -> "AffinityField":
        """Exact field of one limb: v inside the band, zero elsewhere."""
        reach = width + margin
        x0 = int(math.floor(min(a[0], b[0]) - reach))
        y0 = int(math.floor(min(a[1], b[1]) - reach))
        x1 = int(math.ceil(max(a[0], b[0]) + reach))
        y1 = int(math.ceil(max(a[1], b[1]) + reach))
        fld = cls(limb, x0, y0,
                  np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=np.float64),
                  np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=np.float64))
        fld.paint_limb(a, b, width)
        return fld

    def paint_limb(self, a: Point2D, b: Point2D, width: float) -> None:
        """Write the Eq-style band of one limb into the grid (overwrites)."""
        v = limb_unit_vector(a, b)
        h, w = self.vx.shape
        xs = np.arange(self.x0, self.x0 + w, dtype=np.float64)[None, :] - a[0]
        ys = np.arange(self.y0, self.y0 + h, dtype=np.float64)[:, None] - a[1]
        lon = v[0] * xs + v[1] * ys
        trans = -v[1] * xs + v[0] * ys
        length = math.dist(a, b)
        on = (lon >= 0.0) & (lon <= length) & (np.abs(trans) <= width)
        self.vx[on] = v[0]
        self.vy[on] = v[1]


@dataclass
class Skeleton:
    """One detected person: a partial map from part kind to its keypoint."""

    person_index: int
    keypoints: dict[str, CandidateKeypoint] = dc_field(default_factory=dict)

    def get(self, kind: str) -> Optional[CandidateKeypoint]:
        return self.keypoints.get(kind)

    def position(self, kind: str) -> Optional[Point2D]:
        kp = self.keypoints.get(kind)
        return kp.position if kp else None


def limb_unit_vector(a: Point2D, b: Point2D) -> tuple[float, float]:
    """Unit vector from a to b; DegenerateLimb when the points coincide."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    norm = math.hypot(dx, dy)
    if norm <= DEGENERATE_TOL:
        raise DegenerateLimb(f"zero-length limb at {tuple(a)}")
    return dx / norm, dy / norm


def point_on_limb(p: Point2D, a: Point2D, b: Point2D, width: float) -> bool:
    """True when p falls inside the limb band: longitudinal projection within
    [0, length] and absolute transverse offset within the limb width."""
    v = limb_unit_vector(a, b)
    px = p[0] - a[0]
    py = p[1] - a[1]
    lon = v[0] * px + v[1] * py
    trans = -v[1] * px + v[0] * py
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    return 0.0 <= lon <= length and abs(trans) <= width


def field_value(p: Point2D, a: Point2D, b: Point2D, width: float) -> tuple[float, float]:
    """The limb's ideal field at p: its unit vector on the band, else zero."""
    if point_on_limb(p, a, b, width):
        return limb_unit_vector(a, b)
    return (0.0, 0.0)


def limb_affinity_score(a: Point2D, b: Point2D, field: AffinityField,
                        n_samples: int = 10) -> float:
    """Mean alignment of the field with segment a->b over evenly spaced samples."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    if field.is_empty:
        raise EmptyField(f"field {field.limb} has no samples")
    v = limb_unit_vector(a, b)
    total = 0.0
    for i in range(n_samples):
        t = i / (n_samples - 1)
        q = Point2D(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        fx, fy = field.sample_at(q)
        total += fx * v[0] + fy * v[1]
    return total / n_samples


def _check_tree(limb_catalog: Sequence[LimbSpec]) -> None:
    kinds: set[str] = set()
    for limb in limb_catalog:
        kinds.add(limb.part_a)
        kinds.add(limb.part_b)
    if not kinds:
        return
    if len(limb_catalog) != len(kinds) - 1:
        raise ValueError("limb catalog must form a tree over its part kinds")
    adj: dict[str, list[str]] = {k: [] for k in kinds}
    for limb in limb_catalog:
        adj[limb.part_a].append(limb.part_b)
        adj[limb.part_b].append(limb.part_a)
    seen = {next(iter(kinds))}
    stack = [next(iter(seen))]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if seen != kinds:
        raise ValueError("limb catalog must be connected")


def group_keypoints(candidates: Sequence[CandidateKeypoint],
                    fields: Iterable[AffinityField],
                    limb_catalog: Sequence[LimbSpec] = DEFAULT_LIMBS,
                    score_threshold: float = 0.05,
                    keypoint_threshold: float = 0.3,
                    n_samples: int = 10) -> list[Skeleton]:
    """Greedy per-limb matching, then connected components become skeletons.

    For each limb type in catalog order, every (part_a, part_b) candidate
    pair is scored by limb_affinity_score against that limb's field; pairs
    are accepted in descending score order (ties to lower candidate
    indices), skipping ones whose endpoint is already consumed for the limb
    type or whose score falls below score_threshold. Candidates left with no
    accepted limb become single-keypoint skeletons only when their
    confidence exceeds keypoint_threshold.
    """
    _check_tree(limb_catalog)
    if not candidates:
        return []

    by_kind: dict[str, list[int]] = {}
    for idx, cand in enumerate(candidates):
        by_kind.setdefault(cand.kind, []).append(idx)

    field_by_limb: dict[str, AffinityField] = {}
    for fld in fields:
        field_by_limb.setdefault(fld.limb, fld)

    parent = list(range(len(candidates)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    connected: set[int] = set()
    for limb in limb_catalog:
        fld = field_by_limb.get(limb.limb_id)
        if fld is None or fld.is_empty:
            continue
        a_idxs = by_kind.get(limb.part_a, [])
        b_idxs = by_kind.get(limb.part_b, [])
        scored = []
        for ai, gi in enumerate(a_idxs):
            for bi, gj in enumerate(b_idxs):
                try:
                    s = limb_affinity_score(candidates[gi].position,
                                            candidates[gj].position,
                                            fld, n_samples)
                except DegenerateLimb:
                    continue  # coincident candidates cannot form this limb
                scored.append((-s, ai, bi, gi, gj, s))
        scored.sort()
        used_a: set[int] = set()
        used_b: set[int] = set()
        for _, ai, bi, gi, gj, s in scored:
            if s < score_threshold or ai in used_a or bi in used_b:
                continue
            used_a.add(ai)
            used_b.add(bi)
            parent[find(gi)] = find(gj)
            connected.add(gi)
            connected.add(gj)

    groups: dict[int, list[int]] = {}
    for idx in range(len(candidates)):
        if idx in connected:
            groups.setdefault(find(idx), []).append(idx)
        elif candidates[idx].confidence > keypoint_threshold:
            groups[idx] = [idx]

    skeletons = []
    for members in sorted(groups.values(), key=min):
        skel = Skeleton(person_index=len(skeletons))
        for idx in members:
            skel.keypoints[candidates[idx].kind] = candidates[idx]
        skeletons.append(skel)
    return skeletons


def synthesize_fields(skeletons: Sequence[Skeleton],
                      limb_catalog: Sequence[LimbSpec] = DEFAULT_LIMBS,
                      margin: int = 3) -> list[AffinityField]:
    """One exact field per limb type covering every given skeleton's band.

    Ground-truth generator for the grouping oracle and the synthetic pose
    backend; skeletons are assumed spatially disjoint.
    """
    fields: list[AffinityField] = []
    for limb in limb_catalog:
        pairs = []
        for skel in skeletons:
            pa = skel.position(limb.part_a)
            pb = skel.position(limb.part_b)
            if pa is not None and pb is not None and math.dist(pa, pb) > DEGENERATE_TOL:
                pairs.append((pa, pb))
        if not pairs:
            continue
        reach = limb.width + margin
        x0 = int(math.floor(min(min(a[0], b[0]) for a, b in pairs) - reach))
        y0 = int(math.floor(min(min(a[1], b[1]) for a, b in pairs) - reach))
        x1 = int(math.ceil(max(max(a[0], b[0]) for a, b in pairs) + reach))
        y1 = int(math.ceil(max(max(a[1], b[1]) for a, b in pairs) + reach))
        fld = AffinityField(limb.limb_id, x0, y0,
                            np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=np.float64),
                            np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=np.float64))
        for a, b in pairs:
            fld.paint_limb(a, b, limb.width)
        fields.append(fld)
    return fields
