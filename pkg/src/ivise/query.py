"""Operator query parsing, per-person matching, and the fog's append-only
feature index for offline search.

Query grammar: comma-separated clauses of `[count:] <color> <garment>`.
Garment words map to body sections (jeans and friends cover both legs);
the color must name an entry of the mapped section's palette. Matching is
conjunctive: every clause must be satisfied by the person description.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple, Optional, Sequence

from .colors import DEFAULT_PALETTES, PaletteSet
from .errors import (
    EmptyQuery,
    ParseError,
    QueryError,
    UnknownCamera,
    UnknownColor,
    UnknownGarment,
)
from .regions import SECTION_INDEX

INDEX_HEADER = "ivise-index v1"

# garment vocabulary -> body sections the clause applies to
GARMENT_SECTIONS = {
    "shirt": ("torso",),
    "t-shirt": ("torso",),
    "top": ("torso",),
    "jacket": ("torso",),
    "jeans": ("left_leg", "right_leg"),
    "pants": ("left_leg", "right_leg"),
    "trousers": ("left_leg", "right_leg"),
    "hat": ("hair",),
    "hair": ("hair",),
    "face": ("face",),
    "skin": ("face",),
}

# canonical garment per section, used when rendering a query back to text
_SECTION_GARMENT = {"torso": "shirt", "hair": "hat", "face": "face"}


class Clause(NamedTuple):
    section: str
    color: str
    count: int  # expected number of colors in the section (top-k window)


@dataclass(frozen=True)
class Query:
    clauses: tuple[Clause, ...]
    scope: Optional[tuple[str, ...]] = None  # None = all cameras
    query_id: int = 0
    issued_at: int = 0

    def __post_init__(self):
        if not self.clauses:
            raise ValueError("query needs at least one clause")
        for clause in self.clauses:
            if clause.section not in SECTION_INDEX:
                raise ValueError(f"unknown body section {clause.section!r}")
            if clause.count < 1:
                raise ValueError("expected color count must be at least 1")

    def in_scope(self, camera_id: str) -> bool:
        return self.scope is None or camera_id in self.scope


@dataclass
class PersonDescription:
    """Color summary of one observed person, as the fog derived it."""

    source: tuple[str, int, int, int]  # camera_id, sequence, person_index, timestamp
    sections: dict[str, list[tuple[str, int]]]  # section -> (color, members) desc
    missing: tuple[str, ...] = ()
    boxes: dict[str, tuple[int, int, int, int]] = dc_field(default_factory=dict)

    @property
    def camera_id(self) -> str:
        return self.source[0]


@dataclass
class MatchReport:
    query_id: int
    camera_id: str
    sequence: int
    timestamp: int
    geolocation: tuple[float, float]
    person_index: int
    matched_clauses: tuple[Clause, ...]
    evidence: dict[str, tuple[int, int, int, int]]  # matched section -> bbox

    def key(self) -> tuple:
        return (self.query_id, self.camera_id, self.sequence, self.person_index)


@dataclass
class IndexRecord:
    person: PersonDescription
    inserted_at: int


def parse_query(text: str, palettes: PaletteSet = DEFAULT_PALETTES) -> Query:
    """Parse operator text like "red hat, blue jeans" into clauses.

    Multi-word colors join with hyphens, so "dark red shirt" reads the
    dark-red palette entry. Raises EmptyQuery / UnknownGarment /
    UnknownColor naming the offending token.
    """
    if not text.strip():
        raise EmptyQuery()
    clauses: list[Clause] = []
    for chunk in text.split(","):
        tokens = chunk.strip().lower().split()
        if not tokens:
            raise EmptyQuery()
        count = 1
        if tokens[0].endswith(":") and tokens[0][:-1].isdigit():
            count = int(tokens[0][:-1])
            if count < 1:
                raise QueryError(f"color count must be at least 1, got {count}",
                                 tokens[0])
            tokens = tokens[1:]
        if not tokens:
            raise EmptyQuery()
        garment = tokens[-1]
        sections = GARMENT_SECTIONS.get(garment)
        if sections is None:
            raise UnknownGarment(garment)
        color = "-".join(tokens[:-1])
        palette = palettes.for_section(sections[0])
        if color not in palette.names():
            raise UnknownColor(color, sections[0])
        for section in sections:
            clauses.append(Clause(section, color, count))
    return Query(tuple(clauses))


def render_query(query: Query) -> str:
    """Canonical text for a parsed query; parse(render(q)) equals q."""
    parts = []
    i = 0
    clauses = query.clauses
    while i < len(clauses):
        clause = clauses[i]
        if (clause.section == "left_leg" and i + 1 < len(clauses)
                and clauses[i + 1] == Clause("right_leg", clause.color, clause.count)):
            garment = "jeans"
            i += 2
        elif clause.section in _SECTION_GARMENT:
            garment = _SECTION_GARMENT[clause.section]
            i += 1
        else:
            raise ValueError(f"clause {clause} did not come from parse_query")
        prefix = f"{clause.count}: " if clause.count != 1 else ""
        parts.append(f"{prefix}{clause.color} {garment}")
    return ", ".join(parts)


def match(query: Query, person: PersonDescription) -> Optional[list[Clause]]:
    """All-clause conjunction; a clause holds when its section is present
    and the color sits inside the top-count entries by member count.
    Missing sections simply fail their clause."""
    for clause in query.clauses:
        entries = person.sections.get(clause.section)
        if not entries:
            return None
        top = entries[:clause.count]
        if clause.color not in [name for name, _ in top]:
            return None
    return list(query.clauses)


@dataclass(frozen=True)
class CameraInfo:
    camera_id: str
    address: str
    latitude: float
    longitude: float


class CameraRegistry:
    """Static camera metadata: address and geolocation per camera id."""

    def __init__(self, cameras: Sequence[CameraInfo] = ()):
        self.cameras = {c.camera_id: c for c in cameras}

    @classmethod
    def from_file(cls, path: str) -> "CameraRegistry":
        cameras = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                tokens = line.split()
                if len(tokens) != 4:
                    raise ParseError("registry line needs `camera_id host:port lat lon`",
                                     line=lineno)
                try:
                    cameras.append(CameraInfo(tokens[0], tokens[1],
                                              float(tokens[2]), float(tokens[3])))
                except ValueError as exc:
                    raise ParseError(f"bad coordinate: {exc}", line=lineno) from exc
        return cls(cameras)

    def lookup(self, camera_id: str) -> CameraInfo:
        if camera_id not in self.cameras:
            raise UnknownCamera(f"camera {camera_id!r} not registered")
        return self.cameras[camera_id]

    def __contains__(self, camera_id: str) -> bool:
        return camera_id in self.cameras

    def ids(self) -> list[str]:
        return sorted(self.cameras)


def build_report(query: Query, person: PersonDescription,
                 registry: CameraRegistry) -> MatchReport:
    """Fill a report for a person that matched; geolocation comes from the
    registry and evidence boxes from the matched sections."""
    clauses = match(query, person)
    if clauses is None:
        raise ValueError("build_report called for a person that does not match")
    info = registry.lookup(person.camera_id)
    camera_id, sequence, person_index, timestamp = person.source
    return MatchReport(
        query_id=query.query_id,
        camera_id=camera_id,
        sequence=sequence,
        timestamp=timestamp,
        geolocation=(info.latitude, info.longitude),
        person_index=person_index,
        matched_clauses=tuple(clauses),
        evidence={c.section: person.boxes[c.section]
                  for c in clauses if c.section in person.boxes},
    )


def _record_to_json(record: IndexRecord) -> str:
    p = record.person
    return json.dumps({
        "source": list(p.source),
        "sections": {s: [[n, c] for n, c in entries] for s, entries in p.sections.items()},
        "missing": list(p.missing),
        "boxes": {s: list(b) for s, b in p.boxes.items()},
        "inserted_at": record.inserted_at,
    }, separators=(",", ":"))


def _record_from_json(line: str, lineno: int) -> IndexRecord:
    try:
        obj = json.loads(line)
        person = PersonDescription(
            source=tuple(obj["source"]),
            sections={s: [(n, int(c)) for n, c in entries]
                      for s, entries in obj["sections"].items()},
            missing=tuple(obj["missing"]),
            boxes={s: tuple(b) for s, b in obj["boxes"].items()},
        )
        return IndexRecord(person, int(obj["inserted_at"]))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad index record: {exc}", line=lineno) from exc


class FeatureIndex:
    """Append-only store of person descriptions, replayable for offline
    queries that must reproduce what a live run would have matched."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: list[IndexRecord] = []
        self._fh = None
        if path is not None and os.path.exists(path):
            self._load(path)
        if path is not None:
            fresh = not os.path.exists(path)
            self._fh = open(path, "a", encoding="utf-8")
            if fresh:
                self._fh.write(INDEX_HEADER + "\n")
                self._fh.flush()

    def _load(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != INDEX_HEADER:
            raise ParseError(f"bad index header, expected {INDEX_HEADER!r}", line=1)
        for lineno, line in enumerate(lines[1:], start=2):
            if line.strip():
                self.records.append(_record_from_json(line, lineno))

    def insert(self, record: IndexRecord) -> None:
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(_record_to_json(record) + "\n")
            self._fh.flush()

    def scan(self, query: Query, time_range: tuple[int, int],
             registry: CameraRegistry) -> list[MatchReport]:
        """Replay the query over stored records in insertion order; the
        range is inclusive over the frame timestamp."""
        start, end = time_range
        out = []
        for record in self.records:
            person = record.person
            timestamp = person.source[3]
            if not start <= timestamp <= end:
                continue
            if not query.in_scope(person.camera_id):
                continue
            if match(query, person) is not None:
                out.append(build_report(query, person, registry))
        return out

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __len__(self) -> int:
        return len(self.records)
