"""Fog coordinator: edge registry, query sessions, feature ingest, the
offline index, and the operator-facing line protocol.

Operator API (one request line per call, response lines until END):

    SUBMIT <scope> <text...>      -> OK <query_id> <dispatched>
    CANCEL <query_id>             -> OK cancelled
    OFFLINE <start> <end> <text>  -> REPORT <json> ... END <n>
    STREAM <query_id>             -> REPORT <json> ... END <n>   (live, stays open)
    EDGES                         -> EDGE <id> <lat> <lon> <state> ... END <n>
    STATS                         -> STAT <key> <value> ... END <n>

Errors come back as `ERR <type> <token> <message>`. The same lines travel
over HTTP: POST the request line to /api and read the streamed response.
"""

from __future__ import annotations

import base64
import json
import logging
import socketserver
import threading
import time
import zlib
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterator, Optional

from . import protocol
from .colors import DEFAULT_PALETTES, PaletteSet, describe_region
from .edge import read_envelope
from .errors import QueryError, UnknownQuery
from .query import (
    CameraRegistry,
    FeatureIndex,
    IndexRecord,
    MatchReport,
    PersonDescription,
    Query,
    build_report,
    match,
    parse_query,
)
from .regions import SECTIONS

log = logging.getLogger("ivise.fog")

HEARTBEAT_SECS = 5.0
MISSED_BEATS_DISCONNECT = 3
SESSION_TTL_SECS = 300.0


@dataclass
class EdgeState:
    camera_id: str
    latitude: float
    longitude: float
    last_heartbeat: Optional[float] = None
    send: Optional[Callable[[bytes], None]] = None

    def connected(self, now: float, heartbeat_secs: float) -> bool:
        if self.send is None or self.last_heartbeat is None:
            return False
        return (now - self.last_heartbeat) < MISSED_BEATS_DISCONNECT * heartbeat_secs


class QuerySession:
    """One submitted query: parsed form, state, and accumulated reports.

    Reports append only while active; feeds replay history then block on
    the condition for new arrivals.
    """

    def __init__(self, query_id: int, query: Query, text: str, created_at: float,
                 ttl: float):
        self.query_id = query_id
        self.query = query
        self.text = text
        self.created_at = created_at
        self.expires_at = created_at + ttl
        self.state = "active"
        self.reports: list[MatchReport] = []
        self.payloads: list[dict] = []
        self.cond = threading.Condition()

    def append(self, report: MatchReport, payload: dict) -> None:
        with self.cond:
            if self.state != "active":
                return
            self.reports.append(report)
            self.payloads.append(payload)
            self.cond.notify_all()

    def close(self, state: str) -> None:
        with self.cond:
            if self.state == "active":
                self.state = state
            self.cond.notify_all()


def _blob_payload(blob: protocol.RegionBlob) -> dict:
    x0, y0, x1, y1 = blob.box
    return {
        "box": [int(x0), int(y0), int(x1), int(y1)],
        "spans_b64": base64.b64encode(blob.spans).decode("ascii"),
        "rle_b64": base64.b64encode(blob.rle).decode("ascii"),
    }


def report_payload(report: MatchReport,
                   blobs: Optional[dict[str, protocol.RegionBlob]] = None) -> dict:
    payload = {
        "query_id": report.query_id,
        "camera_id": report.camera_id,
        "sequence": report.sequence,
        "timestamp": report.timestamp,
        "latitude": report.geolocation[0],
        "longitude": report.geolocation[1],
        "person_index": report.person_index,
        "clauses": [[c.section, c.color, c.count] for c in report.matched_clauses],
        "evidence": {},
    }
    for section, box in report.evidence.items():
        entry = {"box": [int(v) for v in box]}
        if blobs is not None and section in blobs:
            entry = _blob_payload(blobs[section])
        payload["evidence"][section] = entry
    return payload


class FogNode:
    """In-process coordinator core; the TCP/HTTP servers below wrap it."""

    def __init__(self, registry: CameraRegistry,
                 palettes: PaletteSet = DEFAULT_PALETTES,
                 index: Optional[FeatureIndex] = None,
                 heartbeat_secs: float = HEARTBEAT_SECS,
                 session_ttl: float = SESSION_TTL_SECS,
                 wall: Callable[[], float] = time.time):
        self.registry = registry
        self.palettes = palettes
        self.index = index if index is not None else FeatureIndex(None)
        self.heartbeat_secs = heartbeat_secs
        self.session_ttl = session_ttl
        self.wall = wall
        self.sessions: dict[int, QuerySession] = {}
        self.edges: dict[str, EdgeState] = {
            cam: EdgeState(cam, info.latitude, info.longitude)
            for cam, info in registry.cameras.items()
        }
        self.stats = {
            "messages_in": 0,
            "persons_processed": 0,
            "unknown_edge_drops": 0,
            "reports_delivered": 0,
        }
        self._lock = threading.Lock()
        self._next_query_id = 1

    # -- edge registry -----------------------------------------------------

    def attach_edge(self, camera_id: str, send: Callable[[bytes], None]) -> None:
        state = self.edges.get(camera_id)
        if state is None:
            return
        state.send = send
        # late joiners receive every query that is still running
        now = self.wall()
        for session in self.active_sessions():
            if not session.query.in_scope(camera_id):
                continue
            ttl = max(int(session.expires_at - now), 1)
            try:
                send(protocol.encode(protocol.QueryDispatch(
                    session.query_id, protocol.DISPATCH_ACTIVATE, ttl, session.text)))
            except OSError as exc:
                log.warning("re-dispatch to %s failed: %s", camera_id, exc)

    def detach_edge(self, camera_id: str) -> None:
        state = self.edges.get(camera_id)
        if state is not None:
            state.send = None

    def heartbeat(self, msg: protocol.Heartbeat) -> None:
        state = self.edges.get(msg.camera_id)
        if state is None:
            self.stats["unknown_edge_drops"] += 1
            return
        state.last_heartbeat = self.wall()

    def edge_overview(self) -> list[tuple[str, float, float, str]]:
        now = self.wall()
        return [
            (cam, st.latitude, st.longitude,
             "connected" if st.connected(now, self.heartbeat_secs) else "disconnected")
            for cam, st in sorted(self.edges.items())
        ]

    # -- query sessions ------------------------------------------------------

    def submit_query(self, text: str, scope: Optional[tuple[str, ...]] = None,
                     ttl: Optional[float] = None) -> tuple[int, int]:
        """Parse, open a session, and dispatch to in-scope connected edges.

        Returns (query_id, dispatched_count); zero dispatches is the
        no-edges-in-scope warning case, the session still exists.
        """
        query = parse_query(text, self.palettes)
        now = self.wall()
        with self._lock:
            query_id = self._next_query_id
            self._next_query_id += 1
        query = Query(query.clauses, scope, query_id, int(now * 1000))
        session = QuerySession(query_id, query, text, now,
                               ttl if ttl is not None else self.session_ttl)
        self.sessions[query_id] = session
        dispatch = protocol.encode(protocol.QueryDispatch(
            query_id, protocol.DISPATCH_ACTIVATE,
            int(session.expires_at - now), text))
        dispatched = 0
        for cam, state in sorted(self.edges.items()):
            if scope is not None and cam not in scope:
                continue
            if state.send is None:
                continue
            try:
                state.send(dispatch)
                dispatched += 1
            except OSError as exc:
                log.warning("dispatch to %s failed: %s", cam, exc)
        return query_id, dispatched

    def cancel_query(self, query_id: int) -> None:
        session = self.sessions.get(query_id)
        if session is None:
            raise UnknownQuery(f"no session {query_id}")
        session.close("cancelled")
        cancel = protocol.encode(protocol.QueryDispatch(
            query_id, protocol.DISPATCH_CANCEL, 0, session.text))
        for state in self.edges.values():
            if state.send is not None:
                try:
                    state.send(cancel)
                except OSError:
                    pass

    def expire_sessions(self) -> None:
        now = self.wall()
        for session in self.sessions.values():
            if session.state == "active" and now >= session.expires_at:
                session.close("expired")

    def active_sessions(self) -> list[QuerySession]:
        self.expire_sessions()
        return [s for s in self.sessions.values() if s.state == "active"]

    # -- feature ingest ------------------------------------------------------

    def receive(self, data: bytes) -> None:
        """Entry point for raw envelopes from an edge connection."""
        msg = protocol.decode(data)
        if isinstance(msg, protocol.Heartbeat):
            self.heartbeat(msg)
        elif isinstance(msg, protocol.FrameFeaturesMsg):
            self.ingest_features(msg)

    def _cluster_count(self, section: str, camera_id: str,
                       sessions: list[QuerySession]) -> int:
        k = 1
        for session in sessions:
            if not session.query.in_scope(camera_id):
                continue
            for clause in session.query.clauses:
                if clause.section == section:
                    k = max(k, clause.count)
        return k

    def ingest_features(self, msg: protocol.FrameFeaturesMsg) -> int:
        """Describe, index, and match every person in the message; returns
        how many persons were processed. Unknown senders are dropped."""
        self.stats["messages_in"] += 1
        if msg.camera_id not in self.registry:
            self.stats["unknown_edge_drops"] += 1
            log.warning("dropping features from unknown edge %r", msg.camera_id)
            return 0
        sessions = self.active_sessions()
        processed = 0
        for person in msg.persons:
            source = (msg.camera_id, msg.sequence, person.person_index, msg.timestamp)
            sections: dict[str, list[tuple[str, int]]] = {}
            boxes: dict[str, tuple[int, int, int, int]] = {}
            blobs: dict[str, protocol.RegionBlob] = {}
            for blob in person.regions:
                region = blob.to_region(source[:3])
                seed = zlib.crc32(
                    f"{msg.camera_id}:{msg.sequence}:{person.person_index}:{blob.section}"
                    .encode()) & 0xFFFFFFFF
                k = min(self._cluster_count(blob.section, msg.camera_id, sessions),
                        region.pixel_count)
                sections[blob.section] = describe_region(region, k, self.palettes, seed)
                boxes[blob.section] = blob.box
                blobs[blob.section] = blob
            desc = PersonDescription(
                source=source,
                sections=sections,
                missing=tuple(s for s in SECTIONS if s not in sections),
                boxes=boxes,
            )
            # index before matching so a crash never loses an observation
            self.index.insert(IndexRecord(desc, int(self.wall() * 1000)))
            processed += 1
            self.stats["persons_processed"] += 1
            for session in sessions:
                if not session.query.in_scope(msg.camera_id):
                    continue
                if match(session.query, desc) is None:
                    continue
                report = build_report(session.query, desc, self.registry)
                evidence_blobs = {c.section: blobs[c.section]
                                  for c in report.matched_clauses if c.section in blobs}
                session.append(report, report_payload(report, evidence_blobs))
                self.stats["reports_delivered"] += 1
        return processed

    # -- offline path --------------------------------------------------------

    def offline_query(self, text: str, time_range: tuple[int, int]) -> list[MatchReport]:
        """Replay a query against the index; no edge dispatch happens."""
        query = parse_query(text, self.palettes)
        return self.index.scan(query, time_range, self.registry)

    # -- operator feeds --------------------------------------------------------

    def operator_feed(self, query_id: int) -> Iterator[MatchReport]:
        """Yield reports in processing order; ends when the session closes."""
        session = self.sessions.get(query_id)
        if session is None:
            raise UnknownQuery(f"no session {query_id}")
        pos = 0
        while True:
            with session.cond:
                while pos >= len(session.reports) and session.state == "active":
                    session.cond.wait(timeout=0.2)
                    self.expire_sessions()
                if pos < len(session.reports):
                    report = session.reports[pos]
                    pos += 1
                else:
                    return
            yield report

    # -- operator line protocol --------------------------------------------

    def operator_lines(self, request: str) -> Iterator[str]:
        """Serve one operator request line as a stream of response lines."""
        try:
            yield from self._route(request.strip())
        except QueryError as exc:
            yield f"ERR {type(exc).__name__} {exc.token or '-'} {exc}"
        except UnknownQuery as exc:
            yield f"ERR UnknownQuery - {exc}"
        except Exception as exc:  # malformed request shapes
            yield f"ERR BadRequest - {exc}"

    def _route(self, request: str) -> Iterator[str]:
        if not request:
            yield "ERR BadRequest - empty request"
            return
        op, _, rest = request.partition(" ")
        op = op.upper()
        if op == "SUBMIT":
            scope_token, _, text = rest.partition(" ")
            scope = None if scope_token == "*" else tuple(
                t for t in scope_token.split(",") if t)
            query_id, dispatched = self.submit_query(text, scope)
            yield f"OK {query_id} {dispatched}"
        elif op == "CANCEL":
            self.cancel_query(int(rest.strip()))
            yield "OK cancelled"
        elif op == "OFFLINE":
            start_s, _, rest2 = rest.partition(" ")
            end_s, _, text = rest2.partition(" ")
            reports = self.offline_query(text, (int(start_s), int(end_s)))
            for report in reports:
                yield "REPORT " + json.dumps(report_payload(report),
                                             separators=(",", ":"))
            yield f"END {len(reports)}"
        elif op == "STREAM":
            query_id = int(rest.strip())
            session = self.sessions.get(query_id)
            if session is None:
                raise UnknownQuery(f"no session {query_id}")
            pos = 0
            while True:
                with session.cond:
                    while pos >= len(session.payloads) and session.state == "active":
                        session.cond.wait(timeout=0.2)
                        self.expire_sessions()
                    if pos < len(session.payloads):
                        payload = session.payloads[pos]
                        pos += 1
                    else:
                        break
                yield "REPORT " + json.dumps(payload, separators=(",", ":"))
            yield f"END {pos}"
        elif op == "EDGES":
            rows = self.edge_overview()
            for cam, lat, lon, state in rows:
                yield f"EDGE {cam} {lat} {lon} {state}"
            yield f"END {len(rows)}"
        elif op == "STATS":
            for key in sorted(self.stats):
                yield f"STAT {key} {self.stats[key]}"
            yield f"END {len(self.stats)}"
        else:
            yield f"ERR BadRequest {op} unknown operation"


# -- edge-facing TCP listener -------------------------------------------------


class _EdgeConnHandler(socketserver.BaseRequestHandler):
    def handle(self):
        fog: FogNode = self.server.fog
        camera_id = None
        send_lock = threading.Lock()

        def send(data: bytes) -> None:
            with send_lock:
                self.request.sendall(data)

        while True:
            try:
                data = read_envelope(self.request.recv)
            except OSError:
                break
            if data is None:
                break
            try:
                msg = protocol.decode(data)
            except Exception as exc:
                log.warning("bad envelope from %s: %s", self.client_address, exc)
                continue
            if isinstance(msg, protocol.Heartbeat):
                if camera_id is None and msg.camera_id in fog.registry:
                    camera_id = msg.camera_id
                    fog.attach_edge(camera_id, send)
                fog.heartbeat(msg)
            elif isinstance(msg, protocol.FrameFeaturesMsg):
                fog.ingest_features(msg)
        if camera_id is not None:
            fog.detach_edge(camera_id)


class EdgeListener(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], fog: FogNode):
        super().__init__(addr, _EdgeConnHandler)
        self.fog = fog

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


# -- operator-facing HTTP carrier ----------------------------------------------


class _OperatorHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # route through logging, not stderr
        log.debug("operator http: " + fmt, *args)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_POST(self):
        if self.path != "/api":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", "0"))
        request = self.rfile.read(length).decode("utf-8").strip()
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Transfer-Encoding", "chunked")
        self.end_headers()
        try:
            for line in self.server.fog.operator_lines(request):
                self._chunk((line + "\n").encode("utf-8"))
            self._chunk(b"")
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _chunk(self, data: bytes):
        self.wfile.write(f"{len(data):X}\r\n".encode("ascii") + data + b"\r\n")
        self.wfile.flush()

    def do_GET(self):
        root = self.server.console_dir
        if root is None:
            self.send_error(404, "no console configured")
            return
        import os
        name = self.path.lstrip("/") or "index.html"
        name = os.path.normpath(name)
        if name.startswith(".."):
            self.send_error(403)
            return
        path = os.path.join(root, name)
        if not os.path.isfile(path):
            self.send_error(404)
            return
        ctype = {
            ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
        }.get(os.path.splitext(path)[1], "application/octet-stream")
        with open(path, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class OperatorServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], fog: FogNode,
                 console_dir: Optional[str] = None):
        super().__init__(addr, _OperatorHandler)
        self.fog = fog
        self.console_dir = console_dir

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
