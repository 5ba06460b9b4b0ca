"""Fog coordinator: sessions, ingest, offline equivalence, operator lines."""

import json
import threading

import pytest

from ivise import protocol as P
from ivise.edge import CollectTransport, EdgeAgent, EdgeConfig
from ivise.errors import UnknownGarment, UnknownQuery
from ivise.fog import FogNode
from ivise.provider import SyntheticPoseProvider
from ivise.query import CameraInfo, CameraRegistry
from ivise.sim import PersonSpec, SceneSpec, render_scene, scene_skeletons

REGISTRY = CameraRegistry([CameraInfo("cam0", "x:1", 42.1, -75.9),
                           CameraInfo("cam1", "x:2", 42.6, -76.1)])


def fog_with_edges(*cameras, wall=None):
    kwargs = {"wall": wall} if wall else {}
    fog = FogNode(REGISTRY, **kwargs)
    agents = {}
    for cam in cameras:
        scene = SceneSpec(seed=hash(cam) % 100, width=640, height=640,
                          persons=(PersonSpec((70, 40), torso_color="grey"),))
        provider = SyntheticPoseProvider(
            lambda c, seq, s=scene: scene_skeletons(s, seq))
        agent = EdgeAgent(EdgeConfig(cam, drop_ratio=0.0, heartbeat_secs=1e9),
                          provider, CollectTransport(deliver=fog.receive))
        fog.attach_edge(cam, agent.receive)
        agent.send_heartbeat()
        agents[cam] = (agent, scene)
    return fog, agents


def push_frames(fog, agents, count, cameras=None):
    for cam, (agent, scene) in agents.items():
        if cameras and cam not in cameras:
            continue
        for seq in range(count):
            frame, _, _ = render_scene(scene, seq, cam)
            agent.offer(frame)


def test_submit_dispatches_to_connected_edges():
    fog, agents = fog_with_edges("cam0", "cam1")
    query_id, dispatched = fog.submit_query("red hat, blue jeans")
    assert dispatched == 2
    assert query_id in fog.sessions
    for agent, _ in agents.values():
        assert agent.query_active()


def test_submit_parse_error_propagates():
    fog, _ = fog_with_edges("cam0")
    with pytest.raises(UnknownGarment):
        fog.submit_query("purple gizmo")


def test_submit_unknown_scope_warns_but_creates_session():
    fog, _ = fog_with_edges("cam0")
    query_id, dispatched = fog.submit_query("grey shirt", scope=("nocam",))
    assert dispatched == 0
    assert fog.sessions[query_id].state == "active"


def test_ingest_matches_and_reports():
    fog, agents = fog_with_edges("cam0")
    query_id, _ = fog.submit_query("grey t-shirt")
    push_frames(fog, agents, 3)
    session = fog.sessions[query_id]
    assert len(session.reports) == 3
    report = session.reports[0]
    assert report.camera_id == "cam0"
    assert report.geolocation == (42.1, -75.9)
    assert report.matched_clauses[0].section == "torso"


def test_ingest_without_sessions_only_indexes():
    # edge still streaming (say, after a fog-side cancel) with no live session
    fog, agents = fog_with_edges("cam0")
    agent, _ = agents["cam0"]
    agent.handle_query_dispatch(P.QueryDispatch(77, P.DISPATCH_ACTIVATE, 60, ""))
    push_frames(fog, agents, 2)
    assert len(fog.index) == 2
    assert fog.stats["reports_delivered"] == 0


def test_ingest_unknown_edge_dropped():
    fog, _ = fog_with_edges("cam0")
    msg = P.FrameFeaturesMsg("ghost", 0, 0, [P.PersonFeatures(0, [], [])])
    assert fog.ingest_features(msg) == 0
    assert fog.stats["unknown_edge_drops"] == 1


def test_ingest_counts_persons():
    fog, _ = fog_with_edges("cam0")
    scene = SceneSpec(seed=0, width=1280, height=640,
                      persons=(PersonSpec((20, 40)), PersonSpec((60, 40)),
                               PersonSpec((100, 40)), PersonSpec((140, 40))))
    provider = SyntheticPoseProvider(lambda c, seq: scene_skeletons(scene, seq))
    agent = EdgeAgent(EdgeConfig("cam0", drop_ratio=0.0, heartbeat_secs=1e9),
                      provider, CollectTransport(deliver=fog.receive))
    frame, _, _ = render_scene(scene, 0, "cam0")
    agent.handle_query_dispatch(P.QueryDispatch(1, P.DISPATCH_ACTIVATE, 60, ""))
    agent.offer(frame)
    assert fog.stats["persons_processed"] == 4
    assert len(fog.index) == 4


def test_clustering_k_follows_active_clause():
    fog, agents = fog_with_edges("cam0")
    query_id, _ = fog.submit_query("2: grey t-shirt")
    push_frames(fog, agents, 1)
    record = fog.index.records[0]
    # torso still reads grey; the clause asked for two neighborhoods and the
    # flat shirt yields one surviving cluster
    assert record.person.sections["torso"][0][0] == "grey"
    session = fog.sessions[query_id]
    assert len(session.reports) == 0 or len(session.reports) == 1


def test_scope_limits_matching():
    fog, agents = fog_with_edges("cam0", "cam1")
    query_id, dispatched = fog.submit_query("grey t-shirt", scope=("cam1",))
    assert dispatched == 1
    push_frames(fog, agents, 2)
    session = fog.sessions[query_id]
    assert {r.camera_id for r in session.reports} == {"cam1"}


def test_live_offline_equivalence():
    fog, agents = fog_with_edges("cam0", "cam1")
    query_id, _ = fog.submit_query("grey t-shirt")
    push_frames(fog, agents, 5)
    live = {(r.camera_id, r.sequence, r.person_index)
            for r in fog.sessions[query_id].reports}
    offline = {(r.camera_id, r.sequence, r.person_index)
               for r in fog.offline_query("grey t-shirt", (0, 10_000_000))}
    assert live == offline and live


def test_offline_time_range():
    fog, agents = fog_with_edges("cam0")
    fog.submit_query("grey t-shirt")
    push_frames(fog, agents, 5)  # timestamps 0,100,...,400
    assert len(fog.offline_query("grey t-shirt", (0, 150))) == 2
    assert fog.offline_query("grey t-shirt", (1000, 2000)) == []


def test_operator_feed_streams_then_closes():
    fog, agents = fog_with_edges("cam0")
    query_id, _ = fog.submit_query("grey t-shirt")
    push_frames(fog, agents, 2)
    received = []

    def consume():
        for report in fog.operator_feed(query_id):
            received.append(report)

    thread = threading.Thread(target=consume)
    thread.start()
    fog.cancel_query(query_id)
    thread.join(timeout=5)
    assert not thread.is_alive()
    assert len(received) == 2
    assert fog.sessions[query_id].state == "cancelled"


def test_operator_feed_unknown_query():
    fog, _ = fog_with_edges("cam0")
    with pytest.raises(UnknownQuery):
        next(iter(fog.operator_feed(404)))


def test_session_expiry(monkeypatch):
    now = [1000.0]
    fog, agents = fog_with_edges("cam0", wall=lambda: now[0])
    query_id, _ = fog.submit_query("grey t-shirt", ttl=30)
    now[0] += 31
    fog.expire_sessions()
    assert fog.sessions[query_id].state == "expired"
    push_frames(fog, agents, 1)
    assert fog.sessions[query_id].reports == []


def test_every_delivered_report_satisfies_its_query():
    # replay check: each report's person, as indexed, matches every clause
    from ivise.query import match as match_fn

    fog, agents = fog_with_edges("cam0", "cam1")
    qid, _ = fog.submit_query("grey t-shirt, blue jeans")
    push_frames(fog, agents, 4)
    session = fog.sessions[qid]
    assert session.reports
    by_key = {(r.person.source[0], r.person.source[1], r.person.source[2]): r.person
              for r in fog.index.records}
    for report in session.reports:
        person = by_key[(report.camera_id, report.sequence, report.person_index)]
        assert match_fn(session.query, person) is not None


def test_attach_after_submit_receives_active_queries():
    fog = FogNode(REGISTRY)
    query_id, dispatched = fog.submit_query("grey t-shirt")
    assert dispatched == 0  # nobody connected yet
    received = []
    fog.attach_edge("cam0", received.append)
    assert len(received) == 1
    msg = P.decode(received[0])
    assert isinstance(msg, P.QueryDispatch)
    assert msg.query_id == query_id
    assert msg.action == P.DISPATCH_ACTIVATE


def test_heartbeat_staleness_marks_disconnected():
    now = [0.0]
    fog, agents = fog_with_edges("cam0", wall=lambda: now[0])
    assert fog.edge_overview()[0][3] == "connected"
    now[0] += fog.heartbeat_secs * 3 + 1
    assert fog.edge_overview()[0][3] == "disconnected"
    agents["cam0"][0].send_heartbeat()
    assert fog.edge_overview()[0][3] == "connected"


# -- operator line protocol ---------------------------------------------------


def lines(fog, request):
    return list(fog.operator_lines(request))


def test_operator_submit_and_stream():
    fog, agents = fog_with_edges("cam0")
    reply = lines(fog, "SUBMIT * grey t-shirt")
    assert len(reply) == 1 and reply[0].startswith("OK ")
    query_id = int(reply[0].split()[1])
    push_frames(fog, agents, 2)
    fog.cancel_query(query_id)
    stream = lines(fog, f"STREAM {query_id}")
    reports = [json.loads(ln[len("REPORT "):]) for ln in stream[:-1]]
    assert stream[-1] == "END 2"
    assert reports[0]["camera_id"] == "cam0"
    assert reports[0]["latitude"] == 42.1
    assert "torso" in reports[0]["evidence"]
    assert "rle_b64" in reports[0]["evidence"]["torso"]


def test_operator_submit_parse_error_names_token():
    fog, _ = fog_with_edges("cam0")
    reply = lines(fog, "SUBMIT * purple gizmo")
    assert reply[0].startswith("ERR UnknownGarment gizmo")


def test_operator_cancel():
    fog, _ = fog_with_edges("cam0")
    query_id = int(lines(fog, "SUBMIT * grey t-shirt")[0].split()[1])
    assert lines(fog, f"CANCEL {query_id}") == ["OK cancelled"]
    assert lines(fog, "CANCEL 999")[0].startswith("ERR UnknownQuery")


def test_operator_offline():
    fog, agents = fog_with_edges("cam0")
    push_frames(fog, agents, 3)
    # idle frames are not processed without a session; submit then push
    query_id = int(lines(fog, "SUBMIT * grey t-shirt")[0].split()[1])
    push_frames(fog, agents, 3)
    out = lines(fog, "OFFLINE 0 10000000 grey t-shirt")
    assert out[-1].startswith("END ")
    assert len(out) - 1 == int(out[-1].split()[1])


def test_operator_edges_and_stats():
    fog, _ = fog_with_edges("cam0", "cam1")
    out = lines(fog, "EDGES")
    assert out[0].startswith("EDGE cam0 42.1 -75.9 connected")
    assert out[-1] == "END 2"
    stats = lines(fog, "STATS")
    assert any(ln.startswith("STAT messages_in") for ln in stats)


def test_operator_bad_request():
    fog, _ = fog_with_edges("cam0")
    assert lines(fog, "FROB 1")[0].startswith("ERR BadRequest")
    assert lines(fog, "")[0].startswith("ERR BadRequest")
