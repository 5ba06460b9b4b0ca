"""Command line entry points: edge service, fog service, the simulation
runner, and the kernel benchmark."""

from __future__ import annotations

import argparse
import sys
import time

from .config import load_config, parse_addr


def _cmd_edge(args) -> int:
    from . import edge as edge_mod
    from .provider import FixturePoseProvider, RemotePoseProvider, load_fixture

    cfg = load_config(args.config)
    camera_id = cfg.get("edge.camera_id", "cam0")
    backend = cfg.get("edge.backend", "fixture")

    scene = None
    if backend == "synthetic" or cfg.get("edge.frame_source") == "synthetic":
        from .sim import PersonSpec, SceneSpec
        scene = SceneSpec(
            seed=int(cfg.get("edge.scene_seed", "7")),
            width=int(cfg.get("edge.scene_width", "1920")),
            height=int(cfg.get("edge.scene_height", "1080")),
            persons=(PersonSpec(
                (70, 40),
                torso_color=cfg.get("edge.scene_torso", "grey"),
                leg_color=cfg.get("edge.scene_legs", "blue"),
            ),),
            noise=int(cfg.get("edge.scene_noise", "0")),
        )

    if backend == "fixture":
        provider = FixturePoseProvider(load_fixture(cfg["pose.fixture_path"]))
    elif backend == "remote":
        provider = RemotePoseProvider(cfg["pose.remote_url"],
                                      timeout=float(cfg.get("pose.remote_timeout", "5")))
    elif backend == "synthetic":
        from .provider import SyntheticPoseProvider
        from .sim import scene_skeletons
        provider = SyntheticPoseProvider(
            lambda cam, seq, s=scene: scene_skeletons(s, seq))
    else:
        print(f"unsupported pose backend {backend!r} for the edge CLI "
              "(fixture, remote, synthetic)", file=sys.stderr)
        return 2

    agent = edge_mod.EdgeAgent(
        edge_mod.EdgeConfig(
            camera_id=camera_id,
            drop_ratio=float(cfg.get("edge.drop_ratio", "0.5")),
            heartbeat_secs=float(cfg.get("edge.heartbeat_secs", "5")),
        ),
        provider,
        None,
    )
    if "edge.fog_addr" in cfg:
        agent.transport = edge_mod.TcpTransport(parse_addr(cfg["edge.fog_addr"]),
                                                on_message=agent.receive)
    if "edge.status_addr" in cfg:
        edge_mod.StatusServer(parse_addr(cfg["edge.status_addr"]), agent).start()

    # offline runs have no fog to dispatch a query; process unconditionally
    default_active = "true" if "edge.fog_addr" not in cfg else "false"
    if cfg.get("edge.always_active", default_active) == "true":
        from . import protocol
        agent.handle_query_dispatch(protocol.QueryDispatch(
            0, protocol.DISPATCH_ACTIVATE, 2 ** 31 - 1, "offline"))

    if "edge.frame_dir" in cfg:
        frames = edge_mod.directory_frames(camera_id, cfg["edge.frame_dir"])
    elif scene is not None:
        from .sim import render_scene
        count = int(cfg.get("edge.frames", "100"))
        frames = (render_scene(scene, seq, camera_id)[0] for seq in range(count))
    else:
        print("config needs edge.frame_dir or edge.frame_source = synthetic",
              file=sys.stderr)
        return 2
    agent.run(frames)
    stats = agent.stats
    print(f"frames seen {stats.frames_seen} processed {stats.frames_processed} "
          f"persons {stats.persons_detected} bytes {stats.bytes_sent}")
    return 0


def _cmd_fog(args) -> int:
    from .colors import DEFAULT_PALETTES, PaletteSet, load_palette
    from .fog import EdgeListener, FogNode, OperatorServer
    from .query import CameraRegistry, FeatureIndex

    cfg = load_config(args.config)
    registry = CameraRegistry.from_file(cfg["fog.registry"])
    palettes = PaletteSet(
        load_palette(cfg["palette.clothing"]) if "palette.clothing" in cfg
        else DEFAULT_PALETTES.clothing,
        load_palette(cfg["palette.skin"]) if "palette.skin" in cfg
        else DEFAULT_PALETTES.skin,
        load_palette(cfg["palette.hair"]) if "palette.hair" in cfg
        else DEFAULT_PALETTES.hair,
    )
    fog = FogNode(
        registry, palettes,
        FeatureIndex(cfg.get("fog.index_path")),
        heartbeat_secs=float(cfg.get("fog.heartbeat_secs", "5")),
    )
    listener = EdgeListener(parse_addr(cfg["fog.listen_addr"]), fog)
    listener.start()
    operator = OperatorServer(parse_addr(cfg["fog.operator_addr"]), fog,
                              console_dir=cfg.get("fog.console_dir"))
    operator.start()
    print(f"fog listening: edges on {cfg['fog.listen_addr']}, "
          f"operators on {cfg['fog.operator_addr']}")
    try:
        while True:
            time.sleep(1)
            fog.expire_sessions()
    except KeyboardInterrupt:
        return 0


def _cmd_sim(args) -> int:
    from .sim import PersonSpec, SceneSpec, emit_metrics, run_topology

    def spec_for_edge(i: int) -> SceneSpec:
        person = PersonSpec((70, 40), torso_color=args.torso, leg_color=args.legs,
                            face_color=args.face, hair_color=args.hair)
        return SceneSpec(seed=args.seed + i, persons=(person,), noise=args.noise)

    metrics = run_topology(args.edges, args.frames, [args.query], spec_for_edge,
                           drop_ratio=args.drop_ratio)
    path = emit_metrics(metrics, args.out)
    print(f"wrote {path}")
    print(f"frames {len(metrics.frames)} "
          f"expected {len(metrics.expected)} found {len(metrics.found)}")
    print(f"precision {metrics.precision:.3f} recall {metrics.recall:.3f} "
          f"mean byte ratio {metrics.mean_ratio:.4f}")
    return 0


def _cmd_bench(args) -> int:
    from .benchmark import run_benchmarks

    run_benchmarks(repeats=args.repeats)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ivise")
    sub = parser.add_subparsers(dest="command", required=True)

    p_edge = sub.add_parser("edge", help="run one camera's edge service")
    p_edge.add_argument("--config", required=True)
    p_edge.set_defaults(func=_cmd_edge)

    p_fog = sub.add_parser("fog", help="run the fog coordinator")
    p_fog.add_argument("--config", required=True)
    p_fog.set_defaults(func=_cmd_fog)

    p_sim = sub.add_parser("sim", help="run the synthetic topology")
    p_sim.add_argument("--edges", type=int, default=1)
    p_sim.add_argument("--frames", type=int, default=100)
    p_sim.add_argument("--query", required=True)
    p_sim.add_argument("--seed", type=int, default=7)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--noise", type=int, default=0)
    p_sim.add_argument("--drop-ratio", type=float, default=0.5)
    p_sim.add_argument("--torso", default="grey", help="scene torso color name")
    p_sim.add_argument("--legs", default="blue", help="scene leg color name")
    p_sim.add_argument("--hair", default="brown", help="scene hair color name")
    p_sim.add_argument("--face", default="white", help="scene face color name")
    p_sim.set_defaults(func=_cmd_sim)

    p_bench = sub.add_parser("bench", help="compare numba and numpy kernel paths")
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
