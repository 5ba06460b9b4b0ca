"""Seeded one-edge topology for the console end-to-end test.

Prints the operator HTTP port on stdout, feeds synthetic frames (a person
wearing a red hat and blue jeans, so to speak) until stdin closes.
"""

import sys
import threading
import time

from ivise.edge import EdgeAgent, EdgeConfig, TcpTransport
from ivise.fog import EdgeListener, FogNode, OperatorServer
from ivise.provider import SyntheticPoseProvider
from ivise.query import CameraInfo, CameraRegistry
from ivise.sim import PersonSpec, SceneSpec, render_scene, scene_skeletons

registry = CameraRegistry([CameraInfo("cam0", "local:0", 42.1, -75.9)])
fog = FogNode(registry)
listener = EdgeListener(("127.0.0.1", 0), fog)
listener.start()
operator = OperatorServer(("127.0.0.1", 0), fog)
operator.start()

scene = SceneSpec(
    seed=5, width=640, height=640,
    persons=(PersonSpec((70, 40), torso_color="grey", leg_color="blue",
                        hair_color="red"),),
)
provider = SyntheticPoseProvider(lambda cam, seq: scene_skeletons(scene, seq))
agent = EdgeAgent(EdgeConfig("cam0", drop_ratio=0.0, heartbeat_secs=1e9), provider)
agent.transport = TcpTransport(listener.server_address, on_message=agent.receive)
agent.send_heartbeat()

print(operator.server_address[1], flush=True)

stop = threading.Event()


def feed():
    seq = 0
    while not stop.is_set() and seq < 5000:
        frame, _, _ = render_scene(scene, seq, "cam0")
        agent.offer(frame)
        seq += 1
        time.sleep(0.02)


threading.Thread(target=feed, daemon=True).start()
sys.stdin.read()
stop.set()
