"""Drive the network service the way a remote client would.

Starts the teleoperation service on loopback, connects to the telemetry
stream, reads the scene description, then presses the attach button over
the UDP command socket and watches the acknowledged mode change arrive
in telemetry. Everything runs in one process; the wire traffic is real.

    python3 demos/live_service.py
"""

import socket
import threading
import time

import numpy as np

from mcr_teleop.config import NetworkConfig, StackConfig
from mcr_teleop.harness import load_scenario
from mcr_teleop.protocol import (Buttons, FrameReader, InterfaceMsg, SceneMsg,
                                 SessionMode, TelemetryMsg, encode)
from mcr_teleop.server import TeleopService


def main():
    config = StackConfig.default()
    config.network = NetworkConfig(bind="127.0.0.1", command_port=0,
                                   telemetry_port=0, web_port=0)
    service = TeleopService(config, load_scenario())
    service.start()
    server_thread = threading.Thread(target=service.serve, daemon=True)
    server_thread.start()
    print(f"service up: commands udp/{service.command_port}, "
          f"telemetry tcp/{service.telemetry_port}, web ws/{service.web_port}")

    sock = socket.create_connection(("127.0.0.1", service.telemetry_port),
                                    timeout=2.0)
    sock.settimeout(0.25)
    udp = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    reader = FrameReader()
    pressed = False
    seq = 0
    try:
        deadline = time.monotonic() + 6.0
        while time.monotonic() < deadline:
            try:
                data = sock.recv(65536)
            except socket.timeout:
                continue
            for msg in reader.feed(data):
                if isinstance(msg, SceneMsg):
                    scene = msg.scene
                    print(f"scene: scenario {scene['scenario']!r}, subtasks "
                          f"{scene['subtasks']}, telemetry at "
                          f"{scene['rates']['telemetry_rate']:.0f} Hz")
                elif isinstance(msg, TelemetryMsg):
                    if not pressed and msg.clock > 1.0:
                        print(f"t={msg.clock:.2f}: pressing attach over UDP")
                        for buttons in (Buttons.ATTACH_TOGGLE,
                                        Buttons.ATTACH_TOGGLE, 0, 0):
                            seq += 1
                            frame = encode(InterfaceMsg(
                                seq=seq, timestamp_ms=int(msg.clock * 1000),
                                rotation=np.array([1.0, 0.0, 0.0, 0.0]),
                                translation=np.zeros(3), buttons=int(buttons)))
                            udp.sendto(frame, ("127.0.0.1",
                                               service.command_port))
                            time.sleep(0.04)
                        pressed = True
                    if msg.mode == SessionMode.ATTACHED_LOCAL:
                        print(f"t={msg.clock:.2f}: service acknowledged the "
                              f"press, mode {msg.mode.name} "
                              f"(last_seq {msg.last_seq})")
                        return
        print("no acknowledgment before the deadline")
    finally:
        sock.close()
        udp.close()
        service.stop()
        server_thread.join(timeout=2.0)


if __name__ == "__main__":
    main()
