"""Generate byte fixtures for the UI test suite.

The wire format is the contract between the browser and the robot
service, so the TypeScript codec is tested against frames produced by
the service-side implementation rather than against itself. This script
writes tests/fixtures.json:

    interface  valid interface frames with their field values
    telemetry  valid telemetry frames with their field values
    scene      the scene frame for the default scenario
    malformed  byte strings the decoder must reject
    session    a scripted locomotion run (scene + telemetry stream) for
               replay into the live view

Run from the repository root with the package installed:

    python3 frontend/tools/make_fixtures.py
"""

import json
import math
import pathlib
import struct

import numpy as np

from mcr_teleop.config import StackConfig
from mcr_teleop.harness import load_scenario
from mcr_teleop.protocol import (
    Buttons,
    InterfaceMsg,
    SceneMsg,
    SessionMode,
    TelemetryMsg,
    encode,
)
from mcr_teleop.server import build_scene
from mcr_teleop.stack import TeleopStack

HERE = pathlib.Path(__file__).resolve().parent
OUT = HERE.parent / "tests" / "fixtures.json"

HEADER = struct.Struct("<IBBH")
MAGIC = 0x4D435254


def interface_fixtures(rng: np.random.Generator) -> list:
    msgs = [
        InterfaceMsg(seq=0, timestamp_ms=0),
        InterfaceMsg(seq=1, timestamp_ms=33,
                     translation=np.array([0.1, 0.0, 0.0]),
                     buttons=int(Buttons.ATTACH_TOGGLE)),
        InterfaceMsg(seq=2 ** 32 - 1, timestamp_ms=2 ** 32 - 1,
                     rotation=np.array([0.5, -0.5, 0.5, -0.5]),
                     translation=np.array([-1e6, 1e6, 0.0]),
                     buttons=255, priority_arm=1e6, priority_base=1e-3,
                     impedance_scale=0.0),
        InterfaceMsg(seq=7, timestamp_ms=1234,
                     rotation=np.array([math.cos(0.3), 0.0, 0.0, math.sin(0.3)]),
                     translation=np.array([0.05, -0.02, 0.11]),
                     buttons=int(Buttons.ESTOP), impedance_scale=2.5),
    ]
    for i in range(16):
        quat = rng.normal(size=4)
        quat /= np.linalg.norm(quat)
        msgs.append(InterfaceMsg(
            seq=int(rng.integers(0, 2 ** 32)),
            timestamp_ms=int(rng.integers(0, 2 ** 32)),
            rotation=quat,
            translation=rng.uniform(-2.0, 2.0, size=3),
            buttons=int(rng.integers(0, 32)),
            priority_arm=float(10.0 ** rng.uniform(-3, 6)),
            priority_base=float(10.0 ** rng.uniform(-3, 6)),
            impedance_scale=float(rng.uniform(0.0, 4.0)),
        ))
    out = []
    for m in msgs:
        out.append({
            "fields": {
                "seq": m.seq,
                "timestamp_ms": m.timestamp_ms,
                "rotation": [float(v) for v in m.rotation],
                "translation": [float(v) for v in m.translation],
                "buttons": m.buttons,
                "priority_arm": m.priority_arm,
                "priority_base": m.priority_base,
                "impedance_scale": m.impedance_scale,
            },
            "hex": encode(m).hex(),
        })
    return out


def telemetry_fixtures(rng: np.random.Generator) -> list:
    msgs = [
        TelemetryMsg(clock=0.0, q=np.zeros(10), qd=np.zeros(10),
                     ee_rotation=np.array([1.0, 0, 0, 0]),
                     ee_translation=np.zeros(3)),
        TelemetryMsg(clock=12.34, q=np.arange(10) * 0.1, qd=np.ones(10) * -0.2,
                     ee_rotation=np.array([0.0, 1.0, 0.0, 0.0]),
                     ee_translation=np.array([0.5, 0.0, 1.04]),
                     mode=SessionMode.DETACHED_LOCOMOTION, lock_axis="x",
                     gripper_closed=True, limit_flag=True, ball_attached=True,
                     contact_active=True, wrench=np.array([10.0, 0, 0, 0, 0, 1.5]),
                     ball_position=np.array([7.4, 5.0, 0.75]),
                     drawer_joint=0.35, last_seq=4321),
    ]
    modes = list(SessionMode)
    locks = [None, "x", "y", "yaw"]
    for i in range(12):
        quat = rng.normal(size=4)
        quat /= np.linalg.norm(quat)
        msgs.append(TelemetryMsg(
            clock=float(rng.uniform(0, 600)),
            q=rng.uniform(-3, 3, size=10),
            qd=rng.uniform(-1, 1, size=10),
            ee_rotation=quat,
            ee_translation=rng.uniform(-2, 2, size=3),
            mode=modes[int(rng.integers(0, len(modes)))],
            lock_axis=locks[int(rng.integers(0, len(locks)))],
            gripper_closed=bool(rng.integers(0, 2)),
            limit_flag=bool(rng.integers(0, 2)),
            ball_attached=bool(rng.integers(0, 2)),
            contact_active=bool(rng.integers(0, 2)),
            wrench=rng.uniform(-20, 20, size=6),
            ball_position=rng.uniform(-1, 8, size=3),
            drawer_joint=float(rng.uniform(0, 0.4)),
            last_seq=int(rng.integers(0, 2 ** 32)),
        ))
    out = []
    for m in msgs:
        out.append({
            "fields": {
                "clock": m.clock,
                "q": [float(v) for v in m.q],
                "qd": [float(v) for v in m.qd],
                "ee_rotation": [float(v) for v in m.ee_rotation],
                "ee_translation": [float(v) for v in m.ee_translation],
                "mode": int(m.mode),
                "lock_axis": m.lock_axis,
                "gripper_closed": m.gripper_closed,
                "limit_flag": m.limit_flag,
                "ball_attached": m.ball_attached,
                "contact_active": m.contact_active,
                "wrench": [float(v) for v in m.wrench],
                "ball_position": [float(v) for v in m.ball_position],
                "drawer_joint": m.drawer_joint,
                "last_seq": m.last_seq,
            },
            "hex": encode(m).hex(),
        })
    return out


def patched(frame: bytes, offset: int, payload: bytes) -> bytes:
    """Overwrite bytes inside an encoded frame (offset includes header)."""
    out = bytearray(frame)
    out[offset:offset + len(payload)] = payload
    return bytes(out)


def malformed_fixtures() -> list:
    valid_iface = encode(InterfaceMsg(seq=1, timestamp_ms=1))
    valid_tel = encode(TelemetryMsg(
        clock=1.0, q=np.zeros(10), qd=np.zeros(10),
        ee_rotation=np.array([1.0, 0, 0, 0]), ee_translation=np.zeros(3)))
    nan = struct.pack("<d", math.nan)
    blobs = [
        b"",
        b"\x01\x02\x03",
        HEADER.pack(0xDEADBEEF, 1, 1, 89) + valid_iface[8:],
        HEADER.pack(MAGIC, 9, 1, 89) + valid_iface[8:],
        HEADER.pack(MAGIC, 1, 7, 89) + valid_iface[8:],
        HEADER.pack(MAGIC, 1, 1, 10) + bytes(10),
        valid_iface[:40],
        valid_iface + b"\x00",
        patched(valid_iface, 8 + 40, nan),
        patched(valid_iface, 8 + 8, bytes(32)),
        patched(valid_iface, 8 + 65, struct.pack("<d", 0.0)),
        patched(valid_iface, 8 + 73, struct.pack("<d", -1.0)),
        patched(valid_tel, 8 + 224, b"\x09"),
        patched(valid_tel, 8 + 225, b"\x07"),
        patched(valid_tel, 8 + 226, b"\x03"),
        patched(valid_tel, 8 + 227, b"\xff"),
        patched(valid_tel, 8 + 8, struct.pack("<d", math.inf)),
        HEADER.pack(MAGIC, 1, 3, 4) + b"nope",
        HEADER.pack(MAGIC, 1, 3, 7) + b"[1,2,3]",
        HEADER.pack(MAGIC, 1, 3, 2) + b"\xff\xfe",
    ]
    return [b.hex() for b in blobs]


def session_fixture() -> dict:
    """Scripted locomotion run: attach, detach, switch to locomotion,
    drag the device 0.2 m along +x and hold."""
    spec = load_scenario()
    config = StackConfig.default()
    stack = TeleopStack(config, spec.environment, seed=0)

    def script(t: float):
        buttons = 0
        if 0.10 <= t < 0.17 or 0.40 <= t < 0.47:
            buttons = int(Buttons.ATTACH_TOGGLE)
        elif 0.70 <= t < 0.77:
            buttons = int(Buttons.MODE_TOGGLE)
        drag = 0.2 * min(max((t - 1.0) / 0.5, 0.0), 1.0)
        return np.array([drag, 0.0, 0.0]), buttons

    telemetry = []
    seq, next_t, period = 0, 0.0, 1.0 / 30.0
    duration = 4.0
    for _ in range(round(duration * config.rates.plant_rate)):
        while stack.clock >= next_t - 1e-12:
            translation, buttons = script(next_t)
            seq += 1
            stack.submit(InterfaceMsg(
                seq=seq, timestamp_ms=int(next_t * 1000),
                translation=translation, buttons=buttons))
            next_t += period
        frame = stack.step()
        if frame is not None:
            telemetry.append(frame)

    encoded = [encode(SceneMsg(build_scene(spec, config))).hex()]
    modes = []
    for frame in telemetry:
        encoded.append(encode(frame).hex())
        if int(frame.mode) not in modes:
            modes.append(int(frame.mode))
    final = telemetry[-1]
    final_base = [float(final.q[0]), float(final.q[1])]
    assert int(SessionMode.DETACHED_LOCOMOTION) in modes, modes
    assert final_base[0] > 0.2, final_base
    return {"frames": encoded, "final_base": final_base, "modes": modes}


def main():
    rng = np.random.default_rng(20260816)
    spec = load_scenario()
    config = StackConfig.default()
    fixtures = {
        "interface": interface_fixtures(rng),
        "telemetry": telemetry_fixtures(rng),
        "scene": {
            "hex": encode(SceneMsg(build_scene(spec, config))).hex(),
            "scenario": spec.name,
            "dead_zone": config.mapper.limits.dead_zone,
            "saturation": config.mapper.limits.saturation,
        },
        "malformed": malformed_fixtures(),
        "session": session_fixture(),
    }
    OUT.write_text(json.dumps(fixtures, indent=1))
    sizes = {k: (len(v) if isinstance(v, list) else 1) for k, v in fixtures.items()}
    print(f"wrote {OUT} ({sizes})")


if __name__ == "__main__":
    main()
