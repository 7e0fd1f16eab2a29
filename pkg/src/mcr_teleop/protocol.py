"""Binary wire protocol between the handheld interface, the robot service,
and telemetry consumers.

Every frame is a fixed little-endian header followed by a typed payload:

    magic   u32   0x4D435254
    version u8    PROTOCOL_VERSION
    type    u8    FrameType
    length  u16   payload byte count

Interface and telemetry payloads are fixed-width packed structs; the scene
payload is canonical JSON (sorted keys, compact separators) so that every
frame, once valid, re-encodes to the identical byte string. Decoding never
raises anything except MalformedFrame, whatever the input bytes.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .errors import MalformedFrame
from .geometry import Pose

MAGIC = 0x4D435254
PROTOCOL_VERSION = 1

HEADER = struct.Struct("<IBBH")
INTERFACE_BODY = struct.Struct("<II7dB3d")
TELEMETRY_BODY = struct.Struct("<d10d10d7dBBBB6d3ddI")
MAX_FRAME_SIZE = HEADER.size + 65535


class FrameType(enum.IntEnum):
    INTERFACE = 1
    TELEMETRY = 2
    SCENE = 3


class Buttons(enum.IntFlag):
    """Bitfield carried in InterfaceMsg; unknown bits pass through."""

    NONE = 0
    MODE_TOGGLE = 1
    GRIPPER_TOGGLE = 2
    ATTACH_TOGGLE = 4
    ESTOP = 8
    RESUME = 16


class SessionMode(enum.IntEnum):
    IDLE = 0
    ATTACHED_LOCAL = 1
    DETACHED_MANIPULATION = 2
    DETACHED_LOCOMOTION = 3
    SAFETY_STOP = 4


LOCK_AXIS_CODES = {None: 0, "x": 1, "y": 2, "yaw": 3}
LOCK_AXIS_NAMES = {v: k for k, v in LOCK_AXIS_CODES.items()}


def _require_finite(values, what: str):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise MalformedFrame(f"non-finite {what}")
    return arr


@dataclass
class InterfaceMsg:
    """One pose/button sample from the handheld interface.

    Rotation and translation are stored as raw wire values (no
    normalization) so a decoded frame re-encodes bit-exactly; use .pose
    for a normalized Pose.
    """

    seq: int
    timestamp_ms: int
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    buttons: int = 0
    priority_arm: float = 1.0
    priority_base: float = 1.0
    impedance_scale: float = 1.0

    def __post_init__(self):
        self.rotation = _require_finite(self.rotation, "rotation")
        self.translation = _require_finite(self.translation, "translation")
        if self.rotation.shape != (4,) or self.translation.shape != (3,):
            raise MalformedFrame("bad pose component shape")
        if np.abs(self.rotation).max() > 1e6 or np.abs(self.translation).max() > 1e6:
            raise MalformedFrame("pose component out of range")
        if float(self.rotation @ self.rotation) < 1e-12:
            raise MalformedFrame("zero-norm rotation")
        if not (0 <= self.seq < 2 ** 32) or not (0 <= self.timestamp_ms < 2 ** 32):
            raise MalformedFrame("counter out of range")
        if not (0 <= self.buttons < 256):
            raise MalformedFrame("buttons out of range")
        for label in ("priority_arm", "priority_base"):
            value = getattr(self, label)
            if not math.isfinite(value) or value <= 0:
                raise MalformedFrame(f"{label} must be finite and positive")
        if not math.isfinite(self.impedance_scale) or self.impedance_scale < 0:
            raise MalformedFrame("impedance_scale must be finite and nonnegative")

    @property
    def pose(self) -> Pose:
        return Pose(self.rotation.copy(), self.translation.copy())

    @classmethod
    def from_pose(cls, seq: int, timestamp_ms: int, pose: Pose,
                  buttons: int = 0, priority_arm: float = 1.0,
                  priority_base: float = 1.0, impedance_scale: float = 1.0) -> "InterfaceMsg":
        return cls(seq=seq, timestamp_ms=timestamp_ms,
                   rotation=pose.rotation.copy(), translation=pose.translation.copy(),
                   buttons=buttons, priority_arm=priority_arm,
                   priority_base=priority_base, impedance_scale=impedance_scale)

    def _pack(self) -> bytes:
        return INTERFACE_BODY.pack(
            self.seq, self.timestamp_ms,
            *self.rotation, *self.translation,
            self.buttons,
            self.priority_arm, self.priority_base, self.impedance_scale)

    @classmethod
    def _unpack(cls, payload: bytes) -> "InterfaceMsg":
        fields = INTERFACE_BODY.unpack(payload)
        return cls(seq=fields[0], timestamp_ms=fields[1],
                   rotation=np.array(fields[2:6]), translation=np.array(fields[6:9]),
                   buttons=fields[9], priority_arm=fields[10],
                   priority_base=fields[11], impedance_scale=fields[12])


@dataclass
class TelemetryMsg:
    """Robot-side state snapshot broadcast to UIs and loggers."""

    clock: float
    q: np.ndarray
    qd: np.ndarray
    ee_rotation: np.ndarray
    ee_translation: np.ndarray
    mode: SessionMode = SessionMode.IDLE
    lock_axis: Optional[str] = None
    gripper_closed: bool = False
    limit_flag: bool = False
    ball_attached: bool = False
    contact_active: bool = False
    wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    ball_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    drawer_joint: float = 0.0
    last_seq: int = 0

    def __post_init__(self):
        self.q = _require_finite(self.q, "q")
        self.qd = _require_finite(self.qd, "qd")
        self.ee_rotation = _require_finite(self.ee_rotation, "ee rotation")
        self.ee_translation = _require_finite(self.ee_translation, "ee translation")
        self.wrench = _require_finite(self.wrench, "wrench")
        self.ball_position = _require_finite(self.ball_position, "ball position")
        _require_finite([self.clock, self.drawer_joint], "scalars")
        if self.q.shape != (10,) or self.qd.shape != (10,):
            raise MalformedFrame("bad state shape")
        if self.ee_rotation.shape != (4,) or self.ee_translation.shape != (3,):
            raise MalformedFrame("bad pose component shape")
        if self.wrench.shape != (6,) or self.ball_position.shape != (3,):
            raise MalformedFrame("bad vector shape")
        if not isinstance(self.mode, SessionMode):
            try:
                self.mode = SessionMode(self.mode)
            except ValueError:
                raise MalformedFrame(f"unknown mode {self.mode}") from None
        if self.lock_axis not in LOCK_AXIS_CODES:
            raise MalformedFrame(f"unknown lock axis {self.lock_axis!r}")
        if not (0 <= self.last_seq < 2 ** 32):
            raise MalformedFrame("counter out of range")

    @property
    def ee_pose(self) -> Pose:
        return Pose(self.ee_rotation.copy(), self.ee_translation.copy())

    @property
    def flags(self) -> int:
        return (int(self.limit_flag) | (int(self.ball_attached) << 1)
                | (int(self.contact_active) << 2))

    def _pack(self) -> bytes:
        return TELEMETRY_BODY.pack(
            self.clock, *self.q, *self.qd,
            *self.ee_rotation, *self.ee_translation,
            int(self.mode), LOCK_AXIS_CODES[self.lock_axis],
            int(self.gripper_closed), self.flags,
            *self.wrench, *self.ball_position,
            self.drawer_joint, self.last_seq)

    @classmethod
    def _unpack(cls, payload: bytes) -> "TelemetryMsg":
        f = TELEMETRY_BODY.unpack(payload)
        mode_code, lock_code, gripper, flags = f[28], f[29], f[30], f[31]
        if lock_code not in LOCK_AXIS_NAMES:
            raise MalformedFrame(f"unknown lock axis code {lock_code}")
        if gripper not in (0, 1):
            raise MalformedFrame(f"bad gripper code {gripper}")
        if flags > 7:
            raise MalformedFrame(f"unknown flag bits {flags:#x}")
        return cls(
            clock=f[0], q=np.array(f[1:11]), qd=np.array(f[11:21]),
            ee_rotation=np.array(f[21:25]), ee_translation=np.array(f[25:28]),
            mode=mode_code, lock_axis=LOCK_AXIS_NAMES[lock_code],
            gripper_closed=bool(gripper),
            limit_flag=bool(flags & 1), ball_attached=bool(flags & 2),
            contact_active=bool(flags & 4),
            wrench=np.array(f[32:38]), ball_position=np.array(f[38:41]),
            drawer_joint=f[41], last_seq=f[42])


@dataclass
class SceneMsg:
    """Static scene description sent once per telemetry connection.

    The payload is canonical JSON; decoded frames keep the original bytes
    so re-encoding is bit-exact.
    """

    scene: dict
    _raw: Optional[bytes] = None

    def _pack(self) -> bytes:
        if self._raw is not None:
            return self._raw
        return json.dumps(self.scene, sort_keys=True,
                          separators=(",", ":")).encode("utf-8")

    @classmethod
    def _unpack(cls, payload: bytes) -> "SceneMsg":
        try:
            scene = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedFrame(f"bad scene payload: {exc}") from None
        if not isinstance(scene, dict):
            raise MalformedFrame("scene payload must be a JSON object")
        return cls(scene=scene, _raw=bytes(payload))


Message = Union[InterfaceMsg, TelemetryMsg, SceneMsg]

_TYPE_OF = {InterfaceMsg: FrameType.INTERFACE,
            TelemetryMsg: FrameType.TELEMETRY,
            SceneMsg: FrameType.SCENE}
_BODY_SIZE = {FrameType.INTERFACE: INTERFACE_BODY.size,
              FrameType.TELEMETRY: TELEMETRY_BODY.size}


def encode(msg: Message) -> bytes:
    """Serialize one message to a framed byte string."""
    try:
        frame_type = _TYPE_OF[type(msg)]
    except KeyError:
        raise MalformedFrame(f"cannot encode {type(msg).__name__}") from None
    payload = msg._pack()
    if len(payload) > 65535:
        raise MalformedFrame("payload too large")
    return HEADER.pack(MAGIC, PROTOCOL_VERSION, int(frame_type), len(payload)) + payload


def decode(data: bytes) -> Message:
    """Parse exactly one frame; raises MalformedFrame on any defect."""
    msg, consumed = _decode_prefix(data)
    if consumed != len(data):
        raise MalformedFrame(f"{len(data) - consumed} trailing bytes")
    return msg


def _decode_prefix(data: bytes):
    """Parse one frame from the front of data -> (msg, bytes consumed)."""
    if len(data) < HEADER.size:
        raise MalformedFrame("truncated header")
    magic, version, type_code, length = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedFrame(f"bad magic {magic:#010x}")
    if version != PROTOCOL_VERSION:
        raise MalformedFrame(f"unsupported version {version}")
    try:
        frame_type = FrameType(type_code)
    except ValueError:
        raise MalformedFrame(f"unknown frame type {type_code}") from None
    expected = _BODY_SIZE.get(frame_type)
    if expected is not None and length != expected:
        raise MalformedFrame(f"bad length {length} for {frame_type.name}")
    end = HEADER.size + length
    if len(data) < end:
        raise MalformedFrame("truncated payload")
    payload = bytes(data[HEADER.size:end])
    try:
        if frame_type == FrameType.INTERFACE:
            msg = InterfaceMsg._unpack(payload)
        elif frame_type == FrameType.TELEMETRY:
            msg = TelemetryMsg._unpack(payload)
        else:
            msg = SceneMsg._unpack(payload)
    except MalformedFrame:
        raise
    except struct.error as exc:
        raise MalformedFrame(str(exc)) from None
    return msg, end


class FrameReader:
    """Incremental frame parser for stream transports.

    feed(data) returns every complete message now available; a malformed
    prefix raises MalformedFrame and poisons the reader (stream framing
    cannot recover once byte alignment is lost).
    """

    def __init__(self):
        self._buffer = bytearray()
        self._poisoned = False

    def feed(self, data: bytes) -> List[Message]:
        if self._poisoned:
            raise MalformedFrame("reader previously hit a malformed frame")
        self._buffer.extend(data)
        if len(self._buffer) > 4 * MAX_FRAME_SIZE:
            self._poisoned = True
            raise MalformedFrame("buffer overrun without a complete frame")
        out = []
        while True:
            if len(self._buffer) < HEADER.size:
                return out
            _, _, _, length = HEADER.unpack_from(self._buffer)
            end = HEADER.size + length
            if len(self._buffer) < end:
                # not enough bytes yet; header validity is checked on decode
                if len(self._buffer) >= HEADER.size:
                    self._check_header_prefix()
                return out
            try:
                msg, consumed = _decode_prefix(bytes(self._buffer))
            except MalformedFrame:
                self._poisoned = True
                raise
            del self._buffer[:consumed]
            out.append(msg)

    def _check_header_prefix(self):
        magic, version, type_code, _ = HEADER.unpack_from(self._buffer)
        if magic != MAGIC or version != PROTOCOL_VERSION or type_code not in (
                int(FrameType.INTERFACE), int(FrameType.TELEMETRY), int(FrameType.SCENE)):
            self._poisoned = True
            raise MalformedFrame("bad header in stream")
