"""Interface-motion mapping.

Two consumers of the operator's pose stream:

* manipulation: the end-effector target is the initial EE pose composed with
  the interface delta since mode entry, translation scaled by alpha;
* locomotion: the planar interface displacement is turned into a virtual
  wrench through linear/rotational stiffness, gated by a circular dead zone,
  clamped at a saturation radius, and restricted to one axis at a time with
  direction changes allowed only once the base has stopped.

When the operator is physically attached to the robot the virtual wrench is
replaced by the measured force/torque signal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import AllZero, InvalidLimits
from .geometry import Pose, Wrench, compose, quat_to_rotvec, relative

AXES = ("x", "y", "yaw")


class TeleopMode(enum.Enum):
    ATTACHED_LOCAL = "attached-local"
    DETACHED_MANIPULATION = "detached-manipulation"
    DETACHED_LOCOMOTION = "detached-locomotion"


class GripperState(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class StiffnessParams:
    """Linear stiffness K (N/m, per x/y/z) and rotational C (N*m/rad, rpy)."""

    k: np.ndarray = field(default_factory=lambda: np.array([50.0, 50.0, 0.0]))
    c: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 20.0]))

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float).reshape(3).copy()
        self.c = np.asarray(self.c, dtype=float).reshape(3).copy()
        if np.any(self.k < 0) or np.any(self.c < 0):
            raise ValueError("stiffness values must be nonnegative")

    @classmethod
    def locomotion(cls, k_x: float, k_y: float, c_yaw: float) -> "StiffnessParams":
        """Planar 3-DoF shape: no vertical force, yaw the only torque channel."""
        return cls(k=np.array([k_x, k_y, 0.0]), c=np.array([0.0, 0.0, c_yaw]))

    @property
    def is_planar(self) -> bool:
        return self.k[2] == 0.0 and self.c[0] == 0.0 and self.c[1] == 0.0


@dataclass
class LocomotionLimits:
    """Dead-zone radius, saturation radius, and the stopped-speed thresholds."""

    dead_zone: float = 0.05   # m
    saturation: float = 0.30  # m (also caps the yaw displacement, in rad)
    stop_linear: float = 0.01   # m/s
    stop_angular: float = 0.02  # rad/s

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 < self.dead_zone < self.saturation:
            raise InvalidLimits(
                f"need 0 < dead_zone < saturation, got {self.dead_zone} / {self.saturation}"
            )
        if self.stop_linear <= 0 or self.stop_angular <= 0:
            raise InvalidLimits("stop thresholds must be positive")

    def commensurate_speed(self, base_twist) -> float:
        """Single stopped-test scalar: yaw rate rescaled onto the linear scale."""
        t = np.asarray(base_twist, dtype=float).reshape(3)
        return max(float(np.hypot(t[0], t[1])),
                   abs(t[2]) * self.stop_linear / self.stop_angular)

    @classmethod
    def from_dict(cls, d: dict) -> "LocomotionLimits":
        return cls(
            dead_zone=float(d["dead_zone"]),
            saturation=float(d["saturation"]),
            stop_linear=float(d["stop_linear"]),
            stop_angular=float(d["stop_angular"]),
        )


@dataclass(frozen=True)
class AxisLockState:
    """Single-direction restriction: which axis holds the lock, and whether
    the dead zone has been crossed (the wrench stays zero until it is)."""

    axis: Optional[str] = None
    engaged: bool = False


def scale_translation(delta: Pose, alpha: float) -> Pose:
    """Scale only the translation column of a relative transform."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return Pose(delta.rotation.copy(), alpha * delta.translation)


def manipulation_reference(v_initial: Pose, v_now: Pose, ee_initial_world: Pose,
                           alpha: float) -> Pose:
    """EE target: initial EE pose composed with the alpha-scaled interface delta.

    The delta is expressed in the initial interface frame, so pushing the
    device forward moves the EE along its own initial forward axis.
    """
    delta = relative(v_initial, v_now)
    return compose(ee_initial_world, scale_translation(delta, alpha))


def locomotion_displacement(v_entry: Pose, v_now: Pose) -> np.ndarray:
    """6-vector (dx, dy, dz, droll, dpitch, dyaw) since locomotion-mode entry."""
    delta = relative(v_entry, v_now)
    return np.concatenate([delta.translation, quat_to_rotvec(delta.rotation)])


def virtual_wrench(delta, k: StiffnessParams, limits: LocomotionLimits,
                   lock: AxisLockState) -> tuple:
    """Displacement to wrench: dead-zone latch, then F = K . clamp(delta).

    Engagement requires the planar displacement to cross the dead zone once;
    it latches until the displacement returns inside. Components are clamped
    to the saturation radius before scaling, so |F_i| <= K_i * saturation.
    """
    limits.validate()
    d = np.asarray(delta, dtype=float).reshape(6)
    planar = float(np.hypot(d[0], d[1]))
    engaged = lock.engaged
    if engaged and planar < limits.dead_zone:
        engaged = False
    elif not engaged and planar >= limits.dead_zone:
        engaged = True
    lock = replace(lock, engaged=engaged)
    if not engaged:
        return Wrench.zero(), lock
    clamped = np.clip(d, -limits.saturation, limits.saturation)
    return Wrench(force=k.k * clamped[:3], torque=k.c * clamped[3:]), lock


def dominant_axis(delta, normalization=None, saturation: float = 0.30) -> str:
    """Largest normalized displacement among x, y, yaw; ties resolve x > y > yaw.

    By default a quarter-turn of yaw competes with a full-saturation
    translation (scale saturation / (pi/4)); there is no physically forced
    commensuration between meters and radians.
    """
    d = np.asarray(delta, dtype=float).reshape(6)
    if normalization is None:
        normalization = np.array([1.0, 1.0, saturation / (np.pi / 4)])
    scores = np.abs(np.array([d[0], d[1], d[5]])) * np.asarray(normalization, dtype=float)
    if not np.any(scores):
        raise AllZero("no displacement component to pick an axis from")
    return AXES[int(np.argmax(scores))]


def _wrench_channels(w: Wrench) -> np.ndarray:
    return np.array([w.force[0], w.force[1], w.torque[2]])


def _project_axis(w: Wrench, axis: str) -> Wrench:
    channels = _wrench_channels(w)
    out = Wrench.zero()
    if axis == "x":
        out.force[0] = channels[0]
    elif axis == "y":
        out.force[1] = channels[1]
    else:
        out.torque[2] = channels[2]
    return out


def axis_lock_step(wrench: Wrench, base_speed: float, lock: AxisLockState,
                   limits: LocomotionLimits, axis_hint: Optional[str] = None) -> tuple:
    """Enforce one motion direction at a time.

    An unlocked nonzero wrench acquires the lock (on `axis_hint` when the
    caller knows the dominant displacement axis); a held lock projects the
    wrench onto its axis and releases only once the base has stopped and the
    dead zone has been re-entered.
    """
    if lock.axis is not None and base_speed < limits.stop_linear and not lock.engaged:
        lock = replace(lock, axis=None)
    channels = _wrench_channels(wrench)
    if lock.axis is None:
        if not np.any(channels):
            return Wrench.zero(), lock
        axis = axis_hint if axis_hint in AXES else AXES[int(np.argmax(np.abs(channels)))]
        lock = replace(lock, axis=axis)
    return _project_axis(wrench, lock.axis), lock


def wrench_source(mode: TeleopMode, virtual: Wrench, measured_ft: Wrench) -> Wrench:
    """Locomotion uses the virtual wrench, attached mode the F/T signal."""
    if mode is TeleopMode.DETACHED_LOCOMOTION:
        return virtual
    if mode is TeleopMode.ATTACHED_LOCAL:
        return measured_ft
    return Wrench.zero()


@dataclass
class MapperParams:
    """Everything the mapper needs, loadable from the config file."""

    alpha: float = 1.0
    stiffness: StiffnessParams = field(default_factory=StiffnessParams)
    limits: LocomotionLimits = field(default_factory=LocomotionLimits)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @classmethod
    def from_dict(cls, d: dict) -> "MapperParams":
        s = d["stiffness"]
        return cls(
            alpha=float(d["alpha"]),
            stiffness=StiffnessParams.locomotion(float(s["x"]), float(s["y"]),
                                                 float(s["yaw"])),
            limits=LocomotionLimits.from_dict(d),
        )


def locomotion_command(v_entry: Pose, v_now: Pose, base_twist, lock: AxisLockState,
                       params: MapperParams) -> tuple:
    """Full locomotion pipeline: displacement -> wrench -> single-axis lock.

    Returns (commanded, lock, pull): `commanded` is the axis-projected wrench
    the base admittance integrates; `pull` is the engaged spring wrench before
    projection, the signal a client needs to see (and cancel) displacement
    components the lock is suppressing.
    """
    d = locomotion_displacement(v_entry, v_now)
    raw, lock = virtual_wrench(d, params.stiffness, params.limits, lock)
    hint = None
    if lock.axis is None and not raw.is_zero:
        hint = dominant_axis(d, saturation=params.limits.saturation)
    speed = params.limits.commensurate_speed(base_twist)
    commanded, lock = axis_lock_step(raw, speed, lock, params.limits, axis_hint=hint)
    return commanded, lock, raw
