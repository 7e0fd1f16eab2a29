"""Forward kinematics of the mobile manipulator.

The robot is an omnidirectional planar base (x, y, yaw) carrying a 7-DoF arm,
10 whole-body coordinates in total. The arm is described by a modified-DH
table loaded from a config file, so any 7-DoF arm is substitutable; the
shipped default uses Franka-style link offsets with symmetric joint limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .errors import JointLimitViolation
from .geometry import Pose, compose, quat_from_yaw, quat_rotate

LIMIT_EPS = 1e-9


@dataclass
class WholeBodyState:
    """q = (q_v, q_r) in R^10 plus velocities.

    q_v = (x m, y m, yaw rad) of the base, q_r = 7 arm joint angles (rad).
    """

    q_v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_r: np.ndarray = field(default_factory=lambda: np.zeros(7))
    qd_v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qd_r: np.ndarray = field(default_factory=lambda: np.zeros(7))

    def __post_init__(self):
        self.q_v = np.asarray(self.q_v, dtype=float).reshape(3).copy()
        self.q_r = np.asarray(self.q_r, dtype=float).reshape(7).copy()
        self.qd_v = np.asarray(self.qd_v, dtype=float).reshape(3).copy()
        self.qd_r = np.asarray(self.qd_r, dtype=float).reshape(7).copy()

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.q_v, self.q_r])

    @property
    def qd(self) -> np.ndarray:
        return np.concatenate([self.qd_v, self.qd_r])

    def copy(self) -> "WholeBodyState":
        return WholeBodyState(self.q_v.copy(), self.q_r.copy(),
                              self.qd_v.copy(), self.qd_r.copy())

    @classmethod
    def zero(cls) -> "WholeBodyState":
        return cls()


@dataclass
class ArmModel:
    """Modified-DH arm description plus the base-to-arm mount transform.

    dh rows are (a_{i-1} m, d_i m, alpha_{i-1} rad), one per joint; `flange`
    is the fixed transform from the last joint frame to the end-effector.
    """

    dh: np.ndarray
    limits_lo: np.ndarray
    limits_hi: np.ndarray
    flange: Pose
    mount: Pose
    home: np.ndarray

    # fixed per-link transforms Rot_x(alpha) Trans_x(a), precomputed once
    _link_fixed: list = field(default=None, repr=False)

    def __post_init__(self):
        self.dh = np.asarray(self.dh, dtype=float).reshape(7, 3)
        self.limits_lo = np.asarray(self.limits_lo, dtype=float).reshape(7)
        self.limits_hi = np.asarray(self.limits_hi, dtype=float).reshape(7)
        self.home = np.asarray(self.home, dtype=float).reshape(7)
        self._link_fixed = []
        for a, _d, alpha in self.dh:
            half = 0.5 * alpha
            q = np.array([np.cos(half), np.sin(half), 0.0, 0.0])
            self._link_fixed.append(Pose(q, np.array([a, 0.0, 0.0])))

    def check_limits(self, q_r: np.ndarray) -> None:
        for i in range(7):
            if q_r[i] < self.limits_lo[i] - LIMIT_EPS or q_r[i] > self.limits_hi[i] + LIMIT_EPS:
                raise JointLimitViolation(i, float(q_r[i]),
                                          float(self.limits_lo[i]),
                                          float(self.limits_hi[i]))

    def clamp_limits(self, q_r: np.ndarray) -> tuple[np.ndarray, bool]:
        clamped = np.clip(q_r, self.limits_lo, self.limits_hi)
        return clamped, bool(np.any(clamped != q_r))

    @staticmethod
    def from_dict(data: dict) -> "ArmModel":
        mount = data.get("mount", {})
        flange = data.get("flange", {})
        return ArmModel(
            dh=np.array([[row["a"], row["d"], row["alpha"]] for row in data["dh"]]),
            limits_lo=np.array([row[0] for row in data["joint_limits"]]),
            limits_hi=np.array([row[1] for row in data["joint_limits"]]),
            flange=Pose.from_parts(translation=flange.get("translation", [0, 0, 0]),
                                   rotvec=flange.get("rotvec", [0, 0, 0])),
            mount=Pose.from_parts(translation=mount.get("translation", [0, 0, 0]),
                                  rotvec=mount.get("rotvec", [0, 0, 0])),
            home=np.array(data["home"]),
        )

    @staticmethod
    def default() -> "ArmModel":
        text = resources.files("mcr_teleop").joinpath("data/arm_model.yaml").read_text()
        return ArmModel.from_dict(yaml.safe_load(text))


def base_fk(q_v: np.ndarray) -> Pose:
    """Planar base pose embedded in SE(3): z = 0, roll = pitch = 0."""
    q_v = np.asarray(q_v, dtype=float)
    return Pose(quat_from_yaw(float(q_v[2])),
                np.array([q_v[0], q_v[1], 0.0]))


def arm_fk(q_r: np.ndarray, model: ArmModel) -> Pose:
    """End-effector pose in the arm-base frame by chaining the link transforms."""
    model.check_limits(q_r)
    ee = Pose.identity()
    for i in range(7):
        ee = compose(ee, _link_pose(model, i, q_r[i]))
    return compose(ee, model.flange)


def whole_body_fk(state: WholeBodyState, model: ArmModel) -> Pose:
    return compose(base_fk(state.q_v), compose(model.mount, arm_fk(state.q_r, model)))


def whole_body_jacobian(state: WholeBodyState, model: ArmModel) -> np.ndarray:
    """6x10 world-frame geometric Jacobian: [linear; angular] rows.

    Columns 0..2 are base x, y, yaw; columns 3..9 the arm joints.
    """
    model.check_limits(state.q_r)
    world_base = base_fk(state.q_v)
    frame = compose(world_base, model.mount)

    # joint origins and axes in world, walking the chain once
    origins = np.empty((7, 3))
    axes = np.empty((7, 3))
    for i in range(7):
        frame = compose(frame, _link_pose(model, i, state.q_r[i]))
        origins[i] = frame.translation
        axes[i] = quat_rotate(frame.rotation, np.array([0.0, 0.0, 1.0]))
    p_ee = compose(frame, model.flange).translation

    J = np.zeros((6, 10))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    # base yaw spins the whole robot about the vertical through the base origin
    r = p_ee - np.array([state.q_v[0], state.q_v[1], 0.0])
    J[:3, 2] = np.cross(np.array([0.0, 0.0, 1.0]), r)
    J[5, 2] = 1.0
    for i in range(7):
        J[:3, 3 + i] = np.cross(axes[i], p_ee - origins[i])
        J[3:, 3 + i] = axes[i]
    return J


def _link_pose(model: ArmModel, i: int, theta: float) -> Pose:
    # Rot_x(alpha) Trans_x(a) Rot_z(theta) Trans_z(d); the z parts commute
    half = 0.5 * theta
    rot = np.array([np.cos(half), 0.0, 0.0, np.sin(half)])
    return compose(model._link_fixed[i],
                   Pose(rot, np.array([0.0, 0.0, model.dh[i, 1]])))
