"""Deterministic plant: virtual-admittance base plus a kinematic arm.

The base obeys M qdd + D qd = F through semi-implicit Euler; the arm tracks
commanded joint velocities through a first-order lag so a commanded-vs-actual
error exists for the whole-body coupling to act on. Scripted environment
objects (a graspable ball and a drawer with closing resistance) react to the
end-effector and report a contact wrench.

Everything here is pure float arithmetic on explicit state: identical inputs
give bitwise-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import ControllerOutput
from .geometry import Wrench
from .kinematics import ArmModel, WholeBodyState, whole_body_fk

ARM_LAG = 0.05          # s, first-order tracking time constant
RESISTANCE_SOFTNESS = 0.02  # arm slowdown per N of contact force while closing


@dataclass
class DrawerSpec:
    """Prismatic drawer: joint value = how far open along `axis` (m)."""

    handle_closed: np.ndarray = field(default_factory=lambda: np.array([2.45, 0.0, 0.75]))
    axis: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    travel: float = 0.3
    start_joint: float = 0.3
    resistance: float = 15.0   # N, constant while closing
    capture_radius: float = 0.10

    def __post_init__(self):
        self.handle_closed = np.asarray(self.handle_closed, dtype=float).reshape(3).copy()
        self.axis = np.asarray(self.axis, dtype=float).reshape(3).copy()
        n = np.linalg.norm(self.axis)
        if n == 0:
            raise ValueError("drawer axis must be nonzero")
        self.axis = self.axis / n
        if not 0 <= self.start_joint <= self.travel:
            raise ValueError("start_joint outside [0, travel]")

    def handle_position(self, joint: float) -> np.ndarray:
        return self.handle_closed + joint * self.axis


@dataclass
class EnvironmentScript:
    """Scene objects the plant reacts to."""

    ball_position: np.ndarray = field(default_factory=lambda: np.array([0.65, 0.10, 0.75]))
    drawer: DrawerSpec = field(default_factory=DrawerSpec)
    grasp_radius: float = 0.08

    def __post_init__(self):
        self.ball_position = np.asarray(self.ball_position, dtype=float).reshape(3).copy()

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentScript":
        drawer = d.get("drawer", {})
        return cls(
            ball_position=np.asarray(d["ball_position"], dtype=float),
            drawer=DrawerSpec(
                handle_closed=np.asarray(drawer["handle_closed"], dtype=float),
                axis=np.asarray(drawer["axis"], dtype=float),
                travel=float(drawer["travel"]),
                start_joint=float(drawer["start_joint"]),
                resistance=float(drawer["resistance"]),
                capture_radius=float(drawer["capture_radius"]),
            ),
            grasp_radius=float(d["grasp_radius"]),
        )


@dataclass
class SimState:
    """Full plant state advanced by plant_step."""

    body: WholeBodyState = field(default_factory=WholeBodyState)
    clock: float = 0.0
    seed: int = 0
    contact: Wrench = field(default_factory=Wrench.zero)
    drawer_joint: float = 0.3
    ball_position: np.ndarray = field(default_factory=lambda: np.array([0.65, 0.10, 0.75]))
    ball_attached: bool = False
    gripper_closed: bool = False
    limit_flag: bool = False

    def __post_init__(self):
        self.ball_position = np.asarray(self.ball_position, dtype=float).reshape(3).copy()

    @classmethod
    def initial(cls, env: EnvironmentScript, arm: ArmModel, seed: int = 0) -> "SimState":
        body = WholeBodyState.zero()
        body.q_r = arm.home.copy()
        return cls(body=body, seed=seed,
                   drawer_joint=env.drawer.start_joint,
                   ball_position=env.ball_position.copy())

    def copy(self) -> "SimState":
        return SimState(
            body=self.body.copy(), clock=self.clock, seed=self.seed,
            contact=Wrench(self.contact.force.copy(), self.contact.torque.copy()),
            drawer_joint=self.drawer_joint,
            ball_position=self.ball_position.copy(),
            ball_attached=self.ball_attached,
            gripper_closed=self.gripper_closed,
            limit_flag=self.limit_flag,
        )


def admittance_step(wrench_base: Wrench, qd_v, m_v, d_v, dt: float) -> np.ndarray:
    """One semi-implicit Euler step of M qdd + D qd = F on the planar base.

    qd+ = (M + dt D)^-1 (M qd + dt F); unconditionally stable, dissipative
    for any SPD M, D.
    """
    if not 0 < dt <= 0.05:
        raise ValueError(f"dt must be in (0, 0.05], got {dt}")
    qd = np.asarray(qd_v, dtype=float).reshape(3)
    f = np.array([wrench_base.force[0], wrench_base.force[1], wrench_base.torque[2]])
    m = np.asarray(m_v, dtype=float)
    d = np.asarray(d_v, dtype=float)
    return np.linalg.solve(m + dt * d, m @ qd + dt * f)


def _lag_factor(dt: float, tau: float) -> float:
    return 1.0 - np.exp(-dt / tau)


def plant_step(state: SimState, controller_out: ControllerOutput,
               env: EnvironmentScript, dt: float, arm: ArmModel,
               base_twist_override: Optional[np.ndarray] = None,
               arm_lag: float = ARM_LAG) -> SimState:
    """Advance the plant by dt under the commanded joint velocities.

    The arm follows commands through a first-order lag, slowed further while
    the drawer resists; the base either lags toward its commanded twist or is
    set outright by the admittance integrator (base_twist_override). Joint
    limits saturate and raise the telemetry flag rather than erroring.
    """
    if not 0 < dt <= 0.05:
        raise ValueError(f"dt must be in (0, 0.05], got {dt}")
    nxt = state.copy()
    body = nxt.body
    alpha = _lag_factor(dt, arm_lag)

    qd_r_cmd = controller_out.qd_command[3:]
    # previous-step contact gates the slowdown (one-tick delay keeps the
    # update explicit and deterministic)
    if np.any(state.contact.force):
        qd_r_cmd = qd_r_cmd / (1.0 + RESISTANCE_SOFTNESS * env.drawer.resistance)
    body.qd_r = body.qd_r + alpha * (qd_r_cmd - body.qd_r)

    if base_twist_override is not None:
        body.qd_v = np.asarray(base_twist_override, dtype=float).reshape(3).copy()
    else:
        body.qd_v = body.qd_v + alpha * (controller_out.qd_command[:3] - body.qd_v)

    body.q_v = body.q_v + dt * body.qd_v
    body.q_r = body.q_r + dt * body.qd_r

    clamped, violated = arm.clamp_limits(body.q_r)
    nxt.limit_flag = bool(violated)
    if violated:
        stuck = clamped != body.q_r
        body.qd_r = np.where(stuck, 0.0, body.qd_r)
        body.q_r = clamped

    ee = whole_body_fk(body, arm)

    # drawer: the handle follows the EE along its axis while captured;
    # pushing it shut meets a constant resistance
    handle = env.drawer.handle_position(nxt.drawer_joint)
    contact = Wrench.zero()
    if np.linalg.norm(ee.translation - handle) <= env.drawer.capture_radius:
        joint_new = float(np.clip(
            np.dot(ee.translation - env.drawer.handle_closed, env.drawer.axis),
            0.0, env.drawer.travel))
        if joint_new < nxt.drawer_joint - 1e-12:
            contact = Wrench(force=env.drawer.resistance * env.drawer.axis,
                             torque=np.zeros(3))
        nxt.drawer_joint = joint_new
    nxt.contact = contact

    if nxt.ball_attached:
        if nxt.gripper_closed:
            nxt.ball_position = ee.translation.copy()
        else:
            nxt.ball_attached = False
    elif nxt.gripper_closed and np.linalg.norm(ee.translation - nxt.ball_position) <= env.grasp_radius:
        nxt.ball_attached = True
        nxt.ball_position = ee.translation.copy()

    nxt.clock = state.clock + dt
    return nxt
