"""The assembled control stack: session machine, mappers, controller, plant.

One TeleopStack owns everything a single robot needs. Callers push
InterfaceMsg frames into a single-slot mailbox (latest received wins) and
advance the plant tick by tick; the session machine and controller run on
every control tick, telemetry frames come back at a fixed divisor of the
control rate. There is no randomness anywhere in the loop: identical frame
schedules give bitwise-identical telemetry.

Per-mode behavior on a control tick:

  * Detached-Manipulation: the latched interface delta becomes an EE pose
    target tracked by the whole-body impedance controller; interface
    priority scalars multiply the mode's configured weights.
  * Detached-Locomotion: the interface displacement becomes a virtual
    wrench (dead zone, saturation, single-axis lock) that drives the base
    admittance integrator; arm joints are commanded to hold.
  * everything else: zero commands, the plant coasts to rest through its
    velocity lag.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .config import StackConfig
from .control import ControllerOutput, PriorityWeights, controller_step
from .geometry import Pose, Wrench
from .kinematics import whole_body_fk
from .protocol import InterfaceMsg, SessionMode, TelemetryMsg
from .service import SessionState, session_step
from .simulator import EnvironmentScript, SimState, admittance_step, plant_step
from .teleop import AxisLockState, locomotion_command, manipulation_reference


def _hold() -> ControllerOutput:
    return ControllerOutput(tau_v=np.zeros(3), tau_r=np.zeros(7),
                            qd_command=np.zeros(10), ee_wrench=Wrench.zero())


class TeleopStack:
    """Fixed-timestep whole-body teleoperation loop around one plant."""

    def __init__(self, config: StackConfig, env: Optional[EnvironmentScript] = None,
                 seed: int = 0):
        self.config = config
        self.env = env if env is not None else EnvironmentScript()
        self.sim = SimState.initial(self.env, config.arm, seed=seed)
        self.session = SessionState.initial()
        self.lock = AxisLockState()
        self._mailbox: Optional[InterfaceMsg] = None
        self._out = _hold()
        self._wrench = Wrench.zero()   # axis-projected, drives the admittance
        self._pull = Wrench.zero()     # engaged spring wrench, pre-projection
        self._locomotion = False
        self._tick = 0          # plant ticks advanced so far
        self._control_count = 0

    @property
    def clock(self) -> float:
        return self.sim.clock

    @property
    def mode(self) -> SessionMode:
        return self.session.mode

    def ee_pose(self) -> Pose:
        return whole_body_fk(self.sim.body, self.config.arm)

    def submit(self, msg: InterfaceMsg):
        """Deliver one interface frame; only the last one before a control
        tick is consumed (latest-value mailbox)."""
        self._mailbox = msg

    def step(self) -> Optional[TelemetryMsg]:
        """Advance the plant by one tick; returns a telemetry frame on
        telemetry ticks, None otherwise."""
        cfg = self.config
        rates = cfg.rates
        frame = None
        if self._tick % rates.control_divisor == 0:
            control_index = self._control_count
            self._control_count += 1
            self._control_tick()
            if control_index % rates.telemetry_divisor == 0:
                frame = self._telemetry()

        override = None
        if self._locomotion:
            override = admittance_step(self._wrench, self.sim.body.qd_v,
                                       cfg.dynamics.base_inertia,
                                       cfg.dynamics.base_damping,
                                       rates.plant_dt)
        self.sim = plant_step(self.sim, self._out, self.env, rates.plant_dt,
                              cfg.arm, base_twist_override=override,
                              arm_lag=rates.arm_lag)
        self._tick += 1
        return frame

    def run(self, duration: float) -> List[TelemetryMsg]:
        """Advance by `duration` seconds, collecting telemetry frames."""
        frames = []
        for _ in range(round(duration * self.config.rates.plant_rate)):
            frame = self.step()
            if frame is not None:
                frames.append(frame)
        return frames

    def _control_tick(self):
        cfg = self.config
        msg, self._mailbox = self._mailbox, None
        ee_actual = whole_body_fk(self.sim.body, cfg.arm)
        self.session, cmd = session_step(self.session, msg, self.sim.clock,
                                         ee_actual, cfg.session)
        if cmd.mode_changed:
            self.lock = AxisLockState()
            self._wrench = Wrench.zero()
            self._pull = Wrench.zero()
        self.sim.gripper_closed = cmd.gripper_closed

        self._out = _hold()
        self._locomotion = False
        if not cmd.motion_enabled:
            self._wrench = Wrench.zero()
            self._pull = Wrench.zero()
            return

        if cmd.mode is SessionMode.DETACHED_MANIPULATION:
            target = manipulation_reference(cmd.v_initial, cmd.v_now,
                                            cmd.ee_initial, cfg.mapper.alpha)
            weights = PriorityWeights(
                eta_arm=cfg.manipulation_weights.eta_arm * cmd.priority_arm,
                eta_base=cfg.manipulation_weights.eta_base * cmd.priority_base,
            )
            self._out = controller_step(
                self.sim.body, target, weights, cfg.dynamics, cfg.arm,
                cfg.impedance.scaled(cmd.impedance_scale),
                cfg.rates.control_dt, params=cfg.control, ee_actual=ee_actual)
            self._wrench = Wrench.zero()
            self._pull = Wrench.zero()
        else:  # Detached-Locomotion
            self._wrench, self.lock, self._pull = locomotion_command(
                cmd.v_initial, cmd.v_now, self.sim.body.qd_v, self.lock,
                cfg.mapper)
            self._locomotion = True

    def _telemetry(self) -> TelemetryMsg:
        body = self.sim.body
        ee = whole_body_fk(body, self.config.arm)
        if self._locomotion:
            # the pre-projection pull: clients recover the commanded wrench
            # by projecting onto lock_axis, but not the other way around
            wrench = self._pull.as_vector()
        else:
            wrench = self._out.ee_wrench.as_vector()
        return TelemetryMsg(
            clock=self.sim.clock,
            q=body.q,
            qd=body.qd,
            ee_rotation=ee.rotation.copy(),
            ee_translation=ee.translation.copy(),
            mode=self.session.mode,
            lock_axis=self.lock.axis if self._locomotion else None,
            gripper_closed=self.sim.gripper_closed,
            limit_flag=self.sim.limit_flag,
            ball_attached=self.sim.ball_attached,
            contact_active=bool(np.any(self.sim.contact.force)),
            wrench=wrench,
            ball_position=self.sim.ball_position.copy(),
            drawer_joint=self.sim.drawer_joint,
            last_seq=self.session.last_seq or 0,
        )
