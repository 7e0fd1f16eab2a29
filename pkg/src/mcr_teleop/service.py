"""Session state machine between the handheld interface and the robot stack.

The machine consumes at most one fresh InterfaceMsg per control tick
(latest-value semantics; duplicate or out-of-order sequence numbers are
dropped) and produces the latched frames and settings the teleoperation
mappers need. Safety rules:

  * more than `staleness_budget` seconds without a fresh message while in
    a detached mode forces SafetyStop,
  * the emergency-stop button forces SafetyStop from any state,
  * SafetyStop is absorbing: only an explicit resume leaves it (to Idle),
    and no motion command is emitted while inside.

Entering either detached mode latches the current interface pose and the
current end-effector pose as the zero references for the mappers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .geometry import Pose
from .protocol import Buttons, InterfaceMsg, SessionMode

logger = logging.getLogger(__name__)

DETACHED_MODES = (SessionMode.DETACHED_MANIPULATION, SessionMode.DETACHED_LOCOMOTION)


@dataclass
class SessionConfig:
    staleness_budget: float = 0.2  # s

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        return cls(staleness_budget=float(d.get("staleness_budget", 0.2)))


@dataclass
class SessionState:
    mode: SessionMode = SessionMode.IDLE
    v_initial: Optional[Pose] = None     # interface pose latched at mode entry
    ee_initial: Optional[Pose] = None    # EE world pose latched at mode entry
    v_now: Optional[Pose] = None         # newest consumed interface pose
    last_seq: Optional[int] = None
    last_msg_clock: Optional[float] = None
    prev_buttons: int = 0
    gripper_closed: bool = False
    priority_arm: float = 1.0
    priority_base: float = 1.0
    impedance_scale: float = 1.0

    @classmethod
    def initial(cls) -> "SessionState":
        return cls()


@dataclass
class SessionCommand:
    """Per-tick instructions for the control stack."""

    mode: SessionMode
    motion_enabled: bool
    v_initial: Optional[Pose] = None
    ee_initial: Optional[Pose] = None
    v_now: Optional[Pose] = None
    gripper_closed: bool = False
    priority_arm: float = 1.0
    priority_base: float = 1.0
    impedance_scale: float = 1.0
    mode_changed: bool = False


def _rising(prev: int, now: int, bit: Buttons) -> bool:
    return bool(now & bit) and not bool(prev & bit)


def _enter_detached(state: SessionState, mode: SessionMode,
                    ee_pose: Pose) -> SessionState:
    if state.v_now is None:
        logger.info("ignoring transition to %s with no interface pose yet", mode.name)
        return state
    return replace(state, mode=mode, v_initial=state.v_now.copy(),
                   ee_initial=ee_pose.copy())


def session_step(state: SessionState, msg: Optional[InterfaceMsg], clock: float,
                 ee_pose: Pose,
                 config: Optional[SessionConfig] = None) -> Tuple[SessionState, SessionCommand]:
    """Advance the machine one control tick.

    msg is the newest frame received since the last tick, or None. ee_pose
    is the robot's current end-effector world pose, used for latching.
    """
    config = config or SessionConfig()
    prev_mode = state.mode

    if msg is not None:
        if state.last_seq is not None and msg.seq <= state.last_seq:
            logger.debug("dropping stale seq %d (last %d)", msg.seq, state.last_seq)
            msg = None

    if msg is not None:
        buttons = int(msg.buttons)
        state = replace(
            state,
            v_now=msg.pose,
            last_seq=msg.seq,
            last_msg_clock=clock,
            priority_arm=msg.priority_arm,
            priority_base=msg.priority_base,
            impedance_scale=msg.impedance_scale,
        )
        if (state.mode != SessionMode.SAFETY_STOP
                and _rising(state.prev_buttons, buttons, Buttons.GRIPPER_TOGGLE)):
            state = replace(state, gripper_closed=not state.gripper_closed)

        if buttons & Buttons.ESTOP and state.mode != SessionMode.SAFETY_STOP:
            logger.info("emergency stop requested")
            state = replace(state, mode=SessionMode.SAFETY_STOP)
        elif state.mode == SessionMode.SAFETY_STOP:
            if _rising(state.prev_buttons, buttons, Buttons.RESUME):
                logger.info("resuming from safety stop")
                state = replace(state, mode=SessionMode.IDLE,
                                v_initial=None, ee_initial=None)
        elif _rising(state.prev_buttons, buttons, Buttons.ATTACH_TOGGLE):
            if state.mode == SessionMode.IDLE:
                state = replace(state, mode=SessionMode.ATTACHED_LOCAL)
            elif state.mode == SessionMode.ATTACHED_LOCAL:
                state = _enter_detached(state, SessionMode.DETACHED_MANIPULATION, ee_pose)
            else:
                state = replace(state, mode=SessionMode.ATTACHED_LOCAL,
                                v_initial=None, ee_initial=None)
        elif _rising(state.prev_buttons, buttons, Buttons.MODE_TOGGLE):
            if state.mode == SessionMode.DETACHED_MANIPULATION:
                state = _enter_detached(state, SessionMode.DETACHED_LOCOMOTION, ee_pose)
            elif state.mode == SessionMode.DETACHED_LOCOMOTION:
                state = _enter_detached(state, SessionMode.DETACHED_MANIPULATION, ee_pose)
            else:
                logger.info("mode toggle ignored in %s", state.mode.name)
        state = replace(state, prev_buttons=buttons)

    if state.mode in DETACHED_MODES:
        silent_for = (clock - state.last_msg_clock
                      if state.last_msg_clock is not None else float("inf"))
        if silent_for > config.staleness_budget:
            logger.warning("interface stream stale for %.3f s, stopping", silent_for)
            state = replace(state, mode=SessionMode.SAFETY_STOP)

    motion = state.mode in DETACHED_MODES
    command = SessionCommand(
        mode=state.mode,
        motion_enabled=motion,
        v_initial=state.v_initial if motion else None,
        ee_initial=state.ee_initial if motion else None,
        v_now=state.v_now if motion else None,
        gripper_closed=state.gripper_closed,
        priority_arm=state.priority_arm,
        priority_base=state.priority_base,
        impedance_scale=state.impedance_scale,
        mode_changed=state.mode != prev_mode,
    )
    return state, command
