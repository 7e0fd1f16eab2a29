"""Assembled stack tests: rates, per-mode behavior, safety, determinism.

A ScriptedSource plays the role of the handheld interface: it emits frames
at a fixed rate from a (time -> pose, buttons) script, so every test drives
the stack exactly the way the network path would. Button press windows are
50 ms wide (longer than the 30 Hz frame period) so every press catches at
least one frame regardless of how the sample grid falls.
"""

import numpy as np
import pytest

from mcr_teleop.config import StackConfig
from mcr_teleop.geometry import Pose, quat_rotate
from mcr_teleop.protocol import Buttons, InterfaceMsg, SessionMode, encode
from mcr_teleop.simulator import EnvironmentScript
from mcr_teleop.stack import TeleopStack

CONFIG = StackConfig.default()

IDENTITY_Q = (1.0, 0.0, 0.0, 0.0)
PRESS = 0.05   # button window, s


class ScriptedSource:
    """Emits InterfaceMsg frames at `rate` Hz from a script callback.

    script(t) returns (translation, rotation, buttons); poses are the
    virtual device pose in its own arbitrary world frame.
    """

    def __init__(self, script, rate=30.0, start=0.0):
        self.script = script
        self.period = 1.0 / rate
        self.seq = 0
        self.next_t = start

    def poll(self, now):
        """Newest frame due at `now`, or None."""
        frame = None
        while now >= self.next_t - 1e-12:
            translation, rotation, buttons = self.script(self.next_t)
            self.seq += 1
            frame = InterfaceMsg(
                seq=self.seq, timestamp_ms=int(self.next_t * 1000),
                rotation=np.asarray(rotation, dtype=float),
                translation=np.asarray(translation, dtype=float),
                buttons=int(buttons))
            self.next_t += self.period
        return frame


def attach_script(mode_toggle_at=None, motion=None, gripper_at=None):
    """Script builder: two attach presses reach Detached-Manipulation,
    optional mode toggle and gripper press, then follow `motion(t)` for
    the device translation."""
    def script(t):
        buttons = 0
        if 0.03 <= t < 0.03 + PRESS or 0.15 <= t < 0.15 + PRESS:
            buttons = Buttons.ATTACH_TOGGLE
        if mode_toggle_at is not None and mode_toggle_at <= t < mode_toggle_at + PRESS:
            buttons = Buttons.MODE_TOGGLE
        if gripper_at is not None and gripper_at <= t < gripper_at + PRESS:
            buttons = Buttons.GRIPPER_TOGGLE
        translation = (0.0, 0.0, 0.0)
        if motion is not None:
            translation = motion(t)
        return translation, IDENTITY_Q, buttons
    return script


def run_stack(stack, source, duration):
    frames = []
    steps = round(duration * stack.config.rates.plant_rate)
    for _ in range(steps):
        msg = source.poll(stack.clock)
        if msg is not None:
            stack.submit(msg)
        frame = stack.step()
        if frame is not None:
            frames.append(frame)
    return frames


def step_motion(offset, at=0.4):
    def motion(t):
        return offset if t >= at else (0.0, 0.0, 0.0)
    return motion


class TestRates:
    def test_one_second_yields_exact_tick_and_frame_counts(self):
        stack = TeleopStack(CONFIG)
        frames = stack.run(1.0)
        assert stack._tick == 500
        assert len(frames) == 50
        assert stack.clock == pytest.approx(1.0, abs=1e-9)

    def test_telemetry_clocks_are_the_divisor_grid(self):
        stack = TeleopStack(CONFIG)
        frames = stack.run(0.1)
        np.testing.assert_allclose([f.clock for f in frames],
                                   [0.0, 0.02, 0.04, 0.06, 0.08], atol=1e-12)

    def test_idle_stack_never_moves(self):
        stack = TeleopStack(CONFIG)
        frames = stack.run(0.5)
        assert all(f.mode == SessionMode.IDLE for f in frames)
        assert all(not np.any(f.qd) for f in frames)
        np.testing.assert_array_equal(stack.sim.body.q_v, np.zeros(3))


class TestManipulation:
    def test_device_push_moves_ee_toward_target(self):
        offset = np.array([0.04, 0.0, 0.02])
        stack = TeleopStack(CONFIG)
        start = stack.ee_pose()
        run_stack(stack, ScriptedSource(attach_script(motion=step_motion(offset))), 4.0)
        assert stack.mode == SessionMode.DETACHED_MANIPULATION
        # the device delta is expressed in the latched EE frame
        expected = quat_rotate(start.rotation, CONFIG.mapper.alpha * offset)
        moved = stack.ee_pose().translation - start.translation
        np.testing.assert_allclose(moved, expected, atol=5e-4)

    def test_base_stays_nearly_still_while_arm_tracks(self):
        stack = TeleopStack(CONFIG)
        run_stack(stack, ScriptedSource(
            attach_script(motion=step_motion((0.05, 0.0, 0.0)))), 4.0)
        assert stack.mode == SessionMode.DETACHED_MANIPULATION
        # manipulation weights penalize the base 10:1, so its share of the
        # 5 cm reach stays small
        assert np.linalg.norm(stack.sim.body.q_v[:2]) < 0.005

    def test_tracking_error_decays_after_step(self):
        offset = np.array([0.05, 0.0, 0.0])
        stack = TeleopStack(CONFIG)
        source = ScriptedSource(attach_script(motion=step_motion(offset)))
        run_stack(stack, source, 0.5)
        latched = stack.session.ee_initial
        target = latched.translation + quat_rotate(latched.rotation, offset)
        err_early = np.linalg.norm(stack.ee_pose().translation - target)
        run_stack(stack, source, 3.0)
        err_late = np.linalg.norm(stack.ee_pose().translation - target)
        assert err_late < err_early / 10


class TestLocomotion:
    @staticmethod
    def locomotion_stack(motion, duration=3.0):
        script = attach_script(mode_toggle_at=0.3, motion=motion)
        stack = TeleopStack(CONFIG)
        frames = run_stack(stack, ScriptedSource(script), duration)
        return stack, frames

    def test_forward_drag_drives_base_forward(self):
        stack, frames = self.locomotion_stack(step_motion((0.2, 0.0, 0.0)))
        assert stack.mode == SessionMode.DETACHED_LOCOMOTION
        assert stack.sim.body.q_v[0] > 0.05
        assert abs(stack.sim.body.q_v[1]) < 1e-9
        locked = [f.lock_axis for f in frames if f.lock_axis]
        assert set(locked) == {"x"}

    def test_drag_inside_dead_zone_produces_no_motion(self):
        stack, _ = self.locomotion_stack(step_motion((0.04, 0.0, 0.0)))
        assert stack.mode == SessionMode.DETACHED_LOCOMOTION
        np.testing.assert_array_equal(stack.sim.body.q_v, np.zeros(3))

    def test_lock_suppresses_cross_axis_motion(self):
        def motion(t):
            if t < 0.4:
                return (0.0, 0.0, 0.0)
            if t < 1.5:
                return (0.2, 0.0, 0.0)
            return (0.2, 0.25, 0.0)   # adds y while x holds the lock

        stack, _ = self.locomotion_stack(motion)
        assert stack.sim.body.q_v[0] > 0.05
        assert abs(stack.sim.body.q_v[1]) < 1e-9

    def test_release_requires_stop_and_disengage(self):
        def motion(t):
            return (0.2, 0.0, 0.0) if 0.4 <= t < 1.5 else (0.0, 0.0, 0.0)

        stack, _ = self.locomotion_stack(motion, duration=4.0)
        # device went home: wrench released, base coasted to a stop and the
        # lock let go
        assert stack.lock.axis is None
        assert np.linalg.norm(stack.sim.body.qd_v) < CONFIG.mapper.limits.stop_linear

    def test_mode_toggle_resets_lock(self):
        base = attach_script(mode_toggle_at=0.3,
                             motion=step_motion((0.2, 0.0, 0.0)))

        def script(t):
            translation, rotation, buttons = base(t)
            if 2.0 <= t < 2.0 + PRESS:
                buttons = Buttons.MODE_TOGGLE
            return translation, rotation, buttons

        stack = TeleopStack(CONFIG)
        run_stack(stack, ScriptedSource(script), 2.3)
        assert stack.mode == SessionMode.DETACHED_MANIPULATION
        assert stack.lock.axis is None


class TestSafety:
    def test_silence_in_detached_mode_forces_safety_stop(self):
        stack = TeleopStack(CONFIG)
        run_stack(stack, ScriptedSource(attach_script()), 1.0)
        assert stack.mode == SessionMode.DETACHED_MANIPULATION
        stack.run(0.3)   # no frames for 300 ms
        assert stack.mode == SessionMode.SAFETY_STOP

    def test_stopped_robot_coasts_to_rest(self):
        stack, _ = TestLocomotion.locomotion_stack(
            step_motion((0.2, 0.0, 0.0)), duration=2.0)
        assert np.linalg.norm(stack.sim.body.qd_v) > 0.05
        stack.run(1.0)   # silence: SafetyStop, then damping brings rest
        assert stack.mode == SessionMode.SAFETY_STOP
        assert np.linalg.norm(stack.sim.body.qd_v) < 1e-3
        assert np.linalg.norm(stack.sim.body.qd_r) < 1e-3

    def test_resume_returns_to_idle_and_holds(self):
        stack = TeleopStack(CONFIG)
        source = ScriptedSource(attach_script())
        run_stack(stack, source, 1.0)
        stack.run(0.3)
        assert stack.mode == SessionMode.SAFETY_STOP

        resume_at = stack.clock

        def resume_script(t):
            buttons = Buttons.RESUME if t < resume_at + PRESS else 0
            return (0.0, 0.0, 0.0), IDENTITY_Q, buttons

        follow_on = ScriptedSource(resume_script, start=resume_at)
        follow_on.seq = source.seq   # same session counter keeps increasing
        run_stack(stack, follow_on, 0.3)
        assert stack.mode == SessionMode.IDLE
        assert not np.any(stack.sim.body.qd)


class TestGripperAndScene:
    @staticmethod
    def stack_with_ball_at_ee():
        env = EnvironmentScript()
        stack = TeleopStack(CONFIG, env=env)
        env.ball_position = stack.ee_pose().translation.copy()
        stack.sim.ball_position = env.ball_position.copy()
        return stack

    def test_gripper_toggle_grasps_reachable_ball(self):
        stack = self.stack_with_ball_at_ee()
        frames = run_stack(
            stack, ScriptedSource(attach_script(gripper_at=0.3)), 0.6)
        assert stack.sim.gripper_closed
        assert stack.sim.ball_attached
        assert frames[-1].ball_attached
        assert frames[-1].gripper_closed

    def test_attached_ball_follows_ee(self):
        stack = self.stack_with_ball_at_ee()
        script = attach_script(gripper_at=0.3,
                               motion=step_motion((0.0, 0.06, 0.0), at=0.6))
        run_stack(stack, ScriptedSource(script), 3.0)
        assert stack.sim.ball_attached
        np.testing.assert_allclose(stack.sim.ball_position,
                                   stack.ee_pose().translation, atol=1e-12)


class TestDeterminism:
    def test_identical_schedules_give_identical_telemetry_bytes(self):
        def run_once():
            script = attach_script(mode_toggle_at=0.3,
                                   motion=step_motion((0.12, 0.0, 0.0)))
            stack = TeleopStack(CONFIG)
            frames = run_stack(stack, ScriptedSource(script), 2.0)
            return b"".join(encode(f) for f in frames)

        assert run_once() == run_once()
