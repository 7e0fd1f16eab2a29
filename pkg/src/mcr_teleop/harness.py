"""Scenario trials: a scripted operator drives the assembled stack end to
end and the run is scored with per-subtask success flags and durations.

The operator is a phase machine that watches telemetry the way a person
watches the robot: it attaches, servos the device toward each goal in the
initial end-effector frame, toggles modes, drags the base with displacement
feedback, and releases and pushes at the cabinet. Device poses pass through
a VioChannel, so tracking noise, drift, and latency shape the run exactly
as they would with a live interface.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import yaml

from .config import StackConfig
from .errors import EmptyInput, InvalidSpec, IoFailure
from .geometry import Pose, quat_conjugate, quat_rotate
from .protocol import Buttons, FrameReader, InterfaceMsg, SessionMode, TelemetryMsg, encode
from .simulator import EnvironmentScript
from .stack import TeleopStack
from .vio import VioChannel, VioPreset

SUBTASK_NAMES = ("grasp-ball", "locomote-to-drawer", "deposit-and-close")
DRAWER_CLOSED = 0.01   # m, joint threshold counting the drawer as shut


@dataclass
class ScenarioSpec:
    """One scripted scenario: ordered subtasks over a fixed scene."""

    name: str
    subtasks: List[str]
    timeout: float                 # s per subtask
    proximity: float               # m, base-to-approach-point success radius
    approach_point: np.ndarray     # (2,) world x, y
    start_base: np.ndarray         # (3,) x, y, yaw
    environment: EnvironmentScript

    def __post_init__(self):
        self.approach_point = np.asarray(self.approach_point, dtype=float).reshape(2)
        self.start_base = np.asarray(self.start_base, dtype=float).reshape(3)
        if not self.subtasks:
            raise InvalidSpec("scenario has no subtasks")
        for name in self.subtasks:
            if name not in SUBTASK_NAMES:
                raise InvalidSpec(f"unknown subtask {name!r}")
        if len(set(self.subtasks)) != len(self.subtasks):
            raise InvalidSpec("subtasks may be attempted at most once per trial")
        if self.timeout <= 0:
            raise InvalidSpec("timeout must be positive")
        if self.proximity <= 0:
            raise InvalidSpec("proximity must be positive")

    @property
    def drawer_distance(self) -> float:
        """Planar distance from the start pose to the closed drawer handle."""
        handle = self.environment.drawer.handle_closed
        return float(np.linalg.norm(handle[:2] - self.start_base[:2]))

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            name=str(d["name"]),
            subtasks=[str(s) for s in d["subtasks"]],
            timeout=float(d["timeout"]),
            proximity=float(d["proximity"]),
            approach_point=np.asarray(d["approach_point"], dtype=float),
            start_base=np.asarray(d["start"]["base"], dtype=float),
            environment=EnvironmentScript.from_dict(d["environment"]),
        )


def load_scenario(path: Optional[str] = None) -> ScenarioSpec:
    """Scenario from a YAML file; the packaged home-care scene by default."""
    if path is None:
        text = resources.files("mcr_teleop.data").joinpath(
            "scenario_homecare.yaml").read_text()
    else:
        with open(path) as f:
            text = f.read()
    return ScenarioSpec.from_dict(yaml.safe_load(text))


@dataclass
class SubtaskResult:
    name: str
    success: bool
    duration: float   # s from subtask start to resolution


@dataclass
class TrialMetrics:
    """Outcome of one trial: flags, durations, and the telemetry log."""

    scenario: str
    source: str
    seed: int
    subtasks: List[SubtaskResult]
    frames: List[TelemetryMsg] = field(default_factory=list, repr=False)

    @property
    def t_c(self) -> float:
        """Completion time: the sum of successful subtask durations."""
        return float(sum(r.duration for r in self.subtasks if r.success))

    @property
    def success_flags(self) -> Dict[str, bool]:
        return {r.name: r.success for r in self.subtasks}

    @property
    def durations(self) -> Dict[str, float]:
        return {r.name: r.duration for r in self.subtasks}

    @property
    def all_succeeded(self) -> bool:
        return all(r.success for r in self.subtasks)


def _subtask_done(name: str, sim, spec: ScenarioSpec) -> bool:
    """Geometric success predicate for one subtask, judged on plant state."""
    if name == "grasp-ball":
        return sim.ball_attached
    if name == "locomote-to-drawer":
        gap = float(np.linalg.norm(sim.body.q_v[:2] - spec.approach_point))
        return gap <= spec.proximity
    if name == "deposit-and-close":
        return sim.drawer_joint < DRAWER_CLOSED
    raise InvalidSpec(f"unknown subtask {name!r}")


# Synthetic-operator tuning: per-sample servo behavior and press hygiene.
SERVO_GAIN = 0.4       # fraction of the remaining EE error taken per sample
SERVO_STEP = 0.02      # m, hand motion cap per sample
SERVO_LEAD_MAX = 0.15  # m, how far the intended target may outrun the EE
REACH_BAND = 0.035     # m, EE-to-goal distance counting as "there"
NEAR_SAMPLES = 3       # consecutive in-band samples before acting
PRESS_SAMPLES = 2      # frames a button stays down
GAP_SAMPLES = 2        # frames of release before the next press may start
GRASP_PATIENCE = 2.0   # s to wait for an attach before reopening
RELEASE_DIST = 0.10    # m, remaining distance at which the drag lets go
ALIGN_BAND = 0.03      # m, handle-centering tolerance before leaning in
PUSH_LEAD = 0.08       # m, push target past the handle, inside its capture
PUSH_PRIORITY = 0.05   # base priority scalar while closing the drawer


class Autopilot:
    """Synthetic operator for the home-care scenario.

    Emits interface frames on the channel's sample grid and advances a
    phase machine once per sample, acting only on what telemetry shows.
    """

    def __init__(self, spec: ScenarioSpec, config: StackConfig,
                 channel: VioChannel):
        self.spec = spec
        self.cfg = config
        self.channel = channel
        self.period = 1.0 / channel.preset.rate
        self.device = np.zeros(3)      # hand translation, ground truth
        self.seq = 0
        self.phase = "attach"
        self.ee_init: Optional[Pose] = None
        self.device_init = np.zeros(3)  # hand position at the detach latch
        self.anchor = np.zeros(3)      # hand position at locomotion entry
        self.arrived = False
        self.released = False
        self._press_left = 0
        self._gap_left = 0
        self._button = 0
        self._near = 0
        self._deadline: Optional[float] = None
        self._next_move = 0.0
        self._staged: List[tuple] = []   # (buttons, priority_base) per sample

    def poll(self, clock: float, telemetry: Optional[TelemetryMsg]) -> Optional[InterfaceMsg]:
        """One plant tick: move the hand when a sample is due, emit when the
        channel delivers the (possibly latency-delayed) estimate."""
        if clock >= self._next_move - 1e-12:
            self._staged.append(self._advance(clock, telemetry))
            self._next_move += self.period
        est = self.channel.observe(clock, Pose(np.array([1.0, 0, 0, 0]),
                                               self.device.copy()))
        if est is None:
            return None
        buttons, priority_base = self._staged.pop(0)
        self.seq += 1
        return InterfaceMsg.from_pose(self.seq, int(round(clock * 1000)), est,
                                      buttons=buttons, priority_base=priority_base)

    # -- press mechanics ---------------------------------------------------

    def _queue_press(self, button: int):
        self._button = int(button)
        self._press_left = PRESS_SAMPLES
        self._gap_left = GAP_SAMPLES

    def _buttons_free(self) -> bool:
        return self._press_left == 0 and self._gap_left == 0

    def _emit_buttons(self) -> int:
        if self._press_left > 0:
            self._press_left -= 1
            return self._button
        if self._gap_left > 0:
            self._gap_left -= 1
        return 0

    # -- servo helpers -----------------------------------------------------

    def _servo(self, goal_world, telemetry: TelemetryMsg) -> float:
        """Nudge the hand so the EE target walks toward the world goal;
        returns the remaining EE distance."""
        alpha = self.cfg.mapper.alpha
        rot = self.ee_init.rotation
        err = np.asarray(goal_world, dtype=float) - telemetry.ee_translation
        step = quat_rotate(quat_conjugate(rot), err) * SERVO_GAIN
        norm = float(np.linalg.norm(step))
        if norm > SERVO_STEP:
            step *= SERVO_STEP / norm
        self.device += step / alpha
        # anti-windup: if the robot stalls (joint limit, contact), stop
        # integrating hand motion it cannot follow, or the accumulated
        # error whips the arm around once it frees up
        intended = self.ee_init.translation + alpha * quat_rotate(
            rot, self.device - self.device_init)
        lead = intended - telemetry.ee_translation
        excess = float(np.linalg.norm(lead)) - SERVO_LEAD_MAX
        if excess > 0:
            unit = lead / (excess + SERVO_LEAD_MAX)
            self.device -= quat_rotate(quat_conjugate(rot), excess * unit) / alpha
        return float(np.linalg.norm(err))

    def _next_task_phase(self, telemetry: TelemetryMsg) -> str:
        """Where the choreography stands, judged from what telemetry shows."""
        if not telemetry.ball_attached and not self.released:
            return "reach"
        if not self.arrived:
            return "to_locomotion"
        if telemetry.ball_attached:
            return "deposit"
        return "align"

    # -- the phase machine -------------------------------------------------

    def _advance(self, clock: float, tm: Optional[TelemetryMsg]) -> tuple:
        # a press queued below starts on the NEXT sample; this keeps the
        # press/gap frame counts exact
        buttons = self._emit_buttons()
        if tm is None:
            return buttons, 1.0

        gap = float(np.linalg.norm(tm.q[:2] - self.spec.approach_point))
        if gap <= 0.6 * self.spec.proximity:
            self.arrived = True

        if tm.mode == SessionMode.SAFETY_STOP:
            if self._buttons_free():
                self._queue_press(Buttons.RESUME)
                self.phase = "attach"
        elif self.phase == "attach":
            if tm.mode == SessionMode.IDLE and self._buttons_free():
                self._queue_press(Buttons.ATTACH_TOGGLE)
                self.phase = "wait_local"
        elif self.phase == "wait_local":
            if tm.mode == SessionMode.ATTACHED_LOCAL and self._buttons_free():
                self._queue_press(Buttons.ATTACH_TOGGLE)
                self.phase = "wait_detached"
        elif self.phase == "wait_detached":
            if tm.mode == SessionMode.DETACHED_MANIPULATION:
                self.ee_init = tm.ee_pose
                self.device_init = self.device.copy()
                self._near = 0
                self.phase = self._next_task_phase(tm)

        elif self.phase == "reach":
            dist = self._servo(tm.ball_position, tm)
            self._near = self._near + 1 if dist < REACH_BAND else 0
            if self._near >= NEAR_SAMPLES and self._buttons_free():
                self._queue_press(Buttons.GRIPPER_TOGGLE)
                self._deadline = clock + GRASP_PATIENCE
                self.phase = "grasp_wait"
        elif self.phase == "grasp_wait":
            if tm.ball_attached:
                self.phase = "to_locomotion"
            elif clock > self._deadline and self._buttons_free():
                self._queue_press(Buttons.GRIPPER_TOGGLE)   # reopen, retry
                self._near = 0
                self.phase = "reach"

        elif self.phase == "to_locomotion":
            if self._buttons_free():
                self._queue_press(Buttons.MODE_TOGGLE)
                self.phase = "wait_locomotion"
        elif self.phase == "wait_locomotion":
            if tm.mode == SessionMode.DETACHED_LOCOMOTION:
                self.anchor = self.device.copy()
                self.phase = "drive"
        elif self.phase == "drive":
            to_goal = self.spec.approach_point - tm.q[:2]
            dist = float(np.linalg.norm(to_goal))
            if dist > RELEASE_DIST:
                limits = self.cfg.mapper.limits
                drag = min(0.45 * dist + 0.06, limits.saturation - 0.02)
                self.device[:2] = self.anchor[:2] + drag * to_goal / dist
            else:
                self.phase = "settle"
        elif self.phase == "settle":
            # cancel whatever displacement the spring still sees (locked
            # axis or not), then wait for the lock to let go of a stopped base
            k = self.cfg.mapper.stiffness.k[:2]
            pull = tm.wrench[:2]
            if np.any(pull):
                self.device[:2] -= pull / k
            speed = self.cfg.mapper.limits.commensurate_speed(tm.qd[:3])
            if (tm.lock_axis is None and not np.any(tm.wrench)
                    and speed < self.cfg.mapper.limits.stop_linear
                    and self._buttons_free()):
                self._queue_press(Buttons.MODE_TOGGLE)
                self.phase = "wait_detached"

        elif self.phase == "deposit":
            # hover above the open drawer: a hand-width past the handle on
            # its opening side, a hand-width up
            drawer = self.spec.environment.drawer
            goal = (drawer.handle_position(tm.drawer_joint)
                    + 0.10 * drawer.axis + np.array([0.0, 0.0, 0.10]))
            dist = self._servo(goal, tm)
            self._near = self._near + 1 if dist < 0.05 else 0
            if self._near >= NEAR_SAMPLES and self._buttons_free():
                self._queue_press(Buttons.GRIPPER_TOGGLE)   # let the ball go
                self.phase = "release_wait"
        elif self.phase == "release_wait":
            if not tm.ball_attached:
                self.released = True
                self._near = 0
                self.phase = "align"
        elif self.phase == "align":
            # center the hand on the handle first: entering its capture
            # ball off-axis risks dropping back out mid-push
            drawer = self.spec.environment.drawer
            dist = self._servo(drawer.handle_position(tm.drawer_joint), tm)
            self._near = self._near + 1 if dist < ALIGN_BAND else 0
            if self._near >= NEAR_SAMPLES:
                self.phase = "push"
        elif self.phase == "push":
            drawer = self.spec.environment.drawer
            goal = drawer.handle_position(tm.drawer_joint) - PUSH_LEAD * drawer.axis
            self._servo(goal, tm)
            if tm.drawer_joint < 0.8 * DRAWER_CLOSED:
                self.phase = "done"

        priority_base = PUSH_PRIORITY if self.phase == "push" else 1.0
        return buttons, priority_base


class ReplaySource:
    """Plays back a recorded interface stream (concatenated wire frames),
    each frame submitted once the clock passes its timestamp."""

    def __init__(self, path: str):
        try:
            raw = Path(path).read_bytes()
        except OSError as e:
            raise IoFailure(f"cannot read recorded stream {path}: {e}") from e
        self._frames = [m for m in FrameReader().feed(raw)
                        if isinstance(m, InterfaceMsg)]
        self._cursor = 0

    def poll(self, clock: float, telemetry=None) -> Optional[InterfaceMsg]:
        latest = None
        while (self._cursor < len(self._frames)
               and self._frames[self._cursor].timestamp_ms / 1000.0 <= clock + 1e-9):
            latest = self._frames[self._cursor]
            self._cursor += 1
        return latest


def _make_source(source, spec: ScenarioSpec, config: StackConfig, seed: int,
                 preset: Optional[VioPreset], replay_path: Optional[str]):
    if not isinstance(source, str):
        return source, getattr(source, "name", type(source).__name__)
    if source == "autopilot":
        channel = VioChannel(preset or VioPreset.ideal(config.source_rate), seed)
        return Autopilot(spec, config, channel), "autopilot"
    if source == "replay":
        if replay_path is None:
            raise InvalidSpec("replay source needs the recorded stream path")
        return ReplaySource(replay_path), "replay"
    if source == "live":
        from .server import LiveSource
        return LiveSource(config.network), "live"
    raise InvalidSpec(f"unknown input source {source!r}")


def run_trial(spec: ScenarioSpec, source: Union[str, object] = "autopilot",
              config: Optional[StackConfig] = None, seed: int = 0,
              preset: Optional[VioPreset] = None,
              replay_path: Optional[str] = None,
              record_to: Optional[str] = None) -> TrialMetrics:
    """One full trial: drive the stack with the chosen input source and
    judge each subtask in order against its geometric predicate.

    A subtask that outlasts the scenario timeout is marked failed and the
    trial moves on. Scripted and recorded sources make the whole run a
    pure function of (spec, source, config, seed).
    """
    config = config or StackConfig.default()
    stack = TeleopStack(config, spec.environment, seed=seed)
    stack.sim.body.q_v[:] = spec.start_base

    source_obj, source_name = _make_source(source, spec, config, seed,
                                           preset, replay_path)
    recorder = None
    if record_to is not None:
        try:
            recorder = open(record_to, "wb")
        except OSError as e:
            raise IoFailure(f"cannot record stream to {record_to}: {e}") from e

    results = []
    frames = []
    telemetry = None
    pending = list(spec.subtasks)
    started = 0.0
    try:
        while pending:
            msg = source_obj.poll(stack.clock, telemetry)
            if msg is not None:
                if recorder is not None:
                    recorder.write(encode(msg))
                stack.submit(msg)
            frame = stack.step()
            if frame is not None:
                frames.append(frame)
                telemetry = frame
            now = stack.clock
            if _subtask_done(pending[0], stack.sim, spec):
                results.append(SubtaskResult(pending.pop(0), True, now - started))
                started = now
            elif now - started > spec.timeout:
                results.append(SubtaskResult(pending.pop(0), False, now - started))
                started = now
    finally:
        if recorder is not None:
            recorder.close()
        if isinstance(source, str) and hasattr(source_obj, "close"):
            source_obj.close()   # sources built here own their sockets
    return TrialMetrics(scenario=spec.name, source=source_name, seed=seed,
                        subtasks=results, frames=frames)


def success_rate(trials: Sequence[TrialMetrics]) -> float:
    """Successful subtasks over attempted subtasks, across all trials."""
    attempted = sum(len(t.subtasks) for t in trials)
    if attempted == 0:
        raise EmptyInput("no attempted subtasks to aggregate")
    succeeded = sum(r.success for t in trials for r in t.subtasks)
    return succeeded / attempted


def _lower_median(values: Sequence[float]) -> Optional[float]:
    """Median with the lower of the two middle elements on even counts."""
    if not values:
        return None
    ranked = sorted(values)
    return float(ranked[(len(ranked) - 1) // 2])


_CSV_HEADER = (["clock", "mode", "lock_axis"]
               + [f"q_{i}" for i in range(10)]
               + ["ee_x", "ee_y", "ee_z", "drawer_joint",
                  "ball_x", "ball_y", "ball_z",
                  "gripper_closed", "ball_attached", "limit_flag", "contact_active"]
               + [f"wrench_{i}" for i in range(6)])


def _trial_rows(trial: TrialMetrics):
    for f in trial.frames:
        yield ([f"{f.clock:.6f}", f.mode.name, f.lock_axis or ""]
               + [repr(float(v)) for v in f.q]
               + [repr(float(v)) for v in f.ee_translation]
               + [repr(float(f.drawer_joint))]
               + [repr(float(v)) for v in f.ball_position]
               + [int(f.gripper_closed), int(f.ball_attached),
                  int(f.limit_flag), int(f.contact_active)]
               + [repr(float(v)) for v in f.wrench])


def export_report(trials: Sequence[TrialMetrics], out_dir) -> Dict[str, str]:
    """Write one CSV time series per trial plus a JSON aggregate.

    Returns the written paths keyed by logical name ("report", "trial_000",
    ...). Median T_c is taken over fully successful trials, lower-median
    convention; per-subtask medians cover successful attempts only.
    """
    if not trials:
        raise EmptyInput("no trials to report")
    out = Path(out_dir)
    paths = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i, trial in enumerate(trials):
            name = f"trial_{i:03d}"
            path = out / f"{name}.csv"
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(_CSV_HEADER)
                writer.writerows(_trial_rows(trial))
            paths[name] = str(path)

        subtask_stats = {}
        for name in trials[0].success_flags:
            attempts = [t for t in trials if name in t.success_flags]
            wins = [t.durations[name] for t in attempts if t.success_flags[name]]
            subtask_stats[name] = {
                "attempts": len(attempts),
                "successes": len(wins),
                "median_duration": _lower_median(wins),
            }
        report = {
            "scenario": trials[0].scenario,
            "source": trials[0].source,
            "trials": len(trials),
            "success_rate": success_rate(trials),
            "median_t_c": _lower_median([t.t_c for t in trials if t.all_succeeded]),
            "subtasks": subtask_stats,
            "per_trial": [
                {"seed": t.seed, "t_c": t.t_c, "success": t.success_flags,
                 "durations": t.durations}
                for t in trials
            ],
        }
        report_path = out / "report.json"
        with open(report_path, "w") as f:
            json.dump(report, f, indent=2)
        paths["report"] = str(report_path)
    except OSError as e:
        raise IoFailure(f"cannot write report under {out}: {e}") from e
    return paths
