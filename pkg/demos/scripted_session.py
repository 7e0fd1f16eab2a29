"""A narrated teleoperation session against the simulated robot.

Runs the full stack (interface frames -> session machine -> mappers ->
whole-body controller -> plant) with a scripted handheld device: attach,
nudge the arm, switch to locomotion, drive forward, stop, and let the
staleness watchdog trip. Prints the telemetry story as it unfolds.

    python3 demos/scripted_session.py
"""

import numpy as np

from mcr_teleop.config import StackConfig
from mcr_teleop.protocol import Buttons, InterfaceMsg, SessionMode
from mcr_teleop.stack import TeleopStack

PRESS = 0.05          # button hold, s (wider than one 30 Hz frame)
FRAME_PERIOD = 1.0 / 30.0
IDENTITY_Q = (1.0, 0.0, 0.0, 0.0)


def script(t):
    """The whole session as a time -> (translation, rotation, buttons) plan."""
    buttons = 0
    translation = (0.0, 0.0, 0.0)
    if 0.10 <= t < 0.10 + PRESS:
        buttons = Buttons.ATTACH_TOGGLE          # clutch in
    elif 0.30 <= t < 0.30 + PRESS:
        buttons = Buttons.ATTACH_TOGGLE          # release: detached manipulation
    elif 2.60 <= t < 2.60 + PRESS:
        buttons = Buttons.MODE_TOGGLE            # manipulation -> locomotion

    if 0.5 <= t < 2.5:
        ramp = min((t - 0.5) / 1.0, 1.0)
        # deltas map along the tool's own axes; its z points straight
        # down at home, so pushing the device up drives the hand down
        translation = (0.0, 0.0, 0.08 * ramp)
    elif 3.0 <= t < 6.0:
        translation = (0.20, 0.0, 0.0)           # lean forward: drive +x
    # after 6.0 s the device goes home; after 8.0 s it goes silent
    return translation, IDENTITY_Q, buttons


def main():
    stack = TeleopStack(StackConfig.default())
    seq, next_t = 0, 0.0
    last_mode = None
    print("t      mode                    ee z      base x    base speed")
    for _ in range(int(9.0 * stack.config.rates.plant_rate)):
        if stack.clock < 8.0:   # the final second is radio silence
            while stack.clock >= next_t - 1e-12:
                translation, rotation, buttons = script(next_t)
                seq += 1
                stack.submit(InterfaceMsg(
                    seq=seq, timestamp_ms=int(next_t * 1000),
                    rotation=np.asarray(rotation, dtype=float),
                    translation=np.asarray(translation, dtype=float),
                    buttons=int(buttons)))
                next_t += FRAME_PERIOD
        frame = stack.step()
        if frame is None:
            continue
        if stack.mode != last_mode:
            print(f"--- {stack.mode.name}")
            last_mode = stack.mode
        if round(frame.clock * 50) % 25 == 0:   # one line every 0.5 s
            speed = float(np.linalg.norm(frame.qd[:2]))
            print(f"{frame.clock:5.2f}  {frame.mode.name:22s}  "
                  f"{frame.ee_translation[2]:7.3f}  {frame.q[0]:8.3f}  "
                  f"{speed:8.3f}")

    assert stack.mode == SessionMode.SAFETY_STOP
    print("\nthe watchdog caught the silence: the robot is parked in "
          "SafetyStop with the base at rest "
          f"(|qd| = {np.linalg.norm(stack.sim.body.qd_v):.4f} m/s)")


if __name__ == "__main__":
    main()
