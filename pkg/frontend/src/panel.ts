/**
 * Control panel model: the mode, gripper, attach, resume and stop
 * buttons plus the priority and impedance sliders.
 *
 * Buttons only queue edges on the device; the panel's displayed state
 * comes exclusively from acknowledged telemetry, so it can never show a
 * mode or gripper state the service has not confirmed. Sliders are
 * write-only commands (telemetry does not echo them) and display their
 * commanded value directly.
 */

import { VirtualDevice } from "./device.js";
import {
  Buttons,
  LockAxis,
  SESSION_MODE_NAMES,
  SessionMode,
  TelemetryMsg,
} from "./protocol.js";

const PRIORITY_MIN = 1e-6;

export class ControlPanel {
  private device: VirtualDevice;

  /** null until the first telemetry acknowledgement arrives */
  mode: SessionMode | null = null;
  gripperClosed = false;
  lockAxis: LockAxis = null;
  limitFlag = false;
  ballAttached = false;
  contactActive = false;
  clock = 0;
  lastSeq = 0;
  acknowledged = 0;

  constructor(device: VirtualDevice) {
    this.device = device;
  }

  pressMode(): void {
    this.device.press(Buttons.ModeToggle);
  }

  pressGripper(): void {
    this.device.press(Buttons.GripperToggle);
  }

  pressAttach(): void {
    this.device.press(Buttons.AttachToggle);
  }

  pressResume(): void {
    this.device.press(Buttons.Resume);
  }

  pressEstop(): void {
    this.device.pressEstop();
  }

  setPriorityArm(value: number): void {
    this.device.priorityArm = clampPriority(value);
  }

  setPriorityBase(value: number): void {
    this.device.priorityBase = clampPriority(value);
  }

  setImpedanceScale(value: number): void {
    this.device.impedanceScale = Number.isFinite(value) && value > 0 ? value : 0;
  }

  /** Fold one acknowledged telemetry frame into the displayed state. */
  acknowledge(t: TelemetryMsg): void {
    this.mode = t.mode;
    this.gripperClosed = t.gripperClosed;
    this.lockAxis = t.lockAxis;
    this.limitFlag = t.limitFlag;
    this.ballAttached = t.ballAttached;
    this.contactActive = t.contactActive;
    this.clock = t.clock;
    this.lastSeq = t.lastSeq;
    this.acknowledged += 1;
  }

  modeLabel(): string {
    return this.mode === null ? "awaiting telemetry" : SESSION_MODE_NAMES[this.mode];
  }
}

function clampPriority(value: number): number {
  if (!Number.isFinite(value) || value <= 0) {
    return PRIORITY_MIN;
  }
  return Math.max(value, PRIORITY_MIN);
}
