/**
 * Virtual handheld device: mouse/keyboard stand-in for the tracked
 * interface. Planar drag moves the device in x/y, the scroll wheel moves
 * it in z, and dragging with the yaw modifier held twists it about z.
 * Roll and pitch are never emitted; the mappers only consume x, y, z and
 * yaw.
 *
 * The pose emitter turns the device state into interface frames at a
 * fixed rate. An idle device still emits identity-pose heartbeats so the
 * session never trips its staleness watchdog by accident; the emergency
 * stop emits stop-request frames and then halts the stream for good.
 */

import { Buttons, InterfaceMsg, encodeInterface } from "./protocol.js";

export interface DeviceConfig {
  /** world meters per screen pixel of drag */
  metersPerPixel: number;
  /** world meters per scroll tick */
  metersPerScrollTick: number;
  /** radians per screen pixel of drag while the yaw modifier is held */
  radiansPerPixel: number;
}

export const DEFAULT_DEVICE_CONFIG: DeviceConfig = {
  metersPerPixel: 0.001,
  metersPerScrollTick: 0.01,
  radiansPerPixel: 0.005,
};

/** How many consecutive frames carry a pressed button, then how many
 * carry the release. Two of each survives the service's latest-wins
 * command mailbox while still reading as a single edge. */
const PRESS_FRAMES = 2;
const RELEASE_FRAMES = 2;

export interface FrameFields {
  rotation: [number, number, number, number];
  translation: [number, number, number];
  buttons: number;
  priorityArm: number;
  priorityBase: number;
  impedanceScale: number;
  /** true on the last frame the emitter may send */
  halt: boolean;
}

export class VirtualDevice {
  x = 0;
  y = 0;
  z = 0;
  yaw = 0;

  priorityArm = 1.0;
  priorityBase = 1.0;
  impedanceScale = 1.0;

  private config: DeviceConfig;
  private dragging = false;
  private lastPx = 0;
  private lastPy = 0;
  private buttonQueue: number[] = [];
  private stopRequested = false;

  constructor(config: Partial<DeviceConfig> = {}) {
    this.config = { ...DEFAULT_DEVICE_CONFIG, ...config };
  }

  pointerDown(px: number, py: number): void {
    this.dragging = true;
    this.lastPx = px;
    this.lastPy = py;
  }

  /** Screen x grows rightward and screen y grows downward; world y grows
   * up the screen, so the vertical delta flips sign. */
  pointerMove(px: number, py: number, yawModifier = false): void {
    if (!this.dragging) {
      return;
    }
    const dx = px - this.lastPx;
    const dy = py - this.lastPy;
    this.lastPx = px;
    this.lastPy = py;
    if (yawModifier) {
      this.yaw -= dx * this.config.radiansPerPixel;
    } else {
      this.x += dx * this.config.metersPerPixel;
      this.y -= dy * this.config.metersPerPixel;
    }
  }

  pointerUp(): void {
    this.dragging = false;
  }

  scroll(ticksUp: number): void {
    this.z += ticksUp * this.config.metersPerScrollTick;
  }

  /** Queue a button edge: held for two frames, released for two. */
  press(button: Buttons): void {
    for (let i = 0; i < PRESS_FRAMES; i++) {
      this.buttonQueue.push(button);
    }
    for (let i = 0; i < RELEASE_FRAMES; i++) {
      this.buttonQueue.push(Buttons.None);
    }
  }

  /** Emergency stop: the next frames carry the stop request, then the
   * stream halts. */
  pressEstop(): void {
    this.buttonQueue = [];
    for (let i = 0; i < PRESS_FRAMES; i++) {
      this.buttonQueue.push(Buttons.Estop);
    }
    this.stopRequested = true;
  }

  get estopRequested(): boolean {
    return this.stopRequested;
  }

  /** Fields for the next outgoing frame; consumes one queued button slot. */
  sample(): FrameFields {
    const buttons = this.buttonQueue.length > 0 ? this.buttonQueue.shift()! : 0;
    const half = this.yaw / 2;
    return {
      rotation: [Math.cos(half), 0, 0, Math.sin(half)],
      translation: [this.x, this.y, this.z],
      buttons,
      priorityArm: this.priorityArm,
      priorityBase: this.priorityBase,
      impedanceScale: this.impedanceScale,
      halt: this.stopRequested && this.buttonQueue.length === 0,
    };
  }
}

export type SendFrame = (frame: Uint8Array) => void;

export class PoseEmitter {
  readonly periodMs: number;

  private device: VirtualDevice;
  private send: SendFrame;
  private seq = 1;
  private timer: ReturnType<typeof setInterval> | null = null;
  private stopped = false;
  framesSent = 0;

  constructor(device: VirtualDevice, send: SendFrame, rateHz = 30) {
    if (!(rateHz > 0)) {
      throw new Error(`emit rate must be positive, got ${rateHz}`);
    }
    this.device = device;
    this.send = send;
    this.periodMs = 1000 / rateHz;
  }

  get halted(): boolean {
    return this.stopped;
  }

  start(): void {
    if (this.timer === null && !this.stopped) {
      this.timer = setInterval(() => this.tick(), this.periodMs);
    }
  }

  /** Halt emission permanently (connection loss, page teardown). */
  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Emit one frame; returns false once the stream has halted. */
  tick(nowMs: number = Date.now()): boolean {
    if (this.stopped) {
      return false;
    }
    const fields = this.device.sample();
    const msg: InterfaceMsg = {
      kind: "interface",
      seq: this.seq,
      timestampMs: Math.floor(nowMs) % 4294967296,
      rotation: fields.rotation,
      translation: fields.translation,
      buttons: fields.buttons,
      priorityArm: fields.priorityArm,
      priorityBase: fields.priorityBase,
      impedanceScale: fields.impedanceScale,
    };
    this.seq = (this.seq + 1) % 4294967296;
    this.send(encodeInterface(msg));
    this.framesSent += 1;
    if (fields.halt) {
      this.stop();
    }
    return true;
  }
}
