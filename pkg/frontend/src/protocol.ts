/**
 * Binary wire protocol shared with the robot service.
 *
 * Every frame is a fixed little-endian header followed by a typed payload:
 *
 *     magic   u32   0x4D435254
 *     version u8    PROTOCOL_VERSION
 *     type    u8    FrameType
 *     length  u16   payload byte count
 *
 * Interface and telemetry payloads are fixed-width packed structs; the
 * scene payload is canonical JSON. Decoding never throws anything except
 * MalformedFrame, whatever the input bytes.
 */

export const MAGIC = 0x4d435254;
export const PROTOCOL_VERSION = 1;
export const HEADER_SIZE = 8;
export const INTERFACE_BODY_SIZE = 89;
export const TELEMETRY_BODY_SIZE = 312;
export const MAX_FRAME_SIZE = HEADER_SIZE + 65535;

export enum FrameType {
  Interface = 1,
  Telemetry = 2,
  Scene = 3,
}

export enum Buttons {
  None = 0,
  ModeToggle = 1,
  GripperToggle = 2,
  AttachToggle = 4,
  Estop = 8,
  Resume = 16,
}

export enum SessionMode {
  Idle = 0,
  AttachedLocal = 1,
  DetachedManipulation = 2,
  DetachedLocomotion = 3,
  SafetyStop = 4,
}

export const SESSION_MODE_NAMES: Record<SessionMode, string> = {
  [SessionMode.Idle]: "idle",
  [SessionMode.AttachedLocal]: "attached (local)",
  [SessionMode.DetachedManipulation]: "detached manipulation",
  [SessionMode.DetachedLocomotion]: "detached locomotion",
  [SessionMode.SafetyStop]: "SAFETY STOP",
};

export type LockAxis = null | "x" | "y" | "yaw";
const LOCK_AXIS_BY_CODE: LockAxis[] = [null, "x", "y", "yaw"];

export class MalformedFrame extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MalformedFrame";
  }
}

export interface InterfaceMsg {
  kind: "interface";
  seq: number;
  timestampMs: number;
  /** wxyz quaternion, raw wire values */
  rotation: [number, number, number, number];
  translation: [number, number, number];
  buttons: number;
  priorityArm: number;
  priorityBase: number;
  impedanceScale: number;
}

export interface TelemetryMsg {
  kind: "telemetry";
  clock: number;
  /** base x, y, yaw then 7 arm joints */
  q: number[];
  qd: number[];
  eeRotation: [number, number, number, number];
  eeTranslation: [number, number, number];
  mode: SessionMode;
  lockAxis: LockAxis;
  gripperClosed: boolean;
  limitFlag: boolean;
  ballAttached: boolean;
  contactActive: boolean;
  wrench: number[];
  ballPosition: [number, number, number];
  drawerJoint: number;
  lastSeq: number;
}

export interface SceneMsg {
  kind: "scene";
  scene: Record<string, unknown>;
}

export type Message = InterfaceMsg | TelemetryMsg | SceneMsg;

function requireFinite(values: number[], what: string): void {
  for (const v of values) {
    if (!Number.isFinite(v)) {
      throw new MalformedFrame(`non-finite ${what}`);
    }
  }
}

function requireU32(value: number, what: string): void {
  if (!Number.isInteger(value) || value < 0 || value >= 2 ** 32) {
    throw new MalformedFrame(`${what} out of range`);
  }
}

export function validateInterface(msg: InterfaceMsg): void {
  requireFinite(msg.rotation, "rotation");
  requireFinite(msg.translation, "translation");
  const all = [...msg.rotation, ...msg.translation];
  if (Math.max(...all.map(Math.abs)) > 1e6) {
    throw new MalformedFrame("pose component out of range");
  }
  const norm2 = msg.rotation.reduce((s, v) => s + v * v, 0);
  if (norm2 < 1e-12) {
    throw new MalformedFrame("zero-norm rotation");
  }
  requireU32(msg.seq, "counter");
  requireU32(msg.timestampMs, "counter");
  if (!Number.isInteger(msg.buttons) || msg.buttons < 0 || msg.buttons > 255) {
    throw new MalformedFrame("buttons out of range");
  }
  for (const [label, v] of [
    ["priority_arm", msg.priorityArm],
    ["priority_base", msg.priorityBase],
  ] as const) {
    if (!Number.isFinite(v) || v <= 0) {
      throw new MalformedFrame(`${label} must be finite and positive`);
    }
  }
  if (!Number.isFinite(msg.impedanceScale) || msg.impedanceScale < 0) {
    throw new MalformedFrame("impedance_scale must be finite and nonnegative");
  }
}

function header(frameType: FrameType, length: number): Uint8Array {
  const out = new Uint8Array(HEADER_SIZE);
  const view = new DataView(out.buffer);
  view.setUint32(0, MAGIC, true);
  view.setUint8(4, PROTOCOL_VERSION);
  view.setUint8(5, frameType);
  view.setUint16(6, length, true);
  return out;
}

export function encodeInterface(msg: InterfaceMsg): Uint8Array {
  validateInterface(msg);
  const out = new Uint8Array(HEADER_SIZE + INTERFACE_BODY_SIZE);
  out.set(header(FrameType.Interface, INTERFACE_BODY_SIZE), 0);
  const view = new DataView(out.buffer, HEADER_SIZE);
  view.setUint32(0, msg.seq, true);
  view.setUint32(4, msg.timestampMs, true);
  msg.rotation.forEach((v, i) => view.setFloat64(8 + 8 * i, v, true));
  msg.translation.forEach((v, i) => view.setFloat64(40 + 8 * i, v, true));
  view.setUint8(64, msg.buttons);
  view.setFloat64(65, msg.priorityArm, true);
  view.setFloat64(73, msg.priorityBase, true);
  view.setFloat64(81, msg.impedanceScale, true);
  return out;
}

function readF64s(view: DataView, offset: number, count: number): number[] {
  const out = new Array<number>(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getFloat64(offset + 8 * i, true);
  }
  return out;
}

function decodeInterfaceBody(view: DataView): InterfaceMsg {
  const msg: InterfaceMsg = {
    kind: "interface",
    seq: view.getUint32(0, true),
    timestampMs: view.getUint32(4, true),
    rotation: readF64s(view, 8, 4) as InterfaceMsg["rotation"],
    translation: readF64s(view, 40, 3) as InterfaceMsg["translation"],
    buttons: view.getUint8(64),
    priorityArm: view.getFloat64(65, true),
    priorityBase: view.getFloat64(73, true),
    impedanceScale: view.getFloat64(81, true),
  };
  validateInterface(msg);
  return msg;
}

function decodeTelemetryBody(view: DataView): TelemetryMsg {
  const clock = view.getFloat64(0, true);
  const q = readF64s(view, 8, 10);
  const qd = readF64s(view, 88, 10);
  const eeRotation = readF64s(view, 168, 4) as TelemetryMsg["eeRotation"];
  const eeTranslation = readF64s(view, 200, 3) as TelemetryMsg["eeTranslation"];
  const modeCode = view.getUint8(224);
  const lockCode = view.getUint8(225);
  const gripper = view.getUint8(226);
  const flags = view.getUint8(227);
  const wrench = readF64s(view, 228, 6);
  const ballPosition = readF64s(view, 276, 3) as TelemetryMsg["ballPosition"];
  const drawerJoint = view.getFloat64(300, true);
  const lastSeq = view.getUint32(308, true);

  requireFinite([clock, drawerJoint], "scalars");
  requireFinite(q, "q");
  requireFinite(qd, "qd");
  requireFinite(eeRotation, "ee rotation");
  requireFinite(eeTranslation, "ee translation");
  requireFinite(wrench, "wrench");
  requireFinite(ballPosition, "ball position");
  if (modeCode > SessionMode.SafetyStop) {
    throw new MalformedFrame(`unknown mode ${modeCode}`);
  }
  if (lockCode >= LOCK_AXIS_BY_CODE.length) {
    throw new MalformedFrame(`unknown lock axis code ${lockCode}`);
  }
  if (gripper !== 0 && gripper !== 1) {
    throw new MalformedFrame(`bad gripper code ${gripper}`);
  }
  if (flags > 7) {
    throw new MalformedFrame(`unknown flag bits ${flags}`);
  }
  return {
    kind: "telemetry",
    clock,
    q,
    qd,
    eeRotation,
    eeTranslation,
    mode: modeCode as SessionMode,
    lockAxis: LOCK_AXIS_BY_CODE[lockCode],
    gripperClosed: gripper === 1,
    limitFlag: (flags & 1) !== 0,
    ballAttached: (flags & 2) !== 0,
    contactActive: (flags & 4) !== 0,
    wrench,
    ballPosition,
    drawerJoint,
    lastSeq,
  };
}

function decodeSceneBody(payload: Uint8Array): SceneMsg {
  let scene: unknown;
  try {
    scene = JSON.parse(new TextDecoder("utf-8", { fatal: true }).decode(payload));
  } catch (err) {
    throw new MalformedFrame(`bad scene payload: ${err}`);
  }
  if (typeof scene !== "object" || scene === null || Array.isArray(scene)) {
    throw new MalformedFrame("scene payload must be a JSON object");
  }
  return { kind: "scene", scene: scene as Record<string, unknown> };
}

const BODY_SIZE: Partial<Record<FrameType, number>> = {
  [FrameType.Interface]: INTERFACE_BODY_SIZE,
  [FrameType.Telemetry]: TELEMETRY_BODY_SIZE,
};

/** Parse one frame from the front of `data`; returns [message, bytes consumed]. */
function decodePrefix(data: Uint8Array): [Message, number] {
  if (data.length < HEADER_SIZE) {
    throw new MalformedFrame("truncated header");
  }
  const head = new DataView(data.buffer, data.byteOffset, HEADER_SIZE);
  const magic = head.getUint32(0, true);
  const version = head.getUint8(4);
  const typeCode = head.getUint8(5);
  const length = head.getUint16(6, true);
  if (magic !== MAGIC) {
    throw new MalformedFrame(`bad magic 0x${magic.toString(16)}`);
  }
  if (version !== PROTOCOL_VERSION) {
    throw new MalformedFrame(`unsupported version ${version}`);
  }
  if (typeCode !== FrameType.Interface && typeCode !== FrameType.Telemetry
      && typeCode !== FrameType.Scene) {
    throw new MalformedFrame(`unknown frame type ${typeCode}`);
  }
  const frameType = typeCode as FrameType;
  const expected = BODY_SIZE[frameType];
  if (expected !== undefined && length !== expected) {
    throw new MalformedFrame(`bad length ${length} for type ${frameType}`);
  }
  const end = HEADER_SIZE + length;
  if (data.length < end) {
    throw new MalformedFrame("truncated payload");
  }
  const payload = data.subarray(HEADER_SIZE, end);
  const body = new DataView(payload.buffer, payload.byteOffset, payload.length);
  let msg: Message;
  if (frameType === FrameType.Interface) {
    msg = decodeInterfaceBody(body);
  } else if (frameType === FrameType.Telemetry) {
    msg = decodeTelemetryBody(body);
  } else {
    msg = decodeSceneBody(payload);
  }
  return [msg, end];
}

/** Parse exactly one frame; throws MalformedFrame on any defect. */
export function decode(data: Uint8Array): Message {
  const [msg, consumed] = decodePrefix(data);
  if (consumed !== data.length) {
    throw new MalformedFrame(`${data.length - consumed} trailing bytes`);
  }
  return msg;
}

/**
 * Incremental frame parser for stream transports. feed(data) returns every
 * complete message now available; a malformed prefix throws MalformedFrame
 * and poisons the reader (stream framing cannot recover once byte
 * alignment is lost).
 */
export class FrameReader {
  private buffer = new Uint8Array(0);
  private poisoned = false;

  feed(data: Uint8Array): Message[] {
    if (this.poisoned) {
      throw new MalformedFrame("reader previously hit a malformed frame");
    }
    const merged = new Uint8Array(this.buffer.length + data.length);
    merged.set(this.buffer, 0);
    merged.set(data, this.buffer.length);
    this.buffer = merged;
    if (this.buffer.length > 4 * MAX_FRAME_SIZE) {
      this.poisoned = true;
      throw new MalformedFrame("buffer overrun without a complete frame");
    }
    const out: Message[] = [];
    for (;;) {
      if (this.buffer.length < HEADER_SIZE) {
        return out;
      }
      const head = new DataView(this.buffer.buffer, this.buffer.byteOffset, HEADER_SIZE);
      const length = head.getUint16(6, true);
      const end = HEADER_SIZE + length;
      if (this.buffer.length < end) {
        this.checkHeaderPrefix(head);
        return out;
      }
      let msg: Message;
      let consumed: number;
      try {
        [msg, consumed] = decodePrefix(this.buffer);
      } catch (err) {
        this.poisoned = true;
        throw err;
      }
      this.buffer = this.buffer.subarray(consumed);
      out.push(msg);
    }
  }

  private checkHeaderPrefix(head: DataView): void {
    const magic = head.getUint32(0, true);
    const version = head.getUint8(4);
    const typeCode = head.getUint8(5);
    if (magic !== MAGIC || version !== PROTOCOL_VERSION
        || (typeCode !== FrameType.Interface && typeCode !== FrameType.Telemetry
            && typeCode !== FrameType.Scene)) {
      this.poisoned = true;
      throw new MalformedFrame("bad header in stream");
    }
  }
}
