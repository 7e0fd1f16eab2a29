/** Shared test utilities: fixture loading and message builders. */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { InterfaceMsg, TelemetryMsg } from "../src/protocol.js";

export interface InterfaceFixture {
  fields: {
    seq: number;
    timestamp_ms: number;
    rotation: [number, number, number, number];
    translation: [number, number, number];
    buttons: number;
    priority_arm: number;
    priority_base: number;
    impedance_scale: number;
  };
  hex: string;
}

export interface TelemetryFixture {
  fields: {
    clock: number;
    q: number[];
    qd: number[];
    ee_rotation: [number, number, number, number];
    ee_translation: [number, number, number];
    mode: number;
    lock_axis: null | "x" | "y" | "yaw";
    gripper_closed: boolean;
    limit_flag: boolean;
    ball_attached: boolean;
    contact_active: boolean;
    wrench: number[];
    ball_position: [number, number, number];
    drawer_joint: number;
    last_seq: number;
  };
  hex: string;
}

export interface Fixtures {
  interface: InterfaceFixture[];
  telemetry: TelemetryFixture[];
  scene: { hex: string; scenario: string; dead_zone: number; saturation: number };
  malformed: string[];
  session: { frames: string[]; final_base: [number, number]; modes: number[] };
}

const FIXTURE_PATH = fileURLToPath(new URL("./fixtures.json", import.meta.url));

export function loadFixtures(): Fixtures {
  return JSON.parse(readFileSync(FIXTURE_PATH, "utf-8")) as Fixtures;
}

export function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function bytesToHex(data: Uint8Array): string {
  return Array.from(data, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function interfaceFromFixture(f: InterfaceFixture): InterfaceMsg {
  return {
    kind: "interface",
    seq: f.fields.seq,
    timestampMs: f.fields.timestamp_ms,
    rotation: f.fields.rotation,
    translation: f.fields.translation,
    buttons: f.fields.buttons,
    priorityArm: f.fields.priority_arm,
    priorityBase: f.fields.priority_base,
    impedanceScale: f.fields.impedance_scale,
  };
}

/** Synthetic telemetry for model tests that never touch the wire. */
export function makeTelemetry(overrides: Partial<TelemetryMsg> = {}): TelemetryMsg {
  return {
    kind: "telemetry",
    clock: 1.0,
    q: new Array(10).fill(0),
    qd: new Array(10).fill(0),
    eeRotation: [1, 0, 0, 0],
    eeTranslation: [0.5, 0, 1.04],
    mode: 0,
    lockAxis: null,
    gripperClosed: false,
    limitFlag: false,
    ballAttached: false,
    contactActive: false,
    wrench: new Array(6).fill(0),
    ballPosition: [0.65, 0.1, 0.75],
    drawerJoint: 0,
    lastSeq: 0,
    ...overrides,
  };
}
