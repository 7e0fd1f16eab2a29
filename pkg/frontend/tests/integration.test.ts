/**
 * End-to-end session against a live robot service: spawn the server,
 * connect the client models exactly as the page wires them, then run a
 * scripted operator session. Drag right 0.2 m in locomotion mode; the
 * base must move along +x and coast to a stop after the device returns
 * to center. Along the way: no malformed decode ever, overlay circles
 * in locomotion mode only, and the panel mode always equal to the last
 * acknowledged telemetry.
 */

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, test } from "vitest";
import { TeleopClient } from "../src/client.js";
import { PoseEmitter, VirtualDevice } from "../src/device.js";
import { ControlPanel } from "../src/panel.js";
import { SessionMode, TelemetryMsg } from "../src/protocol.js";
import { LiveView } from "../src/view.js";
import { connectWithRetry } from "./node-transport.js";

const HOST = "127.0.0.1";

let server: ChildProcess;
let telemetryPort = 0;

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

async function until(cond: () => boolean, timeoutMs: number, what: string): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) {
      return;
    }
    await sleep(25);
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  server = spawn("teleop-serve", ["--bind", HOST, "--duration", "120"], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const ports = await new Promise<string>((resolve, reject) => {
    let out = "";
    const timer = setTimeout(
      () => reject(new Error(`service never announced ports: ${out}`)), 10000);
    server.stdout!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
      const m = out.match(/telemetry tcp\/(\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
    server.on("exit", (code) => reject(new Error(`service exited early (${code})`)));
  });
  telemetryPort = Number(ports);
}, 15000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("live operator session", () => {
  test("drag right in locomotion moves the base along +x and stops", async () => {
    const device = new VirtualDevice({ metersPerPixel: 0.001 });
    const panel = new ControlPanel(device);
    const view = new LiveView();

    const order: string[] = [];
    let lastAck: TelemetryMsg | null = null;
    const transport = await connectWithRetry(HOST, telemetryPort);
    const client = new TeleopClient(transport, {
      onScene: (scene) => {
        order.push("scene");
        view.ingestScene(scene);
      },
      onTelemetry: (t) => {
        if (order.length === 0) {
          order.push("telemetry-before-scene");
        }
        lastAck = t;
        view.ingestTelemetry(t, Date.now());
        panel.acknowledge(t);
        expect(panel.mode).toBe(t.mode);
      },
      onDisconnect: () => {
        emitter.stop();
      },
    });
    const emitter = new PoseEmitter(device, (frame) => client.send(frame), 30);

    try {
      await until(() => client.sceneReceived, 5000, "the scene frame");
      expect(order[0]).toBe("scene");

      emitter.start();
      await until(() => lastAck !== null, 5000, "first telemetry");
      expect(panel.mode).toBe(lastAck!.mode);

      panel.pressAttach();
      expect(panel.mode).toBe(lastAck!.mode);
      await until(() => panel.mode === SessionMode.AttachedLocal, 5000, "attach ack");

      panel.pressAttach();
      await until(() => panel.mode === SessionMode.DetachedManipulation, 5000,
                  "manipulation ack");
      const manipStyles = view.plan(Date.now()).primitives.map((p) => p.style);
      expect(manipStyles).not.toContain("dead-zone");
      expect(manipStyles).not.toContain("saturation");

      panel.pressMode();
      await until(() => panel.mode === SessionMode.DetachedLocomotion, 5000,
                  "locomotion ack");
      const locoStyles = view.plan(Date.now()).primitives.map((p) => p.style);
      expect(locoStyles).toContain("dead-zone");
      expect(locoStyles).toContain("saturation");

      const xBefore = lastAck!.q[0];
      device.pointerDown(100, 100);
      for (let step = 1; step <= 10; step++) {
        device.pointerMove(100 + 20 * step, 100);
        await sleep(50);
      }
      expect(device.x).toBeCloseTo(0.2, 12);
      await sleep(2000);
      const xDuring = lastAck!.q[0];
      expect(xDuring - xBefore).toBeGreaterThan(0.1);
      expect(Math.abs(lastAck!.q[1])).toBeLessThan(0.05);

      for (let step = 9; step >= 0; step--) {
        device.pointerMove(100 + 20 * step, 100);
        await sleep(30);
      }
      device.pointerUp();
      expect(device.x).toBeCloseTo(0.0, 12);
      await until(() => lastAck !== null && Math.abs(lastAck.qd[0]) < 0.01, 5000,
                  "the base to coast to rest");
      const xAfter = lastAck!.q[0];
      expect(xAfter - xBefore).toBeGreaterThan(0.1);

      panel.pressEstop();
      await until(() => emitter.halted, 2000, "the emitter to halt");
      await until(() => panel.mode === SessionMode.SafetyStop, 5000, "safety stop ack");
      expect(view.plan(Date.now()).primitives.map((p) => p.style))
        .not.toContain("dead-zone");

      expect(client.malformedCount).toBe(0);
      expect(panel.mode).toBe(lastAck!.mode);
      expect(emitter.framesSent).toBeGreaterThan(100);
    } finally {
      emitter.stop();
      client.close();
    }
  }, 45000);
});
