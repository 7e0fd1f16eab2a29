/**
 * Page wiring. Everything with a DOM dependency lives here; the models
 * it glues together (device, panel, view, client) are plain TypeScript.
 */

import { TeleopClient, parseConfig, webSocketTransport } from "./client.js";
import { PoseEmitter, VirtualDevice } from "./device.js";
import { ControlPanel } from "./panel.js";
import { DrawPlan, LiveView } from "./view.js";

const STYLE_COLORS: Record<string, string> = {
  "base-path": "#4a90d9",
  base: "#2c5f8a",
  "base-heading": "#dce6f0",
  ball: "#d97706",
  "ball-held": "#16a34a",
  approach: "#9ca3af",
  "drawer-track": "#6b7280",
  "drawer-handle": "#a16207",
  "dead-zone": "#facc15",
  saturation: "#ef4444",
  "lock-guide-x": "#f97316",
  "lock-guide-y": "#f97316",
  "lock-guide-yaw": "#f97316",
  "ee-trace": "#8b5cf6",
  ee: "#6d28d9",
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

function drawPlan(ctx: CanvasRenderingContext2D, plan: DrawPlan): void {
  ctx.fillStyle = "#111827";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const stripTop = ctx.canvas.height * 0.75;
  ctx.strokeStyle = "#374151";
  ctx.beginPath();
  ctx.moveTo(0, stripTop);
  ctx.lineTo(ctx.canvas.width, stripTop);
  ctx.stroke();
  for (const p of plan.primitives) {
    const color = STYLE_COLORS[p.style] ?? "#e5e7eb";
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.lineWidth = p.style === "base-path" || p.style === "ee-trace" ? 2 : 1.5;
    switch (p.kind) {
      case "circle":
        ctx.beginPath();
        ctx.arc(p.cx, p.cy, p.r, 0, 2 * Math.PI);
        if (p.fill) {
          ctx.fill();
        } else {
          ctx.stroke();
        }
        break;
      case "line":
        ctx.beginPath();
        ctx.moveTo(p.x1, p.y1);
        ctx.lineTo(p.x2, p.y2);
        ctx.stroke();
        break;
      case "polyline":
        if (p.points.length >= 2) {
          ctx.beginPath();
          ctx.moveTo(p.points[0][0], p.points[0][1]);
          for (const [x, y] of p.points.slice(1)) {
            ctx.lineTo(x, y);
          }
          ctx.stroke();
        }
        break;
      case "rect":
        ctx.fillRect(p.x, p.y, p.w, p.h);
        break;
      case "text":
        ctx.font = "12px sans-serif";
        ctx.fillText(p.text, p.x, p.y);
        break;
    }
  }
}

async function start(): Promise<void> {
  const config = parseConfig(window.location.search);
  const host = config.host || window.location.hostname || "127.0.0.1";

  const canvas = byId<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("canvas 2d context unavailable");
  }
  const banner = byId<HTMLDivElement>("banner");
  const modeEl = byId<HTMLSpanElement>("mode");
  const statusEl = byId<HTMLSpanElement>("status");
  const deviceEl = byId<HTMLSpanElement>("device-pose");

  const device = new VirtualDevice({ metersPerPixel: config.metersPerPixel });
  const panel = new ControlPanel(device);
  const view = new LiveView({
    widthPx: canvas.width,
    heightPx: canvas.height,
    pxPerMeter: config.pxPerMeter,
  });

  banner.textContent = `connecting to ws://${host}:${config.wsPort} ...`;
  banner.hidden = false;
  let transport;
  try {
    transport = await webSocketTransport(`ws://${host}:${config.wsPort}/`);
  } catch (err) {
    banner.textContent = `${err}`;
    return;
  }

  let emitter: PoseEmitter | null = null;
  const client = new TeleopClient(transport, {
    onScene: (scene) => {
      view.ingestScene(scene);
      statusEl.textContent = `scenario: ${scene["scenario"]}`;
    },
    onTelemetry: (t) => {
      view.ingestTelemetry(t, performance.now());
      panel.acknowledge(t);
    },
    onDisconnect: (reason) => {
      banner.textContent = `disconnected: ${reason}`;
      banner.hidden = false;
      emitter?.stop();
    },
  });
  emitter = new PoseEmitter(device, (frame) => client.send(frame), config.rateHz);
  emitter.start();

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    device.pointerDown(ev.offsetX, ev.offsetY);
  });
  canvas.addEventListener("pointermove", (ev) => {
    device.pointerMove(ev.offsetX, ev.offsetY, ev.shiftKey);
  });
  canvas.addEventListener("pointerup", () => device.pointerUp());
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    device.scroll(-Math.sign(ev.deltaY));
  });

  const keyActions: Record<string, () => void> = {
    m: () => panel.pressMode(),
    g: () => panel.pressGripper(),
    a: () => panel.pressAttach(),
    r: () => panel.pressResume(),
    " ": () => panel.pressEstop(),
  };
  window.addEventListener("keydown", (ev) => {
    const action = keyActions[ev.key.toLowerCase()] ?? keyActions[ev.key];
    if (action) {
      ev.preventDefault();
      action();
    }
  });

  byId<HTMLButtonElement>("btn-mode").addEventListener("click", () => panel.pressMode());
  byId<HTMLButtonElement>("btn-gripper").addEventListener("click", () => panel.pressGripper());
  byId<HTMLButtonElement>("btn-attach").addEventListener("click", () => panel.pressAttach());
  byId<HTMLButtonElement>("btn-resume").addEventListener("click", () => panel.pressResume());
  byId<HTMLButtonElement>("btn-estop").addEventListener("click", () => panel.pressEstop());

  const armSlider = byId<HTMLInputElement>("slider-arm");
  const baseSlider = byId<HTMLInputElement>("slider-base");
  const impSlider = byId<HTMLInputElement>("slider-impedance");
  const applySliders = (): void => {
    panel.setPriorityArm(10 ** Number(armSlider.value));
    panel.setPriorityBase(10 ** Number(baseSlider.value));
    panel.setImpedanceScale(Number(impSlider.value));
  };
  armSlider.addEventListener("input", applySliders);
  baseSlider.addEventListener("input", applySliders);
  impSlider.addEventListener("input", applySliders);
  applySliders();

  const render = (): void => {
    const plan = view.plan(performance.now());
    drawPlan(ctx, plan);
    if (plan.banner === "disconnected") {
      banner.textContent = "telemetry stale: disconnected";
      banner.hidden = false;
    } else if (plan.banner === null && !client.isClosed) {
      banner.hidden = true;
    }
    modeEl.textContent = panel.modeLabel();
    modeEl.className = panel.mode === 4 ? "stopped" : "";
    const bits = [
      `gripper ${panel.gripperClosed ? "closed" : "open"}`,
      panel.lockAxis !== null ? `lock ${panel.lockAxis}` : "no lock",
      `clock ${panel.clock.toFixed(2)} s`,
      `ack #${panel.lastSeq}`,
    ];
    if (client.malformedCount > 0) {
      bits.push(`malformed ${client.malformedCount}`);
    }
    deviceEl.textContent =
      `device (${device.x.toFixed(3)}, ${device.y.toFixed(3)}, ${device.z.toFixed(3)}) m, `
      + `yaw ${((device.yaw * 180) / Math.PI).toFixed(1)} deg | ${bits.join(" | ")}`;
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = `${err}`;
    (banner as HTMLDivElement).hidden = false;
  }
});
