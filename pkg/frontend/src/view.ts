/**
 * Live robot view model. Telemetry and the scene description flow in;
 * a declarative draw plan comes out. Rendering to a canvas happens in
 * main.ts, so everything here stays testable without a DOM.
 *
 * The top-down panel shows the base, its path, the drawer and the ball;
 * a strip along the bottom traces the end effector from the side. In
 * locomotion mode the dead-zone and saturation radii from the scene's
 * mapper block are overlaid around the base, and a locked axis gets a
 * guide line. Telemetry older than a second flips the view to a
 * disconnected state.
 */

import { SessionMode, TelemetryMsg } from "./protocol.js";

export interface ViewConfig {
  widthPx: number;
  heightPx: number;
  pxPerMeter: number;
  /** world point rendered at the centre of the top-down panel */
  centerWorld: [number, number];
}

export const DEFAULT_VIEW_CONFIG: ViewConfig = {
  widthPx: 720,
  heightPx: 560,
  pxPerMeter: 60,
  centerWorld: [0, 0],
};

export const STALE_AFTER_MS = 1000;
const MAX_PATH_POINTS = 5000;
/** fraction of the canvas height given to the side-on EE strip */
const SIDE_STRIP_FRACTION = 0.25;

export type Primitive =
  | { kind: "circle"; cx: number; cy: number; r: number; style: string; fill: boolean }
  | { kind: "polyline"; points: [number, number][]; style: string }
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number; style: string }
  | { kind: "rect"; x: number; y: number; w: number; h: number; style: string }
  | { kind: "text"; x: number; y: number; text: string; style: string };

export interface DrawPlan {
  banner: "connecting" | "disconnected" | null;
  primitives: Primitive[];
}

function num(value: unknown, fallback: number): number {
  return typeof value === "number" && Number.isFinite(value) ? value : fallback;
}

function vec(value: unknown): number[] | null {
  if (Array.isArray(value) && value.every((v) => typeof v === "number")) {
    return value as number[];
  }
  return null;
}

export class LiveView {
  readonly config: ViewConfig;

  private scene: Record<string, unknown> | null = null;
  private latest: TelemetryMsg | null = null;
  private lastRxMs: number | null = null;
  private basePath: [number, number][] = [];
  private eeTrace: [number, number][] = [];
  private sideCenter: [number, number] | null = null;

  constructor(config: Partial<ViewConfig> = {}) {
    this.config = { ...DEFAULT_VIEW_CONFIG, ...config };
  }

  ingestScene(scene: Record<string, unknown>): void {
    this.scene = scene;
    const start = vec(scene["start_base"]);
    const approach = vec(scene["approach_point"]);
    if (start && approach) {
      this.config.centerWorld = [
        (start[0] + approach[0]) / 2,
        (start[1] + approach[1]) / 2,
      ];
    }
  }

  ingestTelemetry(t: TelemetryMsg, nowMs: number): void {
    this.latest = t;
    this.lastRxMs = nowMs;
    this.basePath.push([t.q[0], t.q[1]]);
    if (this.basePath.length > MAX_PATH_POINTS) {
      this.basePath.splice(0, this.basePath.length - MAX_PATH_POINTS);
    }
    const ee: [number, number] = [t.eeTranslation[0], t.eeTranslation[2]];
    this.eeTrace.push(ee);
    if (this.eeTrace.length > MAX_PATH_POINTS) {
      this.eeTrace.splice(0, this.eeTrace.length - MAX_PATH_POINTS);
    }
    if (this.sideCenter === null) {
      this.sideCenter = [ee[0], ee[1]];
    }
  }

  get latestTelemetry(): TelemetryMsg | null {
    return this.latest;
  }

  isStale(nowMs: number): boolean {
    return this.lastRxMs !== null && nowMs - this.lastRxMs > STALE_AFTER_MS;
  }

  /** Top-down world (x, y) to canvas pixels. */
  worldToScreen(x: number, y: number): [number, number] {
    const { widthPx, heightPx, pxPerMeter, centerWorld } = this.config;
    const topHeight = heightPx * (1 - SIDE_STRIP_FRACTION);
    return [
      widthPx / 2 + (x - centerWorld[0]) * pxPerMeter,
      topHeight / 2 - (y - centerWorld[1]) * pxPerMeter,
    ];
  }

  /** Side-on world (x, z) to canvas pixels inside the bottom strip. */
  sideToScreen(x: number, z: number): [number, number] {
    const { widthPx, heightPx, pxPerMeter } = this.config;
    const stripTop = heightPx * (1 - SIDE_STRIP_FRACTION);
    const stripH = heightPx * SIDE_STRIP_FRACTION;
    const center = this.sideCenter ?? [0, 1];
    return [
      widthPx / 2 + (x - center[0]) * pxPerMeter,
      stripTop + stripH / 2 - (z - center[1]) * pxPerMeter * 0.5,
    ];
  }

  plan(nowMs: number): DrawPlan {
    const prims: Primitive[] = [];
    this.planScene(prims);
    this.planRobot(prims);
    let banner: DrawPlan["banner"] = null;
    if (this.lastRxMs === null) {
      banner = "connecting";
    } else if (this.isStale(nowMs)) {
      banner = "disconnected";
    }
    return { banner, primitives: prims };
  }

  private planScene(prims: Primitive[]): void {
    if (this.scene === null) {
      return;
    }
    const approach = vec(this.scene["approach_point"]);
    if (approach) {
      const [px, py] = this.worldToScreen(approach[0], approach[1]);
      prims.push({ kind: "circle", cx: px, cy: py, r: 4, style: "approach", fill: false });
    }
    const drawer = this.scene["drawer"] as Record<string, unknown> | undefined;
    if (drawer) {
      const handle = vec(drawer["handle_closed"]);
      const axis = vec(drawer["axis"]);
      const travel = num(drawer["travel"], 0);
      if (handle && axis) {
        const [x1, y1] = this.worldToScreen(handle[0], handle[1]);
        const [x2, y2] = this.worldToScreen(
          handle[0] + axis[0] * travel,
          handle[1] + axis[1] * travel,
        );
        prims.push({ kind: "line", x1, y1, x2, y2, style: "drawer-track" });
        const joint = this.latest ? this.latest.drawerJoint : num(drawer["start_joint"], 0);
        const [hx, hy] = this.worldToScreen(
          handle[0] + axis[0] * joint,
          handle[1] + axis[1] * joint,
        );
        prims.push({ kind: "rect", x: hx - 5, y: hy - 5, w: 10, h: 10, style: "drawer-handle" });
      }
    }
  }

  private planRobot(prims: Primitive[]): void {
    if (this.latest === null) {
      return;
    }
    const t = this.latest;
    if (this.basePath.length >= 2) {
      prims.push({
        kind: "polyline",
        points: this.basePath.map(([x, y]) => this.worldToScreen(x, y)),
        style: "base-path",
      });
    }
    const [bx, by] = this.worldToScreen(t.q[0], t.q[1]);
    const yaw = t.q[2];
    const headLen = 14;
    prims.push({ kind: "circle", cx: bx, cy: by, r: 9, style: "base", fill: true });
    prims.push({
      kind: "line",
      x1: bx,
      y1: by,
      x2: bx + headLen * Math.cos(yaw),
      y2: by - headLen * Math.sin(yaw),
      style: "base-heading",
    });
    const ball = t.ballPosition;
    const [ballX, ballY] = this.worldToScreen(ball[0], ball[1]);
    prims.push({
      kind: "circle", cx: ballX, cy: ballY, r: 5,
      style: t.ballAttached ? "ball-held" : "ball", fill: true,
    });
    if (t.mode === SessionMode.DetachedLocomotion) {
      this.planLocomotionOverlay(prims, bx, by);
    }
    if (this.eeTrace.length >= 2) {
      prims.push({
        kind: "polyline",
        points: this.eeTrace.map(([x, z]) => this.sideToScreen(x, z)),
        style: "ee-trace",
      });
    }
    const [ex, ey] = this.sideToScreen(t.eeTranslation[0], t.eeTranslation[2]);
    prims.push({ kind: "circle", cx: ex, cy: ey, r: 4, style: "ee", fill: true });
  }

  private planLocomotionOverlay(prims: Primitive[], bx: number, by: number): void {
    const mapper = (this.scene?.["mapper"] ?? {}) as Record<string, unknown>;
    const deadZone = num(mapper["dead_zone"], 0.05);
    const saturation = num(mapper["saturation"], 0.3);
    const s = this.config.pxPerMeter;
    prims.push({ kind: "circle", cx: bx, cy: by, r: deadZone * s, style: "dead-zone", fill: false });
    prims.push({ kind: "circle", cx: bx, cy: by, r: saturation * s, style: "saturation", fill: false });
    const lock = this.latest?.lockAxis ?? null;
    if (lock === "x" || lock === "y") {
      const reach = saturation * s + 20;
      const [dx, dy] = lock === "x" ? [reach, 0] : [0, reach];
      prims.push({
        kind: "line",
        x1: bx - dx, y1: by - dy, x2: bx + dx, y2: by + dy,
        style: `lock-guide-${lock}`,
      });
    } else if (lock === "yaw") {
      prims.push({
        kind: "circle", cx: bx, cy: by, r: saturation * s + 12,
        style: "lock-guide-yaw", fill: false,
      });
    }
  }
}
