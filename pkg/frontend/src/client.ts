/**
 * Connection plumbing between the page and the robot service. The
 * client is deliberately thin: bytes in, decoded messages out, frames
 * from the emitter passed through unchanged. All control math lives on
 * the service side.
 *
 * Transports are pluggable so tests can drive the client over a raw
 * socket or a canned byte script; the browser build uses a WebSocket,
 * which carries exactly one protocol frame per binary message.
 */

import { FrameReader, MalformedFrame, Message, TelemetryMsg } from "./protocol.js";

export interface Transport {
  send(data: Uint8Array): void;
  close(): void;
  onMessage(handler: (data: Uint8Array) => void): void;
  onClose(handler: () => void): void;
}

export interface ClientEvents {
  onScene?: (scene: Record<string, unknown>) => void;
  onTelemetry?: (t: TelemetryMsg) => void;
  onDisconnect?: (reason: string) => void;
}

export class TeleopClient {
  malformedCount = 0;
  sceneReceived = false;

  private reader = new FrameReader();
  private transport: Transport;
  private events: ClientEvents;
  private closed = false;

  constructor(transport: Transport, events: ClientEvents = {}) {
    this.transport = transport;
    this.events = events;
    transport.onMessage((data) => this.handleBytes(data));
    transport.onClose(() => this.handleClose("connection closed"));
  }

  get isClosed(): boolean {
    return this.closed;
  }

  send(frame: Uint8Array): void {
    if (!this.closed) {
      this.transport.send(frame);
    }
  }

  close(): void {
    this.handleClose("closed by client");
  }

  private handleBytes(data: Uint8Array): void {
    if (this.closed) {
      return;
    }
    let messages: Message[];
    try {
      messages = this.reader.feed(data);
    } catch (err) {
      if (err instanceof MalformedFrame) {
        this.malformedCount += 1;
        this.handleClose(`malformed stream: ${err.message}`);
        return;
      }
      throw err;
    }
    for (const msg of messages) {
      if (msg.kind === "scene") {
        this.sceneReceived = true;
        this.events.onScene?.(msg.scene);
      } else if (msg.kind === "telemetry") {
        this.events.onTelemetry?.(msg);
      }
    }
  }

  private handleClose(reason: string): void {
    if (this.closed) {
      return;
    }
    this.closed = true;
    this.transport.close();
    this.events.onDisconnect?.(reason);
  }
}

/** Browser transport. Resolves once the socket is open. */
export function webSocketTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    ws.binaryType = "arraybuffer";
    let messageHandler: ((data: Uint8Array) => void) | null = null;
    let closeHandler: (() => void) | null = null;
    ws.onmessage = (ev) => {
      if (ev.data instanceof ArrayBuffer) {
        messageHandler?.(new Uint8Array(ev.data));
      }
    };
    ws.onclose = () => closeHandler?.();
    ws.onerror = () => {
      if (ws.readyState !== WebSocket.OPEN) {
        reject(new Error(`could not connect to ${url}`));
      }
    };
    ws.onopen = () => {
      resolve({
        send: (data) => ws.send(data),
        close: () => ws.close(),
        onMessage: (h) => {
          messageHandler = h;
        },
        onClose: (h) => {
          closeHandler = h;
        },
      });
    };
  });
}

export interface UiConfig {
  /** hostname of the robot service; empty means the page's own host */
  host: string;
  wsPort: number;
  rateHz: number;
  pxPerMeter: number;
  metersPerPixel: number;
}

export const DEFAULT_UI_CONFIG: UiConfig = {
  host: "",
  wsPort: 47763,
  rateHz: 30,
  pxPerMeter: 60,
  metersPerPixel: 0.001,
};

/** Parse ?host=...&port=...&rate=...&scale=...&drag=... into a config. */
export function parseConfig(search: string): UiConfig {
  const params = new URLSearchParams(search);
  const config = { ...DEFAULT_UI_CONFIG };
  const host = params.get("host");
  if (host) {
    config.host = host;
  }
  const numeric: [keyof UiConfig & string, string][] = [
    ["wsPort", "port"],
    ["rateHz", "rate"],
    ["pxPerMeter", "scale"],
    ["metersPerPixel", "drag"],
  ];
  for (const [field, param] of numeric) {
    const raw = params.get(param);
    if (raw !== null) {
      const value = Number(raw);
      if (Number.isFinite(value) && value > 0) {
        (config as unknown as Record<string, number>)[field] = value;
      }
    }
  }
  return config;
}
