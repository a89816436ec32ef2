// Reconnecting WebSocket wrapper: exponential backoff (1s doubling to 10s),
// schema-validated inbound frames, and send() that refuses while the bridge
// is away instead of throwing. The WebSocket constructor is injectable so
// tests can drive a fake.

import { parseEvent, serializeCommand, type BridgeEvent, type Command } from "./protocol.js";
import type { Connection } from "./state.js";

export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface SocketHandlers {
  onEvent(event: BridgeEvent): void;
  onConnection(status: Connection): void;
}

const BACKOFF_START_MS = 1000;
const BACKOFF_MAX_MS = 10_000;

export class ConsoleSocket {
  private ws: WebSocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private connected = false;
  private retryHandle: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: SocketHandlers,
    private readonly factory: WebSocketFactory = (u) =>
      new WebSocket(u) as unknown as WebSocketLike,
  ) {}

  connect(): void {
    if (this.closed) return;
    this.handlers.onConnection("CONNECTING");
    let ws: WebSocketLike;
    try {
      ws = this.factory(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.connected = true;
      this.handlers.onConnection("CONNECTED");
    };
    ws.onmessage = (message) => {
      const event = parseEvent(message.data);
      if (event !== null) this.handlers.onEvent(event);
    };
    ws.onerror = () => {
      // onclose follows; nothing to do here
    };
    ws.onclose = () => {
      this.connected = false;
      this.ws = null;
      if (!this.closed) {
        this.handlers.onConnection("DISCONNECTED");
        this.scheduleRetry();
      }
    };
  }

  get backoffMs(): number {
    return Math.min(BACKOFF_START_MS * 2 ** Math.max(this.attempts - 1, 0), BACKOFF_MAX_MS);
  }

  private scheduleRetry(): void {
    this.attempts += 1;
    this.retryHandle = setTimeout(() => this.connect(), this.backoffMs);
  }

  send(command: Command): boolean {
    if (!this.connected || this.ws === null) return false;
    try {
      this.ws.send(serializeCommand(command));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    if (this.retryHandle !== null) clearTimeout(this.retryHandle);
    this.ws?.close();
    this.ws = null;
    this.connected = false;
  }
}
