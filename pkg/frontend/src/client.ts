// Gateway connection: hello handshake, sequence numbering, reconnects,
// and an outbound queue so a click during a brief disconnect is not lost
// (queued sends expire after five seconds, with a visible notice).

import { PROTOCOL, type Button, type ConsoleKind, type ServerMessage, parseServerMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

// Shaped so both the DOM WebSocket and node's `ws` client satisfy it.
export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

export interface ClientHandlers {
  onMessage(msg: ServerMessage): void;
  onStatus(status: ConnectionStatus): void;
  onNotice(text: string): void;
}

export type ConsoleRole = "carer" | "patient" | "engineer";

export const QUEUE_EXPIRY_MS = 5_000;

interface QueuedSend {
  queuedAt: number;
  payload: Record<string, unknown>;
}

export class GatewayClient {
  private socket: WebSocketLike | null = null;
  private open = false;
  private seq = 0;
  private queue: QueuedSend[] = [];
  private closed = false;
  private retryMs = 1_000;
  role: ConsoleRole = "carer";

  constructor(
    private url: string,
    private handlers: ClientHandlers,
    private makeSocket: (url: string) => WebSocketLike,
    private now: () => number = () => Date.now(),
  ) {}

  connect(): void {
    this.closed = false;
    this.handlers.onStatus("connecting");
    const ws = this.makeSocket(this.url);
    this.socket = ws;
    ws.onopen = () => {
      this.open = true;
      this.retryMs = 1_000;
      this.handlers.onStatus("open");
      this.sendNow({ kind: "Hello", protocol: PROTOCOL });
      this.flushQueue();
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg !== null) this.handlers.onMessage(msg);
    };
    ws.onerror = () => {
      // onclose handles the retry
    };
    ws.onclose = () => {
      this.socket = null;
      this.open = false;
      this.handlers.onStatus("closed");
      if (!this.closed) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 8_000);
      }
    };
  }

  close(): void {
    this.closed = true;
    this.open = false;
    this.socket?.close();
    this.socket = null;
  }

  get isOpen(): boolean {
    return this.open;
  }

  send(kind: ConsoleKind, payload: Record<string, unknown> = {}): void {
    const message = { kind, role: this.role, client_ms: this.now(), ...payload };
    if (!this.open) {
      this.queue.push({ queuedAt: this.now(), payload: message });
      return;
    }
    this.sendNow(message);
  }

  private sendNow(payload: Record<string, unknown>): void {
    if (this.socket === null) return;
    this.seq += 1;
    this.socket.send(JSON.stringify({ ...payload, seq: this.seq }));
  }

  private flushQueue(): void {
    const now = this.now();
    let dropped = 0;
    for (const item of this.queue) {
      if (now - item.queuedAt > QUEUE_EXPIRY_MS) {
        dropped += 1;
      } else {
        this.sendNow(item.payload);
      }
    }
    this.queue = [];
    if (dropped > 0) {
      this.handlers.onNotice(`${dropped} input(s) expired while disconnected and were dropped`);
    }
  }

  /** Queued sends older than the expiry are dropped with a notice. */
  pruneQueue(): void {
    const now = this.now();
    const fresh = this.queue.filter((item) => now - item.queuedAt <= QUEUE_EXPIRY_MS);
    const dropped = this.queue.length - fresh.length;
    this.queue = fresh;
    if (dropped > 0) {
      this.handlers.onNotice(`${dropped} input(s) expired while disconnected and were dropped`);
    }
  }

  // -- console inputs ------------------------------------------------------

  button(button: Button, isDown: boolean): void {
    this.send(isDown ? "ButtonDown" : "ButtonUp", { button });
  }

  speech(text: string): void {
    this.send("SpeechText", { text });
  }

  assistanceDone(): void {
    this.send("AssistanceDone");
  }

  abort(): void {
    this.send("TherapistAbort");
  }

  engineerReset(): void {
    this.send("EngineerReset");
  }
}
