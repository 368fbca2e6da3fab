// Live session: subscribe to the snapshot stream with a polling fallback.
// The stream is preferred; when it drops, 1 Hz polling keeps the console
// alive and the connection state shows "degraded" until data flows again.

import { ApiClient, RunSnapshot } from "./api.js";
import { Store } from "./state.js";

export interface SessionOptions {
  pollIntervalMs?: number;
  eventSourceFactory?: (url: string) => EventSourceLike | null;
  now?: () => number;
}

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export class Session {
  private poller: ReturnType<typeof setInterval> | null = null;
  private ticker: ReturnType<typeof setInterval> | null = null;
  private source: EventSourceLike | null = null;
  private closed = false;

  constructor(
    readonly api: ApiClient,
    readonly runId: string,
    readonly store: Store,
    readonly options: SessionOptions = {},
  ) {}

  start(): void {
    this.store.dispatch({ type: "connected", runId: this.runId });
    const factory =
      this.options.eventSourceFactory ??
      ((url: string) =>
        typeof EventSource !== "undefined" ? (new EventSource(url) as EventSourceLike) : null);
    this.source = factory(this.api.streamUrl(this.runId));
    if (this.source) {
      this.source.onmessage = (ev) => {
        const snapshot = JSON.parse(ev.data) as RunSnapshot;
        this.store.dispatch({ type: "snapshot", snapshot });
      };
      this.source.onerror = () => {
        this.store.dispatch({ type: "disconnected" });
      };
    }
    const interval = this.options.pollIntervalMs ?? 1000;
    this.poller = setInterval(() => void this.poll(), interval);
    this.ticker = setInterval(
      () => this.store.dispatch({ type: "tick", now: (this.options.now ?? Date.now)() }),
      1000,
    );
    void this.poll();
  }

  async poll(): Promise<void> {
    if (this.closed) return;
    try {
      const snapshot = await this.api.snapshot(this.runId);
      this.store.dispatch({ type: "snapshot", snapshot });
    } catch {
      this.store.dispatch({ type: "disconnected" });
    }
  }

  async send(kind: Parameters<ApiClient["command"]>[1], payload: Record<string, unknown> = {}) {
    const now = (this.options.now ?? Date.now)();
    const state = this.store.dispatch({ type: "command-sent", kind, payload, now });
    const id = state.nextCommandId - 1;
    try {
      const result = await this.api.command(this.runId, kind, payload);
      this.store.dispatch({ type: "command-result", id, result });
      // parameter changes materialize in the next snapshot; poll eagerly
      void this.poll();
      return result;
    } catch (err) {
      this.store.dispatch({
        type: "command-result",
        id,
        result: { status: "rejected", reason: String(err) },
      });
      throw err;
    }
  }

  stop(): void {
    this.closed = true;
    if (this.poller) clearInterval(this.poller);
    if (this.ticker) clearInterval(this.ticker);
    if (this.source) this.source.close();
  }
}
