// View state: latest snapshot, connection health, pending command queue.
// The server is the source of truth -- UI state only changes on snapshots
// and on command acks/rejections; pending commands expire visibly.

import type { CommandKind, CommandResult, RunSnapshot } from "./api.js";

export const COMMAND_TIMEOUT_MS = 10_000;

export type Connection = "connecting" | "live" | "degraded";

export interface PendingCommand {
  id: number;
  kind: CommandKind;
  payload: Record<string, unknown>;
  sentAt: number;
  status: "pending" | "accepted" | "rejected" | "expired";
  reason?: string;
}

export interface ViewState {
  runId: string | null;
  connection: Connection;
  snapshot: RunSnapshot | null;
  colorScale: string;
  pending: PendingCommand[];
  nextCommandId: number;
}

export function initialState(): ViewState {
  return {
    runId: null,
    connection: "connecting",
    snapshot: null,
    colorScale: "viridis",
    pending: [],
    nextCommandId: 1,
  };
}

export type Action =
  | { type: "connected"; runId: string }
  | { type: "snapshot"; snapshot: RunSnapshot }
  | { type: "disconnected" }
  | { type: "command-sent"; kind: CommandKind; payload: Record<string, unknown>; now: number }
  | { type: "command-result"; id: number; result: CommandResult }
  | { type: "tick"; now: number }
  | { type: "color-scale"; value: string };

export function reduce(state: ViewState, action: Action): ViewState {
  switch (action.type) {
    case "connected":
      return { ...state, runId: action.runId, connection: "live" };
    case "snapshot": {
      // never regress: stale or duplicate sequence numbers are dropped
      if (state.snapshot && action.snapshot.seq <= state.snapshot.seq) {
        return { ...state, connection: "live" };
      }
      return { ...state, snapshot: action.snapshot, connection: "live" };
    }
    case "disconnected":
      return { ...state, connection: "degraded" };
    case "command-sent": {
      const cmd: PendingCommand = {
        id: state.nextCommandId,
        kind: action.kind,
        payload: action.payload,
        sentAt: action.now,
        status: "pending",
      };
      return {
        ...state,
        pending: [...state.pending, cmd],
        nextCommandId: state.nextCommandId + 1,
      };
    }
    case "command-result": {
      const pending = state.pending.map((c) =>
        c.id === action.id
          ? {
              ...c,
              status: action.result.status,
              reason: action.result.reason,
            }
          : c,
      );
      return { ...state, pending };
    }
    case "tick": {
      const pending = state.pending
        .map((c) =>
          c.status === "pending" && action.now - c.sentAt > COMMAND_TIMEOUT_MS
            ? { ...c, status: "expired" as const }
            : c,
        )
        // resolved commands stay visible for a while, then drop off
        .filter(
          (c) => c.status === "pending" || action.now - c.sentAt < 3 * COMMAND_TIMEOUT_MS,
        );
      return { ...state, pending };
    }
    case "color-scale":
      return { ...state, colorScale: action.value };
  }
}

export interface StoreListener {
  (state: ViewState): void;
}

export class Store {
  private state: ViewState = initialState();
  private listeners: StoreListener[] = [];

  get(): ViewState {
    return this.state;
  }

  dispatch(action: Action): ViewState {
    this.state = reduce(this.state, action);
    for (const fn of this.listeners) fn(this.state);
    return this.state;
  }

  subscribe(fn: StoreListener): void {
    this.listeners.push(fn);
  }
}
