// Typed client for the control service /v1 API. The console consumes this
// API exclusively; every displayed number originates from a RunSnapshot.

export interface ImagePayload {
  data_b64: string;
  dims: number[];
  spacing: number;
  origin: number[];
  dtype: string;
}

export interface StationInfo {
  id: number;
  x: number;
  y: number;
}

export interface EdgeInfo {
  a: number;
  b: number;
  down: boolean;
}

export interface RunSnapshot {
  run_id: string;
  seq: number;
  pipeline: string;
  round: number;
  sim_time: number;
  finished: boolean;
  converged: boolean;
  params: Record<string, unknown>;
  image: ImagePayload;
  convergence_tail: number[][];
  net_stats: Record<string, number>;
  metrics: Record<string, number | boolean>;
  stations: StationInfo[];
  edges: EdgeInfo[];
  seed: number;
}

export type CommandKind =
  | "SET_LAMBDA"
  | "SET_BAND"
  | "SET_PICKER"
  | "SET_ALGORITHM"
  | "SET_RESOLUTION"
  | "INJECT_EVENT"
  | "FAIL_LINK"
  | "RESTORE_LINK"
  | "PAUSE"
  | "RESUME"
  | "RESTART_SOLVE";

export interface CommandResult {
  status: "accepted" | "rejected";
  reason?: string;
}

export function decodeImage(image: ImagePayload): Float32Array {
  const bin = atob(image.data_b64);
  const bytes = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) bytes[i] = bin.charCodeAt(i);
  return new Float32Array(bytes.buffer);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  async startRun(scenario: Record<string, unknown>): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/v1/runs`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(scenario),
    });
    if (!resp.ok) throw new Error(`start failed: ${await resp.text()}`);
    const body = (await resp.json()) as { run_id: string };
    return body.run_id;
  }

  async snapshot(runId: string): Promise<RunSnapshot> {
    const resp = await fetch(`${this.baseUrl}/v1/runs/${runId}/snapshot`);
    if (!resp.ok) throw new Error(`snapshot failed: ${resp.status}`);
    return (await resp.json()) as RunSnapshot;
  }

  async stats(runId: string): Promise<Record<string, number>> {
    const resp = await fetch(`${this.baseUrl}/v1/runs/${runId}/stats`);
    if (!resp.ok) throw new Error(`stats failed: ${resp.status}`);
    return (await resp.json()) as Record<string, number>;
  }

  async command(
    runId: string,
    kind: CommandKind,
    payload: Record<string, unknown> = {},
  ): Promise<CommandResult> {
    const resp = await fetch(`${this.baseUrl}/v1/runs/${runId}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, payload }),
    });
    if (resp.status === 404) throw new Error("run not found");
    return (await resp.json()) as CommandResult;
  }

  streamUrl(runId: string): string {
    return `${this.baseUrl}/v1/runs/${runId}/stream`;
  }
}
