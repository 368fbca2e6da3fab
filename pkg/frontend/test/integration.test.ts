// Round-trip integration against a live control service (criterion: a
// SET_LAMBDA from the console changes the next snapshot's parameters and
// restarts the convergence curve; INJECT_EVENT shows up in a later MMI
// snapshot). Runs headless through the console's own API/session code.
import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, decodeImage } from "../src/api.js";
import { Session } from "../src/session.js";
import { Store } from "../src/state.js";

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;

const TOMO_SCENARIO = {
  seed: 11,
  pipeline: "TOMO_TT",
  extent: [1000.0, 1000.0],
  spacing: 100.0,
  background_velocity: 2000.0,
  checkerboard_pct: 10.0,
  checkerboard_block: 5,
  n_stations: 8,
  n_events: 6,
  sampling_rate: 500.0,
  snr: "inf",
  comm_range: 600.0,
  algorithm: "DGD_SYNC",
  solver: { source: "true_times", max_rounds: 20000 },
};

const MMI_SCENARIO = {
  seed: 5,
  pipeline: "MMI",
  extent: [1000.0, 1000.0],
  spacing: 100.0,
  background_velocity: 2000.0,
  n_stations: 8,
  n_events: 1,
  sampling_rate: 500.0,
  wavelet_freq: 12.0,
  snr: 20.0,
  trace_duration: 1.5,
  comm_range: 600.0,
  mmi: { refine: 2, cluster_size: 2 },
};

let service: ChildProcess;

async function waitReady(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/v1/runs/none/snapshot`);
      if (resp.status === 404) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("control service did not come up");
}

async function waitFor<T>(fn: () => Promise<T | null>, timeoutMs: number): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const out = await fn();
    if (out !== null) return out;
    await new Promise((r) => setTimeout(r, 300));
  }
  throw new Error("condition not met in time");
}

beforeAll(async () => {
  service = spawn("python3", ["-m", "seisnet.service", "--port", String(PORT)], {
    cwd: new URL("../..", import.meta.url).pathname,
    stdio: "ignore",
  });
  await waitReady();
}, 60_000);

afterAll(() => {
  service?.kill();
});

describe("console round-trip against a live control service", () => {
  it("SET_LAMBDA changes the next snapshot's params and restarts the curve", async () => {
    const api = new ApiClient(BASE);
    const runId = await api.startRun(TOMO_SCENARIO);
    const store = new Store();
    const session = new Session(api, runId, store, {
      pollIntervalMs: 200,
      eventSourceFactory: () => null,
    });
    session.start();
    const before = await waitFor(async () => {
      const s = store.get().snapshot;
      return s && s.round >= 20 ? s : null;
    }, 30_000);

    const result = await session.send("SET_LAMBDA", { value: 123.0 });
    expect(result.status).toBe("accepted");

    const after = await waitFor(async () => {
      const s = store.get().snapshot;
      return s && s.params["lambda"] === 123.0 ? s : null;
    }, 30_000);
    expect(after.params["lambda"]).toBe(123.0);
    // warm restart: the convergence curve starts over
    expect(after.round).toBeLessThan(before.round);
    expect(store.get().pending[0].status).toBe("accepted");
    session.stop();
  }, 90_000);

  it("INJECT_EVENT produces a source visible in a subsequent MMI snapshot", async () => {
    const api = new ApiClient(BASE);
    const runId = await api.startRun(MMI_SCENARIO);
    const store = new Store();
    const session = new Session(api, runId, store, {
      pollIntervalMs: 300,
      eventSourceFactory: () => null,
    });
    session.start();
    const first = await waitFor(async () => {
      const s = store.get().snapshot;
      return s && s.finished ? s : null;
    }, 120_000);

    const inject = await session.send("INJECT_EVENT", { x: 700.0, y: 300.0, t0: 0.5 });
    expect(inject.status).toBe("accepted");

    const after = await waitFor(async () => {
      const s = store.get().snapshot;
      return s && s.finished && s.seq > first.seq ? s : null;
    }, 120_000);

    const img = decodeImage(after.image);
    const [nx, ny] = after.image.dims;
    const spacing = after.image.spacing;
    const cx = Math.floor(700.0 / spacing);
    const cy = Math.floor(300.0 / spacing);
    let local = 0;
    let global = 0;
    for (let i = 0; i < nx; i++) {
      for (let j = 0; j < ny; j++) {
        const v = img[i * ny + j];
        if (v > global) global = v;
        if (Math.abs(i - cx) <= 2 && Math.abs(j - cy) <= 2 && v > local) local = v;
      }
    }
    expect(local).toBeGreaterThan(0.05 * global);
    session.stop();
  }, 300_000);

  it("rejected commands surface their reason", async () => {
    const api = new ApiClient(BASE);
    const runId = await api.startRun(MMI_SCENARIO);
    const store = new Store();
    const session = new Session(api, runId, store, {
      pollIntervalMs: 500,
      eventSourceFactory: () => null,
    });
    session.start();
    const result = await session.send("FAIL_LINK", { a: 0, b: 99 });
    expect(result.status).toBe("rejected");
    expect(result.reason).toContain("edge");
    session.stop();
  }, 60_000);
});
