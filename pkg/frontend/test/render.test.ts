// @vitest-environment happy-dom
import { describe, expect, it, vi } from "vitest";

import type { EdgeInfo, RunSnapshot } from "../src/api.js";
import { decodeImage } from "../src/api.js";
import { ImagePane, TopologyPane, renderBanner, renderPending } from "../src/render.js";
import { initialState, reduce } from "../src/state.js";

function b64(floats: number[]): string {
  const arr = new Float32Array(floats);
  const bytes = new Uint8Array(arr.buffer);
  let bin = "";
  for (const b of bytes) bin += String.fromCharCode(b);
  return btoa(bin);
}

function snapshotWith(values: number[], dims: number[]): RunSnapshot {
  return {
    run_id: "r",
    seq: 1,
    pipeline: "TOMO_TT",
    round: 1,
    sim_time: 0,
    finished: false,
    converged: false,
    params: {},
    image: { data_b64: b64(values), dims, spacing: 100, origin: [0, 0], dtype: "<f4" },
    convergence_tail: [],
    net_stats: {},
    metrics: {},
    stations: [],
    edges: [],
    seed: 1,
  };
}

describe("image pane", () => {
  it("decodes the snapshot image and reports hover cell values", () => {
    const canvas = document.createElement("canvas");
    canvas.width = 100;
    canvas.height = 100;
    const label = document.createElement("div");
    const pane = new ImagePane(canvas, label);
    pane.render(snapshotWith([1, 2, 3, 4], [2, 2]));
    expect(Array.from(pane.values)).toEqual([1, 2, 3, 4]);
    // canvas y is flipped: top-left pixel is cell (0, ny-1)
    const hit = pane.hitTest(10, 10)!;
    expect([hit.ix, hit.iy]).toEqual([0, 1]);
    expect(hit.value).toBe(2);
    expect([hit.x, hit.y]).toEqual([50, 150]);
    expect(pane.hitTest(500, 10)).toBeNull();
  });

  it("decodeImage round-trips float32 payloads", () => {
    const values = [0.5, -1.25, 3e4, 0];
    const out = decodeImage({ data_b64: b64(values), dims: [4], spacing: 1, origin: [0], dtype: "<f4" });
    expect(Array.from(out)).toEqual(values);
  });
});

describe("topology pane", () => {
  it("renders stations and clickable edges, failed links dashed", () => {
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg") as SVGSVGElement;
    svg.setAttribute("width", "200");
    svg.setAttribute("height", "200");
    const clicked: EdgeInfo[] = [];
    const pane = new TopologyPane(svg, (e) => clicked.push(e));
    const stations = [
      { id: 0, x: 0, y: 0 },
      { id: 1, x: 100, y: 0 },
      { id: 2, x: 100, y: 100 },
    ];
    const edges = [
      { a: 0, b: 1, down: false },
      { a: 1, b: 2, down: true },
    ];
    pane.render(stations, edges);
    const lines = svg.querySelectorAll("line");
    expect(lines).toHaveLength(2);
    expect(lines[1].getAttribute("stroke-dasharray")).toBe("4 3");
    expect(svg.querySelectorAll("circle")).toHaveLength(3);
    (lines[0] as unknown as HTMLElement).dispatchEvent(new Event("click"));
    expect(clicked).toEqual([{ a: 0, b: 1, down: false }]);
  });
});

describe("status widgets", () => {
  it("renders the degraded banner only when disconnected", () => {
    const banner = document.createElement("div");
    let state = initialState();
    renderBanner(banner, state);
    expect(banner.style.display).toBe("none");
    state = reduce(state, { type: "disconnected" });
    renderBanner(banner, state);
    expect(banner.style.display).toBe("block");
    expect(banner.textContent).toContain("stale");
  });

  it("renders pending commands with their status", () => {
    const container = document.createElement("div");
    let state = initialState();
    state = reduce(state, { type: "command-sent", kind: "PAUSE", payload: {}, now: 0 });
    state = reduce(state, {
      type: "command-result",
      id: state.pending[0].id,
      result: { status: "rejected", reason: "nope" },
    });
    renderPending(container, state.pending);
    expect(container.children).toHaveLength(1);
    expect(container.children[0].className).toContain("cmd-rejected");
    expect(container.children[0].textContent).toContain("nope");
  });
});
