// Rendering: image heatmap with hover values, convergence chart, topology
// graph with clickable edges, parameter and event panels. Every control
// emits exactly one command; panels re-render only from snapshots.

import { decodeImage, EdgeInfo, RunSnapshot, StationInfo } from "./api.js";
import { PendingCommand, ViewState } from "./state.js";

const VIRIDIS: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

function colorFor(t: number): [number, number, number] {
  const x = Math.min(1, Math.max(0, t)) * (VIRIDIS.length - 1);
  const i = Math.min(VIRIDIS.length - 2, Math.floor(x));
  const f = x - i;
  const a = VIRIDIS[i];
  const b = VIRIDIS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

export interface CellHit {
  ix: number;
  iy: number;
  value: number;
  x: number;
  y: number;
}

export class ImagePane {
  values: Float32Array = new Float32Array(0);
  dims: number[] = [0, 0];
  spacing = 1;
  origin = [0, 0];

  constructor(
    readonly canvas: HTMLCanvasElement,
    readonly hoverLabel: HTMLElement,
    readonly onClickCell?: (hit: CellHit) => void,
  ) {
    canvas.addEventListener("mousemove", (ev) => {
      const hit = this.hitTest(ev.offsetX, ev.offsetY);
      this.hoverLabel.textContent = hit
        ? `cell (${hit.ix}, ${hit.iy}) = ${hit.value.toPrecision(5)} @ (${hit.x.toFixed(0)}, ${hit.y.toFixed(0)}) m`
        : "";
    });
    canvas.addEventListener("click", (ev) => {
      const hit = this.hitTest(ev.offsetX, ev.offsetY);
      if (hit && this.onClickCell) this.onClickCell(hit);
    });
  }

  hitTest(px: number, py: number): CellHit | null {
    const [nx, ny] = this.dims;
    if (!nx || !ny) return null;
    const ix = Math.floor((px / this.canvas.width) * nx);
    const iy = Math.floor((1 - py / this.canvas.height) * ny);
    if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) return null;
    return {
      ix,
      iy,
      value: this.values[ix * ny + iy],
      x: this.origin[0] + (ix + 0.5) * this.spacing,
      y: this.origin[1] + (iy + 0.5) * this.spacing,
    };
  }

  render(snapshot: RunSnapshot): void {
    this.values = decodeImage(snapshot.image);
    this.dims = snapshot.image.dims;
    this.spacing = snapshot.image.spacing;
    this.origin = snapshot.image.origin;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const [nx, ny] = this.dims;
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of this.values) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    const span = hi > lo ? hi - lo : 1;
    const w = this.canvas.width;
    const h = this.canvas.height;
    const img = ctx.createImageData(w, h);
    for (let py = 0; py < h; py++) {
      const iy = Math.min(ny - 1, Math.floor((1 - py / h) * ny));
      for (let px = 0; px < w; px++) {
        const ix = Math.min(nx - 1, Math.floor((px / w) * nx));
        const v = (this.values[ix * ny + iy] - lo) / span;
        const [r, g, b] = colorFor(v);
        const o = 4 * (py * w + px);
        img.data[o] = r;
        img.data[o + 1] = g;
        img.data[o + 2] = b;
        img.data[o + 3] = 255;
      }
    }
    ctx.putImageData(img, 0, 0);
  }
}

export class ConvergencePane {
  constructor(readonly canvas: HTMLCanvasElement) {}

  render(snapshot: RunSnapshot): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    const rows = snapshot.convergence_tail;
    if (!rows.length) return;
    const series = [
      { idx: 2, color: "#2a9d8f", label: "objective" },
      { idx: 3, color: "#e76f51", label: "consensus" },
    ];
    for (const { idx, color } of series) {
      const values = rows.map((r) => Math.log10(Math.max(r[idx], 1e-18)));
      const lo = Math.min(...values);
      const hi = Math.max(...values);
      const span = hi > lo ? hi - lo : 1;
      ctx.strokeStyle = color;
      ctx.beginPath();
      values.forEach((v, k) => {
        const x = (k / Math.max(1, values.length - 1)) * (w - 10) + 5;
        const y = h - 5 - ((v - lo) / span) * (h - 10);
        if (k === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    }
  }
}

export class TopologyPane {
  constructor(
    readonly svg: SVGSVGElement,
    readonly onEdgeClick: (edge: EdgeInfo) => void,
  ) {}

  render(stations: StationInfo[], edges: EdgeInfo[]): void {
    const doc = this.svg.ownerDocument;
    while (this.svg.firstChild) this.svg.removeChild(this.svg.firstChild);
    if (!stations.length) return;
    const xs = stations.map((s) => s.x);
    const ys = stations.map((s) => s.y);
    const lo = [Math.min(...xs), Math.min(...ys)];
    const hi = [Math.max(...xs), Math.max(...ys)];
    const pad = 12;
    const width = Number(this.svg.getAttribute("width") ?? 260);
    const height = Number(this.svg.getAttribute("height") ?? 260);
    const sx = (x: number) =>
      pad + ((x - lo[0]) / Math.max(1, hi[0] - lo[0])) * (width - 2 * pad);
    const sy = (y: number) =>
      height - pad - ((y - lo[1]) / Math.max(1, hi[1] - lo[1])) * (height - 2 * pad);
    const byId = new Map(stations.map((s) => [s.id, s]));
    const ns = "http://www.w3.org/2000/svg";
    for (const edge of edges) {
      const a = byId.get(edge.a);
      const b = byId.get(edge.b);
      if (!a || !b) continue;
      const line = doc.createElementNS(ns, "line");
      line.setAttribute("x1", String(sx(a.x)));
      line.setAttribute("y1", String(sy(a.y)));
      line.setAttribute("x2", String(sx(b.x)));
      line.setAttribute("y2", String(sy(b.y)));
      line.setAttribute("stroke", edge.down ? "#d62828" : "#8d99ae");
      line.setAttribute("stroke-width", edge.down ? "1.5" : "2.5");
      if (edge.down) line.setAttribute("stroke-dasharray", "4 3");
      line.setAttribute("data-edge", `${edge.a}-${edge.b}`);
      line.setAttribute("cursor", "pointer");
      line.addEventListener("click", () => this.onEdgeClick(edge));
      this.svg.appendChild(line);
    }
    for (const s of stations) {
      const dot = doc.createElementNS(ns, "circle");
      dot.setAttribute("cx", String(sx(s.x)));
      dot.setAttribute("cy", String(sy(s.y)));
      dot.setAttribute("r", "4");
      dot.setAttribute("fill", "#264653");
      dot.setAttribute("data-station", String(s.id));
      this.svg.appendChild(dot);
    }
  }
}

export function renderPending(container: HTMLElement, pending: PendingCommand[]): void {
  container.innerHTML = "";
  for (const cmd of pending) {
    const row = container.ownerDocument.createElement("div");
    row.className = `cmd cmd-${cmd.status}`;
    const reason = cmd.reason ? ` — ${cmd.reason}` : "";
    row.textContent = `${cmd.kind} [${cmd.status}]${reason}`;
    container.appendChild(row);
  }
}

export function renderBanner(banner: HTMLElement, state: ViewState): void {
  if (state.connection === "degraded") {
    banner.textContent = "connection lost — retrying; data shown may be stale";
    banner.style.display = "block";
  } else {
    banner.textContent = "";
    banner.style.display = "none";
  }
}

export function renderStatus(label: HTMLElement, snapshot: RunSnapshot): void {
  const metrics = Object.entries(snapshot.metrics)
    .map(([k, v]) => `${k}=${typeof v === "number" ? Number(v).toPrecision(4) : v}`)
    .join("  ");
  label.textContent =
    `${snapshot.pipeline} round ${snapshot.round} ` +
    `t=${snapshot.sim_time.toFixed(2)}s seq=${snapshot.seq}` +
    (snapshot.finished ? " [finished]" : "") +
    `  ${metrics}`;
}
