// Console bootstrap: wires the panels to a live run session.

import { ApiClient } from "./api.js";
import {
  ConvergencePane,
  ImagePane,
  TopologyPane,
  renderBanner,
  renderPending,
  renderStatus,
} from "./render.js";
import { Session } from "./session.js";
import { Store } from "./state.js";

function el<T extends Element>(selector: string): T {
  const node = document.querySelector<T>(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node;
}

export function bootstrap(): void {
  const store = new Store();
  const api = new ApiClient(
    (el<HTMLInputElement>("#server-url").value || "").replace(/\/$/, ""),
  );
  let session: Session | null = null;

  const imagePane = new ImagePane(
    el<HTMLCanvasElement>("#image-canvas"),
    el<HTMLElement>("#hover-label"),
    (hit) => {
      // event pane behavior: clicking the map injects a source there
      void session?.send("INJECT_EVENT", { x: hit.x, y: hit.y });
    },
  );
  const convergencePane = new ConvergencePane(el<HTMLCanvasElement>("#convergence-canvas"));
  const topologyPane = new TopologyPane(el<SVGSVGElement>("#topology-svg"), (edge) => {
    void session?.send(edge.down ? "RESTORE_LINK" : "FAIL_LINK", { a: edge.a, b: edge.b });
  });

  store.subscribe((state) => {
    renderBanner(el<HTMLElement>("#banner"), state);
    renderPending(el<HTMLElement>("#pending"), state.pending);
    if (state.snapshot) {
      renderStatus(el<HTMLElement>("#status"), state.snapshot);
      imagePane.render(state.snapshot);
      convergencePane.render(state.snapshot);
      topologyPane.render(state.snapshot.stations, state.snapshot.edges);
      const lam = state.snapshot.params["lambda"];
      if (typeof lam === "number" && document.activeElement?.id !== "lambda-slider") {
        el<HTMLInputElement>("#lambda-slider").value = String(lam);
        el<HTMLElement>("#lambda-value").textContent = lam.toPrecision(4);
      }
    }
  });

  el<HTMLButtonElement>("#connect").addEventListener("click", () => {
    void (async () => {
      session?.stop();
      const runId = el<HTMLInputElement>("#run-id").value.trim();
      session = new Session(api, runId, store);
      session.start();
    })();
  });

  el<HTMLButtonElement>("#start-run").addEventListener("click", () => {
    void (async () => {
      const scenario = JSON.parse(el<HTMLTextAreaElement>("#scenario-json").value);
      const runId = await api.startRun(scenario);
      el<HTMLInputElement>("#run-id").value = runId;
      session?.stop();
      session = new Session(api, runId, store);
      session.start();
    })();
  });

  el<HTMLInputElement>("#lambda-slider").addEventListener("change", (ev) => {
    const value = Number((ev.target as HTMLInputElement).value);
    el<HTMLElement>("#lambda-value").textContent = value.toPrecision(4);
    void session?.send("SET_LAMBDA", { value });
  });

  el<HTMLButtonElement>("#apply-band").addEventListener("click", () => {
    void session?.send("SET_BAND", {
      f_lo: Number(el<HTMLInputElement>("#band-lo").value),
      f_hi: Number(el<HTMLInputElement>("#band-hi").value),
    });
  });

  el<HTMLSelectElement>("#picker-select").addEventListener("change", (ev) => {
    void session?.send("SET_PICKER", { value: (ev.target as HTMLSelectElement).value });
  });

  el<HTMLSelectElement>("#algorithm-select").addEventListener("change", (ev) => {
    void session?.send("SET_ALGORITHM", { value: (ev.target as HTMLSelectElement).value });
  });

  el<HTMLSelectElement>("#resolution-select").addEventListener("change", (ev) => {
    void session?.send("SET_RESOLUTION", { value: Number((ev.target as HTMLSelectElement).value) });
  });

  el<HTMLButtonElement>("#pause").addEventListener("click", () => void session?.send("PAUSE"));
  el<HTMLButtonElement>("#resume").addEventListener("click", () => void session?.send("RESUME"));
  el<HTMLButtonElement>("#restart").addEventListener("click", () =>
    void session?.send("RESTART_SOLVE"),
  );
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  bootstrap();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", bootstrap);
}
