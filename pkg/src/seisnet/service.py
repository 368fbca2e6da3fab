"""HTTP control service: start runs, watch snapshots, steer parameters.

All mutation funnels through a per-run command queue drained between
rounds, so any interleaving of client commands is serialized; snapshots
are immutable values emitted at round boundaries.  A run driven with zero
commands produces bit-identical results to the CLI run of the same
scenario because both loop the same pipeline driver.
"""

import base64
import json
import threading
import uuid

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse, StreamingResponse

from .errors import ConfigError, InvalidArgumentError
from .model import Scenario
from .pipelines import make_run

__all__ = ["create_app", "RunHandle"]

SNAPSHOT_EVERY = 5

COMMAND_KINDS = (
    "SET_LAMBDA",
    "SET_BAND",
    "SET_PICKER",
    "SET_ALGORITHM",
    "SET_RESOLUTION",
    "INJECT_EVENT",
    "FAIL_LINK",
    "RESTORE_LINK",
    "PAUSE",
    "RESUME",
    "RESTART_SOLVE",
)

ALWAYS = ("FAIL_LINK", "RESTORE_LINK", "PAUSE", "RESUME", "RESTART_SOLVE")
SUPPORTED = {
    "TOMO_TT": ALWAYS + ("SET_LAMBDA", "SET_BAND", "SET_PICKER", "SET_ALGORITHM",
                          "SET_RESOLUTION", "INJECT_EVENT"),
    "MMI": ALWAYS + ("INJECT_EVENT", "SET_RESOLUTION"),
    "ANSI": ALWAYS + ("SET_BAND",),
}


def _encode_image(values, spacing, origin):
    raw = np.ascontiguousarray(values, dtype="<f4").tobytes()
    return {
        "data_b64": base64.b64encode(raw).decode("ascii"),
        "dims": list(np.asarray(values).shape),
        "spacing": spacing,
        "origin": list(origin),
        "dtype": "<f4",
    }


class RunHandle:
    """One live run: a pipeline driver stepped by a worker thread."""

    def __init__(self, scenario, snapshot_every=SNAPSHOT_EVERY):
        self.run_id = uuid.uuid4().hex[:12]
        self.scenario = scenario
        self.snapshot_every = snapshot_every
        self.run = make_run(scenario)
        self.lock = threading.Condition()
        self.commands = []
        self.snapshots = []
        self.paused = False
        self.stopping = False
        self.last_net_stats = self.run.net.get_stats().snapshot()
        with self.lock:
            self._emit_snapshot()
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self.thread.start()

    # -- worker -----------------------------------------------------------

    def _loop(self):
        while True:
            with self.lock:
                while True:
                    self._drain_commands_locked()
                    if self.stopping:
                        return
                    if not self.paused and not self.run.finished:
                        break
                    self.lock.wait(timeout=0.2)
            progressed = self.run.advance_round()
            with self.lock:
                self.last_net_stats = self.run.net.get_stats().snapshot()
                if self.run.round_index % self.snapshot_every == 0 or not progressed:
                    self._emit_snapshot()

    def _drain_commands_locked(self):
        while self.commands:
            kind, payload = self.commands.pop(0)
            if kind == "PAUSE":
                self.paused = True
            elif kind == "RESUME":
                self.paused = False
            else:
                try:
                    self.run.apply_command(kind, payload)
                    self._emit_snapshot()
                except Exception:
                    # validated before enqueue; execution errors leave the
                    # run unchanged
                    pass

    def _emit_snapshot(self):
        run = self.run
        seq = len(self.snapshots)
        snap = {
            "run_id": self.run_id,
            "seq": seq,
            "pipeline": run.pipeline,
            "round": run.round_index,
            "sim_time": float(run.net.time),
            "finished": bool(run.finished),
            "converged": bool(getattr(run, "converged", run.finished)),
            "params": _jsonable(run.params),
            "image": _encode_image(run.image(), run.grid.spacing, run.grid.origin),
            "convergence_tail": [list(map(float, row)) for row in run.log[-40:]],
            "net_stats": run.net.get_stats().snapshot(),
            "seed": self.scenario.seed,
            "metrics": _jsonable(run.metrics()),
            "stations": [
                {"id": s.id, "x": s.position[0], "y": s.position[1]}
                for s in run.stations
            ],
            "edges": [
                {"a": a, "b": b, "down": (a, b) in run.net._failed}
                for (a, b) in sorted(run.net.topology.edges)
            ],
        }
        self.snapshots.append(snap)
        self.lock.notify_all()

    # -- API --------------------------------------------------------------

    def validate(self, kind, payload):
        if kind not in COMMAND_KINDS:
            return f"unknown command kind {kind!r}"
        if kind not in SUPPORTED[self.run.pipeline]:
            return f"{kind} is not supported by the {self.run.pipeline} pipeline"
        try:
            if kind == "SET_LAMBDA":
                if float(payload["value"]) < 0:
                    return "lambda must be >= 0"
            elif kind == "SET_BAND":
                lo, hi = float(payload["f_lo"]), float(payload["f_hi"])
                if not 0 < lo < hi < self.scenario.sampling_rate / 2:
                    return "band must satisfy 0 < lo < hi < Nyquist"
            elif kind == "SET_PICKER":
                if payload["value"] not in ("STA_LTA", "MER", "AIC"):
                    return "unknown picker"
            elif kind == "SET_ALGORITHM":
                if payload["value"] not in ("DGD_SYNC", "ASYNC_BROADCAST", "KACZMARZ_CAV"):
                    return "unknown algorithm"
            elif kind == "SET_RESOLUTION":
                if float(payload["value"]) <= 0:
                    return "resolution must be > 0"
            elif kind == "INJECT_EVENT":
                x, y = float(payload["x"]), float(payload["y"])
                if not self.run.grid.contains((x, y)):
                    return "event must lie inside the grid extent"
            elif kind in ("FAIL_LINK", "RESTORE_LINK"):
                a, b = int(payload["a"]), int(payload["b"])
                if not self.run.net.topology.has_edge(a, b):
                    return f"no edge between {a} and {b}"
        except (KeyError, TypeError, ValueError) as exc:
            return f"invalid payload: {exc}"
        return None

    def submit(self, kind, payload):
        reason = self.validate(kind, payload)
        if reason is not None:
            return {"status": "rejected", "reason": reason}
        with self.lock:
            self.commands.append((kind, payload))
            self.lock.notify_all()
        return {"status": "accepted"}

    def latest(self):
        with self.lock:
            return self.snapshots[-1]

    def stream(self):
        """Yield every snapshot exactly once, in order, as SSE events."""
        idx = 0
        while True:
            with self.lock:
                while idx >= len(self.snapshots):
                    if self.run.finished and not self.commands:
                        return
                    self.lock.wait(timeout=0.5)
                snap = self.snapshots[idx]
            idx += 1
            yield f"data: {json.dumps(snap, sort_keys=True)}\n\n"
            if snap["finished"]:
                return

    def wait_finished(self, timeout=600.0):
        deadline = timeout
        with self.lock:
            while not self.run.finished and deadline > 0:
                self.lock.wait(timeout=0.2)
                deadline -= 0.2
        return self.run.finished

    def shutdown(self):
        with self.lock:
            self.stopping = True
            self.lock.notify_all()


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: float(o) if hasattr(o, "__float__") else str(o)))


def create_app():
    app = FastAPI(title="seisnet control service")
    runs = {}

    @app.post("/v1/runs")
    def start_run(scenario: dict):
        try:
            sc = Scenario.from_json_dict(scenario)
            handle = RunHandle(sc)
        except (ConfigError, InvalidArgumentError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        runs[handle.run_id] = handle
        return {"run_id": handle.run_id}

    @app.get("/v1/runs/{run_id}/snapshot")
    def snapshot(run_id: str):
        handle = runs.get(run_id)
        if handle is None:
            return JSONResponse({"error": "run not found"}, status_code=404)
        return handle.latest()

    @app.get("/v1/runs/{run_id}/stats")
    def stats(run_id: str):
        handle = runs.get(run_id)
        if handle is None:
            return JSONResponse({"error": "run not found"}, status_code=404)
        with handle.lock:
            return dict(handle.last_net_stats)

    @app.post("/v1/runs/{run_id}/command")
    def command(run_id: str, body: dict):
        handle = runs.get(run_id)
        if handle is None:
            return JSONResponse({"error": "run not found"}, status_code=404)
        kind = body.get("kind")
        payload = body.get("payload", {})
        result = handle.submit(kind, payload)
        status = 200 if result["status"] == "accepted" else 422
        return JSONResponse(result, status_code=status)

    @app.get("/v1/runs/{run_id}/stream")
    def stream(run_id: str):
        handle = runs.get(run_id)
        if handle is None:
            return JSONResponse({"error": "run not found"}, status_code=404)
        return StreamingResponse(handle.stream(), media_type="text/event-stream")

    app.state.runs = runs
    return app


def main():
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="seisnet-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8040)
    args = parser.parse_args()
    uvicorn.run(create_app(), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
