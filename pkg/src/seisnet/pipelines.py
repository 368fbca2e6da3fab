"""End-to-end pipeline drivers shared by the CLI and the control service.

Each run advances in rounds so a live console can watch and steer it; a
headless run is simply the same loop driven to completion with zero
commands, which is what makes CLI and service outputs bit-identical.
"""

import numpy as np

from . import ansi as ansi_mod
from . import mmi as mmi_mod
from .consensus import (
    ConsensusProblem,
    StoppingRule,
    consensus_error,
    distributed_rounds,
    mean_model,
)
from .errors import ConfigError, InvalidArgumentError
from .forward import synthesize_trace
from .model import SeismicEvent, build_grid
from .netsim import NetworkSimulator, build_topology
from .sigproc import bandpass, condition, detect_event_window, pick_arrival
from .tomo import (
    TomoModel,
    assemble_system,
    checkerboard_score,
    ray_coverage,
    solve_centralized,
)

__all__ = ["make_run", "TomoTTRun", "MmiRun", "AnsiRun"]


def _trace_seed(scenario_seed, event_index, station_id):
    return np.random.SeedSequence([int(scenario_seed), 0x7ACE, int(event_index), int(station_id)])


ALGO_DEFAULTS = {
    "DGD_SYNC": {"step_schedule": "sqrt", "step_tau": 1500.0, "max_rounds": 14000},
    "ASYNC_BROADCAST": {
        "local_update": "gradient",
        "step_schedule": "sqrt",
        "step_mult": 8.0,
        "beta": 0.3,
        "local_iters": 10,
        "wake_mean": 0.02,
        "round_interval": 0.32,
        "max_rounds": 400,
    },
    "KACZMARZ_CAV": {"relaxation": 1.0, "relaxation_decay": 0.005, "max_rounds": 1000},
}


class TomoTTRun:
    """Travel-time tomography: synthesize, pick, locate, assemble, solve."""

    pipeline = "TOMO_TT"

    def __init__(self, scenario):
        self.scenario = scenario
        self.truth_grid = scenario.build_grid()
        self.grid = build_grid(
            scenario.extent, scenario.spacing, scenario.background_velocity
        )
        self.stations = scenario.build_stations(self.truth_grid)
        self.true_events = scenario.build_events(self.truth_grid)
        solver = dict(scenario.solver)
        self.params = {
            "lambda": scenario.lam,
            # keep the band wide: narrowband noise correlates samples and
            # degrades the energy-ratio statistics behind the pickers
            "band": tuple(solver.get("band", (2.0, 100.0))),
            "picker": scenario.picker,
            "algorithm": scenario.algorithm,
            "search_spacing": float(solver.get("search_spacing", 25.0)),
            "source": solver.get("source", "picks"),
            "resolution": scenario.spacing,
        }
        self.lambda_scale = float(solver.get("lambda_scale", 0.1))
        self.solver_cfg = {
            k: v
            for k, v in solver.items()
            if k not in ("band", "search_spacing", "source", "max_rounds",
                         "model_change_tol", "consensus_tol", "window", "lambda_scale")
        }
        defaults = ALGO_DEFAULTS[scenario.algorithm]
        self.stop = StoppingRule(
            max_rounds=int(solver.get("max_rounds", defaults["max_rounds"])),
            model_change_tol=float(solver.get("model_change_tol", 1e-6)),
            consensus_tol=float(solver.get("consensus_tol", 1e-4)),
            window=int(solver.get("window", 10)),
        )
        self._traces = None
        self.round_index = 0
        self.log = []
        self.finished = False
        self._changes = []
        self._prev_mean = None
        self._prepare()
        self._start(states=None)

    # -- setup ----------------------------------------------------------

    def _synthesize(self):
        sc = self.scenario
        traces = {}
        for ei, event in enumerate(self.true_events):
            for st in self.stations:
                traces[(ei, st.id)] = synthesize_trace(
                    event,
                    st,
                    self.truth_grid,
                    sc.sampling_rate,
                    wavelet_freq=sc.wavelet_freq,
                    snr=sc.snr,
                    duration=sc.trace_duration,
                    seed=_trace_seed(sc.seed, ei, st.id),
                )
        return traces

    def _prepare(self):
        sc = self.scenario
        if self.params["source"] == "true_times":
            # noise-free consistency benchmark: rays and times from the truth
            self.system = assemble_system(
                self.true_events, self.stations, self.truth_grid,
                lam=self.params["lambda"], lam_scale=self.lambda_scale,
            )
            self.picks = []
        else:
            if self._traces is None:
                self._traces = self._synthesize()
            f_lo, f_hi = self.params["band"]
            arrivals = {}
            picks = []
            for (ei, sid), raw in self._traces.items():
                tr = bandpass(condition(raw), f_lo, f_hi)
                # time framing gates the picker: only pick inside a detected
                # event window, which rejects rare noise-induced triggers
                windows = detect_event_window(tr, threshold=5.0, min_gap=0.5)
                pick = None
                if windows:
                    w0, w1 = windows[0]
                    i0 = max(0, int((w0 - 0.2 - tr.start_time) * tr.sampling_rate))
                    i1 = min(tr.n, int((w1 + 0.2 - tr.start_time) * tr.sampling_rate))
                    segment = tr.with_samples(
                        tr.samples[i0:i1],
                        start_time=tr.start_time + i0 / tr.sampling_rate,
                    )
                    if segment.n > 8:
                        pick = pick_arrival(segment, self.params["picker"])
                if pick is not None:
                    arrivals[(ei, sid)] = pick.arrival_time
                    picks.append((ei, pick))
            self.picks = picks
            by_station = {s.id: s for s in self.stations}
            located = []
            kept_arrivals = {}
            from .tomo import locate_event

            for ei in range(len(self.true_events)):
                ev_picks = [p for e, p in picks if e == ei]
                if len(ev_picks) < 3:
                    continue
                loc, t0 = locate_event(
                    ev_picks, self.stations, self.grid, self.params["search_spacing"]
                )
                located.append(SeismicEvent(hypocenter=loc, origin_time=t0))
                for p in ev_picks:
                    kept_arrivals[(len(located) - 1, p.station_id)] = p.arrival_time
            if not located:
                raise InvalidArgumentError("no events could be located")
            self.system = assemble_system(
                located, self.stations, self.grid, lam=self.params["lambda"],
                arrivals=kept_arrivals, lam_scale=self.lambda_scale,
            )
        self.params["lambda"] = self.system.lam
        node_of_row = [sid for (_, sid) in self.system.row_meta]
        self.problem = ConsensusProblem.from_system(self.system, node_of_row)
        self.oracle = solve_centralized(self.system)
        topo = build_topology(
            self.stations, self.scenario.comm_range, drop_prob=self.scenario.drop_prob
        )
        self.net = NetworkSimulator(topo, seed=self.scenario.seed)
        cfg = ALGO_DEFAULTS[self.scenario.algorithm]
        interval = self.solver_cfg.get("round_interval", cfg.get("round_interval", 0.02))
        for entry in self.scenario.faults:
            round_at, kind, a, b = entry
            when = (float(round_at) - 0.5) * interval
            if kind == "FAIL_LINK":
                self.net.schedule_command(when, lambda s, a=a, b=b: s.fail_link(a, b))
            elif kind == "RESTORE_LINK":
                self.net.schedule_command(when, lambda s, a=a, b=b: s.restore_link(a, b))
            else:
                raise ConfigError("faults", f"unknown fault kind {kind!r}")

    def _start(self, states):
        cfg = {**ALGO_DEFAULTS[self.scenario.algorithm], **self.solver_cfg,
               "seed": self.scenario.seed}
        cfg.pop("max_rounds", None)
        self._gen = distributed_rounds(
            self.problem, self.scenario.algorithm, self.net, config=cfg, states=states
        )
        self._states = states
        self.log = []
        self._changes = []
        self._prev_mean = None
        self.round_index = 0
        self.finished = False
        self.converged = False

    # -- stepping -------------------------------------------------------

    def advance_round(self):
        if self.finished:
            return False
        k, states = next(self._gen)
        self._states = states
        self.round_index += 1
        mean = mean_model(states)
        cons = consensus_error(states)
        if self._prev_mean is None:
            self._changes.append(np.inf)
        else:
            denom = max(1.0, float(np.linalg.norm(mean)))
            self._changes.append(float(np.linalg.norm(mean - self._prev_mean)) / denom)
        self._prev_mean = mean
        obj = self.problem.objective(mean)
        stats = self.net.get_stats()
        self.log.append((self.round_index, self.net.time, obj, cons, stats.bytes_total))
        window = self._changes[-self.stop.window :]
        if (
            len(self._changes) >= self.stop.window
            and max(window) < self.stop.model_change_tol
            and cons < self.stop.consensus_tol
        ):
            self.converged = True
            self.finished = True
        elif self.round_index >= self.stop.max_rounds:
            self.finished = True
        if self.finished:
            self._gen.close()
        return not self.finished

    # -- live control ---------------------------------------------------

    def apply_command(self, kind, payload):
        if kind == "SET_LAMBDA":
            lam = float(payload["value"])
            if lam < 0:
                raise InvalidArgumentError("lambda must be >= 0")
            self.params["lambda"] = lam
            self._gen.close()
            self._prepare()
            self._start(states=self._states)  # warm start from current estimate
        elif kind == "SET_BAND":
            lo, hi = float(payload["f_lo"]), float(payload["f_hi"])
            if not 0 < lo < hi < self.scenario.sampling_rate / 2:
                raise InvalidArgumentError("band must satisfy 0 < lo < hi < Nyquist")
            self.params["band"] = (lo, hi)
            self._gen.close()
            self._prepare()
            self._start(states=self._states)
        elif kind == "SET_PICKER":
            method = payload["value"]
            if method not in ("STA_LTA", "MER", "AIC"):
                raise InvalidArgumentError(f"unknown picker {method!r}")
            self.params["picker"] = method
            self._gen.close()
            self._prepare()
            self._start(states=self._states)
        elif kind == "SET_ALGORITHM":
            algo = payload["value"]
            if algo not in ALGO_DEFAULTS:
                raise InvalidArgumentError(f"unknown algorithm {algo!r}")
            object.__setattr__(self.scenario, "algorithm", algo)
            self.params["algorithm"] = algo
            defaults = ALGO_DEFAULTS[algo]
            self.stop = StoppingRule(
                max_rounds=int(self.scenario.solver.get("max_rounds", defaults["max_rounds"])),
                model_change_tol=self.stop.model_change_tol,
                consensus_tol=self.stop.consensus_tol,
                window=self.stop.window,
            )
            self._gen.close()
            self._prepare()
            self._start(states=self._states)
        elif kind == "SET_RESOLUTION":
            spacing = float(payload["value"])
            object.__setattr__(self.scenario, "spacing", spacing)
            self.params["resolution"] = spacing
            self._gen.close()
            self.truth_grid = self.scenario.build_grid()
            self.grid = build_grid(
                self.scenario.extent, spacing, self.scenario.background_velocity
            )
            self._traces = None
            self._prepare()
            self._start(states=None)  # model length changed: cold restart
        elif kind == "INJECT_EVENT":
            x, y = float(payload["x"]), float(payload["y"])
            events = list(self.true_events)
            events.append(SeismicEvent(hypocenter=(x, y), origin_time=float(payload.get("t0", 0.2))))
            self.true_events = events
            self._traces = None
            self._gen.close()
            self._prepare()
            self._start(states=self._states)
        elif kind == "FAIL_LINK":
            self.net.fail_link(int(payload["a"]), int(payload["b"]))
        elif kind == "RESTORE_LINK":
            self.net.restore_link(int(payload["a"]), int(payload["b"]))
        elif kind == "RESTART_SOLVE":
            self._gen.close()
            self._start(states=None)
        else:
            raise InvalidArgumentError(f"command {kind!r} not supported by TOMO_TT")

    # -- readout --------------------------------------------------------

    def current_model(self):
        if self._states is None:
            return TomoModel(grid=self.grid, slowness=self.system.s_ref.copy())
        return TomoModel(grid=self.grid, slowness=mean_model(self._states))

    def image(self):
        model = self.current_model()
        return (1.0 / model.slowness).reshape(self.grid.dims)

    def metrics(self):
        model = self.current_model()
        out = {
            "rounds": self.round_index,
            "converged": bool(self.converged),
            "final_objective": float(self.problem.objective(model.slowness)),
            "final_consensus_error": float(consensus_error(self._states))
            if self._states
            else 0.0,
            "rel_error_vs_centralized": float(
                np.linalg.norm(model.slowness - self.oracle.slowness)
                / np.linalg.norm(self.oracle.slowness)
            ),
        }
        if self.scenario.checkerboard_pct:
            truth = TomoModel(
                grid=self.truth_grid, slowness=self.truth_grid.slowness.reshape(-1)
            )
            if model.slowness.shape == truth.slowness.reshape(-1).shape:
                out["checkerboard_score"] = float(
                    checkerboard_score(model, truth, ray_coverage(self.system))
                )
        return out

    def artifacts(self):
        out = {
            "images": {
                "model_velocity": (self.image(), {"kind": "velocity_m_per_s"}),
                "truth_velocity": (np.array(self.truth_grid.velocity), {"kind": "velocity_m_per_s"}),
            },
            "convergence": list(self.log),
            "picks": [p for _, p in self.picks],
            "net_stats": self.net.get_stats().snapshot(),
            "metrics": self.metrics(),
        }
        return out


class MmiRun:
    """Migration imaging: one cluster back-propagated and stacked per round."""

    pipeline = "MMI"

    def __init__(self, scenario):
        self.scenario = scenario
        mmi_cfg = dict(scenario.mmi)
        self.refine = int(mmi_cfg.get("refine", 4))
        self.cluster_size = int(mmi_cfg.get("cluster_size", 2))
        self.detect_threshold = float(mmi_cfg.get("detect_threshold", 5.0))
        self.truth_grid = scenario.build_grid()
        self.grid = build_grid(
            scenario.extent,
            scenario.spacing / self.refine,
            scenario.background_velocity,
        )
        self.stations = scenario.build_stations(self.truth_grid)
        if scenario.n_events >= 1:
            self.events = [scenario.build_events(self.truth_grid)[0]]
        else:
            self.events = []
        self.params = {
            "refine": self.refine,
            "cluster_size": self.cluster_size,
            "mode": mmi_cfg.get("mode", "SOURCELESS"),
        }
        self.round_index = 0
        self.log = []
        self.finished = False
        self._prepare()

    def _prepare(self):
        sc = self.scenario
        self.clusters = mmi_mod.assign_clusters(
            self.stations, sc.comm_range, self.cluster_size
        )
        topo = build_topology(self.stations, sc.comm_range, drop_prob=sc.drop_prob)
        self.net = NetworkSimulator(topo, seed=sc.seed)
        self.traces = {}
        for st in self.stations:
            samples = None
            for ei, ev in enumerate(self.events):
                tr = synthesize_trace(
                    ev, st, self.truth_grid, sc.sampling_rate,
                    wavelet_freq=sc.wavelet_freq, snr=sc.snr,
                    duration=sc.trace_duration, seed=_trace_seed(sc.seed, ei, st.id),
                )
                samples = tr.samples if samples is None else samples + tr.samples
                base = tr
            self.traces[st.id] = base.with_samples(samples)
        w0, w1 = np.inf, -np.inf
        for tr in self.traces.values():
            for a, b in detect_event_window(tr, threshold=self.detect_threshold, min_gap=0.5):
                w0, w1 = min(w0, a), max(w1, b)
        if not np.isfinite(w0):
            raise InvalidArgumentError("no event energy detected in any trace")
        self.window = (w0, w1)
        dt = 1.0 / sc.sampling_rate
        span = max(self.grid.extent)
        self.nt = int((w1 - w0) * sc.sampling_rate) + int(
            np.ceil(np.sqrt(2.0) * span / sc.background_velocity / dt)
        ) + 25
        self.cluster_images = []
        self.round_index = 0
        self.log = []
        self.finished = False

    def advance_round(self):
        if self.finished:
            return False
        cluster = self.clusters[self.round_index]
        sc = self.scenario
        dt = 1.0 / sc.sampling_rate
        by_id = {s.id: s for s in self.stations}
        volumes = []
        for sid in cluster["members"]:
            wf = mmi_mod.reverse_extrapolate(
                self.traces[sid], by_id[sid], self.grid, dt, self.window, nt=self.nt
            )
            vol = mmi_mod.image_per_receiver(wf, "SOURCELESS")
            volumes.append(vol)
            if sid != cluster["head"]:
                self.net.send(sid, cluster["head"], vol.values, kind="mmi-volume")
        self.net.step_until(self.net.time + 0.05)
        coherent = mmi_mod.image_sum(volumes)
        squared = mmi_mod.image_per_receiver(
            _as_wavefield(coherent, dt), "INTERFEROMETRIC", source_field=coherent.values
        )
        self.cluster_images.append(
            mmi_mod.cluster_temporal_stack([squared], cluster_id=cluster["head"])
        )
        self.round_index += 1
        stats = self.net.get_stats()
        self.log.append((self.round_index, self.net.time, 0.0, 0.0, stats.bytes_total))
        self.finished = self.round_index >= len(self.clusters)
        return not self.finished

    def apply_command(self, kind, payload):
        if kind == "INJECT_EVENT":
            x, y = float(payload["x"]), float(payload["y"])
            self.events.append(
                SeismicEvent(hypocenter=(x, y), origin_time=float(payload.get("t0", 0.2)))
            )
            self._prepare()
        elif kind == "FAIL_LINK":
            self.net.fail_link(int(payload["a"]), int(payload["b"]))
        elif kind == "RESTORE_LINK":
            self.net.restore_link(int(payload["a"]), int(payload["b"]))
        elif kind == "RESTART_SOLVE":
            self._prepare()
        elif kind == "SET_RESOLUTION":
            self.refine = int(payload["value"])
            self.params["refine"] = self.refine
            self.grid = build_grid(
                self.scenario.extent,
                self.scenario.spacing / self.refine,
                self.scenario.background_velocity,
            )
            self._prepare()
        else:
            raise InvalidArgumentError(f"command {kind!r} not supported by MMI")

    def image(self):
        if not self.cluster_images:
            return np.zeros(self.grid.dims)
        return mmi_mod.cross_cluster_product(self.cluster_images).values

    def located_source(self):
        if not self.cluster_images:
            return None
        final = mmi_mod.cross_cluster_product(self.cluster_images)
        return mmi_mod.locate_max(final)

    def metrics(self):
        out = {"rounds": self.round_index, "converged": bool(self.finished)}
        point = self.located_source()
        if point is not None and self.events:
            out["located_x"], out["located_y"] = point
            true_cell = self.grid.cell_of(self.events[0].hypocenter)
            got_cell = self.grid.cell_of(point)
            out["cell_error"] = int(
                max(abs(true_cell[0] - got_cell[0]), abs(true_cell[1] - got_cell[1]))
            )
        return out

    def artifacts(self):
        return {
            "images": {"mmi_image": (self.image(), {"kind": "stacked_image"})},
            "convergence": list(self.log),
            "picks": [],
            "net_stats": self.net.get_stats().snapshot(),
            "metrics": self.metrics(),
        }


def _as_wavefield(volume, dt):
    from .forward import Wavefield

    return Wavefield(grid=volume.grid, dt=dt, frames=volume.values)


class AnsiRun:
    """Ambient-noise imaging: one virtual source per round."""

    pipeline = "ANSI"

    def __init__(self, scenario):
        self.scenario = scenario
        cfg = dict(scenario.ansi)
        self.band = tuple(cfg.get("band", (3.0, 10.0)))
        self.synth_band = tuple(cfg.get("synth_band", (2.0, 0.96 * scenario.sampling_rate / 2)))
        self.duration = float(cfg.get("duration", 240.0))
        self.n_segments = int(cfg.get("n_segments", 60))
        self.n_sources = int(cfg.get("n_sources", 720))
        self.max_lag = float(cfg.get("max_lag", 1.9))
        self.velocity_window = tuple(cfg.get("velocity_window", (1200.0, 3500.0)))
        self.support_radius = float(cfg.get("support_radius", 350.0))
        self.min_offset = float(cfg.get("min_offset", 500.0))
        self.mode = cfg.get("mode", "EIKONAL")
        self.grid = scenario.build_grid()
        self.stations = scenario.build_stations(self.grid)
        self.params = {"band": self.band, "mode": self.mode}
        self.round_index = 0
        self.log = []
        self.finished = False
        self._prepare()

    def _prepare(self):
        sc = self.scenario
        topo = build_topology(self.stations, sc.comm_range, drop_prob=sc.drop_prob)
        self.net = NetworkSimulator(topo, seed=sc.seed)
        self.field = ansi_mod.synthesize_noise(
            self.stations,
            self.duration,
            sc.sampling_rate,
            sc.background_velocity,
            self.synth_band,
            n_sources=self.n_sources,
            seed=sc.seed,
        )
        self._pair_cache = {}
        self.maps = []
        self.round_index = 0
        self.log = []
        self.finished = False

    def _gather(self, center):
        missing = [
            st for st in self.stations
            if (min(center.id, st.id), max(center.id, st.id)) not in self._pair_cache
        ]
        if missing:
            gathers = ansi_mod.virtual_source_gather(
                center, self.field, self.n_segments, self.max_lag
            )
            for sid, corr in gathers.items():
                key = (min(center.id, sid), max(center.id, sid))
                self._pair_cache[key] = corr
        return {
            st.id: self._pair_cache[(min(center.id, st.id), max(center.id, st.id))]
            for st in self.stations
        }

    def advance_round(self):
        if self.finished:
            return False
        center = self.stations[self.round_index]
        gathers = self._gather(center)
        omega = 2.0 * np.pi * 0.5 * (self.band[0] + self.band[1])
        measurements = {}
        pos = {s.id: np.asarray(s.position) for s in self.stations}
        for st in self.stations:
            if st.id == center.id:
                continue
            d = float(np.linalg.norm(pos[st.id] - pos[center.id]))
            m = ansi_mod.extract_travel_time(
                gathers[st.id], self.band, distance=d, velocity_window=self.velocity_window
            )
            if m.reliable:
                measurements[st.id] = m
            # charge the correlation exchange when the pair are radio neighbors
            if self.net.topology.has_edge(center.id, st.id):
                self.net.send(st.id, center.id, gathers[st.id].values, kind="ansi-corr")
        self.net.step_until(self.net.time + 0.05)
        kept = [center] + [s for s in self.stations if s.id in measurements]
        surface = ansi_mod.build_surface(center, kept, measurements, omega)
        self.maps.append(
            ansi_mod.eikonal_map(
                surface,
                self.grid,
                mode=self.mode,
                support_radius=self.support_radius,
                min_offset=self.min_offset,
                band=self.band,
            )
        )
        self.round_index += 1
        stats = self.net.get_stats()
        self.log.append((self.round_index, self.net.time, 0.0, 0.0, stats.bytes_total))
        self.finished = self.round_index >= len(self.stations)
        return not self.finished

    def apply_command(self, kind, payload):
        if kind == "SET_BAND":
            lo, hi = float(payload["f_lo"]), float(payload["f_hi"])
            if not 0 < lo < hi < self.scenario.sampling_rate / 2:
                raise InvalidArgumentError("band must satisfy 0 < lo < hi < Nyquist")
            self.band = (lo, hi)
            self.params["band"] = self.band
            # correlations stay valid; remeasure and restack
            self.maps = []
            self.round_index = 0
            self.log = []
            self.finished = False
        elif kind == "FAIL_LINK":
            self.net.fail_link(int(payload["a"]), int(payload["b"]))
        elif kind == "RESTORE_LINK":
            self.net.restore_link(int(payload["a"]), int(payload["b"]))
        elif kind == "RESTART_SOLVE":
            self._prepare()
        else:
            raise InvalidArgumentError(f"command {kind!r} not supported by ANSI")

    def stacked(self):
        if not self.maps:
            return None
        return ansi_mod.stack_maps(self.maps)

    def image(self):
        stacked = self.stacked()
        if stacked is None:
            return np.zeros(self.grid.dims)
        return stacked.c

    def metrics(self):
        out = {"rounds": self.round_index, "converged": bool(self.finished)}
        stacked = self.stacked()
        if stacked is not None and self.grid.is_uniform():
            covered = stacked.hits > 0
            if np.any(covered):
                c_true = float(self.grid.velocity.flat[0])
                err = np.abs(stacked.c[covered] - c_true) / c_true
                out["median_velocity_error"] = float(np.median(err))
                out["covered_cells"] = int(covered.sum())
        return out

    def artifacts(self):
        stacked = self.stacked()
        images = {"phase_velocity": (self.image(), {"kind": "velocity_m_per_s", "band": list(self.band)})}
        if stacked is not None:
            images["hit_count"] = (stacked.hits.astype(float), {"kind": "hits"})
        return {
            "images": images,
            "convergence": list(self.log),
            "picks": [],
            "net_stats": self.net.get_stats().snapshot(),
            "metrics": self.metrics(),
        }


def make_run(scenario):
    if scenario.pipeline == "TOMO_TT":
        return TomoTTRun(scenario)
    if scenario.pipeline == "MMI":
        return MmiRun(scenario)
    if scenario.pipeline == "ANSI":
        return AnsiRun(scenario)
    raise ConfigError("pipeline", f"unknown pipeline {scenario.pipeline!r}")
