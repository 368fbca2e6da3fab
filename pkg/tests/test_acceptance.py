"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see every line.  The
desk scenario for the distributed-vs-centralized criterion is the 20x20
grid with 16 perimeter nodes and 30 events; other criteria use the bundled
scenario files.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from seisnet.cli import run_scenario
from seisnet.consensus import ConsensusProblem, StoppingRule, run_distributed
from seisnet.errors import ConvergenceFailure
from seisnet.forward import Trace
from seisnet.model import (
    apply_checkerboard,
    build_grid,
    perimeter_stations,
    random_interior_events,
)
from seisnet.netsim import NetworkSimulator, build_topology
from seisnet.sigproc import pick_arrival
from seisnet.tomo import TomoSystem, assemble_system, solve_centralized

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

DESK_CONFIGS = {
    "DGD_SYNC": ({"step_schedule": "sqrt", "step_tau": 1500.0}, 12000),
    "ASYNC_BROADCAST": (
        {
            "local_update": "gradient",
            "step_schedule": "sqrt",
            "step_mult": 8.0,
            "beta": 0.3,
            "local_iters": 10,
            "wake_mean": 0.02,
            "round_interval": 0.32,
        },
        400,
    ),
    "KACZMARZ_CAV": ({"relaxation": 1.0, "relaxation_decay": 0.005}, 1200),
}


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    return ok


@pytest.fixture(scope="module")
def desk():
    """Seeded desk instance: 20x20 cells, 16 perimeter nodes, 30 events."""
    grid = apply_checkerboard(build_grid((2000.0, 2000.0), 100.0, 2000.0), 10.0, 5)
    stations = perimeter_stations(grid, 16)
    events = random_interior_events(grid, 30, seed=42)
    system = assemble_system(events, stations, grid)  # noise-free times, default ridge
    oracle = solve_centralized(system, clamp=False)
    problem = ConsensusProblem.from_system(
        system, [sid for (_, sid) in system.row_meta]
    )
    topo = build_topology(stations, comm_range=600.0)
    assert topo.connected
    return {
        "grid": grid,
        "stations": stations,
        "system": system,
        "oracle": oracle,
        "problem": problem,
        "topology": topo,
    }


@pytest.fixture(scope="module")
def checkerboard_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cb")
    manifest, code = run_scenario(SCENARIOS / "tomo_checkerboard.json", out)
    return manifest, code, out


def _run_desk_algorithm(desk, algorithm):
    cfg, max_rounds = DESK_CONFIGS[algorithm]
    net = NetworkSimulator(desk["topology"], seed=1)
    stop = StoppingRule(
        max_rounds=max_rounds, model_change_tol=1e-9, consensus_tol=1e-7
    )
    t0 = time.time()
    try:
        model, stats = run_distributed(
            desk["problem"], algorithm, net, stop=stop, config={"seed": 1, **cfg}
        )
    except ConvergenceFailure as err:
        model, stats = err.best, err.stats
    wall = time.time() - t0
    oracle = desk["oracle"]
    rel = float(
        np.linalg.norm(model.slowness - oracle.slowness) / np.linalg.norm(oracle.slowness)
    )
    return rel, wall


@pytest.mark.parametrize("algorithm", ["DGD_SYNC", "ASYNC_BROADCAST", "KACZMARZ_CAV"])
def test_criterion_1_distributed_equals_centralized(desk, algorithm):
    rel, wall = _run_desk_algorithm(desk, algorithm)
    ok = rel <= 1e-3 and wall <= 60.0
    report(f"1 [{algorithm}]", ok, f"rel_error={rel:.2e}, wall={wall:.1f}s")
    assert wall <= 60.0
    assert rel <= 1e-3, (
        f"{algorithm} reached {rel:.2e} (> 1e-3): for KACZMARZ_CAV this is the "
        "structural bias of count-weighted component averaging on rank-deficient "
        "ray systems; see the decisions ledger"
    )


def test_criterion_2_oracle_matches_dense_solve():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(40, 120))
        n = int(rng.integers(20, min(m, 400)))
        A = sp.random(m, n, density=0.25, random_state=rng, format="csr")
        A.data = np.abs(A.data) * 100.0
        t = rng.normal(size=m)
        lam = float(rng.uniform(0.05, 5.0))
        system = TomoSystem(
            A=A, t=t, row_meta=(), lam=lam, s_ref=np.zeros(n)
        )
        model = solve_centralized(system, clamp=False)
        dense = np.linalg.solve(
            A.toarray().T @ A.toarray() + lam * np.eye(n), A.toarray().T @ t
        )
        rel = float(np.linalg.norm(model.slowness - dense) / np.linalg.norm(dense))
        worst = max(worst, rel)
    ok = worst < 1e-6
    report("2 [oracle solve]", ok, f"worst rel error {worst:.2e} over 20 instances")
    assert ok


def test_criterion_3_checkerboard_recovery(checkerboard_run):
    manifest, code, _ = checkerboard_run
    score = manifest["metrics"].get("checkerboard_score", -1.0)
    ok = score >= 0.8 and code == 0
    report("3 [checkerboard]", ok, f"score={score:.3f}, exit={code}")
    assert ok


def test_criterion_4_picking_accuracy():
    fs = 500.0

    def burst(n, onset, freq=30.0, amp=1.0, decay=0.4):
        x = np.zeros(n)
        t = np.arange(n - onset) / fs
        x[onset:] = amp * np.cos(2 * np.pi * freq * t) * np.exp(-t / decay)
        return x

    onset = 600
    errors = []
    for seed in range(100):
        rng = np.random.default_rng(4000 + seed)
        samples = burst(2000, onset) + rng.normal(0.0, 1.0 / 10.0, size=2000)
        tr = Trace(station_id=0, start_time=0.0, sampling_rate=fs, samples=samples)
        pick = pick_arrival(tr, "STA_LTA")
        assert pick is not None
        errors.append(abs(pick.arrival_time * fs - onset))
    median = float(np.median(errors))

    false_picks = 0
    for seed in range(20):
        rng = np.random.default_rng(5000 + seed)
        tr = Trace(
            station_id=0, start_time=0.0, sampling_rate=fs,
            samples=rng.normal(size=3000),
        )
        if pick_arrival(tr, "STA_LTA", {"threshold": 10.0}) is not None:
            false_picks += 1
    ok = median <= 2.0 and false_picks == 0
    report("4 [picking]", ok, f"median |error|={median:.1f} samples, false picks={false_picks}/20")
    assert ok


def test_criterion_5_mmi_localization(tmp_path):
    manifest, code = run_scenario(SCENARIOS / "mmi_single_source.json", tmp_path / "mmi")
    cell_error = manifest["metrics"].get("cell_error", 99)
    ok_loc = cell_error <= 1 and code == 0

    from seisnet.mmi import ImageVolume, image_hybrid, image_sum

    grid = build_grid((1000.0, 1000.0), 100.0, 2000.0)
    rng = np.random.default_rng(55)
    vols = [ImageVolume(grid=grid, values=rng.normal(size=(6, 10, 10))) for _ in range(8)]
    bit_exact = np.array_equal(image_hybrid(vols, n=8).values, image_sum(vols).values)
    ok = ok_loc and bit_exact
    report("5 [MMI]", ok, f"cell_error={cell_error}, hybrid(n=N)==sum bit-exact: {bit_exact}")
    assert ok


@pytest.fixture(scope="module")
def ansi_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ansi")
    manifest, code = run_scenario(SCENARIOS / "ansi_uniform.json", out)
    return manifest, code


def test_criterion_6_ansi_recovery(ansi_run):
    manifest, code = ansi_run
    med = manifest["metrics"].get("median_velocity_error", 1.0)
    from seisnet.ansi import velocity_map_from_fields

    grid = build_grid((2000.0, 2000.0), 100.0, 2000.0)
    rng = np.random.default_rng(66)
    tau = rng.uniform(0.0, 1.0, size=grid.dims).cumsum(axis=0) / 5000.0
    amp = np.full(grid.dims, 2.0)
    eik = velocity_map_from_fields(grid, tau, omega=40.0, mode="EIKONAL")
    helm = velocity_map_from_fields(grid, tau, omega=40.0, mode="HELMHOLTZ", amp_grid=amp)
    exact = np.array_equal(eik.c, helm.c)
    ok = med <= 0.02 and exact and code == 0
    report("6 [ANSI]", ok, f"median error={med*100:.2f}%, helmholtz(const A)==eikonal: {exact}")
    assert ok


def test_criterion_7_greens_function_emergence():
    from seisnet.ansi import synthesize_noise, virtual_source_gather
    from seisnet.model import Station

    fs, c_true = 500.0, 2000.0
    xs = np.linspace(160.0, 1840.0, 6)
    stations = [
        Station(id=i, position=(float(x), float(y)))
        for i, (y, x) in enumerate((y, x) for y in xs for x in xs)
    ]
    field = synthesize_noise(
        stations, 240.0, fs, c_true, (2.0, 240.0), n_sources=720, seed=7
    )
    pairs = [(0, 5), (0, 35), (7, 28), (3, 32), (14, 21),
             (0, 1), (10, 25), (6, 33), (2, 19), (12, 27)]
    worst = 0.0
    gather_cache = {}
    for i, j in pairs:
        if i not in gather_cache:
            gather_cache[i] = virtual_source_gather(
                stations[i], field, n_segments=60, max_lag=1.9
            )
        corr = gather_cache[i][j]
        mid = len(corr.lags) // 2
        peak = corr.lags[mid:][np.argmax(corr.values[mid:])]
        d = float(np.linalg.norm(np.subtract(stations[i].position, stations[j].position)))
        worst = max(worst, abs(peak - d / c_true) * fs)
    ok = worst <= 1.0 + 1e-9
    report("7 [correlation emergence]", ok, f"worst peak-lag error {worst:.2f} samples over 10 pairs")
    assert ok


def test_criterion_8_determinism_and_fault_tolerance(desk, checkerboard_run, tmp_path):
    # (a) identical seeds give byte-identical CLI outputs
    _, _, first_out = checkerboard_run
    manifest2, _ = run_scenario(SCENARIOS / "tomo_checkerboard.json", tmp_path / "again")
    identical = True
    for name in sorted(p.name for p in first_out.iterdir()):
        a = (first_out / name).read_bytes()
        b = (tmp_path / "again" / name).read_bytes()
        if a != b:
            identical = False
            break

    # (b) failing one non-cut link mid-run still meets criterion 1's tolerance;
    # the weakened mixing needs more rounds than the intact-topology run
    cfg = {"step_schedule": "sqrt", "step_tau": 800.0}
    net = NetworkSimulator(desk["topology"], seed=1)
    interval = 0.02
    net.schedule_command(2000 * interval, lambda s: s.fail_link(0, 1))
    stop = StoppingRule(max_rounds=24000, model_change_tol=1e-9, consensus_tol=1e-7)
    try:
        model, _ = run_distributed(
            desk["problem"], "DGD_SYNC", net, stop=stop, config={"seed": 1, **cfg}
        )
    except ConvergenceFailure as err:
        model = err.best
    oracle = desk["oracle"]
    rel = float(
        np.linalg.norm(model.slowness - oracle.slowness) / np.linalg.norm(oracle.slowness)
    )

    # (c) drop-rate statistics within +-0.02 of the configured probability
    from seisnet.model import Station

    duo = [Station(id=0, position=(0.0, 0.0)), Station(id=1, position=(100.0, 0.0))]
    topo = build_topology(duo, comm_range=150.0, drop_prob=0.3)
    sim = NetworkSimulator(topo, seed=9)
    for _ in range(10_000):
        sim.send(0, 1, 1.0)
    sim.step_until(10.0)
    frac = sim.get_stats().dropped / sim.get_stats().sent
    ok = identical and rel <= 1e-3 and abs(frac - 0.3) <= 0.02
    report(
        "8 [determinism+faults]",
        ok,
        f"byte-identical={identical}, rel_error_after_link_fail={rel:.2e}, drop_frac={frac:.3f}",
    )
    assert ok


def test_criterion_9_headless_equivalence(checkerboard_run):
    import base64

    from fastapi.testclient import TestClient

    from seisnet.service import create_app

    manifest, _, out = checkerboard_run
    scenario = json.loads((SCENARIOS / "tomo_checkerboard.json").read_text())
    app = create_app()
    with TestClient(app) as client:
        run_id = client.post("/v1/runs", json=scenario).json()["run_id"]
        handle = app.state.runs[run_id]
        assert handle.wait_finished(timeout=300.0)
        snap = client.get(f"/v1/runs/{run_id}/snapshot").json()
    svc_bytes = base64.b64decode(snap["image"]["data_b64"])
    cli_bytes = (out / "model_velocity.f32").read_bytes()
    ok = svc_bytes == cli_bytes
    report("9 [headless equivalence]", ok, f"final image bytes identical: {ok}")
    assert ok
