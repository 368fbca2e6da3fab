import json
from pathlib import Path

import numpy as np

from seisnet.cli import main, run_scenario
from seisnet.io import read_grid, read_trace, write_grid, write_trace
from seisnet.forward import Trace

FAST = {
    "seed": 3,
    "pipeline": "TOMO_TT",
    "extent": [1000.0, 1000.0],
    "spacing": 100.0,
    "background_velocity": 2000.0,
    "checkerboard_pct": 10.0,
    "checkerboard_block": 5,
    "n_stations": 8,
    "n_events": 6,
    "sampling_rate": 500.0,
    "snr": "inf",
    "comm_range": 600.0,
    "algorithm": "KACZMARZ_CAV",
    "solver": {"source": "true_times", "max_rounds": 30},
}


def write_scenario(tmp_path, data=FAST):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return path


def test_run_writes_all_artifacts(tmp_path):
    path = write_scenario(tmp_path)
    manifest, code = run_scenario(path, tmp_path / "out")
    assert code in (0, 1)
    for name in manifest["outputs"]:
        assert (tmp_path / "out" / name).exists(), name
    values, meta = read_grid(tmp_path / "out" / "model_velocity")
    assert values.shape == (10, 10)
    assert meta["spacing"] == 100.0


def test_determinism_byte_identical(tmp_path):
    path = write_scenario(tmp_path)
    run_scenario(path, tmp_path / "a")
    run_scenario(path, tmp_path / "b")
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_missing_seed_exit_2(tmp_path, capsys):
    data = {k: v for k, v in FAST.items() if k != "seed"}
    path = write_scenario(tmp_path, data)
    code = main(["--scenario", str(path), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_field_exit_2(tmp_path, capsys):
    path = write_scenario(tmp_path, {**FAST, "wavelet": 25})
    code = main(["--scenario", str(path), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "wavelet" in capsys.readouterr().err


def test_overrides_and_flags(tmp_path):
    path = write_scenario(tmp_path)
    manifest, _ = run_scenario(
        path, tmp_path / "out", overrides=["n_events=4", "solver.max_rounds=10"], seed=9
    )
    assert manifest["seed"] == 9
    resolved = json.loads((tmp_path / "out" / "scenario_resolved.json").read_text())
    assert resolved["n_events"] == 4
    assert resolved["solver"]["max_rounds"] == 10
    assert manifest["metrics"]["rounds"] <= 10


def test_exit_code_one_on_convergence_failure(tmp_path):
    path = write_scenario(tmp_path, {**FAST, "solver": {"source": "true_times", "max_rounds": 3}})
    manifest, code = run_scenario(path, tmp_path / "out")
    assert code == 1
    assert manifest["converged"] is False
    assert (tmp_path / "out" / "manifest.json").exists()


def test_grid_and_trace_io_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(6, 8)).astype(np.float32)
    write_grid(tmp_path / "g", values, 50.0, (0.0, 0.0))
    back, meta = read_grid(tmp_path / "g")
    assert np.allclose(back, values, atol=1e-7)
    assert meta["dims"] == [6, 8]

    tr = Trace(station_id=3, start_time=0.5, sampling_rate=250.0,
               samples=rng.normal(size=100))
    write_trace(tmp_path / "t.bin", tr)
    back = read_trace(tmp_path / "t.bin")
    assert back.station_id == 3
    assert back.sampling_rate == 250.0
    assert np.allclose(back.samples, tr.samples, atol=1e-6)


def test_bundled_scenarios_parse_and_run_briefly(tmp_path):
    scenarios = Path(__file__).resolve().parent.parent / "scenarios"
    manifest, code = run_scenario(
        scenarios / "desk_consensus.json",
        tmp_path / "desk",
        overrides=["solver.max_rounds=60"],
    )
    assert code in (0, 1)
    assert "rel_error_vs_centralized" in manifest["metrics"]
    for name in ("tomo_checkerboard", "mmi_single_source", "ansi_uniform"):
        data = json.loads((scenarios / f"{name}.json").read_text())
        from seisnet.model import Scenario

        Scenario.from_json_dict(data)  # bundled files stay valid
