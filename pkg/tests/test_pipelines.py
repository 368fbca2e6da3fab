import numpy as np
import pytest

from seisnet.errors import InvalidArgumentError
from seisnet.model import Scenario
from seisnet.pipelines import AnsiRun, MmiRun, TomoTTRun, make_run


def fast_tomo_scenario(**kw):
    base = dict(
        seed=11,
        pipeline="TOMO_TT",
        extent=(1000.0, 1000.0),
        spacing=100.0,
        background_velocity=2000.0,
        checkerboard_pct=10.0,
        checkerboard_block=5,
        n_stations=8,
        n_events=6,
        sampling_rate=500.0,
        snr=float("inf"),
        comm_range=600.0,
        algorithm="DGD_SYNC",
        solver={"source": "true_times", "max_rounds": 2000},
    )
    base.update(kw)
    return Scenario(**base)


def test_make_run_dispatch():
    assert isinstance(make_run(fast_tomo_scenario()), TomoTTRun)


def test_tomo_set_lambda_warm_restarts():
    run = TomoTTRun(fast_tomo_scenario())
    for _ in range(25):
        run.advance_round()

    before = run.current_model().slowness.copy()
    rounds_before = run.round_index
    run.apply_command("SET_LAMBDA", {"value": 7.5})
    assert run.params["lambda"] == 7.5
    assert run.round_index == 0  # the convergence curve restarted
    assert rounds_before == 25
    # warm start: the current estimate survives the restart
    assert np.allclose(run.current_model().slowness, before)
    run.advance_round()
    assert run.round_index == 1


def test_tomo_restart_solve_is_cold():
    run = TomoTTRun(fast_tomo_scenario())
    for _ in range(20):
        run.advance_round()
    assert not np.allclose(run.current_model().slowness, run.system.s_ref)
    run.apply_command("RESTART_SOLVE", {})
    assert np.allclose(run.current_model().slowness, run.system.s_ref)


def test_tomo_set_algorithm_switches():
    run = TomoTTRun(fast_tomo_scenario())
    for _ in range(5):
        run.advance_round()
    run.apply_command("SET_ALGORITHM", {"value": "KACZMARZ_CAV"})
    assert run.params["algorithm"] == "KACZMARZ_CAV"
    assert run.advance_round()


def test_tomo_set_resolution_rebuilds_model():
    run = TomoTTRun(fast_tomo_scenario())
    run.advance_round()
    run.apply_command("SET_RESOLUTION", {"value": 200.0})
    assert run.grid.dims == (5, 5)
    assert run.current_model().slowness.shape == (25,)
    assert run.advance_round()


def test_tomo_rejects_unknown_command():
    run = TomoTTRun(fast_tomo_scenario())
    with pytest.raises(InvalidArgumentError):
        run.apply_command("SET_VOLUME", {"value": 11})


def test_tomo_fail_and_restore_link():
    run = TomoTTRun(fast_tomo_scenario())
    edge = next(iter(run.net.topology.edges))
    run.apply_command("FAIL_LINK", {"a": edge[0], "b": edge[1]})
    assert edge in run.net._failed
    run.apply_command("RESTORE_LINK", {"a": edge[0], "b": edge[1]})
    assert edge not in run.net._failed
    assert run.advance_round()


def test_ansi_set_band_restacks_from_cached_gathers():
    scenario = Scenario(
        seed=7,
        pipeline="ANSI",
        extent=(1000.0, 1000.0),
        spacing=100.0,
        background_velocity=2000.0,
        station_layout="lattice",
        n_stations=9,
        n_events=0,
        sampling_rate=500.0,
        snr=float("inf"),
        comm_range=700.0,
        ansi={"duration": 32.0, "n_segments": 8, "n_sources": 120, "max_lag": 0.9,
              "support_radius": 400.0, "min_offset": 300.0},
    )
    run = AnsiRun(scenario)
    for _ in range(3):
        run.advance_round()
    cache_size = len(run._pair_cache)
    assert cache_size > 0
    run.apply_command("SET_BAND", {"f_lo": 5.0, "f_hi": 12.0})
    assert run.band == (5.0, 12.0)
    assert run.round_index == 0
    assert len(run._pair_cache) == cache_size  # correlations survive the band change
    assert run.advance_round()


def test_mmi_inject_event_restarts_imaging():
    scenario = Scenario(
        seed=5,
        pipeline="MMI",
        extent=(1000.0, 1000.0),
        spacing=100.0,
        background_velocity=2000.0,
        n_stations=8,
        n_events=1,
        sampling_rate=500.0,
        wavelet_freq=12.0,
        snr=20.0,
        trace_duration=1.5,
        comm_range=600.0,
        mmi={"refine": 2, "cluster_size": 2},
    )
    run = MmiRun(scenario)
    while run.advance_round():
        pass
    assert run.finished
    run.apply_command("INJECT_EVENT", {"x": 700.0, "y": 300.0, "t0": 0.5})
    assert len(run.events) == 2
    assert not run.finished
    while run.advance_round():
        pass
    img = run.image()
    cell = run.grid.cell_of((700.0, 300.0))
    neighborhood = img[cell[0] - 2 : cell[0] + 3, cell[1] - 2 : cell[1] + 3]
    assert neighborhood.max() > 0.05 * img.max()


def test_scenario_fault_schedule_fails_link_mid_run():
    scenario = fast_tomo_scenario(faults=((10, "FAIL_LINK", 0, 1),),
                                  solver={"source": "true_times", "max_rounds": 60})
    run = TomoTTRun(scenario)
    assert (0, 1) in run.net.topology.edges
    for _ in range(5):
        run.advance_round()
    assert (0, 1) not in run.net._failed
    for _ in range(10):
        run.advance_round()
    assert (0, 1) in run.net._failed  # the scheduled fault fired around round 10


def test_ansi_helmholtz_mode_end_to_end():
    scenario = Scenario(
        seed=7,
        pipeline="ANSI",
        extent=(1000.0, 1000.0),
        spacing=100.0,
        background_velocity=2000.0,
        station_layout="lattice",
        n_stations=9,
        n_events=0,
        sampling_rate=500.0,
        snr=float("inf"),
        comm_range=700.0,
        ansi={"duration": 32.0, "n_segments": 8, "n_sources": 120, "max_lag": 0.9,
              "support_radius": 400.0, "min_offset": 300.0, "mode": "HELMHOLTZ"},
    )
    run = AnsiRun(scenario)
    while run.advance_round():
        pass
    stacked = run.stacked()
    assert stacked is not None
    covered = stacked.hits > 0
    assert covered.any()
    assert np.all(stacked.c[covered] > 0)
