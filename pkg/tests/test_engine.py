import json

import numpy as np
import pytest

from zenochain import engine
from zenochain.dynamics import build_hamiltonian, build_propagator
from zenochain.engine import (
    ConfigError,
    PhysicsError,
    ProtocolConfig,
    config_from_dict,
    expand_g_grid,
    load_config,
    run_sweep,
    run_trajectory,
    save_sweep,
    trajectory_rng,
)
from zenochain.fockspace import build_basis, neel_state

TINY = dict(L=(4,), V=1.0, g_grid=(0.5, 2.0), T1=0.5, T2=1.0, n_traj=5, stride=10, seed=7)


def tiny_config(**over):
    kwargs = dict(TINY)
    kwargs.update(over)
    return ProtocolConfig(**kwargs)


# ------------------------------------------------------------ configuration

def test_config_validation():
    with pytest.raises(ConfigError):
        tiny_config(L=(5,))
    with pytest.raises(ConfigError):
        tiny_config(L=())
    with pytest.raises(ConfigError):
        tiny_config(L=(4, 4))
    with pytest.raises(ConfigError):
        tiny_config(T1=2.0, T2=1.0)
    with pytest.raises(ConfigError):
        tiny_config(n_traj=0)
    with pytest.raises(ConfigError):
        tiny_config(initial_state="cat")
    with pytest.raises(ConfigError):
        tiny_config(T1=0.55)  # not on the observable grid
    with pytest.raises(PhysicsError):
        tiny_config(g_grid=(150.0,))


def test_eta_bound_message_names_the_bound():
    with pytest.raises(PhysicsError, match="eta = g\\*dt <= 1"):
        tiny_config(g_grid=(200.0,))


def test_single_int_size_is_coerced():
    cfg = tiny_config(L=4)
    assert cfg.L == (4,)


def test_expand_g_grid_forms():
    assert expand_g_grid([0.5, 1.0]) == (0.5, 1.0)
    assert expand_g_grid({"start": 0.5, "stop": 3.5, "step": 0.25}) == tuple(
        0.5 + 0.25 * k for k in range(13)
    )
    with pytest.raises(ConfigError):
        expand_g_grid({"start": 1.0, "stop": 0.5, "step": 0.25})
    with pytest.raises(ConfigError):
        expand_g_grid({"start": 0.5, "halt": 1.0})
    with pytest.raises(ConfigError):
        expand_g_grid("0.5")


def test_config_from_dict_rejects_unknown_and_missing_keys():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"L": [4], "V": 1.0, "g_grid": [0.5], "bogus": 1})
    with pytest.raises(ConfigError, match="missing"):
        config_from_dict({"L": [4], "V": 1.0})


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        "L: [4, 6]\nV: 1.0\ng_grid: {start: 0.5, stop: 1.0, step: 0.25}\n"
        "T1: 0.5\nT2: 1.0\nn_traj: 3\nstride: 10\ninitial_state: neel\nseed: 3\n"
    )
    cfg = load_config(path)
    assert cfg.L == (4, 6)
    assert cfg.g_grid == (0.5, 0.75, 1.0)
    assert cfg.to_dict()["n_traj"] == 3

    bad = tmp_path / "bad.yaml"
    bad.write_text("L: [4]\nV: 1.0\ng_grid: [0.5]\nwhatever: 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)


# ------------------------------------------------------------ trajectories

def test_trajectory_rng_streams_are_distinct_and_stable():
    a = trajectory_rng(1, 8, 0, 0).random(4)
    b = trajectory_rng(1, 8, 0, 1).random(4)
    c = trajectory_rng(1, 8, 0, 0).random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_trajectory_record_reproducibility():
    cfg = tiny_config()
    prop = engine.propagator_for(4, 2, cfg.V, cfg.dt)
    r1 = run_trajectory(prop, cfg, 2.0, g_index=1, traj_index=3)
    r2 = run_trajectory(prop, cfg, 2.0, g_index=1, traj_index=3)
    assert np.array_equal(r1.entropy, r2.entropy)
    assert np.array_equal(r1.mixedness, r2.mixedness)
    assert r1.s_avg == r2.s_avg
    assert r1.seed_key == (7, 4, 1, 3)


def test_zeno_pinning_is_exact():
    # eta = 1 from the alternating product state: S and 1-P stay exactly zero
    cfg = tiny_config(g_grid=(100.0,))
    prop = engine.propagator_for(4, 2, cfg.V, cfg.dt)
    rec = run_trajectory(prop, cfg, 100.0, g_index=0, traj_index=0)
    assert np.all(rec.entropy == 0.0)
    assert np.all(rec.mixedness == 0.0)
    assert rec.s_avg == 0.0 and rec.mixedness_avg == 0.0


def test_zero_measurement_matches_pure_unitary_reference():
    cfg = tiny_config(L=(6,), g_grid=(0.0,), T1=1.0, T2=2.0)
    prop = engine.propagator_for(6, 3, cfg.V, cfg.dt)
    rec = run_trajectory(prop, cfg, 0.0, g_index=0, traj_index=0)

    from zenochain.observables import reduced_density_matrix, von_neumann_entropy

    psi = neel_state(prop.basis)
    reference = [0.0]
    for step in range(1, cfg.n_steps + 1):
        psi.amps = prop.U @ psi.amps
        if step % cfg.stride == 0:
            reference.append(von_neumann_entropy(reduced_density_matrix(psi)))
    assert np.allclose(rec.entropy, reference, atol=1e-9)


def test_outcome_recording_shape():
    cfg = tiny_config(n_traj=1)
    prop = engine.propagator_for(4, 2, cfg.V, cfg.dt)
    rec = run_trajectory(prop, cfg, 2.0, record_outcomes=True)
    assert rec.outcomes.shape == (cfg.n_steps, 4)
    assert set(np.unique(rec.outcomes)) <= {0, 1}


# ------------------------------------------------------------ sweeps

def test_sweep_determinism_and_worker_independence():
    cfg = tiny_config()
    r1 = run_sweep(cfg, workers=1)
    r2 = run_sweep(cfg, workers=1)
    r3 = run_sweep(cfg, workers=2)
    for a, b in ((r1, r2), (r1, r3)):
        for ca, cb in zip(a.cells, b.cells):
            assert ca.stats == cb.stats
            assert np.array_equal(ca.mean_entropy, cb.mean_entropy)
            assert np.array_equal(ca.s_avgs, cb.s_avgs)


def test_sweep_batch_partition_is_fixed_by_config():
    cfg = tiny_config(n_traj=7)
    r1 = run_sweep(cfg, workers=1, batch_size=3)
    r2 = run_sweep(cfg, workers=2, batch_size=3)
    for ca, cb in zip(r1.cells, r2.cells):
        assert np.array_equal(ca.s_avgs, cb.s_avgs)


def test_single_trajectory_sweep_has_zero_std():
    cfg = tiny_config(n_traj=1)
    res = run_sweep(cfg, workers=1)
    for c in res.cells:
        assert c.stats.s_std == 0.0
        assert c.stats.n_traj == 1


def test_sweep_cell_lookup_and_shapes():
    cfg = tiny_config()
    res = run_sweep(cfg, workers=1)
    cell = res.cell(4, 2.0)
    assert cell.g_index == 1
    assert cell.s_avgs.shape == (cfg.n_traj,)
    assert res.times.shape == cell.mean_entropy.shape
    with pytest.raises(KeyError):
        res.cell(4, 9.9)


def test_save_sweep_outputs(tmp_path):
    cfg = tiny_config(n_traj=3)
    res = run_sweep(cfg, workers=1, keep_records=True)
    paths = save_sweep(res, tmp_path, save_trajectories=True)

    header = paths["table"].read_text().splitlines()[0]
    assert header == "L,g,S_mean,S_std,mixedness_mean,mixedness_std,n_traj"

    payload = json.loads(paths["json"].read_text())
    assert payload["config"]["L"] == [4]
    assert len(payload["cells"]) == 2
    assert len(payload["mean_timeseries"][0]["times"]) == cfg.n_steps // cfg.stride + 1

    lines = paths["trajectories"].read_text().splitlines()
    assert len(lines) == 2 * 3  # cells x trajectories
    row = json.loads(lines[0])
    assert set(row) >= {"L", "g", "index", "seed_key", "s_avg", "entropy"}

    ts_header = paths["timeseries"].read_text().splitlines()[0]
    assert ts_header == "L,g,t,S_mean,mixedness_mean"


def test_save_sweep_bytes_identical_across_reruns(tmp_path):
    cfg = tiny_config()
    save_sweep(run_sweep(cfg, workers=1), tmp_path / "a")
    save_sweep(run_sweep(cfg, workers=1), tmp_path / "b")
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_resolve_workers_env_override(monkeypatch):
    monkeypatch.setenv(engine.WORKERS_ENV, "3")
    assert engine.resolve_workers() == 3
    assert engine.resolve_workers(5) == 5
    monkeypatch.delenv(engine.WORKERS_ENV)
    assert engine.resolve_workers() >= 1
