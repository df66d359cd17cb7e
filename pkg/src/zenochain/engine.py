"""Stochastic trajectory protocol over a (g, L) parameter grid.

One trajectory alternates an exact unitary step with a measurement sweep for
round(T2/dt) steps, sampling the half-chain entropy and mixedness every
``stride`` steps and averaging them over the window [T1, T2].  Trajectories
are evolved in lockstep batches (one dense matrix-block product per step
instead of per-column products), which is what makes desk-scale grids
tractable; the batch partition is fixed by the configuration, never by the
scheduler, so results are a pure function of (config, seed).

Randomness comes from counter-based Philox streams keyed on
(master seed, L, g index, trajectory index), making every trajectory
reproducible in isolation and the sweep independent of worker count.  BLAS
threading is pinned to one thread inside the hot loop for the same reason;
parallelism belongs to the process pool.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from zenochain import measurement, observables
from zenochain.dynamics import Propagator, build_hamiltonian, build_propagator
from zenochain.fockspace import INITIAL_STATES, build_basis, initial_state
from zenochain.observables import TimeSeries, TrajectoryStats, time_window_average, trajectory_statistics

__version__ = "0.1.0"

DEFAULT_BATCH = 125
NORM_CHECK_EVERY = 100
NORM_TOLERANCE = 1e-6
WORKERS_ENV = "ZENOCHAIN_WORKERS"

CONFIG_KEYS = ("L", "V", "dt", "g_grid", "T1", "T2", "n_traj", "stride", "initial_state", "seed")


class ConfigError(ValueError):
    """Malformed or inconsistent protocol configuration."""


class PhysicsError(ValueError):
    """Configuration that is structurally fine but physically invalid."""


class EngineError(RuntimeError):
    """Numerical fault detected while running trajectories."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Full specification of one sweep; the YAML config uses these key names."""

    L: tuple
    V: float
    g_grid: tuple
    dt: float = 0.01
    T1: float = 10.0
    T2: float = 20.0
    n_traj: int = 1000
    stride: int = 10
    initial_state: str = "neel"
    seed: int = 0

    def __post_init__(self):
        sizes = (self.L,) if isinstance(self.L, int) else tuple(int(x) for x in self.L)
        object.__setattr__(self, "L", sizes)
        object.__setattr__(self, "g_grid", tuple(float(g) for g in self.g_grid))
        if len(sizes) == 0 or len(self.g_grid) == 0:
            raise ConfigError("L and g_grid must be non-empty")
        if len(set(sizes)) != len(sizes):
            raise ConfigError(f"duplicate system sizes in L = {sizes}")
        for L in sizes:
            if L < 2 or L % 2 != 0 or L > 16:
                raise ConfigError(f"each L must be an even integer in [2, 16], got {L}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        for g in self.g_grid:
            if g < 0:
                raise ConfigError(f"measurement strengths must be >= 0, got {g}")
            if g * self.dt > 1.0 + 1e-12:
                raise PhysicsError(
                    f"g = {g} violates the validity bound eta = g*dt <= 1 "
                    f"(dt = {self.dt} allows g <= {1.0 / self.dt:g})"
                )
        if not 0 < self.T1 < self.T2:
            raise ConfigError(f"need 0 < T1 < T2, got T1 = {self.T1}, T2 = {self.T2}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.initial_state not in INITIAL_STATES:
            raise ConfigError(
                f"unknown initial_state {self.initial_state!r}; choose from {sorted(INITIAL_STATES)}"
            )
        for name, T in (("T1", self.T1), ("T2", self.T2)):
            steps = round(T / self.dt)
            if abs(steps * self.dt - T) > 1e-9:
                raise ConfigError(f"{name} = {T} is not a multiple of dt = {self.dt}")
            if steps % self.stride != 0:
                raise ConfigError(
                    f"{name} = {T} does not fall on the observable grid (stride {self.stride} x dt {self.dt})"
                )

    @property
    def n_steps(self) -> int:
        return round(self.T2 / self.dt)

    def eta(self, g: float) -> float:
        return g * self.dt

    def to_dict(self) -> dict:
        return {
            "L": list(self.L),
            "V": self.V,
            "dt": self.dt,
            "g_grid": list(self.g_grid),
            "T1": self.T1,
            "T2": self.T2,
            "n_traj": self.n_traj,
            "stride": self.stride,
            "initial_state": self.initial_state,
            "seed": self.seed,
        }


def expand_g_grid(spec) -> tuple:
    """Accept either an explicit list of g values or {start, stop, step}."""
    if isinstance(spec, dict):
        extra = set(spec) - {"start", "stop", "step"}
        if extra:
            raise ConfigError(f"unknown g_grid keys: {sorted(extra)}")
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except KeyError as exc:
            raise ConfigError(f"g_grid range form needs start/stop/step, missing {exc}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"invalid g_grid range {spec}")
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + k * step, 12) for k in range(count))
    if isinstance(spec, (list, tuple)):
        return tuple(float(g) for g in spec)
    raise ConfigError(f"g_grid must be a list or a start/stop/step mapping, got {type(spec).__name__}")


def config_from_dict(raw: dict) -> ProtocolConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"configuration must be a mapping, got {type(raw).__name__}")
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    missing = {"L", "V", "g_grid"} - set(raw)
    if missing:
        raise ConfigError(f"missing required configuration keys: {sorted(missing)}")
    kwargs = dict(raw)
    kwargs["g_grid"] = expand_g_grid(kwargs["g_grid"])
    return ProtocolConfig(**kwargs)


def load_config(path) -> ProtocolConfig:
    """Parse a YAML protocol configuration; unknown keys are errors."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw)


@dataclass(eq=False)
class TrajectoryRecord:
    """Per-realization time series and windowed averages of S and 1-P."""

    index: int
    seed_key: tuple
    times: np.ndarray
    entropy: np.ndarray
    mixedness: np.ndarray
    s_avg: float
    mixedness_avg: float
    outcomes: np.ndarray | None = None  # (n_steps, L) readouts, only when recorded

    def entropy_series(self) -> TimeSeries:
        return TimeSeries(self.times, self.entropy)

    def mixedness_series(self) -> TimeSeries:
        return TimeSeries(self.times, self.mixedness)


@dataclass(eq=False)
class CellResult:
    """All trajectories of one (L, g) grid cell, aggregated."""

    L: int
    g: float
    g_index: int
    stats: TrajectoryStats
    mean_entropy: np.ndarray
    mean_mixedness: np.ndarray
    s_avgs: np.ndarray
    mixedness_avgs: np.ndarray


@dataclass(eq=False)
class SweepResult:
    config: ProtocolConfig
    times: np.ndarray
    cells: list
    provenance: dict
    records: dict | None = None  # {(L, g): [TrajectoryRecord, ...]} when kept

    def cell(self, L: int, g: float) -> CellResult:
        for c in self.cells:
            if c.L == L and abs(c.g - g) < 1e-12:
                return c
        raise KeyError(f"no cell for L={L}, g={g}")


def trajectory_rng(seed: int, L: int, g_index: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory; key = (seed, L, g index, index)."""
    ss = np.random.SeedSequence((seed, L, g_index, traj_index))
    return np.random.Generator(np.random.Philox(ss))


_PROPAGATOR_CACHE: dict = {}


def propagator_for(L: int, N: int, V: float, dt: float) -> Propagator:
    """Process-local cache of dense propagators keyed on (L, N, V, dt)."""
    key = (L, N, V, dt)
    prop = _PROPAGATOR_CACHE.get(key)
    if prop is None:
        basis = build_basis(L, N)
        prop = build_propagator(build_hamiltonian(basis, V), dt)
        _PROPAGATOR_CACHE[key] = prop
    return prop


def clear_propagator_cache():
    _PROPAGATOR_CACHE.clear()


def _window_indices(cfg: ProtocolConfig) -> tuple[int, int]:
    return round(cfg.T1 / cfg.dt) // cfg.stride, round(cfg.T2 / cfg.dt) // cfg.stride


def run_trajectory_batch(
    prop: Propagator,
    cfg: ProtocolConfig,
    g: float,
    g_index: int,
    indices,
    record_outcomes: bool = False,
) -> list[TrajectoryRecord]:
    """Evolve the trajectories ``indices`` of one (L, g) cell in lockstep.

    Each column owns its Philox stream; per step every column consumes exactly
    L uniforms, so outcomes never desynchronize the streams.
    """
    basis = prop.basis
    indices = list(indices)
    B = len(indices)
    eta = cfg.eta(g)
    n_steps = cfg.n_steps
    stride = cfg.stride
    dim = basis.dim

    psi0 = initial_state(basis, cfg.initial_state).amps
    A = np.repeat(psi0[:, None], B, axis=1)
    work = np.empty_like(A)

    masks = measurement.empty_site_masks(basis)
    left, right, dl, dr = observables.bipartition_indices(basis)

    keys = [(cfg.seed, basis.L, g_index, i) for i in indices]
    rngs = [trajectory_rng(*key) for key in keys]
    uniforms = np.empty((basis.L, B))

    n_samples = n_steps // stride + 1
    S = np.empty((n_samples, B))
    M = np.empty((n_samples, B))
    lam = observables.batch_schmidt_spectra(A, left, right, dl, dr)
    S[0], pur = observables.batch_entropy_purity(lam)
    M[0] = 1.0 - pur

    outcomes = np.empty((n_steps, basis.L, B), dtype=np.uint8) if record_outcomes else None

    with threadpool_limits(limits=1):
        for step in range(1, n_steps + 1):
            np.matmul(prop.U, A, out=work)
            A, work = work, A
            for b, rng in enumerate(rngs):  # one draw per site per column, every step
                uniforms[:, b] = rng.random(basis.L)
            fired = measurement.apply_sweep_batch(A, masks, eta, uniforms)
            if record_outcomes:
                outcomes[step - 1] = fired
            if step % NORM_CHECK_EVERY == 0:
                norms = np.sqrt(np.einsum("ib,ib->b", A.real, A.real) + np.einsum("ib,ib->b", A.imag, A.imag))
                if not np.all(np.isfinite(norms)):
                    raise EngineError(f"non-finite amplitudes at step {step} (L={basis.L}, g={g})")
                drift = np.max(np.abs(norms - 1.0))
                if drift > NORM_TOLERANCE:
                    raise EngineError(
                        f"norm drift {drift:.3e} exceeds {NORM_TOLERANCE} at step {step} (L={basis.L}, g={g})"
                    )
            if step % stride == 0:
                k = step // stride
                lam = observables.batch_schmidt_spectra(A, left, right, dl, dr)
                S[k], pur = observables.batch_entropy_purity(lam)
                M[k] = 1.0 - pur

    times = np.arange(n_samples) * (stride * cfg.dt)
    i1, i2 = _window_indices(cfg)
    span = i2 - i1
    s_avg = np.trapezoid(S[i1 : i2 + 1], axis=0) / span
    m_avg = np.trapezoid(M[i1 : i2 + 1], axis=0) / span

    records = []
    for b, (idx, key) in enumerate(zip(indices, keys)):
        records.append(
            TrajectoryRecord(
                index=idx,
                seed_key=key,
                times=times,
                entropy=S[:, b].copy(),
                mixedness=M[:, b].copy(),
                s_avg=float(s_avg[b]),
                mixedness_avg=float(m_avg[b]),
                outcomes=outcomes[:, :, b].copy() if record_outcomes else None,
            )
        )
    return records


def run_trajectory(prop: Propagator, cfg: ProtocolConfig, g: float, g_index: int = 0, traj_index: int = 0,
                   record_outcomes: bool = False) -> TrajectoryRecord:
    """Run a single stochastic realization (batch of one)."""
    return run_trajectory_batch(prop, cfg, g, g_index, [traj_index], record_outcomes=record_outcomes)[0]


def resolve_workers(explicit=None) -> int:
    """Worker-pool size: explicit argument, else ZENOCHAIN_WORKERS, else all cores."""
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _batch_task(args):
    cfg, L, g_index, g, start, count, record_outcomes = args
    prop = propagator_for(L, L // 2, cfg.V, cfg.dt)
    records = run_trajectory_batch(
        prop, cfg, g, g_index, range(start, start + count), record_outcomes=record_outcomes
    )
    return (L, g_index, start, records)


def run_sweep(
    cfg: ProtocolConfig,
    workers=None,
    batch_size: int = DEFAULT_BATCH,
    record_outcomes: bool = False,
    keep_records: bool = False,
    progress=None,
) -> SweepResult:
    """Run every (g, L) cell of the grid and aggregate the statistics.

    The batch partition of each cell's n_traj trajectories is derived from
    the configuration alone; scheduling across workers cannot change any
    number in the result.
    """
    t0 = time.time()
    workers = resolve_workers(workers)
    tasks = []
    for L in cfg.L:
        for g_index, g in enumerate(cfg.g_grid):
            for start in range(0, cfg.n_traj, batch_size):
                count = min(batch_size, cfg.n_traj - start)
                tasks.append((cfg, L, g_index, g, start, count, record_outcomes))
    # Large cells first so a pool drains evenly; result order is re-sorted below.
    tasks.sort(key=lambda t: (-t[1], t[2], t[4]))

    results = []
    done_traj = 0
    total_traj = len(cfg.L) * len(cfg.g_grid) * cfg.n_traj
    if workers == 1:
        for task in tasks:
            results.append(_batch_task(task))
            done_traj += task[5]
            if progress:
                rate = done_traj / max(time.time() - t0, 1e-9)
                progress(
                    f"L={task[1]} g={task[3]:g}: +{task[5]} trajectories "
                    f"({done_traj}/{total_traj}, {rate:.1f} traj/s)"
                )
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (L, g_index, start, records), task in zip(pool.map(_batch_task, tasks), tasks):
                results.append((L, g_index, start, records))
                done_traj += task[5]
                if progress:
                    rate = done_traj / max(time.time() - t0, 1e-9)
                    progress(
                        f"L={L} g={cfg.g_grid[g_index]:g}: +{len(records)} trajectories "
                        f"({done_traj}/{total_traj}, {rate:.1f} traj/s)"
                    )

    # Deterministic aggregation: group by cell, order records by trajectory index.
    by_cell: dict = {}
    for L, g_index, start, records in sorted(results, key=lambda r: (r[0], r[1], r[2])):
        by_cell.setdefault((L, g_index), []).extend(records)

    n_samples = cfg.n_steps // cfg.stride + 1
    times = np.arange(n_samples) * (cfg.stride * cfg.dt)
    cells = []
    for L in cfg.L:
        for g_index, g in enumerate(cfg.g_grid):
            records = by_cell[(L, g_index)]
            records.sort(key=lambda r: r.index)
            assert len(records) == cfg.n_traj
            ent = np.stack([r.entropy for r in records])
            mix = np.stack([r.mixedness for r in records])
            cells.append(
                CellResult(
                    L=L,
                    g=g,
                    g_index=g_index,
                    stats=trajectory_statistics(records),
                    mean_entropy=ent.mean(axis=0),
                    mean_mixedness=mix.mean(axis=0),
                    s_avgs=np.array([r.s_avg for r in records]),
                    mixedness_avgs=np.array([r.mixedness_avg for r in records]),
                )
            )

    provenance = {
        "engine_version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
        "workers": workers,
        "batch_size": batch_size,
        "created_unix": int(t0),
    }
    kept = None
    if keep_records:
        kept = {(L, cfg.g_grid[g_index]): recs for (L, g_index), recs in by_cell.items()}
    return SweepResult(config=cfg, times=times, cells=cells, provenance=provenance, records=kept)


SWEEP_TABLE_COLUMNS = ("L", "g", "S_mean", "S_std", "mixedness_mean", "mixedness_std", "n_traj")


def save_sweep(result: SweepResult, out_dir, save_trajectories: bool = False) -> dict:
    """Persist a sweep: JSON summary, the flat table, and the mean time series.

    Returns a dict of written paths.  Per-trajectory NDJSON output requires a
    result produced with ``keep_records=True``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    payload = {
        "config": result.config.to_dict(),
        "provenance": result.provenance,
        "cells": [
            {
                "L": c.L,
                "g": c.g,
                "g_index": c.g_index,
                "n_traj": c.stats.n_traj,
                "S_mean": c.stats.s_mean,
                "S_std": c.stats.s_std,
                "mixedness_mean": c.stats.mixedness_mean,
                "mixedness_std": c.stats.mixedness_std,
            }
            for c in result.cells
        ],
        "mean_timeseries": [
            {
                "L": c.L,
                "g": c.g,
                "times": result.times.tolist(),
                "S": c.mean_entropy.tolist(),
                "mixedness": c.mean_mixedness.tolist(),
            }
            for c in result.cells
        ],
    }
    paths["json"] = out / "sweep.json"
    paths["json"].write_text(json.dumps(payload, indent=1))

    lines = [",".join(SWEEP_TABLE_COLUMNS)]
    for c in sorted(result.cells, key=lambda c: (c.L, c.g)):
        lines.append(
            f"{c.L},{c.g!r},{c.stats.s_mean!r},{c.stats.s_std!r},"
            f"{c.stats.mixedness_mean!r},{c.stats.mixedness_std!r},{c.stats.n_traj}"
        )
    paths["table"] = out / "sweep.csv"
    paths["table"].write_text("\n".join(lines) + "\n")

    ts_lines = ["L,g,t,S_mean,mixedness_mean"]
    for c in sorted(result.cells, key=lambda c: (c.L, c.g)):
        for t, s, m in zip(result.times, c.mean_entropy, c.mean_mixedness):
            ts_lines.append(f"{c.L},{c.g!r},{t!r},{s!r},{m!r}")
    paths["timeseries"] = out / "timeseries.csv"
    paths["timeseries"].write_text("\n".join(ts_lines) + "\n")

    if save_trajectories:
        if result.records is None:
            raise ValueError("save_trajectories requires a sweep run with keep_records=True")
        nd = out / "trajectories.ndjson"
        with nd.open("w") as fh:
            for (L, g), recs in sorted(result.records.items()):
                for r in recs:
                    row = {
                        "L": L,
                        "g": g,
                        "index": r.index,
                        "seed_key": list(r.seed_key),
                        "s_avg": r.s_avg,
                        "mixedness_avg": r.mixedness_avg,
                        "entropy": r.entropy.tolist(),
                        "mixedness": r.mixedness.tolist(),
                    }
                    if r.outcomes is not None:
                        row["outcomes"] = r.outcomes.tolist()
                    fh.write(json.dumps(row) + "\n")
        paths["trajectories"] = nd

    return paths
