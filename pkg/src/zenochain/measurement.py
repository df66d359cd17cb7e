"""Two-outcome local occupation measurement applied as a site sweep.

Each site carries a Kraus pair that is diagonal in the occupation basis:
reading 1 ("site seen empty") projects out the occupied component, reading 0
damps the empty component by sqrt(1 - eta) and leaves the occupied one
untouched.  Outcome 1 fires with Born probability eta * <1 - n_site>.  All
site operators commute, so sweeping the sites in ascending order while
conditioning each probability on the partially collapsed, renormalized state
samples the exact joint distribution of the tensor-product measurement;
drawing every site independently from the pre-sweep marginals would not.

The per-site update never builds an operator: with q = <1 - n_j> on the
current state,

    outcome 1 (prob eta*q):  empty components /= sqrt(q),   occupied -> 0
    outcome 0 (else):        empty *= sqrt(1-eta),  all /= sqrt(1 - eta*q)

which folds the measurement and the renormalization into two scale factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from zenochain.fockspace import FockBasis, StateVector


@dataclass(frozen=True)
class MeasurementConfig:
    """Per-step measurement strength; eta and g = eta/dt are kept consistent."""

    eta: float
    g: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1] for valid probabilities, got {self.eta}")
        if not math.isclose(self.g * self.dt, self.eta, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"inconsistent parameters: g*dt = {self.g * self.dt} != eta = {self.eta}")

    @classmethod
    def from_strength(cls, g: float, dt: float) -> "MeasurementConfig":
        """Build from the rate-like strength g; eta = g*dt must not exceed 1."""
        return cls(eta=g * dt, g=g, dt=dt)

    @classmethod
    def from_eta(cls, eta: float, dt: float) -> "MeasurementConfig":
        return cls(eta=eta, g=eta / dt, dt=dt)


@dataclass(frozen=True, eq=False)
class OutcomeRecord:
    """Readouts of one sweep; bit j = 1 means site j+1 was seen empty."""

    bits: np.ndarray  # uint8, length L


@lru_cache(maxsize=16)
def empty_site_masks(basis: FockBasis) -> np.ndarray:
    """Boolean (L, dim) table: entry [j, k] is True when config k has site j+1 empty."""
    shifts = np.arange(basis.L, dtype=np.int64)
    masks = ((basis.configs[None, :] >> shifts[:, None]) & 1) == 0
    masks.setflags(write=False)
    return masks


def apply_measurement_sweep(psi: StateVector, cfg: MeasurementConfig, rng) -> tuple[StateVector, OutcomeRecord]:
    """Measure every site once, in ascending site order, renormalizing per site.

    Mutates ``psi`` in place and returns it together with the sampled
    readouts.  Exactly L uniform variates are consumed regardless of the
    outcomes, so trajectories with a common seed stay aligned.
    """
    basis = psi.basis
    eta = cfg.eta
    outcomes = np.zeros(basis.L, dtype=np.uint8)
    u = rng.random(basis.L)
    if eta == 0.0:
        return psi, OutcomeRecord(outcomes)
    amps = psi.amps
    masks = empty_site_masks(basis)
    for j in range(basis.L):
        empty = masks[j]
        q = float(np.sum(np.abs(amps[empty]) ** 2))
        if u[j] < eta * q:
            if q <= 0.0:
                raise RuntimeError("measurement fired on a zero-weight outcome; RNG/probability bug")
            outcomes[j] = 1
            amps[~empty] = 0.0
            amps[empty] /= math.sqrt(q)
        else:
            keep = 1.0 - eta * q
            if keep <= 0.0:
                raise RuntimeError("zero post-measurement norm; RNG/probability bug")
            amps[empty] *= math.sqrt(1.0 - eta)
            amps /= math.sqrt(keep)
    return psi, OutcomeRecord(outcomes)


def apply_sweep_batch(A: np.ndarray, empty_masks: np.ndarray, eta: float, uniforms: np.ndarray) -> np.ndarray:
    """Measurement sweep over a (dim, B) block of trajectory columns, in place.

    ``uniforms`` holds one pre-drawn variate per (site, column); column b uses
    uniforms[:, b] in site order, matching the single-trajectory path.
    Returns the (L, B) boolean table of outcome-1 readouts.
    """
    L = empty_masks.shape[0]
    fired = np.zeros((L, uniforms.shape[1]), dtype=bool)
    if eta == 0.0:
        return fired
    sqrt_damp = math.sqrt(1.0 - eta)
    for j in range(L):
        empty = empty_masks[j]
        sub = A[empty]
        q = np.einsum("ib,ib->b", sub.real, sub.real) + np.einsum("ib,ib->b", sub.imag, sub.imag)
        fire = uniforms[j] < eta * q
        fired[j] = fire
        keep = 1.0 - eta * q
        q_safe = np.where(q > 0.0, q, 1.0)
        keep_safe = np.where(keep > 0.0, keep, 1.0)
        scale_empty = np.where(fire, 1.0 / np.sqrt(q_safe), sqrt_damp / np.sqrt(keep_safe))
        scale_occ = np.where(fire, 0.0, 1.0 / np.sqrt(keep_safe))
        A[empty] = sub * scale_empty
        A[~empty] *= scale_occ
    return fired


def kraus_completeness_check(eta: float) -> float:
    """Max residual of M0+M0 + M1+M1 - 1 on the single-site occupation doublet."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    n = np.array([1.0, 0.0])  # single-site occupation eigenvalues (occupied, empty)
    m0 = n + np.sqrt(1.0 - eta) * (1.0 - n)
    m1 = np.sqrt(eta) * (1.0 - n)
    return float(np.max(np.abs(m0 * m0 + m1 * m1 - 1.0)))
