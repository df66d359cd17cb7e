"""Bipartite observables on the prefix half-chain cut.

Subsystem A is sites 1 .. L/2 (the low bits).  With fermionic modes ordered
left block then right block, a prefix cut introduces no reordering signs, so
the state reshapes directly into an amplitude matrix A[left, right] and the
Schmidt spectrum comes from its singular values: better conditioned for the
small eigenvalues entering the entropy log than diagonalizing rho_A.  The
spectrum is normalized to exact unit trace before use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from zenochain.fockspace import FockBasis, StateVector

ENTROPY_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ReducedDensityMatrix:
    """Half-chain reduced state: dense matrix plus its Schmidt spectrum."""

    cut: int              # number of sites in subsystem A (= L/2)
    matrix: np.ndarray    # complex PSD matrix over the 2^cut left patterns
    spectrum: np.ndarray  # descending eigenvalues, normalized to sum exactly 1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled observable trace along one trajectory."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1D arrays of equal length")
        dt = np.diff(self.times)
        if self.times.size >= 2 and not np.all(dt > 0):
            raise ValueError("times must be strictly increasing")
        if self.times.size >= 3 and not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ValueError("times must be uniformly spaced")


@dataclass(frozen=True)
class TrajectoryStats:
    """Across-trajectory aggregates of the windowed time averages."""

    s_mean: float
    s_std: float
    mixedness_mean: float
    mixedness_std: float
    n_traj: int


def bipartition_indices(basis: FockBasis) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Left/right pattern index of every configuration under the prefix cut."""
    half = basis.L // 2
    left = (basis.configs & ((1 << half) - 1)).astype(np.intp)
    right = (basis.configs >> half).astype(np.intp)
    return left, right, 1 << half, 1 << (basis.L - half)


def amplitude_matrix(psi: StateVector) -> np.ndarray:
    """Scatter the amplitudes into the (left pattern) x (right pattern) matrix."""
    left, right, dl, dr = bipartition_indices(psi.basis)
    mat = np.zeros((dl, dr), dtype=np.complex128)
    mat[left, right] = psi.amps
    return mat


def schmidt_spectrum(psi: StateVector) -> np.ndarray:
    """Descending squared singular values of the amplitude matrix, unit sum."""
    sv = np.linalg.svd(amplitude_matrix(psi), compute_uv=False)
    lam = sv * sv
    total = lam.sum()
    if total <= 0.0:
        raise ValueError("zero state vector has no Schmidt spectrum")
    return lam / total


def reduced_density_matrix(psi: StateVector) -> ReducedDensityMatrix:
    """rho_A for the prefix half-chain cut of a normalized pure state."""
    if psi.basis.L % 2 != 0:
        raise ValueError("half-chain cut requires even L")
    mat = amplitude_matrix(psi)
    rho = mat @ mat.conj().T
    sv = np.linalg.svd(mat, compute_uv=False)
    lam = sv * sv
    lam = lam / lam.sum()
    return ReducedDensityMatrix(cut=psi.basis.L // 2, matrix=rho, spectrum=lam)


def spectral_entropy(lam: np.ndarray, floor: float = ENTROPY_FLOOR) -> float:
    """-sum lam ln lam over eigenvalues above the floor, clamped at 0 (nats)."""
    kept = lam[lam > floor]
    return max(float(-np.sum(kept * np.log(kept))), 0.0) + 0.0


def von_neumann_entropy(rho: ReducedDensityMatrix) -> float:
    """Entanglement entropy in nats."""
    return spectral_entropy(rho.spectrum)


def purity(rho: ReducedDensityMatrix) -> float:
    """Tr rho^2 = sum of squared Schmidt eigenvalues."""
    return float(np.sum(rho.spectrum * rho.spectrum))


def batch_schmidt_spectra(A: np.ndarray, left: np.ndarray, right: np.ndarray, dl: int, dr: int) -> np.ndarray:
    """Schmidt spectra of every column of a (dim, B) amplitude block.

    Returns (B, min(dl, dr)) eigenvalues, each row normalized to unit sum.
    """
    B = A.shape[1]
    mats = np.zeros((B, dl, dr), dtype=np.complex128)
    mats[:, left, right] = A.T
    sv = np.linalg.svd(mats, compute_uv=False)
    lam = sv * sv
    lam /= lam.sum(axis=1, keepdims=True)
    return lam


def batch_entropy_purity(lam: np.ndarray, floor: float = ENTROPY_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Entropy (nats) and purity per spectrum row of ``batch_schmidt_spectra``."""
    safe = np.where(lam > floor, lam, 1.0)
    entropy = np.maximum(-np.sum(np.where(lam > floor, lam * np.log(safe), 0.0), axis=1), 0.0) + 0.0
    pur = np.sum(lam * lam, axis=1)
    return entropy, pur


def time_window_average(ts: TimeSeries, t_lo: float, t_hi: float) -> float:
    """Trapezoidal average of the samples falling in [t_lo, t_hi]."""
    if not t_lo < t_hi:
        raise ValueError(f"need t_lo < t_hi, got [{t_lo}, {t_hi}]")
    t = ts.times
    eps = 1e-9 * max(1.0, abs(t_hi))
    if t_lo < t[0] - eps or t_hi > t[-1] + eps:
        raise ValueError(f"window [{t_lo}, {t_hi}] outside sampled range [{t[0]}, {t[-1]}]")
    sel = (t >= t_lo - eps) & (t <= t_hi + eps)
    tw = t[sel]
    yw = ts.values[sel]
    if tw.size < 2:
        raise ValueError("window contains fewer than two samples")
    return float(np.trapezoid(yw, tw) / (tw[-1] - tw[0]))


def trajectory_statistics(records) -> TrajectoryStats:
    """Population mean/std of the windowed averages across trajectory records.

    The standard deviation is the plain population formula
    sqrt(<x^2> - <x>^2) with no Bessel correction.
    """
    if len(records) == 0:
        raise ValueError("no trajectory records to aggregate")
    s = np.array([r.s_avg for r in records])
    m = np.array([r.mixedness_avg for r in records])
    return TrajectoryStats(
        s_mean=float(s.mean()),
        s_std=float(s.std()),
        mixedness_mean=float(m.mean()),
        mixedness_std=float(m.std()),
        n_traj=len(records),
    )
