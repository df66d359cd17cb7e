"""Hamiltonian and exact short-time propagator in a fixed particle-number sector.

The chain Hamiltonian is

    H = -sum_j (c+_j c_{j+1} + h.c.) + V sum_j n_j n_{j+1},

with j running over all L bonds of a periodic ring; the hopping amplitude is
the energy unit and time is measured in units of hbar.  Hops between interior
neighbours carry no Jordan-Wigner string; the wrap-around hop between sites L
and 1 picks up (-1)^(number of occupied sites strictly between them), which
is evaluated per configuration rather than assumed from the sector parity.
At L = 2 the wrap-around bond coincides with the interior bond, doubling the
hopping element to -2; that convention is kept as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from zenochain.fockspace import FockBasis, StateVector


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Dense real-symmetric Hamiltonian restricted to one (L, N) sector."""

    basis: FockBasis
    V: float
    mat: np.ndarray  # float64, shape (dim, dim)


@dataclass(frozen=True, eq=False)
class Propagator:
    """Cached exact evolution operator U = exp(-i H dt) for one (L, V, dt)."""

    basis: FockBasis
    V: float
    dt: float
    U: np.ndarray        # complex128 unitary, shape (dim, dim)
    eigvals: np.ndarray  # spectrum of H
    eigvecs: np.ndarray  # orthonormal real eigenvectors, columns


def build_hamiltonian(basis: FockBasis, V: float) -> HamiltonianMatrix:
    """Assemble the dense sector Hamiltonian for interaction strength V."""
    L = basis.L
    configs = basis.configs
    dim = basis.dim
    H = np.zeros((dim, dim))

    diag = np.zeros(dim)
    for a in range(L):
        b = (a + 1) % L
        diag += ((configs >> a) & 1) * ((configs >> b) & 1)
    H[np.diag_indices(dim)] = V * diag

    # Bits strictly between the boundary pair (sites 2 .. L-1).
    wrap_mask = ((1 << (L - 1)) - 1) & ~1
    for a in range(L):
        b = (a + 1) % L
        occ_a = (configs >> a) & 1
        occ_b = (configs >> b) & 1
        src = np.nonzero(occ_a != occ_b)[0]
        if src.size == 0:
            continue
        hopped = configs[src] ^ ((1 << a) | (1 << b))
        dst = np.searchsorted(configs, hopped)
        if b < a:
            parity = np.bitwise_count(configs[src] & wrap_mask) & 1
            amp = np.where(parity == 1, 1.0, -1.0)
        else:
            amp = np.full(src.size, -1.0)
        H[dst, src] += amp

    return HamiltonianMatrix(basis=basis, V=float(V), mat=H)


def build_propagator(H: HamiltonianMatrix, dt: float) -> Propagator:
    """Exact matrix exponential via one real-symmetric eigendecomposition.

    The eigendecomposition is paid once per (L, V, dt); each evolution step is
    then a single dense matrix-vector (or matrix-block) product.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    try:
        eigvals, eigvecs = np.linalg.eigh(H.mat)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigendecomposition failed for L={H.basis.L}, V={H.V}: {exc}"
        ) from exc
    U = (eigvecs * np.exp(-1j * dt * eigvals)) @ eigvecs.T
    return Propagator(basis=H.basis, V=H.V, dt=float(dt), U=U, eigvals=eigvals, eigvecs=eigvecs)


def apply_propagator(prop: Propagator, psi: StateVector) -> StateVector:
    """One unitary step: psi <- U psi (in place; norm preserved by unitarity)."""
    if psi.basis.L != prop.basis.L or psi.basis.N != prop.basis.N:
        raise ValueError(
            f"basis mismatch: state is (L={psi.basis.L}, N={psi.basis.N}), "
            f"propagator is (L={prop.basis.L}, N={prop.basis.N})"
        )
    psi.amps = prop.U @ psi.amps
    return psi


def energy_expectation(H: HamiltonianMatrix, psi: StateVector) -> float:
    """<psi|H|psi>, real for the real-symmetric sector Hamiltonian."""
    return float(np.real(np.vdot(psi.amps, H.mat @ psi.amps)))
