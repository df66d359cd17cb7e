"""Fixed particle-number occupation basis for a 1D spinless-fermion chain.

Conventions used throughout the package: bit j (0-based) of an integer
configuration encodes the occupation of chain site j+1 (1-based), so the
alternating initial state occupies the even bit positions.  Configurations
are stored sorted by integer value and addressed by their ordinal index.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

# Dense propagators above this size exceed desk-scale memory.
L_MAX = 16


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Ordered enumeration of all N-particle configurations on L sites."""

    L: int
    N: int
    configs: np.ndarray  # sorted int64 bitmasks, strictly ascending

    @property
    def dim(self) -> int:
        return int(self.configs.size)

    def index_of(self, config: int) -> int:
        """Ordinal of ``config`` in the sorted enumeration (inverse of ``configs``)."""
        k = int(np.searchsorted(self.configs, config))
        if k == self.dim or int(self.configs[k]) != int(config):
            raise KeyError(f"configuration {int(config):#b} not in basis")
        return k

    @property
    def half_filled(self) -> bool:
        return self.N * 2 == self.L


@dataclass(eq=False)
class StateVector:
    """Normalized complex amplitude vector over a :class:`FockBasis`."""

    basis: FockBasis
    amps: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "StateVector":
        n = np.linalg.norm(self.amps)
        if n == 0.0:
            raise ValueError("cannot normalize a zero state vector")
        self.amps /= n
        return self

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amps.copy())


def build_basis(L: int, N: int) -> FockBasis:
    """Enumerate all N-bit configurations over L sites, sorted ascending.

    L must be even (the chain is always bipartitioned at L/2) and at most
    ``L_MAX``; the latter is a memory guard for the dense propagator.
    """
    if L < 2 or L % 2 != 0:
        raise ValueError(f"L must be an even integer >= 2, got {L}")
    if L > L_MAX:
        raise ValueError(f"L = {L} exceeds the dense-propagator ceiling L = {L_MAX}")
    if not 0 <= N <= L:
        raise ValueError(f"particle number N = {N} outside [0, {L}]")
    vals = sorted(sum(1 << p for p in occ) for occ in combinations(range(L), N))
    configs = np.array(vals, dtype=np.int64)
    configs.setflags(write=False)
    assert configs.size == comb(L, N)
    return FockBasis(L=L, N=N, configs=configs)


def config_state(basis: FockBasis, config: int) -> StateVector:
    """Product state with amplitude 1 on a single occupation configuration."""
    amps = np.zeros(basis.dim, dtype=np.complex128)
    amps[basis.index_of(config)] = 1.0
    return StateVector(basis, amps)


def neel_state(basis: FockBasis) -> StateVector:
    """Alternating product state occupying the odd sites 1, 3, 5, ...

    In bit language that is every even bit position, e.g. 0101 for L = 4.
    """
    if not basis.half_filled:
        raise ValueError("alternating initial state requires half filling (N = L/2)")
    mask = sum(1 << (2 * k) for k in range(basis.L // 2))
    return config_state(basis, mask)


def domain_wall_state(basis: FockBasis) -> StateVector:
    """Product state with all particles packed into sites 1 .. L/2."""
    if not basis.half_filled:
        raise ValueError("domain-wall initial state requires half filling (N = L/2)")
    mask = (1 << (basis.L // 2)) - 1
    return config_state(basis, mask)


INITIAL_STATES = {
    "neel": neel_state,
    "domain_wall": domain_wall_state,
}


def initial_state(basis: FockBasis, tag: str) -> StateVector:
    """Look up an initial-state constructor by tag ('neel' or 'domain_wall')."""
    try:
        ctor = INITIAL_STATES[tag]
    except KeyError:
        raise ValueError(f"unknown initial state {tag!r}; choose from {sorted(INITIAL_STATES)}") from None
    return ctor(basis)
