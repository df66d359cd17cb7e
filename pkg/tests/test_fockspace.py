import numpy as np
import pytest

from zenochain.fockspace import (
    StateVector,
    build_basis,
    config_state,
    domain_wall_state,
    initial_state,
    neel_state,
)
from zenochain.observables import reduced_density_matrix, von_neumann_entropy


def brute_force_count(L, N):
    # independent enumeration oracle: scan every integer below 2^L
    return sum(1 for c in range(1 << L) if bin(c).count("1") == N)


def test_two_site_basis():
    basis = build_basis(2, 1)
    assert basis.dim == 2
    assert list(basis.configs) == [0b01, 0b10]


@pytest.mark.parametrize("L,N,size", [(4, 2, 6), (6, 3, 20), (12, 6, 924)])
def test_basis_sizes(L, N, size):
    basis = build_basis(L, N)
    assert basis.dim == size
    assert basis.dim == brute_force_count(L, N)


@pytest.mark.parametrize("L", [2, 4, 6, 8, 10, 12])
def test_index_roundtrip_and_sorted(L):
    basis = build_basis(L, L // 2)
    assert np.all(np.diff(basis.configs) > 0)
    for k, config in enumerate(basis.configs):
        assert basis.index_of(int(config)) == k
    counts = np.array([bin(int(c)).count("1") for c in basis.configs])
    assert np.all(counts == L // 2)


def test_index_of_rejects_unknown_config():
    basis = build_basis(4, 2)
    with pytest.raises(KeyError):
        basis.index_of(0b0001)


@pytest.mark.parametrize("L,N", [(3, 1), (5, 2), (0, 0), (18, 9)])
def test_build_basis_rejects_bad_sizes(L, N):
    with pytest.raises(ValueError):
        build_basis(L, N)


def test_build_basis_rejects_bad_filling():
    with pytest.raises(ValueError):
        build_basis(4, 5)
    with pytest.raises(ValueError):
        build_basis(4, -1)


def test_neel_state_configuration():
    basis = build_basis(4, 2)
    psi = neel_state(basis)
    hot = np.nonzero(psi.amps)[0]
    assert len(hot) == 1
    assert int(basis.configs[hot[0]]) == 0b0101

    basis6 = build_basis(6, 3)
    config = int(basis6.configs[np.nonzero(neel_state(basis6).amps)[0][0]])
    assert bin(config).count("1") == 3


def test_domain_wall_configuration():
    basis = build_basis(4, 2)
    hot = np.nonzero(domain_wall_state(basis).amps)[0]
    assert int(basis.configs[hot[0]]) == 0b0011

    basis6 = build_basis(6, 3)
    config = int(basis6.configs[np.nonzero(domain_wall_state(basis6).amps)[0][0]])
    assert bin(config).count("1") == 3


@pytest.mark.parametrize("ctor", [neel_state, domain_wall_state])
def test_initial_states_are_unentangled_products(ctor):
    basis = build_basis(8, 4)
    psi = ctor(basis)
    assert psi.norm() == 1.0
    assert von_neumann_entropy(reduced_density_matrix(psi)) == 0.0


def test_initial_states_require_half_filling():
    basis = build_basis(4, 1)
    with pytest.raises(ValueError):
        neel_state(basis)
    with pytest.raises(ValueError):
        domain_wall_state(basis)


def test_initial_state_lookup():
    basis = build_basis(4, 2)
    assert np.array_equal(initial_state(basis, "neel").amps, neel_state(basis).amps)
    with pytest.raises(ValueError):
        initial_state(basis, "bogus")


def test_normalize():
    basis = build_basis(4, 2)
    psi = StateVector(basis, np.full(basis.dim, 1.0 + 0j))
    psi.normalize()
    assert abs(psi.norm() - 1.0) < 1e-12
    with pytest.raises(ValueError):
        StateVector(basis, np.zeros(basis.dim, dtype=complex)).normalize()


def test_config_state_requires_member():
    basis = build_basis(4, 2)
    with pytest.raises(KeyError):
        config_state(basis, 0b1111)
