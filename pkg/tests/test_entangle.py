import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydlink import entangle as en
from rydlink import evolve as ev
from rydlink.errors import InvalidArgumentError, ResourceError
from rydlink.hilbert import enumerate_basis, full_basis
from rydlink.models import build_pxp

import oracles as O

LN2 = math.log(2)


def _random_state(D, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=D) + 1j * rng.normal(size=D)
    return v / np.linalg.norm(v)


def test_product_state_is_pure():
    B = enumerate_basis(8, "PBC")
    z2 = B.product_state(0b01010101)
    r = en.rdm(z2, B, [0, 3, 5])
    assert np.linalg.matrix_rank(r.matrix, tol=1e-12) == 1
    assert en.mutual_information(z2, B, [0, 1], [4, 5]) == 0
    assert en.negativity(z2, B, [0, 1], [4, 5]) == 0


def test_z2_single_site_by_parity():
    B = enumerate_basis(8, "PBC")
    z2 = B.product_state(0b01010101)
    assert np.allclose(en.rdm(z2, B, [0]).matrix, np.diag([0, 1]))
    assert np.allclose(en.rdm(z2, B, [1]).matrix, np.diag([1, 0]))


@pytest.mark.parametrize("sites", [(2, 3), (5, 1), (0, 4, 6)])
def test_rdm_matches_dense_oracle(sites):
    n = 8
    B = enumerate_basis(n, "PBC")
    H = build_pxp(B)
    psi = ev.propagate(H, B.product_state(0), 1.0)
    r = en.rdm(psi, B, sites)
    r.check()
    ref = O.partial_trace_keep(O.embed(psi, B.states, n), n, list(sites))
    assert np.abs(r.matrix - ref).max() < 1e-12
    assert np.allclose(r.eigenvalues(), np.linalg.eigvalsh(ref), atol=1e-10)


def test_bell_pair_identities():
    # (|01> + |10>)/sqrt2 is allowed by the blockade on two open sites
    B = enumerate_basis(2, "OBC")
    psi = np.zeros(B.dim, dtype=complex)
    psi[B.lookup(np.array([1, 2]))] = 1 / math.sqrt(2)
    assert en.mutual_information(psi, B, [0], [1]) == pytest.approx(2 * LN2, abs=1e-12)
    assert en.negativity(psi, B, [0], [1]) == pytest.approx(LN2, abs=1e-12)
    # and on the full space, between distant sites
    F = full_basis(4, "OBC")
    phi = np.zeros(F.dim, dtype=complex)
    phi[F.lookup(np.array([0, 0b0101]))] = 1 / math.sqrt(2)
    assert en.mutual_information(phi, F, [0], [2]) == pytest.approx(2 * LN2, abs=1e-12)
    assert en.negativity(phi, F, [0], [2]) == pytest.approx(LN2, abs=1e-12)
    assert en.mutual_information(phi, F, [1], [3]) == pytest.approx(0, abs=1e-12)


def test_subsystem_validation():
    B = enumerate_basis(14, "PBC")
    psi = B.product_state(0)
    with pytest.raises(InvalidArgumentError):
        en.mutual_information(psi, B, [0, 1], [1, 2])
    with pytest.raises(InvalidArgumentError):
        en.negativity(psi, B, [0], [])
    with pytest.raises(InvalidArgumentError):
        en.rdm(psi, B, [14])
    with pytest.raises(ResourceError):
        en.rdm(psi, B, range(13))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), data=st.data())
def test_complement_symmetry(seed, data):
    n = 10
    B = enumerate_basis(n, "PBC")
    psi = _random_state(B.dim, seed)
    A = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n - 1, unique=True))
    Ac = [s for s in range(n) if s not in A]
    assert en.entropy_of(en.rdm(psi, B, A)) == pytest.approx(en.entropy_of(en.rdm(psi, B, Ac)), abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), data=st.data())
def test_information_and_negativity_nonnegative(seed, data):
    n = 10
    B = enumerate_basis(n, "PBC")
    psi = _random_state(B.dim, seed)
    sites = data.draw(st.permutations(range(n)))
    na = data.draw(st.integers(1, 3))
    nb = data.draw(st.integers(1, 3))
    A, Bs = sites[:na], sites[na:na + nb]
    I = en.mutual_information(psi, B, A, Bs)
    N = en.negativity(psi, B, A, Bs)
    assert I >= 0 and N >= 0
    if N > 0:
        assert I > 0


def test_negativity_implies_information_along_quench():
    n = 12
    B = enumerate_basis(n, "PBC")
    H = build_pxp(B)
    traj = ev.evolve_trajectory(H, B.product_state(0), [0.5, 1.5, 3.0])
    m = en.entanglement_map(traj, 2, [2, 3, 4, 5, 6])
    assert np.all(m.mutual_information[m.negativity > 0] > 0)


def _front(row, distances, threshold):
    above = np.flatnonzero(row > threshold)
    return distances[above.max()] if len(above) else np.nan


def test_mutual_information_front_moves_out():
    n = 16
    B = enumerate_basis(n, "PBC")
    H = build_pxp(B)
    traj = ev.evolve_trajectory(H, B.product_state(0), [1.0, 2.0, 3.0])
    m = en.entanglement_map(traj, 3, list(range(3, 9)))
    fronts = [_front(r, m.distances, 0.05) for r in m.mutual_information]
    assert fronts[0] < fronts[1] < fronts[2]


@pytest.mark.xfail(strict=True, reason="touching regions always carry the largest I, so the argmax stays at d = |A|")
def test_mutual_information_argmax_moves_out():
    n = 16
    B = enumerate_basis(n, "PBC")
    H = build_pxp(B)
    traj = ev.evolve_trajectory(H, B.product_state(0), [1.0, 2.0, 3.0])
    m = en.entanglement_map(traj, 3, list(range(3, 9)))
    arg = m.distances[m.mutual_information.argmax(axis=1)]
    assert arg[0] < arg[1] < arg[2]


def test_region_pairs_and_band_position():
    pairs = en.region_pairs(10, 2, [2, 4])
    assert pairs[1] == (4, (0, 1), (4, 5))
    assert en.region_pairs(10, 2, [9], periodic=False) == []
    with pytest.raises(InvalidArgumentError):
        en.region_pairs(10, 3, [2])
    m = en.EntanglementMap(np.array([0.0, 1.0]), np.array([2, 3, 4, 5]), np.zeros((2, 4)),
                           np.array([[0.5, 0.1, 0.0, 0.0], [0.5, 0.1, 0.2, 0.05]]), 2)
    band = m.band_position()
    assert np.isnan(band[0]) and band[1] == 4
    assert m.band_position(detached=False)[1] == 2


def test_bitstring_average_is_uniform():
    n = 6
    B = enumerate_basis(n, "PBC")
    H = build_pxp(B)
    times = [0.0, 1.0]
    avg = en.bitstring_averaged_map(H, B, 1, [1, 2, 3], times)
    maps = [en.entanglement_map(ev.evolve_trajectory(H, B.product_state(int(c)), times), 1, [1, 2, 3])
            for c in B.states]
    assert np.allclose(avg.negativity, np.mean([m.negativity for m in maps], axis=0))
    assert np.allclose(avg.mutual_information, np.mean([m.mutual_information for m in maps], axis=0))
