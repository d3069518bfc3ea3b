import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import LOCAL, X, Z, brute_basis, dense_pxp, full_pxp, site_op
from rydlink.errors import InvalidArgumentError
from rydlink.hilbert import enumerate_basis, full_basis, parse_bitstring
from rydlink.models import (ModelSpec, build_model, build_pxp, particle_hole_conjugation,
                            rydberg_nn_interaction, schwinger_pxp_map)


def _entry(H, a, b):
    B = H.basis
    return H.matrix[B.index_of(parse_bitstring(a)), B.index_of(parse_bitstring(b))]


def test_pxp_examples():
    H = build_pxp(enumerate_basis(4, "PBC"))
    v = H.matrix @ H.basis.product_state(0)
    assert sorted(H.basis.states[np.flatnonzero(v)]) == [1, 2, 4, 8]
    assert np.all(v[v != 0] == 1)
    assert _entry(H, "1010", "1000") == 1
    assert _entry(H, "1010", "0101") == 0
    w = np.linalg.eigvalsh(H.dense())
    assert np.allclose(np.sort(w), np.sort(-w), atol=1e-12)


@pytest.mark.parametrize("n,bc", [(6, "PBC"), (9, "PBC"), (7, "OBC"), (10, "OBC")])
def test_pxp_matches_kronecker_oracle(n, bc):
    H = build_pxp(enumerate_basis(n, bc))
    assert np.array_equal(H.matrix.toarray(), dense_pxp(n, bc == "PBC"))


@pytest.mark.parametrize("n,bc", [(8, "PBC"), (9, "OBC")])
def test_pxp_anticommutes_with_conjugation(n, bc):
    H = build_pxp(enumerate_basis(n, bc))
    c = particle_hole_conjugation(H.basis)
    M = H.matrix.toarray()
    assert np.abs(c[:, None] * M * c[None, :] + M).max() == 0


@pytest.mark.parametrize("variant", ["PXP", "RydbergLongRange", "MixedFieldIsing", "TransverseFieldIsing", "XXZ"])
def test_hermitian(variant):
    H = build_model(ModelSpec(variant, 6, "PBC"))
    assert H.hermiticity_error() == 0


def test_rydberg_diagonal():
    spec = ModelSpec("RydbergLongRange", 4, "OBC", {"omega": 0.0, "delta": 0.0, "c6": 1e-3, "a": 1.0})
    H = build_model(spec)
    assert H.matrix[H.basis.index_of(parse_bitstring("1010")), H.basis.index_of(parse_bitstring("1010"))] == pytest.approx(1 / 64, abs=1e-15)
    spec = ModelSpec("RydbergLongRange", 4, "OBC", {"omega": 0.0, "delta": 0.7, "c6": 1e-3, "a": 1.0})
    H = build_model(spec)
    i = H.basis.index_of(parse_bitstring("1000"))
    assert H.matrix[i, i] == pytest.approx(-0.7)


def test_rydberg_oracle_full_space():
    n = 5
    p = {"omega": 6.9, "delta": 0.5, "c6": 254.0, "a": 3.77}
    H = build_model(ModelSpec("RydbergLongRange", n, "OBC", p)).matrix.toarray()
    V = 254.0e3 / 3.77**6
    nop = LOCAL["n"]
    ref = sum(p["omega"] / 2 * site_op({j: X}, n) - p["delta"] * site_op({j: nop}, n) for j in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            ref = ref + V / (j - i) ** 6 * site_op({i: nop, j: nop}, n)
    assert np.abs(H - ref).max() < 1e-10


def test_rydberg_dataset_interaction():
    # direct evaluation of C6 / a^6 with C6 = 254 GHz um^6, a = 3.77 um
    assert rydberg_nn_interaction(254.0, 3.77) == pytest.approx(254.0e3 / 3.77**6, rel=1e-14)
    assert rydberg_nn_interaction(254.0, 3.77) == pytest.approx(87.9, rel=0.01)
    with pytest.raises(InvalidArgumentError):
        rydberg_nn_interaction(254.0, 0.0)


def test_schwinger_diagonal_oracle():
    n, eps0, J = 6, -0.5, 1.3
    H = build_model(ModelSpec("SchwingerSpin", n, "OBC", {"w": 0.0, "m": 0.0, "J": J, "eps0": eps0}))
    assert sp_is_diagonal(H.matrix)
    # all spins down: sigma^z = -1 everywhere, configuration with every bit set
    sz = -np.ones(n)
    L = [eps0 + 0.5 * sum(sz[l] + (-1) ** l for l in range(m + 1)) for m in range(n - 1)]
    c = (1 << n) - 1
    assert H.matrix[c, c] == pytest.approx(J * sum(x * x for x in L))


def test_schwinger_mass_staggering():
    n, m = 4, 0.6
    H = build_model(ModelSpec("SchwingerSpin", n, "OBC", {"w": 0.0, "m": m, "J": 0.0, "eps0": -0.5}))
    for j in range(n):
        a = H.matrix[1 << j, 1 << j]  # flip one spin down from all-up (all-up has energy 0)
        assert a == pytest.approx(-m * (-1) ** j)


def test_schwinger_rejects_pbc():
    with pytest.raises(InvalidArgumentError):
        build_model(ModelSpec("SchwingerSpin", 4, "PBC"))


def sp_is_diagonal(M):
    M = M.tocoo()
    return np.all(M.row[M.data != 0] == M.col[M.data != 0])


def test_schwinger_recovers_pxp():
    n, t = 8, 2.0
    H = build_model(ModelSpec("SchwingerSpin", n, "OBC", {"w": 1.0, "m": 0.0, "J": 50.0, "eps0": -0.5})).dense()
    links, idx = schwinger_pxp_map(n)
    Hp = build_pxp(links).dense()
    assert np.all(idx >= 0)
    # the images span the lowest-penalty block of the full spectrum
    # every link field is +-1/2 on the images: they all carry the minimal penalty J (N - 1) / 4
    assert np.allclose(np.diag(H)[idx], 50.0 * (n - 1) / 4)
    assert np.diag(H).min() == pytest.approx(50.0 * (n - 1) / 4)
    psi_link = links.product_state(0)
    psi = np.zeros(H.shape[0], complex)
    psi[idx] = psi_link
    a = sla.expm(-1j * t * H) @ psi
    b = sla.expm(-1j * t * Hp) @ psi_link
    F = abs(np.vdot(a[idx], b)) ** 2
    assert F >= 0.99


def test_mfim_two_site_oracle():
    H = build_model(ModelSpec("MixedFieldIsing", 2, "OBC", {"hx": 0.8090, "hz": 0.9045, "J": 1.0}))
    ref = sum(0.8090 * site_op({j: X}, 2) + 0.9045 * site_op({j: Z}, 2) for j in range(2))
    ref = ref + site_op({0: X, 1: X}, 2)
    assert np.allclose(np.linalg.eigvalsh(H.dense()), np.linalg.eigvalsh(ref), atol=1e-12)


def test_xxz_conserves_magnetization():
    n = 6
    H = build_model(ModelSpec("XXZ", n, "PBC")).dense()
    Mz = sum(site_op({j: Z}, n) for j in range(n))
    assert np.abs(H @ Mz - Mz @ H).max() < 1e-13


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=20, deadline=None)
def test_ising_spectrum_matches_oracle(hx, hz, J):
    n = 4
    H = build_model(ModelSpec("MixedFieldIsing", n, "PBC", {"hx": hx, "hz": hz, "J": J})).dense()
    ref = sum(hx * site_op({j: X}, n) + hz * site_op({j: Z}, n) + J * site_op({j: X, (j + 1) % n: X}, n)
              for j in range(n))
    assert np.abs(H - ref).max() < 1e-12


def test_spec_validation_and_roundtrip():
    s = ModelSpec("PXP", 8, "PBC")
    assert ModelSpec.from_dict(s.to_dict()).digest() == s.digest()
    with pytest.raises(InvalidArgumentError):
        ModelSpec("Bogus", 4)
    with pytest.raises(InvalidArgumentError):
        ModelSpec("PXP", 4, "PBC", {"omega": 1.0})
    with pytest.raises(InvalidArgumentError):
        ModelSpec("PXP", 0)


def test_full_space_pxp_agrees_with_blockaded():
    n = 6
    Hf = full_pxp(n, True)
    cfg = brute_basis(n, True)
    assert np.array_equal(Hf[np.ix_(cfg, cfg)].real, build_pxp(enumerate_basis(n, "PBC")).dense())
