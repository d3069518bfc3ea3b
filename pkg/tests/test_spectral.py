import math

import numpy as np
import pytest
import scipy.linalg as sla

from oracles import brute_basis, dense_pxp, sparse_momentum
from rydlink import spectral as S
from rydlink.errors import InvalidArgumentError
from rydlink.hilbert import enumerate_basis
from rydlink.liouville import mean_field_dispersion
from rydlink.models import ModelSpec, build_model, build_pxp


def gaussian(x, s):
    return np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))


def oracle_idsf(n, k, omega, sigma):
    """Dense double sum over eigenpairs of the brute-force PXP ring."""
    cfg = brute_basis(n, True)
    E, V = np.linalg.eigh(dense_pxp(n, True))
    O = sparse_momentum("Z", k, 0.0, cfg, n).toarray()
    D = len(cfg)
    if abs(math.sin(k / 2)) < 1e-12:
        O = O - np.trace(O) / D * np.eye(D)
    M = np.abs(V.conj().T @ O @ V) ** 2 / D
    dE = E[:, None] - E[None, :]  # E' - E with M[E', E]
    out = np.zeros(len(omega))
    for x, m in zip(dE.ravel(), M.ravel()):
        if m > 1e-16:
            out += m * gaussian(omega - x, sigma)
    return out, (np.abs(O) ** 2).sum() / D


@pytest.mark.parametrize("j", [0, 1, 3, 4])
def test_idsf_matches_dense_oracle(j):
    n, sigma = 8, 0.1
    k = 2 * math.pi * j / n
    w = np.linspace(-5, 5, 1001)
    ref, norm2 = oracle_idsf(n, k, w, sigma)
    H = build_pxp(enumerate_basis(n, "PBC"))
    for eig in (S.diagonalize(H), S.diagonalize_by_momentum(H)):
        g = S.idsf(eig, "Z", sigma, [k], w)
        assert np.abs(g.values[0] - ref).max() < 1e-3 * ref.max()
        assert g.meta["weight"][0] == pytest.approx(norm2, rel=1e-10)


def test_sum_rule_and_fourfold_symmetry():
    n = 10
    eig = S.diagonalize_model(ModelSpec("PXP", n, "PBC"))
    ks = [2 * math.pi * j / n for j in range(n)]
    g = S.idsf(eig, "Z", 0.05, ks)
    raw = np.asarray(g.meta["weight"])
    assert np.abs(g.weights() - raw).max() < 1e-6 * raw.max()
    assert np.abs(g.values - g.values[:, ::-1]).max() < 1e-8 * g.values.max()
    for j in range(1, n):
        assert np.abs(g.values[j] - g.values[n - j]).max() < 1e-8 * g.values.max()


def test_identity_subtracted_k0_sum_rule():
    n = 10
    eig = S.diagonalize_model(ModelSpec("PXP", n, "PBC"))
    g = S.idsf(eig, "Z", 0.05, [0.0])
    cfg = brute_basis(n, True)
    O = sparse_momentum("Z", 0.0, 0.0, cfg, n).toarray()
    O = O - np.trace(O) / len(cfg) * np.eye(len(cfg))
    assert g.weights()[0] == pytest.approx((np.abs(O) ** 2).sum() / len(cfg), rel=1e-6)


def test_plasma_peak_n12():
    eig = S.diagonalize_model(ModelSpec("PXP", 12, "PBC"))
    g = S.idsf(eig, "Z", 0.05, [math.pi], np.linspace(-4, 4, 1601))
    w0 = mean_field_dispersion("A", math.pi)[-1]
    assert g.peak_frequencies()[0] == pytest.approx(w0, rel=0.15)
    assert -g.peak_frequencies(positive=False)[0] == pytest.approx(w0, rel=0.15)


def test_sigma_must_be_positive():
    eig = S.diagonalize_model(ModelSpec("PXP", 6, "PBC"))
    with pytest.raises(InvalidArgumentError):
        S.idsf(eig, "Z", 0.0)


def test_tfim_support_in_quasiparticle_bands():
    n = 10
    eig = S.diagonalize_model(ModelSpec("TransverseFieldIsing", n, "PBC"))
    w = np.linspace(-15, 15, 3001)
    sigma = 0.02
    g = S.idsf(eig, "Z", sigma, [2 * math.pi * j / n for j in range(n)], w)
    q = np.linspace(0, 2 * math.pi, 4001)

    def eps(k):  # Pauli-normalised single-particle energy of sum hz Z + J XX
        return 2 * np.sqrt(4 + 1 + 4 * np.cos(k))

    for a, k in enumerate(g.k_values):
        diff = np.abs(eps(k + q) - eps(q)).max()
        s = eps(k + q) + eps(q)
        x = np.abs(w)
        inside = (x <= diff + 6 * sigma) | ((x >= s.min() - 6 * sigma) & (x <= s.max() + 6 * sigma))
        outside = np.trapezoid(np.where(inside, 0, g.values[a]), w)
        assert outside < 1e-6 * g.weights()[a]


def test_state_weighted_maximally_mixed_reduces_to_idsf():
    n = 8
    H = build_pxp(enumerate_basis(n, "PBC"))
    eig = S.diagonalize(H)
    w = np.linspace(-4, 4, 401)
    ks = [math.pi / 2, math.pi]
    rng = np.random.default_rng(3)
    D = H.dim
    # average of state-weighted factors over a full orthonormal set equals D * idsf
    acc = 0
    U = sla.qr(rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D)))[0]
    for col in U.T:
        acc = acc + S.dsf_variant(eig, "Z", "state_weighted", psi=col, sigma=0.05, k_list=ks, omega=w).values
    ref = S.idsf(eig, "Z", 0.05, ks, w).values
    assert np.abs(acc / D - ref).max() < 1e-10 * ref.max()


def test_state_weighted_z2_peaks():
    n = 16
    H = build_pxp(enumerate_basis(n, "PBC"))
    eig = S.diagonalize_by_momentum(H)
    z2 = H.basis.product_state(sum(1 << j for j in range(0, n, 2)))
    g = S.dsf_variant(eig, "Z", "state_weighted", psi=z2, sigma=0.05, k_list=[math.pi],
                      omega=np.linspace(-3, 3, 1201))
    assert g.peak_frequencies()[0] == pytest.approx(1.33, rel=0.1)


def test_finite_t_detailed_balance():
    eig = S.diagonalize(build_pxp(enumerate_basis(8, "PBC")))
    beta = 0.4
    w = np.linspace(-4, 4, 801)
    g = S.dsf_variant(eig, "Z", "finite_T", beta=beta, sigma=0.02, k_list=[math.pi / 2], omega=w)
    v = g.values[0]
    sel = (np.abs(w) > 0.3) & (np.abs(w) < 2.5) & (v > 1e-3 * v.max()) & (v[::-1] > 1e-3 * v.max())
    ratio = v[sel] / v[::-1][sel]
    # broadening shifts the log-ratio by O(beta sigma^2 / width); tolerance covers it
    assert np.allclose(np.log(ratio), beta * w[sel], atol=0.05)
    with pytest.raises(InvalidArgumentError):
        S.dsf_variant(eig, "Z", "finite_T", beta=-1.0, sigma=0.05, k_list=[1.0])


def test_cross_structure_factor_imaginary_and_odd():
    eig = S.diagonalize_model(ModelSpec("PXP", 12, "PBC"))
    w = np.linspace(-4, 4, 801)
    g = S.dsf_variant(eig, "Z", "cross", probe_b="PYP", sigma=0.05, k_list=[math.pi / 2, 2 * math.pi / 3], omega=w)
    v = g.values
    assert np.abs(v.real).max() < 1e-10 * np.abs(v).max()
    assert np.abs(v.imag + v.imag[:, ::-1]).max() < 1e-8 * np.abs(v).max()
    assert np.abs(v.imag).max() > 1e-3


def test_participation_ratio_bounds():
    eig = S.diagonalize(build_pxp(enumerate_basis(8, "PBC")))
    assert S.participation_ratio(eig, "Z", math.pi) >= 1
    D = eig.dim
    V = eig.vectors
    proj = np.outer(V[:, 3], V[:, 5].conj())
    assert S.participation_ratio(eig, proj) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        S.participation_ratio(eig, np.zeros((D, D)))


def _pr_ratios():
    pr = {}
    for n in (10, 12, 14):
        eig = S.diagonalize_model(ModelSpec("PXP", n, "PBC"))
        pr[n] = S.participation_ratio(eig, "Z", math.pi)
    return [pr[n] / pr[n - 2] for n in (12, 14)]


PHI = (1 + math.sqrt(5)) / 2


def test_participation_ratio_growth_bounded_by_phi4():
    # PR grows faster than the Hilbert dimension (phi^2 per two sites) but
    # stays below phi^4, the largest rate a full spread over pairs allows
    for r in _pr_ratios():
        assert PHI**2 < r <= PHI**4


@pytest.mark.xfail(strict=True, reason="measured growth per two sites is ~2.9, well below phi^4 ~ 6.85")
def test_participation_ratio_growth_equals_phi4():
    for r in _pr_ratios():
        assert r == pytest.approx(PHI**4, rel=0.3)


def test_collapse_contract():
    w = np.linspace(-3, 3, 601)
    ks = np.array([0.1, 0.2, 0.3])
    flat = S.SpectralGrid(ks, w, np.ones((3, len(w))))
    assert S.scaling_collapse(flat, 0.0, 0.5).residual == 0
    # exact z = 2 diffusive Lorentzians collapse best at z = 2
    vals = np.array([(k**2 / math.pi) / (w**2 + k**4) for k in ks])
    g = S.SpectralGrid(ks, w, vals)
    best, _ = S.best_collapse(g, [1.0, 1.5, 2.0], 0.5)
    assert best.z == 2.0
    with pytest.raises(InvalidArgumentError):
        S.scaling_collapse(g, 1.0, 0.15)


def test_diagonal_ensemble():
    H = build_pxp(enumerate_basis(10, "PBC"))
    eig = S.diagonalize(H)
    psi = H.basis.product_state(0).astype(complex)
    de = S.diagonal_ensemble(eig, psi)
    Hd = H.dense()
    assert de.expectation(Hd).real == pytest.approx(np.vdot(psi, Hd @ psi).real, abs=1e-12)
    assert de.weights().sum() == pytest.approx(1.0)
    assert de.config_probabilities().sum() == pytest.approx(1.0)
    v = eig.vectors[:, 7]
    de = S.diagonal_ensemble(eig, v)
    O = np.diag(np.arange(H.dim, dtype=float))
    assert de.expectation(O).real == pytest.approx(np.vdot(v, O @ v).real, abs=1e-10)


def test_diagonal_ensemble_is_long_time_average():
    H = build_pxp(enumerate_basis(10, "PBC"))
    eig = S.diagonalize(H)
    psi = H.basis.product_state(0).astype(complex)
    O = np.diag(1.0 - 2.0 * ((H.basis.states & 1) > 0))
    target = S.diagonal_ensemble(eig, psi).expectation(O).real
    E, V = eig.energies, eig.vectors
    c = V.conj().T @ psi
    errs = []
    for T in (20, 200, 2000):
        t = np.linspace(0, T, 4001)
        amps = V @ (np.exp(-1j * np.outer(E, t)) * c[:, None])
        vals = np.einsum("it,i,it->t", amps.conj(), np.diag(O), amps).real
        errs.append(abs(vals.mean() - target))
    assert errs[2] < errs[0]


@pytest.mark.slow
def test_scar_scan_z2_spacing():
    # the Z2 tower alternates between k = 0 and k = pi, so both are pooled
    n = 18
    H = build_pxp(enumerate_basis(n, "PBC"))
    eig = S.diagonalize_by_momentum(H, momenta=[0, n // 2])
    z2 = H.basis.product_state(sum(1 << j for j in range(0, n, 2)))
    scan = S.scar_scan(eig, [z2], window=1.0)
    assert scan.threshold > 0
    assert len(scan.peaks[0]) >= n - 2
    assert scan.spacings[0] == pytest.approx(1.33, rel=0.1)


def _emax_ratios(n=16, js=(0, 1, 2, 3, 4)):
    # tower spacing of the top E_R(q) eigenstate in the k = 0 sector, over 2 w0(q);
    # the neighbourhood window is 3/4 of the expected spacing
    from rydlink import wigner as wg
    from rydlink.liouville import field_band

    B = enumerate_basis(n, "PBC")
    eig = S.diagonalize_by_momentum(build_pxp(B), momenta=[0])
    out = []
    for j in js:
        q = 2 * math.pi * j / n
        w0 = float(field_band(q))
        v = np.linalg.eigh(wg.quadrature_pair(B, q + math.pi).E_R)[1][:, -1]
        scan = S.scar_scan(eig, [v], window=1.5 * w0)
        cand = scan.band_candidates(q)
        assert cand["ratio_w0"][0] == pytest.approx(2 * cand["ratio_2w0"][0])
        out.append(cand["ratio_2w0"][0])
    return np.array(out)


@pytest.mark.slow
def test_emax_scar_family_follows_twice_the_band():
    r = _emax_ratios()
    assert np.median(r) == pytest.approx(1.0, rel=0.1)
    assert r[0] == pytest.approx(1.0, rel=0.1)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="at N = 16 the q = 3pi/8 ladder is broken by a missed rung (ratio ~0.64)")
def test_emax_scar_family_every_q():
    assert np.all(np.abs(_emax_ratios() - 1) <= 0.1)


@pytest.mark.slow
def test_convolution_check():
    n = 14
    eig = S.diagonalize_model(ModelSpec("PXP", n, "PBC"))
    ks = [2 * math.pi * j / n for j in range(n)]
    w = np.linspace(-6, 6, 1201)
    sz = S.idsf(eig, "Z", 0.05, ks, w)
    direct = S.idsf(eig, "PXP", 0.05, ks, w)
    res = S.convolution_check(sz, direct)
    v = res.predicted.values
    assert np.all(v >= -1e-12)
    assert np.abs(v[0] - v[0][::-1]).max() < 1e-8 * v.max()
    # k = pi/2 is not on the N = 14 grid; take its nearest neighbours
    for j in (3, 4):
        assert res.deviation[j] < 0.2


def test_grid_csv_roundtrip(tmp_path):
    g = S.SpectralGrid([0.1, 0.2], [-1.0, 0.0, 1.0], np.arange(6.0).reshape(2, 3), "idsf", 0.05, 8, {"probe": "Z"})
    g.to_csv(tmp_path / "g.csv", tmp_path / "g.json")
    h = S.SpectralGrid.from_csv(tmp_path / "g.csv", tmp_path / "g.json")
    assert np.allclose(h.values, g.values) and np.allclose(h.k_values, g.k_values)
    assert h.meta["probe"] == "Z"
