import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from rydlink import evolve as ev
from rydlink import liouville as lv
from rydlink import trace as tr
from rydlink.errors import InvalidArgumentError
from rydlink.hilbert import bit_matrix, enumerate_basis, is_blockaded
from rydlink.models import ModelSpec, build_model, build_pxp, operator_matrix

import oracles as O


def _pxp(n, boundary="PBC"):
    H = build_pxp(enumerate_basis(n, boundary))
    return H, H.basis


def _random_state(D, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=D) + 1j * rng.normal(size=D)
    return v / np.linalg.norm(v)


def test_propagate_matches_expm():
    H, B = _pxp(10)
    psi = _random_state(B.dim, 1)
    ref = la.expm(-1j * 5.0 * H.matrix.toarray()) @ psi
    out = ev.propagate(H, psi, 5.0)
    assert abs(np.vdot(ref, out)) ** 2 >= 1 - 1e-8
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)


def test_propagate_dt_zero_is_identity():
    H, B = _pxp(8)
    psi = _random_state(B.dim, 2)
    assert np.allclose(ev.propagate(H, psi, 0.0), psi)
    sv = ev.StateVector(B, psi)
    assert np.allclose(ev.propagate(H, sv, 0.0).amplitudes, psi)


def test_propagate_rejects_bad_input():
    H, B = _pxp(6)
    with pytest.raises(InvalidArgumentError):
        ev.propagate(H, np.ones(B.dim), float("inf"))
    with pytest.raises(InvalidArgumentError):
        ev.propagate(H, np.zeros(B.dim), 1.0)


def test_eigenstate_only_gains_phase():
    H, B = _pxp(10)
    E, V = np.linalg.eigh(H.matrix.toarray())
    v = V[:, 40].astype(complex)
    out = ev.propagate(H, v, 3.7)
    assert np.allclose(out, np.exp(-1j * E[40] * 3.7) * v, atol=1e-9)
    traj = ev.evolve_trajectory(H, v, [0.0, 1.0, 2.0])
    p = traj.probabilities()
    assert np.allclose(p, p[0], atol=1e-10)


def test_time_reversal():
    H, B = _pxp(12)
    psi = B.product_state(0)
    fwd = ev.propagate(H, psi, 7.0)
    back = ev.propagate(H, fwd, -7.0)
    assert np.linalg.norm(back - psi) < 1e-7


def test_energy_conservation():
    H, B = _pxp(12, "OBC")
    psi = _random_state(B.dim, 3)
    traj = ev.evolve_trajectory(H, psi, np.linspace(0, 20, 41))
    e = ev.energy_series(H, traj)
    assert np.abs(e - e[0]).max() <= 1e-6
    assert np.allclose(np.linalg.norm(traj.states, axis=1), 1.0, atol=1e-10)


def test_krylov_trajectory_matches_exact():
    H, B = _pxp(10, "OBC")
    t = np.linspace(0, 6, 13)
    a = ev.evolve_trajectory(H, B.product_state(0), t)
    b = ev.exact_trajectory(H, B.product_state(0), t)
    assert np.abs(np.einsum("ts,ts->t", a.states.conj(), b.states)).min() ** 2 >= 1 - 1e-8


def test_connected_correlator_vanishes_at_t0():
    H, B = _pxp(12)
    traj = ev.evolve_trajectory(H, B.product_state(0), [0.0, 1.0])
    cs = ev.connected_correlator_series(traj)
    assert np.abs(cs.values[0]).max() < 1e-12
    assert np.abs(cs.values[1]).max() > 1e-3


def test_connected_correlator_matches_dense_oracle():
    n = 8
    H, B = _pxp(n)
    traj = ev.evolve_trajectory(H, B.product_state(0), [1.3])
    psi = O.embed(traj.states[0], B.states, n)
    z = [O.site_op({j: O.Z}, n) for j in range(n)]
    ez = [np.vdot(psi, zj @ psi).real for zj in z]
    cs = ev.connected_correlator_series(traj, field_mapping=True)
    for d in cs.distances:
        ref = np.mean([np.vdot(psi, z[j] @ z[(j + d) % n] @ psi).real - ez[j] * ez[(j + d) % n] for j in range(n)])
        assert cs.values[0, list(cs.distances).index(d)] == pytest.approx((-1) ** d * ref, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.floats(0.0, 8.0))
def test_correlator_symmetric_and_bounded(seed, t):
    n = 10
    H, B = _pxp(n)
    traj = ev.evolve_trajectory(H, _random_state(B.dim, seed), [t])
    bits = bit_matrix(B.states, n).astype(float)
    C = ev.correlation_matrix_series(traj.probabilities(), bits)[0]
    assert np.allclose(C, C.T, atol=1e-12)
    # C(d) = C(-d) after translation averaging
    idx = np.arange(n)
    for d in range(1, n):
        assert C[idx, (idx + d) % n].mean() == pytest.approx(C[idx, (idx - d) % n].mean(), abs=1e-12)
    assert np.abs(C).max() <= 1 + 1e-12


def test_obc_interior_window():
    assert list(ev.interior_window(12)) == list(range(2, 10))
    H, B = _pxp(12, "OBC")
    traj = ev.evolve_trajectory(H, B.product_state(0), [0.0, 2.0])
    cs = ev.connected_correlator_series(traj, field_mapping=False)
    assert cs.distances[0] == 0 and len(cs.distances) == 8


def test_field_mode_mean_vanishes_and_variance_starts_at_zero():
    n = 12
    H, B = _pxp(n)
    traj = ev.evolve_trajectory(H, B.product_state(0), np.linspace(0, 10, 26))
    # E(pi) = Z(0) is the total magnetisation and is the one mode with a mean
    qs = [2 * math.pi * j / n for j in range(n) if 2 * j != n]
    ops = [ev.field_mode_diagonal(B, q) for q in qs]
    means, var = ev.observable_series(traj, ops)
    assert np.abs(means).max() <= 1e-8
    assert np.abs(var[:, 0]).max() < 1e-12
    assert var[:, 1:].max() > 1e-2


def test_observable_series_sparse_matches_diagonal():
    n = 8
    H, B = _pxp(n)
    traj = ev.evolve_trajectory(H, _random_state(B.dim, 4), [0.0, 0.5])
    d = ev.field_mode_diagonal(B, 0.7)
    import scipy.sparse as sp
    m1, v1 = ev.observable_series(traj, [d])
    m2, v2 = ev.observable_series(traj, [sp.diags(d).tocsr()])
    assert np.allclose(m1, m2) and np.allclose(v1, v2)


def _dominant_frequency(t, y, pad=16):
    y = y - y.mean()
    n = len(y) * pad
    f = np.fft.rfftfreq(n, t[1] - t[0]) * 2 * math.pi
    a = np.abs(np.fft.rfft(y * np.hanning(len(y)), n))
    return f[1:][np.argmax(a[1:])]


def test_variance_oscillation_tracks_twice_field_band():
    n, q = 12, math.pi / 5
    H, B = _pxp(n)
    t = np.arange(0, 3.3 * math.pi + 1e-9, 0.08 * math.pi)
    traj = ev.evolve_trajectory(H, B.product_state(0), t)
    _, var = ev.observable_series(traj, [ev.field_mode_diagonal(B, q)])
    dom = _dominant_frequency(t, var[0])
    assert dom == pytest.approx(2 * float(lv.field_band(q)), rel=0.15)


def _rydberg_leakage(n=10, c6=254.0, samples=120):
    # fine-time dataset parameters; H is H/h in MHz so one cycle lasts 1/omega us
    spec = ModelSpec("RydbergLongRange", n, "OBC", {"omega": 5.3, "delta": 0.6, "c6": c6})
    H = build_model(spec)
    B = H.basis
    t_us = np.linspace(0, 3.3 / 5.3, samples)
    traj = ev.evolve_trajectory(2 * math.pi * H.matrix, B.product_state(0), t_us)
    illegal = ~is_blockaded(B.states, n, "OBC")
    leak = traj.probabilities()[:, illegal].sum(axis=1)
    V = 1e3 * c6 / 3.77**6
    return leak, V


def test_rydberg_leakage_is_second_order_in_omega_over_v():
    leak, V = _rydberg_leakage()
    leak4, _ = _rydberg_leakage(c6=4 * 254.0)
    assert leak.max() <= 10 * (5.3 / 2 / V) ** 2
    assert leak.mean() / leak4.mean() == pytest.approx(16, rel=0.25)


@pytest.mark.xfail(strict=True, reason="blockade leakage at the experimental parameters is ~0.3-0.8%")
def test_rydberg_blockade_leakage_below_1e3():
    leak, _ = _rydberg_leakage()
    assert leak.max() < 1e-3


def test_pxp_trajectory_never_leaves_blockade():
    n = 8
    H, B = _pxp(n, "OBC")
    traj = ev.evolve_trajectory(H, B.product_state(0), [2.0])
    psi = O.embed(traj.states[0], B.states, n)
    legal = set(int(s) for s in B.states)
    assert all(abs(psi[c]) == 0 for c in range(2**n) if c not in legal)


def test_autocorrelator_t0_matches_trace_values():
    n = 10
    H, B = _pxp(n)
    ops = [operator_matrix("Z", B, j) for j in range(n)]
    out = ev.inf_temp_autocorrelator(H, ops, [0.0], connected=True)
    for d in range(n):
        ref = float(tr.inf_temp_connected("Z", "Z", d, n, "PBC"))
        assert out[d, 0].real == pytest.approx(ref, abs=1e-12)
    assert np.abs(out.imag).max() < 1e-12


def test_autocorrelator_matches_dense_oracle():
    n = 8
    H, B = _pxp(n)
    ops = [operator_matrix("Z", B, j) for j in range(n)]
    t = 1.7
    out = ev.inf_temp_autocorrelator(H, ops, [t], pairs=[(2, 0)])
    Hd = H.matrix.toarray()
    U = la.expm(-1j * t * Hd)
    Za, Zb = ops[2].toarray(), ops[0].toarray()
    ref = np.trace(U.conj().T @ Za @ U @ Zb) / B.dim
    assert out[0, 0] == pytest.approx(ref, abs=1e-12)


def test_stochastic_autocorrelator_within_error():
    n = 10
    H, B = _pxp(n)
    ops = [operator_matrix("Z", B, j) for j in range(n)]
    t = [0.0, 1.0, 2.0]
    exact = ev.inf_temp_autocorrelator(H, ops, t, pairs=[(0, 0)])
    mean, err = ev.inf_temp_autocorrelator(H, ops, t, pairs=[(0, 0)], n_samples=40, seed=3)
    assert np.all(np.abs(mean - exact) <= 5 * err + 1e-12)


def _swing(c):
    c = c.real.ravel()
    return (c.max() - c.min()) / 2


def test_mfim_decays_faster_than_pxp():
    # oscillation amplitude around t = 10: MFIM settles on a featureless plateau
    n = 10
    t = np.linspace(8, 12, 81)
    Hp, Bp = _pxp(n)
    cp = ev.inf_temp_autocorrelator(Hp, [operator_matrix("Z", Bp, j) for j in range(n)], t,
                                    pairs=[(0, 0)], connected=True)
    Hm = build_model(ModelSpec("MixedFieldIsing", n, "PBC"))
    Bm = Hm.basis
    cm = ev.inf_temp_autocorrelator(Hm, [operator_matrix("Z", Bm, j) for j in range(n)], t,
                                    pairs=[(0, 0)], connected=True)
    assert _swing(cp) >= 5 * _swing(cm)
