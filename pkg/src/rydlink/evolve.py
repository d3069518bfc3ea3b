"""Pure-state time evolution and time-domain observables.

The propagator is a Lanczos (Krylov) exponential with adaptive substeps and
full reorthogonalisation.  Times are in natural units of the Hamiltonian;
for PXP one Rabi cycle is pi (see :func:`rydlink.hilbert.cycle_to_time`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import InvalidArgumentError, NumericalError
from .hilbert import Basis, Boundary, bit_matrix
from .models import SparseHamiltonian


def _matrix(H):
    return H.matrix if isinstance(H, SparseHamiltonian) else H


@dataclass
class StateVector:
    basis: Basis
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _lanczos(A, v, m):
    """m-step Lanczos with full reorthogonalisation.

    Returns (V, alpha, beta) with V of shape (len(v), m_eff) and beta[m_eff-1]
    the residual coupling to the next (discarded) Krylov vector.
    """
    n = v.shape[0]
    m = min(m, n)
    V = np.zeros((n, m), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[:, 0] = v
    for j in range(m):
        w = A @ V[:, j]
        alpha[j] = np.vdot(V[:, j], w).real
        w = w - alpha[j] * V[:, j]
        if j > 0:
            w = w - beta[j - 1] * V[:, j - 1]
        # two passes of classical Gram-Schmidt keep the basis orthonormal
        for _ in range(2):
            w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        b = np.linalg.norm(w)
        beta[j] = b
        if j + 1 < m:
            if b < 1e-14:
                return V[:, : j + 1], alpha[: j + 1], beta[: j + 1]
            V[:, j + 1] = w / b
    return V, alpha, beta


def propagate(H, psi, dt: float, krylov_dim: int = 30, tol: float = 1e-10, max_substeps: int = 100000):
    """psi(t + dt) = exp(-i H dt) psi(t) by adaptive Krylov substeps.

    Each substep is accepted when the a-posteriori error estimate
    |beta_m [exp(-i tau T)]_{m-1,0}| is at most ``tol`` times the fraction of
    ``dt`` it covers, so the total error stays below ``tol``.  The result is
    renormalised.  Raises NumericalError (carrying the residual estimate)
    when the step size collapses.
    """
    if isinstance(psi, StateVector):
        out = propagate(H, psi.amplitudes, dt, krylov_dim, tol, max_substeps)
        return StateVector(psi.basis, out)
    if not np.isfinite(dt):
        raise InvalidArgumentError("dt must be finite")
    A = _matrix(H)
    v = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidArgumentError("zero state")
    v = v / nrm
    if dt == 0:
        return v.copy()
    remaining = float(dt)
    sign = 1.0 if dt > 0 else -1.0
    tau = abs(dt)
    steps = 0
    last_err = None
    while abs(remaining) > 1e-15 * abs(dt):
        V, a, b = _lanczos(A, v, krylov_dim)
        m = len(a)
        T = np.diag(a) + np.diag(b[: m - 1], 1) + np.diag(b[: m - 1], -1)
        evals, evecs = la.eigh(T)
        tau = min(tau, abs(remaining))
        breakdown = m < krylov_dim or b[m - 1] < 1e-14
        while True:
            coef = evecs @ (np.exp(-1j * sign * tau * evals) * evecs[0].conj())
            err = 0.0 if breakdown else abs(b[m - 1] * coef[m - 1])
            if err <= tol * max(tau / abs(dt), 1e-3) or breakdown:
                break
            last_err = err
            tau *= 0.5
            steps += 1
            if tau < abs(dt) * 1e-12 or steps > max_substeps:
                raise NumericalError("Krylov step size collapsed", residual=last_err)
        v = V @ coef
        v /= np.linalg.norm(v)
        remaining -= sign * tau
        steps += 1
        if steps > max_substeps:
            raise NumericalError("too many Krylov substeps", residual=err)
        # try a larger step next time when the error was tiny
        if err < 0.01 * tol * tau / abs(dt):
            tau *= 2.0
    return v


@dataclass
class Trajectory:
    basis: Basis
    times: np.ndarray
    states: np.ndarray  # (n_times, D)
    meta: dict = field(default_factory=dict)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.states) ** 2


def evolve_trajectory(H, psi0, times, krylov_dim: int = 30, tol: float = 1e-10) -> Trajectory:
    """States on a time grid (natural units), starting at ``times[0]`` = 0 or later."""
    times = np.asarray(times, dtype=float)
    A = _matrix(H)
    basis = H.basis if isinstance(H, SparseHamiltonian) else None
    psi = np.asarray(psi0, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    out = np.zeros((len(times), len(psi)), dtype=complex)
    t_prev = 0.0
    for i, t in enumerate(times):
        psi = propagate(A, psi, t - t_prev, krylov_dim, tol)
        out[i] = psi
        t_prev = t
    return Trajectory(basis, times, out, {"krylov_dim": krylov_dim, "tol": tol})


def exact_trajectory(H, psi0, times) -> Trajectory:
    """Dense eigendecomposition evolution (small systems, reference use)."""
    A = _matrix(H)
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    E, V = np.linalg.eigh(A)
    c = V.conj().T @ np.asarray(psi0, dtype=complex)
    times = np.asarray(times, dtype=float)
    states = (V @ (np.exp(-1j * np.outer(E, times)) * c[:, None])).T
    basis = H.basis if isinstance(H, SparseHamiltonian) else None
    return Trajectory(basis, times, states)


# ---------------------------------------------------------------------------
# correlators


@dataclass
class CorrelatorSeries:
    times: np.ndarray
    distances: np.ndarray
    values: np.ndarray  # (n_times, n_distances)
    connected: bool = True
    mapped: bool = False
    sites: tuple | None = None


def interior_window(n_sites: int, margin: int | None = None) -> range:
    """Sites kept for spatial averages on open chains (ceil(N/6) dropped per edge)."""
    margin = math.ceil(n_sites / 6) if margin is None else margin
    return range(margin, n_sites - margin)


def z_moments(probs: np.ndarray, bits: np.ndarray):
    """<Z_i> and <Z_i Z_j> from computational-basis probabilities."""
    z = 1.0 - 2.0 * bits
    mean = probs @ z
    second = np.einsum("ts,si,sj->tij", probs, z, z, optimize=True)
    return mean, second


def correlation_matrix_series(probs, bits):
    mean, second = z_moments(probs, bits)
    return second - mean[:, :, None] * mean[:, None, :]


def average_by_distance(C, boundary, distances=None, margin=None):
    """Spatial average of a (T, N, N) correlator over pairs at fixed distance.

    Periodic chains average over every site; open chains over pairs that lie
    inside :func:`interior_window`.
    """
    T, n, _ = C.shape
    boundary = Boundary.parse(boundary)
    if boundary is Boundary.PBC:
        distances = np.arange(n // 2 + 1) if distances is None else np.asarray(distances)
        out = np.zeros((T, len(distances)))
        idx = np.arange(n)
        for a, d in enumerate(distances):
            out[:, a] = C[:, idx, (idx + d) % n].real.mean(axis=1)
        return distances, out
    win = list(interior_window(n, margin))
    distances = np.arange(len(win)) if distances is None else np.asarray(distances)
    out = np.full((T, len(distances)), np.nan)
    for a, d in enumerate(distances):
        pairs = [(i, i + d) for i in win if i + d in win]
        if pairs:
            ii, jj = np.array(pairs).T
            out[:, a] = C[:, ii, jj].real.mean(axis=1)
    return distances, out


def connected_correlator_series(traj: Trajectory, field_mapping: bool = True, distances=None,
                                margin=None) -> CorrelatorSeries:
    """<Z_j Z_{j+d}> - <Z_j><Z_{j+d}> averaged over j, optionally times (-1)^d."""
    basis = traj.basis
    bits = bit_matrix(basis.states, basis.n_sites).astype(float)
    C = correlation_matrix_series(traj.probabilities(), bits)
    d, vals = average_by_distance(C, basis.boundary, distances, margin)
    if field_mapping:
        vals = vals * ((-1.0) ** d)[None, :]
    return CorrelatorSeries(traj.times, d, vals, True, field_mapping)


# ---------------------------------------------------------------------------
# infinite-temperature autocorrelators


def inf_temp_autocorrelator(H, op_matrices, t_grid, pairs=None, connected=False,
                            n_samples: int | None = None, seed: int = 0,
                            krylov_dim: int = 30, tol: float = 1e-10):
    """tr[A(t) B]/D for operator pairs over a time grid.

    ``op_matrices`` is a list of sparse matrices O_0..O_{N-1}; by default the
    pairs (O_{j+d}, O_j) with j = 0 and d = 0..N-1 are evaluated (use a
    periodic basis for translation-averaged values).  Deterministic mode
    uses a dense eigendecomposition; passing ``n_samples`` switches to a
    random-phase stochastic trace and also returns standard errors.
    """
    A = _matrix(H)
    D = A.shape[0]
    t_grid = np.asarray(t_grid, dtype=float)
    n = len(op_matrices)
    if pairs is None:
        pairs = [((d) % n, 0) for d in range(n)]
    means = None
    if connected:
        means = [op.diagonal().sum() / D for op in op_matrices]
    if n_samples is None:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        E, V = np.linalg.eigh(dense)
        rot = {}

        def eig_op(i):
            if i not in rot:
                M = op_matrices[i]
                M = M.toarray() if sp.issparse(M) else np.asarray(M)
                rot[i] = V.conj().T @ M @ V
            return rot[i]

        out = np.zeros((len(pairs), len(t_grid)), dtype=complex)
        phase = np.exp(1j * np.outer(t_grid, E))  # (T, D)
        for p, (ia, ib) in enumerate(pairs):
            W = eig_op(ia) * eig_op(ib).T  # W_ab = A_ab B_ba
            out[p] = np.einsum("ta,ab,tb->t", phase, W, phase.conj(), optimize=True) / D
            if connected:
                out[p] -= means[ia] * means[ib]
        return out
    rng = np.random.default_rng(seed)
    acc = np.zeros((n_samples, len(pairs), len(t_grid)), dtype=complex)
    for s in range(n_samples):
        r = np.exp(2j * np.pi * rng.random(D))
        for p, (ia, ib) in enumerate(pairs):
            left = r.copy()
            right = op_matrices[ib] @ r
            t_prev = 0.0
            for it, t in enumerate(t_grid):
                left = propagate(A, left, t - t_prev, krylov_dim, tol) * np.linalg.norm(left)
                right = propagate(A, right, t - t_prev, krylov_dim, tol) * np.linalg.norm(right)
                t_prev = t
                acc[s, p, it] = np.vdot(left, op_matrices[ia] @ right) / D
            if connected:
                acc[s, p] -= means[ia] * means[ib]
    return acc.mean(axis=0), acc.std(axis=0, ddof=1) / math.sqrt(n_samples)


# ---------------------------------------------------------------------------
# observables


def observable_series(traj: Trajectory, operators):
    """Per-time mean <O> and variance <O O^dag> - |<O>|^2.

    ``operators`` holds sparse matrices or 1-D arrays (diagonal operators).
    Returns arrays of shape (n_ops, n_times).
    """
    psi = traj.states
    means = np.zeros((len(operators), len(psi)), dtype=complex)
    vars_ = np.zeros((len(operators), len(psi)))
    probs = None
    for i, O in enumerate(operators):
        if isinstance(O, np.ndarray) and O.ndim == 1:
            if probs is None:
                probs = np.abs(psi) ** 2
            means[i] = probs @ O
            vars_[i] = probs @ (np.abs(O) ** 2) - np.abs(means[i]) ** 2
        else:
            Opsi = (O @ psi.T).T
            Odpsi = (O.conj().T @ psi.T).T
            means[i] = np.einsum("ts,ts->t", psi.conj(), Opsi)
            vars_[i] = np.einsum("ts,ts->t", Odpsi.conj(), Odpsi).real - np.abs(means[i]) ** 2
    return means, vars_


def field_mode_diagonal(basis: Basis, q: float) -> np.ndarray:
    """Diagonal of E(q) = N^{-1/2} sum_j e^{iqj} (-1)^j Z_j."""
    n = basis.n_sites
    z = 1.0 - 2.0 * bit_matrix(basis.states, n)
    phases = np.exp(1j * q * np.arange(n)) * (-1.0) ** np.arange(n)
    return z @ phases / math.sqrt(n)


def energy_series(H, traj: Trajectory) -> np.ndarray:
    A = _matrix(H)
    return np.einsum("ts,ts->t", traj.states.conj(), (A @ traj.states.T).T).real
