"""Reduced states, entropies, mutual information and logarithmic negativity.

Blockaded vectors are treated as vectors in the full product space (the
constrained configurations are a subset of product configurations), so
partial traces are ordinary ones.  The reshaping never builds the 2^N
vector: amplitudes are scattered straight into a (subsystem, rest) matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ResourceError
from .hilbert import bit_matrix

MAX_SUBSYSTEM = 12
EIG_FLOOR = 1e-14


@dataclass
class ReducedState:
    """rho over the listed sites; bit i of a row index is the state of sites[i]."""

    sites: tuple
    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def check(self, tol=1e-10):
        M = self.matrix
        if np.abs(M - M.conj().T).max() > tol:
            raise InvalidArgumentError("reduced state is not Hermitian")
        if abs(np.trace(M).real - 1) > 1e-12 * max(1, self.dim) + tol:
            raise InvalidArgumentError("reduced state does not have unit trace")
        if self.eigenvalues().min() < -tol:
            raise InvalidArgumentError("reduced state is not positive")


def _amplitudes(psi):
    return np.asarray(getattr(psi, "amplitudes", psi))


def rdm(psi, basis, sites) -> ReducedState:
    """Partial trace of |psi><psi| onto ``sites`` (kept in the given order)."""
    sites = tuple(int(s) for s in sites)
    n = basis.n_sites
    if any(s < 0 or s >= n for s in sites):
        raise InvalidArgumentError(f"sites {sites} out of range for N={n}")
    if len(set(sites)) != len(sites):
        raise InvalidArgumentError("repeated site in subsystem")
    if len(sites) > MAX_SUBSYSTEM:
        raise ResourceError(f"subsystems are capped at {MAX_SUBSYSTEM} sites")
    amp = _amplitudes(psi)
    bits = bit_matrix(basis.states, n)
    sub = bits[:, list(sites)] @ (1 << np.arange(len(sites), dtype=np.int64)) if sites else np.zeros(len(amp), np.int64)
    mask = np.int64(sum(1 << s for s in sites))
    rest, r_idx = np.unique(np.asarray(basis.states, dtype=np.int64) & ~mask, return_inverse=True)
    M = np.zeros((1 << len(sites), len(rest)), dtype=complex)
    M[sub, r_idx] = amp
    return ReducedState(sites, M @ M.conj().T)


def entropy_of(rho) -> float:
    """Von Neumann entropy (natural log) with 0 log 0 = 0."""
    M = rho.matrix if isinstance(rho, ReducedState) else np.asarray(rho)
    lam = np.linalg.eigvalsh(M)
    lam = lam[lam > EIG_FLOOR]
    return float(-(lam * np.log(lam)).sum())


def entanglement_entropy(psi, basis, cut) -> float:
    """S(rho_A) for A = the first ``cut`` sites, or an explicit site list."""
    sites = range(cut) if np.isscalar(cut) else cut
    n = basis.n_sites
    sites = list(sites)
    if len(sites) > n // 2 and len(sites) > MAX_SUBSYSTEM:
        # use the complement, same entropy for pure states
        sites = [s for s in range(n) if s not in set(sites)]
    return entropy_of(rdm(psi, basis, sites))


def _disjoint(A, B):
    A, B = tuple(A), tuple(B)
    if set(A) & set(B):
        raise InvalidArgumentError("subsystems A and B overlap")
    if not A or not B:
        raise InvalidArgumentError("subsystems must be non-empty")
    return A, B


def mutual_information(psi, basis, A, B) -> float:
    """I(A:B) = S_A + S_B - S_AB, clipped at zero below a 1e-9 floor."""
    A, B = _disjoint(A, B)
    rab = rdm(psi, basis, A + B)
    ra, rb = _marginals(rab, len(A), len(B))
    val = entropy_of(ra) + entropy_of(rb) - entropy_of(rab)
    if val < -1e-9:
        raise InvalidArgumentError(f"negative mutual information {val}")
    return max(val, 0.0)


def _marginals(rab: ReducedState, na: int, nb: int):
    T = rab.matrix.reshape(1 << nb, 1 << na, 1 << nb, 1 << na)
    ra = np.einsum("bjba->ja", T)
    rb = np.einsum("bjcj->bc", T)
    return ra, rb


def partial_transpose(rab: ReducedState, na: int, nb: int) -> np.ndarray:
    """Transpose the B factor (the high bits) of rho_AB."""
    T = rab.matrix.reshape(1 << nb, 1 << na, 1 << nb, 1 << na)
    return T.transpose(2, 1, 0, 3).reshape(rab.matrix.shape)


def negativity(psi, basis, A, B) -> float:
    """Logarithmic negativity log ||rho_AB^T_B||_1 (natural log)."""
    A, B = _disjoint(A, B)
    rab = rdm(psi, basis, A + B)
    pt = partial_transpose(rab, len(A), len(B))
    val = float(np.log(np.abs(np.linalg.eigvalsh(pt)).sum()))
    return 0.0 if val < 1e-9 else val


# ---------------------------------------------------------------------------
# spacetime maps


def block(start: int, size: int, n: int):
    return tuple((start + i) % n for i in range(size))


def region_pairs(n_sites: int, size: int, distances, periodic=True, start=None):
    """(d, A, B) with A = [j0, j0 + size) and B shifted by d (centre distance)."""
    j0 = 0 if (periodic or start is not None) else None
    if j0 is None:
        j0 = max(0, (n_sites - size - max(distances)) // 2)
    if start is not None:
        j0 = start
    out = []
    for d in distances:
        if d < size:
            raise InvalidArgumentError("regions overlap: need d >= size")
        if not periodic and j0 + d + size > n_sites:
            continue
        out.append((d, block(j0, size, n_sites), block(j0 + d, size, n_sites)))
    return out


@dataclass
class EntanglementMap:
    times: np.ndarray
    distances: np.ndarray
    mutual_information: np.ndarray  # (n_t, n_d)
    negativity: np.ndarray
    size: int

    def band_position(self, threshold=1e-3, detached=True):
        """Per time, the distance of the negativity band (nan when there is none).

        With ``detached`` the band is the largest local maximum in d that
        rises above its shorter-distance neighbour, so the monotone decay
        away from touching regions does not count as a band.  Otherwise it
        is the plain argmax.
        """
        out = np.full(len(self.times), np.nan)
        for i, row in enumerate(self.negativity):
            if not detached:
                if row.max() > threshold:
                    out[i] = self.distances[int(np.argmax(row))]
                continue
            best = threshold
            for j in range(1, len(row)):
                right = row[j + 1] if j + 1 < len(row) else -np.inf
                if row[j] > row[j - 1] and row[j] >= right and row[j] > best:
                    best = row[j]
                    out[i] = self.distances[j]
        return out


def entanglement_map(traj, size: int, distances, start=None) -> EntanglementMap:
    """I(A:B) and negativity over the (time, distance) plane of a trajectory."""
    basis = traj.basis
    periodic = getattr(basis.boundary, "value", basis.boundary) == "PBC"
    pairs = region_pairs(basis.n_sites, size, distances, periodic, start)
    I = np.zeros((len(traj.times), len(pairs)))
    Nn = np.zeros_like(I)
    for t, psi in enumerate(traj.states):
        for c, (_, A, B) in enumerate(pairs):
            I[t, c] = mutual_information(psi, basis, A, B)
            Nn[t, c] = negativity(psi, basis, A, B)
    return EntanglementMap(np.asarray(traj.times), np.array([p[0] for p in pairs]), I, Nn, size)


def bitstring_averaged_map(H, basis, size, distances, times, states=None, krylov_dim=30, tol=1e-10):
    """Uniform average of entanglement maps over product initial states.

    ``states`` defaults to every basis configuration; pass a subset to bound
    the cost.
    """
    from .evolve import evolve_trajectory

    configs = basis.states if states is None else states
    acc = None
    for c in configs:
        traj = evolve_trajectory(H, basis.product_state(int(c)), times, krylov_dim, tol)
        m = entanglement_map(traj, size, distances)
        if acc is None:
            acc = m
        else:
            acc.mutual_information += m.mutual_information
            acc.negativity += m.negativity
    acc.mutual_information /= len(configs)
    acc.negativity /= len(configs)
    return acc
