"""Many-body Wigner distributions on the (E_R, J_R) plane.

W(E, J) = (2 pi)^-2 int da db exp(-i(aE + bJ)) tr(rho exp(i(a E_R + b J_R)))

evaluated on a symmetric (a, b) lattice.  The characteristic function is
computed ray by ray: along a primitive lattice direction (m, n) every point
is s * (m, n) for an integer s, so a single eigendecomposition of
m da E_R + n db J_R serves the whole ray.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import InvalidArgumentError, ResourceError
from .models import momentum_matrix
from .trace import MomentumOperator

MAX_SITES = 16


@dataclass
class QuadraturePair:
    k: float
    E_R: np.ndarray
    J_R: np.ndarray
    basis: object = field(repr=False, default=None)

    def check(self, tol=1e-12):
        for name, M in (("E_R", self.E_R), ("J_R", self.J_R)):
            if np.abs(M - M.conj().T).max() > tol:
                raise InvalidArgumentError(f"{name} is not Hermitian")


def quadrature_pair(basis, k: float, e_probe="Z", j_probe="PYP") -> QuadraturePair:
    """E_R = [O(k) + O(-k)]/2 for O = Z and J_R likewise for PYP.

    Z(k) here is the plain momentum mode; the electric field mode E(q) of
    the gauge picture is Z(q + pi) (the staggering sign folded into k).
    """
    if basis.n_sites > MAX_SITES:
        raise ResourceError(f"Wigner distributions use dense exponentials; N <= {MAX_SITES}")

    def herm(name):
        a = momentum_matrix(MomentumOperator.from_string(name, k), basis)
        b = momentum_matrix(MomentumOperator.from_string(name, -k), basis)
        return (0.5 * (a + b)).toarray()

    pair = QuadraturePair(k, herm(e_probe), herm(j_probe), basis)
    pair.check()
    return pair


def _density_weights(state, V):
    """<v_i|rho|v_i> for a pure vector or a density matrix."""
    s = np.asarray(getattr(state, "amplitudes", state))
    if s.ndim == 1:
        return np.abs(V.conj().T @ s) ** 2
    return np.einsum("ai,ab,bi->i", V.conj(), s, V).real


def state_hash(state) -> str:
    s = np.ascontiguousarray(np.asarray(getattr(state, "amplitudes", state), dtype=complex))
    return hashlib.sha256(s.tobytes()).hexdigest()[:16]


def lattice(alpha_max: float, n_points: int):
    """Symmetric lattice -M..M with M = n_points // 2 and spacing alpha_max / M."""
    M = n_points // 2
    return np.arange(-M, M + 1), alpha_max / M


def characteristic_function(state, pair: QuadraturePair, alpha_max=12.0, beta_max=12.0, n_points=64):
    """chi(a_m, b_n) = tr(rho exp(i(a_m E_R + b_n J_R))) on the lattice."""
    m_idx, da = lattice(alpha_max, n_points)
    _, db = lattice(beta_max, n_points)
    M = m_idx[-1]
    chi = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    chi[M, M] = _density_weights(state, np.eye(pair.E_R.shape[0])).sum()
    for a in range(0, M + 1):
        for b in range(-M, M + 1):
            # one representative per ray in the upper half plane
            if (a == 0 and b <= 0) or math.gcd(a, abs(b)) != 1:
                continue
            lam, V = la.eigh(a * da * pair.E_R + b * db * pair.J_R)
            w = _density_weights(state, V)
            smax = M // max(a, abs(b))
            for s in range(1, smax + 1):
                c = np.dot(w, np.exp(1j * s * lam))
                chi[M + s * a, M + s * b] = c
                chi[M - s * a, M - s * b] = np.conj(c)
    return chi


def _kernel_weights(m_idx, kernel):
    if kernel == "fourier":
        return np.ones(len(m_idx))
    if kernel == "fejer":
        M = m_idx[-1]
        return 1.0 - np.abs(m_idx) / (M + 1)
    raise InvalidArgumentError(f"unknown kernel {kernel!r}")


@dataclass
class WignerGrid:
    E: np.ndarray
    J: np.ndarray
    values: np.ndarray  # (len(E), len(J))
    alpha_max: float
    beta_max: float
    n_points: int
    kernel: str
    imag_residue: float
    time: float | None = None
    state_hash: str | None = None
    chi: np.ndarray | None = field(default=None, repr=False)

    @property
    def dE(self):
        return self.E[1] - self.E[0]

    @property
    def dJ(self):
        return self.J[1] - self.J[0]

    def normalization(self) -> float:
        return float(self.values.sum() * self.dE * self.dJ)

    def marginal_E(self):
        return self.values.sum(axis=1) * self.dJ

    def marginal_J(self):
        return self.values.sum(axis=0) * self.dE

    def max_negative(self) -> float:
        return float(max(0.0, -self.values.min()))

    def to_csv(self, path):
        EE, JJ = np.meshgrid(self.E, self.J, indexing="ij")
        np.savetxt(path, np.column_stack([EE.ravel(), JJ.ravel(), self.values.ravel()]),
                   delimiter=",", header="E,J,W", comments="")

    def meta(self) -> dict:
        return {"alpha_max": self.alpha_max, "beta_max": self.beta_max, "n_points": self.n_points,
                "kernel": self.kernel, "imag_residue": self.imag_residue, "time": self.time,
                "state_hash": self.state_hash, "normalization": self.normalization()}


def period_grid(step: float, n: int, center: float = 0.0):
    """n equally spaced points covering one period 2 pi / step of the lattice transform.

    On such a grid the quadrature of W is exactly tr(rho).
    """
    P = 2 * math.pi / step
    return center + P * (np.arange(n) - n // 2) / n


def wigner_distribution(state, pair: QuadraturePair, E_grid=None, J_grid=None, alpha_max=12.0,
                        beta_max=12.0, n_points=64, kernel="fejer", grid_points=None, time=None,
                        chi=None) -> WignerGrid:
    """Regularised Wigner distribution of ``state`` over the pair.

    ``kernel='fourier'`` is the plain truncated transform; ``'fejer'`` takes
    the Cesaro mean of the partial sums, i.e. triangular weights on the
    lattice.  The default grids span one full period of the discrete
    transform (``grid_points`` per axis, default 2 n_points + 1), so the
    grid quadrature of W equals the trace of the state.
    """
    if pair.E_R.shape[0] != np.asarray(getattr(state, "amplitudes", state)).shape[0]:
        raise InvalidArgumentError("state and quadrature pair live on different bases")
    m_idx, da = lattice(alpha_max, n_points)
    _, db = lattice(beta_max, n_points)
    L = grid_points or 2 * n_points + 1
    if E_grid is None:
        E_grid = period_grid(da, L)
    if J_grid is None:
        J_grid = period_grid(db, L)
    if chi is None:
        chi = characteristic_function(state, pair, alpha_max, beta_max, n_points)
    w = _kernel_weights(m_idx, kernel)
    weighted = chi * w[:, None] * w[None, :]
    A = np.exp(-1j * np.outer(E_grid, m_idx * da))
    B = np.exp(-1j * np.outer(J_grid, m_idx * db))
    W = (A @ weighted @ B.T) * da * db / (2 * math.pi) ** 2
    resid = float(np.abs(W.imag).max())
    return WignerGrid(np.asarray(E_grid), np.asarray(J_grid), W.real, alpha_max, beta_max, n_points,
                      kernel, resid, time, state_hash(state), chi)


# ---------------------------------------------------------------------------
# marginals


def spectral_measure(state, op):
    """Eigenvalues of a Hermitian op and the state's weight on each."""
    lam, V = la.eigh(op)
    return lam, _density_weights(state, V)


def smoothed_measure(lam, weights, x, step, n_points, kernel="fejer"):
    """The spectral measure seen through the same lattice and kernel."""
    m_idx, _ = lattice(step * (n_points // 2), n_points)
    w = _kernel_weights(m_idx, kernel)
    phase = np.exp(1j * np.outer(lam, m_idx * step))  # char. function of the measure
    chi = weights @ phase
    return (np.exp(-1j * np.outer(x, m_idx * step)) @ (w * chi)).real * step / (2 * math.pi)


@dataclass
class MarginalReport:
    axis: str
    grid: np.ndarray
    marginal: np.ndarray
    reference: np.ndarray
    tv_distance: float
    tv_raw_binned: float  # against the raw measure on bins of the lattice resolution


def _binned_tv(grid, marginal, lam, weights, width):
    d = grid[1] - grid[0]
    edges = np.arange(grid[0] - d / 2, grid[-1] + d / 2 + width, width)
    pm, _ = np.histogram(grid, edges, weights=marginal * d)
    px, _ = np.histogram(lam, edges, weights=weights)
    return 0.5 * float(np.abs(pm - px).sum())


def marginals(grid: WignerGrid, state, pair: QuadraturePair):
    """Compare both marginals of W with the exact spectral distributions.

    The total-variation distance is taken against the exact measure passed
    through the same lattice kernel (the best any finite lattice can do);
    a second distance compares with the raw measure after binning both on
    the lattice resolution 2 pi / cutoff.
    """
    out = []
    _, da = lattice(grid.alpha_max, grid.n_points)
    _, db = lattice(grid.beta_max, grid.n_points)
    for axis, x, marg, op, step in (("E", grid.E, grid.marginal_E(), pair.E_R, da),
                                    ("J", grid.J, grid.marginal_J(), pair.J_R, db)):
        lam, wts = spectral_measure(state, op)
        ref = smoothed_measure(lam, wts, x, step, grid.n_points, grid.kernel)
        d = x[1] - x[0]
        tv = 0.5 * float(np.abs(marg - ref).sum() * d)
        out.append(MarginalReport(axis, x, marg, ref, tv,
                                  _binned_tv(x, marg, lam, wts, 2 * math.pi / (step * (grid.n_points // 2)))))
    return out


def principal_axis_angle(grid: WignerGrid) -> float:
    """Angle of the maximal-variance axis of W in the (E, J) plane."""
    EE, JJ = np.meshgrid(grid.E, grid.J, indexing="ij")
    w = grid.values / grid.values.sum()
    mE, mJ = (w * EE).sum(), (w * JJ).sum()
    cov = np.array([[(w * (EE - mE) ** 2).sum(), (w * (EE - mE) * (JJ - mJ)).sum()],
                    [(w * (EE - mE) * (JJ - mJ)).sum(), (w * (JJ - mJ) ** 2).sum()]])
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    return float(math.atan2(v[1], v[0]))


# ---------------------------------------------------------------------------
# Bloch-sphere boundary


@dataclass
class BlochBoundary:
    theta: np.ndarray
    phi: np.ndarray
    points: np.ndarray  # (n_theta, n_phi, 3): <H>, <J_R>, <E_R>
    support: np.ndarray  # largest eigenvalue per direction
    degenerate: np.ndarray

    def directions(self):
        T, P = np.meshgrid(self.theta, self.phi, indexing="ij")
        return np.stack([np.cos(T) * np.cos(P), np.cos(T) * np.sin(P), np.sin(T)], axis=-1)

    def outward_distance(self, x) -> float:
        """max_n (n . x - h(n)); <= 0 means x lies inside every supporting plane."""
        return float((self.directions() @ np.asarray(x) - self.support).max())


def bloch_boundary(pair: QuadraturePair, H, thetas, phis, degenerate_tol=1e-9) -> BlochBoundary:
    """Expectation triples of the top eigenstate of
    cos(t)cos(p) H + cos(t)sin(p) J_R + sin(t) E_R over an angular grid."""
    Hd = getattr(H, "matrix", H)
    Hd = Hd.toarray() if hasattr(Hd, "toarray") else np.asarray(Hd)
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    pts = np.zeros((len(thetas), len(phis), 3))
    sup = np.zeros((len(thetas), len(phis)))
    deg = np.zeros((len(thetas), len(phis)), dtype=bool)
    ops = (Hd, pair.J_R, pair.E_R)
    for a, t in enumerate(thetas):
        for b, p in enumerate(phis):
            M = math.cos(t) * math.cos(p) * Hd + math.cos(t) * math.sin(p) * pair.J_R + math.sin(t) * pair.E_R
            lam, V = la.eigh(M)
            top = np.flatnonzero(lam >= lam[-1] - degenerate_tol * max(1.0, abs(lam[-1])))
            deg[a, b] = len(top) > 1
            Vt = V[:, top]
            pts[a, b] = [np.trace(Vt.conj().T @ O @ Vt).real / len(top) for O in ops]
            sup[a, b] = lam[-1]
    return BlochBoundary(thetas, phis, pts, sup, deg)
