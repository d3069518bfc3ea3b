"""Exact diagonalisation and dynamical structure factors.

All structure factors are computed from eigenbasis double sums and then
broadened with a normalised Gaussian of width ``sigma`` on a uniform
frequency grid, so the total weight per momentum survives broadening up to
the grid discretisation and the tails cut off at the grid edges.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.ndimage import gaussian_filter1d

from .errors import InvalidArgumentError, NumericalError
from .hilbert import build_translation_sector
from .models import momentum_matrix
from .trace import LocalOperator, MomentumOperator


@dataclass
class SpectralGrid:
    k_values: np.ndarray
    omega: np.ndarray
    values: np.ndarray  # (n_k, n_omega)
    variant: str = "idsf"
    sigma: float | None = None
    n_sites: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.k_values = np.atleast_1d(np.asarray(self.k_values, dtype=float))
        self.omega = np.asarray(self.omega, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.shape != (len(self.k_values), len(self.omega)):
            raise InvalidArgumentError("values must have shape (n_k, n_omega)")

    @property
    def d_omega(self) -> float:
        return float(self.omega[1] - self.omega[0]) if len(self.omega) > 1 else 1.0

    def weights(self) -> np.ndarray:
        """Frequency integral per momentum (trapezoid rule)."""
        return np.trapezoid(self.values, self.omega, axis=1)

    def peak_frequencies(self, positive=True) -> np.ndarray:
        """Location of the largest value on the positive (or negative) half axis."""
        mask = self.omega > 0 if positive else self.omega < 0
        w = self.omega[mask]
        vals = np.abs(self.values[:, mask])
        return w[np.argmax(vals, axis=1)]

    def to_csv(self, path, meta_path=None):
        path = Path(path)
        cplx = np.iscomplexobj(self.values)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "omega", "S"] + (["S_imag"] if cplx else []))
            for i, k in enumerate(self.k_values):
                for j, w in enumerate(self.omega):
                    v = self.values[i, j]
                    row = [f"{k:.12g}", f"{w:.12g}", f"{float(np.real(v)):.12g}"]
                    if cplx:
                        row.append(f"{float(np.imag(v)):.12g}")
                    wr.writerow(row)
        meta_path = Path(meta_path) if meta_path else path.with_suffix(".json")
        meta = {"variant": self.variant, "sigma": self.sigma, "n_sites": self.n_sites,
                "n_k": len(self.k_values), "n_omega": len(self.omega), "complex": cplx}
        meta.update(self.meta)
        meta_path.write_text(json.dumps(meta, indent=2, default=_jsonable))
        return path, meta_path

    @classmethod
    def from_csv(cls, path, meta_path=None):
        path = Path(path)
        meta_path = Path(meta_path) if meta_path else path.with_suffix(".json")
        meta = json.loads(meta_path.read_text())
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        nk, nw = meta["n_k"], meta["n_omega"]
        vals = data[:, 2].reshape(nk, nw)
        if meta.get("complex"):
            vals = vals + 1j * data[:, 3].reshape(nk, nw)
        extra = {k: v for k, v in meta.items()
                 if k not in ("variant", "sigma", "n_sites", "n_k", "n_omega", "complex")}
        return cls(data[::nw, 0], data[:nw, 1], vals, meta["variant"], meta["sigma"],
                   meta["n_sites"], extra)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def uniform_grid(omega_max: float, n: int) -> np.ndarray:
    return np.linspace(-omega_max, omega_max, n)


# ---------------------------------------------------------------------------
# eigendecompositions


@dataclass
class EigenDecomposition:
    """Eigenpairs of a Hamiltonian block.

    ``vectors`` are columns in the block coordinates; for momentum sectors
    ``sector`` maps them back to the parent basis.
    """

    basis: object
    energies: np.ndarray
    vectors: np.ndarray
    sector: object = None

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def k(self):
        return None if self.sector is None else self.sector.k

    def parent_vectors(self) -> np.ndarray:
        if self.sector is None:
            return self.vectors
        return np.asarray(self.sector.embed(self.vectors))

    def in_block(self, op):
        """<E_a| op |E_b> for an operator given on the parent basis."""
        if self.sector is None:
            M = op @ self.vectors
            return self.vectors.conj().T @ (M.toarray() if sp.issparse(M) else M)
        return self.vectors.conj().T @ self.sector.operator(op) @ self.vectors

    def coefficients(self, psi) -> np.ndarray:
        """<E|psi> for a parent-basis vector."""
        psi = np.asarray(psi)
        if self.sector is not None:
            psi = self.sector.restrict(psi)
        return self.vectors.conj().T @ psi


def _dense(H):
    M = getattr(H, "matrix", H)
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _check_eig(A, E, V, tol_res=1e-8, tol_orth=1e-10):
    if len(E) == 0:
        return
    res = np.linalg.norm(A @ V - V * E[None, :], axis=0).max()
    orth = np.abs(V.conj().T @ V - np.eye(V.shape[1])).max()
    if res > tol_res * max(1.0, np.abs(E).max()) or orth > tol_orth:
        raise NumericalError("eigendecomposition failed its residual check", residual=max(res, orth))


def diagonalize(H, check: bool = True) -> EigenDecomposition:
    """Full dense diagonalisation of a Hermitian Hamiltonian."""
    A = _dense(H)
    if np.abs(A - A.conj().T).max() > 1e-10:
        raise InvalidArgumentError("Hamiltonian is not Hermitian")
    E, V = la.eigh(A)
    if check:
        _check_eig(A, E, V)
    return EigenDecomposition(getattr(H, "basis", None), E, V)


@dataclass
class SectorEigensystem:
    """Eigen-decompositions of every momentum sector of a periodic basis."""

    basis: object
    sectors: dict  # j -> EigenDecomposition

    @property
    def n_sites(self):
        return self.basis.n_sites

    @property
    def dim(self):
        return sum(e.dim for e in self.sectors.values())

    def energies(self):
        return np.sort(np.concatenate([e.energies for e in self.sectors.values()]))


def diagonalize_by_momentum(H, momenta=None, check: bool = True) -> SectorEigensystem:
    """Diagonalise H = sum_k H_k sector by sector (periodic bases only)."""
    basis = H.basis
    n = basis.n_sites
    M = H.matrix
    out = {}
    for j in (range(n) if momenta is None else momenta):
        sec = build_translation_sector(basis, int(j))
        if sec.dim == 0:
            continue
        A = sec.operator(M)
        A = 0.5 * (A + A.conj().T)
        E, V = la.eigh(A)
        if check:
            _check_eig(A, E, V)
        out[sec.j] = EigenDecomposition(basis, E, V, sec)
    return SectorEigensystem(basis, out)


def diagonalize_model(spec, momentum: bool = True):
    """Eigendata for a ModelSpec, split along the symmetries that are cheap to use.

    Periodic chains are split into momentum sectors; XXZ chains additionally
    into magnetisation sectors (returned as a list of SectorEigensystem).
    """
    from .hilbert import Boundary, magnetization_basis
    from .models import Variant, build_model

    periodic = spec.boundary is Boundary.PBC and momentum
    if spec.variant is Variant.XXZ:
        blocks = []
        for n_up in range(spec.n_sites + 1):
            b = magnetization_basis(spec.n_sites, n_up, spec.boundary)
            H = build_model(spec, b)
            blocks.append(diagonalize_by_momentum(H) if periodic else diagonalize(H))
        return blocks
    H = build_model(spec)
    return diagonalize_by_momentum(H) if periodic else diagonalize(H)


# ---------------------------------------------------------------------------
# broadening


def _deposit(freqs, weights, omega):
    """Spread point weights onto a uniform grid by linear interpolation."""
    dw = omega[1] - omega[0]
    x = (np.asarray(freqs) - omega[0]) / dw
    i0 = np.floor(x).astype(np.int64)
    f = x - i0
    n = len(omega)
    out = np.zeros(n, dtype=np.result_type(weights, float))

    def add(idx, w):
        ok = (idx >= 0) & (idx < n)
        if np.iscomplexobj(w):
            out.real[:] += np.bincount(idx[ok], w.real[ok], minlength=n)
            out.imag[:] += np.bincount(idx[ok], w.imag[ok], minlength=n)
        else:
            out[:] += np.bincount(idx[ok], w[ok], minlength=n)

    add(i0, weights * (1 - f))
    add(i0 + 1, weights * f)
    return out


def _broaden(hist, omega, sigma):
    dw = omega[1] - omega[0]
    s = sigma / dw
    if np.iscomplexobj(hist):
        return (gaussian_filter1d(hist.real, s, mode="constant", truncate=8.0)
                + 1j * gaussian_filter1d(hist.imag, s, mode="constant", truncate=8.0)) / dw
    return gaussian_filter1d(hist, s, mode="constant", truncate=8.0) / dw


def default_omega(width: float, sigma: float, resolution: int = 4) -> np.ndarray:
    wmax = width + 8 * sigma
    n = 2 * int(math.ceil(wmax / (sigma / resolution))) + 1
    return np.linspace(-wmax, wmax, n)


# ---------------------------------------------------------------------------
# structure factors


def _probe_matrix(basis, probe, k):
    """Parent-basis matrix of a probe at momentum k.

    ``probe`` is an operator name ('Z', 'PYP', ...), a LocalOperator, a
    MomentumOperator (its k is replaced), or a callable k -> sparse matrix.
    """
    if callable(probe) and not isinstance(probe, (str, LocalOperator, MomentumOperator)):
        return probe(k)
    if isinstance(probe, MomentumOperator):
        mop = MomentumOperator(probe.op, k, probe.ref, probe.name, probe.normalized)
    elif isinstance(probe, LocalOperator):
        mop = MomentumOperator(probe, k)
    else:
        mop = MomentumOperator.from_string(probe, k)
    return momentum_matrix(mop, basis)


def _k_grid(n, k_list):
    if k_list is None:
        return [2 * math.pi * j / n for j in range(n)]
    return list(np.atleast_1d(k_list))


def _pairs(eig, probe, k, probe_b=None, subtract_identity=True):
    """Yield (E_from, E_to, M_a, M_b, src, dst) with M = <E_to|O(k)|E_from>.

    Blocks of a list (e.g. magnetisation sectors) are assumed unconnected
    by the probe; the identity component is taken over their union.
    """
    systems = _system_list(eig)
    mats = []
    for sysm in systems:
        Oa = _probe_matrix(sysm.basis, probe, k)
        Ob = None if probe_b is None else _probe_matrix(sysm.basis, probe_b, k)
        mats.append([Oa, Ob])
    if subtract_identity:
        D = sum(m[0].shape[0] for m in mats)
        for slot in (0, 1):
            if slot == 1 and probe_b is None:
                continue
            tr = sum(m[slot].diagonal().sum() for m in mats) / D
            if abs(tr) > 1e-14:
                for m in mats:
                    m[slot] = m[slot] - tr * sp.identity(m[slot].shape[0], format="csr")
    for sysm, (Oa, Ob) in zip(systems, mats):
        if isinstance(sysm, EigenDecomposition):
            V = sysm.parent_vectors()
            Ma = V.conj().T @ (Oa @ V)
            Mb = Ma if Ob is None else V.conj().T @ (Ob @ V)
            yield sysm.energies, sysm.energies, Ma, Mb, sysm, sysm
            continue
        n = sysm.n_sites
        jk = k * n / (2 * math.pi)
        if abs(jk - round(jk)) > 1e-9:
            raise InvalidArgumentError(f"k={k} is not a lattice momentum for N={n}")
        jk = int(round(jk)) % n
        for j, src in sysm.sectors.items():
            dst = sysm.sectors.get((j - jk) % n)
            if dst is None:
                continue
            Ma = dst.vectors.conj().T @ src.sector.operator(Oa, dst.sector) @ src.vectors
            Mb = Ma if Ob is None else dst.vectors.conj().T @ src.sector.operator(Ob, dst.sector) @ src.vectors
            yield src.energies, dst.energies, Ma, Mb, src, dst


def _basis_of(eig):
    if isinstance(eig, (list, tuple)):
        return eig[0].basis
    return eig.basis


def _system_list(eig):
    return list(eig) if isinstance(eig, (list, tuple)) else [eig]


def _spectral_width(eig):
    systems = eig if isinstance(eig, (list, tuple)) else [eig]
    Es = np.concatenate([s.energies if isinstance(s, EigenDecomposition) else s.energies()
                         for s in systems])
    return float(Es.max() - Es.min())


def idsf(eig, probe, sigma: float = 0.05, k_list=None, omega=None, subtract_identity=True) -> SpectralGrid:
    """Infinite-temperature dynamical structure factor.

    S(k, w) = (1/D) sum_{E, E'} |<E'|O(k)|E>|^2 delta(w - (E' - E)),
    Gaussian-broadened with width ``sigma``; the frequency integral equals
    ||O(k)||^2 (identity component removed when ``subtract_identity``).
    ``eig`` is a full EigenDecomposition, a SectorEigensystem, or a list of
    blocks that the probe does not connect to each other (e.g. magnetisation
    sectors).
    """
    if sigma <= 0:
        raise InvalidArgumentError("sigma must be positive")
    return _structure_factor(eig, probe, sigma, k_list, omega, "idsf", subtract_identity=subtract_identity)


def _structure_factor(eig, probe, sigma, k_list, omega, variant, psi=None, beta=None, probe_b=None,
                      subtract_identity=True):
    if sigma <= 0:
        raise InvalidArgumentError("sigma must be positive")
    basis = _basis_of(eig)
    D = sum(s.basis.dim for s in _system_list(eig))
    ks = _k_grid(basis.n_sites, k_list)
    if omega is None:
        omega = default_omega(_spectral_width(eig), sigma)
    omega = np.asarray(omega, dtype=float)
    cplx = variant == "cross"
    out = np.zeros((len(ks), len(omega)), dtype=complex if cplx else float)
    weight_tot = np.zeros(len(ks))
    zpart = None
    if variant == "finite_T":
        systems = eig if isinstance(eig, (list, tuple)) else [eig]
        Es = np.concatenate([s.energies if isinstance(s, EigenDecomposition) else s.energies()
                             for s in systems])
        e0 = Es.min()
        zpart = np.exp(-beta * (Es - e0)).sum()
    # deposit on a grid padded by the spectral width so that transitions
    # outside the requested window still contribute their Gaussian tails
    if len(omega) > 1:
        dw = omega[1] - omega[0]
        pad = int(math.ceil((_spectral_width(eig) + 8.0 * sigma) / dw))
        wide = omega[0] + dw * np.arange(-pad, len(omega) + pad)
    else:
        pad, wide = 0, omega
    for a, k in enumerate(ks):
        hist = np.zeros(len(wide), dtype=out.dtype)
        for Ef, Et, Ma, Mb, src, dst in _pairs(eig, probe, k, probe_b, subtract_identity):
            freqs = (Et[:, None] - Ef[None, :]).ravel()
            if variant == "cross":
                w = (Ma.conj() * Mb).ravel() / D
            else:
                w = np.abs(Ma) ** 2
                if variant == "idsf":
                    w = w / D
                elif variant == "state_weighted":
                    c = src.coefficients(psi)
                    w = w * (np.abs(c) ** 2)[None, :]
                elif variant == "finite_T":
                    w = w * (np.exp(-beta * (Ef - e0)) / zpart)[None, :]
                w = w.ravel()
            weight_tot[a] += w.real.sum()
            hist += _deposit(freqs, w, wide)
        out[a] = _broaden(hist, wide, sigma)[pad:pad + len(omega)]
    grid = SpectralGrid(ks, omega, out, variant, sigma, basis.n_sites,
                        {"probe": _probe_name(probe), "weight": weight_tot.tolist()})
    if variant == "finite_T":
        grid.meta["beta"] = beta
    return grid


def _probe_name(probe):
    if isinstance(probe, str):
        return probe
    return getattr(probe, "name", None) or type(probe).__name__


def dsf_variant(eig, probe, variant: str, psi=None, beta=None, probe_b=None,
                sigma: float = 0.05, k_list=None, omega=None) -> SpectralGrid:
    """Modified structure factors.

    state_weighted: sum |<E'|O(k)|E>|^2 |<E|psi>|^2 delta(w - E' + E)
    finite_T:       same with Boltzmann weights e^{-beta E}/Z
    cross:          (1/D) sum <E'|A(k)|E>^* <E'|B(k)|E> delta(w - E' + E), complex
    connected_FT:   space-time Fourier transform of <Z_j Z_{j+d}>_c(t) in psi(t)
    """
    if variant == "state_weighted":
        if isinstance(eig, (list, tuple)):
            raise InvalidArgumentError("state_weighted needs a single eigensystem")
        if psi is None:
            raise InvalidArgumentError("state_weighted needs psi")
        return _structure_factor(eig, probe, sigma, k_list, omega, variant, psi=psi)
    if variant == "finite_T":
        if beta is None or beta < 0:
            raise InvalidArgumentError("finite_T needs beta >= 0")
        return _structure_factor(eig, probe, sigma, k_list, omega, variant, beta=beta)
    if variant == "cross":
        if probe_b is None:
            raise InvalidArgumentError("cross needs a second probe")
        return _structure_factor(eig, probe, sigma, k_list, omega, variant, probe_b=probe_b)
    if variant == "connected_FT":
        if psi is None:
            raise InvalidArgumentError("connected_FT needs psi")
        return _connected_ft(eig, probe, psi, sigma, k_list, omega)
    raise InvalidArgumentError(f"unknown variant {variant!r}")


def _connected_ft(eig, probe, psi, sigma, k_list, omega):
    """Both lines of the eigenbasis expansion of F[C(d, t)] for a full decomposition."""
    if not isinstance(eig, EigenDecomposition):
        raise InvalidArgumentError("connected_FT needs a full (unsectored) decomposition")
    basis = eig.basis
    ks = _k_grid(basis.n_sites, k_list)
    V = eig.vectors
    E = eig.energies
    c = V.conj().T @ np.asarray(psi, dtype=complex)
    if omega is None:
        omega = default_omega(2 * _spectral_width(eig), sigma)
    omega = np.asarray(omega, dtype=float)
    out = np.zeros((len(ks), len(omega)), dtype=complex)
    freqs = (E[:, None] - E[None, :]).ravel()
    for a, k in enumerate(ks):
        Ok = _probe_matrix(basis, probe, k)
        Omk = _probe_matrix(basis, probe, -k)
        M = V.conj().T @ (Omk @ (Ok @ V))
        w = (c.conj()[:, None] * c[None, :] * M).ravel()
        hist = _deposit(freqs, w, omega)
        if abs(math.remainder(k, 2 * math.pi)) < 1e-12:
            # disconnected part: the spectrum of <O(0)>(t)^2 is the
            # self-convolution of the spectrum of <O(0)>(t)
            Z0 = V.conj().T @ (Ok @ V)
            w1 = (c.conj()[:, None] * c[None, :] * Z0).ravel()
            h1 = _deposit(freqs, w1, omega)
            hist -= _recentre(np.convolve(h1, h1), omega)
        out[a] = _broaden(hist, omega, sigma)
    return SpectralGrid(ks, omega, out, "connected_FT", sigma, basis.n_sites,
                        {"probe": _probe_name(probe)})


def _recentre(conv, omega):
    """Full self-convolution of a grid histogram back onto the symmetric grid."""
    # entry m of the full convolution sits at 2 omega[0] + m dw
    dw = omega[1] - omega[0]
    m0 = int(round(-omega[0] / dw))
    return conv[m0: m0 + len(omega)]


# ---------------------------------------------------------------------------
# participation ratio


def participation_ratio(eig, probe, k: float = 0.0, subtract_identity=True) -> float:
    """PR = (sum |M_ab|^2)^2 / sum |M_ab|^4 over all eigenpairs."""
    s2 = s4 = 0.0
    if sp.issparse(probe) or isinstance(probe, np.ndarray):
        V = eig.parent_vectors()
        M = V.conj().T @ (probe @ V)
        blocks = [np.abs(M) ** 2]
    else:
        blocks = [np.abs(Ma) ** 2 for _, _, Ma, _, _, _ in _pairs(eig, probe, k)]
    for b in blocks:
        s2 += b.sum()
        s4 += (b**2).sum()
    if s4 == 0:
        raise InvalidArgumentError("participation ratio of the zero operator is undefined")
    return float(s2**2 / s4)


# ---------------------------------------------------------------------------
# scaling collapse


@dataclass
class CollapseResult:
    z: float
    residual: float
    x: np.ndarray
    curves: np.ndarray  # (n_k, len(x))
    k_values: np.ndarray


def scaling_collapse(grid: SpectralGrid, z: float, k_max: float, n_points: int = 400,
                     positive_only: bool = False) -> CollapseResult:
    """Rescale S(k, w) -> (w / k^z, k^z S) for 0 < k <= k_max.

    The residual is the mean over curve pairs of the squared L2 distance on
    the common rescaled window, relative to the mean squared curve norm;
    0 means perfect collapse.
    """
    ks = grid.k_values
    sel = np.flatnonzero((ks > 1e-12) & (ks <= k_max + 1e-12))
    if len(sel) < 3:
        raise InvalidArgumentError("scaling collapse needs at least 3 momenta below k_max")
    w = grid.omega
    lo = max(w.min() / ks[i] ** z for i in sel)
    hi = min(w.max() / ks[i] ** z for i in sel)
    if positive_only:
        lo = max(lo, 0.0)
    x = np.linspace(lo, hi, n_points)
    curves = np.array([np.interp(x * ks[i] ** z, w, np.real(grid.values[i])) * ks[i] ** z for i in sel])
    num = den = 0.0
    for a in range(len(sel)):
        for b in range(a + 1, len(sel)):
            num += np.trapezoid((curves[a] - curves[b]) ** 2, x)
            den += 0.5 * np.trapezoid(curves[a] ** 2 + curves[b] ** 2, x)
    res = num / den if den > 0 else (0.0 if num == 0 else math.inf)
    return CollapseResult(z, float(res), x, curves, ks[sel])


def best_collapse(grid: SpectralGrid, zs, k_max: float, **kw):
    results = [scaling_collapse(grid, z, k_max, **kw) for z in zs]
    return min(results, key=lambda r: r.residual), results


# ---------------------------------------------------------------------------
# diagonal ensemble


@dataclass
class DiagonalEnsemble:
    """rho_d = sum_b P_b |psi><psi| P_b over degenerate energy blocks."""

    energies: np.ndarray
    blocks: list  # list of (vectors (D, m), coefficients (m,))
    psi: np.ndarray

    def expectation(self, op) -> complex:
        total = 0.0 + 0.0j
        for V, c in self.blocks:
            phi = V @ c  # P_b |psi>
            total += np.vdot(phi, op @ phi)
        return complex(total)

    def weights(self) -> np.ndarray:
        return np.array([np.vdot(c, c).real for _, c in self.blocks])

    def config_probabilities(self) -> np.ndarray:
        """Diagonal of rho_d in the computational basis."""
        p = np.zeros(len(self.psi))
        for V, c in self.blocks:
            p += np.abs(V @ c) ** 2
        return p


def diagonal_ensemble(eig: EigenDecomposition, psi0, degenerate_tol: float = 1e-8) -> DiagonalEnsemble:
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-8:
        raise InvalidArgumentError("psi0 must be normalised")
    V = eig.parent_vectors()
    E = eig.energies
    c = V.conj().T @ psi0
    blocks = []
    start = 0
    for i in range(1, len(E) + 1):
        if i == len(E) or E[i] - E[i - 1] > degenerate_tol:
            cb = c[start:i]
            if np.abs(cb).max(initial=0) > 1e-14:
                blocks.append((V[:, start:i], cb))
            start = i
    return DiagonalEnsemble(E, blocks, psi0)


# ---------------------------------------------------------------------------
# scar scans


@dataclass
class ScarScan:
    energies: np.ndarray
    overlaps: np.ndarray  # (n_probes, n_states)
    entropies: np.ndarray | None
    peaks: list  # per probe: energies of detected tower states
    spacings: list
    threshold: float

    def band_candidates(self, q: float) -> dict:
        """Spacing per probe compared with both w0(q) and 2 w0(q).

        Inside q in [0, pi/2] the towers follow 2 w0; outside they drift
        toward w0, so both ratios are returned and nothing is chosen.
        """
        from .liouville import field_band

        w0 = float(field_band(q))
        s = np.asarray(self.spacings, dtype=float)
        return {"w0": w0, "ratio_w0": s / w0, "ratio_2w0": s / (2 * w0)}


def find_tower(energies, overlaps, threshold_factor: float = 3.0, window: float | None = None,
               degenerate_tol: float = 1e-8):
    """Eigenstates that dominate their energy neighbourhood.

    Overlaps of degenerate levels are summed first.  A level is kept when
    its overlap exceeds ``threshold_factor`` times the median overlap and is
    the largest within +-window/2.  Returns
    (peak energies, median spacing, threshold); the median is insensitive
    to the bending of the ladder near the spectral edges.
    """
    E = np.asarray(energies)
    ov = np.asarray(overlaps)
    thr = threshold_factor * np.median(ov)
    if window is None:
        window = 0.5
    order = np.argsort(E)
    E, ov = E[order], ov[order]
    # a degenerate eigenspace has no preferred basis: pool its overlap
    if len(E) > 1:
        starts = np.flatnonzero(np.r_[True, np.diff(E) > degenerate_tol])
        ov = np.add.reduceat(ov, starts)
        E = E[starts]
    keep = []
    for i in np.flatnonzero(ov > thr):
        near = np.abs(E - E[i]) <= window / 2
        if ov[i] >= ov[near].max():
            keep.append(i)
    peaks = E[keep]
    spacing = float(np.median(np.diff(peaks))) if len(peaks) > 1 else float("nan")
    return peaks, spacing, float(thr)


def scar_scan(eig, probe_states, entropy_cut: int | None = None,
              threshold_factor: float = 3.0, window: float = 0.5) -> ScarScan:
    """Overlaps |<psi|E>|^2, half-chain entropies and detected peak ladders.

    ``eig`` is one block or a SectorEigensystem; with several sectors the
    levels of all of them are pooled (the Z2 tower alternates between k = 0
    and k = pi, for instance).
    """
    from .entangle import entanglement_entropy

    blocks = list(eig.sectors.values()) if isinstance(eig, SectorEigensystem) else [eig]
    V = np.hstack([b.parent_vectors() for b in blocks])
    energies = np.concatenate([b.energies for b in blocks])
    ov = np.array([np.abs(V.conj().T @ np.asarray(p, dtype=complex)) ** 2 for p in probe_states])
    ent = None
    if entropy_cut is not None:
        ent = np.array([entanglement_entropy(V[:, a], blocks[0].basis, entropy_cut) for a in range(V.shape[1])])
    peaks, spacings = [], []
    thr = None
    for row in ov:
        p, s, thr = find_tower(energies, row, threshold_factor, window)
        peaks.append(p)
        spacings.append(s)
    return ScarScan(energies, ov, ent, peaks, spacings, thr)


# ---------------------------------------------------------------------------
# convolution prediction


@dataclass
class ConvolutionCheck:
    predicted: SpectralGrid
    direct_peaks: np.ndarray | None
    predicted_peaks: np.ndarray
    deviation: np.ndarray | None


def convolution_check(S_Z: SpectralGrid, S_direct: SpectralGrid | None = None) -> ConvolutionCheck:
    """Predict S^PXP(k, w) ~ sum_q S^{Z+}(q) * S^{Z-}(k-q) + S^{Z-}(q) * S^{Z+}(k-q).

    ``S_Z`` must hold every momentum 2 pi j / N on a symmetric uniform
    frequency grid.  The prediction is normalised to the total weight of
    ``S_direct`` per k when that is given (the relation fixes shape only).
    """
    n = S_Z.n_sites
    ks = S_Z.k_values
    if n is None or len(ks) != n:
        raise InvalidArgumentError("convolution_check needs S_Z on the full momentum grid")
    w = S_Z.omega
    dw = w[1] - w[0]
    if not np.isclose(w[0], -w[-1]):
        raise InvalidArgumentError("frequency grid must be symmetric")
    j_of = {int(round(k * n / (2 * math.pi))) % n: a for a, k in enumerate(ks)}
    pos = np.where(w > 0, np.real(S_Z.values), 0.0)
    neg = np.where(w < 0, np.real(S_Z.values), 0.0)
    pred = np.zeros((n, len(w)))
    for jk in range(n):
        acc = np.zeros(len(w))
        for jq in range(n):
            a, b = j_of[jq], j_of[(jk - jq) % n]
            acc += np.convolve(pos[a], neg[b], mode="same") * dw
            acc += np.convolve(neg[a], pos[b], mode="same") * dw
        pred[j_of[jk]] = acc
    if S_direct is not None:
        scale = S_direct.weights() / np.maximum(np.trapezoid(pred, w, axis=1), 1e-300)
        pred = pred * scale[:, None]
    grid = SpectralGrid(ks, w, pred, "convolution", S_Z.sigma, n, {"source": S_Z.meta.get("probe")})
    pp = grid.peak_frequencies()
    dp = dev = None
    if S_direct is not None:
        dp = S_direct.peak_frequencies()
        dev = np.abs(pp - dp) / np.maximum(np.abs(dp), 1e-12)
    return ConvolutionCheck(grid, dp, pp, dev)
