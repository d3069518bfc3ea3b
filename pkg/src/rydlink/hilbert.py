"""Rydberg-blockaded Hilbert spaces.

Configurations are stored as integers with site 0 in the least significant
bit.  A set bit marks a Rydberg excitation.  Bases are sorted ascending so
that ``index_of`` reduces to a binary search.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, ResourceError

MAX_SITES = 32
MAX_FULL_SITES = 24

PHI = (1.0 + np.sqrt(5.0)) / 2.0


class Boundary(str, enum.Enum):
    OBC = "OBC"
    PBC = "PBC"

    @classmethod
    def parse(cls, value) -> "Boundary":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise InvalidArgumentError(f"unknown boundary {value!r}, expected OBC or PBC") from None


@lru_cache(maxsize=None)
def obc_count(m: int) -> int:
    """Number of blockaded strings on an open segment of ``m`` sites.

    Extended to ``m = -1`` (value 1) and ``m = -2`` (value 0) so that
    segments with forced-empty end sites can be counted with one formula,
    ``obc_count(m - f)`` for ``f`` forced ends.
    """
    if m < -2:
        raise ValueError("segment length below -2")
    a, b = 0, 1  # D_{-2}, D_{-1}
    for _ in range(m + 2):
        a, b = b, a + b
    return a


def dimension(n_sites: int, boundary=Boundary.OBC) -> int:
    """Dimension of the blockaded space on ``n_sites`` sites.

    Open chains obey D_N = D_{N-1} + D_{N-2} with D_1 = 2, D_2 = 3.  Rings
    satisfy D_N = D^OBC_{N-1} + D^OBC_{N-3}: either site 0 is empty and the
    remaining N-1 sites form an open segment, or it is excited and its two
    neighbours are forced empty.
    """
    boundary = Boundary.parse(boundary)
    if n_sites < 1:
        raise InvalidArgumentError("n_sites must be >= 1")
    if boundary is Boundary.OBC:
        return obc_count(n_sites)
    return obc_count(n_sites - 1) + obc_count(n_sites - 3)


def bit_matrix(states: np.ndarray, n_sites: int) -> np.ndarray:
    """(len(states), n_sites) array of 0/1 occupations, column j = site j."""
    states = np.asarray(states, dtype=np.int64)
    return ((states[:, None] >> np.arange(n_sites, dtype=np.int64)) & 1).astype(np.int8)


def bitstring(state: int, n_sites: int) -> str:
    """Render a configuration with site 0 leftmost."""
    return "".join("1" if (int(state) >> j) & 1 else "0" for j in range(n_sites))


def parse_bitstring(text: str) -> int:
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise InvalidArgumentError(f"not a bitstring: {text!r}")
    return sum(1 << j for j, c in enumerate(text) if c == "1")


def translate(states, n_sites: int, shift: int = 1):
    """Cyclic translation moving the occupation of site j to site j+shift."""
    shift %= n_sites
    states = np.asarray(states, dtype=np.int64)
    if shift == 0:
        return states.copy()
    mask = (1 << n_sites) - 1
    return ((states << shift) | (states >> (n_sites - shift))) & mask


def reflect(states, n_sites: int):
    """Spatial inversion j -> N-1-j."""
    states = np.asarray(states, dtype=np.int64)
    out = np.zeros_like(states)
    for j in range(n_sites):
        out |= ((states >> j) & 1) << (n_sites - 1 - j)
    return out


def is_blockaded(states, n_sites: int, boundary=Boundary.OBC):
    boundary = Boundary.parse(boundary)
    states = np.asarray(states, dtype=np.int64)
    ok = (states & (states >> 1)) == 0
    if boundary is Boundary.PBC and n_sites > 1:
        ok &= ~(((states & 1) == 1) & (((states >> (n_sites - 1)) & 1) == 1))
    if boundary is Boundary.PBC and n_sites == 1:
        ok &= states == 0
    return ok


@dataclass(frozen=True, eq=False)
class Basis:
    """Sorted list of computational configurations on a chain."""

    n_sites: int
    boundary: Boundary
    states: np.ndarray = field(repr=False)
    constrained: bool = True

    def __len__(self):
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, config):
        """Position of ``config`` (int or array) in ``states``.

        Raises KeyError for configurations outside the basis.
        """
        config = np.asarray(config, dtype=np.int64)
        idx = np.searchsorted(self.states, config)
        idx_c = np.minimum(idx, len(self.states) - 1)
        if not np.all(self.states[idx_c] == config):
            raise KeyError("configuration not in basis")
        return int(idx_c) if idx_c.ndim == 0 else idx_c

    def lookup(self, configs):
        """Vectorised index lookup returning -1 for missing configurations."""
        configs = np.asarray(configs, dtype=np.int64)
        idx = np.searchsorted(self.states, configs)
        idx_c = np.minimum(idx, len(self.states) - 1)
        return np.where(self.states[idx_c] == configs, idx_c, -1)

    def bits(self) -> np.ndarray:
        return bit_matrix(self.states, self.n_sites)

    def product_state(self, config) -> np.ndarray:
        if isinstance(config, str):
            config = parse_bitstring(config)
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index_of(int(config))] = 1.0
        return psi

    def export(self, path) -> None:
        """Write one bitstring per line, site 0 leftmost."""
        with open(Path(path), "w", encoding="utf-8") as fh:
            for s in self.states:
                fh.write(bitstring(s, self.n_sites) + "\n")


class BlockadedBasis(Basis):
    pass


def enumerate_basis(n_sites: int, boundary=Boundary.OBC) -> BlockadedBasis:
    """All blockade-respecting configurations of ``n_sites`` sites, ascending."""
    boundary = Boundary.parse(boundary)
    if n_sites < 1:
        raise InvalidArgumentError("n_sites must be >= 1")
    if n_sites > MAX_SITES:
        raise ResourceError(
            f"basis for N={n_sites} {boundary.value} would have dimension "
            f"{dimension(n_sites, boundary)}, above the cap of N={MAX_SITES}")
    # grow open strings site by site; `last` tracks the top bit
    states = np.array([0, 1], dtype=np.int64)
    for j in range(1, n_sites):
        free = states[((states >> (j - 1)) & 1) == 0]
        states = np.concatenate([states, free | (1 << j)])
    if boundary is Boundary.PBC:
        states = states[is_blockaded(states, n_sites, boundary)]
    states = np.sort(states)
    return BlockadedBasis(n_sites, boundary, states, True)


def full_basis(n_sites: int, boundary=Boundary.OBC) -> Basis:
    """Unconstrained 2^N basis."""
    boundary = Boundary.parse(boundary)
    if n_sites > MAX_FULL_SITES:
        raise ResourceError(f"full basis for N={n_sites} has dimension 2^{n_sites}, above the cap")
    return Basis(n_sites, boundary, np.arange(1 << n_sites, dtype=np.int64), False)


def magnetization_basis(n_sites: int, n_up: int, boundary=Boundary.PBC) -> Basis:
    """Full-space configurations with exactly ``n_up`` set bits."""
    boundary = Boundary.parse(boundary)
    if n_sites > MAX_FULL_SITES:
        raise ResourceError(f"N={n_sites} above the full-space cap")
    allc = np.arange(1 << n_sites, dtype=np.int64)
    pop = bit_matrix(allc, n_sites).sum(axis=1)
    return Basis(n_sites, boundary, allc[pop == n_up], False)


def cycle_to_time(cycles, omega: float = 2.0):
    """Convert Rabi cycles to natural time units, one cycle = 2*pi/omega."""
    return np.asarray(cycles, dtype=float) * 2.0 * np.pi / omega


def time_to_cycle(t, omega: float = 2.0):
    return np.asarray(t, dtype=float) * omega / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# translation sectors


def _orbit_data(basis: Basis):
    """Per-state orbit representative, shift from representative, orbit size."""
    n = basis.n_sites
    st = basis.states
    rep = st.copy()
    shift = np.zeros(len(st), dtype=np.int64)
    size = np.zeros(len(st), dtype=np.int64)
    for s in range(1, n + 1):
        # t = T^{-s} x, the state translated back by s sites
        t = translate(st, n, -s)
        better = t < rep
        rep = np.where(better, t, rep)
        shift = np.where(better, s % n, shift)
        first_return = (t == st) & (size == 0)
        size[first_return] = s
    return rep, shift, size


@dataclass(frozen=True, eq=False)
class TranslationSector:
    """Momentum eigenspace of a translation-closed periodic basis.

    Momentum states are |r,k> = R^{-1/2} sum_{m<R} e^{-ikm} T^m |r> with T the
    unit translation and R the orbit size, so that T|r,k> = e^{ik}|r,k>.
    ``parity`` optionally refines k = 0 or pi by spatial inversion.
    """

    parent: Basis
    j: int
    representatives: np.ndarray
    orbit_sizes: np.ndarray
    projector: sp.csc_matrix = field(repr=False)
    parity: int | None = None

    @property
    def k(self) -> float:
        return 2.0 * np.pi * self.j / self.parent.n_sites

    @property
    def dim(self) -> int:
        return self.projector.shape[1]

    @property
    def norms(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.orbit_sizes)

    def embed(self, vec):
        """Sector coordinates -> parent basis amplitudes."""
        return self.projector @ vec

    def restrict(self, vec):
        return self.projector.conj().T @ vec

    def operator(self, op, other: "TranslationSector | None" = None):
        """Matrix of a parent-space operator between sectors (<other|op|self>)."""
        left = self if other is None else other
        out = left.projector.conj().T @ (op @ self.projector)
        return out.toarray() if sp.issparse(out) else np.asarray(out)


def build_translation_sector(basis: Basis, k, parity: int | None = None) -> TranslationSector:
    """Momentum sector ``k`` of a periodic basis.

    ``k`` may be given as the integer j of k = 2 pi j / N or as a float, which
    must then lie on that grid.
    """
    if Boundary.parse(basis.boundary) is not Boundary.PBC:
        raise InvalidArgumentError("translation sectors need a periodic basis")
    n = basis.n_sites
    if isinstance(k, (int, np.integer)):
        j = int(k) % n
    else:
        jf = float(k) * n / (2.0 * np.pi)
        j = int(round(jf))
        if abs(jf - j) > 1e-9:
            raise InvalidArgumentError(f"k={k} is not of the form 2 pi j / {n}")
        j %= n
    if parity is not None and (2 * j) % n != 0:
        raise InvalidArgumentError("inversion parity is only defined at k = 0 or pi")

    rep, shift, size = _orbit_data(basis)
    is_rep = rep == basis.states
    compatible = is_rep & ((j * size) % n == 0)
    reps = basis.states[compatible]
    sizes = size[compatible]
    kval = 2.0 * np.pi * j / n

    # |r,k> has amplitude e^{-ikm}/sqrt(R) on T^m r; the state T^m r has
    # shift m relative to its representative, so every basis state in a
    # compatible orbit contributes exactly one entry
    rep_col = -np.ones(len(basis.states), dtype=np.int64)
    rep_col[np.flatnonzero(compatible)] = np.arange(len(reps))
    cols = rep_col[basis.lookup(rep)]
    member = cols >= 0
    rows = np.flatnonzero(member)
    vals = np.exp(-1j * kval * shift[member]) / np.sqrt(size[member])
    U = sp.csc_matrix((vals, (rows, cols[member])), shape=(len(basis.states), len(reps)))

    if parity is not None:
        U, reps, sizes = _inversion_refine(basis, U, reps, sizes, rep, shift, kval, parity)
    return TranslationSector(basis, j, reps, sizes, U.tocsc(), parity)


def _inversion_refine(basis, U, reps, sizes, rep, shift, kval, parity):
    n = basis.n_sites
    ref = reflect(reps, n)
    ridx = basis.lookup(ref)
    rrep = rep[ridx]
    rshift = shift[ridx]
    col_of = {int(r): c for c, r in enumerate(reps)}
    U = U.tocsc()
    cols, keep_reps, keep_sizes = [], [], []
    seen = set()
    for c, r in enumerate(reps):
        r = int(r)
        if r in seen:
            continue
        partner = int(rrep[c])
        phase = np.exp(-1j * kval * rshift[c]).real  # +-1 at k = 0, pi
        if partner == r:
            if np.isclose(phase, parity):
                cols.append(U[:, c])
                keep_reps.append(r)
                keep_sizes.append(sizes[c])
        else:
            seen.add(partner)
            v = (U[:, c] + parity * phase * U[:, col_of[partner]]) / np.sqrt(2.0)
            cols.append(v)
            keep_reps.append(r)
            keep_sizes.append(sizes[c])
        seen.add(r)
    if cols:
        Unew = sp.hstack(cols).tocsc()
    else:
        Unew = sp.csc_matrix((len(basis.states), 0), dtype=complex)
    return Unew, np.array(keep_reps, dtype=np.int64), np.array(keep_sizes, dtype=np.int64)


def sector_dimensions(basis: Basis) -> dict[int, int]:
    """Dimension of every momentum sector, keyed by j."""
    rep, _, size = _orbit_data(basis)
    sizes = size[rep == basis.states]
    n = basis.n_sites
    return {j: int(np.sum((j * sizes) % n == 0)) for j in range(n)}
