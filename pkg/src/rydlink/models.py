"""Sparse Hamiltonians and operator matrices.

Every model is assembled from local matrix-unit strings (see
:mod:`rydlink.trace`), so the same code builds operators on the blockaded
space and on the full 2^N space.  Sites beyond the end of an open chain are
treated as permanently empty: a projector P there acts as 1, anything else
annihilates the term.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .hilbert import Basis, Boundary, bit_matrix, enumerate_basis, full_basis
from .trace import LocalOperator, MomentumOperator, OperatorString, _site_product, as_local


class Variant(str, enum.Enum):
    PXP = "PXP"
    RYDBERG = "RydbergLongRange"
    SCHWINGER = "SchwingerSpin"
    MFIM = "MixedFieldIsing"
    TFIM = "TransverseFieldIsing"
    XXZ = "XXZ"


_DEFAULTS = {
    Variant.PXP: {},
    # Rabi frequency and detuning in MHz, C6 in GHz um^6, spacing in um
    Variant.RYDBERG: {"omega": 6.9, "delta": 0.5, "c6": 254.0, "a": 3.77},
    Variant.SCHWINGER: {"w": 1.0, "m": 0.0, "J": 1.0, "eps0": -0.5},
    Variant.MFIM: {"hx": 0.8090, "hz": 0.9045, "J": 1.0},
    Variant.TFIM: {"hx": 0.0, "hz": 2.0, "J": 1.0},
    Variant.XXZ: {"delta": 1.0},
}


@dataclass
class ModelSpec:
    """Which Hamiltonian to build, on how many sites, with which boundary."""

    variant: Variant
    n_sites: int
    boundary: Boundary = Boundary.PBC
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.variant = Variant(self.variant)
        except ValueError:
            raise InvalidArgumentError(f"unknown model variant {self.variant!r}") from None
        self.boundary = Boundary.parse(self.boundary)
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise InvalidArgumentError("n_sites must be a positive integer")
        self.n_sites = int(self.n_sites)
        merged = dict(_DEFAULTS[self.variant])
        unknown = set(self.params) - set(merged) - {"coupling"}
        if unknown:
            raise InvalidArgumentError(f"unknown parameters for {self.variant.value}: {sorted(unknown)}")
        merged.update(self.params)
        self.params = merged
        self.validate()

    def validate(self):
        for key, v in self.params.items():
            if key == "coupling":
                continue
            if not math.isfinite(float(v)):
                raise InvalidArgumentError(f"parameter {key} must be finite")
        if self.variant is Variant.RYDBERG and self.params["a"] <= 0:
            raise InvalidArgumentError("lattice spacing a must be positive")
        if self.variant is Variant.SCHWINGER and self.boundary is not Boundary.OBC:
            raise InvalidArgumentError("the spin form of the Schwinger model needs open boundaries")

    @property
    def constrained(self) -> bool:
        return self.variant is Variant.PXP

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "n_sites": self.n_sites,
                "boundary": self.boundary.value, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if not isinstance(d, dict):
            raise InvalidArgumentError("model spec must be a JSON object")
        missing = {"variant", "n_sites"} - set(d)
        if missing:
            raise InvalidArgumentError(f"model spec missing fields {sorted(missing)}")
        extra = set(d) - {"variant", "n_sites", "boundary", "params"}
        if extra:
            raise InvalidArgumentError(f"model spec has unknown fields {sorted(extra)}")
        return cls(d["variant"], d["n_sites"], d.get("boundary", "PBC"), dict(d.get("params", {})))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_model_specs(path) -> list[ModelSpec]:
    """Parse a JSON document holding one model object or a list of them."""
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict) and "models" in doc:
        doc = doc["models"]
    if isinstance(doc, dict):
        doc = [doc]
    return [ModelSpec.from_dict(d) for d in doc]


@dataclass(eq=False)
class SparseHamiltonian:
    basis: Basis
    matrix: sp.csr_matrix
    spec: ModelSpec | None = None
    hermitian: bool = True

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __matmul__(self, v):
        return self.matrix @ v

    def dense(self):
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0


# ---------------------------------------------------------------------------
# operator matrices


def _place_units(start, units, basis: Basis):
    """Resolve a placed matrix-unit string to (mask, bra, ket) bit patterns."""
    n = basis.n_sites
    pbc = Boundary.parse(basis.boundary) is Boundary.PBC
    sites = {}
    for i, u in enumerate(units):
        x = start + i
        if pbc:
            x %= n
        elif not 0 <= x < n:
            if u in ("P", "I"):
                continue
            return None
        if x in sites:
            u = _site_product(sites[x], u)
            if u is None:
                return None
        sites[x] = u
    mask = bra = ket = 0
    for x, u in sites.items():
        if u == "I":
            continue
        mask |= 1 << x
        if u in ("n", "-"):
            bra |= 1 << x
        if u in ("n", "+"):
            ket |= 1 << x
    return mask, bra, ket


def operator_matrix(op, basis: Basis, site: int = 0, dtype=complex) -> sp.csr_matrix:
    """Sparse matrix of a local operator placed with its anchor at ``site``."""
    op = as_local(op)
    D = basis.dim
    st = basis.states
    rows, cols, vals = [], [], []
    real = not np.issubdtype(np.dtype(dtype), np.complexfloating)
    for (s, u), c in op.terms.items():
        if real:
            if abs(complex(c).imag) > 1e-14:
                raise InvalidArgumentError("complex coefficient in a real operator matrix")
            c = complex(c).real
        if not u:
            rows.append(np.arange(D))
            cols.append(np.arange(D))
            vals.append(np.full(D, c, dtype=dtype))
            continue
        placed = _place_units(s + site, u, basis)
        if placed is None:
            continue
        mask, bra, ket = placed
        sel = np.flatnonzero((st & mask) == bra)
        if len(sel) == 0:
            continue
        new = (st[sel] & ~mask) | ket
        idx = basis.lookup(new)
        ok = idx >= 0
        rows.append(idx[ok])
        cols.append(sel[ok])
        vals.append(np.full(ok.sum(), c, dtype=dtype))
    if not rows:
        return sp.csr_matrix((D, D), dtype=dtype)
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(D, D), dtype=dtype)
    M.sum_duplicates()
    return M


def diagonal_values(op, basis: Basis, site: int = 0) -> np.ndarray:
    """Diagonal of a diagonal operator as a dense vector (cheaper than a matrix)."""
    op = as_local(op)
    out = np.zeros(basis.dim, dtype=complex)
    st = basis.states
    for (s, u), c in op.terms.items():
        if not u:
            out += c
            continue
        placed = _place_units(s + site, u, basis)
        if placed is None:
            continue
        mask, bra, ket = placed
        if bra != ket:
            raise InvalidArgumentError("operator is not diagonal")
        out[(st & mask) == bra] += c
    return out


def momentum_matrix(mop: MomentumOperator, basis: Basis) -> sp.csr_matrix:
    """O(k) = N^{-1/2} sum_j e^{ik(j+ref)} O_j on a periodic basis."""
    n = basis.n_sites
    total = None
    for j in range(n):
        M = operator_matrix(mop.op, basis, j) * np.exp(1j * mop.k * (j + mop.ref))
        total = M if total is None else total + M
    if mop.normalized:
        total = total / math.sqrt(n)
    return total.tocsr()


def site_sum(op, basis: Basis, phases=None, sites=None) -> sp.csr_matrix:
    """sum_j phases[j] * O_j over ``sites`` (default: all)."""
    sites = range(basis.n_sites) if sites is None else sites
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for j in sites:
        w = 1.0 if phases is None else phases[j]
        total = total + w * operator_matrix(op, basis, j)
    return total.tocsr()


def _hermitian(M, basis, spec=None):
    M = M.tocsr()
    M.eliminate_zeros()
    if np.all(np.isreal(M.data)):
        M = M.real.tocsr()
    # symmetrise exactly; entries are built from both triangles already
    M = ((M + M.conj().T) * 0.5).tocsr()
    return SparseHamiltonian(basis, M, spec)


# ---------------------------------------------------------------------------
# models


def build_pxp(basis: Basis, amplitude: float = 1.0) -> SparseHamiltonian:
    """H = sum_j P_{j-1} X_j P_{j+1}, one flip amplitude per legal flip."""
    n = basis.n_sites
    st = basis.states
    rows, cols = [], []
    for j in range(n):
        new = st ^ (1 << j)
        if basis.constrained:
            idx = basis.lookup(new)
            ok = idx >= 0
        else:
            # on the full space keep only flips with empty neighbours
            left = (j - 1) % n if Boundary.parse(basis.boundary) is Boundary.PBC else j - 1
            right = (j + 1) % n if Boundary.parse(basis.boundary) is Boundary.PBC else j + 1
            ok = np.ones(len(st), dtype=bool)
            for x in (left, right):
                if 0 <= x < n and x != j:
                    ok &= ((st >> x) & 1) == 0
            idx = basis.lookup(new)
        rows.append(idx[ok])
        cols.append(np.flatnonzero(ok))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    M = sp.csr_matrix((np.full(len(r), float(amplitude)), (r, c)), shape=(basis.dim, basis.dim))
    return SparseHamiltonian(basis, M, ModelSpec(Variant.PXP, n, basis.boundary))


def rydberg_nn_interaction(c6_ghz: float, a_um: float) -> float:
    """Nearest-neighbour van der Waals shift C6/a^6 in MHz."""
    if a_um <= 0:
        raise InvalidArgumentError("lattice spacing a must be positive")
    return 1e3 * c6_ghz / a_um**6


def build_rydberg(spec: ModelSpec, basis: Basis | None = None) -> SparseHamiltonian:
    """H/h = Omega sum S^x - Delta sum n + (C6/a^6) sum_{i>j} n_i n_j / |i-j|^6.

    All entries are in MHz; S^x = X/2.  On a blockaded basis the interaction
    is evaluated only on legal configurations.
    """
    if spec.variant is not Variant.RYDBERG:
        raise InvalidArgumentError("spec is not a Rydberg model")
    p = spec.params
    n = spec.n_sites
    basis = basis if basis is not None else full_basis(n, spec.boundary)
    V = rydberg_nn_interaction(p["c6"], p["a"])
    bits = bit_matrix(basis.states, n).astype(float)
    diag = -p["delta"] * bits.sum(axis=1)
    pbc = spec.boundary is Boundary.PBC
    for i in range(n):
        for j in range(i + 1, n):
            dist = min(j - i, n - (j - i)) if pbc else j - i
            diag = diag + V * bits[:, i] * bits[:, j] / dist**6
    M = sp.diags(diag).tocsr()
    flips = []
    st = basis.states
    for j in range(n):
        idx = basis.lookup(st ^ (1 << j))
        ok = idx >= 0
        flips.append((idx[ok], np.flatnonzero(ok)))
    r = np.concatenate([f[0] for f in flips])
    c = np.concatenate([f[1] for f in flips])
    X = sp.csr_matrix((np.full(len(r), 0.5 * p["omega"]), (r, c)), shape=M.shape)
    return SparseHamiltonian(basis, (M + X).tocsr(), spec)


def schwinger_electric_fields(states, n_sites: int, eps0: float) -> np.ndarray:
    """Link fields L_n = eps0 + 1/2 sum_{l<=n} (sigma^z_l + (-1)^l), n = 0..N-2."""
    sz = 1.0 - 2.0 * bit_matrix(states, n_sites)  # bit 0 <-> sigma^z = +1
    stag = (-1.0) ** np.arange(n_sites)
    return eps0 + 0.5 * np.cumsum(sz + stag, axis=1)[:, : n_sites - 1]


def build_schwinger_spin(spec: ModelSpec) -> SparseHamiltonian:
    """Lattice Schwinger model after Gauss-law elimination, on the full space.

    H = w sum_n (s+_n s-_{n+1} + h.c.) + (m/2) sum_n (-1)^n s^z_n + J sum_n L_n^2
    with the open-chain links n = 0..N-2.
    """
    if spec.variant is not Variant.SCHWINGER:
        raise InvalidArgumentError("spec is not a Schwinger model")
    if spec.boundary is not Boundary.OBC:
        raise InvalidArgumentError("the spin form of the Schwinger model needs open boundaries")
    p = spec.params
    n = spec.n_sites
    basis = full_basis(n, Boundary.OBC)
    st = basis.states
    sz = 1.0 - 2.0 * bit_matrix(st, n)
    L = schwinger_electric_fields(st, n, p["eps0"])
    diag = 0.5 * p["m"] * (sz * (-1.0) ** np.arange(n)).sum(axis=1) + p["J"] * (L**2).sum(axis=1)
    M = sp.diags(diag).tocsr()
    hop = sum((operator_matrix("+-", basis, j, float) + operator_matrix("-+", basis, j, float)
               for j in range(n - 1)), sp.csr_matrix((basis.dim, basis.dim)))
    return SparseHamiltonian(basis, (M + p["w"] * hop).tocsr(), spec)


def schwinger_pxp_map(n_matter: int, eps0: float = -0.5) -> tuple[Basis, np.ndarray]:
    """Embed the blockaded chain on the N-1 links into the Schwinger spin space.

    A link configuration z_n = 1 - 2 b_n fixes L_n = (-1)^n z_n / 2; the
    background field -1/2 on both outer links (charge-neutral sector, even N)
    then fixes every matter spin through Gauss's law.  Returns the open
    blockaded basis on the links and the index of each image in the full
    Schwinger basis.
    """
    if n_matter % 2 or n_matter < 2:
        raise InvalidArgumentError("the link map needs an even number of matter sites")
    if abs(eps0 + 0.5) > 1e-12:
        raise InvalidArgumentError("the link map is defined for eps0 = -1/2")
    links = enumerate_basis(n_matter - 1, Boundary.OBC)
    z = 1.0 - 2.0 * bit_matrix(links.states, n_matter - 1)
    L = np.empty((links.dim, n_matter + 1))
    L[:, 0] = eps0
    L[:, 1:-1] = 0.5 * z * (-1.0) ** np.arange(n_matter - 1)
    L[:, -1] = eps0
    sz = 2.0 * np.diff(L, axis=1) - (-1.0) ** np.arange(n_matter)
    if not np.all(np.isin(sz, (-1.0, 1.0))):
        raise InvalidArgumentError("link configuration violates Gauss's law")  # pragma: no cover
    bits = ((1 - sz) / 2).astype(np.int64)
    codes = bits @ (1 << np.arange(n_matter, dtype=np.int64))
    full = full_basis(n_matter, Boundary.OBC)
    return links, full.lookup(codes)


def build_comparison_model(spec: ModelSpec, basis: Basis | None = None) -> SparseHamiltonian:
    """Ising-type and XXZ chains on the full spin space.

    Ising variants: H = sum_j hx X_j + hz Z_j + J C_j C_{j+1} where the
    coupling axis C is X by default (so TFIM at hx=0 is the usual transverse
    field chain) and Z with params coupling='ZZ'.
    XXZ: H = sum_j X_j X_{j+1} + Y_j Y_{j+1} + delta Z_j Z_{j+1}.
    """
    n = spec.n_sites
    basis = basis if basis is not None else full_basis(n, spec.boundary)
    p = spec.params
    bonds = range(n) if spec.boundary is Boundary.PBC and n > 2 else range(n - 1)
    D = basis.dim
    H = sp.csr_matrix((D, D), dtype=float)
    if spec.variant in (Variant.MFIM, Variant.TFIM):
        axis = p.get("coupling", "XX")
        if axis not in ("XX", "ZZ"):
            raise InvalidArgumentError("coupling must be 'XX' or 'ZZ'")
        for j in range(n):
            if p["hx"]:
                H = H + p["hx"] * operator_matrix("X", basis, j, float)
            if p["hz"]:
                H = H + p["hz"] * operator_matrix("Z", basis, j, float)
        for j in bonds:
            H = H + p["J"] * _bond(axis, basis, j)
    elif spec.variant is Variant.XXZ:
        for j in bonds:
            H = H + _bond("XX", basis, j) + _bond("YY", basis, j) + p["delta"] * _bond("ZZ", basis, j)
    else:
        raise InvalidArgumentError(f"{spec.variant.value} is not a comparison model")
    return _hermitian(H, basis, spec)


def _bond(kind, basis, j):
    # placement wraps modulo N on rings
    return operator_matrix(kind, basis, j).real


def build_model(spec: ModelSpec, basis: Basis | None = None) -> SparseHamiltonian:
    """Dispatch on ``spec.variant``."""
    if spec.variant is Variant.PXP:
        basis = basis if basis is not None else enumerate_basis(spec.n_sites, spec.boundary)
        return build_pxp(basis)
    if spec.variant is Variant.RYDBERG:
        return build_rydberg(spec, basis)
    if spec.variant is Variant.SCHWINGER:
        return build_schwinger_spin(spec)
    return build_comparison_model(spec, basis)


def particle_hole_conjugation(basis: Basis) -> np.ndarray:
    """Diagonal of C = prod_j Z_j, i.e. (-1)^(number of excitations)."""
    return (-1.0) ** bit_matrix(basis.states, basis.n_sites).sum(axis=1)


# frequently used local operators, anchor at the central site where relevant
def named_operator(name: str) -> tuple[LocalOperator, float]:
    """Local operator and phase reference for a name like 'Z', 'PYP', 'PXP'.

    Operators written with an outer P are anchored at that P, so the
    reference points at the core site.
    """
    s = OperatorString.parse(name)
    core = s.core() or (0, len(s) - 1)
    return s.local(), 0.5 * (core[0] + core[1])
