"""Momentum-resolved Liouvillian graph of the PXP model.

Operators on the blockaded chain are expanded in contiguous strings over
{P, Z, +, -} (``+`` raises, ``-`` lowers) that obey the blockade rules:
raising/lowering symbols only touch P or each other, Z only touches P,
every string starts and ends with P, and no string is made of P alone.  The
one-site string ``Z`` is the single exception.

Vertices are Hermitian, inversion-symmetric combinations of strings with
definite charges under particle-hole conjugation (PHS, the sign (-1)^{#sigma})
and time reversal (TRS, complex conjugation in the Z basis).  Their Gram
matrix and Liouvillian matrix elements are taken in the thermodynamic limit
with connected inner products, evaluated with the 2x2 transfer matrix of
the blockade constraint.  Gram-Schmidt runs within each equivalence class
(strings with the same pattern of raising/lowering symbols).

The generator is L[O] = i[H, O] with H = sum_j P X_j P, so that
dO/dt = L[O] and <Z(k), L Z(k)> couples Z only to PYP.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import InvalidArgumentError, NumericalError
from .spectral import SpectralGrid
from .trace import PHI, parse_symbols

_U = np.array([PHI, 1.0])
_UU = PHI**2 + 1.0
_RHO = -1.0 / PHI**2  # connected correlations shrink by this per free site
_ID = (1.0, 1.0)
_DIAG = {"P": (1.0, 0.0), "Z": (1.0, -1.0)}
_SIGMA_TRACE = {"+": (1.0, 0.0), "-": (0.0, 1.0)}  # (s^dag s) on a matched site
_ADJ = {"+": "P-", "-": "P+", "Z": "P", "P": "PZ+-"}
_FLIP = str.maketrans("+-", "-+")


# ---------------------------------------------------------------------------
# string enumeration


def _strings_of_length(n: int) -> list[str]:
    if n == 1:
        return ["Z"]
    out = []

    def rec(s):
        if len(s) == n:
            if s[-1] == "P" and s.count("P") != n:
                out.append(s)
            return
        last = s[-1]
        for c in "PZ+-":
            if c in _ADJ[last] and last in _ADJ[c]:
                rec(s + c)

    rec("P")
    return sorted(out)


def is_legal_string(s: str) -> bool:
    if s == "Z":
        return True
    if len(s) < 2 or s[0] != "P" or s[-1] != "P" or set(s) == {"P"}:
        return False
    return all(b in _ADJ[a] for a, b in zip(s, s[1:]))


def reduce_string(s: str) -> str:
    """Replace P and Z by I and strip edge identities."""
    return s.replace("P", "I").replace("Z", "I").strip("I")


def class_key(s: str) -> str:
    r = reduce_string(s)
    return min(r, r.translate(_FLIP), r[::-1], r[::-1].translate(_FLIP))


def _core(s: str):
    idx = [i for i, c in enumerate(s) if c != "P"]
    return idx[0], idx[-1]


def _sigma_pattern(s):
    pos = [i for i, c in enumerate(s) if c in ("+", "-")]
    if not pos:
        return None, None
    return tuple((i - pos[0], s[i]) for i in pos), pos[0]


@dataclass
class Vertex:
    label: str
    rep: str
    trs: int
    parity: int
    phs: int
    terms: dict  # raw string index -> coefficient
    length: int
    cls: str

    @property
    def component(self) -> str:
        return "plus" if self.phs * self.trs > 0 else "minus"


def _vertex_label(rep, trs, parity):
    n_sigma = sum(c in "+-" for c in rep)
    if n_sigma == 1:
        base = rep.replace("+", "X" if trs > 0 else "Y").replace("-", "X" if trs > 0 else "Y")
    elif n_sigma:
        base = f"{rep}{'+' if trs > 0 else '-'}h.c."
    else:
        base = rep
    if rep[::-1] not in (rep, rep.translate(_FLIP)):
        base += "(even)" if parity > 0 else "(odd)"
    return base


@dataclass
class OperatorBasisSet:
    """Legal strings up to ``max_len`` with their classes and symmetric vertices."""

    max_len: int
    strings: list
    classes: list
    vertices: list
    orthonormal: dict = field(default_factory=dict)  # k -> _Orth
    report: list = field(default_factory=list)

    def index(self, s: str) -> int:
        return self._index[s]

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.strings)}
        self._vindex = {v.label: a for a, v in enumerate(self.vertices)}

    def vertex_index(self, label: str) -> int:
        try:
            return self._vindex[label]
        except KeyError:
            raise InvalidArgumentError(f"no vertex labelled {label!r}") from None

    @property
    def n_vertices(self):
        return len(self.vertices)


def enumerate_operator_strings(max_len: int) -> OperatorBasisSet:
    """All legal strings of length <= max_len, ordered by length then text."""
    if max_len < 1:
        raise InvalidArgumentError("max_len must be >= 1")
    strings = [s for n in range(1, max_len + 1) for s in _strings_of_length(n)]
    index = {s: i for i, s in enumerate(strings)}
    vertices = []
    seen = set()
    for s in strings:
        if s in seen:
            continue
        orbit = {s, s.translate(_FLIP), s[::-1], s[::-1].translate(_FLIP)}
        seen |= orbit
        for trs in (1, -1):
            for parity in (1, -1):
                coeffs = {}
                for g, w in ((s, 1), (s.translate(_FLIP), trs), (s[::-1], parity),
                             (s[::-1].translate(_FLIP), trs * parity)):
                    coeffs[g] = coeffs.get(g, 0) + w
                coeffs = {g: c for g, c in coeffs.items() if c != 0}
                if not coeffs:
                    continue
                # TRS-odd combinations are i(s - s^dag); mirror-odd ones carry
                # an extra i so that all momentum-space matrix elements are real
                phase = (1j if trs < 0 else 1) * (1j if parity < 0 else 1)
                terms = {index[g]: phase * c for g, c in coeffs.items()}
                n_sigma = sum(c in "+-" for c in s)
                vertices.append(Vertex(_vertex_label(s, trs, parity), s, trs, parity,
                                       (-1) ** n_sigma, terms, len(s), class_key(s)))
    return OperatorBasisSet(max_len, strings, [class_key(s) for s in strings], vertices)


# ---------------------------------------------------------------------------
# transfer-matrix overlaps in the thermodynamic limit


def _chain_weight(D: np.ndarray) -> np.ndarray:
    """tr(prod_x diag(D[:, x]))/D on the infinite blockaded line, batched."""
    W = D.shape[1]
    r = _U * D[:, 0]
    for x in range(1, W):
        r = np.stack([r[:, 0] + r[:, 1], r[:, 0]], axis=1) * D[:, x]
    return (r @ _U) / (PHI ** (W - 1) * _UU)


def _mul(a, b):
    """Site product a.b of items (diag pairs or '+'/'-'); (factor, item) or None."""
    if type(a) is tuple:
        if type(b) is tuple:
            d = (a[0] * b[0], a[1] * b[1])
            return None if d == (0.0, 0.0) else (1.0, d)
        f = a[1] if b == "+" else a[0]
        return None if f == 0 else (f, b)
    if type(b) is tuple:
        f = b[0] if a == "+" else b[1]
        return None if f == 0 else (f, a)
    if a == b:
        return None
    return (1.0, (0.0, 1.0) if a == "+" else (1.0, 0.0))


def _items(s: str):
    return tuple(_DIAG.get(c, c) for c in s)


def _strip(start, items):
    lo, hi = 0, len(items)
    while lo < hi and items[lo] == _ID:
        lo += 1
    while hi > lo and items[hi - 1] == _ID:
        hi -= 1
    return start + lo, items[lo:hi]


def _product(sa, ia, sb, ib):
    lo = min(sa, sb)
    hi = max(sa + len(ia), sb + len(ib))
    coef = 1.0
    out = []
    for x in range(lo, hi):
        a = ia[x - sa] if sa <= x < sa + len(ia) else _ID
        b = ib[x - sb] if sb <= x < sb + len(ib) else _ID
        r = _mul(a, b)
        if r is None:
            return None
        coef *= r[0]
        out.append(r[1])
    return coef, lo, tuple(out)


def _hamiltonian_terms(m):
    return [(m - 1, ((1.0, 0.0), c, (1.0, 0.0))) for c in "+-"]


def liouvillian_terms(start, items):
    """i[H, O] for a single item string, as {(start, items): coef}."""
    out = {}
    L = len(items)
    for m in range(start - 1, start + L + 1):
        for hs, hi in _hamiltonian_terms(m):
            for sign, (sa, ia, sb, ib) in ((1j, (hs, hi, start, items)), (-1j, (start, items, hs, hi))):
                r = _product(sa, ia, sb, ib)
                if r is None:
                    continue
                c, lo, it = r
                key = _strip(lo, it)
                if not key[1]:
                    continue
                out[key] = out.get(key, 0) + sign * c
    return {k: v for k, v in out.items() if abs(v) > 1e-14}


class _Tables:
    """Real-space overlap profiles between raw strings.

    Entries are stored as (i, j, r, value) meaning a contribution
    value * e^{ikr} to <s_i(k), X s_j(k)> with X the identity (Gram) or the
    Liouvillian.  Diagonal pairs additionally carry geometric tails.
    """

    def __init__(self, strings, max_len):
        self.strings = strings
        self.n = len(strings)
        self.max_len = max_len
        self.pos = np.array([-0.5 * sum(_core(s)) for s in strings])
        pad = max_len + 2
        self.pad = pad
        self.W = 2 * pad + 1
        groups = {}
        diag = []
        for i, s in enumerate(strings):
            key, f = _sigma_pattern(s)
            if key is None:
                diag.append(i)
            else:
                groups.setdefault(key, []).append((i, f))
        self.groups = {}
        for key, members in groups.items():
            idx = np.array([i for i, _ in members])
            first = np.array([f for _, f in members])
            A = np.ones((len(members), self.W, 2))
            for row, (i, f) in enumerate(members):
                for x, c in enumerate(strings[i]):
                    if c in _DIAG:
                        A[row, pad + x - f] = _DIAG[c]
            self.groups[key] = (idx, first, A)
        self.diag = np.array(diag, dtype=int)
        self.diag_len = np.array([len(strings[i]) for i in diag], dtype=int)
        self.maxlen_diag = int(self.diag_len.max()) if len(diag) else 0
        self.Wd = self.maxlen_diag + 2 * pad
        Ad = np.ones((len(diag), self.Wd, 2))
        for row, i in enumerate(diag):
            for x, c in enumerate(strings[i]):
                Ad[row, pad + x] = _DIAG[c]
        self.Ad = Ad
        self.diag_mean = _chain_weight(Ad) if len(diag) else np.zeros(0)

    def _sigma_overlaps(self, start, items, coef):
        """Overlaps of every raw string with a placed off-diagonal term."""
        s = "".join(c if isinstance(c, str) else "d" for c in items)
        key, q = _sigma_pattern(s)
        grp = self.groups.get(key)
        if grp is None:
            return None
        idx, first, A = grp
        t = np.ones((self.W, 2))
        off = self.pad - q
        for x, c in enumerate(items):
            t[off + x] = _SIGMA_TRACE[c] if isinstance(c, str) else c
        w = _chain_weight(A * t)
        # the term's first sigma at start + q must sit on the string's first
        # sigma, so the string is shifted by delta = first - (start + q)
        delta = first - (start + q)
        return idx, delta, coef * w

    def _diag_overlaps(self, start, items, coef):
        """Connected overlaps of diagonal strings with a diagonal term at all shifts."""
        lt = len(items)
        pad = self.pad
        t_arr = np.array(items)
        mean_t = _chain_weight(t_arr[None])[0]
        deltas = np.arange(-lt, self.maxlen_diag + 1)
        nd = len(self.diag)
        D = np.repeat(self.Ad[None], len(deltas), axis=0)  # (n_delta, n_diag, Wd, 2)
        for a, d in enumerate(deltas):
            D[a, :, pad + d: pad + d + lt] *= t_arr
        w = _chain_weight(D.reshape(-1, self.Wd, 2)).reshape(len(deltas), nd)
        w = w - self.diag_mean[None, :] * mean_t
        # the term sits at start + delta relative to each string at 0, so the
        # string-relative shift of the term's anchor is delta - start
        return deltas, coef * w

    def build(self, which: str):
        rows, cols, rr, vals = [], [], [], []
        trows, tcols, tr_, tvals, tside = [], [], [], [], []
        for j, s in enumerate(self.strings):
            if which == "gram":
                terms = {(0, _items(s)): 1.0}
            else:
                terms = liouvillian_terms(0, _items(s))
            for (start, items), c in terms.items():
                if any(isinstance(x, str) for x in items):
                    res = self._sigma_overlaps(start, items, c)
                    if res is None:
                        continue
                    idx, delta, w = res
                    r = delta + self.pos[idx] - self.pos[j]
                    rows.append(idx)
                    cols.append(np.full(len(idx), j))
                    rr.append(r)
                    vals.append(w)
                elif len(self.diag):
                    deltas, w = self._diag_overlaps(start, items, c)
                    nd = len(self.diag)
                    # term placed at start + shift; the string s_j then sits at shift
                    shifts = deltas - start
                    r = shifts[:, None] + self.pos[self.diag][None, :] - self.pos[j]
                    rows.append(np.tile(self.diag, len(deltas)))
                    cols.append(np.full(len(deltas) * nd, j))
                    rr.append(r.ravel())
                    vals.append(w.ravel())
                    trows += [self.diag, self.diag]
                    tcols += [np.full(nd, j)] * 2
                    tr_ += [r[0], r[-1]]
                    tvals += [w[0], w[-1]]
                    tside += [np.full(nd, -1), np.full(nd, 1)]
        cat = lambda x, dt=float: np.concatenate(x).astype(dt) if x else np.zeros(0, dtype=dt)
        main = (cat(rows, int), cat(cols, int), cat(rr), cat(vals, complex))
        tails = (cat(trows, int), cat(tcols, int), cat(tr_), cat(tvals, complex), cat(tside, int))
        keep = np.abs(main[3]) > 1e-15
        main = tuple(a[keep] for a in main)
        return main, tails

    def matrix(self, table, k: float) -> sp.csr_matrix:
        (rows, cols, r, v), (tr, tc, trr, tv, side) = table
        data = v * np.exp(1j * k * r)
        if len(tr):
            z = _RHO * np.exp(1j * k * side)
            data_t = tv * np.exp(1j * k * trr) * z / (1 - z)
            rows = np.concatenate([rows, tr])
            cols = np.concatenate([cols, tc])
            data = np.concatenate([data, data_t])
        M = sp.coo_matrix((data, (rows, cols)), shape=(self.n, self.n)).tocsr()
        M.sum_duplicates()
        return M


@lru_cache(maxsize=4)
def _tables(max_len: int):
    basis = enumerate_operator_strings(max_len)
    t = _Tables(basis.strings, max_len)
    return basis, t, t.build("gram"), t.build("liouville")


def operator_basis(max_len: int) -> OperatorBasisSet:
    """Cached basis set (strings, classes, vertices) for ``max_len``."""
    return _tables(max_len)[0]


def _vertex_map(basis: OperatorBasisSet) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for a, v in enumerate(basis.vertices):
        for i, c in v.terms.items():
            rows.append(i)
            cols.append(a)
            vals.append(c)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(basis.strings), len(basis.vertices)))


# ---------------------------------------------------------------------------
# orthonormalisation


@dataclass
class OrthonormalBasis:
    k: float
    max_len: int
    R: np.ndarray  # vertices x orthonormal operators
    pivots: list  # vertex index defining each orthonormal operator
    dropped: list
    gram: np.ndarray  # vertex Gram matrix G(k)

    def labels(self, basis: OperatorBasisSet):
        return [basis.vertices[a].label for a in self.pivots]


def _gram_schmidt(G, order, tol, scale=0.0):
    """Column-wise Gram-Schmidt in the metric G; returns (R, kept, dropped).

    A residual is dropped below ``tol`` times the larger of its own norm and
    ``scale``, so vectors that are numerically zero never get normalised.
    """
    n = G.shape[0]
    R = np.zeros((n, 0), dtype=G.dtype)
    kept, dropped = [], []
    for v in order:
        e = np.zeros(n, dtype=G.dtype)
        e[v] = 1.0
        norm0 = G[v, v].real
        for _ in range(2):
            proj = R.conj().T @ (G @ e)
            e = e - R @ proj
        nrm2 = (e.conj() @ G @ e).real
        if norm0 <= 0 or nrm2 < tol * max(norm0, scale, 1e-300):
            dropped.append(v)
            continue
        R = np.column_stack([R, e / math.sqrt(nrm2)])
        kept.append(v)
    return R, kept, dropped


def orthonormalize(basis: OperatorBasisSet, k: float, tol: float = 1e-10) -> OrthonormalBasis:
    """Gram-Schmidt within each equivalence class at momentum k.

    Strings are processed by length, ties broken by their text; a string
    whose residual norm falls below ``tol`` relative to its own norm (or to
    the largest vertex norm, for vertices that vanish at this k) is dropped
    and listed in ``dropped``.
    """
    key = (round(float(k), 14), tol)
    if key in basis.orthonormal:
        return basis.orthonormal[key]
    _, tables, gram_t, _ = _tables(basis.max_len)
    C = _vertex_map(basis)
    G = (C.conj().T @ tables.matrix(gram_t, k) @ C).toarray()
    nv = len(basis.vertices)
    order_all = sorted(range(nv), key=lambda a: (basis.vertices[a].length, basis.vertices[a].rep,
                                                  -basis.vertices[a].trs, -basis.vertices[a].parity))
    scale = float(np.abs(np.diag(G)).max(initial=0.0))
    by_class = {}
    for a in order_all:
        by_class.setdefault(basis.vertices[a].cls, []).append(a)
    R = np.zeros((nv, nv), dtype=complex)
    pivots, dropped = [], []
    col = 0
    blocks = []
    for cls, members in by_class.items():
        sub = G[np.ix_(members, members)]
        Rc, kept, drop = _gram_schmidt(sub, range(len(members)), tol, scale)
        blocks.append((members, Rc, [members[x] for x in kept]))
        dropped += [members[x] for x in drop]
    # orthonormal operators ordered like their pivots
    rank = {a: n for n, a in enumerate(order_all)}
    pivot_order = sorted(((piv, members, Rc, c) for members, Rc, pivs in blocks
                          for c, piv in enumerate(pivs)), key=lambda t: rank[t[0]])
    for piv, members, Rc, c in pivot_order:
        R[members, col] = Rc[:, c]
        pivots.append(piv)
        col += 1
    R = R[:, :col]
    if dropped:
        basis.report.append({"k": float(k), "dropped": [basis.vertices[a].label for a in dropped]})
    ob = OrthonormalBasis(float(k), basis.max_len, R, pivots, dropped, G)
    basis.orthonormal[key] = ob
    return ob


# ---------------------------------------------------------------------------
# graphs


@dataclass
class LiouvillianGraph:
    k: float
    component: str
    matrix: np.ndarray
    vertex_labels: list
    pivots: list
    trs: np.ndarray
    boundary: np.ndarray  # bool, True where edges were cut by the truncation
    max_len: int

    def edges(self, tol=1e-12):
        a, b = np.nonzero(np.triu(np.abs(self.matrix) > tol))
        return [(int(i), int(j), float(self.matrix[i, j])) for i, j in zip(a, b)]

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "component": self.component,
                           "vertices": self.vertex_labels,
                           "edges": [[i, j, w] for i, j, w in self.edges()]})


def liouvillian_matrix(basis: OperatorBasisSet, k: float, tol: float = 1e-10):
    """Full L^(orth)(k) over all orthonormal operators, plus the basis."""
    ob = orthonormalize(basis, k, tol)
    _, tables, _, liou_t = _tables(basis.max_len)
    C = _vertex_map(basis)
    Lv = (C.conj().T @ tables.matrix(liou_t, k) @ C).toarray()
    Lo = ob.R.conj().T @ Lv @ ob.R
    return Lo, ob


def build_liouvillian(basis: OperatorBasisSet, k: float, component: str | None = None,
                      tol: float = 1e-10, check: bool = True):
    """Liouvillian graph(s) at momentum k.

    Returns a dict {'plus': graph, 'minus': graph} or a single graph when
    ``component`` is given.  With ``check`` the matrix is verified to be
    real antisymmetric and free of cross-component edges (NumericalError
    otherwise).
    """
    Lo, ob = liouvillian_matrix(basis, k, tol)
    comp = np.array([basis.vertices[a].component for a in ob.pivots])
    trs = np.array([basis.vertices[a].trs for a in ob.pivots])
    lens = np.array([basis.vertices[a].length for a in ob.pivots])
    scale = max(1.0, np.abs(Lo).max())
    if check:
        err_imag = np.abs(Lo.imag).max()
        err_anti = np.abs(Lo + Lo.T).max()
        cross = np.abs(Lo[np.ix_(comp == "plus", comp == "minus")]).max(initial=0.0)
        same_trs = np.abs(Lo[np.equal.outer(trs, trs)]).max(initial=0.0)
        worst = max(err_imag, err_anti, cross, same_trs)
        if worst > 1e-9 * scale:
            raise NumericalError("Liouvillian is not real antisymmetric and bipartite", residual=worst)
    Lr = Lo.real
    boundary = lens >= basis.max_len - 1
    out = {}
    for name in ("plus", "minus"):
        sel = np.flatnonzero(comp == name)
        out[name] = LiouvillianGraph(float(k), name, Lr[np.ix_(sel, sel)],
                                     [basis.vertices[ob.pivots[a]].label for a in sel],
                                     [ob.pivots[a] for a in sel], trs[sel], boundary[sel],
                                     basis.max_len)
    return out[component] if component else out


# ---------------------------------------------------------------------------
# operator-size truncation


@dataclass
class OSTSpec:
    max_operator_size: int = 9
    gamma: float = 3.0
    probe: str = "Z"
    damping: str = "boundary"  # or 'outer': only strings of the maximal size

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidArgumentError("gamma must be >= 0")
        if self.max_operator_size < len(parse_symbols(self.probe)):
            raise InvalidArgumentError("max_operator_size is shorter than the probe")
        if self.damping not in ("boundary", "outer"):
            raise InvalidArgumentError("damping must be 'boundary' or 'outer'")


def _probe_raw(basis: OperatorBasisSet, probe: str) -> np.ndarray:
    """Raw-string coefficients of a probe written over {P, Z, X, Y, +, -}."""
    syms = parse_symbols(probe)
    expanded = {"": 1.0}
    for c in syms:
        opts = {"X": {"+": 1.0, "-": 1.0}, "Y": {"+": 1j, "-": -1j}}.get(c, {c: 1.0})
        expanded = {p + u: w * cu for p, w in expanded.items() for u, cu in opts.items()}
    vec = np.zeros(len(basis.strings), dtype=complex)
    center = 0.5 * sum(_core("".join(syms).replace("X", "+").replace("Y", "+")))
    for s, c in expanded.items():
        if s not in basis._index:
            raise InvalidArgumentError(f"probe {probe!r} is not expressible in the operator basis ({s})")
        if abs(0.5 * sum(_core(s)) - center) > 1e-12:
            raise InvalidArgumentError(f"probe {probe!r} mixes strings with different centers")
        vec[basis._index[s]] += c
    return vec


def probe_vector(basis: OperatorBasisSet, probe: str, k: float, tol=1e-10):
    """Components <O^(k), probe(k)> and the probe norm squared."""
    ob = orthonormalize(basis, k, tol)
    _, tables, gram_t, _ = _tables(basis.max_len)
    pi = _probe_raw(basis, probe)
    G = tables.matrix(gram_t, k)
    C = _vertex_map(basis)
    v = ob.R.conj().T @ (C.conj().T @ (G @ pi))
    return v, float((pi.conj() @ (G @ pi)).real), ob


def truncated_generator(spec: OSTSpec, k: float):
    """Damped Liouvillian of the probe's component and the probe vector in it."""
    basis = operator_basis(spec.max_operator_size)
    graphs = build_liouvillian(basis, k)
    v, norm2, ob = probe_vector(basis, spec.probe, k)
    comps = np.array([basis.vertices[a].component for a in ob.pivots])
    weights = {c: np.sum(np.abs(v[comps == c]) ** 2) for c in ("plus", "minus")}
    comp = max(weights, key=weights.get)
    if weights[comp] < (1 - 1e-8) * norm2:
        raise InvalidArgumentError("probe mixes both symmetry components")
    g = graphs[comp]
    vv = v[comps == comp]
    if spec.damping == "boundary":
        damp = g.boundary
    else:
        damp = np.array([basis.vertices[a].length == spec.max_operator_size for a in g.pivots])
    Leff = g.matrix - 0.5 * spec.gamma * np.diag(damp.astype(float))
    return Leff, vv, norm2, g


def ost_spectral_function(spec: OSTSpec, k_list, omega) -> SpectralGrid:
    """S(k, w) = (1/pi) Re <v, (-iw - L_eff)^{-1} v> for each k."""
    omega = np.asarray(omega, dtype=float)
    k_list = np.atleast_1d(np.asarray(k_list, dtype=float))
    out = np.zeros((len(k_list), len(omega)))
    norms = []
    for a, k in enumerate(k_list):
        Leff, v, norm2, g = truncated_generator(spec, k)
        lam, V = la.eig(Leff)
        left = v.conj() @ V
        right = la.solve(V, v.astype(complex))
        res = left * right
        out[a] = (res[None, :] / (-1j * omega[:, None] - lam[None, :])).sum(axis=1).real / math.pi
        norms.append(norm2)
    return SpectralGrid(k_list, omega, out, "ost", None, None,
                        {"probe": spec.probe, "gamma": spec.gamma,
                         "max_operator_size": spec.max_operator_size, "norm2": norms,
                         "damping": spec.damping})


def generator_eigenvalues(spec: OSTSpec, k: float) -> np.ndarray:
    Leff, _, _, _ = truncated_generator(spec, k)
    return la.eigvals(Leff)


# ---------------------------------------------------------------------------
# mean-field dispersions


def alpha(k):
    """alpha(k) = sqrt(5)(3 + 2 cos k) / (2 (1 + phi^2))."""
    return math.sqrt(5) * (3 + 2 * np.cos(k)) / (2 * (1 + PHI**2))


def mean_field_dispersion(variant: str, k):
    """Mean-field mode frequencies, shape (n_modes, len(k)).

    A: the {PZP, PYP} pair, +-2 sqrt(1 + cos k / phi).
    B: adds P(+- + -+)P, giving 0 and +-sqrt(2 (2 + p + 3 p cos k)).
    C: the {Z, PYP} pair, +-2 sqrt(alpha(k)).
    D: energy sector, +-2 sin(k/2) sqrt(p).
    Here p = <P>' = 1/phi is the conditional probability that a site next to
    an unexcited site is unexcited.
    """
    k = np.asarray(k, dtype=float)
    p = 1.0 / PHI
    v = variant.upper()
    if v == "A":
        w = 2 * np.sqrt(1 + np.cos(k) / PHI)
        return np.stack([-w, w])
    if v == "B":
        w = np.sqrt(2 * (2 + p + 3 * p * np.cos(k)))
        return np.stack([-w, np.zeros_like(k), w])
    if v == "C":
        w = 2 * np.sqrt(alpha(k))
        return np.stack([-w, w])
    if v == "D":
        w = 2 * np.abs(np.sin(k / 2)) * math.sqrt(p)
        return np.stack([-w, w])
    raise InvalidArgumentError(f"unknown mean-field variant {variant!r}")


def field_band(q, variant: str = "A"):
    """Positive mean-field branch for the field mode E(q) = Z(k = q + pi)."""
    return mean_field_dispersion(variant, np.asarray(q, dtype=float) + math.pi)[-1]


def mean_group_velocity(variant: str = "A", n: int = 4001) -> float:
    """(1/pi) int_0^pi d omega_0/dq dq = (omega_0(pi) - omega_0(0))/pi in magnitude."""
    w = mean_field_dispersion(variant, np.array([0.0, math.pi]))[-1]
    return abs(w[1] - w[0]) / math.pi
