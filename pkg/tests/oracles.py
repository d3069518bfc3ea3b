"""Brute-force reference implementations used as test oracles.

Everything here works on the full 2^N tensor-product space with dense
matrices built from Kronecker products, independent of the library code.
Site j is bit j of the configuration integer.
"""
from functools import reduce

import numpy as np

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
P = np.diag([1.0, 0.0]).astype(complex)  # projector on the ground state |0>
N_ = np.diag([0.0, 1.0]).astype(complex)  # excitation number
SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
SM = SP.T.copy()

LOCAL = {"I": I2, "X": X, "Y": Y, "Z": Z, "P": P, "n": N_, "+": SP, "-": SM}


def brute_basis(n, periodic):
    out = []
    for c in range(2**n):
        ok = not (c & (c >> 1))
        if periodic and n > 1 and (c & 1) and (c >> (n - 1)) & 1:
            ok = False
        if periodic and n == 1 and c & 1:
            ok = False
        out.append(c) if ok else None
    return out


def site_op(ops: dict, n):
    """Kronecker product with ``ops[j]`` on site j (site 0 is the least significant bit)."""
    mats = [ops.get(j, I2) for j in reversed(range(n))]
    return reduce(np.kron, mats)


def string_op(symbols, start, n, periodic=True):
    ops = {}
    for i, s in enumerate(symbols):
        j = start + i
        if periodic:
            j %= n
        elif not 0 <= j < n:
            return None
        ops[j] = LOCAL[s]
    return site_op(ops, n)


def full_pxp(n, periodic):
    H = np.zeros((2**n, 2**n), dtype=complex)
    for j in range(n):
        ops = {j: X}
        if periodic or j > 0:
            ops[(j - 1) % n] = P
        if periodic or j < n - 1:
            ops[(j + 1) % n] = P
        H += site_op(ops, n)
    return H


def restrict(M, configs):
    idx = np.asarray(configs)
    return M[np.ix_(idx, idx)]


def dense_pxp(n, periodic):
    return restrict(full_pxp(n, periodic), brute_basis(n, periodic)).real


def embed(vec, configs, n):
    out = np.zeros(2**n, dtype=complex)
    out[np.asarray(configs)] = vec
    return out


def partial_trace_keep(psi_full, n, keep):
    """Reduced density matrix of sites ``keep`` (ordered, first listed = least significant)."""
    T = psi_full.reshape([2] * n)  # axis a <-> site n-1-a
    axes_keep = [n - 1 - s for s in keep]
    axes_rest = [a for a in range(n) if a not in axes_keep]
    T = np.transpose(T, axes_rest + axes_keep[::-1])
    M = T.reshape(2 ** len(axes_rest), 2 ** len(keep))
    return M.T @ M.conj()


def vn_entropy(rho):
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-14]
    return float(-(w * np.log(w)).sum())


def sparse_string_op(symbols, start, configs, n):
    """Sparse matrix of a string acting on sites start, start+1, ... (mod n), restricted to ``configs``."""
    import scipy.sparse as sp

    cfg = np.asarray(configs, dtype=np.int64)
    pos = {int(c): i for i, c in enumerate(cfg)}
    state = cfg.copy()
    amp = np.ones(len(cfg), dtype=complex)
    for off in reversed(range(len(symbols))):
        s = symbols[off]
        bit = 1 << ((start + off) % n)
        occ = (state & bit) != 0
        if s == "P":
            amp[occ] = 0
        elif s == "n":
            amp[~occ] = 0
        elif s == "Z":
            amp[occ] *= -1
        elif s == "+":
            amp[occ] = 0
            state = state ^ bit
        elif s == "-":
            amp[~occ] = 0
            state = state ^ bit
        elif s == "X":
            state = state ^ bit
        elif s == "Y":
            amp *= np.where(occ, -1j, 1j)
            state = state ^ bit
    rows, cols, vals = [], [], []
    for c, (st_, a) in enumerate(zip(state, amp)):
        r = pos.get(int(st_))
        if a != 0 and r is not None:
            rows.append(r)
            cols.append(c)
            vals.append(a)
    D = len(cfg)
    return sp.csr_matrix((vals, (rows, cols)), shape=(D, D))


def sparse_momentum(symbols, k, ref, configs, n):
    total = None
    for j in range(n):
        M = np.exp(1j * k * (j + ref)) * sparse_string_op(symbols, j, configs, n)
        total = M if total is None else total + M
    return total / np.sqrt(n)


def hs(A, B):
    """tr(A^dag B)/D for sparse matrices."""
    return complex(A.conj().multiply(B).sum()) / A.shape[0]
