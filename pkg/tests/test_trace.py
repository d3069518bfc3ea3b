import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_basis, restrict, string_op
from rydlink.errors import InvalidArgumentError
from rydlink.trace import (PHI, MomentumOperator, conditioned_expectation, expectation, inf_temp_connected,
                           inner_product, string_trace)

SYMS = "PZI+-n"


def brute_trace(symbols, n, periodic, start=0):
    cfg = brute_basis(n, periodic)
    M = string_op(symbols, start, n, periodic)
    return np.trace(restrict(M, cfg)) / len(cfg)


def brute_momentum(text, k, ref, n):
    M = sum(cmath.exp(1j * k * (j + ref)) * string_op(text, j, n) for j in range(n)) / math.sqrt(n)
    return restrict(M, brute_basis(n, True))


def test_z_expectation_tdl():
    assert expectation("Z").real == pytest.approx((PHI**2 - 1) / (PHI**2 + 1), rel=1e-12)
    assert expectation("Z").real == pytest.approx(0.4472, abs=1e-4)
    assert expectation("P").real == pytest.approx(0.7236, abs=1e-4)


def test_raising_trace_vanishes():
    for n in (4, 7, 12, None):
        assert string_trace("+", n) == 0
        assert string_trace("P+P", n) == 0


def test_pp_trace_n6():
    v = string_trace("PP", 6, "PBC")
    assert isinstance(v, Fraction)
    cfg = brute_basis(6, True)
    count = sum(1 for c in cfg if not (c & 1) and not (c & 2))
    assert v == Fraction(count, len(cfg)) == Fraction(len(brute_basis(4, False)), len(cfg))


@given(st.text(alphabet=SYMS, min_size=1, max_size=6), st.integers(6, 12), st.booleans())
@settings(max_examples=80, deadline=None)
def test_string_trace_matches_brute_force(s, n, periodic):
    bc = "PBC" if periodic else "OBC"
    exact = string_trace(s, n, bc)
    ref = brute_trace(s, n, periodic)
    assert abs(complex(exact) - ref) < 1e-12


def test_string_trace_rejects_long():
    with pytest.raises(InvalidArgumentError):
        string_trace("PZPZP", 4)


def test_inner_product_table():
    k = 0.7
    pyp = MomentumOperator.from_string("PYP", k)
    assert inner_product(pyp, pyp).real == pytest.approx(2 / (1 + PHI**2), rel=1e-12)
    a = MomentumOperator.from_string("PPYP", k, "site")
    a.ref = 2.0
    b = MomentumOperator.from_string("PYPP", k, "site")
    assert inner_product(a, b).real == pytest.approx((2 / PHI**2) / (1 + PHI**2), rel=1e-12)
    assert abs(inner_product(MomentumOperator.from_string("PXP", k), pyp)) < 1e-15


@pytest.mark.parametrize("k", [0.4, 1.3, math.pi])
def test_z_fourier_norm(k):
    z = MomentumOperator.from_string("Z", k)
    assert inner_product(z, z).real == pytest.approx(4 / (math.sqrt(5) * (3 + 2 * math.cos(k))), rel=1e-12)


@pytest.mark.parametrize("a,b", [("Z", "Z"), ("PYP", "PYP"), ("Z", "PZP"), ("PXP", "P+-P"), ("PYPP", "PPYP")])
@pytest.mark.parametrize("j", [1, 3])
def test_finite_n_inner_product_matches_dense(a, b, j):
    n = 8
    k = 2 * math.pi * j / n
    A = MomentumOperator.from_string(a, k)
    B = MomentumOperator.from_string(b, k)
    Ma = brute_momentum(a, k, A.ref, n)
    Mb = brute_momentum(b, k, B.ref, n)
    ref = np.trace(Ma.conj().T @ Mb) / Ma.shape[0]
    assert abs(inner_product(A, B, n_sites=n) - ref) < 1e-12


def test_unequal_momenta_vanish():
    a = MomentumOperator.from_string("Z", 2 * math.pi / 8)
    b = MomentumOperator.from_string("Z", 4 * math.pi / 8)
    assert inner_product(a, b, n_sites=8) == 0
    assert inner_product(a, b) == 0


@given(st.sampled_from(["Z", "PZP", "PYP", "PXP", "P+-P", "PYPP", "PZPP"]),
       st.sampled_from(["Z", "PZP", "PYP", "PXP", "P-+P", "PPYP", "PZZP"]),
       st.floats(0, 2 * math.pi))
@settings(max_examples=40, deadline=None)
def test_inner_product_hermitian_symmetry(a, b, k):
    A = MomentumOperator.from_string(a, k)
    B = MomentumOperator.from_string(b, k)
    assert abs(inner_product(A, B) - inner_product(B, A).conjugate()) < 1e-12


@pytest.mark.parametrize("d", range(1, 9))
def test_connected_zz(d):
    tdl = inf_temp_connected("Z", "Z", d)
    assert tdl == pytest.approx(0.8 * (-1 / PHI**2) ** d, rel=1e-12)
    assert inf_temp_connected("Z", "Z", d, staggered=True) == pytest.approx(0.8 * PHI ** (-2 * d), rel=1e-12)
    n40 = float(inf_temp_connected("Z", "Z", d, 40))
    assert n40 == pytest.approx(0.8 * (-1 / PHI**2) ** d, rel=1e-10)


def test_connected_finite_matches_brute_force():
    n = 10
    cfg = brute_basis(n, True)
    for d in range(1, 5):
        zz = np.trace(restrict(string_op("Z" + "I" * (d - 1) + "Z", 0, n), cfg)).real / len(cfg)
        z = np.trace(restrict(string_op("Z", 0, n), cfg)).real / len(cfg)
        assert float(inf_temp_connected("Z", "Z", d, n)) == pytest.approx(zz - z * z, abs=1e-14)


def test_connected_vanishes_far_away():
    assert abs(inf_temp_connected("Z", "Z", 60)) < 1e-14


def test_conditioned_expectation():
    assert conditioned_expectation() == pytest.approx(1 / PHI)
    n = 5
    cfg = brute_basis(n, True)
    cond = [c for c in cfg if not (c >> 1) & 1]
    assert conditioned_expectation(n) == Fraction(sum(1 for c in cond if not c & 1), len(cond))
