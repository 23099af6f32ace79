from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from conftest import const_poly, exp_poly
from pcfm import kernels as K
from pcfm.errors import SingularDispersionError, ValidationError
from pcfm.polyfit import PolySpp

L = 1e5
B2 = -2.127e-26


def _kin(poly, beta2=B2, R=64e9, f=0.0, R_cut=None):
    return K.KernelInput(poly, poly.length, beta2, R, R if R_cut is None else R_cut, f)


def test_unit_moments_against_closed_form():
    s = np.array([0.0, 1e-6, 0.3, 3.99, 4.01, 20.0, 500.0])
    e = K.unit_moments(s, 3)
    for si, row in zip(s, e):
        for n in range(4):
            re = np.polynomial.legendre.leggauss(60)
            x = 0.5 * (re[0] + 1)
            ref = 0.5 * np.sum(re[1] * x**n * np.exp(1j * si * x)) if si < 50 else None
            if ref is not None:
                assert abs(row[n] - ref) < 1e-13


def test_field_integral_constant_profile():
    theta = np.array([1e-4, 3e-3])
    E = K.field_integral(const_poly(L), theta)
    np.testing.assert_allclose(E, (np.exp(1j * theta * L) - 1) / (1j * theta), rtol=1e-13)
    assert K.field_integral(const_poly(L), np.array([0.0]))[0] == pytest.approx(L)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=10))
@settings(max_examples=60, deadline=None)
def test_energy_bracket_is_mean_square(c):
    c = np.array(c)
    poly = PolySpp.from_scaled(c, L)
    sq = P.polyint(P.polymul(c, c))
    exact = P.polyval(1.0, sq)
    assert K.profile_energy_bracket(poly) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_xci_closed_known_value():
    val = K.k_xci_closed(_kin(const_poly(L), f=150e9)).value
    assert val == pytest.approx(L / (2 * math.pi * abs(B2)) * math.log(182e9 / 118e9), rel=1e-14)


def test_xci_closed_errors_and_guard():
    with pytest.raises(SingularDispersionError):
        K.k_xci_closed(_kin(const_poly(L), beta2=0.0, f=150e9))
    with pytest.raises(ValidationError):
        K.k_xci_closed(_kin(const_poly(L), f=30e9))
    with pytest.warns(K.GuardWarning):
        K.k_xci_closed(_kin(const_poly(L), beta2=-1e-27, R=32e9, f=100e9))
    assert K.guard_xci(-21.27e-27, 64e9)[0]
    assert not K.guard_xci(-3e-27, 31.6e9)[0]
    assert K.guard_xci(-3e-27, 32e9)[1] == pytest.approx(3 * 1024 / 3e3)


def test_xci_matrix_matches_scalar():
    polys = [exp_poly(L, 0.2), exp_poly(L, 0.18), exp_poly(L, 0.22)]
    C = np.array([p.scaled() for p in polys])
    f = np.array([0.0, 100e9, 250e9])
    R = np.array([64e9, 32e9, 64e9])
    f_rel = f[None, :] - f[:, None]
    beta = np.full((3, 3), B2)
    M = K.k_xci_closed_matrix(C, L, beta, f_rel, R)
    for i in range(3):
        for j in range(3):
            if i == j:
                assert M[i, j] == 0
                continue
            ref = K.k_xci_closed(K.KernelInput(polys[j], L, B2, R[j], R[i], f_rel[i, j])).value
            assert M[i, j] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("beta2", [B2, -B2, -2e-27, -3e-26])
@pytest.mark.parametrize("R", [32e9, 128e9])
@pytest.mark.parametrize("Lk", [1e3, 1e5])
def test_semianalytic_matches_printed(beta2, R, Lk):
    for poly in (const_poly(Lk), PolySpp(np.array([1.0, -0.9 / Lk]), Lk)):
        kin = K.KernelInput(poly, Lk, beta2, R, R)
        ref = K.k_sci_closed_np0(kin) if poly.degree == 0 else K.k_sci_closed_np1(kin)
        got = K.k_sci_semianalytic(kin)
        assert got.value == pytest.approx(ref.value, rel=1e-10)


def test_sci_sign_symmetry_and_zero_dispersion():
    poly = exp_poly(L, 0.2, 5)
    a = K.k_sci(_kin(poly, B2)).value
    b = K.k_sci(_kin(poly, -B2)).value
    assert a == pytest.approx(b, rel=1e-14)
    z = K.k_sci(_kin(poly, 0.0)).value
    integral = L * np.sum(poly.scaled() / np.arange(1, 7))
    assert z == pytest.approx((64e9) ** 2 * integral**2, rel=1e-14)


def test_sci_closed_small_x_falls_back():
    poly = const_poly(1e3)
    kin = K.KernelInput(poly, 1e3, -1e-33, 32e9, 32e9)
    assert K.k_sci_closed_np0(kin).value == pytest.approx((32e9 * 1e3) ** 2, rel=1e-6)


def test_sci_dispatch():
    with pytest.raises(ValidationError):
        K.k_sci(_kin(exp_poly(L, 0.2, 3)), "closed")
    with pytest.raises(ValidationError):
        K.k_sci_closed_np0(_kin(exp_poly(L, 0.2, 1)))
    p1 = PolySpp(np.array([1.0, -0.9 / L]), L)
    assert K.k_sci(_kin(p1), "semianalytic").value == pytest.approx(K.k_sci(_kin(p1)).value, rel=1e-10)


def test_batch_matches_scalar():
    polys = [exp_poly(L, 0.2, d) for d in (2, 5, 9)]
    deg = 9
    C = np.zeros((3, deg + 1))
    for i, p in enumerate(polys):
        C[i, : p.degree + 1] = p.scaled()
    beta = np.array([B2, 0.0, -5e-27])
    R = np.array([64e9, 32e9, 128e9])
    vals, errs = K.k_sci_semianalytic_batch(C, L, beta, R)
    for i, p in enumerate(polys):
        assert vals[i] == pytest.approx(K.k_sci(K.KernelInput(p, L, beta[i], R[i], R[i])).value, rel=1e-14)
    assert np.all(errs <= 1e-10 * vals)


def test_sci_monotone_in_dispersion():
    poly = exp_poly(L, 0.2, 5)
    vals = [K.k_sci(_kin(poly, -b)).value for b in (1e-27, 5e-27, 2e-26, 5e-26)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
