from __future__ import annotations

import math
import threading

import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import const_poly, exp_poly
from pcfm import kernels as K
from pcfm.errors import Cancelled, ValidationError
from pcfm.oracle import (OracleSettings, SampledProfile, _filon_linear, inner_field_integral, k_sci_numeric,
                         k_xci_numeric, k_xci_numeric_1d)
from pcfm.spp import SppSamples, apply_lumped_loss, make_grid

L = 1e5
B2 = -2.127e-26
ALPHA = 0.2 * math.log(10) / 20 / 1e3


def _sampled(n=512, lumped=False):
    z = make_grid(L, n)
    spp = SppSamples(z, np.exp(-2 * ALPHA * z)[None, :])
    if lumped:
        spp = apply_lumped_loss(spp, 5e3, 2.0)
    return SampledProfile(spp.z, spp.p[0])


def test_filon_constant_and_zero_theta():
    prof = SampledProfile(make_grid(L, 64), np.ones(64))
    theta = np.array([1e-5, 2e-3, 0.5])
    exact = OracleSettings(inner_integrator="piecewise-linear-exact")
    np.testing.assert_allclose(inner_field_integral(prof, theta, exact), (np.exp(1j * theta * L) - 1) / (1j * theta),
                               rtol=1e-11)
    s = _sampled(128)
    assert inner_field_integral(s, np.zeros(1))[0].real == pytest.approx(trapezoid(s.p, s.z), rel=1e-14)


def test_filon_quadratic_convergence():
    theta = np.array([3e-4])
    exact = (np.exp((1j * theta - 2 * ALPHA) * L) - 1) / (1j * theta - 2 * ALPHA)
    errs = [abs(_filon_linear(_sampled(n).z, _sampled(n).p, theta)[0] - exact[0]) for n in (65, 129, 257)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_tabulated_matches_direct():
    prof = _sampled(512, lumped=True)
    theta = np.random.default_rng(0).uniform(-0.3, 0.3, 5000)
    direct = inner_field_integral(prof, theta, OracleSettings(inner_integrator="piecewise-linear-exact"))
    fast = inner_field_integral(prof, theta)
    assert np.max(np.abs(direct - fast)) < 1e-9 * abs(inner_field_integral(prof, np.zeros(1))[0])


def test_integrator_mismatch():
    with pytest.raises(ValidationError):
        inner_field_integral(const_poly(L), np.zeros(1), OracleSettings(inner_integrator="piecewise-linear-exact"))
    with pytest.raises(ValidationError):
        OracleSettings(rel_tol=0.0)


def test_sci_trivial_and_closed():
    p1 = const_poly(L)
    assert k_sci_numeric(p1, 0.0, 64e9, L).value == pytest.approx((64e9 * L) ** 2)
    kin = K.KernelInput(p1, L, B2, 64e9, 64e9)
    o = k_sci_numeric(p1, B2, 64e9, L, OracleSettings(rel_tol=1e-9))
    assert o.value == pytest.approx(K.k_sci_closed_np0(kin).value, rel=1e-8)
    assert k_sci_numeric(p1, -B2, 64e9, L).value == pytest.approx(o.value, rel=1e-7)


def test_sci_tolerance_halving_within_estimate():
    poly = exp_poly(L)
    a = k_sci_numeric(poly, B2, 64e9, L, OracleSettings(rel_tol=1e-6))
    b = k_sci_numeric(poly, B2, 64e9, L, OracleSettings(rel_tol=5e-7))
    assert abs(a.value - b.value) <= a.error + b.error


def test_xci_symmetry_and_1d_crosscheck():
    poly = exp_poly(L)
    s = OracleSettings(rel_tol=1e-8)
    a = k_xci_numeric(poly, B2, 300e9, 64e9, 64e9, L, s)
    b = k_xci_numeric(poly, B2, -300e9, 64e9, 64e9, L, s)
    assert a.value == pytest.approx(b.value, rel=1e-7)
    c = k_xci_numeric_1d(const_poly(L), B2, 300e9, 64e9, 64e9, L, s)
    d = k_xci_numeric(const_poly(L), B2, 300e9, 64e9, 64e9, L, s)
    assert c.value == pytest.approx(d.value, rel=1e-7)


def test_xci_limit_extension_error_follows_tail_estimate():
    """Finite f1 limits lose a tail ~(p0^2 + pL^2) / (2 pi^3 R_cut f |beta2| int p^2)."""
    poly = exp_poly(L)
    p = np.array([poly(0.0), poly(L)])
    energy = L * K.profile_energy_bracket(poly)
    for f in (150e9, 1e12):
        o = k_xci_numeric(poly, B2, f, 64e9, 64e9, L, OracleSettings(rel_tol=1e-8)).value
        c = K.k_xci_closed(K.KernelInput(poly, L, B2, 64e9, 64e9, f)).value
        tail = (p**2).sum() / (2 * math.pi**3 * 64e9 * f * abs(B2) * energy)
        assert c / o - 1 == pytest.approx(tail, rel=0.1)


def test_xci_zero_dispersion_and_overlap():
    p1 = const_poly(L)
    assert k_xci_numeric(p1, 0.0, 200e9, 64e9, 32e9, L).value == pytest.approx(64e9 * 32e9 * L**2)
    with pytest.raises(ValidationError):
        k_xci_numeric(p1, B2, 40e9, 64e9, 64e9, L)
    with pytest.raises(ValidationError):
        k_xci_numeric(_sampled(), B2, 200e9, 64e9, 64e9, 2 * L)


def test_cancellation():
    ev = threading.Event()
    ev.set()
    with pytest.raises(Cancelled):
        k_sci_numeric(exp_poly(L), B2, 64e9, L, OracleSettings(cancel=ev))


def test_sampled_vs_polynomial_on_lumped_profile():
    """A degree-9 fit stays within a few percent of the stepped profile's SCI kernel."""
    prof = _sampled(512, lumped=True)
    from pcfm.polyfit import fit_poly_spp

    poly = fit_poly_spp(prof.z, prof.p, 9)
    o = k_sci_numeric(prof, B2, 64e9, L, OracleSettings(rel_tol=1e-6)).value
    c = K.k_sci(K.KernelInput(poly, L, B2, 64e9, 64e9)).value
    assert abs(c / o - 1) < 0.05
