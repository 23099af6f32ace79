from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from pcfm.errors import FormatError, ValidationError
from pcfm.spp import (AnalyticAlphaParams, Pump, SppSamples, apply_lumped_loss, emit_spp, load_external_spp,
                      make_grid, solve_raman_powers, spp_analytic_isrs, spp_flat_loss, spp_raman_ode)

L = 100e3
ALPHA = 0.2 * math.log(10) / 20 / 1e3
CR = 0.028 / 1e3 / 1e12


def test_flat_loss_values():
    grid = make_grid(L, 512)
    assert np.all(spp_flat_loss(0.0, grid) == 1.0)
    p = spp_flat_loss(ALPHA, grid)
    assert p[0] == 1.0
    assert p[-1] == pytest.approx(0.01, rel=1e-12)
    assert np.all(np.diff(p) < 0)


def test_analytic_isrs_reduces_to_flat():
    grid = make_grid(L, 512)
    np.testing.assert_allclose(spp_analytic_isrs(AnalyticAlphaParams(ALPHA), grid), spp_flat_loss(ALPHA, grid),
                               rtol=1e-15)


@given(st.floats(1e-6, 1e-4), st.floats(-2e-5, 2e-5), st.floats(1e-6, 1e-3))
@settings(max_examples=30, deadline=None)
def test_analytic_isrs_matches_quadrature(a0, a1, sigma):
    z = np.array([0.0, 1e3, 3e4, 1e5])
    p = spp_analytic_isrs(AnalyticAlphaParams(a0, a1, sigma), z)
    for zi, pi in zip(z, p):
        integral, _ = quad(lambda t: a0 + a1 * math.exp(-sigma * t), 0.0, zi, epsabs=0, epsrel=1e-13)
        assert pi == pytest.approx(math.exp(-2 * integral), rel=1e-10)


def test_analytic_params_invariant():
    with pytest.raises(ValidationError):
        AnalyticAlphaParams(1e-5, 1e-5, 0.0)


def test_samples_invariants():
    z = make_grid(L, 64)
    with pytest.raises(ValidationError):
        SppSamples(z[:10], np.ones((1, 10)))
    bad = np.ones((1, 64))
    bad[0, 5] = 0.0
    with pytest.raises(ValidationError):
        SppSamples(z, bad)
    bad = np.full((1, 64), 0.5)
    with pytest.raises(ValidationError):
        SppSamples(z, bad)


def test_lumped_loss_step():
    grid = make_grid(L, 512)
    spp = apply_lumped_loss(SppSamples(grid, np.ones((1, 512))), 5e3, 2.0)
    k = np.flatnonzero(spp.z == 5e3)
    assert len(k) == 2
    assert spp.p[0, k[0]] == 1.0
    assert spp.p[0, k[1]] == pytest.approx(10 ** -0.2)
    assert np.all(spp.p[0, spp.z < 5e3] == 1.0)
    assert np.allclose(spp.p[0, k[1]:], 10 ** -0.2)
    assert apply_lumped_loss(spp, 7e3, 0.0) is spp


def test_lumped_losses_commute():
    grid = make_grid(L, 512)
    base = SppSamples(grid, spp_flat_loss(ALPHA, grid)[None, :])
    a = apply_lumped_loss(apply_lumped_loss(base, 5e3, 2.0), 40e3, 1.0)
    b = apply_lumped_loss(apply_lumped_loss(base, 40e3, 1.0), 5e3, 2.0)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_allclose(a.p, b.p, rtol=1e-15)


def test_lumped_loss_stack_same_position():
    grid = make_grid(L, 512)
    base = SppSamples(grid, np.ones((1, 512)))
    s = apply_lumped_loss(apply_lumped_loss(base, 5e3, 1.0), 5e3, 1.0)
    assert s.p[0, -1] == pytest.approx(10 ** -0.2)
    assert len(s.z) == 514


def test_lumped_loss_range():
    base = SppSamples(make_grid(L, 64), np.ones((1, 64)))
    for z in (0.0, L, -1.0):
        with pytest.raises(ValidationError):
            apply_lumped_loss(base, z, 1.0)


def test_external_roundtrip():
    grid = make_grid(L, 128)
    spp = apply_lumped_loss(SppSamples(grid, np.vstack([spp_flat_loss(ALPHA, grid), spp_flat_loss(0.5 * ALPHA, grid)]),
                                       (3, 7)), 5e3, 2.0)
    text = emit_spp(spp)
    assert text.splitlines()[0] == "z_km, ch_3, ch_7"
    again = load_external_spp(text)
    assert emit_spp(again) == text
    np.testing.assert_array_equal(again.p, spp.p)


def test_external_constant_and_renormalize():
    rows = "\n".join(f"{z}, 1.0" for z in np.linspace(0, 80, 64))
    spp = load_external_spp("z_km, ch_0\n" + rows)
    assert np.all(spp.p == 1.0)
    rows = "\n".join(f"{z}, 2.0" for z in np.linspace(0, 80, 64))
    spp = load_external_spp("z_km, ch_0\n" + rows)
    assert np.all(spp.p == 1.0) and spp.warnings


@pytest.mark.parametrize("text", [
    "",
    "x, ch_0\n0, 1\n",
    "z_km, ch_0\n0, 1\n2, 1\n1, 1\n",
    "z_km, ch_0\n0, 1\n1, -1\n",
    "z_km, ch_0\n0, 1\n1, abc\n",
])
def test_external_format_errors(text):
    with pytest.raises(FormatError):
        load_external_spp(text)


def test_raman_decoupled_limit():
    grid = make_grid(L, 512)
    spp = spp_raman_ode([190e12, 195e12], [1e-3, 1e-3], [ALPHA, 0.8 * ALPHA], 0.0, 15e12, grid)
    # fixed-step RK4 on 512 points leaves ~1e-10 truncation error
    np.testing.assert_allclose(spp.p[0], spp_flat_loss(ALPHA, grid), rtol=1e-9)
    np.testing.assert_allclose(spp.p[1], spp_flat_loss(0.8 * ALPHA, grid), rtol=1e-9)


def test_raman_tilt_direction():
    grid = make_grid(L, 512)
    spp = spp_raman_ode([188e12, 196e12], [50e-3, 50e-3], [ALPHA, ALPHA], CR, 15e12, grid)
    assert spp.p_end[0] > spp_flat_loss(ALPHA, grid)[-1] > spp.p_end[1]


def test_raman_self_convergence():
    freqs, P, alphas = [190e12, 195e12], [1e-3, 2e-3], [ALPHA, ALPHA]
    coarse = make_grid(L, 512)
    fine = make_grid(L, 10 * 511 + 1)
    a, _ = solve_raman_powers(freqs, P, alphas, CR, 15e12, coarse)
    b, _ = solve_raman_powers(freqs, P, alphas, CR, 15e12, fine)
    np.testing.assert_allclose(a, b[:, ::10], rtol=1e-6)


def test_raman_photon_conservation_lossless():
    grid = make_grid(L, 512)
    f = np.array([190e12, 200e12])
    sig, _ = solve_raman_powers(f, [100e-3, 300e-3], [0.0, 0.0], CR, 15e12, grid)
    photons = (sig / f[:, None]).sum(axis=0)
    assert np.max(np.abs(photons / photons[0] - 1)) <= 1e-8
    assert sig[0, -1] > sig[0, 0]


def test_raman_undepleted_backward_pump():
    grid = make_grid(L, 512)
    a_p = 0.25 * math.log(10) / 20 / 1e3
    pump = Pump(f=205e12, P=0.4, direction="backward", alpha=a_p)
    _, pumps = solve_raman_powers([193e12], [1e-12], [ALPHA], CR, 15e12, grid, [pump])
    expected = 0.4 * np.exp(-2 * a_p * (L - grid))
    np.testing.assert_allclose(pumps[0], expected, rtol=1e-9)


def test_raman_backward_pump_gain_at_end():
    grid = make_grid(L, 512)
    pump = Pump(f=205e12, P=0.6, direction="backward", alpha=0.25 * math.log(10) / 20 / 1e3)
    spp = spp_raman_ode([193e12], [1e-3], [ALPHA], CR, 15e12, grid, [pump])
    assert spp.p_end[0] > 10 * spp_flat_loss(ALPHA, grid)[-1]
    assert spp.p[0, 0] == 1.0


def test_raman_input_validation():
    grid = make_grid(L, 128)
    with pytest.raises(ValidationError):
        solve_raman_powers([193e12], [0.0], [ALPHA], CR, 15e12, grid)
    with pytest.raises(ValidationError):
        solve_raman_powers([193e12], [1e-3], [ALPHA], CR, 15e12, grid, [Pump(205e12, -1.0)])


def test_raman_nonconvergence_reports_residual():
    from pcfm.errors import ConvergenceError

    grid = make_grid(L, 512)
    pump = Pump(f=205e12, P=0.6, direction="backward", alpha=0.25 * math.log(10) / 20 / 1e3)
    with pytest.raises(ConvergenceError) as exc:
        solve_raman_powers([193e12], [1e-3], [ALPHA], CR, 15e12, grid, [pump], rtol=1e-30, max_iter=3)
    assert exc.value.residual is not None
