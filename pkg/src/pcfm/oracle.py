"""Numerical reference for the core integrals.

The double integrals over (f1, f2) are evaluated by nested adaptive
Gauss-Kronrod rules directly in frequency, with the inner field integral
done exactly for either a piecewise-linear interpolant of sampled profiles
(Filon-type, per uniform run of segments) or a polynomial profile.
Nothing here relies on the f1*f2 product substitution used by the
closed-form kernels; only the quadrant symmetry is exploited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from . import kernels
from .errors import ValidationError
from .polyfit import PolySpp
from .quadrature import batched_quad

PI = math.pi


@dataclass(frozen=True)
class OracleSettings:
    rel_tol: float = 1e-7
    max_evals: int = 5 * 10**7
    inner_integrator: str = "auto"  # auto | piecewise-linear-exact | polynomial-exact
    cancel: Any = None  # object with is_set(), e.g. threading.Event

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be > 0")


@dataclass(frozen=True)
class SampledProfile:
    """Piecewise-linear interpolant of samples (duplicate z values mark jumps)."""

    z: np.ndarray
    p: np.ndarray

    @property
    def length(self):
        return float(self.z[-1])

    @cached_property
    def spectral_table(self):
        return _SpectralTable(self.z, self.p)


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    n_evals: int

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# inner field integral


def _phi(w):
    """phi0(w) = int_0^1 e^{jwy} dy, phi1(w) = int_0^1 y e^{jwy} dy."""
    w = np.asarray(w, dtype=float)
    phi0 = np.empty(w.shape, dtype=complex)
    phi1 = np.empty(w.shape, dtype=complex)
    small = np.abs(w) < 0.05
    if np.any(small):
        jw = 1j * w[small]
        t0 = np.zeros_like(jw)
        t1 = np.zeros_like(jw)
        term = np.ones_like(jw)
        for k in range(10):
            t0 += term / (k + 1)
            t1 += term / (k + 2)
            term = term * jw / (k + 1)
        phi0[small], phi1[small] = t0, t1
    big = ~small
    if np.any(big):
        jw = 1j * w[big]
        e = np.exp(jw)
        p0 = (e - 1.0) / jw
        phi0[big] = p0
        phi1[big] = (e - p0) / jw
    return phi0, phi1


def _uniform_runs(z):
    """Split segments into maximal runs of equal length; zero-length segments are dropped."""
    h = np.diff(z)
    runs = []
    k = 0
    n = len(h)
    while k < n:
        if h[k] == 0:
            k += 1
            continue
        j = k + 1
        while j < n and h[j] != 0 and abs(h[j] - h[k]) <= 1e-9 * h[k]:
            j += 1
        runs.append((k, j, float(np.mean(h[k:j]))))
        k = j
    return runs


def _filon_linear(z, p, theta):
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape, dtype=complex)
    for k0, k1, h in _uniform_runs(z):
        w = theta * h
        phi0, phi1 = _phi(w)
        omega = np.exp(1j * w)
        # sum_k omega^k p_k and sum_k omega^k p_{k+1} over the run by Horner
        a = np.full(theta.shape, p[k1 - 1], dtype=complex)
        b = np.full(theta.shape, p[k1], dtype=complex)
        for k in range(k1 - 2, k0 - 1, -1):
            a = a * omega + p[k]
            b = b * omega + p[k + 1]
        out += np.exp(1j * theta * z[k0]) * h * ((phi0 - phi1) * a + phi1 * b)
    return out


class _SpectralTable:
    """Filon integral with the run sums tabulated by FFT.

    For a uniform run, sum_k p_k exp(j theta k h) is a trigonometric polynomial
    in u = theta h; it is sampled OVERSAMPLE times per period of its highest
    harmonic and read back by barycentric Lagrange interpolation of order
    ORDER, giving ~1e-11 agreement with direct Horner summation.  Short runs
    (around lumped losses) are summed directly.
    """

    OVERSAMPLE = 32
    ORDER = 10
    DIRECT_MAX = 16

    def __init__(self, z, p):
        q = self.ORDER
        j = np.arange(q)
        self.bary = (-1.0) ** j * np.array([math.comb(q - 1, int(i)) for i in j])
        self.tables = []
        self.direct = []
        for k0, k1, h in _uniform_runs(z):
            n = k1 - k0
            if n <= self.DIRECT_MAX:
                self.direct.append((k0, k1))
                continue
            M = max(64, 1 << int(math.ceil(math.log2(self.OVERSAMPLE * (n + 1)))))
            ab = np.stack([np.fft.ifft(p[k0:k1], M), np.fft.ifft(p[k0 + 1:k1 + 1], M)], axis=1) * M
            # wrap q rows so the stencil never needs a modulo
            ab = np.concatenate([ab[-q:], ab, ab[:q]])
            self.tables.append((float(z[k0]), h, M, ab))
        self.z = z
        self.p = p

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        out = np.zeros(theta.shape, dtype=complex)
        q = self.ORDER
        offs = np.arange(q)
        for z0, h, M, ab in self.tables:
            w = theta * h
            t = np.mod(w, 2.0 * PI) * (M / (2.0 * PI))
            i0 = np.floor(t).astype(np.int64) - (q // 2 - 1)
            d = (t - i0)[:, None] - offs[None, :]
            d[d == 0] = 1e-14
            wts = self.bary / d
            wts /= wts.sum(axis=1, keepdims=True)
            rows = ab[(i0 + q)[:, None] + offs[None, :]]  # (n, q, 2)
            A = np.einsum("nq,nq->n", wts, rows[:, :, 0])
            B = np.einsum("nq,nq->n", wts, rows[:, :, 1])
            phi0, phi1 = _phi(w)
            out += np.exp(1j * theta * z0) * h * ((phi0 - phi1) * A + phi1 * B)
        for k0, k1 in self.direct:
            out += _filon_linear(self.z[k0:k1 + 1], self.p[k0:k1 + 1], theta)
        return out


def inner_field_integral(profile, theta, settings=None):
    """int_0^L p(z) exp(j theta z) dz for a sampled or polynomial profile (complex, m)."""
    mode = settings.inner_integrator if settings is not None else "auto"
    if isinstance(profile, PolySpp):
        if mode == "piecewise-linear-exact":
            raise ValidationError("piecewise-linear integrator needs a sampled profile")
        return kernels.field_integral(profile, theta)
    if isinstance(profile, SampledProfile):
        if mode == "polynomial-exact":
            raise ValidationError("polynomial integrator needs a polynomial profile")
        if mode == "piecewise-linear-exact":
            return _filon_linear(profile.z, profile.p, theta)
        theta = np.asarray(theta, dtype=float)
        return profile.spectral_table(theta).reshape(theta.shape)
    raise ValidationError(f"unsupported profile type {type(profile).__name__}")


def _sq(profile, theta, settings=None, chunk=1 << 15):
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape)
    for s in range(0, theta.size, chunk):
        out[s:s + chunk] = np.abs(inner_field_integral(profile, theta[s:s + chunk], settings)) ** 2
    return out


def _panels(a, b, n):
    return np.linspace(a, b, max(1, int(n)) + 1)


# ---------------------------------------------------------------------------
# 2-D integrals


def _nested(outer_bp, inner_bp_of, integrand, settings):
    """int over outer x of int over inner y of integrand(x, y)."""
    inner_tol = 0.1 * settings.rel_tol
    total_evals = 0
    inner_err_sum = [0.0]

    def outer_fun(xs, _owner):
        nonlocal total_evals
        bps = [inner_bp_of(x) for x in xs]

        def f(ys, owner):
            return integrand(xs[owner], ys)
        vals, errs, n = batched_quad(f, bps, rtol=inner_tol, max_evals=settings.max_evals,
                                     cancel=settings.cancel)
        total_evals += n
        inner_err_sum[0] = max(inner_err_sum[0], float(np.max(errs / np.maximum(np.abs(vals), 1e-300))))
        return vals

    val, err, _ = batched_quad(outer_fun, [outer_bp], rtol=settings.rel_tol, max_evals=settings.max_evals,
                               cancel=settings.cancel)
    value = float(val[0])
    return OracleResult(value, float(err[0]) + inner_err_sum[0] * abs(value), total_evals)


def _check_profile(profile, L):
    if not math.isclose(profile.length, L, rel_tol=1e-12):
        raise ValidationError(f"profile length {profile.length} m != span length {L} m")


def k_sci_numeric(profile, beta2_eff, R_cut, L, settings=OracleSettings()):
    """4 * int_0^{R/2} int_0^{R/2} |E(4 pi^2 f1 f2 beta2)|^2 df2 df1 (quadrant symmetry)."""
    _check_profile(profile, L)
    half = R_cut / 2.0
    if beta2_eff == 0:
        e0 = abs(complex(inner_field_integral(profile, np.zeros(1), settings)[0])) ** 2
        return OracleResult(R_cut**2 * e0, 0.0, 1)
    k = 4.0 * PI**2 * beta2_eff
    x_max = abs(k) * half * half * L  # largest phase theta*L on the quadrant

    def inner_bp(f1):
        return _panels(0.0, half, math.ceil(abs(k) * f1 * half * L / PI) + 1)

    res = _nested(_panels(0.0, half, math.ceil(x_max / PI) + 1), inner_bp,
                  lambda f1, f2: _sq(profile, k * f1 * f2, settings), settings)
    return OracleResult(4.0 * res.value, 4.0 * res.error, res.n_evals)


def _graded(a, b, first):
    """Breakpoints on [a, b] refined geometrically towards a, first panel of width ~first."""
    if first >= b - a:
        return np.array([a, b])
    n = int(math.ceil(math.log2((b - a) / first)))
    return np.concatenate([[a], a + (b - a) * 2.0 ** -np.arange(n, -1, -1)])


def k_xci_numeric(profile, beta2_eff, f_center_rel, R_nch, R_cut, L, settings=OracleSettings()):
    """int_{-Rc/2}^{Rc/2} int_{f-Rn/2}^{f+Rn/2} |E(4 pi^2 f1 f2 beta2)|^2 df2 df1 on the finite rectangle.

    Evaluated as outer integral over f2 (interferer band) and inner over f1,
    using evenness in f1.
    """
    _check_profile(profile, L)
    lo, hi = f_center_rel - R_nch / 2.0, f_center_rel + R_nch / 2.0
    if lo * hi <= 0 or abs(f_center_rel) < (R_nch + R_cut) / 2.0:
        raise ValidationError("interfering channel overlaps the CUT")
    half = R_cut / 2.0
    if beta2_eff == 0:
        e0 = abs(complex(inner_field_integral(profile, np.zeros(1), settings)[0])) ** 2
        return OracleResult(R_cut * R_nch * e0, 0.0, 1)
    k = 4.0 * PI**2 * beta2_eff
    # profile decay sets the width of the |E|^2 peak around theta = 0
    peak = 1.0 / L
    if isinstance(profile, SampledProfile):
        p = np.maximum(profile.p, 1e-300)
        peak = max(peak, abs(math.log(p[-1] / p[0])) / L)

    def inner_bp(f2):
        width = peak / (abs(k) * abs(f2))
        bp = _graded(0.0, half, 0.25 * width)
        # ensure panels never span more than ~2 pi of phase in f1
        max_w = 2.0 * PI / (abs(k) * abs(f2) * L)
        pieces = [bp[:1]]
        for a, b in zip(bp[:-1], bp[1:]):
            n = max(1, int(math.ceil((b - a) / max_w)))
            pieces.append(np.linspace(a, b, n + 1)[1:])
        return np.concatenate(pieces)

    outer_bp = _panels(lo, hi, 1)
    res = _nested(outer_bp, inner_bp, lambda f2, f1: _sq(profile, k * f1 * f2, settings), settings)
    return OracleResult(2.0 * res.value, 2.0 * res.error, res.n_evals)


def k_xci_numeric_1d(profile, beta2_eff, f_center_rel, R_nch, R_cut, L, settings=OracleSettings()):
    """Dimensional-reduction cross-check for polynomial/sampled profiles.

    For fixed f2 the f1 integral becomes (1/(|k| f2)) * int_0^{|k| f2 Rc/2} |E(t)|^2 dt,
    so K is a 1-D integral over f2 of a cumulative theta integral.
    """
    _check_profile(profile, L)
    k = abs(4.0 * PI**2 * beta2_eff)
    lo, hi = f_center_rel - R_nch / 2.0, f_center_rel + R_nch / 2.0
    half = R_cut / 2.0

    def theta_cumulative(t_max):
        bp = _panels(0.0, t_max, math.ceil(t_max * L / PI) + 1)
        v, e, n = batched_quad(lambda t, _o: _sq(profile, t, settings), [bp], rtol=0.01 * settings.rel_tol,
                               cancel=settings.cancel)
        return v[0]

    def outer(f2s, _o):
        return np.array([2.0 * theta_cumulative(k * abs(f2) * half) / (k * abs(f2)) for f2 in f2s])

    v, e, n = batched_quad(outer, [_panels(lo, hi, 4)], rtol=settings.rel_tol, cancel=settings.cancel)
    return OracleResult(float(v[0]), float(e[0]), n)
