"""Closed-form and semi-analytic core integrals K^SCI and K^XCI.

Units: K has units m^2 Hz^2.  Internally profiles are handled through the
dimensionless coefficients c_n = p_n L^n, so the field integral is

    E(theta) = int_0^L p(z) exp(j theta z) dz = L * sum_n c_n e_n(theta L),
    e_n(s) = int_0^1 y^n exp(j s y) dy.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import mpmath

from .errors import AccuracyError, SingularDispersionError, ValidationError
from .polyfit import PolySpp
from .special import hyp2f3_half, sin_integral

logger = logging.getLogger(__name__)

PI = math.pi
EPS = np.finfo(float).eps
GUARD_THRESHOLD = 3e3  # ps^2/km * GBaud^2
SERIES_LIMIT = 4.0  # |s| below which e_n uses its power series
CLOSED_SMALL_X = 1e-3  # printed SCI forms cancel catastrophically below this |x|


class GuardWarning(UserWarning):
    """Closed-form XCI evaluated outside the dispersion guard."""


@dataclass(frozen=True)
class KernelInput:
    poly: PolySpp
    L: float
    beta2_eff: float
    R: float
    R_cut: float
    f_center_rel: float = 0.0


@dataclass(frozen=True)
class KernelResult:
    value: float
    error: float = 0.0

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# field integral of a polynomial profile


@lru_cache(maxsize=None)
def _series_tables(degree, n_terms=40):
    k = np.arange(n_terms)
    inv_fact = np.array([1.0 / math.factorial(int(i)) for i in k])
    # W[k, n] = 1 / (k! (n + k + 1))
    return inv_fact[:, None] / (np.arange(degree + 1)[None, :] + k[:, None] + 1.0)


def unit_moments(s, degree):
    """e_n(s) = int_0^1 y^n exp(j s y) dy for n = 0..degree; shape (len(s), degree+1)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty(s.shape + (degree + 1,), dtype=complex)
    small = np.abs(s) <= SERIES_LIMIT
    if np.any(small):
        ss = s[small]
        W = _series_tables(degree)
        powers = (1j * ss[:, None]) ** np.arange(W.shape[0])[None, :]
        out[small] = powers @ W
    big = ~small
    if np.any(big):
        sb = s[big]
        js = 1j * sb
        e = np.exp(js)
        cur = (e - 1.0) / js
        out[big, 0] = cur
        # forward recurrence is stable once |s| exceeds the order
        for n in range(1, degree + 1):
            cur = (e - n * cur) / js
            out[big, n] = cur
    return out


def field_integral(poly, theta):
    """E(theta) = int_0^L p(z) exp(j theta z) dz for a polynomial profile (complex, m)."""
    L = poly.length
    theta = np.asarray(theta, dtype=float)
    e = unit_moments(theta.ravel() * L, poly.degree)
    return (L * (e @ poly.scaled().astype(complex))).reshape(theta.shape)


def _sq_field(c, s, L):
    e = unit_moments(s, len(c) - 1)
    return L * L * np.abs(e @ c.astype(complex)) ** 2


# ---------------------------------------------------------------------------
# XCI


def profile_energy_bracket(poly):
    """The bracket of the XCI closed form, equal to (1/L) int_0^L p(z)^2 dz."""
    c = poly.scaled()
    cross = 0.0
    for n in range(1, len(c)):
        inner = 0.0
        for k in range(n):
            inner += c[k] / (n + k + 1)
        cross += c[n] * inner
    diag = sum(c[n] ** 2 / (2 * n + 1) for n in range(len(c)))
    return 2.0 * cross + diag


def guard_xci(beta2_eff, R):
    """Validity check of the f1-limit extension: |beta2| [ps^2/km] * R[GBaud]^2 > 3e3.

    Returns ``(passed, margin)`` with margin = value / 3e3 (strict inequality).
    """
    value = abs(beta2_eff) / 1e-27 * (R / 1e9) ** 2
    return value > GUARD_THRESHOLD, value / GUARD_THRESHOLD


def _xci_log_factor(f, R):
    lo, hi = f - R / 2.0, f + R / 2.0
    if lo * hi <= 0:
        raise ValidationError(f"interfering channel at {f:.6g} Hz with R={R:.6g} overlaps the CUT center")
    return abs(math.log(hi / lo))


def k_xci_closed(kin: KernelInput):
    if kin.beta2_eff == 0:
        raise SingularDispersionError("closed-form XCI is singular at zero dispersion; use the oracle")
    if abs(kin.f_center_rel) < (kin.R + kin.R_cut) / 2.0:
        raise ValidationError("XCI channel overlaps the CUT band")
    ok, margin = guard_xci(kin.beta2_eff, kin.R_cut)
    if not ok:
        warnings.warn(f"XCI guard fails (margin {margin:.3g}); closed form may be inaccurate", GuardWarning,
                      stacklevel=2)
    B = profile_energy_bracket(kin.poly)
    value = kin.L / (2.0 * PI * abs(kin.beta2_eff)) * _xci_log_factor(kin.f_center_rel, kin.R) * B
    return KernelResult(value, 0.0)


def k_xci_closed_matrix(C, L, beta2, f_rel, R):
    """Vectorized XCI closed form.

    C: scaled coefficients (n_ch, deg+1); beta2, f_rel: (n_cut, n_ch); R: (n_ch,).
    Entries with f_rel == 0 (the CUT itself) are returned as 0.
    """
    deg = C.shape[1] - 1
    n = np.arange(deg + 1)
    hilbert = 1.0 / (n[:, None] + n[None, :] + 1.0)
    B = np.einsum("in,nk,ik->i", C, hilbert, C)
    lo = f_rel - R[None, :] / 2.0
    hi = f_rel + R[None, :] / 2.0
    self_mask = f_rel == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.abs(np.log(np.where(self_mask, 2.0, hi) / np.where(self_mask, 1.0, lo)))
        K = L / (2.0 * PI * np.abs(beta2)) * logf * B[None, :]
    return np.where(self_mask, 0.0, K)


# ---------------------------------------------------------------------------
# SCI printed closed forms


def _sci_parts(kin):
    R, L, b = kin.R_cut, kin.L, kin.beta2_eff
    x = PI**2 * b * R**2 * L
    return R, L, b, x


def _zero_dispersion_sci(kin):
    c = kin.poly.scaled()
    integral = kin.L * sum(cn / (n + 1) for n, cn in enumerate(c))
    return KernelResult(kin.R_cut**2 * integral**2, 0.0)


def k_sci_closed_np0(kin: KernelInput):
    if kin.poly.degree != 0:
        raise ValidationError("k_sci_closed_np0 needs a degree-0 profile")
    R, L, b, x = _sci_parts(kin)
    if b == 0:
        return _zero_dispersion_sci(kin)
    if abs(x) < CLOSED_SMALL_X:
        return k_sci_semianalytic(kin)
    p0 = kin.poly.coeffs[0]
    H, SI, C = hyp2f3_half(x), sin_integral(x), math.cos(x)
    value = (2 * R**2 * L**2 * p0**2 * H.value + (1 - C) * (2 * p0**2) / (PI**4 * b**2 * R**2)
             - (2 * L * p0**2 * SI.value) / (PI**2 * b))
    err = 2 * R**2 * L**2 * p0**2 * H.est_abs_err + abs(2 * L * p0**2 / (PI**2 * b)) * SI.est_abs_err
    err += 8 * EPS * (2 * R**2 * L**2 * p0**2 + abs(2 * L * p0**2 * SI.value / (PI**2 * b)))
    return KernelResult(value, err)


def k_sci_closed_np1(kin: KernelInput):
    if kin.poly.degree != 1:
        raise ValidationError("k_sci_closed_np1 needs a degree-1 profile")
    R, L, b, x = _sci_parts(kin)
    if b == 0:
        return _zero_dispersion_sci(kin)
    if abs(x) < CLOSED_SMALL_X:
        return k_sci_semianalytic(kin)
    p0, p1 = kin.poly.coeffs
    pi = PI
    H, SI = hyp2f3_half(x), sin_integral(x)
    S, C = math.sin(x), math.cos(x)
    a9 = 9 * p0**2 + 9 * L * p0 * p1 + 4 * L**2 * p1**2
    terms = [
        2 * p1**2,
        9 * R**4 * b**2 * (2 * p0**2 + 2 * L * p0 * p1 + L**2 * p1**2) * pi**4,
        -2 * (p1**2 + pi**4 * b**2 * R**4 * a9) * C,
        6 * R**8 * b**4 * L**2 * (3 * p0**2 + 3 * L * p0 * p1 + L**2 * p1**2) * pi**8 * H.value,
        # printed with b**2 here; b**1 is the dimensionally consistent power
        -2 * R**2 * b * L * p1**2 * pi**2 * S,
        -2 * R**6 * b**3 * L * a9 * pi**6 * SI.value,
    ]
    denom = 9 * R**6 * b**4 * pi**8
    value = sum(terms) / denom
    err = (6 * R**8 * b**4 * L**2 * abs(3 * p0**2 + 3 * L * p0 * p1 + L**2 * p1**2) * pi**8 * H.est_abs_err
           + abs(2 * R**6 * b**3 * L * a9 * pi**6) * SI.est_abs_err + 8 * EPS * sum(abs(t) for t in terms)) / denom
    return KernelResult(value, err)


# ---------------------------------------------------------------------------
# SCI semi-analytic (any degree)


@lru_cache(maxsize=None)
def _gl(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=None)
def _gauss_log(n):
    """Gauss rule for int_0^1 f(y) (-ln y) dy.

    Built once from the moments 1/(k+1)^2 with the Chebyshev algorithm in
    extended precision (the moment map is badly conditioned in double).
    """
    with mpmath.workdps(80):
        m = [mpmath.mpf(1) / (k + 1) ** 2 for k in range(2 * n)]
        a = [mpmath.mpf(0)] * n
        b = [mpmath.mpf(0)] * n
        a[0], b[0] = m[1] / m[0], m[0]
        prev, cur = [mpmath.mpf(0)] * (2 * n), list(m)
        for k in range(1, n):
            new = [mpmath.mpf(0)] * (2 * n)
            for j in range(k, 2 * n - k):
                new[j] = cur[j + 1] - a[k - 1] * cur[j] - b[k - 1] * prev[j]
            a[k] = new[k + 1] / new[k] - cur[k] / cur[k - 1]
            b[k] = new[k] / cur[k - 1]
            prev, cur = cur, new
        J = mpmath.zeros(n)
        for i in range(n):
            J[i, i] = a[i]
            if i:
                J[i, i - 1] = J[i - 1, i] = mpmath.sqrt(b[i])
        evals, evecs = mpmath.eigsy(J)
        nodes = np.array([float(evals[i]) for i in range(n)])
        weights = np.array([float(m[0] * evecs[0, i] ** 2) for i in range(n)])
    order = np.argsort(nodes)
    return nodes[order], weights[order]


def _log_kernel_rule(x, gl_order, log_order, panel=4 * PI):
    """Nodes and weights for int_0^x G(s) ln(x/s) ds, x > 0.

    Panels of width ``panel``; the first carries the logarithmic singularity
    and is split as h * [ln(x/h) int_0^1 G(hy) dy + int_0^1 G(hy) (-ln y) dy].
    """
    h = min(x, panel)
    gx, gw = _gl(gl_order)
    tl, wl = _gauss_log(log_order)
    y = 0.5 * (gx + 1.0)
    nodes = [h * y, h * tl]
    weights = [0.5 * h * math.log(x / h) * gw, h * wl]
    n_rest = int(math.ceil((x - h) / panel)) if x > h else 0
    if n_rest:
        edges = np.linspace(h, x, n_rest + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        rest = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        nodes.append(rest)
        weights.append((half[:, None] * gw[None, :]).ravel() * np.log(x / rest))
    return np.concatenate(nodes), np.concatenate(weights)


def k_sci_semianalytic_batch(C, L, beta2, R, rtol=1e-10):
    """Semi-analytic K^SCI for many CUTs at once.

    C: scaled coefficients (n, deg+1); beta2, R: (n,).  Returns (values, errors).
    Zero-dispersion entries get the analytic limit R^2 (int p dz)^2.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    beta2 = np.asarray(beta2, dtype=float)
    R = np.asarray(R, dtype=float)
    n, deg = C.shape[0], C.shape[1] - 1
    x = PI**2 * np.abs(beta2) * R**2 * L
    values = np.zeros(n)
    errors = np.zeros(n)
    zero = beta2 == 0
    if np.any(zero):
        integral = L * (C[zero] @ (1.0 / np.arange(1, deg + 2)))
        values[zero] = R[zero] ** 2 * integral**2
    live = np.flatnonzero(~zero)
    if live.size == 0:
        return values, errors
    nodes, weights, owner = [], [], []
    for rule, (g, q) in enumerate([(16, 16), (12, 12)]):
        for i in live:
            s, w = _log_kernel_rule(x[i], g, q)
            nodes.append(s)
            weights.append(w)
            owner.append(np.full(s.size, 2 * i + rule))
    s = np.concatenate(nodes)
    w = np.concatenate(weights)
    own = np.concatenate(owner)
    e = unit_moments(s, deg)
    G = L * L * np.abs(np.einsum("kn,kn->k", e, C[own // 2])) ** 2
    sums = np.bincount(own, w * G, minlength=2 * n).reshape(n, 2)
    scale = 1.0 / (PI**2 * np.abs(beta2[live]) * L)
    values[live] = scale * sums[live, 0]
    errors[live] = scale * np.abs(sums[live, 0] - sums[live, 1]) + 16 * EPS * np.abs(values[live])
    bad = errors > np.maximum(rtol * np.abs(values), 1e-300)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise AccuracyError(f"semi-analytic SCI estimate {values[i]:.6g} has error {errors[i]:.3g}",
                            values[i], errors[i])
    return values, errors


def k_sci_semianalytic(kin: KernelInput, rtol=1e-10):
    """K^SCI for any degree through the exact one-dimensional log-kernel reduction.

    The square f1, f2 in [-R/2, R/2] is collapsed onto s = 4 pi^2 |beta2| L f1 f2,
    whose density on the quadrant is ln(x/s) with x = pi^2 |beta2| R^2 L.
    """
    v, e = k_sci_semianalytic_batch(kin.poly.scaled()[None, :], kin.L, np.array([kin.beta2_eff]),
                                    np.array([kin.R_cut]), rtol)
    return KernelResult(float(v[0]), float(e[0]))


def k_sci(kin: KernelInput, kernel="auto"):
    """Dispatch: printed closed forms for degree <= 1, semi-analytic otherwise."""
    if kernel == "semianalytic" or (kernel == "auto" and kin.poly.degree > 1):
        return k_sci_semianalytic(kin)
    if kin.poly.degree == 0:
        return k_sci_closed_np0(kin)
    if kin.poly.degree == 1:
        return k_sci_closed_np1(kin)
    if kernel == "closed":
        raise ValidationError(f"no printed closed form for degree {kin.poly.degree}")
    raise ValidationError(f"unknown kernel selector {kernel!r}")
