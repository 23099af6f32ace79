"""SinIntegral and the 2F3({1/2,1/2},{3/2,3/2,3/2}, -x^2/4) function.

With Pochhammer simplifications the hypergeometric function reduces to

    H(x) = sum_k (-1)^k x^(2k) / ((2k+1)^2 (2k+1)!) = (1/x) int_0^x Si(t)/t dt

The alternating series is summed exactly (``math.fsum``) while the largest
term stays small; beyond ``X_SWITCH`` the integral form is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sici

EPS = np.finfo(float).eps
# largest term of the series at x=12 is ~1e2, so cancellation costs < 3 digits
X_SWITCH = 12.0


@dataclass(frozen=True)
class SpecialFnResult:
    value: float
    est_abs_err: float

    def __float__(self):
        return self.value


def sin_integral(x):
    """Si(x) = int_0^x sin(t)/t dt, odd in x."""
    si, _ = sici(float(x))
    # cephes Si is accurate to a few ulps of pi/2 across the range
    return SpecialFnResult(float(si), 4.0 * EPS * max(1.0, abs(float(si))))


def _series_terms(x):
    x2 = x * x
    term = 1.0
    terms = [1.0]
    k = 0
    while True:
        n = 2 * k + 1
        term *= -x2 * n * n / ((n + 2) ** 2 * (n + 1) * (n + 2))
        k += 1
        terms.append(term)
        if k > x and abs(term) < 1e-20:
            return terms


def hyp2f3_series(x):
    terms = _series_terms(float(x))
    value = math.fsum(terms)
    # each term carries O(k eps) relative rounding from the recurrence
    err = EPS * sum(abs(t) * (i + 1) for i, t in enumerate(terms))
    return SpecialFnResult(value, err)


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _si_over_t_integral(x, order):
    # int_0^x Si(t)/t dt on panels of width <= pi; integrand is smooth and entire
    n_pan = max(1, int(math.ceil(x / math.pi)))
    edges = np.linspace(0.0, x, n_pan + 1)
    nodes, weights = _gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    si, _ = sici(t)
    vals = (si / t).reshape(n_pan, order)
    return float(np.sum(half * (vals @ weights)))


def hyp2f3_integral(x):
    ax = abs(float(x))
    if ax == 0.0:
        return SpecialFnResult(1.0, 0.0)
    hi = _si_over_t_integral(ax, 20)
    lo = _si_over_t_integral(ax, 14)
    value = hi / ax
    err = abs(hi - lo) / ax + 8.0 * EPS * abs(value) * math.log(ax + 2.0)
    return SpecialFnResult(value, err)


def hyp2f3_half(x):
    """H(x) = 2F3({1/2,1/2},{3/2,3/2,3/2}, -x^2/4); even in x."""
    ax = abs(float(x))
    if ax <= X_SWITCH:
        return hyp2f3_series(ax)
    return hyp2f3_integral(ax)
