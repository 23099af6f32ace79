"""Polynomial representation p(z) = sum_n p_n z^n of sampled power profiles.

Fits are least squares in linear power on z/L in [0, 1] with a Legendre
basis, then converted exactly to monomial coefficients on physical z, which
is what the closed-form kernels consume.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

from .errors import NumericError, ValidationError

logger = logging.getLogger(__name__)

MAX_DEGREE = 9
DEFAULT_DEGREE = 5


@dataclass(frozen=True)
class PolySpp:
    coeffs: np.ndarray  # p_n in 1/m^n
    length: float
    fit_rms: float = 0.0
    fit_max_abs: float = 0.0
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if self.degree > MAX_DEGREE:
            raise NumericError(f"degree {self.degree} > {MAX_DEGREE} is not supported")

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def scaled(self):
        """Dimensionless coefficients c_n = p_n L^n of p as a polynomial in z/L."""
        return self.coeffs * self.length ** np.arange(self.degree + 1)

    @classmethod
    def from_scaled(cls, c, length, **kw):
        c = np.asarray(c, dtype=float)
        return cls(c / length ** np.arange(len(c)), length, **kw)

    def __call__(self, z):
        return eval_poly_spp(self, z)


def eval_poly_spp(poly, z):
    """Horner evaluation of sum_n p_n z^n."""
    z = np.asarray(z, dtype=float)
    acc = np.zeros_like(z) + poly.coeffs[-1]
    for c in poly.coeffs[-2::-1]:
        acc = acc * z + c
    return acc


@lru_cache(maxsize=None)
def _legendre_to_unit_monomial(degree):
    """Matrix M with monomial coeffs on y in [0,1] = M @ Legendre coeffs on t = 2y-1."""
    m = np.zeros((degree + 1, degree + 1))
    shift = np.array([-1.0, 2.0])
    for j in range(degree + 1):
        unit = np.zeros(degree + 1)
        unit[j] = 1.0
        in_t = npleg.leg2poly(unit)
        in_y = np.zeros(1)
        for c in in_t[::-1]:
            in_y = nppoly.polyadd(nppoly.polymul(in_y, shift), [c])
        m[: len(in_y), j] = in_y
    return m


def fit_poly_rows(z, p, degree=DEFAULT_DEGREE):
    """Fit every row of ``p`` (shape (n_rows, len(z))) at once; returns a list of PolySpp."""
    z = np.asarray(z, dtype=float)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if degree < 0:
        raise ValidationError("degree must be >= 0")
    if degree > MAX_DEGREE:
        raise NumericError(f"degree {degree} > {MAX_DEGREE}: monomial conversion is ill-conditioned")
    if len(z) < 10 * (degree + 1):
        raise ValidationError(f"need at least {10 * (degree + 1)} samples for degree {degree}, got {len(z)}")
    L = float(z[-1])
    y = z / L
    A = npleg.legvander(2.0 * y - 1.0, degree)
    leg, *_ = np.linalg.lstsq(A, p.T, rcond=None)
    unit = _legendre_to_unit_monomial(degree) @ leg  # (degree+1, n_rows)
    fitted = A @ leg
    resid = fitted - p.T
    rms = np.sqrt(np.mean(resid**2, axis=0))
    max_abs = np.max(np.abs(resid), axis=0)
    out = []
    for r in range(p.shape[0]):
        warn = ()
        if np.min(fitted[:, r]) < 0:
            warn = ("fitted polynomial is negative somewhere on the grid",)
            logger.info("row %d degree %d: %s", r, degree, warn[0])
        out.append(PolySpp.from_scaled(unit[:, r], L, fit_rms=float(rms[r]),
                                       fit_max_abs=float(max_abs[r]), warnings=warn))
    return out


def fit_poly_spp(z, p_row, degree=DEFAULT_DEGREE):
    return fit_poly_rows(z, p_row, degree)[0]


def fit_spp(spp, degree=DEFAULT_DEGREE):
    """Map channel index -> PolySpp for every row of an :class:`SppSamples`."""
    return dict(zip(spp.channel_indices, fit_poly_rows(spp.z, spp.p, degree)))


def coeffs_table(fits):
    """CSV with columns ch, degree, p_0..p_9, fit_rms (unused orders left empty)."""
    buf = io.StringIO()
    buf.write("ch, degree, " + ", ".join(f"p_{n}" for n in range(MAX_DEGREE + 1)) + ", fit_rms\n")
    for idx, poly in fits.items():
        cells = [f"{c:.17g}" for c in poly.coeffs] + [""] * (MAX_DEGREE - poly.degree)
        buf.write(f"{idx}, {poly.degree}, " + ", ".join(cells) + f", {poly.fit_rms:.17g}\n")
    return buf.getvalue()
