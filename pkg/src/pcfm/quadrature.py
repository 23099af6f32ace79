"""Batched globally-adaptive Gauss-Kronrod (7/15) integration.

Many independent 1-D integrals are refined together so every integrand call
is a single vectorized evaluation.  Nesting two of these gives the 2-D
adaptive rule used by the oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import AccuracyError, Cancelled

# QUADPACK qk15 abscissae / weights
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
W_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
W_GAUSS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (x = 0.949, 0.741, 0.405, 0)
W_GAUSS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _check_cancel(cancel):
    if cancel is not None and cancel.is_set():
        raise Cancelled("integration cancelled")


def batched_quad(fun, breakpoints, rtol=1e-8, atol=0.0, max_evals=10**8, cancel=None,
                 raise_on_fail=True):
    """Integrate several problems at once.

    ``breakpoints`` is a list of increasing arrays, one per problem, giving the
    initial panels.  ``fun(x, owner_of_x)`` must return integrand values for
    flat arrays.  Returns ``(values, errors, n_evals)``.
    """
    n_prob = len(breakpoints)
    lo = np.concatenate([np.asarray(b[:-1], dtype=float) for b in breakpoints])
    hi = np.concatenate([np.asarray(b[1:], dtype=float) for b in breakpoints])
    own = np.concatenate([np.full(len(b) - 1, i) for i, b in enumerate(breakpoints)])
    span = np.array([b[-1] - b[0] for b in breakpoints], dtype=float)
    span[span == 0] = 1.0

    val = np.empty(0)
    err = np.empty(0)
    keep_lo, keep_hi, keep_own = np.empty(0), np.empty(0), np.empty(0, dtype=int)
    n_evals = 0
    while True:
        _check_cancel(cancel)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        f = np.asarray(fun(x.ravel(), np.repeat(own, 15)), dtype=float).reshape(x.shape)
        n_evals += f.size
        k = half * (f @ W_KRONROD)
        g = half * (f @ W_GAUSS)
        # QUADPACK error heuristic
        mean = k / np.where(half == 0, 1.0, 2.0 * half)
        resasc = np.abs(half) * (np.abs(f - mean[:, None]) @ W_KRONROD)
        raw = np.abs(k - g)
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * raw / resasc) ** 1.5), raw)
        e = np.maximum(e, 50.0 * np.finfo(float).eps * np.abs(k))
        val = np.concatenate([val, k])
        err = np.concatenate([err, e])
        keep_lo = np.concatenate([keep_lo, lo])
        keep_hi = np.concatenate([keep_hi, hi])
        keep_own = np.concatenate([keep_own, own])

        total = np.bincount(keep_own, val, minlength=n_prob)
        total_err = np.bincount(keep_own, err, minlength=n_prob)
        tol = np.maximum(atol, rtol * np.abs(total))
        bad = total_err > tol
        if not np.any(bad):
            return total, total_err, n_evals
        if n_evals >= max_evals:
            if raise_on_fail:
                worst = int(np.argmax(total_err / np.maximum(tol, 1e-300)))
                raise AccuracyError(f"quadrature budget of {max_evals} evaluations exhausted",
                                    estimate=float(total[worst]), error=float(total_err[worst]))
            return total, total_err, n_evals
        # split intervals whose error density exceeds the problem's allowance
        width = keep_hi - keep_lo
        split = bad[keep_own] & (err > 0.5 * tol[keep_own] * width / span[keep_own])
        lo_s, hi_s, own_s = keep_lo[split], keep_hi[split], keep_own[split]
        m = 0.5 * (lo_s + hi_s)
        lo = np.concatenate([lo_s, m])
        hi = np.concatenate([m, hi_s])
        own = np.concatenate([own_s, own_s])
        keep = ~split
        val, err = val[keep], err[keep]
        keep_lo, keep_hi, keep_own = keep_lo[keep], keep_hi[keep], keep_own[keep]


def quad(fun, breakpoints, **kw):
    """Single-problem convenience wrapper; ``fun`` takes a flat array."""
    v, e, n = batched_quad(lambda x, _o: fun(x), [np.asarray(breakpoints, dtype=float)], **kw)
    return float(v[0]), float(e[0]), n
