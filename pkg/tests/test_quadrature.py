from __future__ import annotations

import math
import threading

import numpy as np
import pytest

from pcfm.errors import AccuracyError, Cancelled
from pcfm.quadrature import W_GAUSS, W_KRONROD, batched_quad, quad


def test_rule_weights():
    assert W_KRONROD.sum() == pytest.approx(2.0, abs=1e-15)
    assert W_GAUSS.sum() == pytest.approx(2.0, abs=1e-15)


def test_oscillatory():
    v, e, _ = quad(lambda x: np.cos(50 * x), [0.0, 1.0], rtol=1e-12)
    assert v == pytest.approx(math.sin(50) / 50, rel=1e-11)
    assert e < 1e-11


def test_batched_independent_problems():
    bps = [np.array([0.0, 1.0]), np.array([0.0, 2.0, 3.0]), np.array([1.0, 10.0])]
    k = np.array([1.0, 2.0, 3.0])
    vals, errs, _ = batched_quad(lambda x, o: x ** k[o], bps, rtol=1e-13)
    exact = [1 / 2, 3**3 / 3, (10**4 - 1) / 4]
    np.testing.assert_allclose(vals, exact, rtol=1e-13)


def test_budget_exhaustion():
    with pytest.raises(AccuracyError) as exc:
        quad(lambda x: np.sin(1 / np.maximum(x, 1e-300)), [0.0, 1.0], rtol=1e-14, max_evals=3000)
    assert exc.value.estimate is not None


def test_cancel():
    ev = threading.Event()
    ev.set()
    with pytest.raises(Cancelled):
        quad(lambda x: x, [0.0, 1.0], cancel=ev)
