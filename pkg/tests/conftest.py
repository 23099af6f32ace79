from __future__ import annotations

import numpy as np
import pytest

from pcfm.domain import scenario_from_tree
from pcfm.polyfit import PolySpp

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def exp_poly(L=1e5, loss_db_km=0.2, degree=5, n=512):
    """Polynomial fit of a flat-loss profile (a realistic smooth SPP)."""
    from pcfm.polyfit import fit_poly_spp

    z = np.linspace(0.0, L, n)
    alpha = loss_db_km * np.log(10) / 20 / 1e3
    return fit_poly_spp(z, np.exp(-2 * alpha * z), degree)


def const_poly(L=1e5, value=1.0):
    return PolySpp(np.array([value]), L)


def small_scenario(n=3, spacing_GHz=100.0, loss=0.2, length_km=80.0, spans=1, **span_extra):
    tree = {
        "channels": [{"index": k, "f_center_GHz": 193000.0 + spacing_GHz * k, "R_GBaud": 64.0, "P_dBm": 0.0,
                      "loss_dB_per_km": loss} for k in range(n)],
        "spans": [{"length_km": length_km, "spp": {"model": "flat"}, **span_extra} for _ in range(spans)],
        "options": {"fiber": {"f_ref_GHz": 193000.0}},
    }
    return scenario_from_tree(tree)
