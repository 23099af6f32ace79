from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcfm import domain
from pcfm.domain import (ConfigParseError, emit_scenario, load_scenario, loss_db_per_km_to_alpha,
                         alpha_to_loss_db_per_km, dbm_to_w, w_to_dbm)
from pcfm.errors import ValidationError


def _tree(**kw):
    tree = {"channels": [{"f_center_GHz": 193000.0, "R_GBaud": 64.0, "P_dBm": 0.0},
                         {"f_center_GHz": 193100.0, "R_GBaud": 64.0, "P_dBm": 1.0}],
            "spans": [{"length_km": 80.0}]}
    tree.update(kw)
    return tree


def test_units_roundtrip():
    assert dbm_to_w(0.0) == pytest.approx(1e-3)
    assert w_to_dbm(1e-3) == pytest.approx(0.0)
    alpha = loss_db_per_km_to_alpha(0.2)
    assert math.exp(-2 * alpha * 100e3) == pytest.approx(0.01, rel=1e-12)
    assert alpha_to_loss_db_per_km(alpha) == pytest.approx(0.2)


@given(st.floats(-30, 30))
def test_dbm_roundtrip_property(p):
    assert float(w_to_dbm(dbm_to_w(p))) == pytest.approx(p, abs=1e-12)


def test_load_minimal_defaults():
    sc = load_scenario(json.dumps(_tree()))
    assert sc.n_channels == 2
    assert sc.cut_indices == (0, 1)
    ch = sc.channel(0)
    assert ch.gamma_sci == pytest.approx(1.3e-3)
    assert ch.beta2_sci == pytest.approx(-21.27e-27)
    assert sc.spans[0].length == 80e3
    assert sc.rho(1) == 1.0


def test_beta3_effective_dispersion():
    tree = _tree(options={"fiber": {"beta3_ps3_per_km": 0.14, "f_ref_GHz": 193000.0}})
    sc = load_scenario(json.dumps(tree))
    B = sc.beta2_matrix()
    expected = -21.27e-27 + math.pi * 0.14e-39 * (0.0 + 100e9)
    assert B[0, 1] == pytest.approx(expected, rel=1e-14)
    assert B[1, 1] == pytest.approx(-21.27e-27 + math.pi * 0.14e-39 * 200e9, rel=1e-14)


def test_explicit_pair_values_override():
    tree = _tree()
    tree["channels"][1]["beta2_eff_on_ps2_per_km"] = {"0": -10.0}
    tree["channels"][1]["gamma_xci_on"] = {"0": 2.0}
    sc = load_scenario(json.dumps(tree))
    assert sc.beta2_matrix()[0, 1] == pytest.approx(-10e-27)
    assert sc.gamma_xci_matrix()[0, 1] == pytest.approx(2e-3)


@pytest.mark.parametrize("mutate, field", [
    (lambda t: t.pop("spans"), "spans"),
    (lambda t: t["channels"][0].pop("R_GBaud"), "channels[0].R_GBaud"),
    (lambda t: t["channels"][0].update(P_dBm="x"), "channels[0].P_dBm"),
    (lambda t: t.update(extra=1), "extra"),
    (lambda t: t["spans"][0].update(spp={"model": "magic"}), "spans[0].spp.model"),
])
def test_parse_errors_name_the_field(mutate, field):
    tree = _tree()
    mutate(tree)
    with pytest.raises(ConfigParseError) as exc:
        load_scenario(json.dumps(tree))
    assert exc.value.field == field


def test_invalid_json():
    with pytest.raises(ConfigParseError):
        load_scenario("{not json")


def test_overlapping_channels_rejected():
    tree = _tree()
    tree["channels"][1]["f_center_GHz"] = 193030.0
    with pytest.raises(ValidationError):
        load_scenario(json.dumps(tree))


def test_unknown_cut_rejected():
    with pytest.raises(ValidationError):
        load_scenario(json.dumps(_tree(cut=[7])))


def test_emit_roundtrip_exact():
    tree = _tree(options={"fiber": {"beta3_ps3_per_km": 0.1}, "rho": [1.0, 1.2]})
    tree["spans"] = [{"length_km": 60.0, "lumped_losses": [{"z_km": 5.0, "loss_dB": 2.0}],
                      "post_span_gain_dB": 12.0},
                     {"length_km": 70.0, "spp": {"model": "isrs_analytic", "alpha1_per_km": 0.003,
                                                  "sigma_per_km": 0.05}}]
    sc = load_scenario(json.dumps(tree))
    again = load_scenario(emit_scenario(sc))
    assert again.channels == sc.channels
    assert again.cut_indices == sc.cut_indices
    assert again.rho_correction == sc.rho_correction
    assert again.spans[0].spp_spec.lumped == sc.spans[0].spp_spec.lumped
    np.testing.assert_array_equal(again.spans[1].spp_spec.params["alpha1"], sc.spans[1].spp_spec.params["alpha1"])
    np.testing.assert_array_equal(again.spans[0].post_span_gain_dB, sc.spans[0].post_span_gain_dB)


def test_arrays_read_only():
    sc = load_scenario(json.dumps(_tree()))
    f, *_ = sc.arrays()
    with pytest.raises(ValueError):
        f[0] = 0.0
