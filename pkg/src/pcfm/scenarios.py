"""Synthetic scenario generators (JSON-compatible config trees)."""

from __future__ import annotations

import numpy as np


def _fiber(beta3=0.14):
    return {"beta2_ps2_per_km": -21.27, "beta3_ps3_per_km": beta3, "f_ref_GHz": 193414.0,
            "gamma_per_W_km": 1.3, "loss_dB_per_km": 0.2}


def uwb15(lumped_loss=False, length_km=80.0, P_dBm=6.0, pump_mW=500.0, grid_points=512):
    """15 channels over 187-195.4 THz with ISRS and one backward pump at 201 THz."""
    channels = [{"index": k, "f_center_GHz": 187000.0 + 600.0 * k, "R_GBaud": 64.0, "P_dBm": P_dBm,
                 "loss_dB_per_km": 0.2 if k < 7 else 0.19} for k in range(15)]
    span = {"length_km": length_km, "grid_points": grid_points,
            "spp": {"model": "raman", "pumps": [{"f_GHz": 201000.0, "P_mW": pump_mW, "direction": "backward"}]}}
    if lumped_loss:
        span["lumped_losses"] = [{"z_km": 5.0, "loss_dB": 2.0}]
    return {"channels": channels, "spans": [span], "cut": "all", "options": {"fiber": _fiber()}}


def wideband(n_channels=150, spacing_GHz=75.0, f0_GHz=186000.0, R_GBaud=64.0, P_dBm=0.0, length_km=100.0,
             model="isrs_analytic", seed=0):
    """Dense C+L(+S)-like grid; with ``isrs_analytic`` the tilt is drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    channels = [{"index": k, "f_center_GHz": f0_GHz + spacing_GHz * k, "R_GBaud": R_GBaud, "P_dBm": P_dBm}
                for k in range(n_channels)]
    spp = {"model": model}
    if model == "isrs_analytic":
        tilt = np.linspace(-1.0, 1.0, n_channels) * 0.004 * rng.uniform(0.8, 1.2)
        spp["alpha1_per_km"] = [float(t) for t in tilt]
        spp["sigma_per_km"] = 0.05
    return {"channels": channels, "spans": [{"length_km": length_km, "spp": spp}], "cut": "all",
            "options": {"fiber": _fiber()}}


def flat_single(length_km=100.0, R_GBaud=64.0, P_dBm=0.0, loss_dB_per_km=0.2):
    """One channel on a flat-loss span; with zero loss the profile is constant and every degree is exact."""
    return {"channels": [{"index": 0, "f_center_GHz": 193414.0, "R_GBaud": R_GBaud, "P_dBm": P_dBm,
                          "loss_dB_per_km": loss_dB_per_km}],
            "spans": [{"length_km": length_km, "spp": {"model": "flat"}}], "cut": "all",
            "options": {"fiber": _fiber(0.0)}}
