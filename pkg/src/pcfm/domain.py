"""Scenario types, unit conventions and config loading.

Everything stored on these objects is SI: Hz, baud, W, m, s^2/m, 1/(W m).
Engineering units (GHz, GBaud, dBm, ps^2/km, 1/(W km), km, dB) exist only in
the JSON configuration handled by :func:`load_scenario` / :func:`emit_scenario`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigParseError, ValidationError

# engineering -> SI factors
GHZ = 1e9
GBAUD = 1e9
THZ = 1e12
KM = 1e3
PS2_PER_KM = 1e-27  # ps^2/km -> s^2/m
PS3_PER_KM = 1e-39  # ps^3/km -> s^3/m
PER_W_KM = 1e-3  # 1/(W km) -> 1/(W m)


def dbm_to_w(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def w_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def loss_db_per_km_to_alpha(loss_db_km):
    """Power loss in dB/km -> field attenuation alpha in 1/m (p = exp(-2 alpha z))."""
    return np.asarray(loss_db_km, dtype=float) * math.log(10.0) / 10.0 / 2.0 / KM


def alpha_to_loss_db_per_km(alpha):
    return np.asarray(alpha, dtype=float) * 2.0 * KM * 10.0 / math.log(10.0)


def effective_dispersion_default(beta2_ref, beta3_ref, f_cut, f_nch):
    """Effective dispersion of channel ``f_nch`` acting on CUT ``f_cut``.

    Frequencies are measured from the reference frequency of ``beta2_ref``.
    """
    return beta2_ref + math.pi * beta3_ref * (f_cut + f_nch)


@dataclass(frozen=True)
class Channel:
    index: int
    f_center: float
    R: float
    P_launch: float
    gamma_sci: float
    alpha: float = 0.0
    gamma_xci_on: dict = field(default_factory=dict)
    beta2_eff_on: dict = field(default_factory=dict)

    @property
    def band(self):
        return self.f_center - self.R / 2.0, self.f_center + self.R / 2.0

    @property
    def beta2_sci(self):
        return self.beta2_eff_on[self.index]


@dataclass(frozen=True)
class LumpedLoss:
    z: float
    loss_dB: float


@dataclass(frozen=True)
class SppSpec:
    """Tagged descriptor selecting an SPP provider.

    ``model`` is one of ``flat``, ``isrs_analytic``, ``raman``, ``external``;
    ``params`` holds the model parameters in SI.
    """

    model: str = "flat"
    params: dict = field(default_factory=dict)
    lumped: tuple = ()
    grid_points: int = 512


@dataclass(frozen=True)
class Span:
    length: float
    spp_spec: SppSpec = field(default_factory=SppSpec)
    post_span_gain_dB: Any = None  # None: transparent; scalar or per-channel array

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError(f"span length must be > 0, got {self.length}")


@dataclass(frozen=True)
class LinkScenario:
    channels: tuple
    spans: tuple
    cut_indices: tuple
    rho_correction: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        validate_channels(self.channels)
        if not self.spans:
            raise ValidationError("scenario needs at least one span")
        known = {ch.index for ch in self.channels}
        missing = [c for c in self.cut_indices if c not in known]
        if missing:
            raise ValidationError(f"cut indices {missing} are not channel indices")

    @property
    def n_channels(self):
        return len(self.channels)

    def channel(self, index):
        for ch in self.channels:
            if ch.index == index:
                return ch
        raise KeyError(index)

    def position(self, index):
        return [ch.index for ch in self.channels].index(index)

    def rho(self, index):
        return float(self.rho_correction.get(index, 1.0))

    @cached_property
    def _arrays(self):
        chs = self.channels
        out = (np.array([c.f_center for c in chs]), np.array([c.R for c in chs]),
               np.array([c.P_launch for c in chs]), np.array([c.gamma_sci for c in chs]),
               np.array([c.alpha for c in chs]))
        for a in out:
            a.setflags(write=False)
        return out

    @cached_property
    def _matrices(self):
        idx = [c.index for c in self.channels]
        B = np.array([[c.beta2_eff_on[i] for c in self.channels] for i in idx])
        G = np.array([[c.gamma_xci_on[i] for c in self.channels] for i in idx])
        B.setflags(write=False)
        G.setflags(write=False)
        return B, G

    def arrays(self):
        """Per-channel SI arrays (f, R, P, gamma_sci, alpha) in channel order (read-only)."""
        return self._arrays

    def beta2_matrix(self):
        """``B[i, j]``: effective dispersion of channel j onto CUT i."""
        return self._matrices[0]

    def gamma_xci_matrix(self):
        """``G[i, j]``: XCI nonlinearity coefficient of channel j onto CUT i."""
        return self._matrices[1]


def validate_channels(channels):
    if not channels:
        raise ValidationError("scenario needs at least one channel")
    seen = set()
    for ch in channels:
        if ch.index in seen:
            raise ValidationError(f"duplicate channel index {ch.index}")
        seen.add(ch.index)
        if not ch.R > 0:
            raise ValidationError(f"channel {ch.index}: symbol rate must be > 0")
        if not ch.P_launch > 0:
            raise ValidationError(f"channel {ch.index}: launch power must be > 0")
        if ch.gamma_sci < 0 or any(g < 0 for g in ch.gamma_xci_on.values()):
            raise ValidationError(f"channel {ch.index}: nonlinearity coefficients must be >= 0")
        if ch.alpha < 0:
            raise ValidationError(f"channel {ch.index}: loss must be >= 0")
    order = sorted(channels, key=lambda c: c.f_center)
    for a, b in zip(order, order[1:]):
        if a.f_center + a.R / 2.0 > b.f_center - b.R / 2.0:
            raise ValidationError(f"channels {a.index} and {b.index} overlap in frequency")


# ---------------------------------------------------------------------------
# JSON config boundary


def _get(tree, key, path, default=...):
    if key in tree:
        return tree[key]
    if default is ...:
        raise ConfigParseError(f"{path}.{key}" if path else key, "required field missing")
    return default


def _num(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigParseError(path, f"expected a number, got {value!r}")
    return float(value)


def _per_channel(value, n, path):
    if isinstance(value, list):
        if len(value) != n:
            raise ConfigParseError(path, f"expected {n} values, got {len(value)}")
        return np.array([_num(v, f"{path}[{i}]") for i, v in enumerate(value)])
    return np.full(n, _num(value, path))


def load_scenario(config_text, base_dir=None):
    """Parse JSON config text into a validated :class:`LinkScenario`."""
    try:
        tree = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError("<root>", f"invalid JSON: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigParseError("<root>", "top level must be an object")
    unknown = set(tree) - {"channels", "spans", "cut", "options"}
    if unknown:
        raise ConfigParseError(sorted(unknown)[0], "unknown top-level key")
    return scenario_from_tree(tree, base_dir)


def load_scenario_file(path):
    path = Path(path)
    return load_scenario(path.read_text(), base_dir=path.parent)


def scenario_from_tree(tree, base_dir=None):
    options = dict(_get(tree, "options", "", {}))
    fiber = options.get("fiber", {})
    beta2 = _num(fiber.get("beta2_ps2_per_km", -21.27), "options.fiber.beta2_ps2_per_km") * PS2_PER_KM
    beta3 = _num(fiber.get("beta3_ps3_per_km", 0.0), "options.fiber.beta3_ps3_per_km") * PS3_PER_KM
    f_ref = _num(fiber.get("f_ref_GHz", 0.0), "options.fiber.f_ref_GHz") * GHZ
    gamma_def = _num(fiber.get("gamma_per_W_km", 1.3), "options.fiber.gamma_per_W_km") * PER_W_KM
    loss_def = _num(fiber.get("loss_dB_per_km", 0.2), "options.fiber.loss_dB_per_km")

    raw_channels = _get(tree, "channels", "")
    if not isinstance(raw_channels, list) or not raw_channels:
        raise ConfigParseError("channels", "expected a non-empty list")
    parsed = []
    for i, rc in enumerate(raw_channels):
        p = f"channels[{i}]"
        if not isinstance(rc, dict):
            raise ConfigParseError(p, "expected an object")
        index = int(rc.get("index", i))
        f = _num(_get(rc, "f_center_GHz", p), f"{p}.f_center_GHz") * GHZ
        R = _num(_get(rc, "R_GBaud", p), f"{p}.R_GBaud") * GBAUD
        if "P_mW" in rc:
            P = _num(rc["P_mW"], f"{p}.P_mW") * 1e-3
        else:
            P = float(dbm_to_w(_num(_get(rc, "P_dBm", p), f"{p}.P_dBm")))
        g = _num(rc.get("gamma_per_W_km", gamma_def / PER_W_KM), f"{p}.gamma_per_W_km") * PER_W_KM
        if "alpha_per_m" in rc:
            alpha = _num(rc["alpha_per_m"], f"{p}.alpha_per_m")
        else:
            alpha = float(loss_db_per_km_to_alpha(_num(rc.get("loss_dB_per_km", loss_def), f"{p}.loss_dB_per_km")))
        parsed.append(dict(index=index, f=f, R=R, P=P, gamma=g, alpha=alpha,
                           gx=rc.get("gamma_xci_on", {}), b2=rc.get("beta2_eff_on_ps2_per_km", {})))

    indices = [c["index"] for c in parsed]
    channels = []
    for c in parsed:
        gx = {}
        b2 = {}
        for cut in parsed:
            key = str(cut["index"])
            gx[cut["index"]] = (_num(c["gx"][key], f"channel {c['index']}.gamma_xci_on.{key}") * PER_W_KM
                                if key in c["gx"] else c["gamma"])
            if key in c["b2"]:
                b2[cut["index"]] = _num(c["b2"][key], f"channel {c['index']}.beta2_eff_on.{key}") * PS2_PER_KM
            else:
                b2[cut["index"]] = effective_dispersion_default(beta2, beta3, cut["f"] - f_ref, c["f"] - f_ref)
        channels.append(Channel(index=c["index"], f_center=c["f"], R=c["R"], P_launch=c["P"],
                                gamma_sci=c["gamma"], alpha=c["alpha"], gamma_xci_on=gx, beta2_eff_on=b2))
    validate_channels(channels)

    raw_spans = _get(tree, "spans", "")
    if not isinstance(raw_spans, list) or not raw_spans:
        raise ConfigParseError("spans", "expected a non-empty list")
    spans = []
    for i, rs in enumerate(raw_spans):
        spans.append(_parse_span(rs, f"spans[{i}]", len(channels), fiber, options, base_dir))

    cut = tree.get("cut", "all")
    if cut == "all":
        cut_indices = tuple(indices)
    elif isinstance(cut, list):
        cut_indices = tuple(int(c) for c in cut)
    else:
        raise ConfigParseError("cut", "expected 'all' or a list of channel indices")

    rho = options.get("rho", 1.0)
    if isinstance(rho, dict):
        rho_map = {int(k): _num(v, f"options.rho.{k}") for k, v in rho.items()}
    else:
        vals = _per_channel(rho, len(channels), "options.rho")
        rho_map = {idx: float(v) for idx, v in zip(indices, vals)}

    return LinkScenario(channels=tuple(channels), spans=tuple(spans), cut_indices=cut_indices,
                        rho_correction=rho_map, options=options)


def _parse_span(rs, p, n_ch, fiber, options, base_dir):
    if not isinstance(rs, dict):
        raise ConfigParseError(p, "expected an object")
    length = _num(_get(rs, "length_km", p), f"{p}.length_km") * KM
    spp = dict(rs.get("spp", {"model": "flat"}))
    model = spp.pop("model", "flat")
    params = {}
    if model == "flat":
        pass
    elif model == "isrs_analytic":
        params["alpha1"] = _per_channel(_get(spp, "alpha1_per_km", f"{p}.spp"), n_ch, f"{p}.spp.alpha1_per_km") / KM
        params["sigma"] = _per_channel(_get(spp, "sigma_per_km", f"{p}.spp"), n_ch, f"{p}.spp.sigma_per_km") / KM
    elif model == "raman":
        raman = {**fiber.get("raman", {}), **spp}
        params["CR"] = _num(raman.get("CR_per_W_km_THz", 0.028), f"{p}.spp.CR_per_W_km_THz") / KM / THZ
        params["df_max"] = _num(raman.get("df_max_THz", 15.0), f"{p}.spp.df_max_THz") * THZ
        pumps = []
        for k, rp in enumerate(raman.get("pumps", [])):
            pp = f"{p}.spp.pumps[{k}]"
            power = (_num(rp["P_mW"], f"{pp}.P_mW") * 1e-3 if "P_mW" in rp
                     else float(dbm_to_w(_num(_get(rp, "P_dBm", pp), f"{pp}.P_dBm"))))
            direction = rp.get("direction", "backward")
            if direction not in ("backward", "forward"):
                raise ConfigParseError(f"{pp}.direction", "expected 'backward' or 'forward'")
            loss = _num(rp.get("loss_dB_per_km", 0.25), f"{pp}.loss_dB_per_km")
            pumps.append({"f": _num(_get(rp, "f_GHz", pp), f"{pp}.f_GHz") * GHZ, "P": power,
                          "direction": direction, "alpha": float(loss_db_per_km_to_alpha(loss))})
        params["pumps"] = tuple(pumps)
    elif model == "external":
        path = Path(_get(spp, "path", f"{p}.spp"))
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        params["path"] = str(path)
    else:
        raise ConfigParseError(f"{p}.spp.model", f"unknown SPP model {model!r}")

    lumped = []
    for k, ll in enumerate(rs.get("lumped_losses", [])):
        lp = f"{p}.lumped_losses[{k}]"
        lumped.append(LumpedLoss(z=_num(_get(ll, "z_km", lp), f"{lp}.z_km") * KM,
                                 loss_dB=_num(_get(ll, "loss_dB", lp), f"{lp}.loss_dB")))
    grid = int(rs.get("grid_points", options.get("grid_points", 512)))
    if grid < 64:
        raise ConfigParseError(f"{p}.grid_points", "need at least 64 grid points")
    gain = rs.get("post_span_gain_dB")
    if gain is not None:
        gain = _per_channel(gain, n_ch, f"{p}.post_span_gain_dB")
    try:
        return Span(length=length, spp_spec=SppSpec(model, params, tuple(lumped), grid), post_span_gain_dB=gain)
    except ValidationError as exc:
        raise ValidationError(f"{p}: {exc}") from exc


def emit_scenario(scenario):
    """Serialize a scenario back to JSON config text (explicit per-pair values)."""
    channels = []
    for ch in scenario.channels:
        channels.append({
            "index": ch.index,
            "f_center_GHz": ch.f_center / GHZ,
            "R_GBaud": ch.R / GBAUD,
            "P_mW": ch.P_launch * 1e3,
            "gamma_per_W_km": ch.gamma_sci / PER_W_KM,
            "alpha_per_m": ch.alpha,
            "gamma_xci_on": {str(k): v / PER_W_KM for k, v in ch.gamma_xci_on.items()},
            "beta2_eff_on_ps2_per_km": {str(k): v / PS2_PER_KM for k, v in ch.beta2_eff_on.items()},
        })
    spans = []
    for span in scenario.spans:
        spec = span.spp_spec
        spp = {"model": spec.model}
        if spec.model == "isrs_analytic":
            spp["alpha1_per_km"] = list(np.asarray(spec.params["alpha1"]) * KM)
            spp["sigma_per_km"] = list(np.asarray(spec.params["sigma"]) * KM)
        elif spec.model == "raman":
            spp["CR_per_W_km_THz"] = spec.params["CR"] * KM * THZ
            spp["df_max_THz"] = spec.params["df_max"] / THZ
            spp["pumps"] = [{"f_GHz": pm["f"] / GHZ, "P_mW": pm["P"] * 1e3, "direction": pm["direction"],
                             "loss_dB_per_km": float(alpha_to_loss_db_per_km(pm["alpha"]))}
                            for pm in spec.params["pumps"]]
        elif spec.model == "external":
            spp["path"] = spec.params["path"]
        entry = {"length_km": span.length / KM, "spp": spp, "grid_points": spec.grid_points,
                 "lumped_losses": [{"z_km": ll.z / KM, "loss_dB": ll.loss_dB} for ll in spec.lumped]}
        if span.post_span_gain_dB is not None:
            entry["post_span_gain_dB"] = [float(g) for g in np.broadcast_to(span.post_span_gain_dB,
                                                                            (scenario.n_channels,))]
        spans.append(entry)
    options = {k: v for k, v in scenario.options.items() if k not in ("rho", "fiber")}
    options["rho"] = {str(k): v for k, v in scenario.rho_correction.items()}
    tree = {"channels": channels, "spans": spans, "cut": list(scenario.cut_indices), "options": options}
    return json.dumps(tree, indent=2)
