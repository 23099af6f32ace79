"""Polynomial closed-form model (PCFM) of GN-model nonlinear interference.

Pipeline: scenario -> per-channel spatial power profiles -> polynomial fits
-> SCI/XCI core integrals -> per-span NLI PSD -> link accumulation -> GSNR.
A numerically integrated oracle of the same core integrals is included.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .domain import Channel, LinkScenario, LumpedLoss, Span, SppSpec, load_scenario, load_scenario_file
from .engine import (LinkReport, SpanResult, accumulate_link, gsnr_nli, oracle_span_nli, run_oracle, run_pcfm,
                     span_nli)
from .errors import (AccuracyError, Cancelled, ConfigParseError, ConvergenceError, FormatError, NumericError,
                     PcfmError, SingularDispersionError, StiffnessError, ValidationError)
from .kernels import KernelInput, k_sci, k_sci_semianalytic, k_xci_closed
from .oracle import OracleSettings, SampledProfile, k_sci_numeric, k_xci_numeric
from .polyfit import PolySpp, fit_poly_spp, fit_spp
from .special import hyp2f3_half, sin_integral
from .spp import SppSamples, apply_lumped_loss, span_spp

__all__ = [
    "AccuracyError", "Cancelled", "Channel", "ConfigParseError", "ConvergenceError", "FormatError",
    "KernelInput", "LinkReport", "LinkScenario", "LumpedLoss", "NumericError", "OracleSettings", "PcfmError",
    "PolySpp", "SampledProfile", "SingularDispersionError", "Span", "SpanResult", "SppSamples", "SppSpec",
    "StiffnessError", "ValidationError", "accumulate_link", "apply_lumped_loss", "fit_poly_spp", "fit_spp",
    "gsnr_nli", "hyp2f3_half", "k_sci", "k_sci_numeric", "k_sci_semianalytic", "k_xci_closed", "k_xci_numeric",
    "load_scenario", "load_scenario_file", "oracle_span_nli", "run_oracle", "run_pcfm", "span_nli", "span_spp",
    "sin_integral",
]
