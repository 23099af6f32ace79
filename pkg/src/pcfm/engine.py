"""Per-span NLI assembly, multi-span accumulation and NLI-only GSNR.

The per-CUT power spectral density at the span end is

    G = 16/27 * p_end * [gamma^2 P^3 R^-3 K_sci
                         + 2 P R^-1 sum_n gamma_n^2 P_n^2 R_n^-2 K_xci,n]

with all K computed on frequencies relative to the CUT.  The same assembly
is used with closed-form kernels on fitted polynomials (PCFM) and with
oracle kernels on the sampled profiles (reference pipeline).
"""

from __future__ import annotations

import io
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .domain import GBAUD, GHZ, PS2_PER_KM, LinkScenario, Span, db_to_lin, w_to_dbm
from .errors import ValidationError
from .oracle import OracleSettings, SampledProfile, k_sci_numeric, k_xci_numeric
from .polyfit import DEFAULT_DEGREE, fit_spp
from .spp import SppSamples, span_spp

logger = logging.getLogger(__name__)

PREFACTOR = 16.0 / 27.0


@dataclass(frozen=True)
class SpanResult:
    """Kernels and NLI PSD of one span for a set of CUTs (arrays indexed like ``cut_indices``)."""

    span_index: int
    cut_indices: tuple
    channel_indices: tuple
    p_end: np.ndarray  # per CUT
    K_sci: np.ndarray  # per CUT, m^2 Hz^2
    K_sci_err: np.ndarray
    K_xci: np.ndarray  # (n_cut, n_ch), zero on the CUT itself
    K_xci_err: np.ndarray
    G_nli: np.ndarray  # per CUT, W/Hz at the span end
    guard_failures: tuple = ()  # (cut, interferer, margin)

    def __post_init__(self):
        if np.any(self.G_nli < 0):
            raise ValidationError("negative NLI PSD")
        if np.any(self.p_end <= 0):
            raise ValidationError("p_end must be > 0")


@dataclass(frozen=True)
class LinkReport:
    cut_indices: tuple
    f_center: np.ndarray
    R: np.ndarray
    P_launch: np.ndarray
    P_signal_rx: np.ndarray
    P_nli: np.ndarray  # W, receiver referred, rho applied
    span_results: tuple
    span_weights: np.ndarray  # (n_span, n_cut) gain from injection point to receiver
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def G_nli(self):
        """Receiver-referred NLI PSD at the CUT center, W/Hz."""
        return self.P_nli / self.R

    @property
    def gsnr_db(self):
        return np.array([gsnr_nli(self, c) for c in self.cut_indices])


# ---------------------------------------------------------------------------
# assembly


def assemble_gnli(p_end, gamma, P, R, K_sci, gamma_x, P_x, R_x, K_xci):
    """Vectorized NLI PSD for CUT arrays; the ``*_x`` arrays are (n_cut, n_ch)."""
    sci = gamma**2 * P**3 / R**3 * K_sci
    xci = 2.0 * P / R * np.sum(gamma_x**2 * P_x**2 / R_x**2 * K_xci, axis=-1)
    return PREFACTOR * p_end * (sci + xci)


def _cut_positions(scenario, cut):
    if cut is None:
        cuts = tuple(scenario.cut_indices)
    elif np.ndim(cut) == 0:
        cuts = (int(cut),)
    else:
        cuts = tuple(int(c) for c in cut)
    return cuts, np.array([scenario.position(c) for c in cuts], dtype=int)


def _check_alignment(scenario, spp):
    want = tuple(ch.index for ch in scenario.channels)
    if tuple(spp.channel_indices) != want:
        raise ValidationError(f"profile channels {spp.channel_indices} do not match scenario {want}")


def _finish(scenario, span_index, cuts, pos, p_end, K_sci, K_sci_err, K_xci, K_xci_err, failures):
    f, R, P, gamma, _ = scenario.arrays()
    gx = scenario.gamma_xci_matrix()[pos]
    G = assemble_gnli(p_end, gamma[pos], P[pos], R[pos], K_sci, gx, P[None, :], R[None, :], K_xci)
    return SpanResult(span_index, cuts, tuple(ch.index for ch in scenario.channels), p_end, K_sci,
                      K_sci_err, K_xci, K_xci_err, G, tuple(failures))


def _guard_failures(scenario, cuts, pos):
    _, R, *_ = scenario.arrays()
    B = scenario.beta2_matrix()[pos]
    margin = np.abs(B) / PS2_PER_KM * (R[pos][:, None] / GBAUD) ** 2 / kernels.GUARD_THRESHOLD
    margin[np.arange(len(pos)), pos] = np.inf
    idx = [ch.index for ch in scenario.channels]
    return [(cuts[a], idx[j], float(margin[a, j])) for a, j in zip(*np.nonzero(margin <= 1.0))]


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def span_nli(scenario: LinkScenario, span: Span, fitted_polys: dict, spp: SppSamples, cut=None,
             kernel="auto", span_index=0, threads=1):
    """PCFM span result for ``cut`` (an index, a list of indices, or None for all CUTs)."""
    _check_alignment(scenario, spp)
    cuts, pos = _cut_positions(scenario, cut)
    missing = [ch.index for ch in scenario.channels if ch.index not in fitted_polys]
    if missing:
        raise ValidationError(f"no fitted polynomial for channels {missing}")
    f, R, *_ = scenario.arrays()
    L = span.length
    polys = [fitted_polys[ch.index] for ch in scenario.channels]
    degree = max(p.degree for p in polys)
    C = np.zeros((len(polys), degree + 1))
    for j, p in enumerate(polys):
        C[j, : p.degree + 1] = p.scaled()
    B = scenario.beta2_matrix()
    f_rel = f[None, :] - f[pos][:, None]
    _check_overlap(f_rel, R[pos], R)
    if np.any(B[pos][f_rel != 0] == 0):
        raise kernels.SingularDispersionError("closed-form XCI is singular at zero dispersion")
    K_xci = kernels.k_xci_closed_matrix(C, L, B[pos], f_rel, R)

    failures = _guard_failures(scenario, cuts, pos)
    if failures:
        pairs = ", ".join(f"{c}<-{n}" for c, n, _ in failures)
        warnings.warn(f"XCI guard fails for channel pairs (cut<-interferer): {pairs}", kernels.GuardWarning,
                      stacklevel=2)

    if kernel == "semianalytic" or (kernel == "auto" and degree > 1):
        K_sci, K_sci_err = kernels.k_sci_semianalytic_batch(C[pos], L, B[pos, pos], R[pos])
    else:
        def sci(i):
            kin = kernels.KernelInput(polys[i], L, B[i, i], R[i], R[i])
            return kernels.k_sci(kin, kernel)

        res = _map(sci, list(pos), threads)
        K_sci = np.array([r.value for r in res])
        K_sci_err = np.array([r.error for r in res])
    p_end = spp.p_end[pos]
    return _finish(scenario, span_index, cuts, pos, p_end, K_sci, K_sci_err, K_xci, np.zeros_like(K_xci),
                   failures)


def _check_overlap(f_rel, R_cut, R):
    gap = np.abs(f_rel) - 0.5 * (R_cut[:, None] + R[None, :])
    bad = (f_rel != 0) & (gap < 0)
    if np.any(bad):
        raise ValidationError("channel bands overlap")


def oracle_span_nli(scenario: LinkScenario, span: Span, spp: SppSamples, cut=None,
                    settings=OracleSettings(), span_index=0, threads=1):
    """Reference span result: the same assembly with oracle kernels on the sampled profiles."""
    _check_alignment(scenario, spp)
    cuts, pos = _cut_positions(scenario, cut)
    f, R, *_ = scenario.arrays()
    L = span.length
    B = scenario.beta2_matrix()
    f_rel = f[None, :] - f[pos][:, None]
    _check_overlap(f_rel, R[pos], R)
    profiles = [SampledProfile(spp.z, spp.p[j]) for j in range(len(scenario.channels))]
    n_ch = len(profiles)
    jobs = [(a, a_i, j) for a, a_i in enumerate(pos) for j in range(n_ch)]

    def run(job):
        a, i, j = job
        if i == j:
            return k_sci_numeric(profiles[i], B[i, i], R[i], L, settings)
        return k_xci_numeric(profiles[j], B[i, j], f_rel[a, j], R[j], R[i], L, settings)

    out = _map(run, jobs, threads)
    K_sci = np.zeros(len(pos))
    K_sci_err = np.zeros(len(pos))
    K_xci = np.zeros((len(pos), n_ch))
    K_xci_err = np.zeros((len(pos), n_ch))
    for (a, i, j), r in zip(jobs, out):
        if i == j:
            K_sci[a], K_sci_err[a] = r.value, r.error
        else:
            K_xci[a, j], K_xci_err[a, j] = r.value, r.error
    return _finish(scenario, span_index, cuts, pos, spp.p_end[pos], K_sci, K_sci_err, K_xci, K_xci_err,
                   _guard_failures(scenario, cuts, pos))


# ---------------------------------------------------------------------------
# multi-span accumulation


def _stage_gains(scenario, span, p_end_all):
    """Post-span amplifier gain per channel (linear); transparent when unset."""
    g = span.post_span_gain_dB
    if g is None:
        return 1.0 / p_end_all
    g = np.broadcast_to(np.asarray(g, dtype=float), p_end_all.shape)
    return db_to_lin(g)


def accumulate_link(span_results, scenario: LinkScenario, p_end_all):
    """Incoherent accumulation of span NLI at the receiver.

    ``p_end_all[s]`` holds p_end of every channel in span ``s``.  NLI born in
    span s is referenced at its end and then passes amplifier s and every
    downstream span/amplifier pair, so its weight is
    G_s * prod_{t>s} p_end,t G_t.  Under transparency that is 1/p_end,s.
    """
    if len(span_results) != len(scenario.spans) or len(p_end_all) != len(scenario.spans):
        raise ValidationError("need one span result and one p_end vector per span")
    cuts = span_results[0].cut_indices
    if any(sr.cut_indices != cuts for sr in span_results):
        raise ValidationError("span results cover different CUT sets")
    pos = np.array([scenario.position(c) for c in cuts], dtype=int)
    f, R, P, *_ = scenario.arrays()
    stage = []
    amp = []
    for span, pe in zip(scenario.spans, p_end_all):
        pe = np.asarray(pe, dtype=float)
        G = _stage_gains(scenario, span, pe)
        amp.append(G[pos])
        stage.append((pe * G)[pos])
    n = len(scenario.spans)
    weights = np.empty((n, len(pos)))
    downstream = np.ones(len(pos))
    for s in range(n - 1, -1, -1):
        weights[s] = amp[s] * downstream
        downstream = downstream * stage[s]
    P_sig = P[pos] * downstream
    G_sum = sum(w * sr.G_nli for w, sr in zip(weights, span_results))
    rho = np.array([scenario.rho(c) for c in cuts])
    P_nli = rho * R[pos] * G_sum
    return LinkReport(cuts, f[pos], R[pos], P[pos], P_sig, P_nli, tuple(span_results), weights)


def gsnr_nli(report: LinkReport, cut):
    """10 log10(P_signal_rx / P_nli) in dB; +inf when the NLI is exactly zero."""
    a = report.cut_indices.index(cut)
    if report.P_nli[a] == 0:
        return math.inf
    return 10.0 * math.log10(report.P_signal_rx[a] / report.P_nli[a])


# ---------------------------------------------------------------------------
# pipelines


def link_profiles(scenario: LinkScenario):
    return [span_spp(scenario, span) for span in scenario.spans]


def run_pcfm(scenario: LinkScenario, degree=DEFAULT_DEGREE, kernel="auto", profiles=None, threads=1):
    """Profiles -> fit -> kernels -> accumulation, with per-stage wall-clock timings (s)."""
    timings = {}
    t = time.perf_counter()
    if profiles is None:
        profiles = link_profiles(scenario)
    timings["profile"] = time.perf_counter() - t
    t = time.perf_counter()
    fits = [fit_spp(spp, degree) for spp in profiles]
    timings["fit"] = time.perf_counter() - t
    t = time.perf_counter()
    results = [span_nli(scenario, span, fit, spp, kernel=kernel, span_index=s, threads=threads)
               for s, (span, fit, spp) in enumerate(zip(scenario.spans, fits, profiles))]
    timings["kernels"] = time.perf_counter() - t
    report = accumulate_link(results, scenario, [spp.p_end for spp in profiles])
    return replace(report, timings=timings)


def run_oracle(scenario: LinkScenario, settings=OracleSettings(rel_tol=1e-5), profiles=None, threads=1):
    timings = {}
    t = time.perf_counter()
    if profiles is None:
        profiles = link_profiles(scenario)
    timings["profile"] = time.perf_counter() - t
    t = time.perf_counter()
    results = [oracle_span_nli(scenario, span, spp, settings=settings, span_index=s, threads=threads)
               for s, (span, spp) in enumerate(zip(scenario.spans, profiles))]
    timings["oracle"] = time.perf_counter() - t
    report = accumulate_link(results, scenario, [spp.p_end for spp in profiles])
    return replace(report, timings=timings)


def nli_error_db(report, reference):
    """Per-CUT 10 log10(P_nli / P_nli,ref)."""
    if report.cut_indices != reference.cut_indices:
        raise ValidationError("reports cover different CUTs")
    return 10.0 * np.log10(report.P_nli / reference.P_nli)


# ---------------------------------------------------------------------------
# tables


def _fmt(x):
    return f"{x:.10g}"


def channel_table(report: LinkReport):
    buf = io.StringIO()
    buf.write("ch, f_center_GHz, P_launch_dBm, G_nli_W_per_Hz, P_nli_dBm, GSNR_nli_dB\n")
    gsnr = report.gsnr_db
    for a, c in enumerate(report.cut_indices):
        p_nli = w_to_dbm(report.P_nli[a]) if report.P_nli[a] > 0 else -math.inf
        buf.write(", ".join([str(c), _fmt(report.f_center[a] / GHZ), _fmt(w_to_dbm(report.P_launch[a])),
                             _fmt(report.G_nli[a]), _fmt(p_nli), _fmt(gsnr[a])]) + "\n")
    return buf.getvalue()


def span_table(report: LinkReport):
    buf = io.StringIO()
    buf.write("span, ch, p_end, K_sci_m2Hz2, K_sci_err, G_nli_W_per_Hz, weight_to_rx\n")
    for s, sr in enumerate(report.span_results):
        for a, c in enumerate(sr.cut_indices):
            buf.write(", ".join([str(s), str(c), _fmt(sr.p_end[a]), _fmt(sr.K_sci[a]), _fmt(sr.K_sci_err[a]),
                                 _fmt(sr.G_nli[a]), _fmt(report.span_weights[s, a])]) + "\n")
    return buf.getvalue()
