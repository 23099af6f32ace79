"""Normalized spatial power profiles p(z) on [0, L_span].

Providers return :class:`SppSamples`: a shared z grid and one row of
normalized power per channel.  A lumped loss is stored as two samples at the
same position (values just before and just after the step), so the grid is
non-decreasing rather than strictly increasing.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .domain import KM, LinkScenario, Span
from .errors import ConvergenceError, FormatError, StiffnessError, ValidationError

logger = logging.getLogger(__name__)

MIN_GRID = 64


@dataclass(frozen=True)
class SppSamples:
    z: np.ndarray
    p: np.ndarray  # shape (n_channels, len(z))
    channel_indices: tuple = ()
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "p", p)
        if not self.channel_indices:
            object.__setattr__(self, "channel_indices", tuple(range(p.shape[0])))
        if z.ndim != 1 or len(z) < MIN_GRID:
            raise ValidationError(f"SPP grid needs at least {MIN_GRID} points")
        if z[0] != 0.0:
            raise ValidationError("SPP grid must start at z=0")
        dz = np.diff(z)
        if np.any(dz < 0) or np.any((dz[1:] == 0) & (dz[:-1] == 0)) or dz[0] == 0 or dz[-1] == 0:
            raise ValidationError("SPP grid must be increasing (single duplicates mark lumped losses)")
        if p.shape != (len(self.channel_indices), len(z)):
            raise ValidationError(f"SPP matrix shape {p.shape} does not match grid/channels")
        if np.any(~(p > 0)):
            raise ValidationError("SPP values must be positive")
        if np.any(p[:, 0] != 1.0):
            raise ValidationError("SPP rows must satisfy p(0) = 1")

    @property
    def length(self):
        return float(self.z[-1])

    @property
    def p_end(self):
        return self.p[:, -1]

    def row(self, index):
        return self.p[self.channel_indices.index(index)]


def make_grid(length, n_points=512):
    return np.linspace(0.0, length, int(n_points))


def spp_flat_loss(alpha, grid):
    """p(z) = exp(-2 alpha z) with alpha the field attenuation in 1/m."""
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    return np.exp(-2.0 * alpha * np.asarray(grid, dtype=float))


@dataclass(frozen=True)
class AnalyticAlphaParams:
    alpha0: float
    alpha1: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.alpha1 != 0.0 and not self.sigma > 0:
            raise ValidationError("sigma must be > 0 when alpha1 != 0")


def spp_analytic_isrs(params, grid):
    """Exact profile for alpha(z) = alpha0 + alpha1 exp(-sigma z)."""
    z = np.asarray(grid, dtype=float)
    integral = params.alpha0 * z
    if params.alpha1 != 0.0:
        integral = integral - params.alpha1 * np.expm1(-params.sigma * z) / params.sigma
    return np.exp(-2.0 * integral)


# ---------------------------------------------------------------------------
# coupled Raman power equations


@dataclass(frozen=True)
class Pump:
    f: float
    P: float
    direction: str = "backward"
    alpha: float = 0.0


def raman_gain_matrix(freqs, CR, df_max):
    """``G[i, j]`` so that Raman transfer into wave i is ``P_i * sum_j G[i, j] P_j``.

    Triangular gain C_R*df for 0 < df <= df_max; the higher-frequency wave
    loses power scaled by the frequency ratio (photon-number conservation).
    """
    f = np.asarray(freqs, dtype=float)
    df = f[None, :] - f[:, None]  # f_j - f_i
    gain = np.where((df > 0) & (df <= df_max), CR * df, 0.0)
    loss = np.where((-df > 0) & (-df <= df_max), CR * (-df) * f[:, None] / f[None, :], 0.0)
    return gain - loss


def _rk4_sweep(z, P0, rhs_at, direction):
    """Fixed-step RK4 over the grid. ``rhs_at(k, stage, P)`` gives dP/dz."""
    n = len(z)
    out = np.empty((len(P0), n))
    order = range(n - 1) if direction > 0 else range(n - 1, 0, -1)
    idx0 = 0 if direction > 0 else n - 1
    out[:, idx0] = P0
    P = P0.copy()
    for k in order:
        k2 = k + direction
        h = z[k2] - z[k]
        k1 = rhs_at(k, 0, P)
        k_2 = rhs_at(k, 1, P + 0.5 * h * k1)
        k3 = rhs_at(k, 1, P + 0.5 * h * k_2)
        k4 = rhs_at(k, 2, P + h * k3)
        P = P + h / 6.0 * (k1 + 2.0 * k_2 + 2.0 * k3 + k4)
        if np.any(~(P > 0)):
            raise StiffnessError(f"non-positive power at z={z[k2]:.6g} m; use a finer grid")
        out[:, k2] = P
    return out


def solve_raman_powers(freqs, powers, alphas, CR, df_max, grid, pumps=(), rtol=1e-4, max_iter=50):
    """Solve the coupled signal/pump power equations on ``grid``.

    Returns ``(signals, pump_profiles)`` as absolute powers (W), one row per wave.
    Backward pumps turn the problem into a two-point BVP, solved by alternating
    forward/backward sweeps until every profile changes by less than ``rtol``.
    """
    z = np.asarray(grid, dtype=float)
    if np.any(np.diff(z) <= 0):
        raise ValidationError("Raman grid must be strictly increasing")
    powers = np.asarray(powers, dtype=float)
    if np.any(~(powers > 0)):
        raise ValidationError("channel launch powers must be > 0")
    pumps = [p if isinstance(p, Pump) else Pump(**p) for p in pumps]
    if any(p.P < 0 for p in pumps):
        raise ValidationError("pump powers must be >= 0")
    pumps = [p for p in pumps if p.P > 0]

    n_sig = len(powers)
    f_all = np.concatenate([np.asarray(freqs, dtype=float), [p.f for p in pumps]])
    a_all = np.concatenate([np.asarray(alphas, dtype=float), [p.alpha for p in pumps]])
    d_all = np.concatenate([np.ones(n_sig), [1.0 if p.direction == "forward" else -1.0 for p in pumps]])
    G = raman_gain_matrix(f_all, CR, df_max)
    fwd = np.flatnonzero(d_all > 0)
    bwd = np.flatnonzero(d_all < 0)
    z_mid = 0.5 * (z[1:] + z[:-1])

    def make_rhs(active, frozen_idx, frozen_nodes, frozen_mid):
        sign = d_all[active]
        Ga = G[np.ix_(active, active)]
        Gf = G[active][:, frozen_idx] if len(frozen_idx) else None
        aa = 2.0 * a_all[active]

        def rhs_at(k, stage, P):
            coupling = Ga @ P
            if Gf is not None:
                if stage == 0:
                    ext = frozen_nodes[:, k]
                elif stage == 2:
                    ext = frozen_nodes[:, k + (1 if sign[0] > 0 else -1)]
                else:
                    ext = frozen_mid[:, k if sign[0] > 0 else k - 1]
                coupling = coupling + Gf @ ext
            return sign * P * (coupling - aa)
        return rhs_at

    launch = np.concatenate([powers, [p.P for p in pumps]])
    # initial guess for backward waves: undepleted exponential decay from z=L
    profiles = np.empty((len(f_all), len(z)))
    profiles[bwd] = launch[bwd][:, None] * np.exp(-2.0 * a_all[bwd][:, None] * (z[-1] - z[None, :]))
    if len(bwd) == 0:
        profiles[fwd] = _rk4_sweep(z, launch[fwd], make_rhs(fwd, bwd, None, None), +1)
        return profiles[:n_sig], profiles[n_sig:]

    residual = np.inf
    profiles[fwd] = 1.0  # placeholder, overwritten by the first sweep
    for it in range(max_iter):
        old = profiles.copy()
        mid = CubicSpline(z, profiles[bwd], axis=1)(z_mid)
        profiles[fwd] = _rk4_sweep(z, launch[fwd], make_rhs(fwd, bwd, profiles[bwd], mid), +1)
        mid = CubicSpline(z, profiles[fwd], axis=1)(z_mid)
        profiles[bwd] = _rk4_sweep(z, launch[bwd], make_rhs(bwd, fwd, profiles[fwd], mid), -1)
        if it > 0:
            residual = float(np.max(np.abs(profiles - old) / old))
            logger.debug("raman fixed point iteration %d residual %.3e", it, residual)
            if residual < rtol:
                return profiles[:n_sig], profiles[n_sig:]
    raise ConvergenceError(f"Raman BVP did not converge in {max_iter} iterations", residual=residual)


def spp_raman_ode(freqs, powers, alphas, CR, df_max, grid, pumps=(), rtol=1e-4, max_iter=50,
                  channel_indices=()):
    signals, _ = solve_raman_powers(freqs, powers, alphas, CR, df_max, grid, pumps, rtol, max_iter)
    p = signals / signals[:, :1]
    p[:, 0] = 1.0
    return SppSamples(np.asarray(grid, dtype=float), p, tuple(channel_indices))


# ---------------------------------------------------------------------------
# editing and I/O


def apply_lumped_loss(spp, z_lump, loss_dB):
    """Scale p(z) by 10^(-loss/10) for z >= z_lump, duplicating the node at z_lump."""
    L = spp.length
    if not 0.0 < z_lump < L:
        raise ValidationError(f"lumped loss position {z_lump} m outside (0, {L}) m")
    if loss_dB == 0:
        return spp
    z, p = spp.z, spp.p
    hits = np.flatnonzero(z == z_lump)
    if len(hits) == 2:
        after = int(hits[1])
    elif len(hits) == 1:
        k = int(hits[0])
        z = np.insert(z, k + 1, z_lump)
        p = np.insert(p, k + 1, p[:, k], axis=1)
        after = k + 1
    else:
        k = int(np.searchsorted(z, z_lump))
        w = (z_lump - z[k - 1]) / (z[k] - z[k - 1])
        before = (1.0 - w) * p[:, k - 1] + w * p[:, k]
        z = np.insert(z, [k, k], z_lump)
        p = np.insert(p, [k, k], before[:, None], axis=1)
        after = k + 1
    p = p.copy()
    p[:, after:] *= 10.0 ** (-loss_dB / 10.0)
    return SppSamples(z, p, spp.channel_indices, spp.warnings)


def emit_profile_table(z, p, channel_indices):
    """Delimited table: header ``z_km, ch_<index>, ...``; 17 significant digits."""
    buf = io.StringIO()
    buf.write("z_km, " + ", ".join(f"ch_{i}" for i in channel_indices) + "\n")
    for k in range(len(z)):
        vals = [z[k] / KM, *p[:, k]]
        buf.write(", ".join(f"{v:.17g}" for v in vals) + "\n")
    return buf.getvalue()


def emit_spp(spp):
    return emit_profile_table(spp.z, spp.p, spp.channel_indices)


def load_external_spp(table_text):
    lines = [ln for ln in table_text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise FormatError("SPP table has no data rows")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "z_km" or len(header) < 2:
        raise FormatError("SPP table header must start with 'z_km' followed by channel columns")
    try:
        indices = tuple(int(h.removeprefix("ch_")) for h in header[1:])
    except ValueError as exc:
        raise FormatError(f"bad channel column name in header: {exc}") from exc
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise FormatError(f"non-numeric SPP entry: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise FormatError("ragged SPP table")
    z = data[:, 0] * KM
    dz = np.diff(z)
    if z[0] != 0.0 or np.any(dz < 0) or np.any((dz[1:] == 0) & (dz[:-1] == 0)):
        raise FormatError("z column must start at 0 and increase monotonically")
    p = data[:, 1:].T.copy()
    if np.any(~(p > 0)):
        raise FormatError("SPP powers must be positive")
    warnings = ()
    p0 = p[:, :1].copy()
    if np.any(np.abs(p0 - 1.0) > 1e-6):
        msg = "input SPP rows renormalized to p(0)=1"
        logger.warning(msg)
        warnings = (msg,)
    if np.any(p0 != 1.0):
        p = p / p0
        p[:, 0] = 1.0
    try:
        return SppSamples(z, p, indices, warnings)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# scenario dispatch


def span_spp(scenario: LinkScenario, span: Span):
    """Build the per-channel SPP for ``span`` according to its descriptor."""
    spec = span.spp_spec
    f, R, P, _, alpha = scenario.arrays()
    indices = tuple(ch.index for ch in scenario.channels)
    grid = make_grid(span.length, spec.grid_points)
    if spec.model == "flat":
        spp = SppSamples(grid, np.exp(-2.0 * alpha[:, None] * grid[None, :]), indices)
    elif spec.model == "isrs_analytic":
        rows = [spp_analytic_isrs(AnalyticAlphaParams(a0, a1, s), grid)
                for a0, a1, s in zip(alpha, spec.params["alpha1"], spec.params["sigma"])]
        spp = SppSamples(grid, np.array(rows), indices)
    elif spec.model == "raman":
        pumps = [Pump(**pm) for pm in spec.params.get("pumps", ())]
        spp = spp_raman_ode(f, P, alpha, spec.params["CR"], spec.params["df_max"], grid, pumps,
                            channel_indices=indices)
    elif spec.model == "external":
        with open(spec.params["path"]) as fh:
            spp = load_external_spp(fh.read())
        if set(spp.channel_indices) != set(indices):
            raise ValidationError(f"external SPP channels {spp.channel_indices} do not match scenario")
        order = [spp.channel_indices.index(i) for i in indices]
        spp = SppSamples(spp.z, spp.p[order], indices, spp.warnings)
        if not math.isclose(spp.length, span.length, rel_tol=1e-9):
            raise ValidationError(f"external SPP length {spp.length} m != span length {span.length} m")
    else:
        raise ValidationError(f"unknown SPP model {spec.model!r}")
    for ll in spec.lumped:
        spp = apply_lumped_loss(spp, ll.z, ll.loss_dB)
    return spp
