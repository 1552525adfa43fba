"""Closed-form HOM / HBT correlation observables and the measured-data model.

Delays passed to the ``g2_*`` functions are in ns and detunings in GHz
(cyclic), so the oscillating factor is ``cos(2 pi delta tau)``.  Sampled
traces (:class:`CorrelationTrace`) carry their delays in ps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .emitter import DEVICE_T1_NS, DEVICE_T_LASER_COH_NS
from .errors import DivisionDomain, GridTooCoarse, NegativeInput, ParameterError
from .units import PS_PER_NS, TWO_PI

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEVICE_M = 0.94
DEVICE_FWHM_PS = 59.0
DEVICE_T_AMZI_NS = 595.0
DEFAULT_WINDOW_PS = (200_000.0, 400_000.0)


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    """A g(tau) curve sampled at uniformly spaced bin centers.

    ``taus`` and ``bin_width`` are in ps, as is ``normalization_window``
    (the delay range whose mean was scaled to one).
    """

    bin_width: float
    taus: np.ndarray
    values: np.ndarray
    normalization_window: tuple[float, float] = DEFAULT_WINDOW_PS

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "normalization_window", tuple(float(w) for w in self.normalization_window))
        if not self.bin_width > 0:
            raise ParameterError(f"bin_width must be > 0, got {self.bin_width!r}")
        if taus.ndim != 1 or taus.shape != values.shape or taus.size == 0:
            raise ParameterError("taus and values must be equal-length, non-empty 1-d arrays")
        if taus.size > 1:
            steps = np.diff(taus)
            if np.any(steps <= 0):
                raise ParameterError("taus must be strictly increasing")
            if np.max(np.abs(steps - self.bin_width)) > 1e-9 * self.bin_width:
                raise ParameterError("taus must be uniformly spaced by bin_width")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise NegativeInput("trace values must be finite and non-negative")

    def __len__(self):
        return self.taus.size

    @classmethod
    def from_range(cls, tau_min_ps, tau_max_ps, bin_width_ps, values=None, **kwargs):
        n = int(round((tau_max_ps - tau_min_ps) / bin_width_ps)) + 1
        taus = tau_min_ps + bin_width_ps * np.arange(n)
        if values is None:
            values = np.ones(n)
        return cls(bin_width_ps, taus, values, **kwargs)

    def with_values(self, values) -> "CorrelationTrace":
        return CorrelationTrace(self.bin_width, self.taus, values, self.normalization_window)

    def crop(self, lo_ps: float, hi_ps: float) -> "CorrelationTrace":
        """Sub-trace with ``lo_ps <= tau <= hi_ps``."""
        sel = (self.taus >= lo_ps) & (self.taus <= hi_ps)
        if not sel.any():
            raise ParameterError("crop range holds no bins")
        return CorrelationTrace(self.bin_width, self.taus[sel], self.values[sel], self.normalization_window)

    def window_mask(self, window_ps=None) -> np.ndarray:
        lo, hi = self.normalization_window if window_ps is None else window_ps
        return (self.taus >= lo) & (self.taus <= hi)


# ---------------------------------------------------------------------------
# auto-correlation g2(tau)
# ---------------------------------------------------------------------------


class AutoCorrelation:
    """An even, non-negative g2(tau); call with delays in ns."""

    def __call__(self, tau_ns):
        raise NotImplementedError

    def breakpoints(self, lo_ns: float, hi_ns: float) -> np.ndarray:
        """Delays in [lo, hi] (ns) where g2 is not smooth."""
        return np.array([0.0]) if lo_ns <= 0.0 <= hi_ns else np.empty(0)


@dataclass(frozen=True)
class ParametricG2(AutoCorrelation):
    """``1 - (1 - g2_zero) exp(-|tau| / tau_dip)``, tau_dip in ns."""

    g2_zero: float = 0.0
    tau_dip: float = DEVICE_T1_NS

    def __post_init__(self):
        if not 0.0 <= self.g2_zero <= 1.0:
            raise ParameterError(f"g2_zero must lie in [0, 1], got {self.g2_zero!r}")
        if not self.tau_dip > 0:
            raise ParameterError(f"tau_dip must be > 0, got {self.tau_dip!r}")

    def __call__(self, tau_ns):
        tau = np.abs(np.asarray(tau_ns, dtype=float))
        return 1.0 - (1.0 - self.g2_zero) * np.exp(-tau / self.tau_dip)


class TabulatedG2(AutoCorrelation):
    """Linear interpolation of a measured trace.

    A trace holding only non-negative delays is mirrored; beyond the sampled
    range the edge values are held.
    """

    def __init__(self, trace: CorrelationTrace):
        self.trace = trace
        self._mirror = trace.taus[0] >= 0

    def __call__(self, tau_ns):
        tau_ps = np.asarray(tau_ns, dtype=float) * PS_PER_NS
        if self._mirror:
            tau_ps = np.abs(tau_ps)
        return np.interp(tau_ps, self.trace.taus, self.trace.values)

    def breakpoints(self, lo_ns, hi_ns):
        knots = self.trace.taus / PS_PER_NS
        if self._mirror:
            knots = np.concatenate([-knots, knots])
        knots = np.concatenate([knots, [0.0]])
        return np.unique(knots[(knots >= lo_ns) & (knots <= hi_ns)])


class GeometricMeanG2(AutoCorrelation):
    """Pointwise ``sqrt(g_plus * g_minus)`` of two auto-correlations."""

    def __init__(self, plus: AutoCorrelation, minus: AutoCorrelation):
        self.plus = plus
        self.minus = minus

    def __call__(self, tau_ns):
        a, b = self.plus(tau_ns), self.minus(tau_ns)
        if np.any(a < 0) or np.any(b < 0):
            raise NegativeInput("auto-correlation evaluated negative")
        return np.sqrt(a * b)

    def breakpoints(self, lo_ns, hi_ns):
        return np.union1d(self.plus.breakpoints(lo_ns, hi_ns), self.minus.breakpoints(lo_ns, hi_ns))


def _eval_g2(auto, tau_ns):
    if isinstance(auto, (int, float, np.floating)):
        return np.full(np.shape(tau_ns), float(auto))
    return np.asarray(auto(tau_ns), dtype=float)


def combine_hbt_geometric(g2_plus: AutoCorrelation, g2_minus: AutoCorrelation) -> AutoCorrelation:
    """Combine the auto-correlations measured under +delta/2 and -delta/2 drive."""
    if isinstance(g2_plus, TabulatedG2) and isinstance(g2_minus, TabulatedG2):
        a, b = g2_plus.trace, g2_minus.trace
        if a.taus.shape != b.taus.shape or np.any(a.taus != b.taus):
            raise ParameterError("tabulated auto-correlations must share a grid")
        if np.any(a.values < 0) or np.any(b.values < 0):
            raise NegativeInput("auto-correlation values must be >= 0")
        return TabulatedG2(a.with_values(np.sqrt(a.values * b.values)))
    tabulated = (isinstance(g2_plus, TabulatedG2), isinstance(g2_minus, TabulatedG2))
    if any(tabulated):
        raise ParameterError("cannot combine a tabulated with a parametric auto-correlation")
    for g in (g2_plus, g2_minus):
        if isinstance(g, ParametricG2) and g.g2_zero < 0:
            raise NegativeInput("g2_zero must be >= 0")
    return GeometricMeanG2(g2_plus, g2_minus)


# ---------------------------------------------------------------------------
# closed-form HOM correlations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomParams:
    """Parameters of a dual-color HOM measurement.

    ``delta`` is the mutual detuning in GHz, ``t_laser_coh`` and ``t_amzi``
    are in ns (``t_laser_coh=None`` disables the coherence envelope) and
    ``detector_fwhm`` is in ps.
    """

    m: float = DEVICE_M
    p0: float = 0.92
    delta: float = 0.0
    t_laser_coh: float | None = DEVICE_T_LASER_COH_NS
    x: float = 0.0
    detector_fwhm: float = DEVICE_FWHM_PS
    t_amzi: float = DEVICE_T_AMZI_NS

    def __post_init__(self):
        for name in ("m", "p0", "x"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {v!r}")
        if not self.delta >= 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta!r}")
        if self.t_laser_coh is not None and not self.t_laser_coh > 0:
            raise ParameterError(f"t_laser_coh must be > 0, got {self.t_laser_coh!r}")
        if not self.detector_fwhm >= 0:
            raise ParameterError(f"detector_fwhm must be >= 0, got {self.detector_fwhm!r}")
        if not self.t_amzi > 0:
            raise ParameterError(f"t_amzi must be > 0, got {self.t_amzi!r}")

    def replace(self, **changes) -> "HomParams":
        from dataclasses import replace

        return replace(self, **changes)


def _check_unit(name, v):
    if np.any(np.asarray(v) < 0) or np.any(np.asarray(v) > 1):
        raise ParameterError(f"{name} must lie in [0, 1]")


def g2_hom_single_photon(m, delta, tau):
    """HOM correlation when each input carries at most one photon."""
    _check_unit("m", m)
    return 0.5 * (1.0 - m * np.cos(TWO_PI * delta * np.asarray(tau, dtype=float)))


def g2_hom_steady(m, p0, delta, tau):
    """HOM correlation for |tau| >> T1: ``1 - m p0^2 cos(2 pi delta tau) / 2``."""
    _check_unit("m", m)
    _check_unit("p0", p0)
    return 1.0 - 0.5 * m * p0 * p0 * np.cos(TWO_PI * delta * np.asarray(tau, dtype=float))


def coherence_envelope(tau, t_laser_coh):
    """``exp(-|tau| / t_laser_coh)``; identically one when ``t_laser_coh`` is None/inf."""
    tau = np.asarray(tau, dtype=float)
    if t_laser_coh is None or math.isinf(t_laser_coh):
        return np.ones_like(tau)
    return np.exp(-np.abs(tau) / t_laser_coh)


def g2_hom_full(auto, m, p0, delta, tau, t_laser_coh=None):
    """HOM correlation at arbitrary delay, weighting both limits by g2(tau).

    ``auto`` is an :class:`AutoCorrelation` (or a constant).  Every
    indistinguishability-bearing term is multiplied by the laser-coherence
    envelope.
    """
    _check_unit("m", m)
    _check_unit("p0", p0)
    tau = np.asarray(tau, dtype=float)
    g2 = _eval_g2(auto, tau)
    mc = m * coherence_envelope(tau, t_laser_coh) * np.cos(TWO_PI * delta * tau)
    return g2 * (1.0 - 0.5 * p0 * p0 * mc) + (1.0 - g2) * 0.5 * (1.0 - mc)


def visibility(g2_perp, g2_par):
    """Two-photon interference visibility ``(g2_perp - g2_par) / g2_perp``."""
    g2_perp = np.asarray(g2_perp, dtype=float)
    if np.any(g2_perp <= 0):
        raise DivisionDomain("g2_perp must be > 0")
    v = (g2_perp - np.asarray(g2_par, dtype=float)) / g2_perp
    return float(v) if v.ndim == 0 else v


def g2_hom_side_feature(g2_zero=None, tau_local=0.0, auto: AutoCorrelation | None = None,
                        t_amzi: float = DEVICE_T_AMZI_NS):
    """Correlation near the AMZI side delay, where no interference survives.

    Averages the four source-time pairings of the two detections.  ``auto``
    takes precedence; otherwise a :class:`ParametricG2` with ``g2_zero`` is
    used.  ``tau_local`` (ns) is the offset from ``t_amzi``.
    """
    if auto is None:
        if g2_zero is None:
            raise ParameterError("need g2_zero or auto")
        auto = ParametricG2(g2_zero=g2_zero)
    tau = np.asarray(tau_local, dtype=float)
    if np.any(np.abs(tau) > 0.1 * t_amzi):
        raise ParameterError("tau_local must be much smaller than t_amzi")
    val = 0.25 * (auto(t_amzi + tau) + auto(2.0 * t_amzi) + auto(t_amzi - tau) + auto(tau))
    return float(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# detector response
# ---------------------------------------------------------------------------


def _panel_nodes(edges: np.ndarray, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def gaussian_convolve(func: Callable, taus_ns, fwhm_ns: float, panel_ns: float,
                      breakpoints=(), order: int = 4, chunk: int = 256) -> np.ndarray:
    """Convolve ``func`` with a unit-area Gaussian, sampled at ``taus_ns``.

    Direct composite Gauss-Legendre quadrature in the argument of ``func``:
    panels of width ``panel_ns`` aligned to multiples of ``panel_ns`` and
    split at ``breakpoints`` (kinks of ``func``), ``order`` nodes per panel.
    ``func`` is evaluated once on all nodes.  The kernel is cut at 8 sigma
    and renormalized so its discrete area is exactly one.
    """
    taus = np.asarray(taus_ns, dtype=float)
    if fwhm_ns == 0:
        return np.asarray(func(taus), dtype=float)
    sigma = fwhm_ns * FWHM_TO_SIGMA
    reach = 8.0 * sigma
    lo, hi = taus.min() - reach, taus.max() + reach
    lattice = panel_ns * np.arange(math.floor(lo / panel_ns), math.ceil(hi / panel_ns) + 1)
    bps = np.asarray(breakpoints, dtype=float)
    edges = np.unique(np.concatenate([lattice, bps[(bps > lattice[0]) & (bps < lattice[-1])]]))
    keep = np.concatenate([[True], np.diff(edges) > 1e-9 * panel_ns])
    edges = edges[keep]
    nodes, weights = _panel_nodes(edges, order)
    fvals = np.asarray(func(nodes), dtype=float) * weights

    order_idx = np.argsort(taus, kind="stable")
    sorted_taus = taus[order_idx]
    out = np.empty_like(sorted_taus)
    inv2s2 = 0.5 / (sigma * sigma)
    for start in range(0, sorted_taus.size, chunk):
        t = sorted_taus[start:start + chunk]
        j0 = np.searchsorted(nodes, t[0] - reach, side="left")
        j1 = np.searchsorted(nodes, t[-1] + reach, side="right")
        diff = t[:, None] - nodes[None, j0:j1]
        k = np.exp(-inv2s2 * diff * diff)
        k[np.abs(diff) > reach] = 0.0
        out[start:start + chunk] = (k @ fvals[j0:j1]) / (k @ weights[j0:j1])
    result = np.empty_like(out)
    result[order_idx] = out
    return result


def _grid_bin_width(tau_grid_ps, bin_width):
    if bin_width is not None:
        return float(bin_width)
    if tau_grid_ps.size < 2:
        raise ParameterError("bin_width is required for a single-point grid")
    return float(tau_grid_ps[1] - tau_grid_ps[0])


def measured_integrand(auto, hp: HomParams) -> Callable:
    """Unconvolved ``x g2(tau) + (1 - x) g2_hom_full(tau)`` as a function of ns."""

    def f(tau_ns):
        g2 = _eval_g2(auto, tau_ns)
        hom = g2_hom_full(auto, hp.m, hp.p0, hp.delta, tau_ns, hp.t_laser_coh)
        return hp.x * g2 + (1.0 - hp.x) * hom

    return f


def g2_hom_measured_model(auto, hp: HomParams, tau_grid, bin_width=None,
                          normalization_window=DEFAULT_WINDOW_PS, order: int = 4,
                          refine: int = 1) -> CorrelationTrace:
    """HOM trace as registered by detectors of Gaussian time response.

    Mixes a fraction ``hp.x`` of the auto-correlation into the balanced HOM
    correlation and convolves with a unit-area Gaussian of FWHM
    ``hp.detector_fwhm``.  ``tau_grid`` (ps) must be uniform.  Quadrature
    panels are ``min(bin_width, FWHM/4) / refine`` wide with ``order`` nodes
    each.
    """
    taus = np.asarray(tau_grid, dtype=float)
    bw = _grid_bin_width(taus, bin_width)
    fwhm = hp.detector_fwhm
    if fwhm > 0 and bw > fwhm:
        raise GridTooCoarse(f"bin width {bw} ps exceeds detector FWHM {fwhm} ps")
    f = measured_integrand(auto, hp)
    taus_ns = taus / PS_PER_NS
    if fwhm == 0:
        values = f(taus_ns)
    else:
        panel = min(bw, fwhm / 4.0) / refine / PS_PER_NS
        reach = 8.0 * fwhm * FWHM_TO_SIGMA / PS_PER_NS
        lo, hi = taus_ns.min() - reach, taus_ns.max() + reach
        bps = auto.breakpoints(lo, hi) if isinstance(auto, AutoCorrelation) else [0.0]
        values = gaussian_convolve(f, taus_ns, fwhm / PS_PER_NS, panel, bps, order=order)
    return CorrelationTrace(bw, taus, np.maximum(values, 0.0), normalization_window)


def zero_delay_correlations(auto, hp: HomParams) -> tuple[float, float, float]:
    """``(g2_perp(0), g2_par(0), V(0))`` through the measured-data model.

    The orthogonal setting uses ``m = 0``; everything else is taken from ``hp``.
    """
    bw = hp.detector_fwhm / 4.0 if hp.detector_fwhm > 0 else 1.0
    grid = np.array([0.0])
    perp = g2_hom_measured_model(auto, hp.replace(m=0.0), grid, bin_width=bw).values[0]
    par = g2_hom_measured_model(auto, hp, grid, bin_width=bw).values[0]
    return float(perp), float(par), visibility(perp, par)


@dataclass
class DetuningModel:
    """Zero-delay visibility versus mutual detuning.

    ``g2_zero_of`` maps a single-laser detuning (GHz) to g2(0) and
    ``x_of`` maps the mutual detuning to the mixing weight.  Each mutual
    detuning ``delta`` drives the lasers at +/- delta/2, whose
    auto-correlations are combined geometrically.
    """

    hp: HomParams = field(default_factory=HomParams)
    g2_zero_of: Callable[[float], float] = lambda d: 0.0
    x_of: Callable[[float], float] = lambda d: 0.0
    tau_dip: float = DEVICE_T1_NS

    def auto_at(self, delta: float) -> AutoCorrelation:
        gp = ParametricG2(float(self.g2_zero_of(+0.5 * delta)), self.tau_dip)
        gm = ParametricG2(float(self.g2_zero_of(-0.5 * delta)), self.tau_dip)
        if gp == gm:
            return gp
        return combine_hbt_geometric(gp, gm)

    def evaluate(self, delta: float) -> tuple[float, float, float]:
        hp = self.hp.replace(delta=float(delta), x=float(self.x_of(delta)))
        return zero_delay_correlations(self.auto_at(delta), hp)
