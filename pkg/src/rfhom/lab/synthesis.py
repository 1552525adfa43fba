"""Poisson-noised coincidence histograms and their normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import EmptyWindow, NegativeInput, ParameterError
from ..interference import AutoCorrelation, CorrelationTrace, HomParams, g2_hom_measured_model
from ..units import PS_PER_NS

DEFAULT_WINDOW_NS = (200.0, 400.0)
MIN_WINDOW_BINS = 50


@dataclass(frozen=True)
class SynthConfig:
    """Histogram geometry, statistics and seed.

    ``tau_range`` and ``bin_width`` are in ps; ``window`` (ns) is the
    long-delay range that receives ``total_coincidences`` expected counts.
    There is deliberately no default seed.
    """

    tau_range: tuple[float, float]
    bin_width: float
    total_coincidences: float
    rng_seed: int
    window: tuple[float, float] = DEFAULT_WINDOW_NS
    label: str = ""
    detuning: float | None = None
    flux: float | None = None

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ParameterError(f"bin_width must be > 0, got {self.bin_width!r}")
        if not self.total_coincidences > 0:
            raise ParameterError("total_coincidences must be > 0")
        if self.rng_seed is None or int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ParameterError("rng_seed must be a non-negative integer")
        if not self.tau_range[1] > self.tau_range[0]:
            raise ParameterError("tau_range must be increasing")

    def taus(self) -> np.ndarray:
        lo, hi = self.tau_range
        n = int(round((hi - lo) / self.bin_width)) + 1
        return lo + self.bin_width * np.arange(n)

    def window_ps(self) -> tuple[float, float]:
        return self.window[0] * PS_PER_NS, self.window[1] * PS_PER_NS


@dataclass(frozen=True, eq=False)
class HistogramRecord:
    """Raw coincidence counts with their normalized trace and metadata."""

    trace: CorrelationTrace
    counts: np.ndarray
    label: str = ""
    detuning: float | None = None
    flux: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != self.trace.taus.shape:
            raise ParameterError("counts and trace must have the same length")
        if not np.issubdtype(counts.dtype, np.integer):
            if np.any(counts != np.round(counts)):
                raise ParameterError("raw counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise NegativeInput("raw counts must be non-negative")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def taus(self) -> np.ndarray:
        return self.trace.taus

    @property
    def bin_width(self) -> float:
        return self.trace.bin_width

    def poisson_sigma(self) -> np.ndarray:
        """Per-bin one-sigma error of the normalized values, from sqrt(counts)."""
        scale = self.trace.values.sum() / max(self.counts.sum(), 1)
        return np.sqrt(np.maximum(self.counts, 1)) * scale


def _window_mask(taus_ps, window_ns):
    lo, hi = window_ns[0] * PS_PER_NS, window_ns[1] * PS_PER_NS
    return (taus_ps >= lo) & (taus_ps <= hi)


def expected_counts(cfg: SynthConfig, model) -> np.ndarray:
    """Per-bin Poisson means: the model scaled so the window holds ``total_coincidences``."""
    taus = cfg.taus()
    if isinstance(model, CorrelationTrace):
        if model.taus.shape != taus.shape or np.max(np.abs(model.taus - taus)) > 1e-9 * cfg.bin_width:
            raise ParameterError("tabulated model does not match the configured grid")
        shape = model.values
    else:
        shape = np.asarray(model(taus), dtype=float)
    if np.any(shape < 0) or not np.all(np.isfinite(shape)):
        raise NegativeInput("model must be finite and non-negative")
    mask = _window_mask(taus, cfg.window)
    norm = shape[mask].sum()
    if mask.sum() == 0 or norm <= 0:
        raise EmptyWindow("normalization window is empty or has zero model mean")
    return shape * (cfg.total_coincidences / norm)


def synthesize_histogram(cfg: SynthConfig, model) -> HistogramRecord:
    """Draw one seeded histogram.

    ``model`` is either a callable returning the expected g(tau) at bin
    centers given in ps, or a :class:`CorrelationTrace` on the configured grid.
    """
    lam = expected_counts(cfg, model)
    rng = np.random.default_rng(cfg.rng_seed)
    counts = rng.poisson(lam)
    taus = cfg.taus()
    raw = CorrelationTrace(cfg.bin_width, taus, counts.astype(float), cfg.window_ps())
    meta = {"rng_seed": int(cfg.rng_seed), "total_coincidences": float(cfg.total_coincidences)}
    rec = HistogramRecord(raw, counts, cfg.label, cfg.detuning, cfg.flux, meta)
    return HistogramRecord(normalize_histogram(rec, cfg.window), counts, cfg.label,
                           cfg.detuning, cfg.flux, meta)


def normalize_histogram(rec, window=DEFAULT_WINDOW_NS) -> CorrelationTrace:
    """Divide by the mean over the long-delay window ``window`` (ns, on tau > 0).

    Accepts a :class:`HistogramRecord` (uses its raw counts) or a
    :class:`CorrelationTrace` (rescales its values).
    """
    if isinstance(rec, HistogramRecord):
        taus, raw, bw = rec.taus, rec.counts.astype(float), rec.bin_width
    else:
        taus, raw, bw = rec.taus, rec.values, rec.bin_width
    mask = _window_mask(taus, window)
    if mask.sum() < MIN_WINDOW_BINS:
        raise EmptyWindow(f"window {window} ns holds {int(mask.sum())} bins, need {MIN_WINDOW_BINS}")
    mean = raw[mask].mean()
    if not mean > 0:
        raise EmptyWindow("window mean is zero")
    return CorrelationTrace(bw, taus, raw / mean, (window[0] * PS_PER_NS, window[1] * PS_PER_NS))


def hom_model(auto: AutoCorrelation, hp: HomParams) -> Callable:
    """Model callable (taus in ps) for :func:`synthesize_histogram`."""

    def model(taus_ps):
        return g2_hom_measured_model(auto, hp, taus_ps).values

    return model


def split_seeds(root_seed: int, n: int) -> list[int]:
    """Independent per-task seeds derived deterministically from one root."""
    children = np.random.SeedSequence(root_seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def synthesize_counts(taus_ps, expected, rng_seed: int, label: str = "") -> HistogramRecord:
    """Poisson counts around an arbitrary expected curve, left unnormalized.

    Used for decay and beat records where no long-delay window exists.
    The trace values are the raw counts.
    """
    taus = np.asarray(taus_ps, dtype=float)
    lam = np.asarray(expected, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise NegativeInput("expected counts must be finite and non-negative")
    if rng_seed is None:
        raise ParameterError("rng_seed is mandatory")
    counts = np.random.default_rng(rng_seed).poisson(lam)
    bw = float(taus[1] - taus[0]) if taus.size > 1 else 1.0
    trace = CorrelationTrace(bw, taus, counts.astype(float), (float(taus[0]), float(taus[-1])))
    return HistogramRecord(trace, counts, label, metadata={"rng_seed": int(rng_seed), "normalized": False})
