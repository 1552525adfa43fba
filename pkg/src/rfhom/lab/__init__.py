"""Synthetic histograms and the fits applied to them."""

from .deconvolution import deconvolve_response, interpolate_g2_zero
from .fits import FitResult, fit_fss_period, fit_lifetime, fit_oscillation, fit_x, fringe_g1
from .synthesis import (
    HistogramRecord,
    SynthConfig,
    hom_model,
    normalize_histogram,
    split_seeds,
    synthesize_counts,
    synthesize_histogram,
)

__all__ = [
    "FitResult", "HistogramRecord", "SynthConfig", "deconvolve_response", "fit_fss_period",
    "fit_lifetime", "fit_oscillation", "fit_x", "fringe_g1", "hom_model", "interpolate_g2_zero",
    "normalize_histogram", "split_seeds", "synthesize_counts", "synthesize_histogram",
]
