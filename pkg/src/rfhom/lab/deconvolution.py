"""Detector-response deconvolution and g2(0) interpolation."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import sparse
from scipy.interpolate import PchipInterpolator
from scipy.sparse.linalg import spsolve

from ..errors import DuplicateAbscissa, FitWarning, IllConditioned, ParameterError
from ..interference import FWHM_TO_SIGMA, CorrelationTrace, TabulatedG2

RESIDUAL_TARGET = 0.02
RESIDUAL_LIMIT = 0.05
NOISELESS_AIM = 3e-4
OVERFIT = 0.7
LAMBDA_GRID = np.logspace(2, -10, 49)


def noise_level(y: np.ndarray) -> float:
    """Robust per-bin white-noise estimate from the second differences."""
    if y.size < 3:
        return 0.0
    d2 = np.diff(y, 2)
    return float(1.4826 * np.median(np.abs(d2 - np.median(d2))) / np.sqrt(6.0))


def gaussian_matrix(taus_ps: np.ndarray, fwhm_ps: float, reach: float = 8.0) -> sparse.csr_matrix:
    """Banded discrete convolution with a unit-area Gaussian.

    Rows are renormalized to sum to one so that edge bins see a truncated
    but still unit-area kernel.
    """
    bw = float(taus_ps[1] - taus_ps[0])
    sigma = fwhm_ps * FWHM_TO_SIGMA
    half = int(np.ceil(reach * sigma / bw))
    offsets = np.arange(-half, half + 1)
    kern = np.exp(-0.5 * (offsets * bw / sigma) ** 2)
    n = taus_ps.size
    mat = sparse.diags([np.full(n - abs(o), kern[i]) for i, o in enumerate(offsets)
                        if abs(o) < n], [o for o in offsets if abs(o) < n], shape=(n, n), format="csr")
    rowsum = np.asarray(mat.sum(axis=1)).ravel()
    return sparse.diags(1.0 / rowsum) @ mat


def _second_difference(n: int) -> sparse.csr_matrix:
    return sparse.diags([np.ones(n - 2), -2 * np.ones(n - 2), np.ones(n - 2)], [0, 1, 2],
                        shape=(n - 2, n), format="csr")


def deconvolve_response(trace: CorrelationTrace, fwhm_ps: float, target: float = RESIDUAL_TARGET,
                        limit: float = RESIDUAL_LIMIT, lambdas=LAMBDA_GRID) -> TabulatedG2:
    """Undo a Gaussian detector response of FWHM ``fwhm_ps``.

    Solves ``min |K g - y|^2 + lam |D2 g|^2`` with ``K`` the unit-area
    Gaussian and ``D2`` the second difference.  ``lam`` is scanned from
    strong to weak.  The first value is kept whose re-convolution residual
    over ``|tau| >= fwhm`` meets two conditions: its sup-norm, relative to
    the trace maximum, is within ``target``, and its RMS is at or below the
    estimated white noise (floored at 1e-3 of the maximum for noiseless
    input).  Raises :class:`IllConditioned` if the best residual exceeds
    ``limit``.
    """
    if fwhm_ps < 0:
        raise ParameterError("fwhm must be >= 0")
    if fwhm_ps == 0:
        return TabulatedG2(trace)
    taus, y = trace.taus, trace.values
    if taus.size < 8:
        raise ParameterError("trace too short to deconvolve")
    k = gaussian_matrix(taus, fwhm_ps)
    d2 = _second_difference(taus.size)
    ktk, kty, dtd = (k.T @ k).tocsc(), k.T @ y, (d2.T @ d2).tocsc()
    outer = np.abs(taus) >= fwhm_ps
    scale = max(float(np.max(np.abs(y))), 1e-300)

    rms_aim = max(noise_level(y), NOISELESS_AIM * scale)
    best = discrepancy = None
    for lam in lambdas:
        g = spsolve(ktk + lam * dtd, kty)
        r = (k @ g - y)[outer] if outer.any() else np.zeros(1)
        resid = float(np.max(np.abs(r))) / scale
        rms = float(np.sqrt(np.mean(r * r)))
        rms_ok = rms <= rms_aim
        if rms < OVERFIT * rms_aim and discrepancy is not None:
            # further weakening only fits noise
            best = discrepancy
            break
        if best is None or resid < best[1]:
            best = (g, resid, lam)
        if rms_ok and discrepancy is None:
            discrepancy = (g, resid, lam)
        if resid <= target and rms_ok:
            best = (g, resid, lam)
            break
    else:
        # sup target out of reach (noisy input): keep the discrepancy choice
        if discrepancy is not None:
            best = discrepancy
    g, resid, lam = best
    if resid > limit:
        raise IllConditioned(f"re-convolution residual {resid:.3g} exceeds {limit}")
    if resid > target:
        warnings.warn(f"re-convolution residual {resid:.3g} above target {target}", FitWarning,
                      stacklevel=2)
    out = trace.with_values(np.clip(g, 0.0, None))
    tab = TabulatedG2(out)
    tab.regularization = float(lam)
    tab.residual = resid
    return tab


def interpolate_g2_zero(measurements):
    """Monotone piecewise-cubic g2(0) versus detuning, held constant outside the data.

    ``measurements`` is a sequence of ``(detuning, g2_zero)`` pairs.
    """
    pts = np.asarray(measurements, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ParameterError("need at least two (detuning, g2_zero) pairs")
    order = np.argsort(pts[:, 0], kind="stable")
    xs, ys = pts[order, 0], pts[order, 1]
    # spacings below this make the slopes overflow; treat them as repeats
    span = max(xs[-1] - xs[0], 1.0)
    if np.any(np.diff(xs) <= 1e-12 * span):
        raise DuplicateAbscissa("detunings must be distinct")
    interp = PchipInterpolator(xs, ys, extrapolate=False)

    def g2_zero(delta):
        q = np.clip(np.asarray(delta, dtype=float), xs[0], xs[-1])
        v = interp(q)
        return float(v) if v.ndim == 0 else v

    g2_zero.knots = (xs.copy(), ys.copy())
    return g2_zero
