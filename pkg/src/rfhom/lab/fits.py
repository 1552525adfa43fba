"""Least-squares fits of correlation traces, decay curves and fringes.

All nonlinear fits go through :func:`_solve`, which wraps
``scipy.optimize.least_squares`` (trust-region reflective) with the
convergence contract used throughout: relative step below 1e-8 or
relative cost decrease below 1e-12.  Uncertainties are the square roots
of the diagonal of ``(J^T J)^-1`` scaled by the reduced chi-square.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..errors import FitWarning, ParameterError
from ..interference import CorrelationTrace, HomParams, coherence_envelope, g2_hom_measured_model
from ..units import PS_PER_NS, TWO_PI

XTOL = 1e-8
FTOL = 1e-12
DEFAULT_MAX_ITER = 200

NON_CONVERGENCE = "NonConvergence"
BOUNDARY_HIT = "BoundaryHit"
PHASE_UNRESOLVED = "PhaseUnresolved"
PORTS_NOT_ANTICORRELATED = "PortsNotAntiCorrelated"


@dataclass
class FitResult:
    """Named estimates with one-sigma errors and solver diagnostics."""

    params: dict[str, float]
    errors: dict[str, float]
    rss: float
    converged: bool
    n_iter: int
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.errors.items():
            if not (v >= 0 or np.isnan(v)):
                raise ParameterError(f"negative uncertainty for {k}")

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "errors": {k: float(v) for k, v in self.errors.items()},
            "rss": float(self.rss),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "flags": list(self.flags),
            "extra": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                      for k, v in self.extra.items()},
        }


def _covariance(jac: np.ndarray, rss: float, n: int, p: int) -> np.ndarray:
    jtj = jac.T @ jac
    dof = max(n - p, 1)
    return np.linalg.pinv(jtj) * (rss / dof)


def _solve(residual, x0, names, jac="2-point", bounds=(-np.inf, np.inf),
           max_iter=DEFAULT_MAX_ITER, x_scale=1.0, weighted=False) -> FitResult:
    """Run the damped least-squares solver and package a :class:`FitResult`.

    When ``weighted`` is true the residuals are already divided by known
    per-point sigmas and the covariance is not rescaled.
    """
    res = least_squares(residual, np.asarray(x0, dtype=float), jac=jac, bounds=bounds,
                        method="trf", xtol=XTOL, ftol=FTOL, gtol=None,
                        max_nfev=max_iter, x_scale=x_scale)
    r = res.fun
    rss = float(r @ r)
    n, p = r.size, len(names)
    if weighted:
        cov = np.linalg.pinv(res.jac.T @ res.jac)
    else:
        cov = _covariance(res.jac, rss, n, p)
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    converged = res.status > 0
    flags = () if converged else (NON_CONVERGENCE,)
    if not converged:
        warnings.warn(f"fit did not converge in {max_iter} evaluations", FitWarning, stacklevel=3)
    return FitResult(dict(zip(names, map(float, res.x))), dict(zip(names, map(float, errs))),
                     rss, converged, int(res.nfev), flags, {"n_points": n})


def _dominant_frequency(y: np.ndarray, dt: float, fmin: float = 0.0) -> float:
    """Peak of the periodogram with parabolic refinement, in cycles per unit of ``dt``."""
    y = np.asarray(y, dtype=float) - np.mean(y)
    n = y.size
    pad = 1 << int(np.ceil(np.log2(4 * n)))
    spec = np.abs(np.fft.rfft(y * np.hanning(n), pad))
    freqs = np.fft.rfftfreq(pad, dt)
    spec[freqs <= fmin] = 0.0
    k = int(np.argmax(spec))
    if 0 < k < spec.size - 1:
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den != 0 else 0.0
        return float((k + shift) * (freqs[1] - freqs[0]))
    return float(freqs[k])


def _linear_phase(t, y, w, freq, envelope=None):
    """Fit ``c + a cos + b sin`` at fixed frequency; returns (c, amplitude, phase)."""
    env = np.ones_like(t) if envelope is None else envelope
    arg = TWO_PI * freq * t
    design = np.column_stack([np.ones_like(t), env * np.cos(arg), env * np.sin(arg)])
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    c, a, b = coef
    return float(c), float(np.hypot(a, b)), float(np.arctan2(-b, a))


def _weights(sigma, n, y=None):
    if sigma is None:
        return np.ones(n), False
    if isinstance(sigma, str):
        if sigma != "poisson" or y is None:
            raise ParameterError(f"unknown sigma mode {sigma!r}")
        # relative Poisson weights; absolute scale comes from the reduced chi-square
        floor = max(float(np.max(y)) * 1e-4, 1e-300)
        return 1.0 / np.sqrt(np.maximum(y, floor)), False
    s = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    if np.any(s <= 0):
        raise ParameterError("sigma must be positive")
    return 1.0 / s, True


def _wrap(phi: float) -> float:
    return float((phi + np.pi) % TWO_PI - np.pi)


# ---------------------------------------------------------------------------
# oscillation
# ---------------------------------------------------------------------------


def fit_oscillation(trace: CorrelationTrace, init: dict | None = None, exclusion_ns: float = 0.5,
                    t_coh: float | None = None, sigma=None,
                    max_iter: int = DEFAULT_MAX_ITER) -> FitResult:
    """Fit ``c - A E(tau) cos(2 pi delta tau + phi)`` away from zero delay.

    ``E`` is the laser-coherence envelope with time constant ``t_coh`` (ns,
    None for no envelope), so that ``A`` estimates ``m p0^2 / 2`` directly.
    Delays with ``|tau| < exclusion_ns`` are ignored.  Missing entries of
    ``init`` (keys ``amplitude``, ``delta``, ``phase_offset``, ``offset``)
    are estimated from the periodogram and a fixed-frequency linear fit.
    ``delta`` is in GHz and ``phase_offset`` in radians; the sign convention
    keeps ``amplitude >= 0``.
    """
    init = dict(init or {})
    t_all = trace.taus / PS_PER_NS
    sel = np.abs(t_all) >= exclusion_ns
    t, y = t_all[sel], trace.values[sel]
    w_all, weighted = _weights(sigma, trace.taus.size)
    w = w_all[sel]
    if t.size < 8:
        raise ParameterError("too few points outside the exclusion zone")
    env = coherence_envelope(t, t_coh)

    if "delta" in init:
        f0 = float(init["delta"])
    else:
        f0 = _dominant_frequency(trace.values, trace.bin_width / PS_PER_NS,
                                 fmin=2.0 / (t_all[-1] - t_all[0]))
    c0, a0, ph0 = _linear_phase(t, y, w, f0, env)
    # model uses minus sign: c - A cos(...) = c + A cos(... + pi)
    x0 = [init.get("amplitude", a0), f0, init.get("phase_offset", _wrap(ph0 + np.pi)),
          init.get("offset", c0)]

    def resid(p):
        a, f, ph, c = p
        return w * (c - a * env * np.cos(TWO_PI * f * t + ph) - y)

    def jac(p):
        a, f, ph, c = p
        arg = TWO_PI * f * t + ph
        cs, sn = np.cos(arg), np.sin(arg)
        return (w[:, None] * np.column_stack([
            -env * cs, a * env * sn * TWO_PI * t, a * env * sn, np.ones_like(t)]))

    names = ("amplitude", "delta", "phase_offset", "offset")
    res = _solve(resid, x0, names, jac=jac, max_iter=max_iter, weighted=weighted)
    if res.params["amplitude"] < 0:
        res.params["amplitude"] = -res.params["amplitude"]
        res.params["phase_offset"] += np.pi
    res.params["phase_offset"] = _wrap(res.params["phase_offset"])
    res.extra.update(exclusion_ns=float(exclusion_ns), t_coh=t_coh)
    return res


# ---------------------------------------------------------------------------
# x mixing weight
# ---------------------------------------------------------------------------


def fit_x(trace: CorrelationTrace, auto, fixed: HomParams, sigma=None,
          boundary_tol: float = 1e-9) -> FitResult:
    """Mixing weight ``x`` in [0, 1] from a measured HOM trace.

    The measured model is affine in ``x``, so the bounded least-squares
    problem is solved exactly from the two end-member curves and clipped.
    The model is not rescaled, so ``trace`` must be normalized where the
    model is flat; near zero detuning the slow laser envelope still reaches
    the usual 200-400 ns window and biases ``x`` upward.
    """
    taus = trace.taus
    bw = trace.bin_width
    lo = g2_hom_measured_model(auto, fixed.replace(x=0.0), taus, bin_width=bw).values
    hi = g2_hom_measured_model(auto, fixed.replace(x=1.0), taus, bin_width=bw).values
    w, weighted = _weights(sigma, taus.size)
    d = (hi - lo) * w
    r0 = (trace.values - lo) * w
    denom = float(d @ d)
    if denom <= 0:
        raise ParameterError("trace carries no information on x (end members coincide)")
    x_free = float(d @ r0) / denom
    x = min(max(x_free, 0.0), 1.0)
    resid = r0 - x * d
    rss = float(resid @ resid)
    n = taus.size
    var = 1.0 / denom if weighted else rss / max(n - 1, 1) / denom
    flags = ()
    if x <= boundary_tol or x >= 1.0 - boundary_tol:
        flags = (BOUNDARY_HIT,)
        warnings.warn(f"x estimate at boundary ({x:.3g})", FitWarning, stacklevel=2)
    return FitResult({"x": x}, {"x": float(np.sqrt(var))}, rss, True, 1, flags,
                     {"x_unconstrained": x_free, "n_points": n})


# ---------------------------------------------------------------------------
# lifetime and fine-structure beats
# ---------------------------------------------------------------------------


def _tail(decay: CorrelationTrace, t_start_ps: float, sigma):
    t = decay.taus
    sel = t >= t_start_ps
    if sel.sum() < 5:
        raise ParameterError("decay region has fewer than 5 points")
    w, weighted = _weights(sigma, t.size, decay.values)
    return t[sel], decay.values[sel], w[sel], weighted


def _exp_guess(t, y):
    nb = max(3, t.size // 10)
    b = float(np.median(y[-nb:]))
    a = float(y[0] - b)
    if a == 0:
        a = float(np.max(y) - b) or 1.0
    area = float(np.sum(y - b) * (t[1] - t[0]))
    tau = area / a if area / a > 0 else 0.2 * (t[-1] - t[0])
    return a, min(tau, t[-1] - t[0]), b


def fit_lifetime(decay: CorrelationTrace, t_start_ps: float = 100.0, sigma="poisson",
                 init: dict | None = None, max_iter: int = DEFAULT_MAX_ITER) -> FitResult:
    """Single-exponential decay ``b + A exp(-(t - t_start) / T1)`` on the tail.

    Times are those of the trace (ps).  ``amplitude`` is referred to
    ``t_start_ps`` to keep the problem well conditioned.  ``sigma`` is a
    per-bin error array, None for uniform weights, or ``"poisson"`` for
    weights proportional to ``1/sqrt(value)``.
    """
    t, y, w, weighted = _tail(decay, t_start_ps, sigma)
    s = t - t[0]
    a0, tau0, b0 = _exp_guess(s, y)
    init = dict(init or {})
    x0 = [init.get("t1", tau0), init.get("amplitude", a0), init.get("background", b0)]

    def resid(p):
        tau, a, b = p
        return w * (b + a * np.exp(-s / tau) - y)

    def jac(p):
        tau, a, b = p
        e = np.exp(-s / tau)
        return w[:, None] * np.column_stack([a * e * s / (tau * tau), e, np.ones_like(s)])

    res = _solve(resid, x0, ("t1", "amplitude", "background"), jac=jac,
                 bounds=([1e-12, -np.inf, -np.inf], np.inf), max_iter=max_iter,
                 x_scale=np.abs(np.asarray(x0)) + 1e-12, weighted=weighted)
    res.extra.update(t_start_ps=float(t[0]))
    return res


def fit_fss_period(trace: CorrelationTrace, t_start_ps: float = 100.0, sigma="poisson",
                   init: dict | None = None, max_iter: int = DEFAULT_MAX_ITER) -> FitResult:
    """Damped beat ``b + A exp(-s/T) (1 + V cos(2 pi s / P + phi))`` with ``s = t - t_start``.

    Returns ``period`` (ps) and ``fss = 1/period`` in cyclic GHz, with
    first-order error propagation for the latter.
    """
    t, y, w, weighted = _tail(trace, t_start_ps, sigma)
    s = t - t[0]
    init = dict(init or {})
    # stage 1: plain exponential envelope
    a0, tau0, b0 = _exp_guess(s, y)
    env_fit = least_squares(lambda p: w * (p[2] + p[1] * np.exp(-s / p[0]) - y),
                            [tau0, a0, b0], bounds=([1e-12, -np.inf, -np.inf], np.inf),
                            method="trf", x_scale=np.abs([tau0, a0, b0]) + 1e-12)
    tau1, a1, b1 = env_fit.x
    envelope = a1 * np.exp(-s / tau1)
    ratio = (y - b1) / np.where(np.abs(envelope) > 1e-300, envelope, 1e-300)
    # beats are only visible where the envelope dominates the noise
    keep = s <= min(5.0 * tau1, s[-1])
    if "period" in init:
        f0 = 1.0 / float(init["period"])
    else:
        f0 = _dominant_frequency(ratio[keep], s[1] - s[0], fmin=1.0 / max(s[keep][-1], s[1]))
    _, v0, ph0 = _linear_phase(s[keep], ratio[keep], np.abs(envelope[keep]), f0)
    x0 = [init.get("period", 1.0 / f0), a1, tau1, init.get("visibility", min(v0, 1.0)), ph0, b1]

    def model(p):
        per, a, tau, v, ph, b = p
        return b + a * np.exp(-s / tau) * (1.0 + v * np.cos(TWO_PI * s / per + ph))

    def jac(p):
        per, a, tau, v, ph, b = p
        e = np.exp(-s / tau)
        arg = TWO_PI * s / per + ph
        cs, sn = np.cos(arg), np.sin(arg)
        mod = 1.0 + v * cs
        return w[:, None] * np.column_stack([
            a * e * v * sn * TWO_PI * s / (per * per),
            e * mod,
            a * e * mod * s / (tau * tau),
            a * e * cs,
            -a * e * v * sn,
            np.ones_like(s),
        ])

    names = ("period", "amplitude", "decay", "visibility", "phase", "background")
    res = _solve(lambda p: w * (model(p) - y), x0, names, jac=jac,
                 bounds=([1e-12, -np.inf, 1e-12, -np.inf, -np.inf, -np.inf], np.inf),
                 max_iter=max_iter, x_scale=np.abs(np.asarray(x0)) + 1e-3, weighted=weighted)
    per, dper = res.params["period"], res.errors["period"]
    res.params["phase"] = _wrap(res.params["phase"])
    res.params["fss"] = PS_PER_NS / per
    res.errors["fss"] = PS_PER_NS * dper / (per * per)
    return res


# ---------------------------------------------------------------------------
# first-order coherence from interferometer fringes
# ---------------------------------------------------------------------------


def fringe_g1(counts_c, counts_d, sigma=None, init: dict | None = None,
              max_iter: int = DEFAULT_MAX_ITER, resolve_sigmas: float = 3.0) -> FitResult:
    """Fringe visibility from the two anti-phase outputs of an interferometer.

    Fits ``c_k = B_c (1 + V cos(w k + phi))`` and ``d_k = B_d (1 - V cos(w k + phi))``
    jointly over the sample index ``k``; ``g1_magnitude = V``, which equals
    ``(max - min)/(max + min)`` of each fitted fringe.  Without ``sigma``
    the residuals are Poisson-weighted, first by the counts and then by
    the fitted model.  If the
    fitted fringe amplitude is within ``resolve_sigmas`` of the per-sample
    residual noise, the phase is deemed unresolved and ``g1_magnitude = 0``.
    """
    c = np.asarray(counts_c, dtype=float)
    d = np.asarray(counts_d, dtype=float)
    if c.shape != d.shape or c.ndim != 1 or c.size < 8:
        raise ParameterError("need two equal-length fringe records of at least 8 samples")
    if np.any(c < 0) or np.any(d < 0):
        raise ParameterError("counts must be non-negative")
    k = np.arange(c.size, dtype=float)
    if sigma is None:
        sc, sd = np.sqrt(np.maximum(c, 1.0)), np.sqrt(np.maximum(d, 1.0))
        weighted = False
    else:
        s = np.asarray(sigma, dtype=float)
        sc, sd = (s[0], s[1]) if s.ndim == 2 else (s, s)
        sc = np.broadcast_to(sc, c.shape)
        sd = np.broadcast_to(sd, d.shape)
        weighted = True
    bc0, bd0 = max(c.mean(), 1e-12), max(d.mean(), 1e-12)
    contrast = 0.5 * (c / bc0 - d / bd0)
    port_corr = float(np.corrcoef(c, d)[0, 1]) if c.std() > 0 and d.std() > 0 else 0.0

    init = dict(init or {})
    if "omega" in init:
        om0 = float(init["omega"])
    else:
        om0 = TWO_PI * _dominant_frequency(contrast, 1.0, fmin=0.5 / c.size)
    _, v0, ph0 = _linear_phase(k, contrast, np.ones_like(k), om0 / TWO_PI)

    noise_free = np.ptp(contrast) == 0
    if noise_free:
        # constant records: no fringe to fit
        return _unresolved(c, d, bc0, bd0, port_corr, 0.0)

    x0 = [min(init.get("g1_magnitude", v0), 1.0), om0, init.get("phase", ph0), bc0, bd0]

    def resid(p):
        v, om, ph, bc, bd = p
        cs = np.cos(om * k + ph)
        return np.concatenate([(bc * (1 + v * cs) - c) / sc, (bd * (1 - v * cs) - d) / sd])

    def jac(p):
        v, om, ph, bc, bd = p
        arg = om * k + ph
        cs, sn = np.cos(arg), np.sin(arg)
        zc, zd = np.zeros_like(k), np.zeros_like(k)
        jc = np.column_stack([bc * cs, -bc * v * sn * k, -bc * v * sn, 1 + v * cs, zc]) / sc[:, None]
        jd = np.column_stack([-bd * cs, bd * v * sn * k, bd * v * sn, zd, 1 - v * cs]) / sd[:, None]
        return np.vstack([jc, jd])

    names = ("g1_magnitude", "omega", "phase", "base_c", "base_d")
    res = _solve(resid, x0, names, jac=jac, max_iter=max_iter, weighted=weighted)
    if sigma is None:
        # second pass with Poisson errors from the fitted model, not the data
        v, om, ph, bc, bd = (res.params[n] for n in names)
        cs = np.cos(om * k + ph)
        sc = np.sqrt(np.maximum(bc * (1 + v * cs), 1.0))
        sd = np.sqrt(np.maximum(bd * (1 - v * cs), 1.0))
        x1 = [res.params[n] for n in names]
        res = _solve(resid, x1, names, jac=jac, max_iter=max_iter, weighted=weighted)
    if res.params["g1_magnitude"] < 0:
        res.params["g1_magnitude"] *= -1
        res.params["phase"] += np.pi
    res.params["phase"] = _wrap(res.params["phase"])
    v, bc, bd = res.params["g1_magnitude"], res.params["base_c"], res.params["base_d"]
    om, ph = res.params["omega"], res.params["phase"]
    cs = np.cos(om * k + ph)
    noise = np.sqrt(np.mean(np.concatenate([c - bc * (1 + v * cs), d - bd * (1 - v * cs)]) ** 2))
    amplitude = v * 0.5 * (bc + bd)
    res.extra.update(port_correlation=port_corr, fringe_amplitude=float(amplitude),
                     noise_per_sample=float(noise))
    if amplitude <= resolve_sigmas * noise:
        return _unresolved(c, d, bc, bd, port_corr, float(amplitude), res)
    if port_corr > 0:
        res.flags += (PORTS_NOT_ANTICORRELATED,)
        warnings.warn("fringe records are not anti-correlated", FitWarning, stacklevel=2)
    return res


def _unresolved(c, d, bc, bd, port_corr, amplitude, base: FitResult | None = None) -> FitResult:
    warnings.warn("fringe amplitude below noise; phase unresolved", FitWarning, stacklevel=3)
    if base is None:
        rss = float(np.sum((c - bc) ** 2) + np.sum((d - bd) ** 2))
        base = FitResult({"base_c": float(bc), "base_d": float(bd)},
                         {"base_c": 0.0, "base_d": 0.0}, rss, True, 0)
    base.params["g1_magnitude"] = 0.0
    base.errors.setdefault("g1_magnitude", 0.0)
    base.flags += (PHASE_UNRESOLVED,)
    base.extra.update(port_correlation=port_corr, fringe_amplitude=amplitude)
    return base
