import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfhom.errors import (
    DuplicateAbscissa,
    EmptyWindow,
    FitWarning,
    IllConditioned,
    NegativeInput,
    ParameterError,
)
from rfhom.interference import CorrelationTrace, HomParams, ParametricG2, g2_hom_measured_model
from rfhom.lab import (
    HistogramRecord,
    SynthConfig,
    deconvolve_response,
    fit_fss_period,
    fit_lifetime,
    fit_oscillation,
    fit_x,
    fringe_g1,
    hom_model,
    interpolate_g2_zero,
    normalize_histogram,
    split_seeds,
    synthesize_counts,
    synthesize_histogram,
)
from rfhom.lab.fits import BOUNDARY_HIT, NON_CONVERGENCE, PHASE_UNRESOLVED

# short traces: +/-20 ns with the normalization window at 10-20 ns
SMALL = dict(tau_range=(-20000.0, 20000.0), bin_width=20.0, window=(10.0, 20.0))


def small_cfg(seed=1, total=1e6, **kw):
    return SynthConfig(total_coincidences=total, rng_seed=seed, **{**SMALL, **kw})


def flat(taus):
    return np.ones_like(taus)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def test_synth_config_validation():
    with pytest.raises(ParameterError):
        small_cfg(bin_width=0.0)
    with pytest.raises(ParameterError):
        small_cfg(total=0.0)
    with pytest.raises(ParameterError):
        SynthConfig((0.0, 1.0), 1.0, 10.0, None)


def test_flat_model_normalizes_to_one():
    rec = synthesize_histogram(small_cfg(), flat)
    n_win = np.count_nonzero(rec.trace.window_mask())
    per_bin = 1e6 / n_win
    sigma_mean = 1.0 / np.sqrt(per_bin * rec.taus.size)
    assert abs(rec.trace.values.mean() - 1.0) < 3 * sigma_mean + 1e-12
    assert rec.counts.dtype == np.int64


def test_window_gets_requested_total():
    cfg = small_cfg(total=5e5)
    from rfhom.lab.synthesis import expected_counts
    lam = expected_counts(cfg, flat)
    mask = (cfg.taus() >= 10000) & (cfg.taus() <= 20000)
    assert lam[mask].sum() == pytest.approx(5e5)


def test_same_seed_identical_bytes():
    a = synthesize_histogram(small_cfg(seed=42), flat)
    b = synthesize_histogram(small_cfg(seed=42), flat)
    c = synthesize_histogram(small_cfg(seed=43), flat)
    assert a.counts.tobytes() == b.counts.tobytes()
    assert a.trace.values.tobytes() == b.trace.values.tobytes()
    assert a.counts.tobytes() != c.counts.tobytes()


def test_split_seeds_deterministic_and_distinct():
    s = split_seeds(7, 5)
    assert s == split_seeds(7, 5)
    assert len(set(s)) == 5
    assert split_seeds(8, 5) != s


def test_tabulated_model_must_match_grid():
    cfg = small_cfg()
    tr = CorrelationTrace.from_range(-1000, 1000, 20.0)
    with pytest.raises(ParameterError):
        synthesize_histogram(cfg, tr)


def test_negative_model_rejected():
    with pytest.raises(NegativeInput):
        synthesize_histogram(small_cfg(), lambda t: np.full_like(t, -1.0))


def test_histogram_record_checks_counts():
    tr = CorrelationTrace.from_range(0, 40, 20.0)
    with pytest.raises(NegativeInput):
        HistogramRecord(tr, np.array([1, -1, 2]))
    with pytest.raises(ParameterError):
        HistogramRecord(tr, np.array([1.5, 1, 2]))


def test_normalize_examples():
    taus = np.arange(0.0, 400001.0, 1000.0)
    counts = np.full(taus.size, 2000)
    counts[0] = 1000
    tr = CorrelationTrace(1000.0, taus, counts.astype(float))
    rec = HistogramRecord(tr, counts)
    out = normalize_histogram(rec)
    assert out.values[0] == pytest.approx(0.5)
    assert np.all(out.values[1:] == 1.0)


def test_normalize_needs_window_bins():
    tr = CorrelationTrace.from_range(-1000, 1000, 20.0)
    with pytest.raises(EmptyWindow):
        normalize_histogram(tr)
    zero = CorrelationTrace.from_range(0, 20000, 20.0, values=np.zeros(1001))
    with pytest.raises(EmptyWindow):
        normalize_histogram(zero, (10.0, 20.0))


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(0.1, 1e4), seed=st.integers(0, 2**32))
def test_normalize_idempotent(scale, seed):
    rng = np.random.default_rng(seed)
    tr = CorrelationTrace.from_range(0, 20000, 20.0, values=scale * rng.uniform(0.5, 1.5, 1001))
    once = normalize_histogram(tr, (10.0, 20.0))
    twice = normalize_histogram(once, (10.0, 20.0))
    assert np.allclose(once.values, twice.values, rtol=1e-14, atol=0)


# ---------------------------------------------------------------------------
# oscillation fit
# ---------------------------------------------------------------------------


def _osc_trace(a=0.4, delta=0.5, noise=None, seed=0):
    taus = np.arange(-20000.0, 20001.0, 20.0)
    t = taus / 1000
    y = 1.0 - a * np.cos(2 * np.pi * delta * t)
    if noise:
        y = y + np.random.default_rng(seed).normal(0, noise, y.size)
    return CorrelationTrace(20.0, taus, np.clip(y, 0, None), (10000.0, 20000.0))


def test_oscillation_noiseless_unbiased():
    r = fit_oscillation(_osc_trace())
    assert r.converged
    assert abs(r["amplitude"] - 0.4) < 1e-9
    assert abs(r["delta"] - 0.5) < 1e-10
    assert abs(r["phase_offset"]) < 1e-8


def test_oscillation_with_envelope():
    taus = np.arange(-20000.0, 20001.0, 20.0)
    t = taus / 1000
    y = 1.0 - 0.35 * np.exp(-np.abs(t) / 5.0) * np.cos(2 * np.pi * 0.7 * t)
    tr = CorrelationTrace(20.0, taus, y)
    assert fit_oscillation(tr, t_coh=5.0)["amplitude"] == pytest.approx(0.35, abs=1e-9)


def test_oscillation_eq5_model_round_trip():
    hp = HomParams(m=0.94, p0=0.92, delta=0.5, t_laser_coh=None)
    rec = synthesize_histogram(small_cfg(seed=5), hom_model(ParametricG2(0.0), hp))
    r = fit_oscillation(rec.trace)
    assert r["delta"] == pytest.approx(0.5, rel=0.01)
    assert r["amplitude"] == pytest.approx(0.5 * 0.94 * 0.92**2, rel=0.02)


def test_oscillation_flat_trace_amplitude_consistent_with_zero():
    tr = _osc_trace(a=0.0, noise=0.01, seed=3)
    r = fit_oscillation(tr, init={"delta": 0.5})
    assert r["amplitude"] < 3 * r.errors["amplitude"]


def test_oscillation_nonconvergence_reported():
    with pytest.warns(FitWarning):
        r = fit_oscillation(_osc_trace(noise=0.05), max_iter=1)
    assert not r.converged
    assert NON_CONVERGENCE in r.flags
    assert np.isfinite(r["amplitude"])


def test_oscillation_exclusion_zone():
    r = fit_oscillation(_osc_trace(), exclusion_ns=5.0)
    assert r.extra["n_points"] == 2 * 751
    with pytest.raises(ParameterError):
        fit_oscillation(_osc_trace(), exclusion_ns=1e6)


# ---------------------------------------------------------------------------
# x fit
# ---------------------------------------------------------------------------

AUTO = ParametricG2(0.05)
HPX = HomParams(m=0.94, p0=0.92, delta=0.5)
X_TAUS = np.arange(-3000.0, 3001.0, 20.0)


def _x_trace(x):
    return g2_hom_measured_model(AUTO, HPX.replace(x=x), X_TAUS)


@pytest.mark.parametrize("x", [0.1, 0.3, 0.75])
def test_fit_x_noiseless(x):
    r = fit_x(_x_trace(x), AUTO, HPX)
    assert r["x"] == pytest.approx(x, abs=1e-10)
    assert r.flags == ()


def test_fit_x_boundary():
    with pytest.warns(FitWarning):
        r = fit_x(_x_trace(0.0), AUTO, HPX)
    assert BOUNDARY_HIT in r.flags
    assert r["x"] <= 0.01


def test_fit_x_clips_to_unit_interval():
    tr = _x_trace(1.0)
    bumped = tr.with_values(tr.values + 0.5 * (tr.values - _x_trace(0.0).values))
    with pytest.warns(FitWarning):
        r = fit_x(bumped, AUTO, HPX)
    assert r["x"] == 1.0
    assert r.extra["x_unconstrained"] > 1.0


def test_fit_x_noisy_round_trip():
    cfg = SynthConfig((-5000.0, 400000.0), 50.0, 1e6, 99)
    hp = HPX.replace(x=0.3)
    model = g2_hom_measured_model(AUTO, hp, cfg.taus())
    rec = synthesize_histogram(cfg, model)
    r = fit_x(rec.trace.crop(-5000, 5000), AUTO, HPX)
    assert r["x"] == pytest.approx(0.3, abs=0.02)


# ---------------------------------------------------------------------------
# lifetime and beats
# ---------------------------------------------------------------------------

T_PS = np.arange(0.0, 2000.0, 4.0)


@pytest.mark.parametrize("t1", [74.0, 148.0])
def test_lifetime_noiseless_exact(t1):
    tr = CorrelationTrace(4.0, T_PS, 50 + 1e4 * np.exp(-T_PS / t1))
    r = fit_lifetime(tr)
    assert r["t1"] == pytest.approx(t1, rel=1e-6)
    assert r["background"] == pytest.approx(50.0, rel=1e-6)


def test_lifetime_noisy():
    rec = synthesize_counts(T_PS, 20 + 1e4 * np.exp(-T_PS / 74.0), 7)
    r = fit_lifetime(rec.trace)
    assert r["t1"] == pytest.approx(74.0, abs=2.0)
    assert all(v >= 0 for v in r.errors.values())


def test_lifetime_start_delay_excludes_early_bins():
    y = 50 + 1e4 * np.exp(-T_PS / 74.0)
    y[:20] = 5e4  # laser background near zero delay
    r = fit_lifetime(CorrelationTrace(4.0, T_PS, y), t_start_ps=100.0)
    assert r["t1"] == pytest.approx(74.0, rel=1e-6)


def _beats(period, n=1000):
    t = np.arange(0.0, 4.0 * n, 4.0)
    y = 20 + 1e4 * np.exp(-t / 800) * (1 + 0.6 * np.cos(2 * np.pi * t / period + 0.3))
    return CorrelationTrace(4.0, t, y)


@pytest.mark.parametrize("period,fss", [(1150.0, 0.8696), (1099.0, 0.9099)])
def test_fss_period(period, fss):
    r = fit_fss_period(_beats(period), t_start_ps=0.0)
    assert r["period"] == pytest.approx(period, rel=1e-6)
    assert r["fss"] == pytest.approx(fss, abs=1e-4)


def test_fss_doubling_halves_splitting():
    a = fit_fss_period(_beats(800.0), t_start_ps=0.0)
    b = fit_fss_period(_beats(1600.0, n=2000), t_start_ps=0.0)
    assert b["fss"] == pytest.approx(a["fss"] / 2, rel=1e-6)


# ---------------------------------------------------------------------------
# fringes
# ---------------------------------------------------------------------------

K = np.arange(400)


def test_fringe_perfect():
    c = 1000 * (1 + np.cos(0.07 * K))
    d = 1000 * (1 - np.cos(0.07 * K))
    r = fringe_g1(c, d)
    assert r["g1_magnitude"] == pytest.approx(1.0, abs=1e-9)
    assert r.extra["port_correlation"] < 0


def test_fringe_noisy_target():
    rng = np.random.default_rng(1)
    c = rng.poisson(1000 * (1 + 0.991 * np.cos(0.07 * K + 0.2)))
    d = rng.poisson(900 * (1 - 0.991 * np.cos(0.07 * K + 0.2)))
    r = fringe_g1(c, d)
    assert r["g1_magnitude"] == pytest.approx(0.991, abs=0.008)


def test_fringe_constant_unresolved():
    with pytest.warns(FitWarning):
        r = fringe_g1(np.full(100, 500.0), np.full(100, 500.0))
    assert r["g1_magnitude"] == 0.0
    assert PHASE_UNRESOLVED in r.flags


def test_fringe_noise_only_unresolved():
    rng = np.random.default_rng(2)
    with pytest.warns(FitWarning):
        r = fringe_g1(rng.poisson(np.full(400, 500.0)), rng.poisson(np.full(400, 500.0)))
    assert r["g1_magnitude"] == 0.0


def test_fringe_input_checks():
    with pytest.raises(ParameterError):
        fringe_g1([1, 2, 3], [1, 2])


# ---------------------------------------------------------------------------
# deconvolution and interpolation
# ---------------------------------------------------------------------------


def test_deconvolution_round_trip():
    auto = ParametricG2(0.026)
    taus = np.arange(-5000.0, 5001.0, 10.0)
    conv = g2_hom_measured_model(auto, HomParams(x=1.0), taus)
    tab = deconvolve_response(conv, 59.0)
    far = np.abs(taus) > 100
    assert np.max(np.abs(tab(taus / 1000) - auto(taus / 1000))[far]) < 0.02
    assert tab.residual <= 0.02


def test_deconvolution_identity_and_flat():
    tr = CorrelationTrace.from_range(-2000, 2000, 10.0, values=np.linspace(0.5, 1.5, 401))
    assert np.array_equal(deconvolve_response(tr, 0.0)(tr.taus / 1000), tr.values)
    flat_tr = CorrelationTrace.from_range(-2000, 2000, 10.0)
    out = deconvolve_response(flat_tr, 59.0)
    assert np.allclose(out.trace.values, 1.0, atol=1e-10)


def test_deconvolution_ill_conditioned():
    rng = np.random.default_rng(0)
    tr = CorrelationTrace.from_range(-2000, 2000, 10.0, values=rng.poisson(100, 401) / 100)
    with pytest.raises(IllConditioned):
        deconvolve_response(tr, 59.0)


def test_interpolate_examples():
    f = interpolate_g2_zero([(0, 0.026), (2, 0.10)])
    assert f(0) == 0.026
    assert f(2) == 0.10
    assert f(-3) == 0.026 and f(10) == 0.10
    assert 0.026 <= f(1.3) <= 0.10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.floats(0, 1)), min_size=2, max_size=8,
                unique_by=lambda p: p[0]), st.floats(-6, 6))
def test_interpolate_stays_within_bracket(points, q):
    points = [(k / 10, y) for k, y in points]
    f = interpolate_g2_zero(points)
    xs = sorted(p[0] for p in points)
    ys = dict(points)
    for x in xs:
        assert f(x) == pytest.approx(ys[x], abs=1e-12)
    i = np.searchsorted(xs, q)
    if 0 < i < len(xs):
        lo, hi = sorted((ys[xs[i - 1]], ys[xs[i]]))
        assert lo - 1e-12 <= f(q) <= hi + 1e-12


def test_interpolate_errors():
    with pytest.raises(DuplicateAbscissa):
        interpolate_g2_zero([(1, 0.1), (1, 0.2)])
    with pytest.raises(DuplicateAbscissa):
        interpolate_g2_zero([(0.0, 0.0), (2.2e-313, 1.0)])
    with pytest.raises(ParameterError):
        interpolate_g2_zero([(1, 0.1)])


def test_warnings_do_not_leak_from_clean_fits():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit_oscillation(_osc_trace())
        fit_lifetime(CorrelationTrace(4.0, T_PS, 50 + 1e4 * np.exp(-T_PS / 74.0)))
