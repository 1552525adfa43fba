import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfhom.config import RunConfig, emit_config, parse_config
from rfhom.errors import FormatError, ParameterError
from rfhom.interference import CorrelationTrace
from rfhom.io import (
    dump_bundle,
    format_histogram,
    format_table,
    make_bundle,
    parse_histogram,
)
from rfhom.lab import HistogramRecord


def _record(counts, bw=50.0, start=-1000.0, **kw):
    counts = np.asarray(counts, dtype=np.int64)
    taus = start + bw * np.arange(counts.size)
    return HistogramRecord(CorrelationTrace(bw, taus, counts.astype(float)), counts, **kw)


@settings(max_examples=60, deadline=None)
@given(counts=st.lists(st.integers(0, 2**40), min_size=1, max_size=60),
       bw=st.floats(0.5, 500.0), start=st.floats(-1e6, 1e6),
       label=st.text(st.characters(categories=("L", "N")), max_size=8))
def test_histogram_round_trip(counts, bw, start, label):
    rec = _record(counts, bw, start, label=label, detuning=0.5, flux=0.05,
                  metadata={"rng_seed": 12, "normalized": False})
    text = format_histogram(rec)
    back = parse_histogram(text.encode(), normalize=False)
    assert np.array_equal(back.counts, rec.counts)
    assert np.array_equal(back.taus, rec.taus)
    assert back.bin_width == rec.bin_width
    assert (back.label, back.detuning, back.flux) == (label, 0.5, 0.05)
    assert back.metadata == {"rng_seed": 12, "normalized": False}
    assert format_histogram(back) == text


def test_histogram_normalizes_on_read():
    counts = np.full(9001, 2000)
    counts[0] = 1000
    rec = _record(counts, bw=50.0, start=0.0)
    back = parse_histogram(format_histogram(rec, window_ns=(200.0, 400.0)).encode())
    assert back.trace.values[0] == pytest.approx(0.5)
    assert back.counts[0] == 1000


def test_short_histogram_keeps_raw_counts():
    back = parse_histogram(format_histogram(_record([5, 6, 7])).encode())
    assert np.array_equal(back.trace.values, [5.0, 6.0, 7.0])


@pytest.mark.parametrize("bad,line,offset", [
    (b"# bin_width_ps=1.0\n0.0\t1\n1.0\tx\n", 3, 29),
    (b"# bin_width_ps=1.0\n0.0\t1\n1.0 2\n", 3, 25),
    (b"# bin_width_ps=1.0\n0.0\t-1\n", 2, 23),
    (b"# bin_width_ps=1.0\nabc\t1\n", 2, 19),
    (b"# bin_width_ps=1.0\n0.0\t1\n# late=1\n", 3, 25),
    (b"# bin_width_ps=1.0\n0.0\t1\n\xff\t2\n", 3, 25),
])
def test_histogram_format_errors(bad, line, offset):
    with pytest.raises(FormatError) as err:
        parse_histogram(bad)
    assert err.value.line == line
    assert err.value.offset == offset


def test_histogram_missing_header_and_body():
    with pytest.raises(FormatError, match="bin_width_ps"):
        parse_histogram(b"0.0\t1\n")
    with pytest.raises(FormatError, match="no data"):
        parse_histogram(b"# bin_width_ps=1.0\n")


def test_histogram_irregular_grid_rejected():
    with pytest.raises(FormatError, match="inconsistent"):
        parse_histogram(b"# bin_width_ps=1.0\n0.0\t1\n1.0\t1\n3.0\t1\n")


def test_table_and_bundle_are_stable():
    t = format_table({"a": np.array([0.1, 2.0]), "b": np.array([1, 2])})
    assert t == "a\tb\n0.1\t1.0\n2.0\t2.0\n"
    b1 = dump_bundle(make_bundle("x", {"k": 1}, {"v": np.float64(0.5)}, seed=3))
    b2 = dump_bundle(make_bundle("x", {"k": 1}, {"v": 0.5}, seed=3))
    assert b1 == b2
    assert "wall_clock_s" not in json.loads(b1)["provenance"]
    assert "wall_clock_s" in json.loads(dump_bundle(make_bundle("x", {}, {}, wall_clock=1.0)))["provenance"]


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_defaults_round_trip():
    cfg = RunConfig()
    assert parse_config(emit_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(nbar=st.floats(0, 5), m=st.floats(0, 1), seed=st.one_of(st.none(), st.integers(0, 2**64 - 1)),
       tc=st.one_of(st.none(), st.floats(1, 1e4)))
def test_config_round_trip(nbar, m, seed, tc):
    cfg = RunConfig().set("drive", "nbar", nbar).set("hom", "m", m)
    cfg.set("synthesis", "seed", seed).set("hom", "t_laser_coh", tc)
    assert parse_config(emit_config(cfg)) == cfg


def test_config_partial_file_keeps_defaults():
    cfg = parse_config("[drive]\nnbar = 0.2\n\n[fit]\nkind = lifetime  # decay fit\n")
    assert cfg["drive"]["nbar"] == 0.2
    assert cfg["fit"]["kind"] == "lifetime"
    assert cfg["hom"]["m"] == 0.94


@pytest.mark.parametrize("text,line", [
    ("[drive]\nnbar = 0.1\nflux = 2\n", 3),
    ("[drive]\n\n[oops]\n", 3),
    ("[fit]\nkind = spline\n", 2),
    ("[hom]\nm = 0.9\nx_knots = 1\n", 3),
    ("nbar = 1\n", 1),
    ("[drive]\nnbar = nan\n", 2),
    ("[synthesis]\nseed = -4\n", 2),
])
def test_config_errors_have_line_numbers(text, line):
    with pytest.raises(FormatError) as err:
        parse_config(text)
    assert err.value.line == line


def test_config_builders():
    cfg = RunConfig()
    assert cfg.p0() == pytest.approx(1 / (1 + 2 * 0.8696 * 0.05))
    assert cfg.hom().p0 == cfg.p0()
    assert cfg.tau_dip() == 0.074
    g = cfg.g2_zero_of()
    assert g(-2.0) == g(2.0) == pytest.approx(0.1)
    assert cfg.x_of()(4.0) == pytest.approx(0.9702)
    with pytest.raises(ParameterError):
        cfg.synth()
    assert cfg.synth(seed=5).rng_seed == 5
    with pytest.raises(ParameterError):
        cfg.set("drive", "bogus", 1)
