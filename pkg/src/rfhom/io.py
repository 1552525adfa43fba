"""Histogram text files, column tables and JSON result bundles.

Histogram layout::

    # bin_width_ps=50.0
    # window_ns=200.0,400.0
    # label=par
    -400000.0<TAB>1012
    ...

Header lines start with ``#`` and hold ``key=value`` pairs; the body has
two tab-separated columns ``tau_ps`` and the integer count.  Floats are
written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError
from .interference import CorrelationTrace
from .lab.synthesis import DEFAULT_WINDOW_NS, HistogramRecord, normalize_histogram
from .units import PS_PER_NS

_FLOAT_KEYS = {"detuning_ghz": "detuning", "nbar": "flux"}
_RESERVED = {"bin_width_ps", "window_ns", "label", *_FLOAT_KEYS}


def _fmt(v) -> str:
    return repr(float(v))


def format_histogram(rec: HistogramRecord, window_ns=None) -> str:
    window = window_ns
    if window is None:
        lo, hi = rec.trace.normalization_window
        window = (lo / PS_PER_NS, hi / PS_PER_NS)
    lines = [f"# bin_width_ps={_fmt(rec.bin_width)}",
             f"# window_ns={_fmt(window[0])},{_fmt(window[1])}",
             f"# label={rec.label}"]
    if rec.detuning is not None:
        lines.append(f"# detuning_ghz={_fmt(rec.detuning)}")
    if rec.flux is not None:
        lines.append(f"# nbar={_fmt(rec.flux)}")
    for k in sorted(rec.metadata):
        if k in _RESERVED:
            continue
        v = rec.metadata[k]
        if "\n" in str(v) or "=" in str(k):
            raise FormatError(f"metadata {k!r} cannot be written on one header line")
        lines.append(f"# {k}={v}")
    body = [f"{_fmt(t)}\t{int(c)}" for t, c in zip(rec.taus, rec.counts)]
    return "\n".join(lines + body) + "\n"


def write_histogram(path, rec: HistogramRecord, window_ns=None) -> None:
    Path(path).write_bytes(format_histogram(rec, window_ns).encode("utf-8"))


def _parse_meta_value(v: str):
    if v in ("True", "False"):
        return v == "True"
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def parse_histogram(data: bytes, normalize: bool = True) -> HistogramRecord:
    """Parse histogram bytes; errors carry the byte offset and line number.

    With ``normalize`` the trace is divided by its window mean when the
    window holds enough bins, otherwise the raw counts are kept as values.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    header: dict[str, str] = {}
    taus, counts = [], []
    offset = 0
    for lineno, raw in enumerate(data.split(b"\n"), start=1):
        start = offset
        offset += len(raw) + 1
        try:
            line = raw.decode("utf-8").rstrip("\r")
        except UnicodeDecodeError as exc:
            raise FormatError("invalid utf-8", offset=start + exc.start, line=lineno) from None
        if not line.strip():
            continue
        if line.startswith("#"):
            if taus:
                raise FormatError("header line after data", offset=start, line=lineno)
            body = line[1:].strip()
            if "=" not in body:
                continue  # free-form comment
            key, _, value = body.partition("=")
            header[key.strip()] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise FormatError(f"expected 2 tab-separated columns, got {len(cols)}",
                              offset=start, line=lineno)
        try:
            tau = float(cols[0])
        except ValueError:
            raise FormatError(f"bad tau value {cols[0]!r}", offset=start, line=lineno) from None
        try:
            cnt = int(cols[1])
        except ValueError:
            raise FormatError(f"bad count {cols[1]!r}", offset=start + len(cols[0]) + 1,
                              line=lineno) from None
        if cnt < 0:
            raise FormatError("negative count", offset=start + len(cols[0]) + 1, line=lineno)
        taus.append(tau)
        counts.append(cnt)
    if "bin_width_ps" not in header:
        raise FormatError("missing bin_width_ps header", offset=0, line=1)
    if not taus:
        raise FormatError("no data rows", offset=len(data), line=None)
    try:
        bw = float(header["bin_width_ps"])
        window = tuple(float(v) for v in header.get(
            "window_ns", f"{DEFAULT_WINDOW_NS[0]},{DEFAULT_WINDOW_NS[1]}").split(","))
        if len(window) != 2:
            raise ValueError("window_ns needs two values")
    except ValueError as exc:
        raise FormatError(f"bad header value: {exc}", offset=0, line=None) from None
    taus_a = np.array(taus)
    counts_a = np.array(counts, dtype=np.int64)
    try:
        raw = CorrelationTrace(bw, taus_a, counts_a.astype(float),
                               (window[0] * PS_PER_NS, window[1] * PS_PER_NS))
    except ValueError as exc:
        raise FormatError(f"inconsistent data: {exc}", offset=0, line=None) from None
    meta = {k: _parse_meta_value(v) for k, v in header.items() if k not in _RESERVED}
    extra = {attr: float(header[k]) for k, attr in _FLOAT_KEYS.items() if k in header}
    rec = HistogramRecord(raw, counts_a, header.get("label", ""), metadata=meta, **extra)
    if normalize:
        try:
            trace = normalize_histogram(rec, window)
        except ValueError:
            return rec
        return HistogramRecord(trace, counts_a, rec.label, rec.detuning, rec.flux, meta)
    return rec


def read_histogram(path, normalize: bool = True) -> HistogramRecord:
    return parse_histogram(Path(path).read_bytes(), normalize=normalize)


def format_table(columns: dict[str, np.ndarray]) -> str:
    """Tab-separated table with a header row; floats written with ``repr``."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    lines = ["\t".join(names)]
    for row in zip(*arrays):
        lines.append("\t".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_table(path, columns: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(format_table(columns).encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def make_bundle(command: str, config: dict, outputs: dict, seed=None, wall_clock=None) -> dict:
    """Result bundle; wall-clock time is included only when supplied."""
    prov = {"seed": seed}
    if wall_clock is not None:
        prov["wall_clock_s"] = wall_clock
    return {
        "software": {"name": "rfhom", "version": __version__},
        "command": command,
        "config": config,
        "provenance": prov,
        "outputs": outputs,
    }


def dump_bundle(bundle: dict) -> str:
    return json.dumps(_jsonable(bundle), indent=2, sort_keys=True) + "\n"


def write_bundle(path, bundle: dict) -> None:
    Path(path).write_bytes(dump_bundle(bundle).encode("utf-8"))


def read_bundle(path) -> dict:
    return json.loads(Path(path).read_text("utf-8"))
