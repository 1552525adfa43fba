"""INI run configuration with typed, defaulted keys.

Every key has a default; unknown sections or keys are rejected with the
offending line number.  ``emit`` writes floats with ``repr`` so that
``parse(emit(cfg)) == cfg``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .emitter import DriveParams, EmitterParams, p0_from_flux
from .errors import FormatError, ParameterError
from .interference import HomParams, ParametricG2
from .lab.deconvolution import interpolate_g2_zero
from .lab.synthesis import SynthConfig


def _opt_float(text: str):
    t = text.strip().lower()
    if t in ("none", "inf", ""):
        return None
    return float(text)


def _knots(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError(f"knot {item!r} is not of the form x:y")
        pairs.append((float(a), float(b)))
    if not pairs:
        raise ValueError("empty knot list")
    return tuple(pairs)


def _emit_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(f"{a!r}:{b!r}" for a, b in v)
    return str(v)


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    return parse


def _seed(text):
    t = text.strip().lower()
    if t in ("none", ""):
        return None
    v = int(t, 0)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


# (parser, default); defaults are anchored on measured device values or
# documented back-solves
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "emitter": {
        "t1": (float, 0.074),
        "gamma_star": (float, 0.0),
        "fss": (float, 0.91),
        "cavity_g": (float, 6.2),
        "cavity_kappa": (float, 35.0),
        "gamma_bulk": (float, 0.2015),
    },
    "drive": {
        "nbar": (float, 0.05),
        "eta_ab": (float, 0.8696),
        "delta": (float, 0.0),
    },
    "hom": {
        "m": (float, 0.94),
        "delta": (float, 0.5),
        "t_laser_coh": (_opt_float, 200.0),
        "x": (float, 0.0),
        "detector_fwhm": (float, 59.0),
        "t_amzi": (float, 595.0),
        "g2_zero": (float, 0.0),
        "tau_dip": (_opt_float, None),
        "g2_zero_knots": (_knots, ((0.0, 0.026), (2.0, 0.1))),
        "x_knots": (_knots, ((0.5, 0.0), (4.0, 0.9702))),
    },
    "synthesis": {
        "tau_min_ps": (float, -400000.0),
        "tau_max_ps": (float, 400000.0),
        "bin_width_ps": (float, 50.0),
        "total_coincidences": (float, 1e6),
        "window_min_ns": (float, 200.0),
        "window_max_ns": (float, 400.0),
        "seed": (_seed, None),
    },
    "fit": {
        "kind": (_choice("oscillation", "x", "lifetime", "fss", "fringe"), "oscillation"),
        "exclusion_ns": (float, 0.5),
        "t_start_ps": (float, 100.0),
        "max_iter": (int, 200),
    },
}


def _defaults() -> dict[str, dict[str, Any]]:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


@dataclass
class RunConfig:
    """Resolved configuration: ``values[section][key]``."""

    values: dict[str, dict[str, Any]] = field(default_factory=_defaults)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def set(self, section: str, key: str, value) -> "RunConfig":
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ParameterError(f"unknown key [{section}] {key}")
        self.values[section][key] = value
        return self

    def to_dict(self) -> dict:
        out = {}
        for sec, kv in self.values.items():
            out[sec] = {k: ([list(p) for p in v] if isinstance(v, tuple) else v) for k, v in kv.items()}
        return out

    # builders -------------------------------------------------------------

    def emitter(self) -> EmitterParams:
        e = self["emitter"]
        return EmitterParams.from_t1(e["t1"], gamma_star=e["gamma_star"], fss=e["fss"],
                                     cavity_g=e["cavity_g"], cavity_kappa=e["cavity_kappa"],
                                     gamma_bulk=e["gamma_bulk"])

    def drive(self) -> DriveParams:
        d = self["drive"]
        return DriveParams.from_flux(self.emitter(), d["nbar"], d["eta_ab"], d["delta"])

    def p0(self) -> float:
        return float(p0_from_flux(self["drive"]["nbar"], self["drive"]["eta_ab"])[0])

    def hom(self) -> HomParams:
        h = self["hom"]
        return HomParams(m=h["m"], p0=self.p0(), delta=h["delta"], t_laser_coh=h["t_laser_coh"],
                         x=h["x"], detector_fwhm=h["detector_fwhm"], t_amzi=h["t_amzi"])

    def tau_dip(self) -> float:
        td = self["hom"]["tau_dip"]
        return self["emitter"]["t1"] if td is None else td

    def auto(self) -> ParametricG2:
        return ParametricG2(self["hom"]["g2_zero"], self.tau_dip())

    def g2_zero_of(self):
        """g2(0) versus single-laser detuning; knots on one side only are mirrored."""
        knots = self["hom"]["g2_zero_knots"]
        f = interpolate_g2_zero(knots)
        if all(k[0] >= 0 for k in knots):
            return lambda d: f(np.abs(d))
        return f

    def x_of(self):
        knots = np.array(self["hom"]["x_knots"], dtype=float)
        order = np.argsort(knots[:, 0])
        xs, ys = knots[order, 0], knots[order, 1]
        return lambda d: float(np.interp(d, xs, ys))

    def synth(self, seed: int | None = None, **kw) -> SynthConfig:
        s = self["synthesis"]
        seed = s["seed"] if seed is None else seed
        if seed is None:
            raise ParameterError("a seed is required ([synthesis] seed or --seed)")
        return SynthConfig((s["tau_min_ps"], s["tau_max_ps"]), s["bin_width_ps"],
                           s["total_coincidences"], int(seed),
                           (s["window_min_ns"], s["window_max_ns"]), **kw)


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key = value`` line, by (section, key)."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            where[(section, "")] = i
        elif section is not None:
            key = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
            where.setdefault((section, key), i)
    return where


def parse_config(text: str) -> RunConfig:
    """Parse INI text into a :class:`RunConfig`, raising :class:`FormatError`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#", ";"),
                                   delimiters=("=",), interpolation=None, default_section="\0")
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise FormatError(f"duplicate key {exc.option!r} in [{exc.section}]", line=exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise FormatError(f"duplicate section [{exc.section}]", line=exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise FormatError("key outside any section", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise FormatError("malformed line", line=lineno) from None
    lines = _key_lines(text)
    cfg = RunConfig()
    for section in cp.sections():
        if section not in SCHEMA:
            raise FormatError(f"unknown section [{section}]", line=lines.get((section, "")))
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise FormatError(f"unknown key {key!r} in [{section}]", line=lines.get((section, key)))
            parser, _ = SCHEMA[section][key]
            try:
                value = parser(raw)
            except (ValueError, TypeError) as exc:
                raise FormatError(f"bad value for [{section}] {key}: {exc}",
                                  line=lines.get((section, key))) from None
            if isinstance(value, float) and math.isnan(value):
                raise FormatError(f"[{section}] {key} is NaN", line=lines.get((section, key)))
            cfg.values[section][key] = value
    return cfg


def read_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def emit_config(cfg: RunConfig) -> str:
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key in keys:
            out.append(f"{key} = {_emit_value(cfg.values[section][key])}")
        out.append("")
    return "\n".join(out)
