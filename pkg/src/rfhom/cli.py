"""Command-line entry point: ``rfhom {verify,simulate,fit,sweep}``.

Exit codes: 0 success, 1 verification or fit failure, 2 I/O, format or
configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, emit_config, read_config
from .errors import FitWarning, RfHomError
from .interference import DetuningModel, g2_hom_measured_model, zero_delay_correlations
from .io import dump_bundle, format_table, make_bundle, read_histogram, write_histogram, write_table
from .lab import fits
from .lab.synthesis import split_seeds, synthesize_histogram
from .verify import run_all

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class CliError(Exception):
    """I/O or input problem reported with exit status 2."""


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {p}")
    return read_config(p)


def _resolve_seed(cfg: RunConfig, seed):
    if seed is not None:
        cfg.set("synthesis", "seed", int(seed))
    if cfg["synthesis"]["seed"] is None:
        raise CliError("a seed is required: pass --seed or set [synthesis] seed")
    return cfg["synthesis"]["seed"]


def _out_dir(path) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit(out: Path | None, name: str, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_bytes(text.encode("utf-8"))


def _bundle(args, command, cfg, outputs, seed, t0):
    wall = round(time.perf_counter() - t0, 3) if args.record_time else None
    return make_bundle(command, cfg.to_dict(), outputs, seed=seed, wall_clock=wall)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    results = run_all()
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("verify: all suites passed" if ok else "verify: FAILED")
    out = _out_dir(args.out)
    if out is not None:
        outputs = {r.name: {"max_error": r.max_error, "tolerance": r.tolerance, "passed": r.passed,
                            "n_cases": r.n_cases} for r in results}
        _emit(out, "bundle.json", dump_bundle(_bundle(args, "verify", RunConfig(), outputs, None, t0)))
    return EXIT_OK if ok else EXIT_FAIL


def simulate_traces(cfg: RunConfig) -> dict[str, np.ndarray]:
    """Noiseless parallel, orthogonal and HBT traces plus the visibility trace."""
    taus = cfg.synth(seed=0).taus()
    hp, auto = cfg.hom(), cfg.auto()
    par = g2_hom_measured_model(auto, hp, taus).values
    perp = g2_hom_measured_model(auto, hp.replace(m=0.0), taus).values
    hbt = g2_hom_measured_model(auto, hp.replace(x=1.0), taus).values
    with np.errstate(divide="ignore", invalid="ignore"):
        vis = np.where(perp > 0, (perp - par) / np.where(perp > 0, perp, 1.0), 0.0)
    return {"tau_ps": taus, "g2_par": par, "g2_perp": perp, "g2_hbt": hbt, "visibility": vis}


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args.config)
    seed = _resolve_seed(cfg, args.seed)
    out = _out_dir(args.out)
    if out is None:
        raise CliError("simulate needs --out <directory>")
    cols = simulate_traces(cfg)
    write_table(out / "traces.tsv", cols)
    hp = cfg.hom()
    outputs = {"p0": hp.p0, "files": {}}
    for label, column, child in zip(("par", "perp", "hbt"), ("g2_par", "g2_perp", "g2_hbt"),
                                    split_seeds(seed, 3)):
        sc = cfg.synth(seed=child, label=label, detuning=hp.delta, flux=cfg["drive"]["nbar"])
        model = cols[column]
        rec = synthesize_histogram(sc, lambda _t, m=model: m)
        name = f"hist_{label}.txt"
        write_histogram(out / name, rec)
        outputs["files"][name] = {"seed": child, "sha256": _digest(out / name)}
    outputs["files"]["traces.tsv"] = {"sha256": _digest(out / "traces.tsv")}
    perp0, par0, v0 = zero_delay_correlations(cfg.auto(), hp)
    outputs["zero_delay"] = {"g2_perp": perp0, "g2_par": par0, "visibility": v0}
    (out / "config.ini").write_text(emit_config(cfg), encoding="utf-8")
    _emit(out, "bundle.json", dump_bundle(_bundle(args, "simulate", cfg, outputs, seed, t0)))
    print(f"simulate: wrote traces.tsv, hist_par.txt, hist_perp.txt, hist_hbt.txt to {out}")
    return EXIT_OK


def _read_hist(path):
    p = Path(path)
    if not p.is_file():
        raise CliError(f"histogram file not found: {p}")
    return read_histogram(p)


def run_fit(cfg: RunConfig, paths) -> fits.FitResult:
    kind = cfg["fit"]["kind"]
    fc = cfg["fit"]
    if kind == "fringe":
        if len(paths) != 2:
            raise CliError("fringe fit needs two histogram files (ports c and d)")
        c, d = (_read_hist(p) for p in paths)
        return fits.fringe_g1(c.counts, d.counts, max_iter=fc["max_iter"])
    if len(paths) != 1:
        raise CliError(f"{kind} fit takes one histogram file")
    rec = _read_hist(paths[0])
    if kind == "oscillation":
        res = fits.fit_oscillation(rec.trace, exclusion_ns=fc["exclusion_ns"],
                                   t_coh=cfg["hom"]["t_laser_coh"], max_iter=fc["max_iter"])
        hp = cfg.hom()
        res.extra["expected_amplitude"] = 0.5 * hp.m * hp.p0 ** 2
        return res
    if kind == "x":
        return fits.fit_x(rec.trace, cfg.auto(), cfg.hom())
    if kind == "lifetime":
        return fits.fit_lifetime(rec.trace, t_start_ps=fc["t_start_ps"], max_iter=fc["max_iter"])
    return fits.fit_fss_period(rec.trace, t_start_ps=fc["t_start_ps"], max_iter=fc["max_iter"])


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args.config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        res = run_fit(cfg, args.histogram)
    outputs = {"kind": cfg["fit"]["kind"], "inputs": [str(p) for p in args.histogram],
               "fit": res.to_dict()}
    text = dump_bundle(_bundle(args, "fit", cfg, outputs, cfg["synthesis"]["seed"], t0))
    _emit(_out_dir(args.out), "bundle.json", text)
    for k, v in res.params.items():
        print(f"{k} = {v!r} +/- {res.errors.get(k, float('nan'))!r}", file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_FAIL


def sweep_flux(cfg: RunConfig, values, seed: int) -> dict[str, np.ndarray]:
    rows = {"nbar": [], "p0": [], "amplitude": [], "amplitude_err": [], "g2_par_dip": []}
    fc = cfg["fit"]
    for nbar, child in zip(values, split_seeds(seed, len(values))):
        cfg.set("drive", "nbar", float(nbar))
        hp = cfg.hom()
        sc = cfg.synth(seed=child, label="par", detuning=hp.delta, flux=float(nbar))
        model = g2_hom_measured_model(cfg.auto(), hp, sc.taus())
        rec = synthesize_histogram(sc, model)
        res = fits.fit_oscillation(rec.trace, exclusion_ns=fc["exclusion_ns"],
                                   t_coh=hp.t_laser_coh, max_iter=fc["max_iter"])
        dip = float(np.interp(0.0, model.taus, model.values))
        for k, v in zip(rows, (nbar, hp.p0, res["amplitude"], res.errors["amplitude"], dip)):
            rows[k].append(float(v))
    return {k: np.array(v) for k, v in rows.items()}


def sweep_detuning(cfg: RunConfig, values) -> dict[str, np.ndarray]:
    dm = DetuningModel(cfg.hom(), cfg.g2_zero_of(), cfg.x_of(), cfg.tau_dip())
    rows = np.array([dm.evaluate(float(d)) for d in values]).reshape(-1, 3)
    return {"delta": np.asarray(values, dtype=float), "g2_perp_0": rows[:, 0],
            "g2_par_0": rows[:, 1], "V0": rows[:, 2]}


def _parse_values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"bad --values list {text!r}") from None
    if not vals:
        raise CliError("--values is empty")
    return sorted(vals)


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args.config)
    values = _parse_values(args.values)
    seed = None
    if args.axis == "flux":
        if any(v < 0 for v in values):
            raise CliError("flux values must be >= 0")
        seed = _resolve_seed(cfg, args.seed)
        base = RunConfig({s: dict(kv) for s, kv in cfg.values.items()})
        table = sweep_flux(cfg, values, seed)
        cfg = base
    else:
        if any(v < 0 for v in values):
            raise CliError("detuning values must be >= 0")
        table = sweep_detuning(cfg, values)
    out = _out_dir(args.out)
    text = format_table(table)
    _emit(out, f"sweep_{args.axis}.tsv", text)
    if out is not None:
        outputs = {"axis": args.axis, "values": values,
                   "table": {k: v.tolist() for k, v in table.items()}}
        _emit(out, "bundle.json", dump_bundle(_bundle(args, "sweep", cfg, outputs, seed, t0)))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfhom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    common.add_argument("--record-time", action="store_true",
                        help="store wall-clock time in the bundle (breaks byte-identity)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run oracle suites").set_defaults(func=cmd_verify)
    sub.add_parser("simulate", parents=[common], help="write model traces and histograms") \
        .set_defaults(func=cmd_simulate)
    p_fit = sub.add_parser("fit", parents=[common], help="fit a histogram file")
    p_fit.add_argument("histogram", nargs="+", help="histogram file(s); two for fringe fits")
    p_fit.set_defaults(func=cmd_fit)
    p_sweep = sub.add_parser("sweep", parents=[common], help="flux or detuning sweep table")
    p_sweep.add_argument("--axis", choices=("flux", "detuning"), required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return args.func(args)
    except (CliError, RfHomError, OSError) as exc:
        print(f"rfhom {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
