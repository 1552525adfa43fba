"""Regenerate the bundled histogram fixtures.

Run from the repository root: ``python tests/fixtures/make_fixtures.py``.
The parallel-polarization fixture comes from ``rfhom simulate`` with the
default configuration and seed 7; the decay and beat records are Poisson
draws around known curves.
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from rfhom.cli import main
from rfhom.io import write_histogram
from rfhom.lab.synthesis import synthesize_counts

HERE = Path(__file__).resolve().parent
SIM_SEED = 7
T1_PS = 74.0
FSS_PERIOD_PS = 1150.0


def decay_record(seed: int = 74):
    t = np.arange(-500.0, 2000.0, 4.0)
    lam = np.where(t >= 0, 20.0 + 1e4 * np.exp(-np.clip(t, 0, None) / T1_PS), 20.0)
    return synthesize_counts(t, lam, seed, label="decay")


def beat_record(seed: int = 1150):
    t = np.arange(0.0, 4000.0, 4.0)
    lam = 20.0 + 1e4 * np.exp(-t / 800.0) * (1 + 0.6 * np.cos(2 * np.pi * t / FSS_PERIOD_PS + 0.3))
    return synthesize_counts(t, lam, seed, label="fss")


def build(dest: Path = HERE) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["simulate", "--seed", str(SIM_SEED), "--out", tmp])
        if code != 0:
            sys.exit(code)
        shutil.copy(Path(tmp) / "hist_par.txt", dest / "hist_par.txt")
    write_histogram(dest / "decay.txt", decay_record(), window_ns=(0.0, 0.0))
    write_histogram(dest / "fss.txt", beat_record(), window_ns=(0.0, 0.0))


if __name__ == "__main__":
    build()
