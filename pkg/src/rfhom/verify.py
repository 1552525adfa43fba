"""Self-consistency suites comparing closed forms with independent routes.

Each suite is deterministic (fixed internal seeds) and returns a
:class:`SuiteResult` with the worst error found and the parameters that
produced it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emitter import (
    DriveParams,
    EmitterParams,
    AtomState,
    g1_magnitude_steady,
    joint_state,
    steady_state,
)
from .interference import g2_hom_full, g2_hom_single_photon, g2_hom_steady
from .oracle import LindbladSpec, hom_normalized_from_oracle, joint_purity_check, lindblad_evolve, max_step
from .units import to_cyclic


@dataclass(frozen=True)
class SuiteResult:
    name: str
    max_error: float
    tolerance: float
    n_cases: int
    worst: dict

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status} {self.name}: max error {self.max_error:.3e} (tol {self.tolerance:.0e}, {self.n_cases} cases)"
        if not self.passed:
            msg += " worst at " + ", ".join(f"{k}={v:.6g}" for k, v in self.worst.items())
        return msg


def _track(best, err, params):
    return (err, params) if err > best[0] else best


def oracle_equivalence(terms=None, tol: float = 1e-10) -> SuiteResult:
    """Fock-space coincidence probability against ``1 - p0^2 cos(2 pi x)/2``.

    Grid ``p0 in {0, 0.1, ..., 1}``, ``delta*tau in {0, 0.05, ..., 2}``.
    """
    best = (0.0, {})
    n = 0
    for p0 in np.round(np.linspace(0.0, 1.0, 11), 12):
        p1 = 1.0 - p0
        for dtau in np.round(np.linspace(0.0, 2.0, 41), 12):
            if p1 == 0.0:
                # no single photons: the normalized correlation is undefined
                continue
            got = hom_normalized_from_oracle(p0, p1, 1.0, dtau, terms=terms)
            want = g2_hom_steady(1.0, p0, 1.0, dtau)
            best = _track(best, abs(got - want), {"p0": p0, "delta_tau": dtau})
            n += 1
    return SuiteResult("oracle-equivalence", best[0], tol, n, best[1])


def _random_emitter_drive(rng, zero_dephasing=False):
    gpar = rng.uniform(0.5, 5.0)
    gstar = 0.0 if zero_dephasing else rng.uniform(0.0, 2.0)
    delta = rng.uniform(-5.0, 5.0)  # rad/ns
    omega = rng.uniform(0.0, 5.0)
    e = EmitterParams(gamma_par=gpar, gamma_star=gstar)
    d = DriveParams(omega=omega, delta=to_cyclic(delta))
    return e, d


def steady_state_suite(n_sets: int = 100, seed: int = 11, tol: float = 1e-8) -> SuiteResult:
    """Analytic steady state against RK4 integration to ``t = 50/gamma_par``."""
    rng = np.random.default_rng(seed)
    best = (0.0, {})
    for _ in range(n_sets):
        e, d = _random_emitter_drive(rng)
        spec = LindbladSpec.from_params(e, d)
        t_end = 50.0 / e.gamma_par
        dt = max_step(spec)
        res = lindblad_evolve(spec, AtomState.ground(), t_end, dt, record_every=10**9)
        err = float(np.max(np.abs(res.final.matrix() - steady_state(e, d).matrix())))
        best = _track(best, err, {"gamma_par": e.gamma_par, "gamma_star": e.gamma_star,
                                  "delta": spec.delta, "omega": d.omega})
    return SuiteResult("steady-state", best[0], tol, n_sets, best[1])


def purity_suite(n_sets: int = 100, seed: int = 12, tol: float = 1e-10) -> SuiteResult:
    """Rank-one residual of the joint emitter-photon matrix at zero dephasing."""
    rng = np.random.default_rng(seed)
    best = (0.0, {})
    for _ in range(n_sets):
        e, d = _random_emitter_drive(rng, zero_dephasing=True)
        if d.omega == 0.0:
            continue
        _, resid = joint_purity_check(e, d)
        best = _track(best, resid, {"gamma_par": e.gamma_par, "delta": d.delta_angular,
                                    "omega": d.omega})
    return SuiteResult("purity", best[0], tol, n_sets, best[1])


def limit_suite(n_sets: int = 1000, seed: int = 13, tol: float = 1e-12) -> SuiteResult:
    """Full HOM correlation reduces to its two limits at g2 = 1 and g2 = 0."""
    rng = np.random.default_rng(seed)
    m = rng.uniform(0, 1, n_sets)
    p0 = rng.uniform(0, 1, n_sets)
    dtau = rng.uniform(0, 2, n_sets)
    err1 = np.abs(g2_hom_full(1.0, m, p0, 1.0, dtau) - g2_hom_steady(m, p0, 1.0, dtau))
    err0 = np.abs(g2_hom_full(0.0, m, p0, 1.0, dtau) - g2_hom_single_photon(m, 1.0, dtau))
    err = np.maximum(err1, err0)
    i = int(np.argmax(err))
    return SuiteResult("limit-reduction", float(err[i]), tol, n_sets,
                       {"m": m[i], "p0": p0[i], "delta_tau": dtau[i]})


def g1_identity_suite(n_sets: int = 100, seed: int = 14, tol: float = 1e-9) -> SuiteResult:
    """Long-delay first-order coherence equals p0 without dephasing (relative error)."""
    rng = np.random.default_rng(seed)
    best = (0.0, {})
    for _ in range(n_sets):
        e, d = _random_emitter_drive(rng, zero_dephasing=True)
        p0 = joint_state(e, d).p0
        err = abs(g1_magnitude_steady(e, d) - p0) / p0
        best = _track(best, err, {"gamma_par": e.gamma_par, "delta": d.delta_angular,
                                  "omega": d.omega})
    return SuiteResult("g1-identity", best[0], tol, n_sets, best[1])


def run_all(terms=None) -> list[SuiteResult]:
    return [
        oracle_equivalence(terms=terms),
        steady_state_suite(),
        purity_suite(),
        limit_suite(),
        g1_identity_suite(),
    ]
