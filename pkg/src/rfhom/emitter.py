"""Driven two-level emitter: parameters, analytic steady state and the pure
joint emitter-photon state.

All rates entering the formulas are angular (rad/ns).  ``DriveParams.delta``
and the cavity figures are stored cyclic (GHz) and converted on use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DivisionDomain, NonZeroDephasing, ParameterError, WindowViolation
from .units import TWO_PI, to_angular

# denominators smaller than this are treated as a vanished normalization
_TINY = 1e-300

DEVICE_T1_NS = 0.074
DEVICE_ETA_AB = 0.8696
DEVICE_NBAR = 0.05
DEVICE_T_LASER_COH_NS = 200.0


def _checked(den: float, what: str) -> float:
    if abs(den) < _TINY:
        raise DivisionDomain(f"{what}: denominator underflow ({den!r})")
    return den


@dataclass(frozen=True)
class EmitterParams:
    """Intrinsic emitter and device constants.

    Parameters
    ----------
    gamma_par : float
        Radiative decay rate, rad/ns.  Must equal ``1 / t1``.
    gamma_star : float
        Pure dephasing rate, rad/ns.
    t1 : float, optional
        Radiative lifetime in ns; derived from ``gamma_par`` when omitted.
    fss : float
        Fine-structure splitting, GHz (cyclic).
    cavity_g, cavity_kappa, gamma_bulk : float
        Emitter-cavity coupling, cavity damping and off-cavity decay rate,
        all cyclic GHz.
    """

    gamma_par: float
    gamma_star: float = 0.0
    t1: float | None = None
    fss: float = 0.91
    cavity_g: float = 6.2
    cavity_kappa: float = 35.0
    gamma_bulk: float = 0.2015

    def __post_init__(self):
        if not self.gamma_par > 0:
            raise ParameterError(f"gamma_par must be > 0, got {self.gamma_par!r}")
        if not self.gamma_star >= 0:
            raise ParameterError(f"gamma_star must be >= 0, got {self.gamma_star!r}")
        if self.t1 is None:
            object.__setattr__(self, "t1", 1.0 / self.gamma_par)
        elif not self.t1 > 0:
            raise ParameterError(f"t1 must be > 0, got {self.t1!r}")
        elif abs(self.gamma_par * self.t1 - 1.0) > 1e-9:
            raise ParameterError(
                f"gamma_par={self.gamma_par!r} rad/ns is inconsistent with t1={self.t1!r} ns"
            )

    @classmethod
    def from_t1(cls, t1: float = DEVICE_T1_NS, **kwargs) -> "EmitterParams":
        if not t1 > 0:
            raise ParameterError(f"t1 must be > 0, got {t1!r}")
        return cls(gamma_par=1.0 / t1, t1=t1, **kwargs)

    @property
    def gamma_perp(self) -> float:
        """Coherence decay rate gamma_par/2 + gamma_star (rad/ns)."""
        return 0.5 * self.gamma_par + self.gamma_star


@dataclass(frozen=True)
class DriveParams:
    """Coherent laser drive.

    ``omega`` is the Rabi rate in rad/ns; ``delta`` (laser minus transition
    frequency) and ``nu`` are cyclic GHz.  ``nbar`` is the excitation flux in
    photons per lifetime and ``t_laser_coh`` the mutual laser coherence time
    in ns.
    """

    omega: float = 0.0
    delta: float = 0.0
    nbar: float = DEVICE_NBAR
    eta_ab: float = DEVICE_ETA_AB
    nu: float = 0.0
    t_laser_coh: float = DEVICE_T_LASER_COH_NS

    def __post_init__(self):
        if not self.omega >= 0:
            raise ParameterError(f"omega must be >= 0, got {self.omega!r}")
        if not self.nbar >= 0:
            raise ParameterError(f"nbar must be >= 0, got {self.nbar!r}")
        if not 0.0 <= self.eta_ab <= 1.0:
            raise ParameterError(f"eta_ab must lie in [0, 1], got {self.eta_ab!r}")
        if not self.t_laser_coh > 0:
            raise ParameterError(f"t_laser_coh must be > 0, got {self.t_laser_coh!r}")

    @classmethod
    def from_flux(
        cls,
        emitter: EmitterParams,
        nbar: float = DEVICE_NBAR,
        eta_ab: float = DEVICE_ETA_AB,
        delta: float = 0.0,
        **kwargs,
    ) -> "DriveParams":
        """Drive whose saturation parameter equals ``2 * eta_ab * nbar``."""
        s = 2.0 * eta_ab * nbar
        d = to_angular(delta)
        omega = math.sqrt(0.5 * s * (emitter.gamma_par**2 + 4.0 * d * d))
        return cls(omega=omega, delta=delta, nbar=nbar, eta_ab=eta_ab, **kwargs)

    @property
    def delta_angular(self) -> float:
        return to_angular(self.delta)


@dataclass(frozen=True)
class AtomState:
    """Emitter density matrix in the (g, e) basis; ``rho_ge = <g|rho|e>``."""

    rho_gg: float
    rho_ee: float
    rho_ge: complex

    def __post_init__(self):
        if abs(self.rho_gg + self.rho_ee - 1.0) > 1e-12:
            raise ParameterError(f"trace {self.rho_gg + self.rho_ee!r} != 1")
        if self.rho_gg * self.rho_ee - abs(self.rho_ge) ** 2 < -1e-12:
            raise ParameterError("density matrix is not positive semidefinite")

    @property
    def rho_eg(self) -> complex:
        return complex(self.rho_ge).conjugate()

    def matrix(self) -> np.ndarray:
        return np.array([[self.rho_gg, self.rho_ge], [self.rho_eg, self.rho_ee]], dtype=complex)

    @classmethod
    def from_matrix(cls, rho) -> "AtomState":
        rho = np.asarray(rho)
        return cls(float(rho[0, 0].real), float(rho[1, 1].real), complex(rho[0, 1]))

    @classmethod
    def ground(cls) -> "AtomState":
        return cls(1.0, 0.0, 0j)


@dataclass(frozen=True)
class JointPureState:
    """Weights of |0,g> and (|0,e> + |1,g>)/sqrt(2), plus phase and carrier."""

    p0: float
    p1: float
    theta: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.p0 <= 1.0 and 0.0 <= self.p1 <= 1.0):
            raise ParameterError(f"weights must lie in [0, 1]: p0={self.p0!r}, p1={self.p1!r}")
        if abs(self.p0 + self.p1 - 1.0) > 1e-12:
            raise ParameterError(f"p0 + p1 = {self.p0 + self.p1!r} != 1")


def steady_state(e: EmitterParams, d: DriveParams) -> AtomState:
    """Closed-form t -> infinity density matrix of the driven emitter.

    The coherence carries the sign produced by the Hamiltonian
    ``-Omega/2 (-i sigma^dag + i sigma) + Delta/2 sigma_z`` with
    ``sigma_z = |g><g| - |e><e|``: ``rho_ge = gamma_par (gamma_perp - i Delta) Omega / D``.
    """
    if not e.gamma_par > 0:
        raise ParameterError("steady state undefined for gamma_par <= 0")
    gp, gt = e.gamma_par, e.gamma_perp
    w, dl = d.omega, d.delta_angular
    den = _checked(2.0 * gp * (gt * gt + dl * dl) + 2.0 * gt * w * w, "steady_state")
    rho_ee = gt * w * w / den
    rho_gg = (2.0 * gp * (gt * gt + dl * dl) + gt * w * w) / den
    rho_ge = gp * complex(gt, -dl) * w / den
    return AtomState(rho_gg, rho_ee, rho_ge)


def joint_state(e: EmitterParams, d: DriveParams) -> JointPureState:
    """Pure joint emitter-photon state; only defined without pure dephasing."""
    if e.gamma_star > 0:
        raise NonZeroDephasing(f"gamma_star={e.gamma_star!r}: joint state is not pure")
    gp, w, dl = e.gamma_par, d.omega, d.delta_angular
    a = gp * gp + 4.0 * dl * dl
    den = _checked(a + 2.0 * w * w, "joint_state")
    p0 = a / den
    p1 = 2.0 * w * w / den
    theta = math.atan(2.0 * dl / gp) + 0.5 * math.pi
    return JointPureState(p0=p0, p1=p1, theta=theta, nu=d.nu)


def p0_from_flux(nbar, eta_ab=DEVICE_ETA_AB):
    """Coherent and incoherent weights ``(p0, p1)`` at excitation flux ``nbar``.

    Vectorizes over ``nbar``.
    """
    nbar = np.asarray(nbar, dtype=float)
    if np.any(nbar < 0):
        raise ParameterError("nbar must be >= 0")
    if not 0.0 <= eta_ab <= 1.0:
        raise ParameterError(f"eta_ab must lie in [0, 1], got {eta_ab!r}")
    with np.errstate(over="ignore"):
        p0 = 1.0 / (1.0 + 2.0 * eta_ab * nbar)
    p1 = 1.0 - p0
    if p0.ndim == 0:
        return float(p0), float(p1)
    return p0, p1


def saturation_parameter(e: EmitterParams, d: DriveParams) -> float:
    """``gamma_perp Omega^2 / (gamma_par (gamma_perp^2 + Delta^2))``.

    Reduces to ``(2 Omega^2/gamma_par^2) / (1 + (2 Delta/gamma_par)^2)`` without
    dephasing; with dephasing it is the quantity for which
    ``rho_ee = s / (2 (1 + s))`` still holds.
    """
    gp, gt = e.gamma_par, e.gamma_perp
    dl = d.delta_angular
    return gt * d.omega**2 / _checked(gp * (gt * gt + dl * dl), "saturation_parameter")


def saturation_weights(e: EmitterParams, d: DriveParams) -> tuple[float, float, float]:
    """Coherent and incoherent spectral weights and the saturation parameter.

    Returns ``(i_coh, i_incoh, s)`` with ``i_coh = 1/(1+s)``.  Without pure
    dephasing ``i_coh`` coincides with :func:`joint_state` ``.p0``.
    """
    s = saturation_parameter(e, d)
    return 1.0 / (1.0 + s), s / (1.0 + s), s


def g1_magnitude_steady(e: EmitterParams, d: DriveParams) -> float:
    """|rho_eg|^2 / rho_ee of the steady state, in closed form."""
    gp, gt = e.gamma_par, e.gamma_perp
    w, dl = d.omega, d.delta_angular
    a = gt * gt + dl * dl
    return gp * gp * a / _checked(2.0 * gt * (gp * a + gt * w * w), "g1_magnitude_steady")


def g1_window(state: JointPureState, tau, emitter: EmitterParams | None = None,
              drive: DriveParams | None = None):
    """First-order coherence ``p0 exp(-i 2 pi nu tau)`` for T1 << tau << T_L.

    ``tau`` is in ns and ``state.nu`` in GHz.  When ``emitter`` and/or
    ``drive`` are given the delay is checked against ``10 T1 <= tau <=
    T_L / 10`` and a :class:`WindowViolation` warning is issued otherwise.
    """
    tau_arr = np.abs(np.asarray(tau, dtype=float))
    if emitter is not None and np.any(tau_arr < 10.0 * emitter.t1):
        warnings.warn(f"tau below 10*T1 = {10 * emitter.t1:g} ns", WindowViolation, stacklevel=2)
    if drive is not None and np.any(tau_arr > drive.t_laser_coh / 10.0):
        warnings.warn(f"tau above T_L/10 = {drive.t_laser_coh / 10:g} ns", WindowViolation, stacklevel=2)
    val = state.p0 * np.exp(-1j * TWO_PI * state.nu * np.asarray(tau, dtype=float))
    return complex(val) if np.ndim(val) == 0 else val


def m_bound_from_g1(g1_mag: float, nbar: float) -> float:
    """Upper bound on indistinguishability from a measured |g1| at flux ``nbar``.

    Uses |g1| = sqrt(M) p0 together with eta_ab <= 1; clamped to [0, 1].
    """
    if not 0.0 <= g1_mag <= 1.0:
        raise ParameterError(f"|g1| must lie in [0, 1], got {g1_mag!r}")
    if not nbar >= 0:
        raise ParameterError(f"nbar must be >= 0, got {nbar!r}")
    return min(1.0, max(0.0, g1_mag**2 * (1.0 + 2.0 * nbar) ** 2))


def device_figures(e: EmitterParams) -> tuple[float, float, float]:
    """Natural linewidth (GHz), cooperativity and Purcell factor."""
    for name in ("t1", "cavity_g", "cavity_kappa", "gamma_bulk"):
        if not getattr(e, name) > 0:
            raise ParameterError(f"{name} must be > 0")
    linewidth = 1.0 / (TWO_PI * e.t1)
    coop = e.cavity_g**2 / (e.cavity_kappa * e.gamma_bulk)
    return linewidth, coop, 2.0 * coop
