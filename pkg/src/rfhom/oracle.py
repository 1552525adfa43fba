"""Brute-force reference calculations.

* A four-mode, occupation-{0,1} Fock-space evaluation of the dual-color
  beam-splitter coincidence probability.
* A fixed-step RK4 integrator of the emitter master equation.
* Assembly and purity test of the instantaneous emitter-photon density matrix.

None of this code calls the closed forms it is meant to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emitter import AtomState, DriveParams, EmitterParams, JointPureState
from .errors import DivisionDomain, NonZeroDephasing, NormalizationError, ParameterError, StepTooLarge
from .units import TWO_PI

# ---------------------------------------------------------------------------
# four-mode Fock space
# ---------------------------------------------------------------------------

# mode order of the amplitude tensor: (a at t, a at t+tau, b at t, b at t+tau)
A_T, A_TAU, B_T, B_TAU = range(4)

# c_t d_{t+tau} = 1/2 (a_t a_tau - a_t b_tau + a_tau b_t - b_t b_tau)
BEAM_SPLITTER_TERMS = (
    (+0.5, (A_T, A_TAU)),
    (-0.5, (A_T, B_TAU)),
    (+0.5, (A_TAU, B_T)),
    (-0.5, (B_T, B_TAU)),
)


@dataclass(frozen=True, eq=False)
class FourModeState:
    """Amplitudes over occupations ``(n_at, n_atau, n_bt, n_btau)`` in {0,1}^4.

    ``amplitudes`` has shape (2, 2, 2, 2); ``amplitudes.ravel()[k]`` is the
    amplitude of the basis state whose binary digits spell ``k``.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(2, 2, 2, 2)
        object.__setattr__(self, "amplitudes", amp)
        norm = float(np.sum(np.abs(amp) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise NormalizationError(f"state norm {norm!r} != 1")

    def amplitude(self, label: str) -> complex:
        """Amplitude of a basis state written as a digit string, e.g. ``"0110"``."""
        return complex(self.amplitudes[tuple(int(c) for c in label)])


def _mode_state(p0: float, p1: float, nu: float, time: float) -> np.ndarray:
    return np.array([math.sqrt(p0), math.sqrt(p1) * np.exp(-1j * TWO_PI * nu * time)])


def build_input_state(p0: float, p1: float, nu_a: float, nu_b: float, t: float, tau: float) -> FourModeState:
    """Product of four single-mode states ``sqrt(p0)|0> + sqrt(p1) e^{-i 2 pi nu time}|1>``.

    Port a carries frequency ``nu_a`` and port b ``nu_b`` (GHz); each port
    contributes one mode at ``t`` and one at ``t + tau`` (ns).
    """
    if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-12:
        raise NormalizationError(f"invalid weights p0={p0!r}, p1={p1!r}")
    modes = (
        _mode_state(p0, p1, nu_a, t),
        _mode_state(p0, p1, nu_a, t + tau),
        _mode_state(p0, p1, nu_b, t),
        _mode_state(p0, p1, nu_b, t + tau),
    )
    amp = np.einsum("i,j,k,l->ijkl", *modes)
    return FourModeState(amp)


def annihilate(amp: np.ndarray, mode: int) -> np.ndarray:
    """Apply a truncated annihilation operator to one mode of the tensor."""
    out = np.zeros_like(amp)
    src = [slice(None)] * 4
    dst = [slice(None)] * 4
    src[mode], dst[mode] = 1, 0
    out[tuple(dst)] = amp[tuple(src)]
    return out


def _sector_projections(amp: np.ndarray):
    """Split the state by photon number per input port.

    The two inputs have independent, unlocked global phases; averaging over
    them removes every coherence between different (N_a, N_b) sectors.
    """
    n = np.indices((2, 2, 2, 2))
    n_a = n[A_T] + n[A_TAU]
    n_b = n[B_T] + n[B_TAU]
    for na in range(3):
        for nb in range(3):
            mask = (n_a == na) & (n_b == nb)
            if np.any(amp[mask] != 0):
                yield np.where(mask, amp, 0)


def coincidence_probability(state: FourModeState, terms=None) -> float:
    """Probability of clicks in port c at t and port d at t + tau.

    Applies the output-mode annihilator product term by term to each
    phase-sector of the input and sums the squared norms.
    """
    terms = BEAM_SPLITTER_TERMS if terms is None else terms
    total = 0.0
    for sector in _sector_projections(state.amplitudes):
        out = np.zeros_like(sector)
        for coef, (m1, m2) in terms:
            out += coef * annihilate(annihilate(sector, m2), m1)
        total += float(np.sum(np.abs(out) ** 2))
    return total


def hom_normalized_from_oracle(p0: float, p1: float, delta: float, tau: float,
                               nu0: float = 0.0, t: float = 0.0, terms=None) -> float:
    """Coincidence probability normalized to its long-delay value ``p1**2``."""
    if p1 <= 0:
        raise DivisionDomain("p1 must be > 0 to normalize")
    state = build_input_state(p0, p1, nu0 - 0.5 * delta, nu0 + 0.5 * delta, t, tau)
    return coincidence_probability(state, terms) / (p1 * p1)


# ---------------------------------------------------------------------------
# master equation
# ---------------------------------------------------------------------------

_G, _E = 0, 1
SIGMA = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)  # |g><g| - |e><e|
_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class LindbladSpec:
    """Master-equation parameters, all angular (rad/ns)."""

    omega: float
    delta: float
    gamma_par: float
    gamma_star: float = 0.0
    phi: float = 0.5 * math.pi

    def __post_init__(self):
        if self.gamma_par < 0 or self.gamma_star < 0:
            raise ParameterError("rates must be non-negative")

    @classmethod
    def from_params(cls, e: EmitterParams, d: DriveParams) -> "LindbladSpec":
        return cls(omega=d.omega, delta=d.delta_angular, gamma_par=e.gamma_par, gamma_star=e.gamma_star)

    def hamiltonian(self) -> np.ndarray:
        sd = SIGMA.conj().T
        return (-0.5 * self.omega * (np.exp(-1j * self.phi) * sd + np.exp(1j * self.phi) * SIGMA)
                + 0.5 * self.delta * SIGMA_Z)

    def superoperator(self) -> np.ndarray:
        """Liouvillian acting on the row-major flattened density matrix."""

        def left(a):
            return np.kron(a, _I2)

        def right(a):
            return np.kron(_I2, a.T)

        def dissipator(rate, a):
            ada = a.conj().T @ a
            return rate * (np.kron(a, a.conj()) - 0.5 * left(ada) - 0.5 * right(ada))

        h = self.hamiltonian()
        return (-1j * (left(h) - right(h)) + dissipator(self.gamma_par, SIGMA)
                + dissipator(0.5 * self.gamma_star, SIGMA_Z))


@dataclass(frozen=True, eq=False)
class EvolveResult:
    times: np.ndarray
    states: np.ndarray  # (n_times, 2, 2)
    final: AtomState
    dt: float
    n_steps: int
    max_trace_error: float

    def state_at(self, i: int) -> AtomState:
        return AtomState.from_matrix(self.states[i])


def max_step(spec: LindbladSpec) -> float:
    scales = [1.0 / spec.gamma_par] if spec.gamma_par > 0 else []
    if spec.omega > 0:
        scales.append(1.0 / spec.omega)
    return 0.01 * min(scales) if scales else math.inf


def _pauli_transfer(lv: np.ndarray) -> np.ndarray:
    """Express a Liouvillian in the real basis (1, sx, sy, sz)/2 of Bloch vectors."""
    basis = [_I2, np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), SIGMA_Z]
    to_vec = np.stack([0.5 * b.ravel() for b in basis], axis=1)  # bloch -> vec(rho)
    # tr(B rho) = sum_ij B_ji rho_ij
    from_vec = np.stack([b.T.ravel() for b in basis], axis=0)
    return (from_vec @ lv @ to_vec).real, to_vec


def lindblad_evolve(spec: LindbladSpec, initial: AtomState, t_end: float, dt: float,
                    record_every: int = 1) -> EvolveResult:
    """Integrate the master equation with classical fixed-step RK4.

    The state is propagated as the real vector ``(1, <sx>, <sy>, <sz>)`` so
    the trace is held at exactly one.  The equation is linear and
    autonomous, so one RK4 step is the matrix polynomial
    ``1 + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24``; it is formed once and
    applied ``floor(t_end/dt)`` times, plus one shortened step landing on
    ``t_end`` when needed.
    """
    if dt <= 0 or dt > max_step(spec) * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt!r} exceeds bound {max_step(spec)!r}")
    gen, to_vec = _pauli_transfer(spec.superoperator())

    def rk4_matrix(h):
        a = h * gen
        a2 = a @ a
        a3 = a2 @ a
        prop = np.eye(4) + a + a2 / 2.0 + a3 / 6.0 + (a3 @ a) / 24.0
        prop[0] = (1.0, 0.0, 0.0, 0.0)  # trace row is exact by construction
        return prop

    def to_rho(c):
        return (to_vec @ c).reshape(2, 2)

    n_full = int(math.floor(t_end / dt + 1e-9))
    rest = t_end - n_full * dt
    if rest < 1e-12 * max(dt, 1.0):
        rest = 0.0
    step = rk4_matrix(dt)

    rho0 = initial.matrix()
    c = np.array([1.0, 2 * rho0[0, 1].real, -2 * rho0[0, 1].imag, (rho0[0, 0] - rho0[1, 1]).real])
    times, states = [0.0], [to_rho(c)]
    for k in range(1, n_full + 1):
        c = step @ c
        if k % record_every == 0 or k == n_full:
            times.append(k * dt)
            states.append(to_rho(c))
    n_steps = n_full
    if rest > 0:
        c = rk4_matrix(rest) @ c
        n_steps += 1
        times.append(t_end)
        states.append(to_rho(c))
    states = np.array(states)
    trace_err = float(np.max(np.abs(states[:, 0, 0] + states[:, 1, 1] - 1.0)))
    return EvolveResult(np.array(times), states, AtomState.from_matrix(states[-1]),
                        dt, n_steps, trace_err)


# ---------------------------------------------------------------------------
# joint emitter-photon density matrix
# ---------------------------------------------------------------------------


def joint_density_matrix(e: EmitterParams, d: DriveParams) -> np.ndarray:
    """Instantaneous density matrix over (|g0>, |g1>, |e0>), zero dephasing."""
    if e.gamma_star > 0:
        raise NonZeroDephasing(f"gamma_star={e.gamma_star!r}")
    gp, w, dl = e.gamma_par, d.omega, d.delta_angular
    c = complex(gp, 2.0 * dl) * w
    w2 = w * w
    mat = np.array([
        [gp * gp + 4.0 * dl * dl, c, c],
        [c.conjugate(), w2, w2],
        [c.conjugate(), w2, w2],
    ], dtype=complex)
    return mat / (gp * gp + 4.0 * dl * dl + 2.0 * w2)


def pure_state_vector(state: JointPureState, theta_prime: float) -> np.ndarray:
    """(|g0>, |g1>, |e0>) amplitudes of ``sqrt(p0)|0g> + sqrt(p1) e^{-i theta'}(|0e>+|1g>)/sqrt2``."""
    b = math.sqrt(0.5 * state.p1) * np.exp(-1j * theta_prime)
    return np.array([math.sqrt(state.p0), b, b])


def joint_purity_check(e: EmitterParams, d: DriveParams) -> tuple[float, float]:
    """Largest eigenvalue of the joint density matrix and its Frobenius
    distance to the projector on the corresponding pure state."""
    from .emitter import joint_state

    rho = joint_density_matrix(e, d)
    evals = np.linalg.eigvalsh(rho)
    js = joint_state(e, d)
    psi = pure_state_vector(js, js.theta - 0.5 * math.pi)
    residual = float(np.linalg.norm(rho - np.outer(psi, psi.conj())))
    return float(evals[-1]), residual
