"""Strategy-dependent physical quantities.

The state trajectory rho(t) is invariant under invariance transformations,
but the internal energy Tr(H rho), the energy flux d/dt Tr(H rho) and the
ergotropy all depend on which operator set represents the generator.  This
module evaluates those quantities and the closed-form corrections induced
by switching strategy:

* the general flux correction
      i<[H, dH]> + sum_mu Re<L_mu^dag [dH, L_mu]> + <d(dH)/dt>,
  built from the *original* operator set plus the transformation's dH;
* its qubit specialization, linear in alpha(t) and in the coherence
  rho_ge(t) = <g|rho|e>;
* the ergotropy (maximal unitary work) and the closed-form eigensystem and
  asymptotic ergotropy of the transformed qubit Hamiltonian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    HermitianOperator,
    PureState,
    as_matrix,
    hermitian_eigensystem,
)
from .dynamics import QubitThermalModel, Strategy, generator_apply
from .errors import DimensionMismatch, InvariantViolation, NumericalFailure
from .lit import (
    LITSchedule,
    QubitLITParams,
    delta_hamiltonian,
    delta_hamiltonian_dt,
)

# Central-difference step for d(dH)/dt when a schedule has no derivative.
FD_TIME_STEP = 1e-6
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class FluxSample:
    """Energy flux into the system at one instant, for one strategy."""

    t: float
    power: float
    strategy_label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.power):
            raise InvariantViolation("flux must be finite")


@dataclass(frozen=True)
class ErgotropyReport:
    """Maximal unitary work: internal energy minus the passive-state energy."""

    value: float
    passive_energy: float
    internal_energy: float

    def __post_init__(self):
        if self.value < -1e-10:
            raise InvariantViolation(f"ergotropy {self.value:.3e} is negative beyond tolerance")


def internal_energy(h, rho) -> float:
    """Re Tr(H rho); the imaginary part must be roundoff-level."""
    hm = as_matrix(h)
    rm = as_matrix(rho)
    if hm.shape != rm.shape:
        raise DimensionMismatch("operator and state dimensions differ")
    val = complex(np.trace(hm @ rm))
    scale = max(1.0, abs(val))
    if abs(val.imag) > IMAG_TOL * scale:
        raise NumericalFailure(f"internal energy has imaginary part {val.imag:.3e}")
    return float(val.real)


def energy_flux(strategy_or_schedule, rho, t: float = 0.0) -> FluxSample:
    """d/dt Tr(H rho) for a static strategy or a strategy schedule.

    For schedules the explicit-time term Tr(dH/dt rho) uses the schedule's
    analytic derivative; a schedule without one is rejected.
    """
    r = as_matrix(rho)
    if isinstance(strategy_or_schedule, Strategy):
        s = strategy_or_schedule
        power = float(np.trace(s.h @ generator_apply(s, r)).real)
        label = s.label
    else:
        sched = strategy_or_schedule
        s_t = sched.at(t)
        dh = sched.dh_dt(t)
        if dh is None:
            raise ValueError(
                "time-dependent strategy lacks an analytic dH/dt; flux is undefined"
            )
        power = float(np.trace(s_t.h @ generator_apply(s_t, r)).real)
        power += float(np.trace(as_matrix(dh) @ r).real)
        label = s_t.label
    return FluxSample(t=float(t), power=power, strategy_label=label)


def _delta_h_dt(strategy: Strategy, schedule: LITSchedule, t: float) -> np.ndarray:
    if schedule.dparams_dt is not None:
        return delta_hamiltonian_dt(strategy, schedule.params_of_t(t), schedule.dparams_dt(t))
    h = FD_TIME_STEP
    plus = delta_hamiltonian(strategy, schedule.params_of_t(t + h))
    minus = delta_hamiltonian(strategy, schedule.params_of_t(t - h))
    return (plus - minus) / (2.0 * h)


def delta_flux_general(strategy: Strategy, schedule: LITSchedule, rho, t: float) -> float:
    """Flux correction caused by switching to the transformed strategy.

    Evaluates i<[H, dH]> + sum_mu Re<L_mu^dag [dH, L_mu]> + <d(dH)/dt> on the
    original operator set; by construction this equals the flux of the
    transformed strategy minus the flux of the original one.
    """
    r = as_matrix(rho)
    params = schedule.params_of_t(t)
    dh = delta_hamiltonian(strategy, params)
    h = strategy.h
    out = float((1j * np.trace((h @ dh - dh @ h) @ r)).real)
    for L in strategy.lindblad_ops:
        out += float(np.trace(L.conj().T @ (dh @ L - L @ dh) @ r).real)
    out += float(np.trace(_delta_h_dt(strategy, schedule, t) @ r).real)
    return out


def delta_flux_qubit(q: QubitLITParams, model: QubitThermalModel, rho, t: float) -> float:
    """Closed-form qubit flux correction, linear in alpha(t) and rho_ge(t)."""
    r = as_matrix(rho)
    if r.shape != (2, 2):
        raise DimensionMismatch("the closed-form flux correction is qubit-only")
    alpha = q.alpha_at(t)
    coeff = 1j * (model.omega + q.theta_rate) - 0.5 * (model.gamma_plus + model.gamma_minus)
    term = 0.5 * alpha * coeff * r[0, 1]
    return float(2.0 * term.real)


def ergotropy(h, rho) -> ErgotropyReport:
    """Maximal work extractable by unitaries.

    Occupations sorted descending pair with energy levels sorted ascending;
    ties in either spectrum do not affect the value, so the sort order of
    degenerate branches is left to the (stable) eigensolver.
    """
    hm = as_matrix(h)
    rm = as_matrix(rho)
    if hm.shape != rm.shape:
        raise DimensionMismatch("operator and state dimensions differ")
    occupations = np.linalg.eigvalsh(rm)[::-1]
    levels = np.linalg.eigvalsh(hm)
    internal = float(np.trace(hm @ rm).real)
    passive = float(np.dot(occupations, levels))
    return ErgotropyReport(
        value=internal - passive,
        passive_energy=passive,
        internal_energy=internal,
    )


@dataclass(frozen=True)
class QubitHPrimeEigensystem:
    """Closed-form eigensystem of the transformed qubit Hamiltonian."""

    e_plus: float
    e_minus: float
    psi_plus: PureState
    psi_minus: PureState
    gap_factor: float
    n1: float
    n2: float


def qubit_gap_factor(alpha: complex, omega: float) -> float:
    """Dimensionless widening of the level splitting: (sqrt(1+|a|^2/w^2)-1)/2."""
    return 0.5 * math.sqrt(1.0 + (abs(alpha) / omega) ** 2) - 0.5


def qubit_hprime_eigensystem(alpha: complex, omega: float) -> QubitHPrimeEigensystem:
    """Eigenvalues and eigenvectors of H + dH(alpha) for the qubit.

    With G the gap factor, the levels are +-(omega/2)(2G+1) and the
    eigenvectors mix ground and excited components with weights
    n1 = G/(2G+1) and n2 = 1 - n1; the excited component carries the phase
    of alpha.
    """
    if not omega > 0:
        raise InvariantViolation("omega must be positive")
    g = qubit_gap_factor(alpha, omega)
    e_plus = 0.5 * omega * (2.0 * g + 1.0)
    n1 = g / (2.0 * g + 1.0)
    n2 = 1.0 - n1
    phase = np.exp(1j * np.angle(alpha)) if alpha != 0 else 1.0 + 0.0j
    psi_plus = PureState(np.array([math.sqrt(n1), phase * math.sqrt(n2)], dtype=complex))
    psi_minus = PureState(np.array([math.sqrt(n2), -phase * math.sqrt(n1)], dtype=complex))
    return QubitHPrimeEigensystem(
        e_plus=e_plus,
        e_minus=-e_plus,
        psi_plus=psi_plus,
        psi_minus=psi_minus,
        gap_factor=g,
        n1=n1,
        n2=n2,
    )


def qubit_asymptotic_ergotropy(alpha: complex, model: QubitThermalModel) -> float:
    """Ergotropy of the thermal asymptotic state w.r.t. the transformed Hamiltonian.

    Closed form: gap_factor(alpha) * omega * (rho_gg - rho_ee) of the Gibbs
    state, in units of omega (hbar = 1).
    """
    rho = model.gibbs().matrix
    g = qubit_gap_factor(alpha, model.omega)
    return g * model.omega * float((rho[0, 0] - rho[1, 1]).real)
