"""Lindbladian invariance transformations (LITs): apply, compose, verify.

A LIT is a triple (U, Gamma, phi) with U an m x m unitary over the Lindblad
channels, Gamma a complex m-vector and phi a real scalar.  It maps one
strategy to another with the identical generator:

    L_mu -> sum_nu U[mu, nu] L_nu + Gamma[mu] * 1
    H    -> H + dH,   dH = (1/2i) (A - A^dag) + phi * 1,

where A = sum_nu (Gamma^dag U)[nu] L_nu.  The compensation term dH cancels
the first-order drift the Gamma offsets introduce in the dissipator, which
is what keeps the evolution of the state unchanged.

For the thermal qubit the whole Gamma/U freedom collapses into one complex
number alpha; ``qubit_alpha`` extracts it and ``qubit_lit_from_alpha``
builds the simplest representative transformation realizing a given alpha.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    HermitianOperator,
    SIGMA_MINUS,
    SIGMA_PLUS,
    UNITARITY_TOL,
    as_matrix,
    identity,
    matrix_from_json,
    matrix_to_json,
    max_abs,
    _read_only_copy,
)
from .dynamics import QubitThermalModel, Strategy, superoperator_matrix
from .errors import ConfigError, DimensionMismatch, InvariantViolation

INVARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class LITParams:
    """One invariance transformation: unitary channel mixing, offsets, scalar."""

    u: np.ndarray
    gamma: np.ndarray
    phi: float = 0.0

    def __post_init__(self):
        u = as_matrix(self.u)
        if max_abs(u @ u.conj().T - identity(u.shape[0])) > UNITARITY_TOL:
            raise InvariantViolation(
                f"channel-mixing matrix is not unitary within {UNITARITY_TOL:g}"
            )
        g = np.asarray(self.gamma, dtype=complex)
        if g.ndim != 1 or g.shape[0] != u.shape[0]:
            raise DimensionMismatch(
                f"offset vector of length {g.shape} does not match a {u.shape[0]}-channel unitary"
            )
        if not np.isfinite(self.phi):
            raise InvariantViolation("phi must be finite")
        object.__setattr__(self, "u", _read_only_copy(u))
        object.__setattr__(self, "gamma", _read_only_copy(g))
        object.__setattr__(self, "phi", float(self.phi))

    @property
    def n_channels(self) -> int:
        return self.u.shape[0]

    def to_json(self) -> dict:
        return {
            "U": matrix_to_json(self.u),
            "Gamma": {
                "re": [float(x) for x in self.gamma.real],
                "im": [float(x) for x in self.gamma.imag],
            },
            "phi": float(self.phi),
        }

    @classmethod
    def from_json(cls, obj: dict, path: str = "lit") -> "LITParams":
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected an object")
        unknown = set(obj) - {"U", "Gamma", "phi"}
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        if "U" not in obj or "Gamma" not in obj:
            raise ConfigError(f"{path}: both U and Gamma are required")
        u = matrix_from_json(obj["U"], f"{path}.U")
        gam = obj["Gamma"]
        if not isinstance(gam, dict) or set(gam) - {"re", "im"}:
            raise ConfigError(f"{path}.Gamma: expected an object with keys re/im")
        try:
            g = np.asarray(gam["re"], dtype=float) + 1j * np.asarray(gam["im"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.Gamma: malformed ({exc})") from None
        phi = obj.get("phi", 0.0)
        if not isinstance(phi, (int, float)):
            raise ConfigError(f"{path}.phi: expected a number")
        try:
            return cls(u, g, float(phi))
        except (InvariantViolation, DimensionMismatch) as exc:
            raise ConfigError(f"{path}: {exc}") from None


def identity_lit(n_channels: int) -> LITParams:
    return LITParams(identity(n_channels), np.zeros(n_channels, dtype=complex), 0.0)


@dataclass(frozen=True)
class QubitLITParams:
    """Restricted qubit family alpha(t) = alpha_mag * exp(i(theta0 + theta_rate t))."""

    alpha_mag: float
    theta0: float = 0.0
    theta_rate: float = 0.0

    def __post_init__(self):
        if self.alpha_mag < 0:
            raise InvariantViolation("alpha_mag must be >= 0")
        for name in ("alpha_mag", "theta0", "theta_rate"):
            if not np.isfinite(getattr(self, name)):
                raise InvariantViolation(f"{name} must be finite")

    def alpha_at(self, t: float) -> complex:
        return self.alpha_mag * np.exp(1j * (self.theta0 + self.theta_rate * t))

    def to_json(self) -> dict:
        return {
            "alpha_mag": float(self.alpha_mag),
            "theta0": float(self.theta0),
            "theta_rate": float(self.theta_rate),
        }

    @classmethod
    def from_json(cls, obj: dict, path: str = "lit.qubit") -> "QubitLITParams":
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected an object")
        unknown = set(obj) - {"alpha_mag", "theta0", "theta_rate"}
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        vals = {}
        for key in ("alpha_mag", "theta0", "theta_rate"):
            v = obj.get(key, 0.0)
            if not isinstance(v, (int, float)):
                raise ConfigError(f"{path}.{key}: expected a number")
            vals[key] = float(v)
        if "alpha_mag" not in obj:
            raise ConfigError(f"{path}: alpha_mag is required")
        try:
            return cls(**vals)
        except InvariantViolation as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class LITSchedule:
    """Time-dependent transformation parameters with an optional derivative.

    ``dparams_dt(t)`` returns (dU/dt, dGamma/dt, dphi/dt) as raw arrays and a
    float.  The derivative feeds the <d(dH)/dt> term of flux corrections;
    when absent, callers that need it fall back to central differences.
    """

    params_of_t: Callable[[float], LITParams]
    dparams_dt: Optional[Callable[[float], tuple]] = None

    @classmethod
    def constant(cls, params: LITParams) -> "LITSchedule":
        m = params.n_channels
        zero = (
            np.zeros((m, m), dtype=complex),
            np.zeros(m, dtype=complex),
            0.0,
        )
        return cls(params_of_t=lambda t: params, dparams_dt=lambda t: zero)


def delta_hamiltonian(strategy: Strategy, params: LITParams) -> np.ndarray:
    """Hamiltonian compensation dH generated by the transformation."""
    if params.n_channels != len(strategy.lindblad_ops):
        raise DimensionMismatch(
            f"{params.n_channels}-channel transformation does not fit a strategy with"
            f" {len(strategy.lindblad_ops)} Lindblad operators"
        )
    coeff = params.gamma.conj() @ params.u
    a = np.tensordot(coeff, strategy.l_stack, axes=1) if coeff.size else np.zeros(
        (strategy.dim, strategy.dim), dtype=complex
    )
    dh = (a - a.conj().T) / 2j
    dh += params.phi * identity(strategy.dim)
    return dh


def delta_hamiltonian_dt(strategy: Strategy, params: LITParams, dparams: tuple) -> np.ndarray:
    """Analytic time derivative of dH given (dU/dt, dGamma/dt, dphi/dt)."""
    du, dgamma, dphi = dparams
    du = np.asarray(du, dtype=complex)
    dgamma = np.asarray(dgamma, dtype=complex)
    coeff = np.asarray(dgamma).conj() @ params.u + params.gamma.conj() @ du
    a = np.tensordot(coeff, strategy.l_stack, axes=1) if coeff.size else np.zeros(
        (strategy.dim, strategy.dim), dtype=complex
    )
    out = (a - a.conj().T) / 2j
    out += float(dphi) * identity(strategy.dim)
    return out


def apply_lit(strategy: Strategy, params: LITParams) -> Strategy:
    """Transform a strategy; the result generates the identical evolution."""
    dh = delta_hamiltonian(strategy, params)
    new_ops = np.einsum("mn,nij->mij", params.u, strategy.l_stack)
    new_ops += params.gamma[:, None, None] * identity(strategy.dim)
    label = f"{strategy.label}|lit" if strategy.label else "lit"
    return Strategy(
        HermitianOperator(strategy.h + dh),
        tuple(new_ops),
        label=label,
    )


@dataclass(frozen=True)
class InvarianceCheck:
    invariant: bool
    max_deviation: float


def verify_invariance(s: Strategy, s_prime: Strategy, tol: float = INVARIANCE_TOL) -> InvarianceCheck:
    """Compare the exact vectorized generators of two strategies."""
    if s.dim != s_prime.dim:
        raise DimensionMismatch("strategies act on different dimensions")
    dev = max_abs(superoperator_matrix(s) - superoperator_matrix(s_prime))
    return InvarianceCheck(invariant=bool(dev <= tol), max_deviation=dev)


def compose_lit(p2: LITParams, p1: LITParams) -> LITParams:
    """Composition p2 after p1: apply_lit(s, compose) == apply_lit(apply_lit(s, p1), p2).

    The scalar term picks up Im(Gamma2^dag U2 Gamma1), the identity-
    proportional residue of crossing the first offsets with the second
    mixing; the round-trip property tests pin this down.
    """
    if p1.n_channels != p2.n_channels:
        raise DimensionMismatch("cannot compose transformations of different channel counts")
    u = p2.u @ p1.u
    gamma = p2.u @ p1.gamma + p2.gamma
    phi = p1.phi + p2.phi + float(np.imag(np.vdot(p2.gamma, p2.u @ p1.gamma)))
    return LITParams(u, gamma, phi)


def inverse_lit(p: LITParams) -> LITParams:
    """The transformation undoing p (compose_lit(inverse_lit(p), p) is the identity)."""
    ud = p.u.conj().T
    return LITParams(ud, -(ud @ p.gamma), -p.phi)


def qubit_alpha(params: LITParams, model: QubitThermalModel) -> complex:
    """Collapse a 2-channel transformation on the thermal qubit to its alpha."""
    if params.n_channels != 2:
        raise DimensionMismatch("the thermal qubit carries exactly two jump channels")
    sp = np.sqrt(model.gamma_plus)
    sm = np.sqrt(model.gamma_minus)
    up = complex(np.vdot(params.gamma, params.u[:, 0]))   # sum_mu conj(G_mu) U[mu, +]
    dn = complex(np.vdot(params.gamma, params.u[:, 1]))
    return -1j * (up * sp - np.conj(dn) * sm)


def qubit_delta_h(alpha: complex) -> HermitianOperator:
    """Hamiltonian compensation for the qubit family, purely off-diagonal.

    In the frozen (ground, excited) basis this is (alpha/2)|e><g| + h.c.;
    it matches ``delta_hamiltonian`` of any transformation whose
    ``qubit_alpha`` equals alpha, up to the phi identity shift.
    """
    c = 0.5 * complex(alpha)
    return HermitianOperator(c * SIGMA_PLUS + np.conj(c) * SIGMA_MINUS)


def qubit_lit_from_alpha(q: QubitLITParams, model: QubitThermalModel, t: float) -> LITParams:
    """Simplest representative transformation realizing alpha(t) = |a| e^{i theta(t)}.

    Gauge choice: U = identity and a single nonzero offset, through the +
    channel when its rate is nonzero, else through the - channel.
    """
    alpha = q.alpha_at(t)
    if q.alpha_mag == 0.0:
        return identity_lit(2)
    gamma = np.zeros(2, dtype=complex)
    if model.gamma_plus > 0.0:
        gamma[0] = np.conj(1j * alpha / np.sqrt(model.gamma_plus))
    elif model.gamma_minus > 0.0:
        gamma[1] = -1j * alpha / np.sqrt(model.gamma_minus)
    else:
        raise InvariantViolation("alpha is unreachable: both jump rates vanish")
    return LITParams(identity(2), gamma, 0.0)


def qubit_lit_schedule(q: QubitLITParams, model: QubitThermalModel) -> LITSchedule:
    """Schedule for the qubit family with the analytic parameter derivative."""
    du = np.zeros((2, 2), dtype=complex)
    du.flags.writeable = False

    def deriv(t: float) -> tuple:
        dgamma = np.zeros(2, dtype=complex)
        dalpha = 1j * q.theta_rate * q.alpha_at(t)
        if q.alpha_mag != 0.0:
            if model.gamma_plus > 0.0:
                dgamma[0] = np.conj(1j * dalpha / np.sqrt(model.gamma_plus))
            elif model.gamma_minus > 0.0:
                dgamma[1] = -1j * dalpha / np.sqrt(model.gamma_minus)
        return du, dgamma, 0.0

    return LITSchedule(
        params_of_t=lambda t: qubit_lit_from_alpha(q, model, t),
        dparams_dt=deriv,
    )


@dataclass(frozen=True)
class TransformedStrategy:
    """Strategy schedule obtained by applying a LIT schedule to a base strategy.

    Quacks as a time-dependent strategy for the integrator (``at``) and
    carries the analytic dH/dt needed by flux evaluations when the
    underlying schedule provides its derivative.
    """

    base: Strategy
    schedule: LITSchedule

    def at(self, t: float) -> Strategy:
        return apply_lit(self.base, self.schedule.params_of_t(t))

    def dh_dt(self, t: float):
        if self.schedule.dparams_dt is None:
            return None
        params = self.schedule.params_of_t(t)
        return delta_hamiltonian_dt(self.base, params, self.schedule.dparams_dt(t))

    def __call__(self, t: float) -> Strategy:
        return self.at(t)
