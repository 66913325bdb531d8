"""Grid search over the restricted qubit transformation family.

The searched family is alpha(t) = alpha_mag * exp(i(theta0 + theta_rate t)).
Because the state trajectory is invariant under every transformation, the
base evolution rho(t) is integrated exactly once per scenario and shared by
all candidates; only the cheap strategy-dependent functionals are
re-evaluated per grid point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import DensityMatrix, as_matrix
from .dynamics import (
    QubitThermalModel,
    Strategy,
    TimeGrid,
    evolve_arrays,
    make_qubit_thermal_strategy,
    superoperator_matrix,
)
from .errors import InvariantViolation
from .lit import QubitLITParams, qubit_delta_h
from .observables import qubit_asymptotic_ergotropy

OBJECTIVE_KINDS = (
    "instantaneous_flux",
    "integrated_flux",
    "final_internal_energy",
    "asymptotic_ergotropy",
)
SENSES = ("maximize", "minimize")


@dataclass(frozen=True)
class Objective:
    """What to optimize and in which direction.

    Time fields by kind: ``t`` for instantaneous_flux, ``t0``/``t1`` for
    integrated_flux, ``horizon`` for final_internal_energy; the asymptotic
    ergotropy needs none.
    """

    kind: str
    sense: str = "maximize"
    t: float | None = None
    t0: float | None = None
    t1: float | None = None
    horizon: float | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise InvariantViolation(f"unknown objective kind {self.kind!r}")
        if self.sense not in SENSES:
            raise InvariantViolation(f"unknown sense {self.sense!r}")
        if self.kind == "instantaneous_flux" and self.t is None:
            raise InvariantViolation("instantaneous_flux needs t")
        if self.kind == "integrated_flux":
            if self.t0 is None or self.t1 is None or not self.t0 < self.t1:
                raise InvariantViolation("integrated_flux needs t0 < t1")
        if self.kind == "final_internal_energy" and self.horizon is None:
            raise InvariantViolation("final_internal_energy needs horizon")

    @classmethod
    def instantaneous_flux(cls, t: float, sense: str = "maximize") -> "Objective":
        return cls(kind="instantaneous_flux", sense=sense, t=float(t))

    @classmethod
    def integrated_flux(cls, t0: float, t1: float, sense: str = "maximize") -> "Objective":
        return cls(kind="integrated_flux", sense=sense, t0=float(t0), t1=float(t1))

    @classmethod
    def final_internal_energy(cls, horizon: float, sense: str = "maximize") -> "Objective":
        return cls(kind="final_internal_energy", sense=sense, horizon=float(horizon))

    @classmethod
    def asymptotic_ergotropy(cls, sense: str = "maximize") -> "Objective":
        return cls(kind="asymptotic_ergotropy", sense=sense)


@dataclass(frozen=True)
class SearchSpace:
    """Cartesian grid over (alpha_mag, theta0, theta_rate)."""

    alpha_mags: tuple
    theta0s: tuple
    theta_rates: tuple

    def __post_init__(self):
        for name in ("alpha_mags", "theta0s", "theta_rates"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise InvariantViolation(f"{name} must be non-empty")
            object.__setattr__(self, name, vals)
        if any(a < 0 for a in self.alpha_mags):
            raise InvariantViolation("alpha_mag values must be >= 0")

    def candidates(self):
        for a, t0, rate in product(self.alpha_mags, self.theta0s, self.theta_rates):
            yield QubitLITParams(alpha_mag=a, theta0=t0, theta_rate=rate)

    def __len__(self) -> int:
        return len(self.alpha_mags) * len(self.theta0s) * len(self.theta_rates)


@dataclass(frozen=True)
class _ScenarioCache:
    """Base evolution shared by every candidate of one search."""

    model: QubitThermalModel
    strategy: Strategy
    times: np.ndarray
    rhos: np.ndarray
    base_flux: np.ndarray
    rho_ge: np.ndarray


def _prepare(model: QubitThermalModel, rho0, grid: TimeGrid) -> _ScenarioCache:
    strategy = make_qubit_thermal_strategy(model)
    times, rhos = evolve_arrays(strategy, rho0, grid)
    liouv = superoperator_matrix(strategy)
    vecs = rhos.transpose(0, 2, 1).reshape(len(times), -1)  # column-major vec per row
    dvecs = vecs @ liouv.T
    drhos = dvecs.reshape(len(times), 2, 2).transpose(0, 2, 1)
    base_flux = np.einsum("ij,tji->t", strategy.h, drhos).real
    return _ScenarioCache(
        model=model,
        strategy=strategy,
        times=times,
        rhos=rhos,
        base_flux=base_flux,
        rho_ge=np.ascontiguousarray(rhos[:, 0, 1]),
    )


def _nearest_index(times: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(times - t)))


def _delta_flux_series(q: QubitLITParams, model: QubitThermalModel, cache: _ScenarioCache) -> np.ndarray:
    alpha = q.alpha_mag * np.exp(1j * (q.theta0 + q.theta_rate * cache.times))
    coeff = 1j * (model.omega + q.theta_rate) - 0.5 * (model.gamma_plus + model.gamma_minus)
    return 2.0 * (0.5 * alpha * coeff * cache.rho_ge).real


def _evaluate(objective: Objective, q: QubitLITParams, cache: _ScenarioCache) -> float:
    model = cache.model
    if objective.kind == "instantaneous_flux":
        idx = _nearest_index(cache.times, objective.t)
        dp = _delta_flux_series(q, model, cache)[idx]
        return float(cache.base_flux[idx] + dp)
    if objective.kind == "integrated_flux":
        mask = (cache.times >= objective.t0 - 1e-12) & (cache.times <= objective.t1 + 1e-12)
        flux = cache.base_flux[mask] + _delta_flux_series(q, model, cache)[mask]
        return float(np.trapezoid(flux, cache.times[mask]))
    if objective.kind == "final_internal_energy":
        idx = _nearest_index(cache.times, objective.horizon)
        h_prime = cache.strategy.h + qubit_delta_h(q.alpha_at(cache.times[idx])).matrix
        return float(np.trace(h_prime @ cache.rhos[idx]).real)
    return qubit_asymptotic_ergotropy(q.alpha_at(cache.times[-1]), model)


def evaluate_objective(
    objective: Objective,
    q: QubitLITParams,
    model: QubitThermalModel,
    rho0: DensityMatrix,
    grid: TimeGrid,
) -> float:
    """Evaluate one candidate; integrates the (shared) base evolution itself."""
    return _evaluate(objective, q, _prepare(model, as_matrix(rho0), grid))


@dataclass(frozen=True)
class SearchRow:
    alpha_mag: float
    theta0: float
    theta_rate: float
    value: float
    is_best: bool


@dataclass(frozen=True)
class GridSearchResult:
    best_params: QubitLITParams
    best_value: float
    table: tuple


def grid_search(
    objective: Objective,
    space: SearchSpace,
    model: QubitThermalModel,
    rho0: DensityMatrix,
    grid: TimeGrid,
) -> GridSearchResult:
    """Exhaustive evaluation over the space; the state is integrated once.

    Ties on the objective value are broken by the lexicographically smallest
    (alpha_mag, theta_rate, theta0).
    """
    cache = _prepare(model, as_matrix(rho0), grid)
    sign = 1.0 if objective.sense == "maximize" else -1.0
    entries = []
    best = None
    for q in space.candidates():
        value = _evaluate(objective, q, cache)
        entries.append((q, value))
        key = (q.alpha_mag, q.theta_rate, q.theta0)
        if best is None or sign * value > sign * best[1] or (value == best[1] and key < best[2]):
            best = (q, value, key)
    best_q, best_value, _ = best
    table = tuple(
        SearchRow(
            alpha_mag=q.alpha_mag,
            theta0=q.theta0,
            theta_rate=q.theta_rate,
            value=v,
            is_best=q == best_q,
        )
        for q, v in entries
    )
    return GridSearchResult(best_params=best_q, best_value=best_value, table=table)


def optimal_phase_instantaneous(rho, model: QubitThermalModel, theta_rate: float, t: float) -> float:
    """Closed-form theta0 maximizing the instantaneous flux correction at time t.

    The correction is |alpha| |rho_ge| |K| cos(theta0 + theta_rate t +
    arg(rho_ge) + arg(K)) with K = i(omega + theta_rate) - (gamma_+ +
    gamma_-)/2, so the argmax aligns the cosine at zero.  Returned in
    [0, 2 pi).  Undefined (raises) when the coherence vanishes: every phase
    then gives zero correction.
    """
    r = as_matrix(rho)
    rho_ge = complex(r[0, 1])
    if rho_ge == 0:
        raise ValueError("state has no coherence; the strategy phase is irrelevant")
    coeff = 1j * (model.omega + theta_rate) - 0.5 * (model.gamma_plus + model.gamma_minus)
    theta0 = -(np.angle(rho_ge) + np.angle(coeff) + theta_rate * t)
    return float(np.mod(theta0, 2.0 * math.pi))
