"""Strategies {H, L_mu}, the GKSL generator, and fixed-step RK4 propagation.

A *strategy* is one concrete operator set realizing a Markovian generator:
a Hamiltonian plus an ordered list of Lindblad operators.  The order of the
Lindblad operators is significant because invariance transformations index
into it.  ``superoperator_matrix`` vectorizes the generator exactly and is
the oracle used everywhere to decide whether two strategies generate the
same evolution.

Time-dependent strategies are supplied as schedules: either a plain callable
``t -> Strategy`` or any object with an ``at(t)`` method.  RK4 samples the
schedule at stage times t, t+dt/2 and t+dt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .core import (
    DensityMatrix,
    HermitianOperator,
    SIGMA_PLUS,
    SIGMA_MINUS,
    SIGMA_Z,
    as_matrix,
    hermitian_eigensystem,
    matrix_from_json,
    matrix_to_json,
    max_abs,
    _read_only_copy,
)
from .errors import ConfigError, DimensionMismatch, InvariantViolation, NumericalFailure

TRACE_DRIFT_LIMIT = 1e-9
MAX_GRID_STEPS = 10**8
# Default step for omega = 1 models: one thousandth of the bare period.
DEFAULT_DT_PERIODS = 1e-3


@dataclass(frozen=True)
class Strategy:
    """One operator-set representative {H, [L_mu]} of a Markovian generator."""

    hamiltonian: HermitianOperator
    lindblad_ops: tuple
    label: str = ""

    def __post_init__(self):
        h = self.hamiltonian
        if not isinstance(h, HermitianOperator):
            h = HermitianOperator(as_matrix(h))
        ops = tuple(_read_only_copy(as_matrix(L)) for L in self.lindblad_ops)
        for L in ops:
            if L.shape[0] != h.dim:
                raise DimensionMismatch(
                    f"Lindblad operator of dim {L.shape[0]} does not match H of dim {h.dim}"
                )
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "lindblad_ops", ops)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def h(self) -> np.ndarray:
        return self.hamiltonian.matrix

    @cached_property
    def l_stack(self) -> np.ndarray:
        """Lindblad operators stacked as an (m, d, d) array (read-only)."""
        m = len(self.lindblad_ops)
        out = np.zeros((m, self.dim, self.dim), dtype=complex)
        for i, L in enumerate(self.lindblad_ops):
            out[i] = L
        out.flags.writeable = False
        return out

    @cached_property
    def lsq_sum(self) -> np.ndarray:
        """Sum of L_mu^dag L_mu (read-only)."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for L in self.lindblad_ops:
            out += L.conj().T @ L
        out.flags.writeable = False
        return out

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "H": matrix_to_json(self.h),
            "L": [matrix_to_json(L) for L in self.lindblad_ops],
        }

    @classmethod
    def from_json(cls, obj: dict, path: str = "strategy") -> "Strategy":
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected an object")
        unknown = set(obj) - {"label", "H", "L"}
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        if "H" not in obj or "L" not in obj:
            raise ConfigError(f"{path}: both H and L are required")
        h = matrix_from_json(obj["H"], f"{path}.H")
        if not isinstance(obj["L"], list):
            raise ConfigError(f"{path}.L: expected a list of matrix objects")
        ops = [matrix_from_json(m, f"{path}.L[{i}]") for i, m in enumerate(obj["L"])]
        label = obj.get("label", "")
        if not isinstance(label, str):
            raise ConfigError(f"{path}.label: expected a string")
        try:
            return cls(HermitianOperator(h), tuple(ops), label)
        except (InvariantViolation, DimensionMismatch) as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class TimeGrid:
    """Uniform integration grid: t0, t_max and a fixed step dt."""

    t0: float
    t_max: float
    dt: float

    def __post_init__(self):
        if not self.t0 < self.t_max:
            raise InvariantViolation("TimeGrid requires t0 < t_max")
        if not self.dt > 0:
            raise InvariantViolation("TimeGrid requires dt > 0")
        if (self.t_max - self.t0) / self.dt > MAX_GRID_STEPS:
            raise InvariantViolation(f"TimeGrid exceeds {MAX_GRID_STEPS} steps")

    @property
    def n_steps(self) -> int:
        return max(1, int(math.floor((self.t_max - self.t0) / self.dt + 1e-9)))

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class QubitThermalModel:
    """Qubit with level splitting omega coupled to a bath at 1/beta_f.

    Rates follow the Bose-Einstein occupation nbar = 1/(exp(beta_f omega)-1):
    gamma_plus = gamma0 nbar, gamma_minus = gamma0 (nbar + 1), which keeps
    detailed balance gamma_plus/gamma_minus = exp(-beta_f omega) exact.
    """

    omega: float
    gamma0: float
    beta_f: float

    def __post_init__(self):
        for name in ("omega", "gamma0", "beta_f"):
            if not getattr(self, name) > 0:
                raise InvariantViolation(f"QubitThermalModel requires {name} > 0")

    @property
    def nbar(self) -> float:
        x = self.beta_f * self.omega
        if x > 700.0:  # exp overflow; occupation is zero to double precision
            return 0.0
        return 1.0 / math.expm1(x)

    @property
    def gamma_plus(self) -> float:
        return self.gamma0 * self.nbar

    @property
    def gamma_minus(self) -> float:
        return self.gamma0 * (self.nbar + 1.0)

    def hamiltonian(self) -> HermitianOperator:
        return HermitianOperator(0.5 * self.omega * SIGMA_Z)

    def gibbs(self) -> DensityMatrix:
        return gibbs_state(self.hamiltonian(), self.beta_f)


def make_qubit_thermal_strategy(model: QubitThermalModel) -> Strategy:
    """Canonical thermal-qubit operator set, channel order fixed as [+, -]."""
    ops = (
        math.sqrt(model.gamma_plus) * SIGMA_PLUS,
        math.sqrt(model.gamma_minus) * SIGMA_MINUS,
    )
    return Strategy(model.hamiltonian(), ops, label="qubit-thermal")


def generator_apply(strategy: Strategy, rho) -> np.ndarray:
    """Right-hand side of the Markovian master equation at state rho."""
    r = as_matrix(rho)
    if r.shape[0] != strategy.dim:
        raise DimensionMismatch(
            f"state dim {r.shape[0]} does not match strategy dim {strategy.dim}"
        )
    h = strategy.h
    out = -1j * (h @ r - r @ h)
    for L in strategy.lindblad_ops:
        out += L @ r @ L.conj().T
    s = strategy.lsq_sum
    out -= 0.5 * (s @ r + r @ s)
    return out


def superoperator_matrix(strategy: Strategy) -> np.ndarray:
    """Exact matrix of the generator on column-stacked (column-major) states.

    Column i + j*d is the vectorized image of the matrix unit |i><j|, so
    M @ vec(rho) == vec(generator_apply(strategy, rho)) for every rho.
    """
    d = strategy.dim
    m = np.empty((d * d, d * d), dtype=complex)
    for j in range(d):
        for i in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            m[:, i + j * d] = generator_apply(strategy, unit).ravel(order="F")
    return m


def gibbs_state(h, beta: float) -> DensityMatrix:
    """exp(-beta H)/Z through the eigen-decomposition of H."""
    if not beta > 0:
        raise InvariantViolation("gibbs_state requires beta > 0")
    vals, vecs = hermitian_eigensystem(h)
    weights = np.exp(-beta * (vals - vals[0]))
    weights /= weights.sum()
    return DensityMatrix((vecs * weights) @ vecs.conj().T)


def _schedule_at(strategy_or_schedule):
    if isinstance(strategy_or_schedule, Strategy):
        return None
    at = getattr(strategy_or_schedule, "at", None)
    if at is not None:
        return at
    if callable(strategy_or_schedule):
        return strategy_or_schedule
    raise TypeError(
        "expected a Strategy, a callable t -> Strategy, or an object with .at(t)"
    )


def _sample_steps(n_steps: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise ValueError("sample_stride must be >= 1")
    steps = np.arange(0, n_steps + 1, stride, dtype=np.int64)
    if steps[-1] != n_steps:
        steps = np.append(steps, np.int64(n_steps))
    return steps


def _stage_tables(at, grid: TimeGrid, dim: int):
    """Operator tables at the 2n+1 half-step stage times of the grid."""
    n = grid.n_steps
    ts = grid.t0 + 0.5 * grid.dt * np.arange(2 * n + 1)
    first = at(ts[0])
    if first.dim != dim:
        raise DimensionMismatch("schedule dimension does not match the initial state")
    n_lind = len(first.lindblad_ops)
    hs = np.empty((ts.size, dim, dim), dtype=complex)
    ls = np.empty((ts.size, n_lind, dim, dim), dtype=complex)
    for idx, t in enumerate(ts):
        s = first if idx == 0 else at(t)
        if s.dim != dim or len(s.lindblad_ops) != n_lind:
            raise DimensionMismatch("schedule changed dimensions mid-grid")
        hs[idx] = s.h
        ls[idx] = s.l_stack
    lds = ls.conj().transpose(0, 1, 3, 2)
    sqs = np.einsum("smji,smjk->sik", ls.conj(), ls)
    return hs, np.ascontiguousarray(ls), np.ascontiguousarray(lds), sqs


def evolve_arrays(strategy_or_schedule, rho0, grid: TimeGrid, sample_stride: int = 1):
    """Integrate the master equation; returns (times, states) as arrays.

    States come back as an (n_out, d, d) stack sampled every ``sample_stride``
    steps (the final time is always included).  The trace is renormalized
    each step; drift beyond TRACE_DRIFT_LIMIT raises NumericalFailure.
    """
    r0 = as_matrix(rho0)
    d = r0.shape[0]
    steps = _sample_steps(grid.n_steps, sample_stride)
    at = _schedule_at(strategy_or_schedule)
    if at is None:
        s = strategy_or_schedule
        if s.dim != d:
            raise DimensionMismatch("initial state does not match the strategy dimension")
        liouv = superoperator_matrix(s)
        vec0 = r0.ravel(order="F")
        out, status, bad = _kernels.rk4_superop(
            liouv, vec0, d, grid.dt, grid.n_steps, steps, TRACE_DRIFT_LIMIT
        )
        rhos = out.reshape(-1, d, d).transpose(0, 2, 1)
    else:
        hs, ls, lds, sqs = _stage_tables(at, grid, d)
        rhos, status, bad = _kernels.rk4_stages(
            hs, ls, lds, sqs, r0, grid.dt, grid.n_steps, steps, TRACE_DRIFT_LIMIT
        )
    if status != 0:
        t_bad = grid.t0 + (bad + 1) * grid.dt
        raise NumericalFailure(
            f"trace drift exceeded {TRACE_DRIFT_LIMIT:g} at t = {t_bad:g}; the step dt ="
            f" {grid.dt:g} is too large for this generator"
        )
    return grid.t0 + grid.dt * steps, np.ascontiguousarray(rhos)


def evolve(strategy_or_schedule, rho0: DensityMatrix, grid: TimeGrid, sample_stride: int = 1):
    """Integrate the master equation; returns a list of (time, DensityMatrix).

    Every returned state is re-validated against the DensityMatrix
    invariants, so Hermiticity, trace and positivity failures surface here
    rather than downstream.
    """
    if not isinstance(rho0, DensityMatrix):
        rho0 = DensityMatrix(as_matrix(rho0))
    times, rhos = evolve_arrays(strategy_or_schedule, rho0, grid, sample_stride)
    return [(float(t), DensityMatrix(r)) for t, r in zip(times, rhos)]
