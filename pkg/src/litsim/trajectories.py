"""Quantum-jump unravelling of the master equation.

Each time step applies a POVM built from the strategy: jump operators
J_mu = sqrt(dt) L_mu fire when change mu is detected in the environment,
and J_0 = 1 - i H dt - (dt/2) sum L^dag L applies when nothing is detected.
Averaging the normalized post-measurement states over outcomes reproduces
the deterministic evolution, for every strategy of the invariance class;
individual trajectories, by contrast, depend on the chosen strategy.

Randomness: trajectory k of an ensemble owns the PCG64 stream seeded with
``base_seed XOR k``.  The first draw of every stream selects the initial
state from the eigen-ensemble of the initial density matrix (a no-op for
pure input); the remaining draws drive the per-step outcome selection.
Fixed seeds give bit-identical results run to run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    DensityMatrix,
    PureState,
    as_matrix,
    hermitian_eigensystem,
    identity,
    max_abs,
    _read_only_copy,
)
from .dynamics import Strategy, TimeGrid, _schedule_at
from .errors import DimensionMismatch, InvariantViolation, NumericalFailure

# dt * ||sum L^dag L||_2 must stay below this for the first-order POVM.
RATE_STEP_CAP = 1e-2
DEAD_STATE_TOL = _kernels.DEAD_STATE_TOL
# Target size of per-chunk uniform-draw buffers, in bytes.
_CHUNK_DRAW_BYTES = 3.2e8


def _spectral_norm_hermitian(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m)))) if m.size else 0.0


@dataclass(frozen=True)
class KrausSet:
    """Per-step POVM elements: the no-jump operator plus one jump per channel."""

    j0: np.ndarray
    jumps: tuple
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "j0", _read_only_copy(as_matrix(self.j0)))
        object.__setattr__(self, "jumps", tuple(_read_only_copy(as_matrix(j)) for j in self.jumps))

    @property
    def dim(self) -> int:
        return self.j0.shape[0]

    def ops_array(self) -> np.ndarray:
        """All elements stacked as (m+1, d, d); slot 0 is the no-jump operator."""
        out = np.empty((1 + len(self.jumps), self.dim, self.dim), dtype=complex)
        out[0] = self.j0
        for i, j in enumerate(self.jumps):
            out[1 + i] = j
        return out

    def completeness_defect(self) -> float:
        """Max-norm of sum J_i^dag J_i - 1; second order in dt by construction."""
        total = self.j0.conj().T @ self.j0
        for j in self.jumps:
            total += j.conj().T @ j
        return max_abs(total - identity(self.dim))


def kraus_set(strategy: Strategy, dt: float) -> KrausSet:
    """Build the first-order POVM of a strategy for one step of length dt."""
    if not dt > 0:
        raise InvariantViolation("dt must be positive")
    lsq = strategy.lsq_sum
    rate_norm = _spectral_norm_hermitian(lsq)
    if dt * rate_norm > RATE_STEP_CAP:
        raise NumericalFailure(
            f"dt * ||sum L^dag L|| = {dt * rate_norm:.3e} exceeds {RATE_STEP_CAP:g};"
            " reduce dt"
        )
    j0 = identity(strategy.dim) - 1j * dt * strategy.h - 0.5 * dt * lsq
    jumps = tuple(math.sqrt(dt) * L for L in strategy.lindblad_ops)
    ks = KrausSet(j0=j0, jumps=jumps, dt=float(dt))
    bound = (2.0 * rate_norm**2 + _spectral_norm_hermitian(strategy.h) ** 2) * dt * dt
    if ks.completeness_defect() > bound:
        raise InvariantViolation(
            f"POVM completeness defect {ks.completeness_defect():.3e} exceeds the"
            f" second-order bound {bound:.3e}"
        )
    return ks


def trajectory_step(state: PureState, kraus: KrausSet, draw: float):
    """Apply one POVM step: returns (normalized post-state, outcome index).

    Outcome 0 is "no jump"; outcome mu >= 1 is the jump channel mu-1 of the
    strategy.  The outcome is selected by cumulative inverse sampling of the
    normalized probabilities p_i = ||J_i psi||^2 / sum_j p_j.
    """
    if state.dim != kraus.dim:
        raise DimensionMismatch("state and POVM dimensions differ")
    if not 0.0 <= draw < 1.0:
        raise ValueError("draw must lie in [0, 1)")
    ops = kraus.ops_array()
    cand = ops @ state.amplitudes
    probs = np.einsum("oi,oi->o", cand, cand.conj()).real
    total = float(probs.sum())
    if total < DEAD_STATE_TOL:
        raise NumericalFailure("all outcome probabilities vanished (dead state)")
    csum = np.cumsum(probs)
    sel = int(np.searchsorted(csum, draw * total, side="right"))
    sel = min(sel, len(probs) - 1)
    return PureState(cand[sel] / math.sqrt(probs[sel])), sel


@dataclass(frozen=True)
class TrajectoryRecord:
    """One stochastic realization: states on the grid plus step outcomes.

    ``outcomes[k]`` is the measurement result of the step ending at
    ``times[k+1]``.
    """

    times: tuple
    states: tuple
    outcomes: tuple
    seed: int

    def __post_init__(self):
        if len(self.times) != len(self.states) or len(self.times) != len(self.outcomes) + 1:
            raise InvariantViolation("record lengths are inconsistent")


def _step_op_table(strategy_or_schedule, grid: TimeGrid) -> np.ndarray:
    """POVM elements per step: (1, m+1, d, d) when static, (n, m+1, d, d) otherwise."""
    at = _schedule_at(strategy_or_schedule)
    if at is None:
        return kraus_set(strategy_or_schedule, grid.dt).ops_array()[None, :, :, :]
    n = grid.n_steps
    first = kraus_set(at(grid.t0), grid.dt).ops_array()
    out = np.empty((n,) + first.shape, dtype=complex)
    out[0] = first
    for k in range(1, n):
        out[k] = kraus_set(at(grid.t0 + k * grid.dt), grid.dt).ops_array()
    return out


def _stream_draws(seed: int, count: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(seed)).random(count)


def run_trajectory(strategy_or_schedule, psi0: PureState, grid: TimeGrid, seed: int) -> TrajectoryRecord:
    """Run one quantum-jump trajectory with a deterministic PCG64 stream."""
    step_ops = _step_op_table(strategy_or_schedule, grid)
    if psi0.dim != step_ops.shape[-1]:
        raise DimensionMismatch("initial state does not match the strategy dimension")
    n = grid.n_steps
    draws = _stream_draws(seed, n + 1)[1:]  # slot 0 is the initial-state draw
    states, outcomes, status, bad = _kernels.jump_trajectory(step_ops, draws, psi0.amplitudes)
    if status != 0:
        raise NumericalFailure(
            f"all outcome probabilities vanished at t = {grid.t0 + bad * grid.dt:g}"
        )
    times = tuple(float(t) for t in grid.times())
    return TrajectoryRecord(
        times=times,
        states=tuple(PureState(s) for s in states),
        outcomes=tuple(int(o) for o in outcomes),
        seed=int(seed),
    )


def ensemble_average(records) -> list:
    """Mean projector over records sharing one grid: list of (t, DensityMatrix)."""
    records = list(records)
    if not records:
        raise ValueError("empty ensemble")
    times = records[0].times
    for rec in records[1:]:
        if rec.times != times:
            raise DimensionMismatch("records do not share a common time grid")
    dim = records[0].states[0].dim
    acc = np.zeros((len(times), dim, dim), dtype=complex)
    for rec in records:
        for k, st in enumerate(rec.states):
            acc[k] += st.projector()
    acc /= len(records)
    return [(t, DensityMatrix(acc[k])) for k, t in enumerate(times)]


def _initial_ensemble(initial):
    """Eigen-ensemble (weights, vectors) used to sample initial pure states."""
    if isinstance(initial, PureState):
        return np.array([1.0]), initial.amplitudes[None, :]
    rho = initial if isinstance(initial, DensityMatrix) else DensityMatrix(as_matrix(initial))
    vals, vecs = hermitian_eigensystem(rho.matrix)
    weights = np.clip(vals[::-1], 0.0, None)
    weights = weights / weights.sum()
    return weights, np.ascontiguousarray(vecs[:, ::-1].T)


def _chunk_size(n: int, draws_per_traj: int) -> int:
    return max(1, min(n, int(_CHUNK_DRAW_BYTES // (8 * draws_per_traj))))


@dataclass(frozen=True)
class JumpEnsemble:
    """Streamed ensemble summary: mean state per grid time plus jump metadata."""

    times: np.ndarray
    mean_states: np.ndarray
    first_jump_steps: np.ndarray
    n_trajectories: int
    base_seed: int

    def mean_density_matrices(self) -> list:
        return [(float(t), DensityMatrix(m)) for t, m in zip(self.times, self.mean_states)]


def run_jump_ensemble(strategy_or_schedule, initial, grid: TimeGrid, n_trajectories: int, base_seed: int) -> JumpEnsemble:
    """Run n trajectories, streaming the ensemble mean (no per-state storage).

    ``initial`` may be a PureState or a DensityMatrix; mixed states are
    sampled from their eigen-ensemble with eigenvalue weights.
    """
    if n_trajectories < 1:
        raise ValueError("empty ensemble")
    step_ops = _step_op_table(strategy_or_schedule, grid)
    n_steps = grid.n_steps
    dim = step_ops.shape[-1]
    weights, vectors = _initial_ensemble(initial)
    if vectors.shape[1] != dim:
        raise DimensionMismatch("initial state does not match the strategy dimension")
    wsum = np.cumsum(weights)
    acc = np.zeros((n_steps + 1, dim, dim), dtype=complex)
    first_jump = np.full(n_trajectories, -1, dtype=np.int64)
    chunk = _chunk_size(n_trajectories, n_steps + 1)
    for start in range(0, n_trajectories, chunk):
        stop = min(start + chunk, n_trajectories)
        draws = np.empty((stop - start, n_steps + 1))
        for row, k in enumerate(range(start, stop)):
            draws[row] = _stream_draws(base_seed ^ k, n_steps + 1)
        init_idx = np.minimum(
            np.searchsorted(wsum, draws[:, 0] * wsum[-1], side="right"), len(weights) - 1
        )
        psi0s = vectors[init_idx]
        status, bad_traj, bad_step = _kernels.jump_ensemble(
            step_ops, draws[:, 1:], psi0s, acc, first_jump[start:stop]
        )
        if status != 0:
            raise NumericalFailure(
                f"trajectory {start + bad_traj} hit a dead state at step {bad_step}"
            )
    return JumpEnsemble(
        times=grid.times(),
        mean_states=acc / n_trajectories,
        first_jump_steps=first_jump,
        n_trajectories=int(n_trajectories),
        base_seed=int(base_seed),
    )


def ensemble_member(strategy_or_schedule, initial, grid: TimeGrid, base_seed: int, k: int) -> TrajectoryRecord:
    """Replay trajectory k of an ensemble as a full record.

    Uses the identical stream layout as ``run_jump_ensemble``: stream seed
    ``base_seed XOR k``, first draw selecting the initial eigen-ensemble
    member, remaining draws driving the steps.  For pure initial states this
    coincides with ``run_trajectory`` at seed ``base_seed XOR k``.
    """
    step_ops = _step_op_table(strategy_or_schedule, grid)
    n = grid.n_steps
    weights, vectors = _initial_ensemble(initial)
    draws = _stream_draws(base_seed ^ k, n + 1)
    wsum = np.cumsum(weights)
    idx = min(int(np.searchsorted(wsum, draws[0] * wsum[-1], side="right")), len(weights) - 1)
    states, outcomes, status, bad = _kernels.jump_trajectory(step_ops, draws[1:], vectors[idx])
    if status != 0:
        raise NumericalFailure(
            f"all outcome probabilities vanished at t = {grid.t0 + bad * grid.dt:g}"
        )
    return TrajectoryRecord(
        times=tuple(float(t) for t in grid.times()),
        states=tuple(PureState(s) for s in states),
        outcomes=tuple(int(o) for o in outcomes),
        seed=int(base_seed ^ k),
    )


def sample_first_jump_steps(strategy_or_schedule, initial, grid: TimeGrid, n_trajectories: int, base_seed: int) -> np.ndarray:
    """First-jump step index per trajectory (-1 when no jump occurs on the grid).

    Uses the same per-trajectory streams as ``run_jump_ensemble`` but stops
    each trajectory at its first jump.
    """
    if n_trajectories < 1:
        raise ValueError("empty ensemble")
    step_ops = _step_op_table(strategy_or_schedule, grid)
    n_steps = grid.n_steps
    weights, vectors = _initial_ensemble(initial)
    wsum = np.cumsum(weights)
    first_jump = np.full(n_trajectories, -1, dtype=np.int64)
    chunk = _chunk_size(n_trajectories, n_steps + 1)
    for start in range(0, n_trajectories, chunk):
        stop = min(start + chunk, n_trajectories)
        draws = np.empty((stop - start, n_steps + 1))
        for row, k in enumerate(range(start, stop)):
            draws[row] = _stream_draws(base_seed ^ k, n_steps + 1)
        init_idx = np.minimum(
            np.searchsorted(wsum, draws[:, 0] * wsum[-1], side="right"), len(weights) - 1
        )
        psi0s = vectors[init_idx]
        status, bad_traj, bad_step = _kernels.first_jump_steps(
            step_ops, draws[:, 1:], psi0s, first_jump[start:stop]
        )
        if status != 0:
            raise NumericalFailure(
                f"trajectory {start + bad_traj} hit a dead state at step {bad_step}"
            )
    return first_jump


def exponential_ks_statistic(samples, rate: float) -> float:
    """Kolmogorov-Smirnov distance of samples to Exp(rate)."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("no samples")
    n = x.size
    cdf = 1.0 - np.exp(-rate * x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))
