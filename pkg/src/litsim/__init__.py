"""Open-quantum-system simulator with first-class invariance transformations.

The Markovian master equation does not fix its operator set {H, L_mu}
uniquely: a family of transformations remaps the set while leaving the state
evolution untouched.  This package represents those transformations
explicitly, computes the strategy-dependent quantities they move (energy
flux, stored ergotropy), searches for optimal transformation parameters, and
realizes each choice operationally as a quantum-jump monitoring scheme.
"""

__version__ = "0.1.0"

from ._kernels import active_backend, set_backend
from .core import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    anticommutator,
    batched_trace_distance,
    commutator,
    dagger,
    expectation,
    hermitian_eigensystem,
    matrix_from_json,
    matrix_to_json,
    trace_distance,
)
from .dynamics import (
    QubitThermalModel,
    Strategy,
    TimeGrid,
    evolve,
    evolve_arrays,
    generator_apply,
    gibbs_state,
    make_qubit_thermal_strategy,
    superoperator_matrix,
)
from .errors import ConfigError, DimensionMismatch, InvariantViolation, NumericalFailure
from .lit import (
    LITParams,
    LITSchedule,
    QubitLITParams,
    TransformedStrategy,
    apply_lit,
    compose_lit,
    delta_hamiltonian,
    identity_lit,
    inverse_lit,
    qubit_alpha,
    qubit_delta_h,
    qubit_lit_from_alpha,
    qubit_lit_schedule,
    verify_invariance,
)
from .observables import (
    ErgotropyReport,
    FluxSample,
    delta_flux_general,
    delta_flux_qubit,
    energy_flux,
    ergotropy,
    internal_energy,
    qubit_asymptotic_ergotropy,
    qubit_gap_factor,
    qubit_hprime_eigensystem,
)
from .optimizer import (
    GridSearchResult,
    Objective,
    SearchSpace,
    evaluate_objective,
    grid_search,
    optimal_phase_instantaneous,
)
from .trajectories import (
    JumpEnsemble,
    KrausSet,
    TrajectoryRecord,
    ensemble_average,
    ensemble_member,
    exponential_ks_statistic,
    kraus_set,
    run_jump_ensemble,
    run_trajectory,
    sample_first_jump_steps,
    trajectory_step,
)
