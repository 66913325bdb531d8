"""Batch front-end: JSON scenarios in, CSV series plus a run manifest out.

Subcommands mirror the run kinds::

    litsim evolve|flux|ergotropy|trajectories|optimize|fig1|lit-check
           [--config scenario.json] [--out DIR] [--seed N] [--dt X] [--quiet]

Exit codes: 0 ok, 2 malformed scenario, 3 numerical failure.

Scenario schema (MATRIX means {"dim": d, "re": [...], "im": [...]} row-major)::

    {
      "run": "evolve",                       # optional, must match subcommand
      "model": {"omega": 1.0, "gamma0": 0.01, "beta_f": 1.0}
               | {"strategy": {"label": "...", "H": MATRIX, "L": [MATRIX, ...]}},
      "initial_state": {"pure": {"re": [...], "im": [...]}}
                      | {"gibbs": {"beta": 5.0}},
      "grid": {"t0": 0.0, "t_max": 20.0, "dt": 0.001},
      "lit": {"qubit": {"alpha_mag": 0.1, "theta0": 0.0, "theta_rate": -1.0}}
            | {"general": {"U": MATRIX, "Gamma": {"re": [...], "im": [...]}, "phi": 0.0}},
      "stride": 100,                         # CSV sampling stride (default 1)
      "trajectories": {"n": 1000, "seed": 7, "records": 0},
      "objective": {"kind": "integrated_flux", "sense": "maximize",
                     "t": ..., "t0": ..., "t1": ..., "horizon": ...},
      "space": {"alpha_mag": [...], "theta0": [...], "theta_rate": [...]},
      "alpha_mags": [0.0, 0.5, 1.0],         # ergotropy run
      "beta_initial": 5.0,                   # fig1 run
      "alpha_mag": 0.1,                      # fig1 run
      "strategy_a": {...}, "strategy_b": {...}, "tol": 1e-10   # lit-check run
    }

CSV outputs (all carry a header row; floats printed with 17 significant
digits so they round-trip exactly):

* evolve     -> evolution.csv: t, rho_re_i_j..., rho_im_i_j... (row-major)
* flux       -> flux.csv: t, internal_energy, flux
* ergotropy  -> ergotropy.csv: alpha_mag, gap_factor, ergotropy,
                ergotropy_general (independent spectral-decomposition check)
* trajectories -> ensemble_summary.csv: t, rho_re_i_j..., rho_im_i_j...,
                trace_distance (to the deterministic evolution); plus
                trajectory_NNN.csv: t, outcome, amp_i_re, amp_i_im...
                (outcome -1 on the initial row, 0 = no jump, mu >= 1 = channel)
* optimize   -> search.csv: alpha_mag, theta0, theta_rate, objective, is_best
* fig1       -> fig1_alpha0.csv, fig1_constant_theta.csv, fig1_corotating.csv,
                fig1_counterrotating.csv: t, internal_energy, flux

Every run also writes run_manifest.json (resolved scenario, code version,
backend, tolerances, output names).  Re-running a manifest file as --config
reproduces the outputs byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import active_backend
from .core import (
    DensityMatrix,
    PureState,
    TRACE_TOL,
    HERMITICITY_TOL,
    EIGENVALUE_FLOOR,
    UNITARITY_TOL,
    STATE_NORM_TOL,
    batched_trace_distance,
)
from .dynamics import (
    QubitThermalModel,
    Strategy,
    TimeGrid,
    TRACE_DRIFT_LIMIT,
    evolve_arrays,
    gibbs_state,
    make_qubit_thermal_strategy,
)
from .errors import ConfigError, DimensionMismatch, InvariantViolation, NumericalFailure
from .lit import (
    INVARIANCE_TOL,
    LITParams,
    LITSchedule,
    QubitLITParams,
    TransformedStrategy,
    qubit_lit_schedule,
    verify_invariance,
)
from .observables import energy_flux, ergotropy, internal_energy, qubit_asymptotic_ergotropy, qubit_gap_factor, qubit_delta_h
from .optimizer import Objective, SearchSpace, grid_search, optimal_phase_instantaneous
from .trajectories import RATE_STEP_CAP, ensemble_member, run_jump_ensemble

RUN_KINDS = ("evolve", "flux", "ergotropy", "trajectories", "optimize", "fig1", "lit_check")

FIG1_DEFAULTS = {
    "omega": 1.0,
    "gamma0": 1e-2,
    "beta_f": 1.0,
    "beta_initial": 5.0,
    "alpha_mag": 0.1,
    "t_max": 1000.0,
    "dt": 2.0 * math.pi * 1e-3,
    "stride": 100,
}

_TOLERANCES = {
    "trace_drift_limit": TRACE_DRIFT_LIMIT,
    "hermiticity": HERMITICITY_TOL,
    "state_trace": TRACE_TOL,
    "eigenvalue_floor": EIGENVALUE_FLOOR,
    "state_norm": STATE_NORM_TOL,
    "unitarity": UNITARITY_TOL,
    "invariance": INVARIANCE_TOL,
    "rate_step_cap": RATE_STEP_CAP,
}


# ---------------------------------------------------------------------------
# Config validation helpers
# ---------------------------------------------------------------------------

def _expect_object(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")


def _reject_unknown(obj, path, allowed):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")


def _require(obj, path, key):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: required")
    return obj[key]


def _number(obj, path, key, default=None, positive=False, nonnegative=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number")
    v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}: must be > 0")
    if nonnegative and v < 0:
        raise ConfigError(f"{path}.{key}: must be >= 0")
    return v


def _integer(obj, path, key, default=None, minimum=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}")
    return v


def _number_list(obj, path, key):
    v = _require(obj, path, key)
    if not isinstance(v, list) or not v or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ConfigError(f"{path}.{key}: expected a non-empty list of numbers")
    return [float(x) for x in v]


def _parse_model(cfg, path):
    _expect_object(cfg, path)
    if "strategy" in cfg:
        _reject_unknown(cfg, path, {"strategy"})
        return None, Strategy.from_json(cfg["strategy"], f"{path}.strategy")
    _reject_unknown(cfg, path, {"omega", "gamma0", "beta_f"})
    model = QubitThermalModel(
        omega=_number(cfg, path, "omega", positive=True),
        gamma0=_number(cfg, path, "gamma0", positive=True),
        beta_f=_number(cfg, path, "beta_f", positive=True),
    )
    return model, make_qubit_thermal_strategy(model)


def _parse_initial(cfg, path, strategy):
    _expect_object(cfg, path)
    if set(cfg) == {"pure"}:
        spec = cfg["pure"]
        _expect_object(spec, f"{path}.pure")
        _reject_unknown(spec, f"{path}.pure", {"re", "im"})
        re = _number_list(spec, f"{path}.pure", "re")
        im = _number_list(spec, f"{path}.pure", "im")
        if len(re) != len(im):
            raise ConfigError(f"{path}.pure: re and im lengths differ")
        try:
            psi = PureState(np.asarray(re) + 1j * np.asarray(im))
        except (InvariantViolation, DimensionMismatch) as exc:
            raise ConfigError(f"{path}.pure: {exc}") from None
        if psi.dim != strategy.dim:
            raise ConfigError(f"{path}.pure: state dim {psi.dim} does not match the model")
        return psi
    if set(cfg) == {"gibbs"}:
        spec = cfg["gibbs"]
        _expect_object(spec, f"{path}.gibbs")
        _reject_unknown(spec, f"{path}.gibbs", {"beta"})
        beta = _number(spec, f"{path}.gibbs", "beta", positive=True)
        return gibbs_state(strategy.hamiltonian, beta)
    raise ConfigError(f"{path}: expected exactly one of 'pure' or 'gibbs'")


def _parse_grid(cfg, path):
    _expect_object(cfg, path)
    _reject_unknown(cfg, path, {"t0", "t_max", "dt"})
    try:
        return TimeGrid(
            t0=_number(cfg, path, "t0", default=0.0),
            t_max=_number(cfg, path, "t_max"),
            dt=_number(cfg, path, "dt", positive=True),
        )
    except InvariantViolation as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_lit(cfg, path, model):
    _expect_object(cfg, path)
    if set(cfg) == {"qubit"}:
        if model is None:
            raise ConfigError(f"{path}.qubit: needs a thermal qubit model")
        return QubitLITParams.from_json(cfg["qubit"], f"{path}.qubit"), None
    if set(cfg) == {"general"}:
        return None, LITParams.from_json(cfg["general"], f"{path}.general")
    raise ConfigError(f"{path}: expected exactly one of 'qubit' or 'general'")


def _parse_objective(cfg, path):
    _expect_object(cfg, path)
    _reject_unknown(cfg, path, {"kind", "sense", "t", "t0", "t1", "horizon"})
    kind = _require(cfg, path, "kind")
    sense = cfg.get("sense", "maximize")
    kwargs = {}
    for key in ("t", "t0", "t1", "horizon"):
        if key in cfg:
            kwargs[key] = _number(cfg, path, key)
    try:
        return Objective(kind=kind, sense=sense, **kwargs)
    except (InvariantViolation, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_space(cfg, path):
    _expect_object(cfg, path)
    _reject_unknown(cfg, path, {"alpha_mag", "theta0", "theta_rate"})
    try:
        return SearchSpace(
            alpha_mags=tuple(_number_list(cfg, path, "alpha_mag")),
            theta0s=tuple(_number_list(cfg, path, "theta0")),
            theta_rates=tuple(_number_list(cfg, path, "theta_rate")),
        )
    except InvariantViolation as exc:
        raise ConfigError(f"{path}: {exc}") from None


_KIND_KEYS = {
    "evolve": {"run", "model", "initial_state", "grid", "lit", "stride"},
    "flux": {"run", "model", "initial_state", "grid", "lit", "stride"},
    "ergotropy": {"run", "model", "alpha_mags"},
    "trajectories": {"run", "model", "initial_state", "grid", "lit", "trajectories", "stride"},
    "optimize": {"run", "model", "initial_state", "grid", "objective", "space"},
    "fig1": {"run", "model", "grid", "beta_initial", "alpha_mag", "stride"},
    "lit_check": {"run", "strategy_a", "strategy_b", "tol"},
}


@dataclass(frozen=True)
class Scenario:
    """A validated run description plus the canonical config it came from."""

    kind: str
    config: dict
    model: QubitThermalModel | None = None
    strategy: Strategy | None = None
    initial: object = None
    grid: TimeGrid | None = None
    lit_qubit: QubitLITParams | None = None
    lit_general: LITParams | None = None
    stride: int = 1
    n_traj: int = 0
    seed: int = 0
    records: int = 0
    objective: Objective | None = None
    space: SearchSpace | None = None
    alpha_mags: tuple = ()
    beta_initial: float = 0.0
    alpha_mag: float = 0.0
    check_a: Strategy | None = None
    check_b: Strategy | None = None
    check_tol: float = INVARIANCE_TOL


def parse_scenario(document) -> Scenario:
    """Validate a scenario JSON document (text or parsed object).

    Unknown keys anywhere are rejected, and every message names the exact
    JSON path of the offending field.  A run manifest is accepted as well:
    its embedded "scenario" object is unwrapped.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    _expect_object(document, "$")
    if "scenario" in document:  # run manifest: unwrap the embedded scenario
        document = document["scenario"]
        _expect_object(document, "$.scenario")
    cfg = json.loads(json.dumps(document))  # deep copy, JSON-clean
    kind = cfg.get("run")
    if kind not in RUN_KINDS:
        raise ConfigError(f"$.run: expected one of {sorted(RUN_KINDS)}, got {kind!r}")
    _reject_unknown(cfg, "$", _KIND_KEYS[kind])

    if kind == "lit_check":
        a = Strategy.from_json(_require(cfg, "$", "strategy_a"), "$.strategy_a")
        b = Strategy.from_json(_require(cfg, "$", "strategy_b"), "$.strategy_b")
        tol = _number(cfg, "$", "tol", default=INVARIANCE_TOL, positive=True)
        return Scenario(kind=kind, config=cfg, check_a=a, check_b=b, check_tol=tol)

    if kind == "fig1":
        model_cfg = cfg.get("model", {})
        _expect_object(model_cfg, "$.model")
        _reject_unknown(model_cfg, "$.model", {"omega", "gamma0", "beta_f"})
        model = QubitThermalModel(
            omega=_number(model_cfg, "$.model", "omega", default=FIG1_DEFAULTS["omega"], positive=True),
            gamma0=_number(model_cfg, "$.model", "gamma0", default=FIG1_DEFAULTS["gamma0"], positive=True),
            beta_f=_number(model_cfg, "$.model", "beta_f", default=FIG1_DEFAULTS["beta_f"], positive=True),
        )
        grid_cfg = cfg.get("grid", {})
        _expect_object(grid_cfg, "$.grid")
        _reject_unknown(grid_cfg, "$.grid", {"t0", "t_max", "dt"})
        grid = TimeGrid(
            t0=_number(grid_cfg, "$.grid", "t0", default=0.0),
            t_max=_number(grid_cfg, "$.grid", "t_max", default=FIG1_DEFAULTS["t_max"]),
            dt=_number(grid_cfg, "$.grid", "dt", default=FIG1_DEFAULTS["dt"], positive=True),
        )
        return Scenario(
            kind=kind,
            config=cfg,
            model=model,
            strategy=make_qubit_thermal_strategy(model),
            grid=grid,
            stride=_integer(cfg, "$", "stride", default=FIG1_DEFAULTS["stride"], minimum=1),
            beta_initial=_number(cfg, "$", "beta_initial", default=FIG1_DEFAULTS["beta_initial"], positive=True),
            alpha_mag=_number(cfg, "$", "alpha_mag", default=FIG1_DEFAULTS["alpha_mag"], nonnegative=True),
        )

    model, strategy = _parse_model(_require(cfg, "$", "model"), "$.model")

    if kind == "ergotropy":
        if model is None:
            raise ConfigError("$.model: the ergotropy run needs a thermal qubit model")
        alphas = _number_list(cfg, "$", "alpha_mags")
        if any(a < 0 for a in alphas):
            raise ConfigError("$.alpha_mags: values must be >= 0")
        return Scenario(kind=kind, config=cfg, model=model, strategy=strategy, alpha_mags=tuple(alphas))

    initial = _parse_initial(_require(cfg, "$", "initial_state"), "$.initial_state", strategy)
    grid = _parse_grid(_require(cfg, "$", "grid"), "$.grid")

    if kind == "optimize":
        if model is None:
            raise ConfigError("$.model: the optimize run needs a thermal qubit model")
        objective = _parse_objective(_require(cfg, "$", "objective"), "$.objective")
        space = _parse_space(_require(cfg, "$", "space"), "$.space")
        return Scenario(
            kind=kind, config=cfg, model=model, strategy=strategy, initial=initial,
            grid=grid, objective=objective, space=space,
        )

    lit_qubit = lit_general = None
    if "lit" in cfg:
        lit_qubit, lit_general = _parse_lit(cfg["lit"], "$.lit", model)

    stride = _integer(cfg, "$", "stride", default=1, minimum=1)
    sc_kwargs = dict(
        kind=kind, config=cfg, model=model, strategy=strategy, initial=initial,
        grid=grid, lit_qubit=lit_qubit, lit_general=lit_general, stride=stride,
    )
    if kind == "trajectories":
        tr = _require(cfg, "$", "trajectories")
        _expect_object(tr, "$.trajectories")
        _reject_unknown(tr, "$.trajectories", {"n", "seed", "records"})
        n = _integer(tr, "$.trajectories", "n")
        if n < 1:
            raise ConfigError("$.trajectories.n: empty ensemble (n must be >= 1)")
        sc_kwargs.update(
            n_traj=n,
            seed=_integer(tr, "$.trajectories", "seed", default=0, minimum=0),
            records=_integer(tr, "$.trajectories", "records", default=0, minimum=0),
        )
    return Scenario(**sc_kwargs)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _state_columns(dim: int):
    names = [f"rho_re_{i}_{j}" for i in range(dim) for j in range(dim)]
    names += [f"rho_im_{i}_{j}" for i in range(dim) for j in range(dim)]
    return names


def _state_row(matrix: np.ndarray):
    flat = np.asarray(matrix).ravel()
    return [x.real for x in flat] + [x.imag for x in flat]


def _write_manifest(out_dir: Path, scenario_cfg: dict, outputs) -> Path:
    manifest = {
        "scenario": scenario_cfg,
        "code_version": __version__,
        "backend": active_backend(),
        "tolerances": _TOLERANCES,
        "outputs": [str(p.name) for p in outputs],
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _transformed(scenario) -> TransformedStrategy | None:
    if scenario.lit_qubit is not None:
        return TransformedStrategy(
            scenario.strategy, qubit_lit_schedule(scenario.lit_qubit, scenario.model)
        )
    if scenario.lit_general is not None:
        return TransformedStrategy(scenario.strategy, LITSchedule.constant(scenario.lit_general))
    return None


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run_evolve(sc: Scenario, out_dir: Path):
    target = _transformed(sc) or sc.strategy
    times, rhos = evolve_arrays(target, sc.initial, sc.grid, sc.stride)
    rows = [[t] + _state_row(r) for t, r in zip(times, rhos)]
    path = out_dir / "evolution.csv"
    _write_csv(path, ["t"] + _state_columns(sc.strategy.dim), rows)
    return [path]


def _run_flux(sc: Scenario, out_dir: Path):
    target = _transformed(sc) or sc.strategy
    times, rhos = evolve_arrays(sc.strategy, sc.initial, sc.grid, sc.stride)
    rows = []
    for t, r in zip(times, rhos):
        if isinstance(target, Strategy):
            h = target.h
        else:
            h = target.at(t).h
        rows.append([t, internal_energy(h, r), energy_flux(target, r, t).power])
    path = out_dir / "flux.csv"
    _write_csv(path, ["t", "internal_energy", "flux"], rows)
    return [path]


def _run_ergotropy(sc: Scenario, out_dir: Path):
    model = sc.model
    rho_as = model.gibbs()
    rows = []
    for a in sc.alpha_mags:
        closed = qubit_asymptotic_ergotropy(a, model)
        h_prime = sc.strategy.h + qubit_delta_h(a).matrix
        general = ergotropy(h_prime, rho_as).value
        rows.append([a, qubit_gap_factor(a, model.omega), closed, general])
    path = out_dir / "ergotropy.csv"
    _write_csv(path, ["alpha_mag", "gap_factor", "ergotropy", "ergotropy_general"], rows)
    return [path]


def _run_trajectories(sc: Scenario, out_dir: Path):
    target = _transformed(sc) or sc.strategy
    ens = run_jump_ensemble(target, sc.initial, sc.grid, sc.n_traj, sc.seed)
    ref_times, ref_rhos = evolve_arrays(sc.strategy, sc.initial, sc.grid)
    dist = batched_trace_distance(ens.mean_states, ref_rhos)
    stride = sc.stride
    idx = np.arange(0, len(ref_times), stride)
    if idx[-1] != len(ref_times) - 1:
        idx = np.append(idx, len(ref_times) - 1)
    rows = [
        [ref_times[k]] + _state_row(ens.mean_states[k]) + [dist[k]]
        for k in idx
    ]
    path = out_dir / "ensemble_summary.csv"
    _write_csv(path, ["t"] + _state_columns(sc.strategy.dim) + ["trace_distance"], rows)
    outputs = [path]
    dim = sc.strategy.dim
    amp_cols = [c for i in range(dim) for c in (f"amp_{i}_re", f"amp_{i}_im")]
    for k in range(min(sc.records, sc.n_traj)):
        rec = ensemble_member(target, sc.initial, sc.grid, sc.seed, k)
        rows = []
        for pos, t in enumerate(rec.times):
            outcome = -1 if pos == 0 else rec.outcomes[pos - 1]
            amps = rec.states[pos].amplitudes
            row = [t, outcome]
            for a in amps:
                row += [a.real, a.imag]
            rows.append(row)
        p = out_dir / f"trajectory_{k:03d}.csv"
        _write_csv(p, ["t", "outcome"] + amp_cols, rows)
        outputs.append(p)
    return outputs


def _run_optimize(sc: Scenario, out_dir: Path):
    result = grid_search(sc.objective, sc.space, sc.model, sc.initial, sc.grid)
    rows = [
        [r.alpha_mag, r.theta0, r.theta_rate, r.value, int(r.is_best)]
        for r in result.table
    ]
    path = out_dir / "search.csv"
    _write_csv(path, ["alpha_mag", "theta0", "theta_rate", "objective", "is_best"], rows)
    return [path]


def _run_lit_check(sc: Scenario, out_dir: Path, quiet: bool):
    report = verify_invariance(sc.check_a, sc.check_b, sc.check_tol)
    path = out_dir / "lit_check.json"
    path.write_text(
        json.dumps(
            {
                "invariant": report.invariant,
                "max_deviation": report.max_deviation,
                "tol": sc.check_tol,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    if not quiet:
        verdict = "INVARIANT" if report.invariant else "NOT INVARIANT"
        print(f"{verdict} (max generator deviation {report.max_deviation:.3e},"
              f" tol {sc.check_tol:g})")
    return [path]


def fig1_strategies(sc: Scenario):
    """The four monitored strategies of the flux/energy comparison.

    The rotating variants lock theta_rate to -omega so that alpha(t) tracks
    the coherence phase; constructive and destructive versions differ by a
    pi shift of theta0.  theta_rate = 0 keeps alpha static, which leaves the
    natural coherence oscillation visible in the flux.
    """
    model = sc.model
    p_g = 1.0 / (1.0 + math.exp(-sc.beta_initial * model.omega))
    psi0 = PureState(np.array([math.sqrt(p_g), math.sqrt(1.0 - p_g)], dtype=complex))
    rho0 = DensityMatrix.from_pure(psi0)
    theta_lock = optimal_phase_instantaneous(rho0, model, theta_rate=-model.omega, t=sc.grid.t0)
    a = sc.alpha_mag * model.omega
    variants = [
        ("alpha0", None),
        ("constant_theta", QubitLITParams(a, 0.0, 0.0)),
        ("corotating", QubitLITParams(a, theta_lock, -model.omega)),
        ("counterrotating", QubitLITParams(a, math.fmod(theta_lock + math.pi, 2.0 * math.pi), -model.omega)),
    ]
    return rho0, variants


def run_fig1(sc: Scenario, out_dir: Path):
    """Emit flux and internal-energy series for the four strategies.

    All four share the identical state trajectory (integrated once from the
    base strategy); only the operator sets through which energy is accounted
    differ.
    """
    rho0, variants = fig1_strategies(sc)
    times, rhos = evolve_arrays(sc.strategy, rho0, sc.grid, sc.stride)
    outputs = []
    for label, q in variants:
        if q is None:
            target = sc.strategy
            rows = [
                [t, internal_energy(sc.strategy.h, r), energy_flux(target, r, t).power]
                for t, r in zip(times, rhos)
            ]
        else:
            sched = TransformedStrategy(sc.strategy, qubit_lit_schedule(q, sc.model))
            rows = [
                [t, internal_energy(sched.at(t).h, r), energy_flux(sched, r, t).power]
                for t, r in zip(times, rhos)
            ]
        path = out_dir / f"fig1_{label}.csv"
        _write_csv(path, ["t", "internal_energy", "flux"], rows)
        outputs.append(path)
    return outputs


def run_scenario(scenario: Scenario, out_dir, quiet: bool = False):
    """Dispatch a parsed scenario; returns the list of written files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if scenario.kind == "evolve":
        outputs = _run_evolve(scenario, out_dir)
    elif scenario.kind == "flux":
        outputs = _run_flux(scenario, out_dir)
    elif scenario.kind == "ergotropy":
        outputs = _run_ergotropy(scenario, out_dir)
    elif scenario.kind == "trajectories":
        outputs = _run_trajectories(scenario, out_dir)
    elif scenario.kind == "optimize":
        outputs = _run_optimize(scenario, out_dir)
    elif scenario.kind == "fig1":
        outputs = run_fig1(scenario, out_dir)
    else:
        outputs = _run_lit_check(scenario, out_dir, quiet)
    outputs.append(_write_manifest(out_dir, scenario.config, outputs))
    if not quiet:
        for p in outputs:
            print(p)
    return outputs


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="litsim",
        description="Open-quantum-system runs with searchable invariance transformations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("evolve", "flux", "ergotropy", "trajectories", "optimize", "fig1", "lit-check"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="scenario JSON (or a previous run manifest)")
        p.add_argument("--out", default="litsim-out", help="output directory")
        p.add_argument("--seed", type=int, help="override the trajectory base seed")
        p.add_argument("--dt", type=float, help="override the grid step")
        p.add_argument("--quiet", action="store_true")
    return parser


def _scenario_from_args(args) -> Scenario:
    kind = args.command.replace("-", "_")
    if args.config is None:
        if kind != "fig1":
            raise ConfigError(f"--config is required for the {args.command} run")
        doc = {}
    else:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from None
    if isinstance(doc, dict) and "scenario" in doc:
        doc = doc["scenario"]
    if not isinstance(doc, dict):
        raise ConfigError("$: expected an object")
    declared = doc.get("run")
    if declared is not None and declared != kind:
        raise ConfigError(f"$.run: config says {declared!r} but the subcommand is {kind!r}")
    doc = dict(doc)
    doc["run"] = kind
    if args.dt is not None:
        if kind == "lit_check":
            raise ConfigError("--dt does not apply to lit-check")
        grid = dict(doc.get("grid", {}))
        grid["dt"] = args.dt
        doc["grid"] = grid
    if args.seed is not None:
        if kind != "trajectories":
            raise ConfigError("--seed applies only to trajectories runs")
        tr = dict(doc.get("trajectories", {}))
        tr["seed"] = args.seed
        doc["trajectories"] = tr
    return parse_scenario(doc)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = _scenario_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        run_scenario(scenario, args.out, quiet=args.quiet)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (InvariantViolation, DimensionMismatch) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
