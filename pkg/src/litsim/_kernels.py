"""Hot numerical kernels: numba-compiled fast path plus a pure-numpy fallback.

The backend is chosen once at import time from the ``LITSIM_BACKEND``
environment variable ("numba" or "numpy"); when unset, numba is used if it
imports.  ``set_backend`` switches at runtime, which the benchmark suite and
the backend-parity tests use to compare both implementations on identical
inputs.

Semantics are identical across backends and results are bit-reproducible run
to run within one backend.  Kernels work on raw arrays and report failures
through status codes; callers raise the package exceptions with context.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAVE_NUMBA = False

DEAD_STATE_TOL = 1e-30

_DEFAULT_BACKEND = "numba" if HAVE_NUMBA else "numpy"
_active_backend = os.environ.get("LITSIM_BACKEND", "").strip().lower() or _DEFAULT_BACKEND
if _active_backend not in ("numba", "numpy"):
    raise ValueError(
        f"LITSIM_BACKEND={_active_backend!r} is not recognised; use 'numba' or 'numpy'"
    )
if _active_backend == "numba" and not HAVE_NUMBA:
    _active_backend = "numpy"


def active_backend() -> str:
    return _active_backend


def set_backend(name: str) -> None:
    """Select 'numba' or 'numpy' kernels for subsequent calls."""
    global _active_backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable in this environment")
    _active_backend = name


def _use_numba() -> bool:
    return _active_backend == "numba"


# ---------------------------------------------------------------------------
# Fixed-step RK4 on the vectorized generator (static strategies).
# The trace is renormalized every step; a drift beyond the limit aborts.
# ---------------------------------------------------------------------------

def _rk4_superop_loop(liouv, vec0, dim, dt, n_steps, sample_steps, drift_limit):
    n_out = sample_steps.shape[0]
    out = np.empty((n_out, vec0.shape[0]), dtype=np.complex128)
    v = vec0.copy()
    pos = 0
    if sample_steps[0] == 0:
        out[0] = v
        pos = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n_steps):
        k1 = liouv @ v
        k2 = liouv @ (v + half * k1)
        k3 = liouv @ (v + half * k2)
        k4 = liouv @ (v + dt * k3)
        v = v + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tr = 0.0 + 0.0j
        for i in range(dim):
            tr += v[i * (dim + 1)]
        if abs(tr - 1.0) > drift_limit:
            return out, 1, k
        v = v / tr
        if pos < n_out and sample_steps[pos] == k + 1:
            out[pos] = v
            pos += 1
    return out, 0, -1


# ---------------------------------------------------------------------------
# Fixed-step RK4 with per-stage operator tables (time-dependent strategies).
# Stage s of step k indexes the tables at 2k, 2k+1, 2k+1, 2k+2.
# ---------------------------------------------------------------------------

def _gen_raw_impl(h, ls, lds, sq, r):
    out = (-1j) * (h @ r - r @ h)
    out -= 0.5 * (sq @ r + r @ sq)
    for t in range(ls.shape[0]):
        out += ls[t] @ (r @ lds[t])
    return out


_gen_raw = _gen_raw_impl


def _rk4_stages_loop(hs, ls, lds, sqs, rho0, dt, n_steps, sample_steps, drift_limit):
    d = rho0.shape[0]
    n_out = sample_steps.shape[0]
    out = np.empty((n_out, d, d), dtype=np.complex128)
    r = rho0.copy()
    pos = 0
    if sample_steps[0] == 0:
        out[0] = r
        pos = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n_steps):
        a = 2 * k
        b = 2 * k + 1
        c = 2 * k + 2
        k1 = _gen_raw(hs[a], ls[a], lds[a], sqs[a], r)
        k2 = _gen_raw(hs[b], ls[b], lds[b], sqs[b], r + half * k1)
        k3 = _gen_raw(hs[b], ls[b], lds[b], sqs[b], r + half * k2)
        k4 = _gen_raw(hs[c], ls[c], lds[c], sqs[c], r + dt * k3)
        r = r + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tr = 0.0 + 0.0j
        for i in range(d):
            tr += r[i, i]
        if abs(tr - 1.0) > drift_limit:
            return out, 1, k
        r = r / tr
        if pos < n_out and sample_steps[pos] == k + 1:
            out[pos] = r
            pos += 1
    return out, 0, -1


# ---------------------------------------------------------------------------
# Quantum-jump stepping.  step_ops has shape (S, m+1, d, d) with S == 1 for a
# static POVM or S == n_steps for a per-step table; slot 0 is the no-jump
# operator.  One uniform draw per step selects the outcome by cumulative
# inverse sampling over p_i = ||J_i psi||^2.
# ---------------------------------------------------------------------------

def _traj_loop(step_ops, draws, psi0, dead_tol):
    T = draws.shape[0]
    d = psi0.shape[0]
    m1 = step_ops.shape[1]
    S = step_ops.shape[0]
    states = np.empty((T + 1, d), dtype=np.complex128)
    outcomes = np.empty(T, dtype=np.int64)
    cand = np.empty((m1, d), dtype=np.complex128)
    probs = np.empty(m1, dtype=np.float64)
    psi = psi0.copy()
    states[0] = psi
    for k in range(T):
        idx = k if S > 1 else 0
        total = 0.0
        for o in range(m1):
            p = 0.0
            for i in range(d):
                amp = 0.0 + 0.0j
                for j in range(d):
                    amp += step_ops[idx, o, i, j] * psi[j]
                cand[o, i] = amp
                p += amp.real * amp.real + amp.imag * amp.imag
            probs[o] = p
            total += p
        if total < dead_tol:
            return states, outcomes, 1, k
        thr = draws[k] * total
        accp = 0.0
        sel = m1 - 1
        for o in range(m1):
            accp += probs[o]
            if thr < accp:
                sel = o
                break
        inv = 1.0 / math.sqrt(probs[sel])
        for i in range(d):
            psi[i] = cand[sel, i] * inv
        states[k + 1] = psi
        outcomes[k] = sel
    return states, outcomes, 0, -1


def _traj_numpy(step_ops, draws, psi0, dead_tol):
    T = draws.shape[0]
    d = psi0.shape[0]
    m1 = step_ops.shape[1]
    S = step_ops.shape[0]
    states = np.empty((T + 1, d), dtype=np.complex128)
    outcomes = np.empty(T, dtype=np.int64)
    psi = psi0.copy()
    states[0] = psi
    for k in range(T):
        ops = step_ops[k if S > 1 else 0]
        cand = ops @ psi
        probs = np.einsum("oi,oi->o", cand, cand.conj()).real
        total = float(probs.sum())
        if total < dead_tol:
            return states, outcomes, 1, k
        csum = np.cumsum(probs)
        sel = int(np.searchsorted(csum, draws[k] * total, side="right"))
        if sel >= m1:
            sel = m1 - 1
        psi = cand[sel] / math.sqrt(probs[sel])
        states[k + 1] = psi
        outcomes[k] = sel
    return states, outcomes, 0, -1


def _ensemble_loop(step_ops, draws, psi0s, acc, first_jump, dead_tol):
    n = draws.shape[0]
    T = draws.shape[1]
    d = psi0s.shape[1]
    m1 = step_ops.shape[1]
    S = step_ops.shape[0]
    cand = np.empty((m1, d), dtype=np.complex128)
    probs = np.empty(m1, dtype=np.float64)
    for r in range(n):
        psi = psi0s[r].copy()
        for i in range(d):
            for j in range(d):
                acc[0, i, j] += psi[i] * np.conj(psi[j])
        fj = -1
        for k in range(T):
            idx = k if S > 1 else 0
            total = 0.0
            for o in range(m1):
                p = 0.0
                for i in range(d):
                    amp = 0.0 + 0.0j
                    for j in range(d):
                        amp += step_ops[idx, o, i, j] * psi[j]
                    cand[o, i] = amp
                    p += amp.real * amp.real + amp.imag * amp.imag
                probs[o] = p
                total += p
            if total < dead_tol:
                return 1, r, k
            thr = draws[r, k] * total
            accp = 0.0
            sel = m1 - 1
            for o in range(m1):
                accp += probs[o]
                if thr < accp:
                    sel = o
                    break
            inv = 1.0 / math.sqrt(probs[sel])
            for i in range(d):
                psi[i] = cand[sel, i] * inv
            if sel > 0 and fj < 0:
                fj = k
            for i in range(d):
                for j in range(d):
                    acc[k + 1, i, j] += psi[i] * np.conj(psi[j])
        first_jump[r] = fj
    return 0, -1, -1


def _ensemble_numpy(step_ops, draws, psi0s, acc, first_jump, dead_tol):
    n, T = draws.shape
    m1 = step_ops.shape[1]
    S = step_ops.shape[0]
    states = psi0s.copy()
    acc[0] += np.einsum("ni,nj->ij", states, states.conj())
    rng_n = np.arange(n)
    for k in range(T):
        ops = step_ops[k if S > 1 else 0]
        cand = np.einsum("oij,nj->oni", ops, states)
        probs = np.einsum("oni,oni->on", cand, cand.conj()).real
        total = probs.sum(axis=0)
        if np.any(total < dead_tol):
            bad = int(np.argmax(total < dead_tol))
            return 1, bad, k
        thr = draws[:, k] * total
        csum = np.cumsum(probs, axis=0)
        hit = csum > thr
        sel = hit.argmax(axis=0)
        sel[~hit[-1]] = m1 - 1
        states = cand[sel, rng_n] / np.sqrt(probs[sel, rng_n])[:, None]
        fresh = (first_jump < 0) & (sel > 0)
        first_jump[fresh] = k
        acc[k + 1] += np.einsum("ni,nj->ij", states, states.conj())
    return 0, -1, -1


def _first_jump_loop(step_ops, draws, psi0s, first_jump, dead_tol):
    n = draws.shape[0]
    T = draws.shape[1]
    d = psi0s.shape[1]
    m1 = step_ops.shape[1]
    S = step_ops.shape[0]
    cand = np.empty((m1, d), dtype=np.complex128)
    probs = np.empty(m1, dtype=np.float64)
    for r in range(n):
        psi = psi0s[r].copy()
        fj = -1
        for k in range(T):
            idx = k if S > 1 else 0
            total = 0.0
            for o in range(m1):
                p = 0.0
                for i in range(d):
                    amp = 0.0 + 0.0j
                    for j in range(d):
                        amp += step_ops[idx, o, i, j] * psi[j]
                    cand[o, i] = amp
                    p += amp.real * amp.real + amp.imag * amp.imag
                probs[o] = p
                total += p
            if total < dead_tol:
                return 1, r, k
            thr = draws[r, k] * total
            accp = 0.0
            sel = m1 - 1
            for o in range(m1):
                accp += probs[o]
                if thr < accp:
                    sel = o
                    break
            if sel > 0:
                fj = k
                break
            inv = 1.0 / math.sqrt(probs[sel])
            for i in range(d):
                psi[i] = cand[sel, i] * inv
        first_jump[r] = fj
    return 0, -1, -1


def _first_jump_numpy(step_ops, draws, psi0s, first_jump, dead_tol):
    n, T = draws.shape
    m1 = step_ops.shape[1]
    S = step_ops.shape[0]
    states = psi0s.copy()
    alive = np.ones(n, dtype=bool)
    for k in range(T):
        idx_alive = np.nonzero(alive)[0]
        if idx_alive.size == 0:
            break
        ops = step_ops[k if S > 1 else 0]
        st = states[idx_alive]
        cand = np.einsum("oij,nj->oni", ops, st)
        probs = np.einsum("oni,oni->on", cand, cand.conj()).real
        total = probs.sum(axis=0)
        if np.any(total < dead_tol):
            bad = int(idx_alive[np.argmax(total < dead_tol)])
            return 1, bad, k
        thr = draws[idx_alive, k] * total
        csum = np.cumsum(probs, axis=0)
        hit = csum > thr
        sel = hit.argmax(axis=0)
        sel[~hit[-1]] = m1 - 1
        jumped = sel > 0
        first_jump[idx_alive[jumped]] = k
        alive[idx_alive[jumped]] = False
        keep = ~jumped
        pos = np.arange(idx_alive.size)[keep]
        states[idx_alive[keep]] = cand[sel[keep], pos] / np.sqrt(probs[sel[keep], pos])[:, None]
    return 0, -1, -1


if HAVE_NUMBA:
    _gen_raw = njit(cache=True)(_gen_raw_impl)
    _rk4_superop_numba = njit(cache=True)(_rk4_superop_loop)
    _rk4_stages_numba = njit(cache=True)(_rk4_stages_loop)
    _traj_numba = njit(cache=True)(_traj_loop)
    _ensemble_numba = njit(cache=True)(_ensemble_loop)
    _first_jump_numba = njit(cache=True)(_first_jump_loop)


def _c128(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def rk4_superop(liouv, vec0, dim, dt, n_steps, sample_steps, drift_limit):
    """Propagate vec(rho) under a static generator matrix; returns samples."""
    args = (
        _c128(liouv),
        _c128(vec0),
        int(dim),
        float(dt),
        int(n_steps),
        np.ascontiguousarray(sample_steps, dtype=np.int64),
        float(drift_limit),
    )
    fn = _rk4_superop_numba if _use_numba() else _rk4_superop_loop
    return fn(*args)


def rk4_stages(hs, ls, lds, sqs, rho0, dt, n_steps, sample_steps, drift_limit):
    """Propagate rho under per-stage operator tables; returns samples."""
    args = (
        _c128(hs),
        _c128(ls),
        _c128(lds),
        _c128(sqs),
        _c128(rho0),
        float(dt),
        int(n_steps),
        np.ascontiguousarray(sample_steps, dtype=np.int64),
        float(drift_limit),
    )
    fn = _rk4_stages_numba if _use_numba() else _rk4_stages_loop
    return fn(*args)


def jump_trajectory(step_ops, draws, psi0):
    """Run one quantum-jump trajectory; returns (states, outcomes, status, step)."""
    args = (
        _c128(step_ops),
        np.ascontiguousarray(draws, dtype=np.float64),
        _c128(psi0),
        DEAD_STATE_TOL,
    )
    fn = _traj_numba if _use_numba() else _traj_numpy
    return fn(*args)


def jump_ensemble(step_ops, draws, psi0s, acc, first_jump):
    """Accumulate sum(|psi><psi|) over a chunk of trajectories into acc."""
    args = (
        _c128(step_ops),
        np.ascontiguousarray(draws, dtype=np.float64),
        _c128(psi0s),
        acc,
        first_jump,
        DEAD_STATE_TOL,
    )
    fn = _ensemble_numba if _use_numba() else _ensemble_numpy
    return fn(*args)


def first_jump_steps(step_ops, draws, psi0s, first_jump):
    """Record the step index of the first jump per trajectory (-1 if none)."""
    args = (
        _c128(step_ops),
        np.ascontiguousarray(draws, dtype=np.float64),
        _c128(psi0s),
        first_jump,
        DEAD_STATE_TOL,
    )
    fn = _first_jump_numba if _use_numba() else _first_jump_numpy
    return fn(*args)
