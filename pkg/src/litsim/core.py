"""Dense complex linear algebra and validated quantum-state containers.

All numerical work in this package operates on plain ``complex128`` numpy
arrays.  The classes here are thin validated wrappers used at API
boundaries: wrapped arrays are copied on construction and marked read-only,
so every instance is immutable and safe to share between threads.

Qubit basis convention, frozen package-wide: index 0 is the ground state and
index 1 the excited state, so the energy-splitting Pauli component is
``SIGMA_Z = diag(-1, +1)`` and ``SIGMA_PLUS = |e><g|`` raises energy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, InvariantViolation

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-9
STATE_NORM_TOL = 1e-10
UNITARITY_TOL = 1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS):
    _m.flags.writeable = False


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def as_matrix(obj) -> np.ndarray:
    """Coerce a wrapper object or array-like to a square complex matrix."""
    m = getattr(obj, "matrix", obj)
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def _read_only_copy(a, dtype=complex) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def dagger(m) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(m).conj().T.copy()


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_same_dim(a, b)
    return a @ b + b @ a


def expectation(op, rho) -> complex:
    """Tr(op rho); real up to roundoff when op is Hermitian and rho a state."""
    op, r = as_matrix(op), as_matrix(rho)
    _check_same_dim(op, r)
    return complex(np.trace(op @ r))


def trace_distance(a, b) -> float:
    """(1/2) sum of singular values of the (Hermitian) difference."""
    diff = as_matrix(a) - as_matrix(b)
    _check_same_dim(diff, diff)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def batched_trace_distance(a, b) -> np.ndarray:
    """Trace distance along the leading axis of two stacks of states."""
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    diff = 0.5 * (diff + diff.conj().swapaxes(-1, -2))
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)), axis=-1)


def hermitian_eigensystem(op, tol: float = HERMITICITY_TOL):
    """Eigen-decomposition of a Hermitian matrix with a fixed phase convention.

    Eigenvalues come back ascending.  Each eigenvector is rescaled so that its
    largest-magnitude component (first such index on ties) is real and
    positive, which makes the output byte-stable across runs.
    """
    m = as_matrix(op)
    scale = max(1.0, max_abs(m))
    if max_abs(m - m.conj().T) > tol * scale:
        raise InvariantViolation("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(m)
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        i = int(np.argmax(np.abs(col)))
        phase = col[i]
        vecs[:, j] = col * (np.conj(phase) / abs(phase))
    return vals, vecs


def matrix_to_json(m) -> dict:
    """Serialize a square complex matrix as {"dim", "re", "im"} (row-major)."""
    m = as_matrix(m)
    return {
        "dim": int(m.shape[0]),
        "re": [float(x) for x in m.real.ravel()],
        "im": [float(x) for x in m.imag.ravel()],
    }


def matrix_from_json(obj, path: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object with keys dim/re/im")
    unknown = set(obj) - {"dim", "re", "im"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed matrix object ({exc})") from None
    if dim <= 0:
        raise ConfigError(f"{path}.dim: must be a positive integer")
    if re.shape != (dim * dim,) or im.shape != (dim * dim,):
        raise ConfigError(f"{path}: re/im must each hold dim^2 = {dim * dim} entries")
    return (re + 1j * im).reshape(dim, dim)


@dataclass(frozen=True)
class HermitianOperator:
    """A Hermitian matrix, validated to relative max-norm tolerance 1e-10."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        scale = max(1.0, max_abs(m))
        if max_abs(m - m.conj().T) > HERMITICITY_TOL * scale:
            raise InvariantViolation("operator is not Hermitian within tolerance")
        object.__setattr__(self, "matrix", _read_only_copy(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DensityMatrix:
    """A valid quantum state: Hermitian, unit trace, eigenvalues >= -1e-9."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        scale = max(1.0, max_abs(m))
        if max_abs(m - m.conj().T) > HERMITICITY_TOL * scale:
            raise InvariantViolation("state is not Hermitian within tolerance")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"state trace {tr} deviates from 1 beyond {TRACE_TOL:g}")
        low = float(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))
        if low < EIGENVALUE_FLOOR:
            raise InvariantViolation(f"state has eigenvalue {low:.3e} below {EIGENVALUE_FLOOR:g}")
        object.__setattr__(self, "matrix", _read_only_copy(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, psi: "PureState") -> "DensityMatrix":
        return cls(psi.projector())


@dataclass(frozen=True)
class PureState:
    """A normalized state vector (unit 2-norm to 1e-10)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size == 0:
            raise DimensionMismatch(f"expected a nonempty vector, got shape {a.shape}")
        norm = float(np.linalg.norm(a))
        if abs(norm - 1.0) > STATE_NORM_TOL:
            raise InvariantViolation(f"state norm {norm!r} deviates from 1 beyond {STATE_NORM_TOL:g}")
        object.__setattr__(self, "amplitudes", _read_only_copy(a))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())
