"""Small dense complex linear algebra and the quantum-state domain types.

Everything here works on plain ``numpy`` arrays of shape ``(n, n)`` with
``complex128`` entries.  :class:`HermitianOperator` and :class:`DensityMatrix`
are thin validated wrappers; construction is the only place invariants are
checked, and a failed check raises instead of repairing the matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-10
POSITIVITY_ATOL = 1e-8


class PhysicsError(ValueError):
    """A matrix violates a physical invariant (Hermiticity, trace, positivity)."""


class DimensionError(ValueError):
    """Operands have incompatible dimensions."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T)))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix (Hamiltonians, projectors, POVM effects)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        defect = hermiticity_defect(m)
        if defect > HERMITIAN_ATOL:
            raise PhysicsError(f"operator is not Hermitian (max |A - A^H| = {defect:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one positive semidefinite Hermitian matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        defect = hermiticity_defect(m)
        if defect > HERMITIAN_ATOL:
            raise PhysicsError(f"state is not Hermitian (max |A - A^H| = {defect:.3e})")
        tr = np.trace(m)
        if abs(tr.real - 1.0) > TRACE_ATOL or abs(tr.imag) > HERMITIAN_ATOL:
            raise PhysicsError(f"state trace is {tr:.3e}, expected 1")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -POSITIVITY_ATOL:
            raise PhysicsError(f"state has negative eigenvalue {lam_min:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


MatrixLike = Union[np.ndarray, HermitianOperator, DensityMatrix]


def as_array(a: MatrixLike) -> np.ndarray:
    if isinstance(a, (HermitianOperator, DensityMatrix)):
        return a.matrix
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


# Pauli matrices and the qubit computational-basis projectors.
IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, lowers |1> to |0>
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def pauli_hamiltonian(coeffs: Sequence[float]) -> HermitianOperator:
    """``cx*sx + cy*sy + cz*sz`` as a validated operator."""
    cx, cy, cz = (float(c) for c in coeffs)
    return HermitianOperator(cx * SIGMA_X + cy * SIGMA_Y + cz * SIGMA_Z)


def commutator(a: MatrixLike, b: MatrixLike) -> np.ndarray:
    """Return ``a @ b - b @ a``."""
    a, b = as_array(a), as_array(b)
    _check_dims(a, b)
    return a @ b - b @ a


def trace_inner(a: MatrixLike, rho: MatrixLike) -> float:
    """Real part of ``Tr(a rho)``; for Hermitian ``a`` the imaginary part must vanish."""
    a, rho = as_array(a), as_array(rho)
    _check_dims(a, rho)
    # Tr(A B) = sum_ij A_ij B_ji
    val = np.sum(a * rho.T)
    if abs(val.imag) >= 1e-10:
        raise PhysicsError(f"Tr(a rho) has imaginary part {val.imag:.3e}")
    return float(val.real)


def hermitian_eigensystem(a: MatrixLike) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and the unitary of eigenvectors (columns)."""
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator(a)
    w, v = np.linalg.eigh(a.matrix)
    return w, v


def operator_norm(a: MatrixLike) -> float:
    """Largest singular value."""
    arr = as_array(a)
    return float(np.linalg.norm(arr, ord=2))


def trace_norm(a: MatrixLike) -> float:
    return float(np.sum(np.linalg.svd(as_array(a), compute_uv=False)))


def bloch_components(rho: MatrixLike) -> tuple[float, float, float]:
    """Bloch vector ``(Tr sx rho, Tr sy rho, Tr sz rho)`` of a qubit state."""
    r = as_array(rho)
    if r.shape != (2, 2):
        raise DimensionError(f"Bloch components need a qubit state, got dim {r.shape[0]}")
    x = 2.0 * r[0, 1].real
    y = -2.0 * r[0, 1].imag
    z = (r[0, 0] - r[1, 1]).real
    return float(x), float(y), float(z)


def bloch_to_density(x: float, y: float, z: float) -> DensityMatrix:
    """Qubit state ``(I + x sx + y sy + z sz) / 2``."""
    if x * x + y * y + z * z > 1.0 + 1e-10:
        raise PhysicsError("Bloch vector lies outside the unit ball")
    return DensityMatrix(0.5 * (IDENTITY2 + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z))


def pure_state(dim: int, amplitudes: Sequence[complex]) -> DensityMatrix:
    """Rank-one projector ``|psi><psi|`` for a unit-norm amplitude vector."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if psi.size != dim:
        raise DimensionError(f"expected {dim} amplitudes, got {psi.size}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-10:
        raise PhysicsError(f"amplitude vector has norm {norm:.12g}, expected 1")
    rho = np.outer(psi, psi.conj())
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def random_pure_state(rng: np.random.Generator, dim: int = 2) -> DensityMatrix:
    """Haar-random pure state."""
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return pure_state(dim, psi / np.linalg.norm(psi))


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng: np.random.Generator, dim: int) -> DensityMatrix:
    """Random mixed state from a Ginibre matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)
