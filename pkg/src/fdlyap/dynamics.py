"""Plant dynamics: drift + Lindblad dissipation + zero-order-hold control.

A step function always receives one constant control vector for the whole
interval; there is no way to vary the input inside a step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum import (
    DensityMatrix,
    DimensionError,
    HermitianOperator,
    MatrixLike,
    as_array,
    operator_norm,
)

DEFAULT_SUBSTEPS = 64
TRACE_FAILURE_ATOL = 1e-6


class IntegrationError(RuntimeError):
    """Numerical integration lost trace beyond the failure threshold."""


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """The true plant generator. Unknown to the controller.

    ``drift`` and ``control_hams`` are in angular-frequency units;
    ``collapse_ops`` carry the square root of their rates.
    """

    drift: HermitianOperator
    collapse_ops: tuple = ()
    control_hams: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        drift = self.drift if isinstance(self.drift, HermitianOperator) else HermitianOperator(self.drift)
        ops = tuple(np.array(as_array(L), copy=True) for L in self.collapse_ops)
        hams = tuple(h if isinstance(h, HermitianOperator) else HermitianOperator(h) for h in self.control_hams)
        n = drift.dim
        for m in list(ops) + [h.matrix for h in hams]:
            if m.shape != (n, n):
                raise DimensionError(f"generator operator of shape {m.shape} does not match dim {n}")
        for L in ops:
            L.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "collapse_ops", ops)
        object.__setattr__(self, "control_hams", hams)

    @property
    def dim(self) -> int:
        return self.drift.dim

    @property
    def n_controls(self) -> int:
        return len(self.control_hams)

    @property
    def is_unitary(self) -> bool:
        return len(self.collapse_ops) == 0

    def total_hamiltonian(self, u: Sequence[float]) -> np.ndarray:
        u = _check_input(self, u)
        h = self.drift.matrix.copy()
        for uk, hk in zip(u, self.control_hams):
            h = h + uk * hk.matrix
        return h

    def _dissipator_terms(self):
        if "diss" not in self._cache:
            terms = [(L, L.conj().T, L.conj().T @ L) for L in self.collapse_ops]
            self._cache["diss"] = terms
        return self._cache["diss"]

    def scaled(self, s: float) -> "GeneratorSpec":
        """Same controls, drift multiplied by ``s`` and collapse rates by ``s``."""
        return GeneratorSpec(
            drift=HermitianOperator(s * self.drift.matrix),
            collapse_ops=tuple(np.sqrt(s) * L for L in self.collapse_ops),
            control_hams=self.control_hams,
        )


def _check_input(gen: GeneratorSpec, u: Sequence[float]) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != gen.n_controls:
        raise DimensionError(f"control input has {u.size} entries, generator has {gen.n_controls} channels")
    return u


def _rhs(h: np.ndarray, diss, rho: np.ndarray) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for L, Ld, LdL in diss:
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def lindblad_rhs(gen: GeneratorSpec, u: Sequence[float], rho: MatrixLike) -> np.ndarray:
    """Time derivative of ``rho`` under drift, control and dissipation."""
    r = as_array(rho)
    if r.shape != (gen.dim, gen.dim):
        raise DimensionError(f"state of shape {r.shape} does not match generator dim {gen.dim}")
    return _rhs(gen.total_hamiltonian(u), gen._dissipator_terms(), r)


def unitary_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i h dt)`` from the eigendecomposition of Hermitian ``h``."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def _exact_array(gen: GeneratorSpec, u, rho: np.ndarray, dt: float) -> np.ndarray:
    U = unitary_propagator(gen.total_hamiltonian(u), dt)
    out = U @ rho @ U.conj().T
    return 0.5 * (out + out.conj().T)


def _rk4_array(gen: GeneratorSpec, u, rho: np.ndarray, dt: float, substeps: int) -> np.ndarray:
    h = gen.total_hamiltonian(u)
    diss = gen._dissipator_terms()
    step = dt / substeps
    r = rho
    for _ in range(substeps):
        k1 = _rhs(h, diss, r)
        k2 = _rhs(h, diss, r + 0.5 * step * k1)
        k3 = _rhs(h, diss, r + 0.5 * step * k2)
        k4 = _rhs(h, diss, r + step * k3)
        r = r + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        r = 0.5 * (r + r.conj().T)
    drift = abs(np.trace(r) - np.trace(rho))
    if drift > TRACE_FAILURE_ATOL:
        raise IntegrationError(f"RK4 trace drift {drift:.3e} exceeds {TRACE_FAILURE_ATOL:g}")
    return r


def step_exact_unitary(gen: GeneratorSpec, u: Sequence[float], rho: MatrixLike, dt: float) -> DensityMatrix:
    """Propagate a closed system exactly over ``dt`` with constant input ``u``."""
    if not gen.is_unitary:
        raise ValueError("exact unitary step requires empty collapse_ops; use step_rk4")
    if dt <= 0:
        raise ValueError("dt must be positive")
    r = as_array(rho)
    if r.shape != (gen.dim, gen.dim):
        raise DimensionError(f"state of shape {r.shape} does not match generator dim {gen.dim}")
    return DensityMatrix(_exact_array(gen, u, r, dt))


def step_rk4(
    gen: GeneratorSpec,
    u: Sequence[float],
    rho: MatrixLike,
    dt: float,
    substeps: int = DEFAULT_SUBSTEPS,
) -> DensityMatrix:
    """Classical RK4 over ``dt`` split into ``substeps`` equal steps.

    The state is symmetrized after every substep but never renormalized.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    r = as_array(rho)
    if r.shape != (gen.dim, gen.dim):
        raise DimensionError(f"state of shape {r.shape} does not match generator dim {gen.dim}")
    return DensityMatrix(_rk4_array(gen, u, r, dt, substeps))


def make_stepper(gen: GeneratorSpec, integrator: str = "rk4", substeps: int = DEFAULT_SUBSTEPS):
    """Array-level step function ``f(u, rho, dt) -> rho'`` for the chosen integrator."""
    if integrator == "exact_unitary":
        if not gen.is_unitary:
            raise ValueError("exact_unitary integrator requires empty collapse_ops")
        return lambda u, rho, dt: _exact_array(gen, u, rho, dt)
    if integrator == "rk4":
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        return lambda u, rho, dt: _rk4_array(gen, u, rho, dt, substeps)
    raise ValueError(f"unknown integrator {integrator!r}")


def disturbance_bound(gen: GeneratorSpec) -> float:
    """Conservative bound D on the trace norm of drift + dissipator output.

    ``2 ||H_drift|| + sum_k (2 ||L_k||^2 + ||L_k^H L_k||)`` in operator norm.
    Deliberately loose: an upper bound is all the ISS estimate needs.
    """
    d = 2.0 * operator_norm(gen.drift)
    for L in gen.collapse_ops:
        d += 2.0 * operator_norm(L) ** 2 + operator_norm(L.conj().T @ L)
    return d
