"""POVM statistics and the measurement-derived Lyapunov observable."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .quantum import DimensionError, HermitianOperator, MatrixLike, PhysicsError, as_array, trace_inner

MODES = ("exact", "shots", "bounded_noise")


@dataclass(frozen=True, eq=False)
class Povm:
    effects: tuple

    def __post_init__(self):
        effects = tuple(e if isinstance(e, HermitianOperator) else HermitianOperator(e) for e in self.effects)
        if not effects:
            raise ValueError("a POVM needs at least one effect")
        dim = effects[0].dim
        total = np.zeros((dim, dim), dtype=complex)
        for e in effects:
            if e.dim != dim:
                raise DimensionError("POVM effects have different dimensions")
            if np.linalg.eigvalsh(e.matrix)[0] < -1e-10:
                raise PhysicsError("POVM effect is not positive semidefinite")
            total += e.matrix
        if np.max(np.abs(total - np.eye(dim))) > 1e-10:
            raise PhysicsError("POVM effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim


def outcome_probabilities(povm: Povm, rho: MatrixLike) -> list[float]:
    """Born-rule probabilities ``Tr(M_j rho)``, clipped to [0, 1]."""
    r = as_array(rho)
    if r.shape != (povm.dim, povm.dim):
        raise DimensionError(f"state dim {r.shape[0]} does not match POVM dim {povm.dim}")
    probs = []
    for e in povm.effects:
        p = trace_inner(e, r)
        if p < -1e-10 or p > 1 + 1e-10:
            raise PhysicsError(f"outcome probability {p:.3e} outside [0, 1]")
        probs.append(min(max(p, 0.0), 1.0))
    if abs(sum(probs) - 1.0) > 1e-9:
        raise PhysicsError(f"outcome probabilities sum to {sum(probs):.12g}")
    return probs


class LyapunovObservable:
    """``V = 1 - Tr(P rho)`` for a rank-one target projector ``P``.

    ``mode`` selects how the value reaches the controller:

    * ``exact``: the noiseless expectation value;
    * ``shots``: one minus the target-outcome frequency over ``shots``
      independent preparations (fresh binomial draw per evaluation);
    * ``bounded_noise``: exact value plus uniform noise in ``[-eta_max, eta_max]``.

    The random stream is owned by the instance; do not share one observable
    between concurrent runs.
    """

    def __init__(
        self,
        target_projector: MatrixLike,
        mode: str = "exact",
        shots: int = 1000,
        eta_max: float = 0.0,
        rng_seed: int = 0,
    ):
        P = target_projector if isinstance(target_projector, HermitianOperator) else HermitianOperator(target_projector)
        m = P.matrix
        if np.max(np.abs(m @ m - m)) > 1e-10 or abs(np.trace(m).real - 1.0) > 1e-10:
            raise PhysicsError("target projector must satisfy P^2 = P and Tr P = 1")
        if mode not in MODES:
            raise ValueError(f"unknown observable mode {mode!r}; expected one of {MODES}")
        if mode == "shots" and int(shots) < 1:
            raise ValueError("shots must be a positive integer")
        if eta_max < 0:
            raise ValueError("eta_max must be non-negative")
        self.target_projector = P
        self.mode = mode
        self.shots = int(shots)
        self.eta_max = float(eta_max)
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(self.rng_seed)
        self.povm = Povm((P, HermitianOperator(np.eye(P.dim) - m)))

    @property
    def dim(self) -> int:
        return self.target_projector.dim

    def exact(self, rho: MatrixLike) -> float:
        r = as_array(rho)
        if r.shape != (self.dim, self.dim):
            raise DimensionError(f"state dim {r.shape[0]} does not match observable dim {self.dim}")
        return 1.0 - trace_inner(self.target_projector, r)

    def evaluate(self, rho: MatrixLike) -> float:
        v = self.exact(rho)
        if self.mode == "exact":
            return v
        if self.mode == "shots":
            p_target = min(max(1.0 - v, 0.0), 1.0)
            hits = self._rng.binomial(self.shots, p_target)
            return 1.0 - hits / self.shots
        return v + self._rng.uniform(-self.eta_max, self.eta_max)

    def reseed(self, seed: Optional[int] = None) -> None:
        """Restart the random stream (from the original seed by default)."""
        if seed is not None:
            self.rng_seed = int(seed)
        self._rng = np.random.default_rng(self.rng_seed)

    def settings(self) -> dict:
        return {"mode": self.mode, "shots": self.shots, "eta_max": self.eta_max, "seed": self.rng_seed}


def evaluate_V(obs: LyapunovObservable, rho: MatrixLike) -> float:
    return obs.evaluate(rho)


def V_is_proper(obs: LyapunovObservable, rho: MatrixLike) -> bool:
    """Check ``V(rho) = 0  <=>  rho = P`` on one state (exact mode only)."""
    if obs.mode != "exact":
        raise ValueError("properness is only checked for exact-mode observables")
    r = as_array(rho)
    vanishes = obs.exact(r) < 1e-9
    at_target = np.linalg.norm(r - obs.target_projector.matrix) < 1e-4
    return bool(vanishes == at_target)


def target_observable(amplitudes: Sequence[complex], **kwargs) -> LyapunovObservable:
    """Observable for the pure target state with the given amplitudes."""
    psi = np.asarray(amplitudes, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return LyapunovObservable(np.outer(psi, psi.conj()), **kwargs)
