"""Model-free feedback laws driven only by sampled Lyapunov values.

Nothing in this module ever touches the quantum state.  The sign law sees a
scalar ``V_now``; the double-probe law additionally sees a :class:`ProbeOracle`
that answers "what would V be after one interval under this constant input".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

import numpy as np

MODES = ("sign_based", "double_probe")
PROBE_SEMANTICS = ("branch", "sequential")
BOOTSTRAPS = ("zero", "kick")

# Probe pairs closer than this count as an exactly symmetric landscape.
FLAT_TOL = 1e-12


class ProbeOracle(Protocol):
    def __call__(self, u: Sequence[float], tau: float) -> float:
        """Lyapunov value after holding ``u`` for ``tau`` from the current state."""


@dataclass(frozen=True)
class ControllerState:
    mode: str
    gains: tuple
    alpha: tuple
    u_max: float
    prev_V: Optional[float] = None
    lam: float = 1.0
    probe_amplitude: float = 0.1
    initial_gains: tuple = ()
    probe_semantics: str = "branch"
    bootstrap: str = "zero"

    def __post_init__(self):
        gains = tuple(float(k) for k in self.gains)
        alpha = tuple(float(a) for a in self.alpha)
        if self.mode not in MODES:
            raise ValueError(f"unknown controller mode {self.mode!r}; expected one of {MODES}")
        if len(gains) != len(alpha) or not gains:
            raise ValueError("gains and alpha must be nonempty and of equal length")
        if any(k <= 0 for k in gains) or any(a <= 0 for a in alpha):
            raise ValueError("gains and alpha must be strictly positive")
        if self.u_max <= 0:
            raise ValueError("u_max must be positive")
        if self.lam <= 0 or self.probe_amplitude <= 0:
            raise ValueError("lambda and probe_amplitude must be positive")
        if self.probe_semantics not in PROBE_SEMANTICS:
            raise ValueError(f"unknown probe semantics {self.probe_semantics!r}")
        if self.bootstrap not in BOOTSTRAPS:
            raise ValueError(f"unknown bootstrap {self.bootstrap!r}")
        init = tuple(float(k) for k in self.initial_gains) or gains
        if len(init) != len(gains):
            raise ValueError("initial_gains length does not match gains")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "initial_gains", init)

    @property
    def n_channels(self) -> int:
        return len(self.gains)

    def effective_lambda(self) -> np.ndarray:
        """Per-channel pseudo-gradient step, scaled by gain amplification."""
        return self.lam * np.asarray(self.gains) / np.asarray(self.initial_gains)


def _sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def _clamp(u, u_max: float) -> tuple:
    return tuple(float(min(max(v, -u_max), u_max)) for v in u)


def _amplified(state: ControllerState, dV: Optional[float]) -> tuple:
    # Insufficient decrease (dV >= 0) raises every gain by alpha_k |dV|.
    if dV is None or dV < 0:
        return state.gains
    return tuple(k + a * abs(dV) for k, a in zip(state.gains, state.alpha))


def sign_based_update(state: ControllerState, V_now: float) -> tuple[tuple, ControllerState]:
    """One sampling instant of ``u_k = -kappa_k sign(V_n - V_{n-1})``.

    Returns the saturated input to hold over the next interval and the
    successor state.  With no previous sample the input is zero (or ``+kappa``
    under ``bootstrap="kick"``) and only ``V_now`` is remembered.
    """
    if state.prev_V is None:
        if state.bootstrap == "kick":
            u = _clamp(state.gains, state.u_max)
        else:
            u = (0.0,) * state.n_channels
        return u, replace(state, prev_V=float(V_now))
    dV = float(V_now) - state.prev_V
    s = _sign(dV)
    u = _clamp([-k * s for k in state.gains], state.u_max)
    return u, replace(state, gains=_amplified(state, dV), prev_V=float(V_now))


def select_argmin_candidate(oracle: ProbeOracle, candidates: Sequence[Sequence[float]], tau: float) -> tuple:
    """Candidate with the smallest one-step-ahead V; ties go to the earliest."""
    if not candidates:
        raise ValueError("select_argmin_candidate needs at least one candidate")
    best, best_v = None, math.inf
    for c in candidates:
        v = oracle(c, tau)
        if v < best_v:
            best, best_v = c, v
    if best is None:  # every oracle value was NaN/inf
        best = candidates[0]
    return tuple(float(x) for x in best)


def pseudo_gradient(oracle: ProbeOracle, n_channels: int, amplitude: float, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric-probe finite differences, one channel at a time.

    Returns ``(g, spread)`` with ``g_k = (V+_k - V-_k) / (2 a tau)`` and
    ``spread_k = |V+_k - V-_k|``.
    """
    g = np.zeros(n_channels)
    spread = np.zeros(n_channels)
    for k in range(n_channels):
        e = np.zeros(n_channels)
        e[k] = amplitude
        v_plus = oracle(e, tau)
        v_minus = oracle(-e, tau)
        g[k] = (v_plus - v_minus) / (2.0 * amplitude * tau)
        spread[k] = abs(v_plus - v_minus)
    return g, spread


def double_probe_update(
    state: ControllerState,
    oracle: ProbeOracle,
    tau: float,
    V_now: Optional[float] = None,
) -> tuple[tuple, ControllerState]:
    """Pseudo-gradient step ``u_k = -lambda_k g_k`` from paired probes.

    When every probe pair is exactly balanced while ``V_now`` is still
    positive (e.g. the antipode of the target, where the finite difference
    vanishes by symmetry), falls back to choosing between ``+kappa_k`` and
    ``-kappa_k`` per channel by one-step-ahead value.
    """
    if state.probe_amplitude > state.u_max:
        raise ValueError("probe_amplitude must not exceed u_max")
    m = state.n_channels
    g, spread = pseudo_gradient(oracle, m, state.probe_amplitude, tau)
    flat = np.all(spread <= FLAT_TOL) and V_now is not None and V_now > FLAT_TOL
    # Sequential probes consume plant time, so no extra candidate evaluations.
    if flat and state.probe_semantics == "branch":
        u = []
        for k in range(m):
            plus = [0.0] * m
            plus[k] = state.gains[k]
            minus = [0.0] * m
            minus[k] = -state.gains[k]
            u.append(select_argmin_candidate(oracle, [plus, minus], tau)[k])
        u = _clamp(u, state.u_max)
    else:
        u = _clamp(-state.effective_lambda() * g, state.u_max)
    if V_now is None:
        return u, state
    dV = None if state.prev_V is None else float(V_now) - state.prev_V
    return u, replace(state, gains=_amplified(state, dV), prev_V=float(V_now))


def controller_from_dict(d: dict) -> ControllerState:
    return ControllerState(
        mode=d["mode"],
        gains=tuple(d["gains"]),
        alpha=tuple(d["alpha"]),
        u_max=float(d["u_max"]),
        lam=float(d.get("lambda", 1.0)),
        probe_amplitude=float(d.get("probe_amplitude", 0.1)),
        probe_semantics=d.get("probe_semantics", "branch"),
        bootstrap=d.get("bootstrap", "zero"),
    )
