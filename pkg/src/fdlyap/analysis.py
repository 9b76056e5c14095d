"""Post-hoc checks on logged trajectories.

All functions are pure: they read a :class:`~fdlyap.loop.TrajectoryLog` and
return a small report object with a ``to_dict`` for JSON output.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import GeneratorSpec, disturbance_bound, lindblad_rhs
from .loop import TrajectoryLog
from .quantum import MatrixLike

DEFAULT_WINDOW = 500


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass
class DescentReport:
    first_descent_index: Optional[int]
    violations: list = field(default_factory=list)
    eventually_descending: bool = False
    tol: float = 0.0

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class IssReport:
    residual: float
    limsup_estimate: float
    D: float
    tau: float
    C_empirical: float
    window: int

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class SteadyState:
    bloch_mean: tuple
    bloch_stdev: tuple
    window: int

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def check_descent(log: TrajectoryLog, tol: float = 1e-12, series: str = "V_measured", min_tail: Optional[int] = None) -> DescentReport:
    """Locate the index N after which every sampled increment is non-positive.

    An increment counts as a violation only if it exceeds ``tol``; smaller
    ones are treated as a locally constant V.  N must leave a descending tail
    of at least ``min_tail`` samples (default: half the log), otherwise the
    report lists the violations inside that tail.
    """
    V = np.asarray(getattr(log, series), dtype=float)
    if V.size < 2:
        raise ValueError("check_descent needs at least two samples")
    if min_tail is None:
        min_tail = V.size // 2
    dV = np.diff(V)  # dV[i] is the increment at sample index i + 1
    bad = np.nonzero(dV > tol)[0] + 1
    N = int(bad[-1]) + 1 if bad.size else 1
    if N <= V.size - min_tail:
        return DescentReport(first_descent_index=N, violations=[], eventually_descending=True, tol=tol)
    start = V.size - min_tail
    viol = [(int(i), float(V[i] - V[i - 1])) for i in bad if i >= start]
    return DescentReport(first_descent_index=None, violations=viol, eventually_descending=False, tol=tol)


def check_plateau_exclusion(
    log: TrajectoryLog,
    v_floor: float,
    window: int,
    band: float = 1e-3,
    gain_growth_tol: float = 1e-9,
) -> bool:
    """True iff the run never sits on the plateau ``[v_floor, v_floor + band]``.

    A plateau means ``window`` consecutive samples of V_exact inside the band
    while no gain grows by more than ``gain_growth_tol``.
    """
    if v_floor <= 0:
        raise ValueError("v_floor must be positive")
    V = np.asarray(log.V_exact)
    inside = (V >= v_floor) & (V <= v_floor + band)
    K = np.asarray(log.gains)
    run = 0
    for n in range(V.size):
        run = run + 1 if inside[n] else 0
        if run >= window:
            lo = n - window + 1
            growth = np.max(K[n] - K[lo])
            if growth <= gain_growth_tol:
                return False
    return True


def iss_residual(log: TrajectoryLog, gen: GeneratorSpec, tau: float, window: int = DEFAULT_WINDOW) -> IssReport:
    """Trailing-window residual of V_exact against the disturbance bound."""
    if window < 1 or window >= len(log):
        raise ValueError(f"window {window} must be in [1, {len(log) - 1}]")
    tail = np.asarray(log.V_exact[-window:])
    residual = float(tail.mean())
    limsup = float(tail.max())
    D = disturbance_bound(gen)
    if D * tau > 0:
        C = limsup / (D * tau)
    else:
        C = 0.0 if limsup == 0 else math.inf
    return IssReport(residual=residual, limsup_estimate=limsup, D=D, tau=float(tau), C_empirical=C, window=int(window))


def oscillation_envelopes(log: TrajectoryLog, width: int = 100, count: int = 3) -> list[float]:
    """max - min of V_exact over the last ``count`` consecutive windows."""
    V = np.asarray(log.V_exact)
    if width * count > V.size:
        raise ValueError("log too short for the requested envelope windows")
    start = V.size - width * count
    return [float(np.ptp(V[start + i * width : start + (i + 1) * width])) for i in range(count)]


def envelope_nonincreasing(envelopes: Sequence[float], slack: float = 0.02) -> bool:
    return all(b <= a + slack for a, b in zip(envelopes, envelopes[1:]))


def steady_state(log: TrajectoryLog, window: int = DEFAULT_WINDOW) -> SteadyState:
    if log.bloch is None:
        raise ValueError("log carries no Bloch components (not a qubit run)")
    if window < 1 or window > len(log):
        raise ValueError(f"window {window} exceeds log length {len(log)}")
    tail = np.asarray(log.bloch[-window:])
    return SteadyState(
        bloch_mean=tuple(float(v) for v in tail.mean(axis=0)),
        bloch_stdev=tuple(float(v) for v in tail.std(axis=0)),
        window=int(window),
    )


def check_noise_robustness(
    logs: Sequence[TrajectoryLog],
    eta_values: Sequence[float],
    window: int,
    slack: float = 0.02,
) -> tuple[bool, list[float]]:
    """Trailing-max residuals along an increasing ``eta_max`` grid.

    ``slope_ok`` requires nondecreasing residuals up to ``slack`` and a
    noiseless residual below 1e-3.
    """
    if len(logs) != len(eta_values) or not logs:
        raise ValueError("need one log per eta_max value")
    if list(eta_values) != sorted(eta_values) or eta_values[0] != 0:
        raise ValueError("eta_max grid must be increasing and start at 0")
    if len({_sweep_key(log) for log in logs}) != 1:
        raise ValueError("noise sweep logs come from mismatched configurations")
    residuals = [float(np.max(log.V_exact[-window:])) for log in logs]
    mono = all(b >= a - slack for a, b in zip(residuals, residuals[1:]))
    return bool(mono and residuals[0] < 1e-3), residuals


def _sweep_key(log: TrajectoryLog) -> str:
    meta = {k: v for k, v in log.meta.items() if k != "observable"}
    obs = {k: v for k, v in log.meta.get("observable", {}).items() if k not in ("eta_max", "seed")}
    return repr((sorted(meta.items()), sorted(obs.items()), len(log), log.n_channels))


def noise_constant(residuals: Sequence[float], eta_values: Sequence[float]) -> float:
    """Smallest C with residual <= C * eta_max at every positive eta."""
    ratios = [r / e for r, e in zip(residuals, eta_values) if e > 0]
    return max(ratios) if ratios else 0.0


def stationarity_defect(rho_bar: MatrixLike, gen: GeneratorSpec, u_bar: Sequence[float]) -> float:
    """Frobenius norm of the generator evaluated at a candidate fixed point."""
    return float(np.linalg.norm(lindblad_rhs(gen, u_bar, rho_bar)))
