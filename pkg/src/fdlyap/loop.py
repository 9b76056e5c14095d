"""Sampled-data closed loop: sample V, run the controller, hold, propagate, log."""
from __future__ import annotations

import copy
import io
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .controller import ControllerState, double_probe_update, sign_based_update
from .dynamics import DEFAULT_SUBSTEPS, GeneratorSpec, make_stepper
from .measurement import LyapunovObservable
from .quantum import DensityMatrix, PhysicsError, bloch_components

INTEGRATORS = ("exact_unitary", "rk4")


class LoopError(RuntimeError):
    """A closed-loop run aborted; ``step`` is the sampling index that failed."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"run aborted at step {step}: {cause}")
        self.step = step
        self.cause = cause


class BatchError(RuntimeError):
    """Some runs of a batch failed; ``logs`` holds ``None`` where a run failed."""

    def __init__(self, errors: dict, logs: list):
        detail = ", ".join(f"#{i}: {e}" for i, e in sorted(errors.items()))
        super().__init__(f"{len(errors)} of {len(logs)} runs failed ({detail})")
        self.errors = errors
        self.logs = logs


@dataclass
class LoopConfig:
    tau: float
    n_steps: int
    initial_state: DensityMatrix
    generator: GeneratorSpec
    observable: LyapunovObservable
    controller: ControllerState
    integrator: str = "rk4"
    substeps: int = DEFAULT_SUBSTEPS
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be a positive integer")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.integrator == "exact_unitary" and not self.generator.is_unitary:
            raise ValueError("exact_unitary integrator requires empty collapse_ops")
        g = self.generator
        if self.initial_state.dim != g.dim or self.observable.dim != g.dim:
            raise ValueError("initial state, observable and generator dimensions differ")
        if self.controller.n_channels != g.n_controls:
            raise ValueError(
                f"controller has {self.controller.n_channels} channels, generator has {g.n_controls} controls"
            )


@dataclass
class TrajectoryLog:
    t: np.ndarray
    V_measured: np.ndarray
    V_exact: np.ndarray
    u: np.ndarray  # (n_steps + 1, m); row n is held on [t_n, t_{n+1})
    gains: np.ndarray  # gains in force when row n's input was computed
    delta_V: np.ndarray
    bloch: Optional[np.ndarray]
    trace_error: np.ndarray
    min_eigenvalue: np.ndarray
    rho_reads: dict = field(default_factory=dict)
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_channels(self) -> int:
        return self.u.shape[1]

    def final_V(self) -> float:
        return float(self.V_exact[-1])

    def csv_header(self) -> list[str]:
        m = self.n_channels
        cols = ["n", "t", "V_measured", "V_exact"]
        cols += [f"u_{k + 1}" for k in range(m)] + [f"kappa_{k + 1}" for k in range(m)]
        if self.bloch is not None:
            cols += ["x", "y", "z"]
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.csv_header()) + "\n")
        for n in range(len(self)):
            row = [self.t[n], self.V_measured[n], self.V_exact[n], *self.u[n], *self.gains[n]]
            if self.bloch is not None:
                row += list(self.bloch[n])
            buf.write(str(n) + "," + ",".join(f"{float(v):.16e}" for v in row) + "\n")
        return buf.getvalue()


class Plant:
    """Holds the hidden state and counts who reads it, keyed by module name."""

    def __init__(self, rho: np.ndarray):
        self._rho = rho
        self.reads: Counter = Counter()

    @property
    def rho(self) -> np.ndarray:
        self.reads[sys._getframe(1).f_globals.get("__name__", "?")] += 1
        return self._rho

    def commit(self, rho: np.ndarray) -> None:
        self._rho = rho


class BranchOracle:
    """Simulates a candidate input from a snapshot of the current state."""

    def __init__(self, plant: Plant, stepper, observable: LyapunovObservable):
        self._plant = plant
        self._stepper = stepper
        self._observable = observable
        self.calls = 0

    def __call__(self, u, tau: float) -> float:
        self.calls += 1
        return self._observable.evaluate(self._stepper(u, self._plant.rho, tau))


class SequentialOracle:
    """Probes consume real time: each call advances the plant by ``tau``."""

    def __init__(self, plant: Plant, stepper, observable: LyapunovObservable):
        self._plant = plant
        self._stepper = stepper
        self._observable = observable
        self.elapsed = 0.0

    def __call__(self, u, tau: float) -> float:
        rho = self._stepper(u, self._plant.rho, tau)
        self._plant.commit(rho)
        self.elapsed += tau
        return self._observable.evaluate(rho)


def _state_checks(rho: np.ndarray) -> tuple[float, float]:
    DensityMatrix(rho)
    return abs(np.trace(rho).real - 1.0), float(np.linalg.eigvalsh(rho)[0])


def run_closed_loop(cfg: LoopConfig) -> TrajectoryLog:
    """Run ``cfg.n_steps`` sampling intervals; deterministic given ``cfg``.

    The configured observable is copied and its stream reseeded from
    ``cfg.seed`` so the same config always replays the same measurement noise.
    """
    gen = cfg.generator
    stepper = make_stepper(gen, cfg.integrator, cfg.substeps)
    obs = copy.deepcopy(cfg.observable)
    obs.reseed(cfg.seed)
    state = cfg.controller
    plant = Plant(np.array(cfg.initial_state.matrix))
    sequential = state.mode == "double_probe" and state.probe_semantics == "sequential"
    m = gen.n_controls
    N = int(cfg.n_steps)
    qubit = gen.dim == 2

    t = np.arange(N + 1) * cfg.tau
    V_meas = np.zeros(N + 1)
    V_ex = np.zeros(N + 1)
    U = np.zeros((N + 1, m))
    K = np.zeros((N + 1, m))
    dV = np.zeros(N + 1)
    bloch = np.zeros((N + 1, 3)) if qubit else None
    tr_err = np.zeros(N + 1)
    min_eig = np.zeros(N + 1)

    for n in range(N + 1):
        try:
            rho = plant.rho
            tr_err[n], min_eig[n] = _state_checks(rho)
            V_ex[n] = obs.exact(rho)
            if qubit:
                bloch[n] = bloch_components(rho)
            v = obs.evaluate(rho)
            V_meas[n] = v
            dV[n] = 0.0 if n == 0 else v - V_meas[n - 1]
            K[n] = state.gains
            if state.mode == "sign_based":
                u, state = sign_based_update(state, v)
            elif sequential:
                h = cfg.tau / (2 * m + 1)
                oracle = SequentialOracle(plant, stepper, obs)
                u, state = double_probe_update(state, oracle, h, V_now=v)
            else:
                u, state = double_probe_update(state, BranchOracle(plant, stepper, obs), cfg.tau, V_now=v)
            U[n] = u
            if n == N:
                break
            if sequential:
                remaining = cfg.tau - oracle.elapsed
                plant.commit(stepper(u, plant.rho, remaining))
            else:
                plant.commit(stepper(u, plant.rho, cfg.tau))
        except (PhysicsError, ArithmeticError, RuntimeError, ValueError) as exc:
            raise LoopError(n, exc) from exc

    return TrajectoryLog(
        t=t,
        V_measured=V_meas,
        V_exact=V_ex,
        u=U,
        gains=K,
        delta_V=dV,
        bloch=bloch,
        trace_error=tr_err,
        min_eigenvalue=min_eig,
        rho_reads=dict(plant.reads),
        label=cfg.label,
        meta=config_summary(cfg),
    )


def config_summary(cfg: LoopConfig) -> dict:
    """Scalar settings of a run, for comparing logs from a parameter sweep."""
    c = cfg.controller
    return {
        "tau": cfg.tau,
        "n_steps": int(cfg.n_steps),
        "integrator": cfg.integrator,
        "substeps": cfg.substeps,
        "seed": cfg.seed,
        "dim": cfg.generator.dim,
        "n_collapse_ops": len(cfg.generator.collapse_ops),
        "observable": cfg.observable.settings(),
        "controller": {
            "mode": c.mode,
            "gains": list(c.gains),
            "alpha": list(c.alpha),
            "u_max": c.u_max,
            "lambda": c.lam,
            "probe_amplitude": c.probe_amplitude,
            "probe_semantics": c.probe_semantics,
            "bootstrap": c.bootstrap,
        },
    }


def _run_one(cfg: LoopConfig):
    try:
        return run_closed_loop(cfg), None
    except Exception as exc:  # collected per run, reported by run_batch
        return None, exc


def run_batch(cfgs: list, workers: int = 1) -> list:
    """Run independent configs; results keep input order.

    Failures do not stop the batch; they are raised together at the end as
    :class:`BatchError`.
    """
    if not cfgs:
        raise ValueError("run_batch needs at least one config")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, cfgs))
    else:
        results = [_run_one(c) for c in cfgs]
    logs = [r[0] for r in results]
    errors = {i: r[1] for i, r in enumerate(results) if r[1] is not None}
    if errors:
        raise BatchError(errors, logs)
    return logs
