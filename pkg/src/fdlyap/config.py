"""Strict JSON run configuration: parse, resolve defaults, build a LoopConfig.

A resolved config is a plain dict in which every default has been filled in;
it round-trips through JSON and rebuilds the identical run.
"""
from __future__ import annotations

import copy
import json
from numbers import Real
from typing import Any

import numpy as np

from .controller import BOOTSTRAPS, MODES as CONTROLLER_MODES, PROBE_SEMANTICS, ControllerState
from .dynamics import DEFAULT_SUBSTEPS, GeneratorSpec
from .loop import INTEGRATORS, LoopConfig
from .measurement import MODES as OBSERVABLE_MODES, LyapunovObservable
from .quantum import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    HermitianOperator,
    PhysicsError,
    bloch_to_density,
    pure_state,
)


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigSyntaxError(ConfigError):
    """The file is not valid JSON."""


class SchemaError(ConfigError):
    """The document has missing, unknown or ill-typed keys."""


TOP_KEYS = {
    "tau", "n_steps", "initial_state", "drift", "collapse_ops", "control_hams",
    "controller", "observable", "integrator", "seed", "analysis",
}
REQUIRED_TOP = {"tau", "n_steps", "initial_state", "drift", "control_hams", "controller"}
CONTROLLER_KEYS = {"mode", "gains", "alpha", "u_max", "lambda", "probe_amplitude", "probe_semantics", "bootstrap"}
OBSERVABLE_KEYS = {"mode", "shots", "eta_max", "target"}
INTEGRATOR_KEYS = {"method", "substeps"}
ANALYSIS_KEYS = {"window", "descent_tol", "plateau_floors", "plateau_window", "envelope_width"}
METADATA_KEYS = {"config", "preset", "package_version", "notes", "controller_lambda_coupling"}

NAMED_OPERATORS = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z, "sigma_minus": SIGMA_MINUS}


def _strict(d: Any, allowed: set, where: str, required: set = frozenset()) -> dict:
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise SchemaError(f"{where}: missing keys {sorted(missing)}")
    return d


def _number(v, where: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, Real):
        raise SchemaError(f"{where}: expected a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        raise SchemaError(f"{where}: must be finite")
    if positive and v <= 0:
        raise SchemaError(f"{where}: must be > 0")
    if nonneg and v < 0:
        raise SchemaError(f"{where}: must be >= 0")
    return v


def _integer(v, where: str, minimum: int = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise SchemaError(f"{where}: must be >= {minimum}")
    return v


def _complex(v, where: str) -> complex:
    if isinstance(v, list) and len(v) == 2:
        return complex(_number(v[0], where), _number(v[1], where))
    return complex(_number(v, where))


def _vector(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise SchemaError(f"{where}: expected a nonempty list")
    return np.array([_complex(x, where) for x in v])


def _matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise SchemaError(f"{where}: expected a list of rows")
    n = len(v)
    if any(len(r) != n for r in v):
        raise SchemaError(f"{where}: matrix must be square")
    return np.array([[_complex(x, where) for x in r] for r in v])


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _operator(spec, where: str, dim_hint: int = None) -> np.ndarray:
    """``{"pauli": [cx, cy, cz]}``, ``{"matrix": ...}`` or ``{"op": name, "scale": s}``."""
    spec = _strict(spec, {"pauli", "matrix", "op", "scale"}, where)
    if len(set(spec) & {"pauli", "matrix", "op"}) != 1:
        raise SchemaError(f"{where}: give exactly one of 'pauli', 'matrix', 'op'")
    scale = _number(spec.get("scale", 1.0), f"{where}.scale")
    if "pauli" in spec:
        c = spec["pauli"]
        if not isinstance(c, list) or len(c) != 3:
            raise SchemaError(f"{where}.pauli: expected three coefficients")
        cx, cy, cz = (_number(x, f"{where}.pauli") for x in c)
        return scale * (cx * SIGMA_X + cy * SIGMA_Y + cz * SIGMA_Z)
    if "op" in spec:
        if spec["op"] not in NAMED_OPERATORS:
            raise SchemaError(f"{where}.op: unknown operator {spec['op']!r}; known {sorted(NAMED_OPERATORS)}")
        return scale * NAMED_OPERATORS[spec["op"]]
    return scale * _matrix(spec["matrix"], f"{where}.matrix")


def resolve(raw: dict) -> dict:
    """Validate a config document and return it with every default filled in."""
    d = _strict(raw, TOP_KEYS, "config", REQUIRED_TOP)
    out = {}
    tau = _number(d["tau"], "tau")
    if tau <= 0:
        raise SchemaError("tau: must be > 0")
    out["tau"] = tau
    out["n_steps"] = _integer(d["n_steps"], "n_steps", minimum=1)

    init = _strict(d["initial_state"], {"amplitudes", "bloch"}, "initial_state")
    if len(init) != 1:
        raise SchemaError("initial_state: give exactly one of 'amplitudes' or 'bloch'")
    if "bloch" in init:
        b = init["bloch"]
        if not isinstance(b, list) or len(b) != 3:
            raise SchemaError("initial_state.bloch: expected three numbers")
        out["initial_state"] = {"bloch": [_number(x, "initial_state.bloch") for x in b]}
    else:
        vec = _vector(init["amplitudes"], "initial_state.amplitudes")
        out["initial_state"] = {"amplitudes": [[float(z.real), float(z.imag)] for z in vec]}

    drift = _operator(d["drift"], "drift")
    out["drift"] = {"matrix": encode_matrix(drift)}
    ops = d.get("collapse_ops", [])
    if not isinstance(ops, list):
        raise SchemaError("collapse_ops: expected a list")
    out["collapse_ops"] = [{"matrix": encode_matrix(_operator(o, f"collapse_ops[{i}]"))} for i, o in enumerate(ops)]
    hams = d["control_hams"]
    if not isinstance(hams, list) or not hams:
        raise SchemaError("control_hams: expected a nonempty list")
    out["control_hams"] = [{"matrix": encode_matrix(_operator(h, f"control_hams[{i}]"))} for i, h in enumerate(hams)]
    m = len(hams)

    c = _strict(d["controller"], CONTROLLER_KEYS, "controller", {"mode", "gains", "alpha", "u_max"})
    if c["mode"] not in CONTROLLER_MODES:
        raise SchemaError(f"controller.mode: expected one of {CONTROLLER_MODES}")
    for key in ("gains", "alpha"):
        if not isinstance(c[key], list) or len(c[key]) != m:
            raise SchemaError(f"controller.{key}: expected {m} numbers (one per control Hamiltonian)")
    ctrl = {
        "mode": c["mode"],
        "gains": [_number(x, "controller.gains", positive=True) for x in c["gains"]],
        "alpha": [_number(x, "controller.alpha", positive=True) for x in c["alpha"]],
        "u_max": _number(c["u_max"], "controller.u_max", positive=True),
        "lambda": _number(c.get("lambda", 1.0), "controller.lambda", positive=True),
        "probe_amplitude": _number(c.get("probe_amplitude", 0.1), "controller.probe_amplitude", positive=True),
        "probe_semantics": c.get("probe_semantics", "branch"),
        "bootstrap": c.get("bootstrap", "zero"),
    }
    if ctrl["probe_semantics"] not in PROBE_SEMANTICS:
        raise SchemaError(f"controller.probe_semantics: expected one of {PROBE_SEMANTICS}")
    if ctrl["bootstrap"] not in BOOTSTRAPS:
        raise SchemaError(f"controller.bootstrap: expected one of {BOOTSTRAPS}")
    if ctrl["probe_amplitude"] > ctrl["u_max"]:
        raise SchemaError("controller.probe_amplitude: must not exceed u_max")
    out["controller"] = ctrl

    o = _strict(d.get("observable", {}), OBSERVABLE_KEYS, "observable")
    obs = {
        "mode": o.get("mode", "exact"),
        "shots": _integer(o.get("shots", 1000), "observable.shots", minimum=1),
        "eta_max": _number(o.get("eta_max", 0.0), "observable.eta_max", nonneg=True),
    }
    if obs["mode"] not in OBSERVABLE_MODES:
        raise SchemaError(f"observable.mode: expected one of {OBSERVABLE_MODES}")
    target = _vector(o["target"], "observable.target") if "target" in o else None
    if target is None:
        target = np.zeros(drift.shape[0], dtype=complex)
        target[0] = 1.0
    obs["target"] = [[float(z.real), float(z.imag)] for z in target]
    out["observable"] = obs

    integ = d.get("integrator", "rk4")
    if isinstance(integ, str):
        integ = {"method": integ}
    integ = _strict(integ, INTEGRATOR_KEYS, "integrator", {"method"})
    if integ["method"] not in INTEGRATORS:
        raise SchemaError(f"integrator.method: expected one of {INTEGRATORS}")
    out["integrator"] = {
        "method": integ["method"],
        "substeps": _integer(integ.get("substeps", DEFAULT_SUBSTEPS), "integrator.substeps", minimum=1),
    }
    out["seed"] = _integer(d.get("seed", 0), "seed", minimum=0)

    a = _strict(d.get("analysis", {}), ANALYSIS_KEYS, "analysis")
    window = _integer(a.get("window", min(500, out["n_steps"] // 2 or 1)), "analysis.window", minimum=1)
    if window >= out["n_steps"] + 1:
        raise SchemaError("analysis.window: must be shorter than the trajectory")
    floors = a.get("plateau_floors", [0.1, 0.3, 0.5])
    if not isinstance(floors, list):
        raise SchemaError("analysis.plateau_floors: expected a list")
    default_tol = 2.0 * obs["eta_max"] if obs["mode"] == "bounded_noise" else 1e-12
    out["analysis"] = {
        "window": window,
        "descent_tol": _number(a.get("descent_tol", default_tol), "analysis.descent_tol", nonneg=True),
        "plateau_floors": [_number(x, "analysis.plateau_floors", positive=True) for x in floors],
        "plateau_window": _integer(a.get("plateau_window", 50), "analysis.plateau_window", minimum=1),
        "envelope_width": _integer(
            a.get("envelope_width", min(100, max((out["n_steps"] + 1) // 3, 1))), "analysis.envelope_width", minimum=1
        ),
    }
    return out


def build(resolved: dict) -> LoopConfig:
    """Turn a resolved config into a LoopConfig; physics violations raise PhysicsError."""
    r = resolved
    drift = HermitianOperator(_matrix(r["drift"]["matrix"], "drift"))
    dim = drift.dim
    gen = GeneratorSpec(
        drift=drift,
        collapse_ops=tuple(_matrix(o["matrix"], "collapse_ops") for o in r["collapse_ops"]),
        control_hams=tuple(HermitianOperator(_matrix(h["matrix"], "control_hams")) for h in r["control_hams"]),
    )
    init = r["initial_state"]
    if "bloch" in init:
        if dim != 2:
            raise PhysicsError("a Bloch-vector initial state needs a qubit generator")
        rho0 = bloch_to_density(*init["bloch"])
    else:
        rho0 = pure_state(dim, _vector(init["amplitudes"], "initial_state"))
    o = r["observable"]
    target = _vector(o["target"], "observable.target")
    if target.size != dim:
        raise PhysicsError(f"target has {target.size} amplitudes, system dimension is {dim}")
    if abs(np.linalg.norm(target) - 1.0) > 1e-10:
        raise PhysicsError("observable target must be a unit vector")
    obs = LyapunovObservable(
        np.outer(target, target.conj()), mode=o["mode"], shots=o["shots"], eta_max=o["eta_max"], rng_seed=r["seed"]
    )
    c = r["controller"]
    ctrl = ControllerState(
        mode=c["mode"],
        gains=tuple(c["gains"]),
        alpha=tuple(c["alpha"]),
        u_max=c["u_max"],
        lam=c["lambda"],
        probe_amplitude=c["probe_amplitude"],
        probe_semantics=c["probe_semantics"],
        bootstrap=c["bootstrap"],
    )
    integ = r["integrator"]
    try:
        return LoopConfig(
            tau=r["tau"],
            n_steps=r["n_steps"],
            initial_state=rho0,
            generator=gen,
            observable=obs,
            controller=ctrl,
            integrator=integ["method"],
            substeps=integ["substeps"],
            seed=r["seed"],
        )
    except ValueError as exc:
        if isinstance(exc, PhysicsError):
            raise
        raise PhysicsError(str(exc)) from exc


def loads(text: str) -> dict:
    """Parse a config or run-metadata document and return the resolved config."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(f"malformed JSON: {exc}") from exc
    if isinstance(doc, dict) and "config" in doc:
        doc = _strict(doc, METADATA_KEYS, "run-metadata", {"config"})["config"]
    return resolve(doc)


def with_overrides(resolved: dict, steps=None, seed=None, shots=None, eta_max=None) -> dict:
    """Apply CLI overrides to a resolved config and re-validate."""
    d = copy.deepcopy(resolved)
    if steps is not None:
        d["n_steps"] = steps
        a = d["analysis"]
        a["window"] = min(a["window"], max(steps // 2, 1))
        # three envelope windows must still fit in steps + 1 samples
        a["envelope_width"] = min(a["envelope_width"], max((steps + 1) // 3, 1))
    if seed is not None:
        d["seed"] = seed
    if shots is not None:
        d["observable"]["mode"] = "shots"
        d["observable"]["shots"] = shots
    if eta_max is not None:
        d["observable"]["mode"] = "bounded_noise"
        d["observable"]["eta_max"] = eta_max
        d["analysis"]["descent_tol"] = 2.0 * eta_max
    return resolve(d)
