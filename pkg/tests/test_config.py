import json

import numpy as np
import pytest

from fdlyap.config import ConfigSyntaxError, SchemaError, build, loads, resolve, with_overrides
from fdlyap.presets import PRESETS, get_preset, resolved_preset, run_metadata
from fdlyap.quantum import PhysicsError

from conftest import qubit_config


def raw():
    return json.loads(json.dumps(get_preset("qubit-drift").config))


def test_defaults_filled():
    r = resolve(raw())
    assert r["observable"]["target"] == [[1.0, 0.0], [0.0, 0.0]]
    assert r["controller"]["probe_semantics"] == "branch"
    assert r["analysis"]["descent_tol"] == 1e-12
    assert r["analysis"]["plateau_window"] == 50


@pytest.mark.parametrize("tau", [0, -0.5])
def test_nonpositive_tau(tau):
    d = raw()
    d["tau"] = tau
    with pytest.raises(SchemaError):
        resolve(d)


def test_unknown_key_rejected():
    d = raw()
    d["controler"] = {}
    with pytest.raises(SchemaError, match="controler"):
        resolve(d)


def test_gain_count_must_match_controls():
    d = raw()
    d["controller"]["gains"] = [0.5]
    with pytest.raises(SchemaError):
        resolve(d)


def test_non_hermitian_drift_is_physics_error():
    d = raw()
    d["drift"] = {"matrix": [[0, 1], [0, 0]]}
    with pytest.raises(PhysicsError):
        build(resolve(d))


def test_complex_matrix_entries():
    d = raw()
    d["drift"] = {"matrix": [[0, [0, -1]], [[0, 1], 0]]}
    cfg = build(resolve(d))
    assert np.allclose(cfg.generator.drift.matrix, [[0, -1j], [1j, 0]])


def test_bad_json():
    with pytest.raises(ConfigSyntaxError):
        loads("{not json")


def test_metadata_envelope_round_trip():
    r = resolved_preset(get_preset("qubit-drift"))
    meta = run_metadata(r, "qubit-drift")
    assert loads(json.dumps(meta)) == r
    assert loads(json.dumps(r)) == r


def test_overrides():
    r = with_overrides(qubit_config(), steps=20, seed=3, eta_max=0.05)
    assert r["n_steps"] == 20 and r["seed"] == 3
    assert r["observable"]["mode"] == "bounded_noise"
    assert r["analysis"]["descent_tol"] == pytest.approx(0.1)
    assert r["analysis"]["window"] <= 10


def test_every_preset_builds():
    for p in PRESETS.values():
        build(resolved_preset(p))
