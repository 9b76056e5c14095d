import copy
import dataclasses

import numpy as np
import pytest

from fdlyap.config import build
from fdlyap.loop import BatchError, LoopConfig, LoopError, run_batch, run_closed_loop
from fdlyap.quantum import P1, pure_state

from conftest import qubit_config


def test_log_shapes_and_sampling_grid(small_cfg):
    log = run_closed_loop(small_cfg)
    assert len(log) == 41
    assert np.allclose(log.t, 0.5 * np.arange(41))
    assert log.u.shape == (41, 2) and log.gains.shape == (41, 2)
    assert log.V_exact[0] == pytest.approx(1.0)
    assert log.delta_V[0] == 0.0
    assert np.allclose(log.delta_V[1:], np.diff(log.V_measured))


def test_controller_never_reads_state(small_cfg):
    log = run_closed_loop(small_cfg)
    assert log.rho_reads.get("fdlyap.controller", 0) == 0
    assert log.rho_reads.get("fdlyap.loop", 0) > 0


def test_sequential_semantics_controller_blind():
    cfg = build(qubit_config(n_steps=30, controller={"probe_semantics": "sequential"}, analysis={"window": 10}))
    log = run_closed_loop(cfg)
    assert log.rho_reads.get("fdlyap.controller", 0) == 0
    assert np.max(log.trace_error) < 1e-9


def test_drift_free_converges(small_cfg):
    cfg = copy.copy(small_cfg)
    cfg.n_steps = 400
    assert run_closed_loop(cfg).final_V() < 1e-3


def test_deterministic_csv():
    cfg = build(qubit_config(n_steps=50, observable={"mode": "shots", "shots": 100}, analysis={"window": 10}))
    assert run_closed_loop(cfg).to_csv() == run_closed_loop(cfg).to_csv()
    other = copy.copy(cfg)
    other.seed = 99
    assert run_closed_loop(other).to_csv() != run_closed_loop(cfg).to_csv()


def test_csv_header(small_cfg):
    text = run_closed_loop(small_cfg).to_csv()
    assert text.splitlines()[0] == "n,t,V_measured,V_exact,u_1,u_2,kappa_1,kappa_2,x,y,z"
    assert len(text.splitlines()) == 42


def test_config_validation(small_cfg):
    with pytest.raises(ValueError):
        LoopConfig(0.0, 10, small_cfg.initial_state, small_cfg.generator, small_cfg.observable, small_cfg.controller)
    with pytest.raises(ValueError):
        LoopConfig(0.5, 10, pure_state(3, [1, 0, 0]), small_cfg.generator, small_cfg.observable, small_cfg.controller)


def test_loop_error_carries_step(small_cfg):
    cfg = copy.copy(small_cfg)
    cfg.integrator, cfg.substeps = "rk4", 1
    # absurd inputs make a single coarse RK4 step blow up
    cfg.controller = dataclasses.replace(cfg.controller, u_max=1e9, lam=1e9)
    with pytest.raises(LoopError) as info:
        run_closed_loop(cfg)
    assert info.value.step >= 0


def test_run_batch_order_and_errors(small_cfg):
    a = copy.copy(small_cfg)
    b = copy.copy(small_cfg)
    b.initial_state = pure_state(2, [1, 0])
    logs = run_batch([a, b])
    assert logs[0].V_exact[0] == pytest.approx(1.0)
    assert logs[1].V_exact[0] == pytest.approx(0.0)
    bad = copy.copy(small_cfg)
    bad.substeps = 0
    bad.integrator = "rk4"
    with pytest.raises(BatchError) as info:
        run_batch([a, bad])
    assert list(info.value.errors) == [1]
    assert info.value.logs[0] is not None
    with pytest.raises(ValueError):
        run_batch([])
