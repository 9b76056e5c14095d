import numpy as np
import pytest

from fdlyap.analysis import (
    check_descent,
    check_noise_robustness,
    check_plateau_exclusion,
    envelope_nonincreasing,
    iss_residual,
    noise_constant,
    oscillation_envelopes,
    stationarity_defect,
    steady_state,
)
from fdlyap.dynamics import GeneratorSpec
from fdlyap.loop import TrajectoryLog
from fdlyap.quantum import P0, SIGMA_X, SIGMA_Y, pauli_hamiltonian


def fake_log(V, gains=None, bloch=None, meta=None):
    V = np.asarray(V, dtype=float)
    n = V.size
    g = np.ones((n, 1)) if gains is None else np.asarray(gains, dtype=float).reshape(n, -1)
    return TrajectoryLog(
        t=0.5 * np.arange(n), V_measured=V, V_exact=V, u=np.zeros((n, 1)), gains=g,
        delta_V=np.r_[0.0, np.diff(V)], bloch=bloch, trace_error=np.zeros(n), min_eigenvalue=np.zeros(n),
        meta=meta or {},
    )


def test_descent_index():
    rep = check_descent(fake_log([1.0, 0.8, 0.9, 0.7, 0.6, 0.5, 0.4, 0.3]))
    # last increase at sample 2, so descent holds from N = 3
    assert rep.eventually_descending and rep.first_descent_index == 3
    assert check_descent(fake_log(np.linspace(1, 0, 10))).first_descent_index == 1


def test_descent_fails_on_late_increase():
    rep = check_descent(fake_log([1.0, 0.9, 0.8, 0.7, 0.6, 0.65]))
    assert not rep.eventually_descending and rep.first_descent_index is None
    assert rep.violations[0][0] == 5
    assert rep.to_dict()["first_descent_index"] is None


def test_descent_tolerance():
    V = [1.0, 0.5, 0.5 + 1e-14, 0.4, 0.3, 0.2]
    assert check_descent(fake_log(V), tol=1e-12).first_descent_index == 1


def test_plateau_detection():
    V = np.r_[np.linspace(1, 0.3005, 10), np.full(60, 0.3005)]
    assert not check_plateau_exclusion(fake_log(V), 0.3, 50)
    growing = np.linspace(1, 2, V.size)
    assert check_plateau_exclusion(fake_log(V, gains=growing), 0.3, 50)
    assert check_plateau_exclusion(fake_log(V), 0.1, 50)


def test_iss_residual_and_constant():
    gen = GeneratorSpec(pauli_hamiltonian((0.35, 0.20, 0.45)), (), (SIGMA_X / 2, SIGMA_Y / 2))
    V = np.r_[np.linspace(1, 0.2, 50), np.tile([0.1, 0.3], 25)]
    rep = iss_residual(fake_log(V), gen, 0.5, window=50)
    assert rep.residual == pytest.approx(0.2)
    assert rep.limsup_estimate == pytest.approx(0.3)
    assert rep.C_empirical == pytest.approx(0.3 / (1.208305 * 0.5), rel=1e-5)
    with pytest.raises(ValueError):
        iss_residual(fake_log(V), gen, 0.5, window=500)


def test_envelopes():
    V = np.r_[np.tile([0.0, 0.3], 50), np.tile([0.0, 0.2], 50), np.tile([0.0, 0.1], 50)]
    env = oscillation_envelopes(fake_log(V), 100, 3)
    assert env == pytest.approx([0.3, 0.2, 0.1])
    assert envelope_nonincreasing(env)
    assert not envelope_nonincreasing([0.1, 0.2])
    assert envelope_nonincreasing([0.1, 0.11])


def test_steady_state_mean():
    b = np.tile([[0.6, 0.2, 0.77]], (20, 1))
    ss = steady_state(fake_log(np.zeros(20), bloch=b), 10)
    assert ss.bloch_mean == pytest.approx((0.6, 0.2, 0.77))
    with pytest.raises(ValueError):
        steady_state(fake_log(np.zeros(20)), 10)


def test_noise_robustness():
    meta = {"tau": 0.5, "observable": {"mode": "bounded_noise", "eta_max": 0.0}}
    logs = [fake_log(np.full(20, r), meta=meta) for r in (0.0, 0.001, 0.02, 0.2)]
    ok, res = check_noise_robustness(logs, [0, 0.01, 0.05, 0.1], 10)
    assert ok and res == pytest.approx([0, 0.001, 0.02, 0.2])
    assert noise_constant(res, [0, 0.01, 0.05, 0.1]) == pytest.approx(2.0)
    logs[1] = fake_log(np.full(20, 0.001), meta={"tau": 0.25, "observable": {}})
    with pytest.raises(ValueError):
        check_noise_robustness(logs, [0, 0.01, 0.05, 0.1], 10)


def test_stationarity_defect_zero_at_fixed_point():
    gen = GeneratorSpec(pauli_hamiltonian((0, 0, 1.0)), (), (SIGMA_X / 2,))
    assert stationarity_defect(P0, gen, (0.0,)) == pytest.approx(0.0)
    assert stationarity_defect(P0, gen, (1.0,)) > 0
