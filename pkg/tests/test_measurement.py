import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdlyap.measurement import LyapunovObservable, Povm, V_is_proper, outcome_probabilities, target_observable
from fdlyap.quantum import P0, P1, PhysicsError, bloch_to_density, random_density, trace_norm


def test_exact_values():
    obs = LyapunovObservable(P0)
    assert obs.evaluate(P0) == pytest.approx(0.0)
    assert obs.evaluate(P1) == pytest.approx(1.0)
    assert obs.evaluate(bloch_to_density(1, 0, 0)) == pytest.approx(0.5)


def test_target_must_be_rank_one_projector():
    with pytest.raises(PhysicsError):
        LyapunovObservable(np.eye(2))


def test_povm_completeness_checked():
    with pytest.raises(PhysicsError):
        Povm((P0, P0))
    probs = outcome_probabilities(Povm((P0, P1)), bloch_to_density(0, 0, 0.2))
    assert probs == pytest.approx([0.6, 0.4])


def test_shot_noise_statistics():
    rho = bloch_to_density(0, 0, 0.2)  # V = 0.4
    obs = LyapunovObservable(P0, mode="shots", shots=200, rng_seed=3)
    samples = np.array([obs.evaluate(rho) for _ in range(4000)])
    # binomial: mean V, variance p(1-p)/shots
    assert samples.mean() == pytest.approx(0.4, abs=0.005)
    assert samples.var() == pytest.approx(0.4 * 0.6 / 200, rel=0.1)
    assert np.allclose(samples * 200, np.round(samples * 200))


def test_bounded_noise_within_eta():
    rho = bloch_to_density(0, 0, 0.2)
    obs = LyapunovObservable(P0, mode="bounded_noise", eta_max=0.05, rng_seed=1)
    dev = np.array([obs.evaluate(rho) for _ in range(2000)]) - 0.4
    assert np.all(np.abs(dev) <= 0.05)
    assert dev.max() > 0.04 and dev.min() < -0.04


def test_reseed_replays_stream():
    obs = LyapunovObservable(P0, mode="bounded_noise", eta_max=0.1, rng_seed=5)
    a = [obs.evaluate(P1) for _ in range(5)]
    obs.reseed()
    assert [obs.evaluate(P1) for _ in range(5)] == a


def test_properness(rng):
    obs = target_observable([1, 0])
    assert V_is_proper(obs, P0)
    for _ in range(50):
        assert V_is_proper(obs, random_density(rng, 2))
    with pytest.raises(ValueError):
        V_is_proper(LyapunovObservable(P0, mode="shots"), P0)


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_V_lipschitz_in_trace_norm(seed):
    r = np.random.default_rng(seed)
    a, b = random_density(r, 2).matrix, random_density(r, 2).matrix
    obs = LyapunovObservable(P0)
    assert abs(obs.exact(a) - obs.exact(b)) <= trace_norm(a - b) + 1e-12
    assert 0.0 <= obs.exact(a) <= 1.0
