import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdlyap.dynamics import (
    GeneratorSpec,
    disturbance_bound,
    lindblad_rhs,
    make_stepper,
    step_exact_unitary,
    step_rk4,
)
from fdlyap.quantum import (
    P1,
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    bloch_components,
    pauli_hamiltonian,
    random_density,
    random_pure_state,
)

CONTROLS = (SIGMA_X / 2, SIGMA_Y / 2)
DRIFT = pauli_hamiltonian((0.35, 0.20, 0.45))


def test_disturbance_bound_values():
    assert disturbance_bound(GeneratorSpec(DRIFT, (), CONTROLS)) == pytest.approx(1.208305, abs=1e-6)
    damped = GeneratorSpec(np.zeros((2, 2)), (SIGMA_MINUS,), CONTROLS)
    assert disturbance_bound(damped) == pytest.approx(3.0)


def test_amplitude_damping_population():
    gen = GeneratorSpec(np.zeros((2, 2)), (SIGMA_MINUS,), CONTROLS)
    rho = step_rk4(gen, (0, 0), P1, 1.0, substeps=64)
    assert rho.matrix[1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-6)


def test_damping_rhs_bloch_z():
    gen = GeneratorSpec(np.zeros((2, 2)), (SIGMA_MINUS,), CONTROLS)
    d = lindblad_rhs(gen, (0, 0), P1)
    assert np.trace(SIGMA_Z @ d).real == pytest.approx(2.0)


def test_rhs_is_commutator_for_closed_system(rng):
    gen = GeneratorSpec(DRIFT, (), CONTROLS)
    rho = random_density(rng, 2).matrix
    h = gen.total_hamiltonian((0.3, -0.2))
    assert np.allclose(lindblad_rhs(gen, (0.3, -0.2), rho), -1j * (h @ rho - rho @ h))


def test_exact_step_rejects_dissipation():
    gen = GeneratorSpec(np.zeros((2, 2)), (SIGMA_MINUS,), CONTROLS)
    with pytest.raises(ValueError):
        step_exact_unitary(gen, (0, 0), P1, 0.5)
    with pytest.raises(ValueError):
        make_stepper(gen, "exact_unitary")


def test_control_count_checked():
    gen = GeneratorSpec(DRIFT, (), CONTROLS)
    with pytest.raises(ValueError):
        gen.total_hamiltonian((1.0,))


def test_rk4_fourth_order(rng):
    gen = GeneratorSpec(DRIFT, (), CONTROLS)
    rho = random_density(rng, 2).matrix
    exact = step_exact_unitary(gen, (1.3, -0.7), rho, 0.5).matrix
    errs = [np.linalg.norm(step_rk4(gen, (1.3, -0.7), rho, 0.5, s).matrix - exact) for s in (4, 8, 16)]
    # halving the substep divides the error by about 2^4
    for a, b in zip(errs, errs[1:]):
        assert 12 <= a / b <= 20


def test_scaled_generator():
    gen = GeneratorSpec(DRIFT, (SIGMA_MINUS,), CONTROLS).scaled(0.5)
    assert np.allclose(gen.drift.matrix, 0.5 * DRIFT.matrix)
    assert np.allclose(gen.collapse_ops[0], np.sqrt(0.5) * SIGMA_MINUS)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_trace_and_positivity_preserved(seed, u1, u2):
    r = np.random.default_rng(seed)
    gen = GeneratorSpec(DRIFT, (0.3 * SIGMA_MINUS,), CONTROLS)
    rho = step_rk4(gen, (u1, u2), random_density(r, 2), 0.5).matrix
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(rho)[0] >= -1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_unitary_preserves_purity(seed, u1, u2):
    gen = GeneratorSpec(DRIFT, (), CONTROLS)
    psi = random_pure_state(np.random.default_rng(seed))
    exact = step_exact_unitary(gen, (u1, u2), psi, 0.5)
    rk = step_rk4(gen, (u1, u2), psi, 0.5)
    assert exact.purity() == pytest.approx(1.0, abs=1e-12)
    assert rk.purity() == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(bloch_components(exact)) == pytest.approx(1.0, abs=1e-12)
