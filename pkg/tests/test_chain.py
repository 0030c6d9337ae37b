import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad
from scipy.linalg import expm

from pulsechain.chain import (
    ChainSpec,
    NoiseRealization,
    QubitState,
    apply_pulse,
    apply_segment,
    basis_state,
    corrected_psi_N,
    fidelity_for_input,
    ideal_schedule,
    input_averaged_fidelity,
    last_amplitude,
    noisy_schedule,
    product_amplitude,
    propagate,
    propagate_batch,
    pulse_layer,
    reduced_state,
    segment_unitary,
    three_site_block,
    two_site_block,
)
from pulsechain.errors import InvalidAmplitude, NonMonotoneSchedule

SQ2 = np.sqrt(2)
SX = np.array([[0, 1], [1, 0]])
SPIN1_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / SQ2


def unitarity_error(U):
    return np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


# --- geometry and schedules ---


@pytest.mark.parametrize("K", [0, 1, 2, 7])
def test_chain_spec_layout(K):
    spec = ChainSpec(K)
    assert spec.N == 3 * K + 4
    assert sum(spec.segment_sizes) == spec.N
    assert spec.segment_sizes == [2] + [3] * K + [2]
    assert spec.apex_sites[-1] == spec.N
    assert ChainSpec.from_sites(spec.N) == spec


def test_chain_spec_rejects_bad_sizes():
    with pytest.raises(ValueError):
        ChainSpec(-1)
    with pytest.raises(ValueError):
        ChainSpec.from_sites(8)


def test_ideal_schedule_k0():
    s = ideal_schedule(ChainSpec(0))
    assert s.pulse_times == pytest.approx((np.pi / (2 * SQ2),), abs=1e-15)
    assert s.pulse_times[0] == pytest.approx(1.1107207, abs=1e-7)
    assert s.final_time == pytest.approx(2.2214415, abs=1e-7)


def test_ideal_schedule_k1():
    s = ideal_schedule(ChainSpec(1))
    t1 = np.pi / (2 * SQ2)
    assert s.pulse_times == pytest.approx((t1, t1 + np.pi / 2), abs=1e-15)
    assert s.final_time == pytest.approx(np.pi / SQ2 + np.pi / 2, abs=1e-15)


def test_ideal_schedule_k2_durations():
    d = ideal_schedule(ChainSpec(2)).durations
    t1 = np.pi / (2 * SQ2)
    np.testing.assert_allclose(d, [t1, np.pi / 2, np.pi / 2, t1], atol=1e-15)


def test_noisy_schedule_zero_is_ideal():
    spec = ChainSpec(3)
    assert noisy_schedule(spec, NoiseRealization.zero(spec)) == ideal_schedule(spec)


def test_noisy_schedule_shift():
    spec = ChainSpec(1)
    s = noisy_schedule(spec, NoiseRealization([0.1, -0.1, 0.0], [0.0, 0.0]))
    t1 = np.pi / (2 * SQ2)
    assert s.pulse_times[0] == pytest.approx(t1 + 0.1, abs=1e-15)
    assert s.pulse_times[1] == pytest.approx(t1 + np.pi / 2 - 0.1, abs=1e-15)
    assert s.final_time == pytest.approx(np.pi / SQ2 + np.pi / 2, abs=1e-15)


def test_noisy_schedule_non_monotone():
    spec = ChainSpec(0)
    with pytest.raises(NonMonotoneSchedule):
        noisy_schedule(spec, NoiseRealization([2.0, -2.0], [0.0]))
    with pytest.raises(NonMonotoneSchedule):
        propagate(spec, NoiseRealization([2.0, -2.0], [0.0]), basis_state(spec))


def test_noise_length_mismatch():
    with pytest.raises(ValueError):
        noisy_schedule(ChainSpec(2), NoiseRealization([0, 0, 0], [0, 0, 0]))


# --- blocks ---


def test_two_site_block_values():
    np.testing.assert_allclose(two_site_block(0.0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(two_site_block(np.pi / (2 * SQ2)), [[0, -1j], [-1j, 0]], atol=1e-15)
    np.testing.assert_allclose(two_site_block(np.pi / SQ2), -np.eye(2), atol=1e-15)


def test_three_site_block_values():
    np.testing.assert_allclose(three_site_block(0.0), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(three_site_block(np.pi / 2),
                               [[0, 0, -1], [0, -1, 0], [-1, 0, 0]], atol=1e-15)
    r = -1j * SQ2
    np.testing.assert_allclose(three_site_block(np.pi / 4),
                               0.5 * np.array([[1, r, -1], [r, 0, r], [-1, r, 1]]), atol=1e-15)


@pytest.mark.parametrize("t", [-1.3, 0.2, 0.9, 4.4])
def test_blocks_match_matrix_exponential(t):
    np.testing.assert_allclose(two_site_block(t), expm(-1j * t * SQ2 * SX), atol=1e-13)
    np.testing.assert_allclose(three_site_block(t), expm(-2j * t * SPIN1_X), atol=1e-13)


def test_blocks_broadcast():
    ts = np.array([0.1, 0.5, 2.0])
    stacked = three_site_block(ts)
    assert stacked.shape == (3, 3, 3)
    for t, U in zip(ts, stacked):
        np.testing.assert_allclose(U, three_site_block(t), atol=0)


@given(st.floats(-20, 20), st.integers(0, 6))
def test_segment_unitary_is_unitary(t, K):
    assert unitarity_error(segment_unitary(ChainSpec(K), t)) < 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_segment_semigroup(a, b):
    spec = ChainSpec(2)
    lhs = segment_unitary(spec, a) @ segment_unitary(spec, b)
    assert np.max(np.abs(lhs - segment_unitary(spec, a + b))) < 1e-12


def test_segment_unitary_examples():
    np.testing.assert_allclose(segment_unitary(ChainSpec(0), 0.0), np.eye(4), atol=0)
    spec = ChainSpec(1)
    out = segment_unitary(spec, np.pi / 2) @ basis_state(spec, 3)
    np.testing.assert_allclose(out, -basis_state(spec, 5), atol=1e-15)


def test_pulse_layer_ideal():
    spec = ChainSpec(2)
    P = pulse_layer(spec, [0.0, 0.0, 0.0])
    expected = np.zeros((spec.N, spec.N))
    for a in spec.apex_sites:
        expected[a - 1, a - 1] = 1
    for i, j in spec.pulse_pairs:
        expected[i - 1, j - 1] = expected[j - 1, i - 1] = 1
    np.testing.assert_allclose(P, expected, atol=0)
    np.testing.assert_allclose(pulse_layer(spec, 0.0), expected, atol=0)


def test_pulse_layer_half_pi_is_phase():
    spec = ChainSpec(1)
    P = pulse_layer(spec, [np.pi / 2, 0.0])
    np.testing.assert_allclose(P[1:3, 1:3], 1j * np.eye(2), atol=1e-15)


@given(st.lists(st.floats(-4, 4), min_size=4, max_size=4))
def test_pulse_layer_unitary(theta):
    assert unitarity_error(pulse_layer(ChainSpec(3), theta)) < 1e-12


def test_blockwise_matches_dense():
    rng = np.random.default_rng(0)
    for K in (0, 1, 4):
        spec = ChainSpec(K)
        x = random_state(rng, spec.N)
        d, th = rng.uniform(-2, 2), rng.uniform(-1, 1)
        np.testing.assert_allclose(apply_segment(spec, x, d), segment_unitary(spec, d) @ x, atol=1e-14)
        np.testing.assert_allclose(apply_pulse(spec, x, th), pulse_layer(spec, th) @ x, atol=1e-14)


def test_propagate_matches_dense_product():
    rng = np.random.default_rng(1)
    spec = ChainSpec(3)
    noise = NoiseRealization(rng.uniform(-0.3, 0.3, 5), rng.uniform(-0.3, 0.3, 4))
    x = random_state(rng, spec.N)
    d = noisy_schedule(spec, noise).durations
    U = segment_unitary(spec, d[0])
    for j, th in enumerate(noise.theta):
        U = segment_unitary(spec, d[j + 1]) @ pulse_layer(spec, th) @ U
    np.testing.assert_allclose(propagate(spec, noise, x), U @ x, atol=1e-13)


# --- propagation ---


@pytest.mark.parametrize("K", [0, 1, 2, 3, 10, 25])
def test_noiseless_perfect_transfer(K):
    spec = ChainSpec(K)
    final = propagate(spec, NoiseRealization.zero(spec), basis_state(spec, 1))
    expected = (-1) ** (K + 1) * basis_state(spec, spec.N)
    assert np.max(np.abs(final - expected)) < 1e-12


def test_k0_hand_product():
    # U(pi/(2 sqrt 2)) = [[0,-i],[-i,0]] on both blocks, P = 1 + sigma_x + 1.
    U = np.zeros((4, 4), dtype=complex)
    U[0, 1] = U[1, 0] = U[2, 3] = U[3, 2] = -1j
    P = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
    total = U @ P @ U
    np.testing.assert_allclose(total[:, 0], [0, 0, 0, -1], atol=0)
    spec = ChainSpec(0)
    final = propagate(spec, NoiseRealization.zero(spec), basis_state(spec))
    np.testing.assert_allclose(final, total[:, 0], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 200), st.integers(0, 2 ** 32 - 1))
def test_propagate_preserves_norm(K, seed):
    rng = np.random.default_rng(seed)
    spec = ChainSpec(K)
    noise = NoiseRealization(rng.uniform(-0.5, 0.5, K + 2), rng.uniform(-3, 3, K + 1))
    out = propagate(spec, noise, random_state(rng, spec.N))
    assert abs(np.linalg.norm(out) - 1) < 1e-12


def test_propagate_batch_matches_single():
    rng = np.random.default_rng(2)
    spec = ChainSpec(4)
    tau = rng.uniform(-0.3, 0.3, (6, 6))
    theta = rng.uniform(-0.3, 0.3, (6, 5))
    batch = propagate_batch(spec, tau, theta)
    for i in range(6):
        single = propagate(spec, NoiseRealization(tau[i], theta[i]), basis_state(spec))
        np.testing.assert_allclose(batch[i], single, atol=1e-14)


def test_last_amplitude_zero_noise():
    for K in range(6):
        spec = ChainSpec(K)
        assert abs(last_amplitude(spec, NoiseRealization.zero(spec)) - (-1) ** (K + 1)) < 1e-12


def test_last_amplitude_k0_example():
    spec = ChainSpec(0)
    noise = NoiseRealization([0.1, 0.0], [0.2])
    expected = -np.cos(0.2) * np.cos(SQ2 * 0.1) * np.cos(SQ2 * (0 - 0.1))
    assert abs(last_amplitude(spec, noise) - expected) < 1e-12
    assert abs(product_amplitude(spec, noise) - expected) < 1e-15


@pytest.mark.parametrize("K", [0, 1, 4])
def test_half_pi_pulse_blocks_transfer(K):
    spec = ChainSpec(K)
    theta = np.zeros(K + 1)
    theta[0] = np.pi / 2
    noise = NoiseRealization(np.zeros(K + 2), theta)
    assert abs(last_amplitude(spec, noise)) < 1e-15
    assert abs(corrected_psi_N(spec, noise)) < 1e-15


@pytest.mark.parametrize("K", [0, 1, 2, 5, 20])
def test_product_formula_exact(K):
    rng = np.random.default_rng(K)
    spec = ChainSpec(K)
    for _ in range(100):
        noise = NoiseRealization(rng.uniform(-0.3, 0.3, K + 2), rng.uniform(-0.3, 0.3, K + 1))
        assert abs(last_amplitude(spec, noise) - product_amplitude(spec, noise)) < 1e-10


def test_corrected_psi():
    spec = ChainSpec(3)
    assert corrected_psi_N(spec, NoiseRealization.zero(spec)) == pytest.approx(1.0, abs=1e-12)
    assert corrected_psi_N(spec, NoiseRealization.zero(spec), raw=True) == pytest.approx(1.0, abs=1e-12)
    spec = ChainSpec(2)
    assert corrected_psi_N(spec, NoiseRealization.zero(spec), raw=True) == pytest.approx(-1.0, abs=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(50):
        noise = NoiseRealization(rng.uniform(-0.1, 0.1, 4), rng.uniform(-1.5, 1.5, 3))
        assert 0 < corrected_psi_N(ChainSpec(2), noise) <= 1


# --- fidelities ---


def test_reduced_state_examples():
    np.testing.assert_allclose(reduced_state(QubitState(1, 0), 0.3 + 0.2j), np.diag([1, 0]), atol=0)
    np.testing.assert_allclose(reduced_state(QubitState(0, 1), 1), np.diag([0, 1]), atol=0)
    np.testing.assert_allclose(reduced_state(QubitState(0, 1), 0), np.diag([1, 0]), atol=0)
    with pytest.raises(InvalidAmplitude):
        reduced_state(QubitState(0, 1), 1.01)


@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi), st.floats(0, 1), st.floats(-np.pi, np.pi))
def test_reduced_state_is_density_matrix(theta, phi, r, arg):
    rho = reduced_state(QubitState.from_angles(theta, phi), r * np.exp(1j * arg))
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-15
    w = np.linalg.eigvalsh(rho)
    assert w.min() > -1e-10 and w.max() < 1 + 1e-10


def test_fidelity_for_input_examples():
    q = QubitState.from_angles(1.1, 0.4)
    assert fidelity_for_input(QubitState(1, 0), 0.3) == 1
    assert fidelity_for_input(QubitState(0, 1), 0.6j) == pytest.approx(0.36)
    assert fidelity_for_input(q, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_fidelity_matches_overlap():
    q = QubitState.from_angles(2.0, 1.0)
    psi = 0.4 - 0.5j
    v = np.array([q.alpha, q.beta])
    rho = reduced_state(q, psi)
    assert fidelity_for_input(q, psi) == pytest.approx((v.conj() @ rho @ v).real, abs=1e-14)


def test_input_averaged_examples():
    assert input_averaged_fidelity(1) == 1
    assert input_averaged_fidelity(0) == 0.5
    assert input_averaged_fidelity(-1) == pytest.approx(1 / 3)
    with pytest.raises(InvalidAmplitude):
        input_averaged_fidelity(2.0)


@given(st.floats(0, 1), st.floats(-np.pi, np.pi))
def test_input_averaged_range(r, arg):
    F = input_averaged_fidelity(r * np.exp(1j * arg))
    assert 1 / 3 - 1e-15 <= F <= 1 + 1e-15


@pytest.mark.parametrize("psi", [1.0, 0.0, -0.7, 0.3 + 0.6j, 0.9j])
def test_bloch_average_quadrature(psi):
    def integrand(phi, theta):
        return fidelity_for_input(QubitState.from_angles(theta, phi), psi) * np.sin(theta)

    val, _ = dblquad(integrand, 0, np.pi, 0, 2 * np.pi, epsabs=1e-11, epsrel=1e-11)
    assert abs(val / (4 * np.pi) - input_averaged_fidelity(psi)) < 1e-6
