"""Statevector simulation, sampling, noise, and shift-rule gradients."""
import math

import numpy as np
import pytest

from vqrl.genome import BoundCircuit, GateOp, Genome, SEARCHED_GENOME, bind_parameters, decode_genome
from vqrl.sim import (
    Counts,
    NoiseModel,
    PauliZString,
    estimate_expectation,
    expectation,
    expectation_and_gradient,
    parameter_shift_gradient,
    sample_counts,
    simulate,
)

Z_ALL_4 = PauliZString.all_qubits(4)


def _circuit(n, *gates):
    return BoundCircuit(n, tuple(GateOp(name, qubits, angle) for name, qubits, angle in gates))


def _random_circuit(rng, n=None, max_gates=20):
    n = n or int(rng.integers(2, 5))
    gates = []
    for _ in range(int(rng.integers(1, max_gates + 1))):
        name = ("rx", "ry", "rz", "cz", "h", "cx")[rng.integers(6)]
        q = int(rng.integers(n))
        if name in ("cz", "cx"):
            q2 = int((q + 1 + rng.integers(n - 1)) % n)
            gates.append(("cz" if name == "cz" else "cx", (q, q2), None))
        else:
            gates.append((name, (q,), float(rng.uniform(-np.pi, np.pi))))
    return _circuit(n, *gates), n


def test_empty_circuit_is_identity():
    sv = simulate(_circuit(2))
    assert np.allclose(sv, [1, 0, 0, 0])


def test_rx_pi_flips_with_phase():
    sv = simulate(_circuit(1, ("rx", (0,), math.pi)))
    assert np.allclose(sv, [0, -1j], atol=1e-12)


def test_ry_half_pi_is_equal_superposition():
    sv = simulate(_circuit(1, ("ry", (0,), math.pi / 2)))
    assert np.allclose(sv, [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)


def test_expectation_all_zeros():
    sv = simulate(_circuit(4))
    assert expectation(sv, Z_ALL_4) == pytest.approx(1.0)


def test_expectation_single_flip_is_odd_parity():
    sv = simulate(_circuit(2, ("rx", (0,), math.pi)))
    assert expectation(sv, PauliZString(frozenset({0, 1}))) == pytest.approx(-1.0)


def test_expectation_equator_is_zero():
    sv = simulate(_circuit(1, ("rx", (0,), math.pi / 2)))
    assert expectation(sv, PauliZString(frozenset({0}))) == pytest.approx(0.0, abs=1e-12)


def test_expectation_rejects_bad_qubits():
    sv = simulate(_circuit(2))
    with pytest.raises(ValueError, match="observable"):
        expectation(sv, PauliZString(frozenset({5})))


def test_sample_counts_deterministic_state():
    sv = simulate(_circuit(2))
    counts = sample_counts(sv, shots=100, seed=11)
    assert counts.counts == {"00": 100} and counts.shots == 100


def test_sample_counts_binomial_band():
    sv = simulate(_circuit(1, ("ry", (0,), math.pi / 2)))
    shots = 10**5
    counts = sample_counts(sv, shots=shots, seed=0)
    sigma = math.sqrt(shots * 0.25)
    for bits in ("0", "1"):
        assert abs(counts.counts[bits] - shots / 2) <= 5 * sigma


def test_sample_counts_single_shot():
    sv = simulate(_circuit(2, ("h", (0,), None)))
    counts = sample_counts(sv, shots=1, seed=3)
    assert sum(counts.counts.values()) == 1 and len(counts.counts) == 1


def test_sample_counts_seed_determinism():
    sv = simulate(_circuit(2, ("ry", (0,), 1.0), ("ry", (1,), 2.0)))
    assert sample_counts(sv, 500, seed=9).counts == sample_counts(sv, 500, seed=9).counts


def test_estimate_expectation_examples():
    assert estimate_expectation(Counts({"0000": 1000}, 1000), Z_ALL_4) == pytest.approx(1.0)
    two = PauliZString(frozenset({0, 1}))
    assert estimate_expectation(Counts({"01": 500, "10": 500}, 1000), two) == pytest.approx(-1.0)
    assert estimate_expectation(Counts({"00": 750, "11": 250}, 1000), two) == pytest.approx(1.0)


def test_counts_validation():
    with pytest.raises(ValueError):
        Counts({"00": 2}, 3)
    with pytest.raises(ValueError):
        Counts({}, 0)


def test_norm_preserved_on_random_circuits():
    rng = np.random.default_rng(1)
    for _ in range(200):
        circuit, _ = _random_circuit(rng)
        sv = simulate(circuit)
        assert abs(np.linalg.norm(sv) - 1.0) < 1e-10


def test_qubit_guard():
    with pytest.raises(ValueError, match="n_qubits"):
        simulate(_circuit(25))


# -- noise -------------------------------------------------------------------


def test_noiseless_ignores_seed():
    circuit, _ = _random_circuit(np.random.default_rng(2))
    assert np.array_equal(simulate(circuit, seed=1), simulate(circuit, seed=2))


def test_noise_trajectories_deterministic_per_seed():
    circuit, _ = _random_circuit(np.random.default_rng(3))
    noise = NoiseModel(0.2, 0.5)
    assert np.array_equal(simulate(circuit, noise, seed=5), simulate(circuit, noise, seed=5))
    # With heavy noise two trajectories almost surely differ somewhere.
    diffs = sum(
        not np.array_equal(simulate(circuit, noise, seed=s), simulate(circuit, noise, seed=s + 100))
        for s in range(20)
    )
    assert diffs > 0


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(-0.1, 0)
    with pytest.raises(ValueError):
        NoiseModel(0, 1.5)


def test_depolarizing_noise_contracts_expectations():
    # Averaged over trajectories, noise never amplifies |<O>| beyond
    # sampling error.
    rng = np.random.default_rng(4)
    noise = NoiseModel(0.05, 0.05)
    trials = 2000
    for _ in range(4):
        circuit, n = _random_circuit(rng, max_gates=12)
        obs = PauliZString(frozenset({int(q) for q in rng.choice(n, size=rng.integers(1, n + 1), replace=False)}))
        exact = expectation(simulate(circuit), obs)
        samples = np.array([expectation(simulate(circuit, noise, seed=t), obs) for t in range(trials)])
        sigma = samples.std(ddof=1) / math.sqrt(trials)
        assert abs(samples.mean()) <= abs(exact) + 3 * sigma


# -- estimator consistency -----------------------------------------------------


def test_shot_estimator_tracks_exact_expectation():
    rng = np.random.default_rng(5)
    shots = 1000
    failures = 0
    trials = 300
    for t in range(trials):
        circuit, n = _random_circuit(rng, max_gates=10)
        obs = PauliZString(frozenset({int(q) for q in rng.choice(n, size=rng.integers(1, n + 1), replace=False)}))
        sv = simulate(circuit)
        est = estimate_expectation(sample_counts(sv, shots, seed=t), obs)
        failures += abs(est - expectation(sv, obs)) > 3 / math.sqrt(shots)
    assert failures <= 0.01 * trials


# -- parameter-shift gradients -------------------------------------------------


def _fd_expectation_gradient(ir, phi, lam, state, obs, squash=None, h=1e-4):
    """Independent oracle: central finite differences of the exact expectation."""

    def value(p, l):
        return expectation(simulate(bind_parameters(ir, p, l, state, squash=squash)), obs)

    dphi = np.zeros_like(phi)
    for k in range(len(phi)):
        up, dn = phi.copy(), phi.copy()
        up[k] += h
        dn[k] -= h
        dphi[k] = (value(up, lam) - value(dn, lam)) / (2 * h)
    dlam = np.zeros_like(lam)
    for k in range(len(lam)):
        up, dn = lam.copy(), lam.copy()
        up[k] += h
        dn[k] -= h
        dlam[k] = (value(phi, up) - value(phi, dn)) / (2 * h)
    return dphi, dlam


def test_shift_rule_single_rx_at_zero_and_half_pi():
    ir = decode_genome(Genome((1, 0)), n_qubits=2)
    obs = PauliZString(frozenset({0}))
    # <Z0> = cos(theta_rx); RY/RZ angles zero.  d/dtheta at 0 is 0.
    phi = np.zeros(6)
    dphi, _ = parameter_shift_gradient(ir, phi, np.zeros(0), np.zeros(2), obs)
    assert dphi[0] == pytest.approx(0.0, abs=1e-12)
    phi[0] = math.pi / 2
    dphi, _ = parameter_shift_gradient(ir, phi, np.zeros(0), np.zeros(2), obs)
    assert dphi[0] == pytest.approx(-1.0, abs=1e-12)


def test_shift_rule_matches_finite_differences_on_searched_genome():
    ir = decode_genome(SEARCHED_GENOME, 4)
    rng = np.random.default_rng(6)
    phi = rng.uniform(-np.pi, np.pi, ir.n_phi)
    lam = rng.uniform(-1.5, 1.5, ir.n_lambda)
    state = rng.uniform(-1, 1, 4)
    e, dphi, dlam = expectation_and_gradient(ir, phi, lam, state, Z_ALL_4)
    fd_phi, fd_lam = _fd_expectation_gradient(ir, phi, lam, state, Z_ALL_4)
    assert abs(e - expectation(simulate(bind_parameters(ir, phi, lam, state)), Z_ALL_4)) < 1e-12
    np.testing.assert_allclose(dphi, fd_phi, rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(dlam, fd_lam, rtol=1e-4, atol=1e-7)


@pytest.mark.parametrize("squash", [None, "arctan"])
def test_shift_rule_matches_finite_differences_random_circuits(squash):
    rng = np.random.default_rng(8)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        genes = tuple(int(g) for g in rng.integers(1, 4, size=rng.integers(1, 13)))
        ir = decode_genome(Genome(genes + (0,)), n)
        phi = rng.uniform(-np.pi, np.pi, ir.n_phi)
        lam = rng.uniform(-1.5, 1.5, ir.n_lambda)
        state = rng.uniform(-2, 2, n)
        obs = PauliZString(frozenset({int(q) for q in rng.choice(n, size=rng.integers(1, n + 1), replace=False)}))
        dphi, dlam = parameter_shift_gradient(ir, phi, lam, state, obs, squash=squash)
        fd_phi, fd_lam = _fd_expectation_gradient(ir, phi, lam, state, obs, squash=squash)
        np.testing.assert_allclose(dphi, fd_phi, rtol=1e-4, atol=1e-7)
        np.testing.assert_allclose(dlam, fd_lam, rtol=1e-4, atol=1e-7)


def test_gradient_dimension_mismatch():
    ir = decode_genome(SEARCHED_GENOME, 4)
    with pytest.raises(ValueError, match="phi"):
        parameter_shift_gradient(ir, np.zeros(3), np.zeros(12), np.zeros(4), Z_ALL_4)
