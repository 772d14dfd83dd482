"""Execution backends, the wire format, and the remote job contract."""
import math
import time

import numpy as np
import pytest

from vqrl.backend import (
    BackendDescriptor,
    EmulatedBackend,
    ExactBackend,
    JobNotFoundError,
    RemoteBackend,
    RemoteJobError,
    execute,
    make_backend,
    parse_circuit,
    poll,
    serialize_circuit,
)
from vqrl.genome import BoundCircuit, GateOp, SEARCHED_GENOME, bind_parameters, decode_genome
from vqrl.mockserver import MockQuantumServer
from vqrl.sim import NoiseModel, PauliZString, expectation, simulate
from vqrl.transpile import CompiledCircuit, lower

Z4 = PauliZString.all_qubits(4)


def _random_bound_circuit(rng, n=None):
    n = n or int(rng.integers(2, 5))
    gates = []
    for _ in range(int(rng.integers(1, 16))):
        kind = rng.integers(4)
        if kind == 3:
            q = int(rng.integers(n))
            gates.append(GateOp("cz", (q, (q + 1) % n)))
        else:
            name = ("rx", "ry", "rz")[kind]
            gates.append(GateOp(name, (int(rng.integers(n)),), float(rng.uniform(-np.pi, np.pi))))
    return BoundCircuit(n, tuple(gates)), n


def _random_compiled_circuit(rng):
    n = int(rng.integers(1, 6))
    gates = []
    for _ in range(int(rng.integers(0, 20))):
        kind = rng.integers(5)
        q = int(rng.integers(n))
        if kind < 3:
            gates.append(GateOp(("rx", "ry", "rz")[kind], (q,), float(rng.normal(scale=4.0))))
        elif kind == 3:
            gates.append(GateOp("h", (q,)))
        elif n > 1:
            q2 = int((q + 1 + rng.integers(n - 1)) % n)
            gates.append(GateOp("cx", (q, q2)))
    return CompiledCircuit(n, tuple(gates))


def test_exact_backend_on_empty_circuit():
    assert ExactBackend(Z4).expectation(BoundCircuit(4, ())) == pytest.approx(1.0)


def test_emulated_backend_noise_free_many_shots():
    rng = np.random.default_rng(0)
    circuit, n = _random_bound_circuit(rng, n=4)
    obs = PauliZString.all_qubits(n)
    backend = EmulatedBackend(obs, shots=10**5, noise=None, seed=7)
    lowered_exact = expectation(simulate(lower(circuit)), obs)
    assert abs(backend.expectation(circuit) - lowered_exact) <= 0.02


def test_emulated_matches_exact_in_many_shot_limit():
    # zero noise + 1e6 shots reproduces the analytic value of the lowered
    # circuit within 0.005, over 50 random circuits
    rng = np.random.default_rng(1)
    for trial in range(50):
        circuit, n = _random_bound_circuit(rng)
        obs = PauliZString(frozenset({int(q) for q in rng.choice(n, size=rng.integers(1, n + 1), replace=False)}))
        backend = EmulatedBackend(obs, shots=10**6, noise=None, seed=trial)
        reference = expectation(simulate(lower(circuit)), obs)
        assert abs(backend.expectation(circuit) - reference) <= 0.005


def test_emulated_backend_deterministic_given_seed():
    circuit, _ = _random_bound_circuit(np.random.default_rng(2), n=4)
    noise = NoiseModel(0.01, 0.02)
    a = EmulatedBackend(Z4, shots=500, noise=noise, seed=3)
    b = EmulatedBackend(Z4, shots=500, noise=noise, seed=3)
    assert [a.expectation(circuit) for _ in range(4)] == [b.expectation(circuit) for _ in range(4)]


def test_descriptor_validation():
    with pytest.raises(ValueError):
        BackendDescriptor(kind="quantum")
    with pytest.raises(ValueError):
        BackendDescriptor(shots=0)
    with pytest.raises(ValueError):
        BackendDescriptor(kind="remote")  # no endpoint


# -- wire format ---------------------------------------------------------------


def test_serialize_empty_circuit():
    assert serialize_circuit(CompiledCircuit(4, ())) == "qubits 4\n"


def test_serialize_h_cnot():
    compiled = CompiledCircuit(2, (GateOp("h", (0,)), GateOp("cx", (0, 1))))
    assert serialize_circuit(compiled) == "qubits 2\nh q[0]\ncx q[0],q[1]\n"


def test_serialize_rejects_non_basis_gate():
    with pytest.raises(ValueError, match="basis"):
        serialize_circuit(CompiledCircuit(2, (GateOp("cz", (0, 1)),)))


def test_parse_inverts_serialize():
    rng = np.random.default_rng(3)
    for _ in range(200):
        compiled = _random_compiled_circuit(rng)
        text = serialize_circuit(compiled)
        parsed = parse_circuit(text)
        assert parsed.n_qubits == compiled.n_qubits
        assert [(g.name, g.qubits) for g in parsed.gates] == [(g.name, g.qubits) for g in compiled.gates]


def test_round_trip_reserialization_is_bit_identical():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        text = serialize_circuit(_random_compiled_circuit(rng))
        assert serialize_circuit(parse_circuit(text)) == text


def test_parse_rejects_malformed_text():
    with pytest.raises(ValueError, match="header"):
        parse_circuit("h q[0]\n")
    with pytest.raises(ValueError, match="unparsable"):
        parse_circuit("qubits 2\ncnot q[0] q[1]\n")


# -- remote backend against the loopback mock ----------------------------------


@pytest.fixture(scope="module")
def server():
    with MockQuantumServer(noise=NoiseModel(0.005, 0.01), seed=99, token="sesame") as srv:
        yield srv


def _remote_descriptor(server, **kwargs):
    return BackendDescriptor(
        kind="remote", endpoint=server.endpoint, token="sesame", shots=kwargs.pop("shots", 1000), **kwargs
    )


def test_remote_equals_emulated_with_same_seed(server):
    ir = decode_genome(SEARCHED_GENOME, 4)
    rng = np.random.default_rng(5)
    circuit = bind_parameters(
        ir, rng.uniform(-np.pi, np.pi, ir.n_phi), rng.uniform(-1, 1, ir.n_lambda), rng.uniform(-1, 1, 4)
    )
    remote = RemoteBackend(Z4, _remote_descriptor(server))
    emulated = EmulatedBackend(Z4, shots=1000, noise=server.noise, seed=server.seed)
    # job index on the server keeps advancing across tests, so align the
    # emulated call counter with it
    emulated._calls = server._job_counter
    assert remote.expectation(circuit) == pytest.approx(emulated.expectation(circuit), abs=1e-12)


def test_remote_job_lifecycle_and_poll(server):
    remote = RemoteBackend(Z4, _remote_descriptor(server))
    job_id = remote.submit("qubits 2\nh q[0]\n", shots=100)
    deadline = time.monotonic() + 5
    while remote.poll(job_id).status != "done":
        assert time.monotonic() < deadline
        time.sleep(0.01)
    job = remote.poll(job_id)
    assert job.result is not None and job.result.shots == 100
    # polling is idempotent once done
    assert remote.poll(job_id).result.counts == job.result.counts


def test_remote_unknown_job(server):
    remote = RemoteBackend(Z4, _remote_descriptor(server))
    with pytest.raises(JobNotFoundError):
        remote.poll("no-such-job")
    with pytest.raises(JobNotFoundError):
        poll("no-such-job", _remote_descriptor(server))


def test_remote_injected_failure(server):
    remote = RemoteBackend(Z4, _remote_descriptor(server))
    server.inject_failures(1)
    with pytest.raises(RemoteJobError, match="fault") as err:
        remote.expectation(BoundCircuit(2, (GateOp("rx", (0,), 0.3),)))
    assert err.value.job_id


def test_remote_rejects_bad_token(server):
    bad = BackendDescriptor(kind="remote", endpoint=server.endpoint, token="wrong")
    remote = RemoteBackend(Z4, bad)
    with pytest.raises(RemoteJobError, match="401"):
        remote.submit("qubits 1\n", shots=10)


def test_remote_latency_then_done():
    with MockQuantumServer(seed=0, max_latency=0.15) as srv:
        descriptor = BackendDescriptor(kind="remote", endpoint=srv.endpoint, shots=50)
        remote = RemoteBackend(PauliZString(frozenset({0})), descriptor)
        value = remote.expectation(BoundCircuit(1, (GateOp("rx", (0,), math.pi),)))
        assert value == pytest.approx(-1.0)


def test_remote_timeout():
    with MockQuantumServer(seed=0, max_latency=5.0) as srv:
        descriptor = BackendDescriptor(
            kind="remote", endpoint=srv.endpoint, shots=10, poll_timeout=0.1, poll_interval=0.02
        )
        remote = RemoteBackend(PauliZString(frozenset({0})), descriptor)
        with pytest.raises(RemoteJobError, match="timed out"):
            remote.expectation(BoundCircuit(1, (GateOp("rx", (0,), 1.0),)))


def test_execute_and_make_backend_dispatch(server):
    circuit = BoundCircuit(4, ())
    assert execute(circuit, BackendDescriptor(kind="exact"), Z4) == pytest.approx(1.0)
    assert isinstance(make_backend(BackendDescriptor(kind="emulated"), Z4), EmulatedBackend)
    value = execute(circuit, _remote_descriptor(server), Z4)
    assert value == pytest.approx(1.0)
