"""Execution backends: exact simulator, shot-sampled noisy emulator, remote client.

All backends expose ``expectation(circuit) -> float`` for a bound circuit.
The emulated and remote paths run the lowering pass first so shot results
reflect the hardware-shaped circuit (including the dropped wrap-around CZ),
then estimate the observable from sampled counts.  The remote client speaks
a minimal job-queue protocol: POST /jobs submits a serialized circuit and
returns an id; GET /jobs/{id} reports status and, once done, counts.
"""
from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass

import numpy as np
import requests

from . import sim
from .genome import BoundCircuit, GateOp
from .sim import Counts, NoiseModel, PauliZString
from .transpile import BASIS_GATES, CompiledCircuit, CouplingMap, lower

BACKEND_KINDS = ("exact", "emulated", "remote")
DEFAULT_SHOTS = 1000
TOKEN_ENV_VAR = "VQRL_TOKEN"

JOB_STATUSES = ("queued", "running", "done", "failed")


class RemoteJobError(RuntimeError):
    """Remote execution failure; carries the offending job id when known."""

    def __init__(self, message: str, job_id: str | None = None):
        super().__init__(message)
        self.job_id = job_id


class JobNotFoundError(RemoteJobError):
    pass


@dataclass
class BackendDescriptor:
    """Where and how circuits run; ``shots``/``noise`` apply to the emulated kind."""

    kind: str = "exact"
    shots: int = DEFAULT_SHOTS
    noise: NoiseModel | None = None
    endpoint: str = ""
    token: str = ""
    coupling: CouplingMap | None = None
    poll_timeout: float = 30.0
    poll_interval: float = 0.02

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")


@dataclass
class Job:
    id: str
    status: str
    circuit_text: str = ""
    result: Counts | None = None
    error: str = ""


def serialize_circuit(compiled: CompiledCircuit) -> str:
    """Text wire format: a ``qubits n`` header then one gate per line.

    Angles are printed with 12 significant digits, which re-serializes
    bit-identically after a parse round trip.
    """
    lines = [f"qubits {compiled.n_qubits}"]
    for g in compiled.gates:
        if g.name in ("rx", "ry", "rz"):
            lines.append(f"{g.name} q[{g.qubits[0]}] {g.angle:.12g}")
        elif g.name == "h":
            lines.append(f"h q[{g.qubits[0]}]")
        elif g.name == "cx":
            lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}]")
        else:
            raise ValueError(f"gate {g.name!r} is not in the wire basis {BASIS_GATES}")
    return "\n".join(lines) + "\n"


_ROT_RE = re.compile(r"^(rx|ry|rz) q\[(\d+)\] (\S+)$")
_H_RE = re.compile(r"^h q\[(\d+)\]$")
_CX_RE = re.compile(r"^cx q\[(\d+)\],q\[(\d+)\]$")


def parse_circuit(text: str) -> CompiledCircuit:
    """Inverse of :func:`serialize_circuit`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("qubits "):
        raise ValueError("circuit text must start with a 'qubits <n>' header")
    n_qubits = int(lines[0].split()[1])
    gates: list[GateOp] = []
    for ln in lines[1:]:
        if m := _ROT_RE.match(ln):
            gates.append(GateOp(m.group(1), (int(m.group(2)),), float(m.group(3))))
        elif m := _H_RE.match(ln):
            gates.append(GateOp("h", (int(m.group(1)),)))
        elif m := _CX_RE.match(ln):
            gates.append(GateOp("cx", (int(m.group(1)), int(m.group(2)))))
        else:
            raise ValueError(f"unparsable circuit line: {ln!r}")
    return CompiledCircuit(n_qubits, tuple(gates))


def derived_seeds(master: int, call_index: int) -> tuple[int, int]:
    """Per-call (noise, sampling) seeds; shared with the loopback mock server."""
    ss = np.random.SeedSequence((master, call_index))
    a, b = ss.generate_state(2)
    return int(a), int(b)


class ExactBackend:
    """Analytic expectations from the noiseless dense simulator; no lowering."""

    kind = "exact"

    def __init__(self, observable: PauliZString):
        self.observable = observable

    def expectation(self, circuit: BoundCircuit) -> float:
        return sim.expectation(sim.simulate(circuit), self.observable)


class EmulatedBackend:
    """Virtual device: lowering pass, Pauli-trajectory noise, finite shots."""

    kind = "emulated"

    def __init__(
        self,
        observable: PauliZString,
        shots: int = DEFAULT_SHOTS,
        noise: NoiseModel | None = None,
        coupling: CouplingMap | None = None,
        seed: int = 0,
    ):
        self.observable = observable
        self.shots = shots
        self.noise = noise
        self.coupling = coupling
        self.seed = seed
        self._calls = 0

    def run_counts(self, circuit: BoundCircuit) -> Counts:
        compiled = lower(circuit, self.coupling)
        noise_seed, shot_seed = derived_seeds(self.seed, self._calls)
        self._calls += 1
        state = sim.simulate(compiled, noise=self.noise, seed=noise_seed)
        return sim.sample_counts(state, self.shots, seed=shot_seed)

    def expectation(self, circuit: BoundCircuit) -> float:
        return sim.estimate_expectation(self.run_counts(circuit), self.observable)


class RemoteBackend:
    """Client for the remote job-queue contract; bearer-token authenticated."""

    kind = "remote"

    def __init__(self, observable: PauliZString, descriptor: BackendDescriptor):
        self.observable = observable
        self.descriptor = descriptor
        self._session = requests.Session()
        token = descriptor.token or os.environ.get(TOKEN_ENV_VAR, "")
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"

    def submit(self, circuit_text: str, shots: int) -> str:
        url = f"{self.descriptor.endpoint.rstrip('/')}/jobs"
        try:
            resp = self._session.post(url, json={"circuit": circuit_text, "shots": shots}, timeout=10)
        except requests.RequestException as exc:
            raise RemoteJobError(f"job submission failed: {exc}") from exc
        if resp.status_code != 200:
            raise RemoteJobError(f"job submission rejected: HTTP {resp.status_code} {resp.text}")
        return resp.json()["id"]

    def poll(self, job_id: str) -> Job:
        url = f"{self.descriptor.endpoint.rstrip('/')}/jobs/{job_id}"
        try:
            resp = self._session.get(url, timeout=10)
        except requests.RequestException as exc:
            raise RemoteJobError(f"poll failed: {exc}", job_id) from exc
        if resp.status_code == 404:
            raise JobNotFoundError(f"unknown job id {job_id!r}", job_id)
        if resp.status_code != 200:
            raise RemoteJobError(f"poll rejected: HTTP {resp.status_code} {resp.text}", job_id)
        payload = resp.json()
        result = None
        if payload.get("counts") is not None:
            result = Counts(dict(payload["counts"]), int(payload["shots"]))
        return Job(
            id=payload["id"],
            status=payload["status"],
            result=result,
            error=payload.get("error", ""),
        )

    def wait(self, job_id: str) -> Counts:
        deadline = time.monotonic() + self.descriptor.poll_timeout
        while True:
            job = self.poll(job_id)
            if job.status == "done":
                assert job.result is not None
                return job.result
            if job.status == "failed":
                raise RemoteJobError(f"job {job_id} failed: {job.error}", job_id)
            if time.monotonic() > deadline:
                raise RemoteJobError(
                    f"job {job_id} timed out after {self.descriptor.poll_timeout}s", job_id
                )
            time.sleep(self.descriptor.poll_interval)

    def expectation(self, circuit: BoundCircuit) -> float:
        compiled = lower(circuit, self.descriptor.coupling)
        job_id = self.submit(serialize_circuit(compiled), self.descriptor.shots)
        return sim.estimate_expectation(self.wait(job_id), self.observable)


Backend = ExactBackend | EmulatedBackend | RemoteBackend


def make_backend(descriptor: BackendDescriptor, observable: PauliZString, seed: int = 0) -> Backend:
    if descriptor.kind == "exact":
        return ExactBackend(observable)
    if descriptor.kind == "emulated":
        return EmulatedBackend(
            observable,
            shots=descriptor.shots,
            noise=descriptor.noise,
            coupling=descriptor.coupling,
            seed=seed,
        )
    return RemoteBackend(observable, descriptor)


def execute(
    circuit: BoundCircuit,
    descriptor: BackendDescriptor,
    observable: PauliZString,
    seed: int = 0,
) -> float:
    """One-shot convenience wrapper around a freshly constructed backend."""
    return make_backend(descriptor, observable, seed).expectation(circuit)


def poll(job_id: str, descriptor: BackendDescriptor) -> Job:
    """Query a previously submitted remote job."""
    observable = PauliZString(frozenset())
    return RemoteBackend(observable, descriptor).poll(job_id)
