"""Loopback mock of the remote job-queue service, for integration tests.

Implements the same contract as the real service (POST /jobs, GET /jobs/{id},
bearer token) and delegates execution to the local noisy emulator path:
parse circuit text, simulate one noise trajectory, sample counts.  Seeds are
derived per job index exactly like the in-process emulated backend, so a
remote round trip with the same master seed reproduces emulated results.
"""
from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import sim
from .backend import derived_seeds, parse_circuit
from .sim import NoiseModel


@dataclass
class _JobRecord:
    circuit_text: str
    shots: int
    counts: dict[str, int] | None
    error: str
    done_at: float


class MockQuantumServer:
    """In-process HTTP job queue; start() binds an ephemeral port."""

    def __init__(
        self,
        noise: NoiseModel | None = None,
        seed: int = 0,
        token: str = "",
        max_latency: float = 0.0,
    ):
        self.noise = noise
        self.seed = seed
        self.token = token
        self.max_latency = max_latency
        self._jobs: dict[str, _JobRecord] = {}
        self._lock = threading.Lock()
        self._job_counter = 0
        self._failures_left = 0
        self._latency_rng = np.random.default_rng(seed)
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> str:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self.endpoint

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def endpoint(self) -> str:
        assert self._server is not None, "server not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "MockQuantumServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def inject_failures(self, count: int = 1) -> None:
        """Make the next ``count`` submitted jobs fail."""
        with self._lock:
            self._failures_left += count

    # -- job handling ------------------------------------------------------

    def _submit(self, circuit_text: str, shots: int) -> str:
        with self._lock:
            index = self._job_counter
            self._job_counter += 1
            fail = self._failures_left > 0
            if fail:
                self._failures_left -= 1
            latency = self._latency_rng.uniform(0.0, self.max_latency) if self.max_latency else 0.0
        job_id = uuid.uuid4().hex
        if fail:
            record = _JobRecord(circuit_text, shots, None, "injected device fault", time.monotonic() + latency)
        else:
            noise_seed, shot_seed = derived_seeds(self.seed, index)
            state = sim.simulate(parse_circuit(circuit_text), noise=self.noise, seed=noise_seed)
            counts = sim.sample_counts(state, shots, seed=shot_seed)
            record = _JobRecord(circuit_text, shots, counts.counts, "", time.monotonic() + latency)
        with self._lock:
            self._jobs[job_id] = record
        return job_id

    def _lookup(self, job_id: str) -> dict | None:
        with self._lock:
            record = self._jobs.get(job_id)
        if record is None:
            return None
        payload: dict = {"id": job_id}
        if time.monotonic() < record.done_at:
            payload["status"] = "running"
        elif record.error:
            payload["status"] = "failed"
            payload["error"] = record.error
        else:
            payload["status"] = "done"
            payload["counts"] = record.counts
            payload["shots"] = record.shots
        return payload


def _make_handler(server: MockQuantumServer):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args) -> None:  # keep tests quiet
            pass

        def _reply(self, code: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _authorized(self) -> bool:
            if not server.token:
                return True
            return self.headers.get("Authorization", "") == f"Bearer {server.token}"

        def do_POST(self) -> None:
            if not self._authorized():
                self._reply(401, {"error": "invalid token"})
                return
            if self.path.rstrip("/") != "/jobs":
                self._reply(404, {"error": "unknown route"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length))
                job_id = server._submit(payload["circuit"], int(payload["shots"]))
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                self._reply(400, {"error": f"bad request: {exc}"})
                return
            self._reply(200, {"id": job_id})

        def do_GET(self) -> None:
            if not self._authorized():
                self._reply(401, {"error": "invalid token"})
                return
            prefix = "/jobs/"
            if not self.path.startswith(prefix):
                self._reply(404, {"error": "unknown route"})
                return
            payload = server._lookup(self.path[len(prefix):])
            if payload is None:
                self._reply(404, {"error": "unknown job id"})
                return
            self._reply(200, payload)

    return Handler
