"""Dense statevector simulation.

Supports the bound-circuit gate set (RX, RY, RZ, CZ) plus the lowered basis
(H, CNOT), Pauli-Z-string expectations, shot sampling, trajectory-sampled
depolarizing noise, and parameter-shift gradients.  The gate kernel is a
single numba-compiled routine operating on a batch of statevectors, which is
what makes the shift-rule gradient (two evaluations per trainable angle)
cheap enough to sit inside an RL training loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .genome import BoundCircuit, CircuitIR, GateOp, bind_parameters, encoding_inputs

MAX_QUBITS = 24

# Gate kind codes shared with the compiled kernel. X/Y/Z appear only as
# sampled noise insertions.
_RX, _RY, _RZ, _H, _CZ, _CX, _X, _Y, _Z = range(9)
_CODES = {"rx": _RX, "ry": _RY, "rz": _RZ, "h": _H, "cz": _CZ, "cx": _CX, "x": _X, "y": _Y, "z": _Z}
_TWO_QUBIT = frozenset({"cz", "cx"})


@dataclass(frozen=True)
class PauliZString:
    """Tensor product of Pauli-Z on the given qubits; eigenvalues are +/-1."""

    qubits: frozenset[int]

    def __post_init__(self) -> None:
        if any(q < 0 for q in self.qubits):
            raise ValueError("qubit indices must be non-negative")

    @classmethod
    def all_qubits(cls, n_qubits: int) -> "PauliZString":
        return cls(frozenset(range(n_qubits)))


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing probabilities per single-qubit (p1) and two-qubit (p2) gate."""

    p1: float
    p2: float

    def __post_init__(self) -> None:
        for name, p in (("p1", self.p1), ("p2", self.p2)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


@dataclass(frozen=True)
class Counts:
    """Measurement outcome histogram over n-bit strings (qubit 0 leftmost)."""

    counts: dict[str, int]
    shots: int

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to shots")


@njit(cache=True)
def _run_program(states, n_qubits, kinds, q0s, q1s, angles, shift_rows, shift):
    """Apply a gate program to a batch of statevectors in place.

    ``shift_rows[g] = j >= 0`` marks gate g as the j-th shifted parameter:
    batch rows 2j+1 and 2j+2 see its angle offset by +shift / -shift, which
    realizes all parameter-shift evaluations in one pass.
    """
    n_rows, dim = states.shape
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for g in range(kinds.shape[0]):
        kind = kinds[g]
        m0 = 1 << (n_qubits - 1 - q0s[g])
        if kind <= _RZ:
            tag = shift_rows[g]
            for r in range(n_rows):
                a = angles[g]
                if tag >= 0:
                    if r == 2 * tag + 1:
                        a += shift
                    elif r == 2 * tag + 2:
                        a -= shift
                c = math.cos(0.5 * a)
                s = math.sin(0.5 * a)
                for i in range(dim):
                    if not i & m0:
                        j = i | m0
                        x = states[r, i]
                        y = states[r, j]
                        if kind == _RX:
                            states[r, i] = c * x - 1j * s * y
                            states[r, j] = c * y - 1j * s * x
                        elif kind == _RY:
                            states[r, i] = c * x - s * y
                            states[r, j] = s * x + c * y
                        else:
                            states[r, i] = (c - 1j * s) * x
                            states[r, j] = (c + 1j * s) * y
        elif kind == _H:
            for r in range(n_rows):
                for i in range(dim):
                    if not i & m0:
                        j = i | m0
                        x = states[r, i]
                        y = states[r, j]
                        states[r, i] = (x + y) * inv_sqrt2
                        states[r, j] = (x - y) * inv_sqrt2
        elif kind == _CZ:
            mm = m0 | (1 << (n_qubits - 1 - q1s[g]))
            for r in range(n_rows):
                for i in range(dim):
                    if i & mm == mm:
                        states[r, i] = -states[r, i]
        elif kind == _CX:
            m1 = 1 << (n_qubits - 1 - q1s[g])
            for r in range(n_rows):
                for i in range(dim):
                    if (i & m0) and not (i & m1):
                        j = i | m1
                        tmp = states[r, i]
                        states[r, i] = states[r, j]
                        states[r, j] = tmp
        elif kind == _X:
            for r in range(n_rows):
                for i in range(dim):
                    if not i & m0:
                        j = i | m0
                        tmp = states[r, i]
                        states[r, i] = states[r, j]
                        states[r, j] = tmp
        elif kind == _Y:
            for r in range(n_rows):
                for i in range(dim):
                    if not i & m0:
                        j = i | m0
                        x = states[r, i]
                        y = states[r, j]
                        states[r, i] = -1j * y
                        states[r, j] = 1j * x
        else:
            for r in range(n_rows):
                for i in range(dim):
                    if i & m0:
                        states[r, i] = -states[r, i]


def _program_arrays(gates: tuple[GateOp, ...] | list[GateOp]):
    n_gates = len(gates)
    kinds = np.empty(n_gates, dtype=np.int64)
    q0s = np.zeros(n_gates, dtype=np.int64)
    q1s = np.zeros(n_gates, dtype=np.int64)
    angles = np.zeros(n_gates, dtype=np.float64)
    for i, g in enumerate(gates):
        kinds[i] = _CODES[g.name]
        q0s[i] = g.qubits[0]
        if g.name in _TWO_QUBIT:
            q1s[i] = g.qubits[1]
        if g.angle is not None:
            angles[i] = g.angle
    return kinds, q0s, q1s, angles


def _check_circuit(circuit) -> int:
    n = circuit.n_qubits
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n}")
    return n


def _fresh_states(n_rows: int, n_qubits: int) -> np.ndarray:
    states = np.zeros((n_rows, 1 << n_qubits), dtype=np.complex128)
    states[:, 0] = 1.0
    return states


def _sample_noise_insertions(gates, noise: NoiseModel, rng: np.random.Generator) -> list[GateOp]:
    """Splice a random Pauli after each gate, per involved qubit, per the model.

    The insertions do not depend on the quantum state, so one trajectory is
    fully determined before simulation.
    """
    paulis = ("x", "y", "z")
    out: list[GateOp] = []
    for g in gates:
        out.append(g)
        p = noise.p2 if g.name in _TWO_QUBIT else noise.p1
        if p <= 0.0:
            continue
        for q in g.qubits:
            if rng.random() < p:
                out.append(GateOp(paulis[rng.integers(3)], (q,)))
    return out


def simulate(circuit, noise: NoiseModel | None = None, seed: int = 0) -> np.ndarray:
    """Run a circuit from |0...0> and return the final statevector.

    With a noise model, a random Pauli is inserted after each gate with
    probability p1 (p2 per qubit for two-qubit gates); the trajectory is
    deterministic given ``seed``.  Without noise the seed is ignored.
    """
    n = _check_circuit(circuit)
    gates = circuit.gates
    if noise is not None and (noise.p1 > 0.0 or noise.p2 > 0.0):
        gates = _sample_noise_insertions(gates, noise, np.random.default_rng(seed))
    states = _fresh_states(1, n)
    if gates:
        kinds, q0s, q1s, angles = _program_arrays(gates)
        _run_program(states, n, kinds, q0s, q1s, angles, np.full(len(gates), -1, dtype=np.int64), 0.0)
    state = states[0]
    norm = np.linalg.norm(state)
    assert abs(norm - 1.0) < 1e-10, "statevector norm drifted"
    return state


@lru_cache(maxsize=256)
def _parity_signs(n_qubits: int, qubits: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    signs = np.ones(1 << n_qubits)
    for q in qubits:
        signs[((idx >> (n_qubits - 1 - q)) & 1) == 1] *= -1.0
    signs.setflags(write=False)
    return signs


def _signs_for(state_dim_qubits: int, obs: PauliZString) -> np.ndarray:
    if any(q >= state_dim_qubits for q in obs.qubits):
        raise ValueError(f"observable qubits {sorted(obs.qubits)} exceed n_qubits={state_dim_qubits}")
    return _parity_signs(state_dim_qubits, tuple(sorted(obs.qubits)))


def n_qubits_of(state: np.ndarray) -> int:
    n = int(round(math.log2(state.shape[-1])))
    if 1 << n != state.shape[-1]:
        raise ValueError(f"state length {state.shape[-1]} is not a power of two")
    return n


def expectation(state: np.ndarray, obs: PauliZString) -> float:
    """Exact <Z-string> of a statevector; always in [-1, 1]."""
    signs = _signs_for(n_qubits_of(state), obs)
    value = float(np.abs(state) ** 2 @ signs)
    return min(1.0, max(-1.0, value))


def sample_counts(state: np.ndarray, shots: int, seed: int = 0) -> Counts:
    """Draw ``shots`` independent bitstrings from |amplitude|^2."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    n = n_qubits_of(state)
    probs = np.abs(state) ** 2
    probs = probs / probs.sum()
    draws = np.random.default_rng(seed).multinomial(shots, probs)
    counts = {format(b, f"0{n}b"): int(c) for b, c in enumerate(draws) if c > 0}
    return Counts(counts, shots)


def estimate_expectation(counts: Counts, obs: PauliZString) -> float:
    """Shot-frequency estimate of <Z-string> from a counts histogram."""
    if not counts.counts:
        raise ValueError("counts is empty")
    total = 0.0
    for bits, c in counts.counts.items():
        parity = sum(1 for q in obs.qubits if bits[q] == "1") & 1
        total += -c if parity else c
    return total / counts.shots


def expectation_and_gradient(
    ir: CircuitIR,
    phi: np.ndarray,
    lam: np.ndarray,
    state: np.ndarray,
    obs: PauliZString,
    squash: str | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact <O> plus its gradient w.r.t. phi and lambda via the shift rule.

    Every trainable angle theta gets the exact rotation-gate derivative
    (<O>(theta + pi/2) - <O>(theta - pi/2)) / 2; lambda slots additionally
    pick up the chain factor of the encoded input.  All 2K+1 evaluations run
    as one batched simulation.
    """
    circuit = bind_parameters(ir, phi, lam, state, squash=squash)
    n = circuit.n_qubits
    tagged = [(i, g.slot) for i, g in enumerate(circuit.gates) if g.slot is not None]
    shift_rows = np.full(len(circuit.gates), -1, dtype=np.int64)
    for j, (gate_idx, _) in enumerate(tagged):
        shift_rows[gate_idx] = j
    states = _fresh_states(1 + 2 * len(tagged), n)
    if circuit.gates:
        kinds, q0s, q1s, angles = _program_arrays(circuit.gates)
        _run_program(states, n, kinds, q0s, q1s, angles, shift_rows, math.pi / 2)
    signs = _signs_for(n, obs)
    values = np.abs(states) ** 2 @ signs
    dphi = np.zeros(ir.n_phi)
    dlam = np.zeros(ir.n_lambda)
    inputs = encoding_inputs(np.asarray(state, dtype=float), squash)
    for j, (gate_idx, (group, k)) in enumerate(tagged):
        deriv = 0.5 * (values[2 * j + 1] - values[2 * j + 2])
        if group == "phi":
            dphi[k] += deriv
        else:
            dlam[k] += deriv * inputs[circuit.gates[gate_idx].qubits[0]]
    return float(min(1.0, max(-1.0, values[0]))), dphi, dlam


def parameter_shift_gradient(
    ir: CircuitIR,
    phi: np.ndarray,
    lam: np.ndarray,
    state: np.ndarray,
    obs: PauliZString,
    squash: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the exact expectation w.r.t. (phi, lambda)."""
    _, dphi, dlam = expectation_and_gradient(ir, phi, lam, state, obs, squash=squash)
    return dphi, dlam
