"""Lowering to a hardware basis on a coupling map, and circuit cost metrics.

Single-qubit rotations pass through unchanged; each CZ on a coupling edge
becomes H(target) CNOT H(target); CZ on a non-edge pair (the wrap-around of
the circular entangler on a linear chain) is dropped outright rather than
routed.  A single peephole pass then removes H pairs that sit back to back
on a qubit's timeline.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .genome import BoundCircuit, GateOp

BASIS_GATES = ("rx", "ry", "rz", "h", "cx")


@dataclass(frozen=True)
class CouplingMap:
    """Undirected qubit connectivity; edges stored as sorted pairs."""

    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        for a, b in self.edges:
            if a >= b or a < 0:
                raise ValueError(f"edges must be sorted pairs of distinct qubits, got {(a, b)}")

    @classmethod
    def linear(cls, n_qubits: int) -> "CouplingMap":
        """Nearest-neighbour chain 0-1-2-...-(n-1)."""
        return cls(frozenset((i, i + 1) for i in range(n_qubits - 1)))

    def has(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges


@dataclass(frozen=True)
class CompiledCircuit:
    n_qubits: int
    gates: tuple[GateOp, ...]


@dataclass(frozen=True)
class CompileStats:
    total_gates: int
    cnot_count: int
    depth: int


def _cancel_h_pairs(gates: list[GateOp]) -> list[GateOp]:
    # Peephole: an H whose previous gate on the same qubit is also an H
    # cancels both (gates on other qubits in between commute past).
    out: list[GateOp | None] = []
    timeline: dict[int, list[int]] = defaultdict(list)
    for gate in gates:
        if gate.name == "h":
            q = gate.qubits[0]
            if timeline[q] and out[timeline[q][-1]].name == "h":
                out[timeline[q].pop()] = None
                continue
        idx = len(out)
        out.append(gate)
        for q in gate.qubits:
            timeline[q].append(idx)
    return [g for g in out if g is not None]


def lower(circuit: BoundCircuit, coupling: CouplingMap | None = None) -> CompiledCircuit:
    """Lower a bound circuit to the {RX, RY, RZ, H, CNOT} basis on ``coupling``.

    Defaults to the linear chain.  Non-edge CZs are removed, not routed.
    """
    if coupling is None:
        coupling = CouplingMap.linear(circuit.n_qubits)
    lowered: list[GateOp] = []
    for gate in circuit.gates:
        if gate.name == "cz":
            a, b = gate.qubits
            if coupling.has(a, b):
                lowered.append(GateOp("h", (b,)))
                lowered.append(GateOp("cx", (a, b)))
                lowered.append(GateOp("h", (b,)))
            continue
        lowered.append(GateOp(gate.name, gate.qubits, gate.angle))
    return CompiledCircuit(circuit.n_qubits, tuple(_cancel_h_pairs(lowered)))


def stats(compiled: CompiledCircuit) -> CompileStats:
    """Gate count, CNOT count, and depth under greedy as-soon-as-possible layering."""
    frontier: dict[int, int] = defaultdict(int)
    cnots = 0
    for gate in compiled.gates:
        if gate.name == "cx":
            cnots += 1
        layer = 1 + max(frontier[q] for q in gate.qubits)
        for q in gate.qubits:
            frontier[q] = layer
    depth = max(frontier.values(), default=0)
    return CompileStats(len(compiled.gates), cnots, depth)
