"""Gene-encoded circuit architectures.

A circuit architecture is a fixed-length string over the alphabet
{0, 1, 2, 3}: 1 is a trainable single-qubit rotation block, 2 an
input-encoding block, 3 a circular controlled-Z entangling block, and 0
terminates the circuit with the final measurement.  Decoding turns a gene
string into an intermediate representation with a contiguous trainable
parameter layout; binding resolves concrete gate angles for one input state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

GENE_ALPHABET = (0, 1, 2, 3)
DEFAULT_GENOME_LENGTH = 16

# Every rotation block applies RX, RY, RZ (in that order) to each qubit.
ROTATIONS_PER_QUBIT = 3

SQUASH_MODES = (None, "arctan")


class Gene(IntEnum):
    """Integer gene values and the circuit block each one selects."""

    MEASURE = 0
    VAR = 1
    ENC = 2
    ENT = 3


class ComponentKind(Enum):
    VAR = "var"
    ENC = "enc"
    ENT = "ent"


_GENE_TO_KIND = {Gene.VAR: ComponentKind.VAR, Gene.ENC: ComponentKind.ENC, Gene.ENT: ComponentKind.ENT}


@dataclass(frozen=True)
class Genome:
    """Fixed-length gene vector; decoding stops at the first 0 gene."""

    genes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.genes) < 1:
            raise ValueError("genome must contain at least one gene")
        bad = [g for g in self.genes if g not in GENE_ALPHABET]
        if bad:
            raise ValueError(f"genes must be in {GENE_ALPHABET}, got {bad[0]!r}")

    @classmethod
    def from_text(cls, text: str) -> "Genome":
        """Parse the dash-separated text form, e.g. ``3-1-1-2-0``."""
        try:
            genes = tuple(int(tok) for tok in text.strip().split("-"))
        except ValueError as exc:
            raise ValueError(f"malformed genome text {text!r}") from exc
        return cls(genes)

    def to_text(self) -> str:
        return "-".join(str(g) for g in self.genes)

    def active_genes(self) -> tuple[int, ...]:
        """Genes up to (exclusive of) the first terminator."""
        out = []
        for g in self.genes:
            if g == Gene.MEASURE:
                break
            out.append(g)
        return tuple(out)

    def ent_count(self) -> int:
        """Number of entangling blocks before the terminator."""
        return sum(1 for g in self.active_genes() if g == Gene.ENT)

    def __len__(self) -> int:
        return len(self.genes)


def random_genome(rng: np.random.Generator, length: int = DEFAULT_GENOME_LENGTH) -> Genome:
    return Genome(tuple(int(g) for g in rng.integers(0, 4, size=length)))


@dataclass(frozen=True)
class CircuitComponent:
    """One architecture block with its slot range into phi (VAR) or lambda (ENC)."""

    kind: ComponentKind
    slot_start: int = 0
    slot_stop: int = 0

    @property
    def n_slots(self) -> int:
        return self.slot_stop - self.slot_start


@dataclass(frozen=True)
class CircuitIR:
    """Decoded architecture: ordered components plus the parameter layout."""

    n_qubits: int
    components: tuple[CircuitComponent, ...]
    n_phi: int
    n_lambda: int


@dataclass(frozen=True, slots=True)
class GateOp:
    """A concrete gate. ``slot`` records which trainable parameter set the angle."""

    name: str
    qubits: tuple[int, ...]
    angle: float | None = None
    slot: tuple[str, int] | None = None


@dataclass(frozen=True)
class BoundCircuit:
    n_qubits: int
    gates: tuple[GateOp, ...]


def decode_genome(genome: Genome, n_qubits: int) -> CircuitIR:
    """Decode a genome into a circuit IR for ``n_qubits`` qubits.

    Components follow gene order up to the first terminator; a genome with no
    terminator is treated as if one were appended.  Slot ranges are contiguous,
    disjoint and in component order.
    """
    if n_qubits < 2:
        raise ValueError(f"n_qubits must be >= 2 for circular entanglement, got {n_qubits}")
    components = []
    phi_cursor = 0
    lam_cursor = 0
    for gene in genome.active_genes():
        kind = _GENE_TO_KIND[Gene(gene)]
        if kind is ComponentKind.VAR:
            width = ROTATIONS_PER_QUBIT * n_qubits
            components.append(CircuitComponent(kind, phi_cursor, phi_cursor + width))
            phi_cursor += width
        elif kind is ComponentKind.ENC:
            components.append(CircuitComponent(kind, lam_cursor, lam_cursor + n_qubits))
            lam_cursor += n_qubits
        else:
            components.append(CircuitComponent(kind))
    return CircuitIR(n_qubits, tuple(components), phi_cursor, lam_cursor)


def _check_length(name: str, vec: np.ndarray, expected: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != expected:
        raise ValueError(f"{name} must be a vector of length {expected}, got shape {vec.shape}")
    return vec


def encoding_inputs(state: np.ndarray, squash: str | None = None) -> np.ndarray:
    """Per-qubit encoding inputs: the raw state, or arctan-squashed values."""
    if squash not in SQUASH_MODES:
        raise ValueError(f"unknown squash mode {squash!r}; expected one of {SQUASH_MODES}")
    state = np.asarray(state, dtype=float)
    return np.arctan(state) if squash == "arctan" else state


def bind_parameters(
    ir: CircuitIR,
    phi: np.ndarray,
    lam: np.ndarray,
    state: np.ndarray,
    squash: str | None = None,
) -> BoundCircuit:
    """Resolve concrete gates for one input state.

    A VAR block emits RX, RY, RZ per qubit from its phi slots; an ENC block
    emits RX(lambda_q * s_q) per qubit (with an optional arctan squash of
    s_q); an ENT block emits CZ on the circular pairs (i, (i+1) mod n).
    """
    n = ir.n_qubits
    phi = _check_length("phi", phi, ir.n_phi)
    lam = _check_length("lambda", lam, ir.n_lambda)
    state = _check_length("state", state, n)
    inputs = encoding_inputs(state, squash)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(inputs))):
        raise ValueError("parameters and state must be finite")

    gates: list[GateOp] = []
    for comp in ir.components:
        if comp.kind is ComponentKind.VAR:
            base = comp.slot_start
            for q in range(n):
                for r, name in enumerate(("rx", "ry", "rz")):
                    k = base + ROTATIONS_PER_QUBIT * q + r
                    gates.append(GateOp(name, (q,), float(phi[k]), ("phi", k)))
        elif comp.kind is ComponentKind.ENC:
            base = comp.slot_start
            for q in range(n):
                k = base + q
                gates.append(GateOp("rx", (q,), float(lam[k] * inputs[q]), ("lam", k)))
        else:
            for q in range(n):
                gates.append(GateOp("cz", (q, (q + 1) % n)))
    return BoundCircuit(n, tuple(gates))


# Benchmark architectures. SEARCHED_GENOME is the compact multi-objective
# search winner used as the default policy circuit throughout; ALT5_GENOME is
# the five-fold alternating rotation/entangle/encode layout; EQAS_GENOME is a
# heavier reference architecture from single-objective evolutionary search,
# included as a comparison baseline in the compile-stats table.
SEARCHED_GENOME = Genome.from_text("3-1-1-2-1-1-3-1-3-2-1-2-0")
ALT5_GENOME = Genome.from_text("1-3-2-1-3-2-1-3-2-1-3-2-1-3-2-0")
EQAS_GENOME = Genome.from_text("1-2-3-1-1-2-3-1-2-1-3-1-2-1-3-0")
