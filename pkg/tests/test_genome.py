"""Genome decoding and parameter binding."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from vqrl.genome import (
    ALT5_GENOME,
    SEARCHED_GENOME,
    ComponentKind,
    Genome,
    bind_parameters,
    decode_genome,
    random_genome,
)

V, E, T = ComponentKind.VAR, ComponentKind.ENC, ComponentKind.ENT


def test_decode_searched_genome():
    ir = decode_genome(Genome.from_text("3-1-1-2-1-1-3-1-3-2-1-2-0"), n_qubits=4)
    assert [c.kind for c in ir.components] == [T, V, V, E, V, V, T, V, T, E, V, E]
    assert ir.n_phi == 72  # 6 rotation blocks x 3 rotations x 4 qubits
    assert ir.n_lambda == 12  # 3 encoding blocks x 4 qubits


def test_decode_stops_at_first_terminator():
    ir = decode_genome(Genome((0, 1, 1)), n_qubits=4)
    assert ir.components == ()
    assert ir.n_phi == 0 and ir.n_lambda == 0


def test_decode_without_terminator_appends_measurement():
    ir = decode_genome(Genome((1, 2, 3)), n_qubits=2)
    assert [c.kind for c in ir.components] == [V, E, T]
    assert ir.n_phi == 6 and ir.n_lambda == 2


def test_decode_rejects_single_qubit():
    with pytest.raises(ValueError, match="n_qubits"):
        decode_genome(Genome((1, 0)), n_qubits=1)


def test_genome_validation():
    with pytest.raises(ValueError):
        Genome(())
    with pytest.raises(ValueError):
        Genome((1, 4))
    with pytest.raises(ValueError):
        Genome.from_text("1-x-0")


def test_genome_text_round_trip():
    assert Genome.from_text(SEARCHED_GENOME.to_text()) == SEARCHED_GENOME
    assert SEARCHED_GENOME.ent_count() == 3
    assert ALT5_GENOME.active_genes() == (1, 3, 2) * 5


def test_bind_encoding_of_zero_state():
    ir = decode_genome(Genome((2, 0)), n_qubits=4)
    circuit = bind_parameters(ir, np.zeros(0), np.ones(4), np.zeros(4))
    assert [g.name for g in circuit.gates] == ["rx"] * 4
    assert all(g.angle == 0.0 for g in circuit.gates)


def test_bind_entangler_is_circular():
    ir = decode_genome(Genome((3, 0)), n_qubits=4)
    circuit = bind_parameters(ir, np.zeros(0), np.zeros(0), np.zeros(4))
    assert [(g.name, g.qubits) for g in circuit.gates] == [
        ("cz", (0, 1)), ("cz", (1, 2)), ("cz", (2, 3)), ("cz", (3, 0)),
    ]


def test_bind_rotation_layout():
    ir = decode_genome(Genome((1, 0)), n_qubits=2)
    phi = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    circuit = bind_parameters(ir, phi, np.zeros(0), np.zeros(2))
    assert [(g.name, g.qubits[0], g.angle) for g in circuit.gates] == [
        ("rx", 0, 0.1), ("ry", 0, 0.2), ("rz", 0, 0.3),
        ("rx", 1, 0.4), ("ry", 1, 0.5), ("rz", 1, 0.6),
    ]


def test_bind_arctan_squash():
    ir = decode_genome(Genome((2, 0)), n_qubits=2)
    lam = np.array([2.0, -1.5])
    state = np.array([10.0, -3.0])
    circuit = bind_parameters(ir, np.zeros(0), lam, state, squash="arctan")
    assert circuit.gates[0].angle == pytest.approx(2.0 * np.arctan(10.0))
    assert circuit.gates[1].angle == pytest.approx(-1.5 * np.arctan(-3.0))
    with pytest.raises(ValueError, match="squash"):
        bind_parameters(ir, np.zeros(0), lam, state, squash="tanh")


@pytest.mark.parametrize(
    "name, phi_n, lam_n, state_n",
    [("phi", 5, 12, 4), ("lambda", 72, 3, 4), ("state", 72, 12, 3)],
)
def test_bind_dimension_mismatch_names_vector(name, phi_n, lam_n, state_n):
    ir = decode_genome(SEARCHED_GENOME, n_qubits=4)
    with pytest.raises(ValueError, match=name):
        bind_parameters(ir, np.zeros(phi_n), np.zeros(lam_n), np.zeros(state_n))


def _brute_force_gate_count(genes, n):
    """Independent oracle: count emitted gates per block from first principles."""
    total = 0
    for g in genes:
        if g == 0:
            break
        total += {1: 3 * n, 2: n, 3: n}[g]
    return total


def test_gate_count_closed_form_all_short_genomes():
    # Exhaustive over genomes of length <= 4 and n in {2, 3, 4}: emitted gate
    # count is 3n * #VAR + n * #ENC + n * #ENT.
    from itertools import product

    for n in (2, 3, 4):
        for length in (1, 2, 3, 4):
            for genes in product((0, 1, 2, 3), repeat=length):
                ir = decode_genome(Genome(genes), n)
                circuit = bind_parameters(
                    ir, np.zeros(ir.n_phi), np.zeros(ir.n_lambda), np.zeros(n)
                )
                assert len(circuit.gates) == _brute_force_gate_count(genes, n)


def test_slot_ranges_partition_parameter_space():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        genome = random_genome(rng, length=int(rng.integers(1, 24)))
        n = int(rng.integers(2, 6))
        ir = decode_genome(genome, n)
        phi_slots, lam_slots = [], []
        for comp in ir.components:
            target = phi_slots if comp.kind is ComponentKind.VAR else lam_slots
            if comp.kind is not ComponentKind.ENT:
                target.extend(range(comp.slot_start, comp.slot_stop))
        assert phi_slots == list(range(ir.n_phi))
        assert lam_slots == list(range(ir.n_lambda))


@given(st.lists(st.integers(0, 3), min_size=1, max_size=20))
def test_decode_deterministic_and_pure(genes):
    genome = Genome(tuple(genes))
    assert decode_genome(genome, 3) == decode_genome(genome, 3)


def test_bind_deterministic():
    ir = decode_genome(SEARCHED_GENOME, 4)
    rng = np.random.default_rng(3)
    phi = rng.uniform(-np.pi, np.pi, ir.n_phi)
    lam = rng.uniform(-1, 1, ir.n_lambda)
    state = rng.uniform(-1, 1, 4)
    assert bind_parameters(ir, phi, lam, state) == bind_parameters(ir, phi, lam, state)
