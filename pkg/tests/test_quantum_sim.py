import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import embed, pauli_dense
from pptnqfe.encoder import FeatureEncoding, encode_1d, encode_state
from pptnqfe.mps import MPS, contract_dense
from pptnqfe.quantum_sim import (
    SU4_PAULIS,
    Circuit,
    Gate,
    NormError,
    Observable,
    RankError,
    apply,
    apply_pauli,
    cnot,
    compile_mps_to_circuit,
    complete_unitary,
    expectation,
    fidelity,
    h,
    hadamard_test,
    inner_product,
    mps_state,
    ry,
    rz,
    sample_hadamard_test,
    state_preparation,
    su4_gate,
    unitary_gate,
    x,
    zero_state,
)


def random_unitary(rng, dim):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(rng, n, n_gates):
    gates = []
    for _ in range(n_gates):
        if n > 1 and rng.random() < 0.5:
            w = rng.choice(n, 2, replace=False)
            gates.append(unitary_gate(random_unitary(rng, 4), w))
        else:
            gates.append(unitary_gate(random_unitary(rng, 2), [int(rng.integers(n))]))
    return Circuit(n, tuple(gates))


def test_hadamard_on_zero():
    np.testing.assert_allclose(apply(Circuit(1, (h(0),))), [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)


def test_gate_rejects_non_unitary_and_bad_shapes():
    with pytest.raises(ValueError):
        Gate("bad", (0,), np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        Gate("bad", (0, 1), np.eye(2))
    with pytest.raises(ValueError):
        Gate("bad", (1, 1), np.eye(4))
    with pytest.raises(ValueError):
        Circuit(2, (x(2),))


def test_gate_kinds_and_dagger():
    assert h(0).kind == "one_qubit"
    assert cnot(0, 1).kind == "two_qubit"
    assert h(1).controlled(0).kind == "controlled"
    g = ry(0.3, 0)
    assert g.dagger().name == "RY^dag" and g.dagger().dagger().name == "RY"
    np.testing.assert_allclose(g.dagger().matrix @ g.matrix, np.eye(2), atol=1e-15)
    with pytest.raises(ValueError):
        cnot(0, 1).controlled(1)


def test_apply_matches_dense_embedding():
    rng = np.random.default_rng(0)
    n = 4
    circ = random_circuit(rng, n, 30)
    full = np.eye(2**n, dtype=complex)
    for g in circ:
        full = embed(g.matrix, g.wires, n) @ full
    psi = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    np.testing.assert_allclose(apply(circ, psi), full @ psi, atol=1e-12)


def test_wire_order_is_big_endian():
    np.testing.assert_array_equal(apply(Circuit(3, (x(0),))).real, np.eye(8)[4])
    np.testing.assert_array_equal(apply(Circuit(3, (x(0), cnot(0, 2)))).real, np.eye(8)[5])


@pytest.mark.parametrize("n", [1, 3, 6])
def test_norm_preserved_over_100_gates(n):
    rng = np.random.default_rng(n)
    psi = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    psi /= np.linalg.norm(psi)
    out = apply(random_circuit(rng, n, 100), psi)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)


def test_apply_does_not_mutate_input():
    psi = zero_state(2)
    apply(Circuit(2, (h(0),)), psi)
    np.testing.assert_array_equal(psi, zero_state(2))
    with pytest.raises(ValueError):
        apply(Circuit(2), np.ones(3))


def test_inner_product_convention():
    a = np.array([1j, 0])
    b = np.array([1, 0])
    assert inner_product(a, b) == pytest.approx(-1j)
    with pytest.raises(ValueError):
        inner_product(a, np.ones(4))


def test_rotation_matrices():
    np.testing.assert_allclose(apply(Circuit(1, (ry(np.pi, 0),))), [0, 1], atol=1e-15)
    np.testing.assert_allclose(rz(0.4, 0).matrix, np.diag(np.exp([-0.2j, 0.2j])), atol=1e-15)


def test_su4_examples():
    np.testing.assert_allclose(su4_gate(np.zeros(15)).matrix, np.eye(4), atol=1e-15)
    theta = np.zeros(15)
    theta[SU4_PAULIS.index("ZZ")] = 0.7
    phases = np.exp(1j * 0.7 * np.array([1, -1, -1, 1]))
    np.testing.assert_allclose(su4_gate(theta).matrix, np.diag(phases), atol=1e-14)
    assert len(SU4_PAULIS) == 15 and SU4_PAULIS[0] == "IX" and SU4_PAULIS[-1] == "ZZ"


@given(st.lists(st.floats(-10, 10), min_size=15, max_size=15))
def test_su4_is_unitary(theta):
    u = su4_gate(theta).matrix
    assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-12


@pytest.mark.parametrize("n", range(1, 6))
def test_pauli_expectations_match_dense(n):
    rng = np.random.default_rng(n)
    psi = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    psi /= np.linalg.norm(psi)
    for _ in range(20):
        label = "".join(rng.choice(list("IXYZ"), n))
        np.testing.assert_allclose(apply_pauli(psi, label), pauli_dense(label) @ psi, atol=1e-14)
        dense = np.vdot(psi, pauli_dense(label) @ psi).real
        assert expectation(psi, Observable.pauli(label)) == pytest.approx(dense, abs=1e-12)


def test_observable_matrix_and_parameters():
    obs = Observable(2, ("IZ", "XX"), np.array([0.5, -1.0]), diagonal=np.arange(4.0))
    dense = 0.5 * pauli_dense("IZ") - pauli_dense("XX") + np.diag(np.arange(4.0))
    np.testing.assert_allclose(obs.matrix(), dense, atol=1e-15)
    psi = np.array([0.1, 0.2j, 0.3, 0.4])
    np.testing.assert_allclose(obs.apply(psi), dense @ psi, atol=1e-15)
    z = Observable.z_sum(3)
    assert z.n_params == 4
    np.testing.assert_allclose(z.matrix([1, 0, 0, 2]), np.eye(8) + 2 * pauli_dense("IIZ"), atol=1e-15)
    proj = Observable.projectors(2)
    assert proj.n_params == 4
    np.testing.assert_allclose(proj.term_expectations(psi), np.abs(psi) ** 2)
    with pytest.raises(ValueError):
        z.matrix([1, 2])
    with pytest.raises(ValueError):
        Observable(2, ("Z",))
    with pytest.raises(ValueError):
        Observable(1, dense=np.array([[0, 1], [0, 0]]))


def test_feature_state_expectations():
    enc = FeatureEncoding.closed(3)
    state, _ = encode_state(enc, -1.0)
    assert expectation(state, Observable.single("Z", 0, 3)) == pytest.approx(1.0)
    x_mid = 0.5 * (enc.grid.node(2) + enc.grid.node(3))
    state, _ = encode_state(enc, x_mid)
    a, b = state[2].real, state[3].real
    assert expectation(state, Observable.single("X", 2, 3)) == pytest.approx(2 * a * b, abs=1e-14)
    assert 2 * a * b == pytest.approx(1.0, abs=1e-14)


def test_complete_unitary_deterministic():
    col = np.array([[1.0], [1.0]]) / np.sqrt(2)
    u = complete_unitary(col)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-15)
    np.testing.assert_array_equal(u, complete_unitary(col))


def test_compile_one_hot():
    mps = MPS(tuple(np.array([[[1 - b], [b]]], dtype=float) for b in (1, 0, 1)))
    circ = compile_mps_to_circuit(mps)
    np.testing.assert_allclose(np.abs(apply(circ)), np.eye(8)[5], atol=1e-14)


def test_compile_encoder_example():
    mps = encode_1d(FeatureEncoding.closed(2), 0.0)
    out = apply(compile_mps_to_circuit(mps))
    assert fidelity(out, np.array([0, 1, 1, 0]) / np.sqrt(2)) >= 1 - 1e-10


@pytest.mark.parametrize("n", range(1, 8))
def test_compile_staircase_shape_and_fidelity(n):
    rng = np.random.default_rng(n)
    for enc in (FeatureEncoding.closed(n), FeatureEncoding.interior(n)):
        for x in rng.uniform(-0.999, 0.999, 500 // 7 + 1):
            mps = encode_1d(enc, x)
            mps = mps.scaled(1 / mps.norm())
            circ = compile_mps_to_circuit(mps)
            assert circ.count("one_qubit") == 1 and circ.count("two_qubit") == n - 1
            assert [g.wires for g in circ] == [(j, j + 1) for j in range(n - 1)] + [(n - 1,)]
            assert fidelity(apply(circ), mps_state(mps)) >= 1 - 1e-10


def test_compile_random_rank_two_complex():
    rng = np.random.default_rng(9)
    for n in (2, 4, 6):
        ranks = [1] + [2] * (n - 1) + [1]
        cores = [rng.standard_normal((ranks[j], 2, ranks[j + 1])) * (1 + 0.5j) for j in range(n)]
        mps = MPS(tuple(cores))
        mps = mps.scaled(1 / mps.norm())
        assert np.abs(apply(compile_mps_to_circuit(mps)) - contract_dense(mps)).max() < 1e-12


def test_compile_errors():
    with pytest.raises(RankError):
        compile_mps_to_circuit(MPS((np.ones((1, 2, 3)) / 6**0.5, np.ones((3, 2, 1)))))
    with pytest.raises(NormError):
        compile_mps_to_circuit(MPS((np.ones((1, 2, 1)),)))


def test_state_preparation():
    rng = np.random.default_rng(1)
    for n in (1, 3, 5):
        v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
        v /= np.linalg.norm(v)
        circ = state_preparation(v)
        assert circ.gates[0].kind in ("one_qubit", "two_qubit", "multi_qubit")
        np.testing.assert_allclose(apply(circ), v, atol=1e-13)
    np.testing.assert_allclose(apply(state_preparation(np.eye(4)[0])), np.eye(4)[0], atol=1e-15)
    with pytest.raises(NormError):
        state_preparation(np.ones(4))


def test_hadamard_test_examples():
    rng = np.random.default_rng(0)
    c = random_circuit(rng, 3, 10)
    assert hadamard_test(c, c) == pytest.approx(1.0, abs=1e-12)
    assert hadamard_test(Circuit(2), Circuit(2, (x(0), x(1)))) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        hadamard_test(Circuit(2), Circuit(3))


def test_hadamard_test_matches_inner_product():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        a, b = random_circuit(rng, n, 6), random_circuit(rng, n, 6)
        direct = inner_product(apply(a), apply(b)).real
        worst = max(worst, abs(hadamard_test(a, b) - direct))
    assert worst <= 1e-10


def test_sampled_hadamard_test_concentrates():
    a, b = Circuit(1, (ry(0.4, 0),)), Circuit(1, (ry(1.3, 0),))
    exact = hadamard_test(a, b)
    est = sample_hadamard_test(a, b, 200_000, np.random.default_rng(0))
    assert abs(est - exact) < 0.01


def test_circuit_dump_format():
    text = Circuit(2, (h(0), cnot(0, 1))).dumps()
    lines = text.splitlines()
    assert lines[0] == "CIRCUIT 2 2"
    assert lines[1].startswith("H | 0 | - | ")
    assert lines[2].startswith("CNOT | 0,1 | - | 1,0 0,0")
    assert len(lines[2].split(" | ")[3].split()) == 16
