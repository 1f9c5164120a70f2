"""Dense statevector simulation, MPS-to-circuit compilation and the Hadamard test.

Wire 0 is the most significant qubit: basis state ``|i_0 i_1 ... i_{n-1}>``
has dense index ``sum_j i_j 2**(n-1-j)``. A k-qubit gate matrix acting on
``wires = (w_0, ..., w_{k-1})`` uses the same Big-Endian convention over
its own wires.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .mps import MPS, canonicalize, contract_dense, max_rank

__all__ = [
    "Gate",
    "Circuit",
    "Observable",
    "RankError",
    "NormError",
    "UNITARY_ATOL",
    "PAULI",
    "SU4_PAULIS",
    "h",
    "x",
    "cnot",
    "ry",
    "rz",
    "unitary_gate",
    "su4_gate",
    "state_preparation",
    "zero_state",
    "apply",
    "apply_matrix",
    "apply_pauli",
    "expectation",
    "inner_product",
    "hadamard_test",
    "sample_hadamard_test",
    "compile_mps_to_circuit",
    "complete_unitary",
    "fidelity",
    "mps_state",
    "pauli_matrix",
    "hadamard_test_circuit",
]

UNITARY_ATOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

# generator order for su4_gate: lexicographic over "IXYZ", identity dropped
SU4_PAULIS: tuple[str, ...] = tuple(
    a + b for a, b in itertools.product("IXYZ", repeat=2) if a + b != "II"
)


class RankError(ValueError):
    pass


class NormError(ValueError):
    pass


def pauli_matrix(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


@dataclass(frozen=True, eq=False)
class Gate:
    """Dense unitary acting on ``wires``.

    ``control`` is set on gates produced by :meth:`controlled`; the control
    wire is then ``wires[0]`` and ``matrix`` already contains the
    block-diagonal embedding.
    """

    name: str
    wires: tuple[int, ...]
    matrix: np.ndarray
    params: tuple[float, ...] = ()
    control: int | None = None

    def __post_init__(self) -> None:
        wires = tuple(int(w) for w in self.wires)
        mat = np.array(self.matrix, dtype=np.complex128)
        dim = 1 << len(wires)
        if mat.shape != (dim, dim):
            raise ValueError(f"{self.name}: matrix shape {mat.shape} does not match {len(wires)} wires")
        if len(set(wires)) != len(wires):
            raise ValueError(f"{self.name}: repeated wire in {wires}")
        err = np.abs(mat.conj().T @ mat - np.eye(dim)).max()
        if err > UNITARY_ATOL:
            raise ValueError(f"{self.name}: matrix is not unitary (deviation {err:.2e})")
        mat.setflags(write=False)
        object.__setattr__(self, "wires", wires)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def kind(self) -> str:
        if self.control is not None:
            return "controlled"
        return {1: "one_qubit", 2: "two_qubit"}.get(len(self.wires), "multi_qubit")

    def dagger(self) -> Gate:
        name = self.name[: -len("^dag")] if self.name.endswith("^dag") else self.name + "^dag"
        return Gate(name, self.wires, self.matrix.conj().T, self.params, self.control)

    def shifted(self, offset: int) -> Gate:
        control = None if self.control is None else self.control + offset
        return Gate(self.name, tuple(w + offset for w in self.wires), self.matrix, self.params, control)

    def controlled(self, control: int) -> Gate:
        if control in self.wires:
            raise ValueError(f"control wire {control} overlaps target wires {self.wires}")
        dim = self.matrix.shape[0]
        mat = np.eye(2 * dim, dtype=np.complex128)
        mat[dim:, dim:] = self.matrix
        return Gate("C-" + self.name, (control,) + self.wires, mat, self.params, control)


def h(wire: int) -> Gate:
    return Gate("H", (wire,), np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def x(wire: int) -> Gate:
    return Gate("X", (wire,), PAULI["X"])


def cnot(control: int, target: int) -> Gate:
    mat = np.eye(4)
    mat[2:, 2:] = PAULI["X"].real
    return Gate("CNOT", (control, target), mat)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float, wire: int) -> Gate:
    return Gate("RY", (wire,), ry_matrix(theta), (theta,))


def rz(theta: float, wire: int) -> Gate:
    return Gate("RZ", (wire,), rz_matrix(theta), (theta,))


def unitary_gate(matrix: np.ndarray, wires: Sequence[int], name: str = "U") -> Gate:
    return Gate(name, tuple(wires), matrix)


def su4_generator(theta: Sequence[float]) -> np.ndarray:
    """Hermitian ``sum_a theta_a P_a`` over :data:`SU4_PAULIS`."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (15,):
        raise ValueError(f"su4 gate takes 15 angles, got shape {theta.shape}")
    return np.einsum("a,aij->ij", theta, _SU4_MATS)


_SU4_MATS = np.array([pauli_matrix(p) for p in SU4_PAULIS])


def su4_gate(theta: Sequence[float], wires: Sequence[int] = (0, 1)) -> Gate:
    """``exp(i sum_a theta_a P_a)`` over the 15 non-identity two-qubit Paulis."""
    return Gate("SU4", tuple(wires), expm(1j * su4_generator(theta)), tuple(theta))


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default=())

    def __post_init__(self) -> None:
        gates = tuple(self.gates)
        for g in gates:
            if any(not 0 <= w < self.n_qubits for w in g.wires):
                raise ValueError(f"gate {g.name} on wires {g.wires} outside {self.n_qubits}-qubit register")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def then(self, other: Circuit | Iterable[Gate]) -> Circuit:
        extra = other.gates if isinstance(other, Circuit) else tuple(other)
        return Circuit(self.n_qubits, self.gates + extra)

    def dagger(self) -> Circuit:
        return Circuit(self.n_qubits, tuple(g.dagger() for g in reversed(self.gates)))

    def shifted(self, offset: int, n_qubits: int) -> Circuit:
        return Circuit(n_qubits, tuple(g.shifted(offset) for g in self.gates))

    def controlled(self, control: int) -> Circuit:
        return Circuit(self.n_qubits, tuple(g.controlled(control) for g in self.gates))

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def dumps(self) -> str:
        """One gate per line: ``name | wires | params | matrix``.

        Matrix entries are ``re,im`` pairs in row-major order, 17
        significant digits.
        """
        lines = [f"CIRCUIT {self.n_qubits} {len(self.gates)}"]
        for g in self.gates:
            wires = ",".join(map(str, g.wires))
            params = ",".join(f"{p:.17g}" for p in g.params) or "-"
            mat = " ".join(f"{v.real:.17g},{v.imag:.17g}" for v in g.matrix.reshape(-1))
            lines.append(f"{g.name} | {wires} | {params} | {mat}")
        return "\n".join(lines) + "\n"


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def apply_matrix(state: np.ndarray, matrix: np.ndarray, wires: Sequence[int], n_qubits: int) -> np.ndarray:
    """Contract a k-qubit matrix into ``state`` on ``wires``; returns a new array."""
    k = len(wires)
    psi = np.asarray(state, dtype=np.complex128).reshape((2,) * n_qubits)
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(wires)))
    return np.moveaxis(out, list(range(k)), list(wires)).reshape(-1)


def apply(circuit: Circuit, state: np.ndarray | None = None) -> np.ndarray:
    n = circuit.n_qubits
    psi = zero_state(n) if state is None else np.asarray(state, dtype=np.complex128)
    if psi.shape != (1 << n,):
        raise ValueError(f"state of length {psi.shape} does not fit a {n}-qubit circuit")
    for g in circuit.gates:
        psi = apply_matrix(psi, g.matrix, g.wires, n)
    if state is not None and psi is state:
        psi = psi.copy()
    return psi


def inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """``<a|b>`` (conjugate-linear in the first argument)."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def _pauli_masks(label: str) -> tuple[int, int, int]:
    n = len(label)
    xmask = zmask = n_y = 0
    for j, ch in enumerate(label):
        bit = 1 << (n - 1 - j)
        if ch in "XY":
            xmask |= bit
        if ch in "ZY":
            zmask |= bit
        if ch == "Y":
            n_y += 1
        elif ch not in "IXZ":
            raise ValueError(f"unknown Pauli {ch!r} in {label!r}")
    return xmask, zmask, n_y


def _parity(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    v = values.copy()
    while np.any(v):
        out ^= v & 1
        v >>= 1
    return out


def apply_pauli(state: np.ndarray, label: str) -> np.ndarray:
    """``P|state>`` for a Pauli string via index arithmetic.

    Leading axes of ``state`` are treated as a batch.
    """
    n = len(label)
    if state.shape[-1:] != (1 << n,):
        raise ValueError(f"Pauli string of length {n} on state of length {state.shape}")
    xmask, zmask, n_y = _pauli_masks(label)
    idx = np.arange(1 << n)
    sign = 1 - 2 * _parity(idx & zmask)
    out = np.empty(state.shape, dtype=np.complex128)
    out[..., idx ^ xmask] = (1j**n_y) * sign * state
    return out


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator ``sum_k c_k P_k + diag(d) + D``.

    ``trainable`` selects which part is read from the parameter vector:
    ``"paulis"`` (one slot per Pauli string), ``"diagonal"`` (``2**n``
    slots, one per computational basis projector) or ``None``.
    """

    n_qubits: int
    paulis: tuple[str, ...] = ()
    coeffs: np.ndarray | None = None
    diagonal: np.ndarray | None = None
    dense: np.ndarray | None = None
    trainable: str | None = None

    def __post_init__(self) -> None:
        for p in self.paulis:
            if len(p) != self.n_qubits:
                raise ValueError(f"Pauli string {p!r} does not have length {self.n_qubits}")
            _pauli_masks(p)
        if self.trainable not in (None, "paulis", "diagonal"):
            raise ValueError(f"unknown trainable mode {self.trainable!r}")
        dim = 1 << self.n_qubits
        if self.coeffs is not None:
            object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
            if self.coeffs.shape != (len(self.paulis),):
                raise ValueError("one coefficient per Pauli string required")
        if self.diagonal is not None:
            object.__setattr__(self, "diagonal", np.asarray(self.diagonal, dtype=float))
            if self.diagonal.shape != (dim,):
                raise ValueError(f"diagonal must have length {dim}")
        if self.dense is not None:
            d = np.asarray(self.dense, dtype=np.complex128)
            if d.shape != (dim, dim) or np.abs(d - d.conj().T).max() > 1e-12:
                raise ValueError("dense part must be a Hermitian matrix of matching size")
            object.__setattr__(self, "dense", d)

    @classmethod
    def pauli(cls, label: str, coeff: float = 1.0) -> Observable:
        return cls(len(label), (label,), np.array([coeff]))

    @classmethod
    def single(cls, op: str, wire: int, n_qubits: int) -> Observable:
        label = ["I"] * n_qubits
        label[wire] = op
        return cls.pauli("".join(label))

    @classmethod
    def z_sum(cls, n_qubits: int, wires: Sequence[int] | None = None) -> Observable:
        """Trainable ``theta_0 I + sum_k theta_{k+1} Z_{w_k}``."""
        wires = range(n_qubits) if wires is None else wires
        labels = ["I" * n_qubits]
        for w in wires:
            lab = ["I"] * n_qubits
            lab[w] = "Z"
            labels.append("".join(lab))
        return cls(n_qubits, tuple(labels), trainable="paulis")

    @classmethod
    def projectors(cls, n_qubits: int) -> Observable:
        """Trainable ``sum_k theta_k |k><k|`` with ``2**n`` slots."""
        return cls(n_qubits, trainable="diagonal")

    @property
    def n_params(self) -> int:
        if self.trainable == "paulis":
            return len(self.paulis)
        if self.trainable == "diagonal":
            return 1 << self.n_qubits
        return 0

    def _pauli_coeffs(self, params: np.ndarray | None) -> np.ndarray:
        if self.trainable == "paulis":
            return np.asarray(params, dtype=float)
        if self.coeffs is not None:
            return self.coeffs
        return np.ones(len(self.paulis))

    def _diag(self, params: np.ndarray | None) -> np.ndarray | None:
        if self.trainable == "diagonal":
            d = np.asarray(params, dtype=float)
            return d if self.diagonal is None else d + self.diagonal
        return self.diagonal

    def _check_params(self, params) -> np.ndarray | None:
        if self.n_params == 0:
            return None
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.shape != (self.n_params,):
            raise ValueError(f"observable takes {self.n_params} parameters, got {params.shape[0]}")
        return params

    def matrix(self, params=None) -> np.ndarray:
        params = self._check_params(params)
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=np.complex128)
        for c, p in zip(self._pauli_coeffs(params), self.paulis):
            out += c * pauli_matrix(p)
        d = self._diag(params)
        if d is not None:
            out += np.diag(d)
        if self.dense is not None:
            out += self.dense
        return out

    def apply(self, state: np.ndarray, params=None) -> np.ndarray:
        """``M|state>`` without building the dense matrix (batched over leading axes)."""
        params = self._check_params(params)
        out = np.zeros_like(state, dtype=np.complex128)
        for c, p in zip(self._pauli_coeffs(params), self.paulis):
            if c != 0.0:
                out += c * apply_pauli(state, p)
        d = self._diag(params)
        if d is not None:
            out += d * state
        if self.dense is not None:
            out += state @ self.dense.T
        return out

    def term_expectations(self, state: np.ndarray) -> np.ndarray:
        """Derivative of the expectation with respect to each trainable slot.

        For a batch of states the slots run along the last axis.
        """
        if self.trainable == "paulis":
            terms = [np.sum(state.conj() * apply_pauli(state, p), axis=-1).real for p in self.paulis]
            return np.stack(terms, axis=-1)
        if self.trainable == "diagonal":
            return np.abs(state) ** 2
        return np.zeros(state.shape[:-1] + (0,))


def expectation(state: np.ndarray, obs: Observable, params=None) -> float:
    value = np.vdot(state, obs.apply(state, params))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ValueError(f"expectation has imaginary part {value.imag:.3e}; observable not Hermitian?")
    return float(value.real)


def hadamard_test_circuit(prep_a: Circuit, prep_b: Circuit) -> Circuit:
    """Ancilla on wire 0: H, controlled (prep_a^dag prep_b), H."""
    if prep_a.n_qubits != prep_b.n_qubits:
        raise ValueError(f"register sizes differ: {prep_a.n_qubits} vs {prep_b.n_qubits}")
    n = prep_a.n_qubits + 1
    body = prep_b.then(prep_a.dagger()).shifted(1, n).controlled(0)
    return Circuit(n, (h(0),) + body.gates + (h(0),))


def _hadamard_p0(prep_a: Circuit, prep_b: Circuit) -> float:
    psi = apply(hadamard_test_circuit(prep_a, prep_b))
    half = psi.shape[0] // 2
    return float(np.sum(np.abs(psi[:half]) ** 2))


def hadamard_test(prep_a: Circuit, prep_b: Circuit) -> float:
    """``P(ancilla=0) - P(ancilla=1) = Re <0|U_a^dag U_b|0>``."""
    return 2.0 * _hadamard_p0(prep_a, prep_b) - 1.0


def sample_hadamard_test(
    prep_a: Circuit, prep_b: Circuit, shots: int, rng: np.random.Generator
) -> float:
    """Shot-noise estimate of :func:`hadamard_test` (binomial ancilla counts)."""
    p0 = min(max(_hadamard_p0(prep_a, prep_b), 0.0), 1.0)
    return 2.0 * rng.binomial(shots, p0) / shots - 1.0


def complete_unitary(columns: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Extend orthonormal ``columns`` (d x m) to a d x d unitary.

    Candidates are the standard basis vectors in order, orthogonalised
    (twice, classical Gram-Schmidt) against everything accepted so far.
    The result is a deterministic function of ``columns``.
    """
    d, m = columns.shape
    basis = [columns[:, i].astype(np.complex128) for i in range(m)]
    for i in range(d):
        if len(basis) == d:
            break
        v = np.zeros(d, dtype=np.complex128)
        v[i] = 1.0
        for _ in range(2):
            for q in basis:
                v = v - np.vdot(q, v) * q
        nv = np.linalg.norm(v)
        if nv > tol:
            basis.append(v / nv)
    return np.stack(basis, axis=1)


def compile_mps_to_circuit(mps: MPS, norm_atol: float = 1e-10) -> Circuit:
    """Exact staircase circuit preparing a normalised MPS of bond dimension <= 2.

    After right-canonicalisation each core is an isometry from its left
    bond to (physical, right bond). Bonds are carried by the wire of the
    next site, so core j becomes a two-qubit gate on wires (j, j+1) whose
    columns with the (j+1)-input in |0> are fixed by the core; the last
    core becomes a single-qubit gate on wire n-1. Gates are applied in the
    order (0,1), (1,2), ..., (n-2, n-1), (n-1).
    """
    if mps.n_sites == 0:
        raise ValueError("cannot compile an empty MPS")
    if max_rank(mps) > 2:
        raise RankError(f"bond dimension {max_rank(mps)} > 2 needs wider gates")
    norm = mps.norm()
    if abs(norm - 1.0) > norm_atol:
        raise NormError(f"MPS norm is {norm!r}; normalise before compiling")
    cores = canonicalize(mps, "right").cores
    n = len(cores)
    gates = []
    for j, core in enumerate(cores):
        rl, _, rr = core.shape
        if j < n - 1:
            padded = np.zeros((rl, 2, 2), dtype=np.complex128)
            padded[:, :, :rr] = core
            # column index = 2 * (bond in) + (fresh wire), fresh wire starts in |0>
            cols = padded.reshape(rl, 4).T
            mat = _place_columns(complete_unitary(cols), rl)
            gates.append(Gate("MPS2", (j, j + 1), mat))
        else:
            cols = core.reshape(rl, 2).T
            gates.append(Gate("MPS1", (j,), complete_unitary(cols)))
    return Circuit(n, tuple(gates))


def _place_columns(u: np.ndarray, rl: int) -> np.ndarray:
    """Move the fixed isometry columns to input states |a, 0>.

    ``u`` has the fixed columns first (one per left-bond value ``a``) and
    completion vectors after; the gate input basis is ``|a, c>`` with
    index ``2a + c``.
    """
    mat = np.empty_like(u)
    fixed = [2 * a for a in range(rl)]
    free = [i for i in range(4) if i not in fixed]
    for pos, col in zip(fixed + free, range(4)):
        mat[:, pos] = u[:, col]
    return mat


def state_preparation(vector: np.ndarray, name: str = "PREP") -> Circuit:
    """Single dense gate mapping ``|0...0>`` to ``vector`` (Householder)."""
    v = np.asarray(vector, dtype=np.complex128)
    dim = v.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"vector length {dim} is not a power of two")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise NormError("state preparation needs a unit vector")
    phase = v[0] / abs(v[0]) if abs(v[0]) > 0 else 1.0
    w = -np.conj(phase) * v
    w[0] += 1.0
    nw = np.vdot(w, w).real
    if nw < 1e-30:
        mat = phase * np.eye(dim)
    else:
        mat = phase * (np.eye(dim) - 2.0 * np.outer(w, w.conj()) / nw)
    return Circuit(n, (Gate(name, tuple(range(n)), mat),))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)


def mps_state(mps: MPS) -> np.ndarray:
    """Normalised dense vector of an MPS (oracle for compiled circuits)."""
    v = contract_dense(mps)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise NormError("zero state")
    return v / nv
