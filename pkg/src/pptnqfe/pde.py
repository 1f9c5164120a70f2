"""1D Poisson problem with homogeneous Dirichlet data.

The rescaled stiffness system ``tridiag(-1, 2, -1) u = f`` is solved either
classically or with a variational state, and the resulting normalised
solution is evaluated at arbitrary points through the overlap with the
piecewise-linear feature state:

    u(x) = ||u|| * n_phi(x) * Re <u | Phi(x)>
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .basis import Grid, GridKind, Transform, eval_feature_pair, norm_nphi
from .encoder import FeatureEncoding, encode_1d
from .optim import AMSGrad, amsgrad_step
from .quantum_sim import (
    Circuit,
    Gate,
    apply,
    cnot,
    compile_mps_to_circuit,
    h,
    hadamard_test,
    inner_product,
    ry,
    state_preparation,
    x,
)

__all__ = [
    "TridiagonalSystem",
    "PdeSolution",
    "assemble",
    "rhs_state",
    "rhs_circuit",
    "thomas_solve",
    "solve_classical",
    "variational_cost",
    "ansatz_state",
    "ansatz_circuit",
    "solve_variational",
    "n_ansatz_params",
    "ansatz_states",
    "eval_point",
    "interpolant",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    """``A u = f`` with ``A = tridiag(-1, 2, -1)`` of size ``2**n_qubits``."""

    n_qubits: int
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return 1 << self.n_qubits

    @property
    def rhs_norm(self) -> float:
        return float(np.linalg.norm(self.rhs))

    def matrix(self) -> np.ndarray:
        N = self.size
        return 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = 2.0 * v
        out[1:] -= v[:-1]
        out[:-1] -= v[1:]
        return out


@dataclass(frozen=True, eq=False)
class PdeSolution:
    state: np.ndarray
    norm: float
    grid: Grid
    prep: Circuit
    cost: float = 0.0
    iterations: int = 0
    converged: bool = True
    history: list[float] = field(default_factory=list)

    @property
    def coefficients(self) -> np.ndarray:
        """Unnormalised nodal values ``u_k``."""
        return self.norm * self.state.real


def rhs_state(n_qubits: int) -> np.ndarray:
    """Jump right-hand side: uniform on the upper half of the index range."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    N = 1 << n_qubits
    f = np.zeros(N)
    f[N // 2 :] = 1.0 / np.sqrt(N // 2)
    return f


def rhs_circuit(n_qubits: int) -> Circuit:
    """X on the most significant wire, H on all others."""
    return Circuit(n_qubits, (x(0),) + tuple(h(w) for w in range(1, n_qubits)))


def assemble(n_qubits: int) -> TridiagonalSystem:
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    return TridiagonalSystem(n_qubits, rhs_state(n_qubits))


def thomas_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve without pivoting (fine for diagonally dominant SPD)."""
    n = diag.shape[0]
    c = np.zeros(n)
    d = np.zeros(n)
    c[0] = upper[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
    u = np.zeros(n)
    u[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        u[i] = d[i] - c[i] * u[i + 1]
    return u


def _grid(n_qubits: int) -> Grid:
    return Grid(n_qubits, GridKind.INTERIOR)


def solve_classical(system: TridiagonalSystem) -> PdeSolution:
    N = system.size
    off = -np.ones(N - 1)
    u = thomas_solve(off, 2.0 * np.ones(N), off, system.rhs)
    norm = float(np.linalg.norm(u))
    state = u / norm
    return PdeSolution(state, norm, _grid(system.n_qubits), state_preparation(state, "PREP_U"))


# --- variational solver -------------------------------------------------------


def n_ansatz_params(n_qubits: int, layers: int) -> int:
    return n_qubits * (layers + 1)


def _cnot_chain_perm(n_qubits: int) -> np.ndarray:
    """Index permutation realising CNOT(0,1) CNOT(1,2) ... CNOT(n-2,n-1)."""
    idx = np.arange(1 << n_qubits)
    out = idx.copy()
    for w in range(n_qubits - 1):
        c_bit = 1 << (n_qubits - 1 - w)
        t_bit = c_bit >> 1
        out = np.where(out & c_bit, out ^ t_bit, out)
    # state'[perm(i)] = state[i]
    return out


def ansatz_states(thetas: np.ndarray, n_qubits: int, layers: int) -> np.ndarray:
    """Batched :func:`ansatz_state`: one row of ``thetas`` per output state."""
    thetas = np.asarray(thetas, dtype=float).reshape(-1, layers + 1, n_qubits)
    batch = thetas.shape[0]
    perm = _cnot_chain_perm(n_qubits)
    psi = np.zeros((batch, 1 << n_qubits))
    psi[:, 0] = 1.0
    for layer in range(layers + 1):
        c = np.cos(thetas[:, layer] / 2)
        s = np.sin(thetas[:, layer] / 2)
        for w in range(n_qubits):
            view = psi.reshape(batch, 1 << w, 2, -1)
            cw, sw = c[:, w, None], s[:, w, None]
            lo, hi = view[:, :, 0, :], view[:, :, 1, :]
            view = np.stack(
                [cw[:, :, None] * lo - sw[:, :, None] * hi, sw[:, :, None] * lo + cw[:, :, None] * hi],
                axis=2,
            )
            psi = view.reshape(batch, -1)
        if layer < layers and n_qubits > 1:
            nxt = np.empty_like(psi)
            nxt[:, perm] = psi
            psi = nxt
    return psi


def ansatz_state(theta: np.ndarray, n_qubits: int, layers: int) -> np.ndarray:
    """Real hardware-efficient ansatz applied to ``|0...0>``.

    ``layers`` repetitions of (R_y on every wire, CNOT chain), followed by a
    closing R_y layer.
    """
    return ansatz_states(theta, n_qubits, layers)[0]


def ansatz_circuit(theta: np.ndarray, n_qubits: int, layers: int) -> Circuit:
    theta = np.asarray(theta, dtype=float).reshape(layers + 1, n_qubits)
    gates = []
    for layer in range(layers + 1):
        gates.extend(ry(theta[layer, w], w) for w in range(n_qubits))
        if layer < layers:
            gates.extend(cnot(w, w + 1) for w in range(n_qubits - 1))
    return Circuit(n_qubits, tuple(gates))


def variational_cost(system: TridiagonalSystem, psi: np.ndarray) -> float:
    """``1 - <f|A|psi>^2 / (||f||^2 <psi|A^2|psi>)``; zero iff psi is parallel to A^-1 f."""
    return float(_costs(system, np.asarray(psi).real[None, :])[0])


def _costs(system: TridiagonalSystem, psis: np.ndarray) -> np.ndarray:
    a_psi = 2.0 * psis
    a_psi[:, 1:] -= psis[:, :-1]
    a_psi[:, :-1] -= psis[:, 1:]
    num = (a_psi @ system.rhs) ** 2
    den = system.rhs_norm**2 * np.einsum("bi,bi->b", a_psi, a_psi)
    return np.maximum(0.0, 1.0 - num / den)


def _energies(system: TridiagonalSystem, psis: np.ndarray) -> np.ndarray:
    # -1/2 <f|psi>^2 / <psi|A|psi>: the energy of the best multiple of psi
    a_psi = 2.0 * psis
    a_psi[:, 1:] -= psis[:, :-1]
    a_psi[:, :-1] -= psis[:, 1:]
    return -0.5 * (psis @ system.rhs) ** 2 / np.einsum("bi,bi->b", psis, a_psi)


def _galerkin_norm(system: TridiagonalSystem, psi: np.ndarray) -> tuple[np.ndarray, float]:
    # best scalar s minimising the energy of u = s psi; sign absorbed into psi
    s = float(np.dot(psi, system.rhs)) / float(np.dot(psi, system.matvec(psi)))
    if s < 0:
        return -psi, -s
    return psi, s


def solve_variational(
    system: TridiagonalSystem,
    layers: int = 4,
    seed: int | np.random.Generator = 0,
    max_iters: int = 3000,
    tol: float = 1e-8,
    lr: float = 0.01,
    init_scale: float = 0.1,
    fd_step: float = 1e-5,
) -> PdeSolution:
    """Variational solve over the R_y/CNOT ansatz with AMSGrad.

    AMSGrad descends the Galerkin energy ``-<f|psi>^2 / (2 <psi|A|psi>)``,
    whose minimiser over normalised states is the same ray as that of
    :func:`variational_cost` but which is far better conditioned (the
    residual form squares the condition number of ``A``). Stopping and the
    reported ``cost`` use :func:`variational_cost`. Gradients are central
    finite differences. Non-convergence is reported through
    ``converged=False`` with the best cost found, not raised.
    """
    n = system.n_qubits
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_params = n_ansatz_params(n, layers)
    opt = AMSGrad(lr=lr)
    state = opt.init(rng.uniform(-init_scale, init_scale, n_params))
    shifts = fd_step * np.eye(n_params)

    best_theta, best_cost = state.params, np.inf
    history = []
    it = 0
    while True:
        probes = np.concatenate([state.params + shifts, state.params - shifts, state.params[None, :]])
        psis = ansatz_states(probes, n, layers)
        c = float(_costs(system, psis[-1:])[0])
        history.append(c)
        if c < best_cost:
            best_theta, best_cost = state.params, c
        if best_cost <= tol or it == max_iters:
            break
        e = _energies(system, psis[:-1])
        grad = (e[:n_params] - e[n_params:]) / (2 * fd_step)
        state = amsgrad_step(opt, state, grad)
        it += 1
    converged = best_cost <= tol
    if not converged:
        log.info("variational solve stopped at cost %.3e after %d iterations", best_cost, it)

    psi = ansatz_state(best_theta, n, layers)
    psi, norm = _galerkin_norm(system, psi)
    prep = ansatz_circuit(best_theta, n, layers)
    if np.dot(apply(prep).real, psi) < 0:
        # the Galerkin sign flip is a global phase of -1 on the prepared state
        prep = prep.then([_minus_one(0)])
    return PdeSolution(psi, norm, _grid(n), prep, best_cost, it, converged, history)


def _minus_one(wire: int) -> Gate:
    return Gate("NEG", (wire,), -np.eye(2))


# --- point evaluation ---------------------------------------------------------


def interpolant(coefficients: np.ndarray, grid: Grid, x: float) -> float:
    """``sum_k u_k hat_k(x)`` evaluated from the two active hats."""
    k, a, b = eval_feature_pair(grid, Transform.LINEAR, x)
    return coefficients[k] * a + coefficients[k + 1] * b


def eval_point(sol: PdeSolution, x: float, method: str = "hadamard") -> float:
    """``u(x) = ||u|| n_phi(x) Re <u|Phi(x)>``.

    ``method="hadamard"`` estimates the overlap with the Hadamard test on
    the compiled feature circuit and the solution's preparation circuit;
    ``method="direct"`` takes the exact inner product of the statevectors.
    Returns 0 at x = +-1, where the feature state does not exist.
    """
    enc = FeatureEncoding(sol.grid, Transform.LINEAR)
    n_phi = norm_nphi(sol.grid, Transform.LINEAR, x)
    if n_phi == 0.0:
        return 0.0
    phi_mps = encode_1d(enc, x).scaled(1.0 / n_phi)
    if method == "hadamard":
        overlap = hadamard_test(sol.prep, compile_mps_to_circuit(phi_mps))
    elif method == "direct":
        overlap = inner_product(sol.state.astype(np.complex128), phi_mps.to_dense()).real
    else:
        raise ValueError(f"unknown method {method!r}")
    return sol.norm * n_phi * overlap
