"""Quantum regression models on top of the piecewise-linear feature states.

A model evaluates

    h(x, theta) = <psi(x)| U(theta)^dag M_theta U(theta) |psi(x)>

where ``|psi(x)>`` is either the normalised PPTNQFE state or a rotation
(angle) embedding, ``U(theta)`` is a stack of variational layers and
``M_theta`` an observable whose coefficients may be trainable.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, expm_frechet

from .basis import Grid, eval_feature_pair, eval_hat
from .encoder import FeatureEncoding, ZeroStateError
from .optim import AMSGrad, amsgrad_step
from .quantum_sim import PAULI, SU4_PAULIS, Observable, pauli_matrix, ry_matrix, rz_matrix, su4_generator

__all__ = [
    "PptnqfeEncoding",
    "RotationEncoding",
    "MpsLayer",
    "RotationLayer",
    "FixedUnitary",
    "Model",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "forward",
    "forward_batch",
    "mse",
    "fd_gradient",
    "adjoint_gradient",
    "gradient",
    "train",
    "count_terms",
    "build_multistep_unitary",
    "spectrum_demo",
    "sign_changes",
    "jump_experiment",
    "sine_experiment",
    "multistep_experiment",
    "least_squares_optimum",
    "jump_model",
    "jump_target",
    "sine_model",
    "sine_target",
    "multistep_model",
    "multistep_target",
    "Report",
]

log = logging.getLogger(__name__)

_CNOT = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]


class TrainingDivergedError(FloatingPointError):
    def __init__(self, message: str, losses: list[float]):
        super().__init__(message)
        self.losses = losses


# --- encodings ----------------------------------------------------------------


@dataclass(frozen=True)
class PptnqfeEncoding:
    enc: FeatureEncoding

    @property
    def n_qubits(self) -> int:
        return self.enc.n_qubits

    def states(self, xs: Sequence[float]) -> np.ndarray:
        out = np.zeros((len(xs), self.enc.grid.N), dtype=np.complex128)
        for i, x in enumerate(xs):
            k, a, b = eval_feature_pair(self.enc.grid, self.enc.transform, float(x))
            n_phi = np.hypot(a, b)
            if n_phi == 0.0:
                raise ZeroStateError(f"feature state undefined at x={x!r}")
            out[i, k], out[i, k + 1] = a / n_phi, b / n_phi
        return out


@dataclass(frozen=True)
class RotationEncoding:
    """Wire j: H then R_z(base**j * pi * x) on ``|0>``."""

    n_qubits: int
    base: float = 2.0

    def frequencies(self) -> np.ndarray:
        return self.base ** np.arange(self.n_qubits)

    def states(self, xs: Sequence[float]) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.ones((xs.shape[0], 1), dtype=np.complex128)
        for f in self.frequencies():
            angle = f * np.pi * xs
            qubit = np.stack([np.exp(-0.5j * angle), np.exp(0.5j * angle)], axis=1) / np.sqrt(2)
            out = np.einsum("bi,bj->bij", out, qubit).reshape(xs.shape[0], -1)
        return out


# --- variational layers -------------------------------------------------------
#
# ``ops(params)`` returns a list of (matrix, wires, [(param_index, dmatrix), ...])
# with param indices local to the layer.

Op = tuple[np.ndarray, tuple[int, ...], list[tuple[int, np.ndarray]]]


@dataclass(frozen=True)
class MpsLayer:
    """Staircase of 15-parameter two-qubit gates on (0,1), (1,2), ..., repeated ``sweeps`` times."""

    n_qubits: int
    sweeps: int = 1

    @property
    def n_params(self) -> int:
        return 15 * (self.n_qubits - 1) * self.sweeps

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, 0.1, self.n_params)

    def ops(self, params: np.ndarray, derivatives: bool = True) -> list[Op]:
        out = []
        gens = 1j * np.array([pauli_matrix(p) for p in SU4_PAULIS])
        for g in range(self.sweeps * (self.n_qubits - 1)):
            w = g % (self.n_qubits - 1)
            theta = params[15 * g : 15 * (g + 1)]
            a = 1j * su4_generator(theta)
            mat = expm(a)
            ders = []
            if derivatives:
                ders = [(15 * g + i, expm_frechet(a, gens[i], compute_expm=False)) for i in range(15)]
            out.append((mat, (w, w + 1), ders))
        return out


@dataclass(frozen=True)
class RotationLayer:
    """R_z R_y R_z on every wire, then a ring of CNOTs."""

    n_qubits: int

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-np.pi, np.pi, self.n_params)

    def ops(self, params: np.ndarray, derivatives: bool = True) -> list[Op]:
        out = []
        half_z, half_y = -0.5j * PAULI["Z"], -0.5j * PAULI["Y"]
        for w in range(self.n_qubits):
            a, b, c = params[3 * w : 3 * w + 3]
            za, yb, zc = rz_matrix(a), ry_matrix(b), rz_matrix(c)
            mat = zc @ yb @ za
            ders = []
            if derivatives:
                ders = [
                    (3 * w, zc @ yb @ half_z @ za),
                    (3 * w + 1, zc @ half_y @ yb @ za),
                    (3 * w + 2, half_z @ zc @ yb @ za),
                ]
            out.append((mat, (w,), ders))
        n = self.n_qubits
        if n == 2:
            out.append((_CNOT, (0, 1), []))
        elif n > 2:
            out.extend((_CNOT, (w, (w + 1) % n), []) for w in range(n))
        return out


@dataclass(frozen=True, eq=False)
class FixedUnitary:
    matrix: np.ndarray
    name: str = "V"

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        dim = m.shape[0] if m.ndim == 2 else 0
        if m.ndim != 2 or m.shape[1] != dim or dim < 2 or dim & (dim - 1):
            raise ValueError(f"{self.name}: expected a 2^n x 2^n matrix, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(dim), atol=1e-10):
            raise ValueError(f"{self.name}: matrix is not unitary")

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    n_params = 0

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(0)

    def ops(self, params: np.ndarray, derivatives: bool = True) -> list[Op]:
        return [(np.asarray(self.matrix, dtype=np.complex128), tuple(range(self.n_qubits)), [])]


Layer = MpsLayer | RotationLayer | FixedUnitary


@dataclass(frozen=True, eq=False)
class Model:
    encoding: PptnqfeEncoding | RotationEncoding
    layers: tuple[Layer, ...]
    observable: Observable

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        n = self.encoding.n_qubits
        for layer in self.layers:
            if layer.n_qubits != n:
                raise ValueError(f"layer acts on {layer.n_qubits} qubits, encoding has {n}")
        if self.observable.n_qubits != n:
            raise ValueError("observable size does not match the encoding")

    @property
    def n_qubits(self) -> int:
        return self.encoding.n_qubits

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers) + self.observable.n_params

    def param_counts(self) -> dict[str, int]:
        counts = {f"layer{i}:{type(layer).__name__}": layer.n_params for i, layer in enumerate(self.layers)}
        counts["observable"] = self.observable.n_params
        return counts

    def split(self, theta: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"model has {self.n_params} parameters, got {theta.shape}")
        chunks, pos = [], 0
        for layer in self.layers:
            chunks.append(theta[pos : pos + layer.n_params])
            pos += layer.n_params
        return chunks, theta[pos:]

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        parts = [layer.init(rng) for layer in self.layers]
        parts.append(np.zeros(self.observable.n_params))
        return np.concatenate(parts) if parts else np.zeros(0)

    def ops(self, theta: np.ndarray, derivatives: bool = True) -> tuple[list[Op], np.ndarray]:
        """Flattened op list with global parameter indices, plus observable params."""
        chunks, obs_params = self.split(theta)
        out, offset = [], 0
        for layer, p in zip(self.layers, chunks):
            for mat, wires, ders in layer.ops(p, derivatives):
                out.append((mat, wires, [(offset + i, d) for i, d in ders]))
            offset += layer.n_params
        return out, obs_params


def _apply_batch(states: np.ndarray, matrix: np.ndarray, wires: tuple[int, ...], n: int) -> np.ndarray:
    batch = states.shape[0]
    k = len(wires)
    psi = states.reshape((batch,) + (2,) * n)
    op = matrix.reshape((2,) * (2 * k))
    axes = [w + 1 for w in wires]
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the k output axes first, then batch, then the rest
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(batch, -1)


def _observable_batch(obs: Observable, states: np.ndarray, params: np.ndarray) -> np.ndarray:
    return obs.apply(states, params if obs.n_params else None)


def forward_batch(model: Model, theta: np.ndarray, xs: Sequence[float]) -> np.ndarray:
    ops, obs_params = model.ops(theta, derivatives=False)
    psi = model.encoding.states(xs)
    for mat, wires, _ in ops:
        psi = _apply_batch(psi, mat, wires, model.n_qubits)
    m_psi = _observable_batch(model.observable, psi, obs_params)
    return np.einsum("bi,bi->b", psi.conj(), m_psi).real


def forward(model: Model, theta: np.ndarray, x: float) -> float:
    return float(forward_batch(model, theta, [x])[0])


def mse(model: Model, theta: np.ndarray, xs, ys) -> float:
    return float(np.mean((forward_batch(model, theta, xs) - np.asarray(ys)) ** 2))


def fd_gradient(model: Model, theta: np.ndarray, xs, ys, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of the MSE."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        grad[i] = (mse(model, theta + e, xs, ys) - mse(model, theta - e, xs, ys)) / (2 * step)
    return grad


def adjoint_gradient(model: Model, theta: np.ndarray, xs, ys) -> np.ndarray:
    """Exact MSE gradient by one backward sweep through the layer stack."""
    n = model.n_qubits
    ops, obs_params = model.ops(theta)
    psi = model.encoding.states(xs)
    for mat, wires, _ in ops:
        psi = _apply_batch(psi, mat, wires, n)
    obs = model.observable
    lam = _observable_batch(obs, psi, obs_params)
    preds = np.einsum("bi,bi->b", psi.conj(), lam).real
    weights = 2.0 * (preds - np.asarray(ys, dtype=float)) / len(preds)

    grad = np.zeros(model.n_params)
    n_layer = model.n_params - obs.n_params
    if obs.n_params:
        grad[n_layer:] = weights @ obs.term_expectations(psi)
    for mat, wires, ders in reversed(ops):
        psi = _apply_batch(psi, mat.conj().T, wires, n)
        for idx, dmat in ders:
            dpsi = _apply_batch(psi, dmat, wires, n)
            dh = 2.0 * np.einsum("bi,bi->b", lam.conj(), dpsi).real
            grad[idx] += weights @ dh
        lam = _apply_batch(lam, mat.conj().T, wires, n)
    return grad


def gradient(model: Model, theta: np.ndarray, xs, ys, method: str = "adjoint") -> np.ndarray:
    if method == "adjoint":
        return adjoint_gradient(model, theta, xs, ys)
    if method == "fd":
        return fd_gradient(model, theta, xs, ys)
    raise ValueError(f"unknown gradient method {method!r}")


# --- training -----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    gradient: str = "adjoint"


@dataclass
class TrainResult:
    theta: np.ndarray
    losses: list[float] = field(default_factory=list)


def train(
    model: Model,
    config: TrainConfig,
    xs,
    ys,
    theta0: np.ndarray | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Full-batch AMSGrad on the MSE; ``losses[i]`` is the loss before step i."""
    if len(xs) == 0:
        raise ValueError("empty training set")
    opt = AMSGrad(config.lr, config.beta1, config.beta2, config.eps)
    if theta0 is None:
        theta0 = model.init_params(np.random.default_rng(config.seed))
    state = opt.init(theta0)
    losses = []
    for epoch in range(config.epochs):
        loss = mse(model, state.params, xs, ys)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss} at epoch {epoch}", losses)
        losses.append(loss)
        if callback is not None:
            callback(epoch, loss)
        state = amsgrad_step(opt, state, gradient(model, state.params, xs, ys, config.gradient))
    final = mse(model, state.params, xs, ys)
    if not np.isfinite(final):
        raise TrainingDivergedError(f"loss became {final} after training", losses)
    losses.append(final)
    return TrainResult(state.params, losses)


# --- analysis helpers ---------------------------------------------------------


def count_terms(n_qubits: int) -> tuple[int, int]:
    """(number of hat functions, number of products phi_kbar phi_k with kbar >= k)."""
    N = 1 << n_qubits
    return N, 2 ** (2 * n_qubits - 1) + 2 ** (n_qubits - 1)


def build_multistep_unitary(n_qubits: int) -> FixedUnitary:
    """Unitary V with diag(V^dag Z_0 V) = (1, 1, 0, ..., 0, -1, -1).

    Columns: e_0, e_1 (Z_0 = +1), then the remaining +1/-1 eigenvectors
    paired as (e_+ + i e_-)/sqrt2 and (i e_+ + e_-)/sqrt2, then
    e_{N-2}, e_{N-1} (Z_0 = -1). Every paired column has zero diagonal and
    the only nonzero off-diagonal entries are +-i.
    """
    if n_qubits < 2:
        raise ValueError("need at least two qubits")
    N = 1 << n_qubits
    half = N // 2
    plus = list(range(2, half))
    minus = list(range(half, N - 2))
    unitary = np.zeros((N, N), dtype=np.complex128)
    unitary[0, 0] = unitary[1, 1] = 1.0
    col = 2
    for p, m in zip(plus, minus):
        unitary[p, col], unitary[m, col] = 1 / np.sqrt(2), 1j / np.sqrt(2)
        unitary[p, col + 1], unitary[m, col + 1] = 1j / np.sqrt(2), 1 / np.sqrt(2)
        col += 2
    unitary[N - 2, N - 2] = unitary[N - 1, N - 1] = 1.0
    return FixedUnitary(unitary, "MULTISTEP")


def sign_changes(values: np.ndarray, atol: float = 1e-12) -> int:
    """Number of strict sign changes, ignoring (near-)zero samples."""
    s = np.sign(np.where(np.abs(values) <= atol, 0.0, values))
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


def spectrum_demo(
    n_qubits: int,
    observables: dict[str, Observable] | None = None,
    n_points: int = 513,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Expectation curves of fixed observables right after the embedding."""
    xs = np.linspace(-1.0, 1.0, n_points)
    if observables is None:
        observables = {"I": Observable.pauli("I" * n_qubits)}
        for op in "ZX":
            for w in range(n_qubits):
                observables[f"{op}{w}"] = Observable.single(op, w, n_qubits)
        if n_qubits >= 2:
            observables["Z0Z1"] = Observable.pauli("ZZ" + "I" * (n_qubits - 2))
            observables[f"X{n_qubits - 2}X{n_qubits - 1}"] = Observable.pauli("I" * (n_qubits - 2) + "XX")
    encoding = PptnqfeEncoding(FeatureEncoding.closed(n_qubits))
    curves = {
        name: forward_batch(Model(encoding, (), obs), np.zeros(0), xs) for name, obs in observables.items()
    }
    return xs, curves


# --- experiments --------------------------------------------------------------


@dataclass
class Report:
    name: str
    encoding: str
    n_qubits: int
    n_params: int
    param_counts: dict[str, int]
    theta: np.ndarray
    losses: list[float]
    train_mse: float
    clean_mse: float
    xs: np.ndarray
    ys: np.ndarray
    curve_x: np.ndarray
    curve_target: np.ndarray
    curve_model: np.ndarray
    extra: dict = field(default_factory=dict)


def _training_set(target: Callable[[np.ndarray], np.ndarray], noise: float, rng: np.random.Generator):
    xs = np.linspace(-1.0, 1.0, 50)
    return xs, target(xs) + noise * rng.standard_normal(xs.shape[0])


def _report(name, encoding_name, model, result, xs, ys, target, n_curve=201, extra=None) -> Report:
    curve_x = np.linspace(-1.0, 1.0, n_curve)
    return Report(
        name=name,
        encoding=encoding_name,
        n_qubits=model.n_qubits,
        n_params=model.n_params,
        param_counts=model.param_counts(),
        theta=result.theta,
        losses=result.losses,
        train_mse=mse(model, result.theta, xs, ys),
        clean_mse=mse(model, result.theta, xs, target(xs)),
        xs=xs,
        ys=ys,
        curve_x=curve_x,
        curve_target=target(curve_x),
        curve_model=forward_batch(model, result.theta, curve_x),
        extra=extra or {},
    )


def jump_target(xs: np.ndarray) -> np.ndarray:
    return (np.asarray(xs) >= 0).astype(float)


def sine_target(xs: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * np.asarray(xs))


def jump_model(n_qubits: int, encoding: str = "pptnqfe", layers: int = 3) -> Model:
    if encoding == "pptnqfe":
        obs = Observable(n_qubits, ("I" * n_qubits, "Z" + "I" * (n_qubits - 1)), trainable="paulis")
        return Model(PptnqfeEncoding(FeatureEncoding.closed(n_qubits)), (), obs)
    if encoding == "rotation":
        return Model(
            RotationEncoding(n_qubits),
            tuple(RotationLayer(n_qubits) for _ in range(layers)),
            Observable.z_sum(n_qubits),
        )
    raise ValueError(f"unknown encoding {encoding!r}")


def sine_model(n_qubits: int, encoding: str = "pptnqfe", layers: int = 1) -> Model:
    if encoding == "pptnqfe":
        return Model(
            PptnqfeEncoding(FeatureEncoding.closed(n_qubits)),
            (MpsLayer(n_qubits, sweeps=layers),),
            Observable.z_sum(n_qubits),
        )
    if encoding == "rotation":
        return Model(
            RotationEncoding(n_qubits),
            tuple(RotationLayer(n_qubits) for _ in range(layers)),
            Observable.z_sum(n_qubits),
        )
    raise ValueError(f"unknown encoding {encoding!r}")


def least_squares_optimum(model: Model, xs, ys) -> np.ndarray:
    """Exact minimiser for layer-free models (the prediction is linear in theta)."""
    if any(layer.n_params for layer in model.layers):
        raise ValueError("closed form only exists when all trainable slots are in the observable")
    design = model.observable.term_expectations(_embedded(model, xs))
    theta, *_ = np.linalg.lstsq(design, np.asarray(ys, dtype=float), rcond=None)
    return theta


def _embedded(model: Model, xs) -> np.ndarray:
    psi = model.encoding.states(xs)
    ops, _ = model.ops(np.zeros(model.n_params), derivatives=False)
    for mat, wires, _ in ops:
        psi = _apply_batch(psi, mat, wires, model.n_qubits)
    return psi


def jump_experiment(
    seed: int = 0,
    n_qubits: int = 5,
    encoding: str = "pptnqfe",
    layers: int = 3,
    epochs: int = 1500,
    lr: float = 0.05,
    noise: float = 0.1,
) -> Report:
    rng = np.random.default_rng(seed)
    xs, ys = _training_set(jump_target, noise, rng)
    model = jump_model(n_qubits, encoding, layers)
    theta0 = model.init_params(rng)
    result = train(model, TrainConfig(epochs=epochs, lr=lr, seed=seed), xs, ys, theta0)
    extra = {}
    if encoding == "pptnqfe":
        extra["theta_least_squares"] = least_squares_optimum(model, xs, ys)
    return _report("jump", encoding, model, result, xs, ys, jump_target, extra=extra)


def sine_experiment(
    seed: int = 0,
    n_qubits: int = 5,
    encoding: str = "pptnqfe",
    layers: int = 1,
    epochs: int = 300,
    lr: float = 0.05,
    noise: float = 0.1,
) -> Report:
    rng = np.random.default_rng(seed)
    xs, ys = _training_set(sine_target, noise, rng)
    model = sine_model(n_qubits, encoding, layers)
    theta0 = model.init_params(rng)
    result = train(model, TrainConfig(epochs=epochs, lr=lr, seed=seed), xs, ys, theta0)
    return _report("sine", encoding, model, result, xs, ys, sine_target)


def multistep_model(n_qubits: int) -> Model:
    obs = Observable(n_qubits, ("Z" + "I" * (n_qubits - 1),), trainable="paulis")
    return Model(
        PptnqfeEncoding(FeatureEncoding.closed(n_qubits)),
        (build_multistep_unitary(n_qubits),),
        obs,
    )


def multistep_target(n_qubits: int) -> Callable[[np.ndarray], np.ndarray]:
    grid = Grid(n_qubits)
    N = grid.N

    def target(xs):
        return np.array(
            [
                eval_hat(grid, 0, x) + eval_hat(grid, 1, x) - eval_hat(grid, N - 2, x) - eval_hat(grid, N - 1, x)
                for x in np.asarray(xs, dtype=float)
            ]
        )

    return target


def multistep_experiment(
    seed: int = 0,
    n_qubits: int = 3,
    epochs: int = 500,
    lr: float = 0.05,
    noise: float = 0.1,
) -> Report:
    rng = np.random.default_rng(seed)
    target = multistep_target(n_qubits)
    xs, ys = _training_set(target, noise, rng)
    model = multistep_model(n_qubits)
    result = train(model, TrainConfig(epochs=epochs, lr=lr, seed=seed), xs, ys, np.zeros(1))
    extra = {"theta_least_squares": least_squares_optimum(model, xs, ys)}
    return _report("multistep", "pptnqfe", model, result, xs, ys, target, extra=extra)
