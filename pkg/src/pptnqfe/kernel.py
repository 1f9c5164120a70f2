"""Fidelity kernels for two-feature classification.

``kappa(x, x') = |<Psi(x)|Psi(x')>|^2`` for product embeddings of each
feature, trained by regularised inversion of the kernel matrix and
predicted by the sign of ``sum_m alpha_m kappa(x*, x_m)``.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .basis import Grid, GridKind, Transform, eval_feature_pair
from .mps import SiteOrdering

__all__ = [
    "PptnqfeKernel",
    "AngleKernel",
    "Dataset",
    "FitResult",
    "ClassifyReport",
    "kernel_value",
    "kernel_matrix",
    "fit",
    "decision_function",
    "predict",
    "gen_half_moons",
    "gen_three_lines",
    "probe_grid",
    "classify_experiment",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PptnqfeKernel:
    """Product of square-root-hat embeddings on a closed grid per feature.

    ``ordering`` only changes the qubit layout of the joint state, not the
    kernel value; it is carried for the simulator cross-check.
    """

    qubits_per_feature: int = 3
    ordering: SiteOrdering = SiteOrdering.CANONICAL

    @property
    def grid(self) -> Grid:
        return Grid(self.qubits_per_feature, GridKind.CLOSED)

    def feature_states(self, values: np.ndarray) -> np.ndarray:
        grid = self.grid
        out = np.zeros((len(values), grid.N))
        for i, v in enumerate(values):
            k, a, b = eval_feature_pair(grid, Transform.SQRT_HAT, float(v))
            out[i, k], out[i, k + 1] = a, b
        return out

    def feature_overlap(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.feature_states(a) @ self.feature_states(b).T


@dataclass(frozen=True)
class AngleKernel:
    """Per-feature qubits with ``R_y(f * pi * scale * x)``, one qubit per frequency ``f``."""

    frequencies: tuple[float, ...] = (1.0, 2.0, 3.0)
    scale: float = 1.0

    @property
    def qubits_per_feature(self) -> int:
        return len(self.frequencies)

    def spectrum(self) -> np.ndarray:
        """Distinct integer-multiple frequencies of one feature factor (units of pi*scale)."""
        sums = {0.0}
        for f in self.frequencies:
            sums = {s + d for s in sums for d in (-f, 0.0, f)}
        return np.array(sorted(sums))

    def feature_overlap(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        delta = np.subtract.outer(np.asarray(a, float), np.asarray(b, float))
        out = np.ones_like(delta)
        for f in self.frequencies:
            out = out * np.cos(0.5 * f * np.pi * self.scale * delta)
        return out


KernelSpec = PptnqfeKernel | AngleKernel


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def kernel_matrix(spec: KernelSpec, points, others=None) -> np.ndarray:
    """``K[i, j] = kappa(points[i], others[j])``; ``others`` defaults to ``points``."""
    a = _as_points(points)
    b = a if others is None else _as_points(others)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    overlap = np.ones((a.shape[0], b.shape[0]))
    for f in range(a.shape[1]):
        overlap = overlap * spec.feature_overlap(a[:, f], b[:, f])
    gram = overlap**2
    if others is None:
        gram = 0.5 * (gram + gram.T)
    return gram


def kernel_value(spec: KernelSpec, x: Sequence[float], y: Sequence[float]) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


# --- training -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FitResult:
    alpha: np.ndarray
    points: np.ndarray
    lam: float
    lam_raised: bool = False


def fit(spec: KernelSpec, points, labels, lam: float = 1e-6, max_raises: int = 12) -> FitResult:
    """Ridge solve ``(K + lam I) alpha = y``.

    If the Cholesky factorisation fails, ``lam`` is raised tenfold (with a
    warning) until it succeeds.
    """
    points = _as_points(points)
    y = np.asarray(labels, dtype=float)
    if points.shape[0] == 0:
        raise ValueError("empty training set")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    gram = kernel_matrix(spec, points)
    current = lam
    for attempt in range(max_raises + 1):
        try:
            factor = cho_factor(gram + current * np.eye(gram.shape[0]))
        except LinAlgError:
            new = max(current * 10.0, 1e-12)
            warnings.warn(f"kernel system singular at lam={current:g}; retrying with {new:g}", RuntimeWarning)
            current = new
            continue
        return FitResult(cho_solve(factor, y), points, current, attempt > 0)
    raise LinAlgError(f"kernel system still singular at lam={current:g}")


def decision_function(spec: KernelSpec, model: FitResult, x) -> np.ndarray:
    return kernel_matrix(spec, x, model.points) @ model.alpha


def predict(spec: KernelSpec, model: FitResult, x) -> np.ndarray:
    """Labels in {-1, +1}; an exactly zero decision value maps to +1."""
    return np.where(decision_function(spec, model, x) >= 0.0, 1, -1)


# --- datasets -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    points: np.ndarray
    labels: np.ndarray
    train: np.ndarray
    test: np.ndarray
    seed: int


def _split(n: int, rng: np.random.Generator, train_fraction: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
    order = rng.permutation(n)
    cut = int(round(train_fraction * n))
    return np.sort(order[:cut]), np.sort(order[cut:])


def _check_size(n: int) -> None:
    if n < 4:
        raise ValueError(f"need at least 4 points, got {n}")


def gen_half_moons(n: int = 200, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved arcs with Gaussian noise, mapped into [-0.9, 0.9]^2."""
    _check_size(n)
    rng = np.random.default_rng(seed)
    n_upper = n - n // 2
    n_lower = n // 2
    t_upper = rng.uniform(0.0, np.pi, n_upper)
    t_lower = rng.uniform(0.0, np.pi, n_lower)
    upper = np.stack([np.cos(t_upper), np.sin(t_upper)], axis=1)
    lower = np.stack([1.0 - np.cos(t_lower), 0.5 - np.sin(t_lower)], axis=1)
    points = np.concatenate([upper, lower]) + noise * rng.standard_normal((n, 2))
    lo, hi = points.min(axis=0), points.max(axis=0)
    points = -0.9 + 1.8 * (points - lo) / (hi - lo)
    labels = np.concatenate([np.ones(n_upper, int), -np.ones(n_lower, int)])
    train, test = _split(n, rng)
    return Dataset("moons", points, labels, train, test, seed)


def gen_three_lines(n: int = 150, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Horizontal segments at y = -0.5, 0, 0.5 labelled (+1, -1, +1).

    The middle segment gets half the points so both classes are balanced.
    Points are clipped to [-1, 1]^2.
    """
    _check_size(n)
    rng = np.random.default_rng(seed)
    n_mid = n // 2
    n_top = (n - n_mid + 1) // 2
    n_bottom = n - n_mid - n_top
    ys = np.concatenate([np.full(n_bottom, -0.5), np.zeros(n_mid), np.full(n_top, 0.5)])
    labels = np.concatenate([np.ones(n_bottom, int), -np.ones(n_mid, int), np.ones(n_top, int)])
    xs = rng.uniform(-0.8, 0.8, n)
    points = np.stack([xs, ys], axis=1) + noise * rng.standard_normal((n, 2))
    points = np.clip(points, -1.0, 1.0)
    train, test = _split(n, rng)
    return Dataset("lines", points, labels, train, test, seed)


def probe_grid(n_per_row: int = 21, rows: Sequence[float] = (-0.95, -0.85, 0.85, 0.95)) -> np.ndarray:
    """Far-field probe points: horizontal rows above and below the data."""
    xs = np.linspace(-1.0, 1.0, n_per_row)
    return np.array([(x, y) for y in rows for x in xs])


# --- experiment ---------------------------------------------------------------


@dataclass
class KernelScores:
    train_accuracy: float
    test_accuracy: float
    predictions: np.ndarray
    probe_decision: np.ndarray
    probe_flips: int
    probe_flips_any: int
    lam: float


@dataclass
class ClassifyReport:
    dataset: Dataset
    probes: np.ndarray
    probe_reference: np.ndarray
    scores: dict[str, KernelScores] = field(default_factory=dict)


def _nearest_labels(points: np.ndarray, labels: np.ndarray, probes: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(probes[:, None, :] - points[None, :, :], axis=2)
    return labels[np.argmin(d, axis=1)]


def classify_experiment(
    dataset: Dataset,
    kernels: dict[str, KernelSpec] | None = None,
    lam: float = 1e-6,
    probes: np.ndarray | None = None,
    confidence: float = 0.1,
) -> ClassifyReport:
    """Fit every kernel on the training split and score it.

    A probe is a flip when the sign of its decision value disagrees with
    the label of the nearest training point. ``probe_flips`` only counts
    confident flips, ``|f| >= confidence`` (labels are +-1);
    ``probe_flips_any`` counts every nonzero disagreeing decision.
    """
    if kernels is None:
        kernels = {"pptnqfe": PptnqfeKernel(), "angle": AngleKernel()}
    probes = probe_grid() if probes is None else np.asarray(probes, float)
    x_train, y_train = dataset.points[dataset.train], dataset.labels[dataset.train]
    x_test, y_test = dataset.points[dataset.test], dataset.labels[dataset.test]
    reference = _nearest_labels(x_train, y_train, probes)
    report = ClassifyReport(dataset, probes, reference)
    for name, spec in kernels.items():
        model = fit(spec, x_train, y_train, lam)
        dec = decision_function(spec, model, probes)
        wrong = (dec != 0.0) & (np.where(dec >= 0, 1, -1) != reference)
        report.scores[name] = KernelScores(
            train_accuracy=float(np.mean(predict(spec, model, x_train) == y_train)),
            test_accuracy=float(np.mean(predict(spec, model, x_test) == y_test)) if len(y_test) else float("nan"),
            predictions=predict(spec, model, dataset.points),
            probe_decision=dec,
            probe_flips=int(np.sum(wrong & (np.abs(dec) >= confidence))),
            probe_flips_any=int(np.sum(wrong)),
            lam=model.lam,
        )
    return report
