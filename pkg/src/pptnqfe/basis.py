"""Uniform 1D grids on [-1, 1] and piecewise-linear hat functions.

Two node layouts are supported. ``GridKind.CLOSED`` places the first and
last node on the domain boundary. ``GridKind.INTERIOR`` keeps every node
strictly inside the domain; the outermost hats ramp down to zero at -1 and
+1, which is what homogeneous Dirichlet problems need.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridKind",
    "Transform",
    "Grid",
    "DomainError",
    "locate_interval",
    "eval_hat",
    "eval_all",
    "eval_feature_pair",
    "norm_nphi",
]


class DomainError(ValueError):
    """Raised when a feature value lies outside [-1, 1]."""


class GridKind(enum.Enum):
    CLOSED = "closed"
    INTERIOR = "interior"


class Transform(enum.Enum):
    """Pointwise map applied to the hat values before they become amplitudes."""

    LINEAR = "linear"
    SQRT_HAT = "sqrt"

    def __call__(self, value: float) -> float:
        if self is Transform.SQRT_HAT:
            return math.sqrt(value)
        return value


@dataclass(frozen=True)
class Grid:
    """Uniform node layout with ``2**n_qubits`` nodes."""

    n_qubits: int
    kind: GridKind = GridKind.CLOSED

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")

    @property
    def N(self) -> int:  # noqa: N802
        return 1 << self.n_qubits

    @property
    def spacing(self) -> float:
        if self.kind is GridKind.CLOSED:
            return 2.0 / (self.N - 1)
        return 2.0 / (self.N + 1)

    @property
    def _offset(self) -> int:
        return 0 if self.kind is GridKind.CLOSED else 1

    def node(self, k: int) -> float:
        """Node position; ``k = -1`` and ``k = N`` give the virtual neighbours."""
        return -1.0 + (k + self._offset) * self.spacing

    def nodes(self) -> np.ndarray:
        return np.array([self.node(k) for k in range(self.N)])


def _check_domain(x: float) -> None:
    if not (-1.0 <= x <= 1.0):
        raise DomainError(f"feature value {x!r} outside [-1, 1]")


def locate_interval(grid: Grid, x: float) -> int:
    """Return k in [0, N-2] with node(k) <= x < node(k+1), clamped at both ends."""
    _check_domain(x)
    N = grid.N
    if N == 2:
        return 0
    k = math.floor((x + 1.0) / grid.spacing) - grid._offset
    k = min(max(k, 0), N - 2)
    # the floor above can be off by one when x sits on a node
    if k < N - 2 and x >= grid.node(k + 1):
        k += 1
    elif k > 0 and x < grid.node(k):
        k -= 1
    return k


def _local_pair(grid: Grid, x: float) -> tuple[int, float, float]:
    k = locate_interval(grid, x)
    if grid.kind is GridKind.INTERIOR and abs(x) == 1.0:
        return k, 0.0, 0.0
    left, right = grid.node(k), grid.node(k + 1)
    # beyond the outer nodes only the interior-grid ramps (and the closed right end) remain
    if x >= right:
        return k, 0.0, max(0.0, 1.0 - (x - right) / grid.spacing)
    if x < left:
        return k, max(0.0, 1.0 - (left - x) / grid.spacing), 0.0
    s = (x - left) / grid.spacing
    return k, 1.0 - s, s


def eval_hat(grid: Grid, k: int, x: float) -> float:
    if not 0 <= k < grid.N:
        raise IndexError(f"hat index {k} out of range for N={grid.N}")
    j, a, b = _local_pair(grid, x)
    if k == j:
        return a
    if k == j + 1:
        return b
    return 0.0


def eval_all(grid: Grid, x: float, transform: Transform = Transform.LINEAR) -> np.ndarray:
    """Dense basis vector ``(phi_0(x), ..., phi_{N-1}(x))``."""
    return np.array([transform(eval_hat(grid, k, x)) for k in range(grid.N)])


def eval_feature_pair(
    grid: Grid, transform: Transform, x: float
) -> tuple[int, float, float]:
    """Interval index and the two possibly nonzero basis values at ``x``.

    Returns ``(k, phi_k(x), phi_{k+1}(x))``; every other basis function
    vanishes at ``x``.
    """
    k, a, b = _local_pair(grid, x)
    return k, transform(a), transform(b)


def norm_nphi(grid: Grid, transform: Transform, x: float) -> float:
    """Euclidean norm of the basis vector at ``x``.

    Zero at the boundary of an interior grid; callers treat that as "no
    feature state here".
    """
    _, a, b = eval_feature_pair(grid, transform, x)
    return math.hypot(a, b)
