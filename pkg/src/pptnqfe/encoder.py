"""Piecewise-linear feature states as rank-2 matrix product states."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .basis import Grid, GridKind, Transform, eval_feature_pair, norm_nphi
from .mps import (
    MPS,
    SiteOrdering,
    contract_dense,
    reorder,
    tensor_product,
    transposed_permutation,
)

__all__ = [
    "FeatureEncoding",
    "ZeroStateError",
    "bits",
    "least_significant_zero",
    "encode_1d",
    "encode_nd",
    "encode_state",
    "feature_vector",
]


class ZeroStateError(ValueError):
    """The feature vector vanishes (interior grid evaluated on the boundary)."""


@dataclass(frozen=True)
class FeatureEncoding:
    grid: Grid
    transform: Transform = Transform.SQRT_HAT

    @property
    def n_qubits(self) -> int:
        return self.grid.n_qubits

    @classmethod
    def closed(cls, n_qubits: int, transform: Transform = Transform.SQRT_HAT) -> FeatureEncoding:
        return cls(Grid(n_qubits, GridKind.CLOSED), transform)

    @classmethod
    def interior(cls, n_qubits: int, transform: Transform = Transform.LINEAR) -> FeatureEncoding:
        return cls(Grid(n_qubits, GridKind.INTERIOR), transform)


def bits(k: int, n: int) -> list[int]:
    """Big-Endian binary digits ``i_0 ... i_{n-1}`` of ``k``."""
    return [(k >> (n - 1 - j)) & 1 for j in range(n)]


def least_significant_zero(k: int, n: int) -> int:
    """Site index ``j*`` of the least significant 0-bit of ``k``."""
    for j in range(n - 1, -1, -1):
        if not (k >> (n - 1 - j)) & 1:
            return j
    raise ValueError(f"{k} has no zero bit in {n} digits")


def _selector(bit: int) -> np.ndarray:
    core = np.zeros((1, 2, 1))
    core[0, bit, 0] = 1.0
    return core


def _one_hot(k: int, n: int, value: float) -> list[np.ndarray]:
    cores = [_selector(i) for i in bits(k, n)]
    cores[-1] = cores[-1] * value
    return cores


def _cores_for_pair(k: int, a: float, b: float, n: int) -> list[np.ndarray]:
    if a == 0.0 and b != 0.0:
        return _one_hot(k + 1, n, b)
    if b == 0.0:
        return _one_hot(k, n, a)
    digits = bits(k, n)
    if k % 2 == 0:
        # k and k+1 differ in the last digit only
        cores = [_selector(i) for i in digits[:-1]]
        last = np.zeros((1, 2, 1))
        last[0, 0, 0], last[0, 1, 0] = a, b
        return cores + [last]

    j_star = least_significant_zero(k, n)
    cores = [_selector(i) for i in digits[:j_star]]
    branch = np.zeros((1, 2, 2))
    branch[0, 0, 1] = 1.0  # k continues with ones
    branch[0, 1, 0] = 1.0  # k+1 continues with zeros
    cores.append(branch)
    for _ in range(j_star + 1, n - 1):
        copy = np.zeros((2, 2, 2))
        copy[0, 0, 0] = 1.0
        copy[1, 1, 1] = 1.0
        cores.append(copy)
    last = np.zeros((2, 2, 1))
    last[0, 0, 0] = b
    last[1, 1, 0] = a
    cores.append(last)
    return cores


def encode_1d(enc: FeatureEncoding, x: float) -> MPS:
    """Unnormalised basis vector ``(phi_0(x), ..., phi_{N-1}(x))`` as an MPS.

    Bond dimension is 2 only when both neighbouring basis values are
    nonzero and the interval index is odd; otherwise every bond is 1. On an
    interior grid at x = +-1 the result is the zero state; its ``norm()`` is
    0 and the circuit compiler rejects it.
    """
    k, a, b = eval_feature_pair(enc.grid, enc.transform, x)
    return MPS(tuple(_cores_for_pair(k, a, b, enc.n_qubits)))


def encode_nd(
    encs: Sequence[FeatureEncoding],
    xs: Sequence[float],
    ordering: SiteOrdering = SiteOrdering.CANONICAL,
) -> MPS:
    if len(encs) != len(xs):
        raise ValueError(f"{len(encs)} encodings for {len(xs)} feature values")
    out = MPS(())
    for enc, x in zip(encs, xs):
        out = tensor_product(out, encode_1d(enc, x))
    if ordering is SiteOrdering.TRANSPOSED:
        out = reorder(out, transposed_permutation([e.n_qubits for e in encs]))
    return out


def feature_vector(enc: FeatureEncoding, x: float) -> np.ndarray:
    """Dense unnormalised feature vector, built straight from the sparse pair."""
    k, a, b = eval_feature_pair(enc.grid, enc.transform, x)
    vec = np.zeros(enc.grid.N)
    vec[k], vec[k + 1] = a, b
    return vec


def encode_state(enc: FeatureEncoding, x: float) -> tuple[np.ndarray, float]:
    """Normalised dense state and the norm it was divided by."""
    n_phi = norm_nphi(enc.grid, enc.transform, x)
    if n_phi == 0.0:
        raise ZeroStateError(f"feature vector vanishes at x={x!r}")
    return contract_dense(encode_1d(enc, x)) / n_phi, n_phi
