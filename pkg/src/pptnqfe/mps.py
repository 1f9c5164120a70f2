"""Matrix product states with open boundary conditions.

Cores are order-3 complex arrays of shape ``(r_left, 2, r_right)``. Site 0
carries the most significant bit of the dense index.
"""

from __future__ import annotations

import enum
import io
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TextIO

import numpy as np

__all__ = [
    "MPS",
    "SiteOrdering",
    "DENSE_MAX_SITES",
    "contract_dense",
    "tensor_product",
    "reorder",
    "swap_adjacent",
    "max_rank",
    "canonicalize",
    "transposed_permutation",
    "dump",
    "dumps",
    "load",
    "loads",
]

DENSE_MAX_SITES = 20

# relative singular-value cutoff used when a swap has to re-split two sites;
# only removes numerically vanishing directions, never real weight
_SVD_RTOL = 1e-14


@dataclass(frozen=True, eq=False)
class MPS:
    cores: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        cores = tuple(np.array(c, dtype=np.complex128) for c in self.cores)
        for j, c in enumerate(cores):
            if c.ndim != 3 or c.shape[1] != 2:
                raise ValueError(f"core {j} has shape {c.shape}, expected (r, 2, r')")
            c.setflags(write=False)
        if cores:
            if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
                raise ValueError("open boundary conditions require r_0 = r_n = 1")
            for j in range(len(cores) - 1):
                if cores[j].shape[2] != cores[j + 1].shape[0]:
                    raise ValueError(
                        f"rank mismatch between cores {j} and {j + 1}: "
                        f"{cores[j].shape} vs {cores[j + 1].shape}"
                    )
        object.__setattr__(self, "cores", cores)

    @property
    def n_sites(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        """Bond dimensions ``(r_0, ..., r_n)``."""
        if not self.cores:
            return (1,)
        return tuple(c.shape[0] for c in self.cores) + (1,)

    def norm(self) -> float:
        """2-norm computed by transfer-matrix contraction (no dense vector)."""
        env = np.ones((1, 1), dtype=np.complex128)
        for c in self.cores:
            env = np.einsum("ab,asc,bsd->cd", env, c, c.conj())
        return float(np.sqrt(max(env[0, 0].real, 0.0)))

    def scaled(self, factor: complex) -> MPS:
        if not self.cores:
            raise ValueError("cannot scale an empty MPS")
        cores = list(self.cores)
        cores[-1] = cores[-1] * factor
        return MPS(tuple(cores))

    def to_dense(self) -> np.ndarray:
        return contract_dense(self)

    def __len__(self) -> int:
        return self.n_sites

    def __repr__(self) -> str:
        return f"MPS(n_sites={self.n_sites}, ranks={self.ranks})"


class SiteOrdering(enum.Enum):
    CANONICAL = "canonical"
    TRANSPOSED = "transposed"


def contract_dense(mps: MPS) -> np.ndarray:
    """Dense amplitude vector of length ``2**n`` (Big-Endian)."""
    if mps.n_sites > DENSE_MAX_SITES:
        raise MemoryError(
            f"refusing to materialise 2**{mps.n_sites} amplitudes "
            f"(limit is {DENSE_MAX_SITES} sites)"
        )
    vec = np.ones((1, 1), dtype=np.complex128)
    for c in mps.cores:
        r_left, _, r_right = c.shape
        vec = (vec @ c.reshape(r_left, 2 * r_right)).reshape(-1, r_right)
    return vec.reshape(-1)


def tensor_product(a: MPS, b: MPS) -> MPS:
    """Kronecker product: the sites of ``a`` followed by the sites of ``b``."""
    return MPS(a.cores + b.cores)


def max_rank(mps: MPS) -> int:
    return max(mps.ranks)


def swap_adjacent(mps: MPS, j: int) -> MPS:
    """Exchange sites ``j`` and ``j + 1``; the shared bond is re-split by SVD."""
    if not 0 <= j < mps.n_sites - 1:
        raise IndexError(f"cannot swap sites {j}, {j + 1} of a {mps.n_sites}-site MPS")
    left, right = mps.cores[j], mps.cores[j + 1]
    rl, rr = left.shape[0], right.shape[2]
    theta = np.einsum("asb,btc->atsc", left, right).reshape(rl * 2, 2 * rr)
    u, s, vh = np.linalg.svd(theta, full_matrices=False)
    keep = 1 if s[0] == 0 else int(np.sum(s > _SVD_RTOL * s[0]))
    u, s, vh = u[:, :keep], s[:keep], vh[:keep]
    cores = list(mps.cores)
    cores[j] = u.reshape(rl, 2, keep)
    cores[j + 1] = (s[:, None] * vh).reshape(keep, 2, rr)
    return MPS(tuple(cores))


def _validate_permutation(perm: Sequence[int], n: int) -> list[int]:
    perm = [int(p) for p in perm]
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} sites")
    return perm


def transposed_permutation(sites_per_feature: Sequence[int]) -> list[int]:
    """Round-robin interleaving of feature blocks.

    For three features with ``n`` sites each this gives the order
    ``x_0, y_0, z_0, x_1, y_1, z_1, ...``. Features with fewer sites drop
    out of the rotation once exhausted.
    """
    offsets = np.concatenate([[0], np.cumsum(sites_per_feature)[:-1]]).astype(int)
    perm = []
    for level in range(max(sites_per_feature, default=0)):
        for f, n_f in enumerate(sites_per_feature):
            if level < n_f:
                perm.append(int(offsets[f]) + level)
    return perm


def reorder(mps: MPS, perm: Sequence[int]) -> MPS:
    """Permute sites so that new site ``i`` is old site ``perm[i]``.

    Realised as a sequence of adjacent swaps (bubble sort), so bond
    dimensions grow only as much as the permuted state actually needs.
    """
    perm = _validate_permutation(perm, mps.n_sites)
    # current[i] = old site sitting at position i
    current = list(range(mps.n_sites))
    target_rank = {old: new for new, old in enumerate(perm)}
    out = mps
    n = mps.n_sites
    for sweep in range(n):
        swapped = False
        for j in range(n - 1 - sweep):
            if target_rank[current[j]] > target_rank[current[j + 1]]:
                out = swap_adjacent(out, j)
                current[j], current[j + 1] = current[j + 1], current[j]
                swapped = True
        if not swapped:
            break
    return out


def _qr_positive(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q, r = np.linalg.qr(mat)
    d = np.diag(r)
    phase = np.ones_like(d)
    nz = np.abs(d) > 0
    phase[nz] = d[nz] / np.abs(d[nz])
    return q * phase[None, :], phase.conj()[:, None] * r


def canonicalize(mps: MPS, direction: str = "right") -> MPS:
    """Bring every core but one into isometric form.

    ``direction="left"``: sweep left to right, cores 0..n-2 become left
    isometries (``sum_{a,s} C[a,s,b] conj(C[a,s,b']) = delta``) and the
    norm ends up in the last core. ``direction="right"``: sweep right to
    left, cores 1..n-1 become right isometries and the norm ends up in
    core 0. QR diagonals are made real-positive so the result is unique
    for full-rank bonds.
    """
    if direction not in ("left", "right"):
        raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
    cores = [c.copy() for c in mps.cores]
    n = len(cores)
    if direction == "left":
        for j in range(n - 1):
            rl, _, rr = cores[j].shape
            q, r = _qr_positive(cores[j].reshape(rl * 2, rr))
            cores[j] = q.reshape(rl, 2, q.shape[1])
            cores[j + 1] = np.tensordot(r, cores[j + 1], axes=(1, 0))
    else:
        for j in range(n - 1, 0, -1):
            rl, _, rr = cores[j].shape
            q, r = _qr_positive(cores[j].reshape(rl, 2 * rr).conj().T)
            cores[j] = q.conj().T.reshape(q.shape[1], 2, rr)
            cores[j - 1] = np.tensordot(cores[j - 1], r.conj().T, axes=(2, 0))
    return MPS(tuple(cores))


# --- text serialisation ------------------------------------------------------
#
#   MPS <n_sites>
#   CORE <j> <r_left> 2 <r_right>
#   <re> <im>            one line per entry, row-major over (a, s, b)
#   ...
#   END


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def dump(mps: MPS, fh: TextIO) -> None:
    fh.write(f"MPS {mps.n_sites}\n")
    for j, c in enumerate(mps.cores):
        rl, d, rr = c.shape
        fh.write(f"CORE {j} {rl} {d} {rr}\n")
        for v in c.reshape(-1):
            fh.write(f"{_fmt(v.real)} {_fmt(v.imag)}\n")
    fh.write("END\n")


def dumps(mps: MPS) -> str:
    buf = io.StringIO()
    dump(mps, buf)
    return buf.getvalue()


def loads(text: str) -> MPS:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("MPS "):
        raise ValueError("missing MPS header")
    n_sites = int(lines[0].split()[1])
    pos = 1
    cores = []
    for j in range(n_sites):
        tag, idx, rl, d, rr = lines[pos].split()
        if tag != "CORE" or int(idx) != j:
            raise ValueError(f"malformed core header at line {pos + 1}: {lines[pos]!r}")
        shape = (int(rl), int(d), int(rr))
        size = shape[0] * shape[1] * shape[2]
        vals = [complex(float(re), float(im)) for re, im in (ln.split() for ln in lines[pos + 1 : pos + 1 + size])]
        if len(vals) != size:
            raise ValueError(f"core {j}: expected {size} entries, found {len(vals)}")
        cores.append(np.array(vals, dtype=np.complex128).reshape(shape))
        pos += 1 + size
    if pos >= len(lines) or lines[pos] != "END":
        raise ValueError("missing END marker")
    return MPS(tuple(cores))


def load(fh: TextIO) -> MPS:
    return loads(fh.read())
