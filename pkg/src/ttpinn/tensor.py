"""Dense multi-way tensors: row-major folding, pairwise contraction, matrix unfolding.

Everything is 64-bit floats in row-major (last axis fastest) order. Tensors are
immutable after construction, so they are safe to share across threads.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np


class SizeError(ValueError):
    """Shape/length mismatch in a tensor operation."""


# Active allocation watchers. Tensor-producing code reports every fresh buffer
# here so tests can assert memory bounds (e.g. "no M*N intermediate is ever
# materialized" during a factorized matvec).
_WATCHERS: list[list[tuple[int, int]]] = []


@contextmanager
def track_allocations():
    """Collect (entry_count, batch_rows) for every tensor allocated inside."""
    log: list[tuple[int, int]] = []
    _WATCHERS.append(log)
    try:
        yield log
    finally:
        _WATCHERS.remove(log)


def note_allocation(entries: int, batch_rows: int = 1) -> None:
    for log in _WATCHERS:
        log.append((entries, batch_rows))


def max_entries_per_row(log: list[tuple[int, int]]) -> int:
    """Largest per-batch-row footprint seen by a watcher (0 if nothing logged)."""
    return max((-(-entries // rows) for entries, rows in log), default=0)


@dataclass(frozen=True)
class DenseTensor:
    """A multi-way array: axis lengths plus a flat row-major data buffer."""

    shape: tuple[int, ...]
    data: np.ndarray  # 1-D float64, read-only, len == prod(shape)

    def __post_init__(self):
        if any(n < 1 for n in self.shape):
            raise SizeError(f"axis lengths must be >= 1, got {self.shape}")
        if self.data.ndim != 1:
            raise SizeError("data buffer must be flat")
        if self.data.size != math.prod(self.shape):
            raise SizeError(
                f"shape {self.shape} needs {math.prod(self.shape)} entries, "
                f"data has {self.data.size}"
            )

    @staticmethod
    def from_array(arr) -> "DenseTensor":
        a = np.ascontiguousarray(arr, dtype=np.float64)
        flat = a.reshape(-1).copy()
        flat.setflags(write=False)
        note_allocation(flat.size)
        return DenseTensor(tuple(a.shape), flat)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def as_array(self) -> np.ndarray:
        """Read-only ndarray view of the tensor."""
        return self.data.reshape(self.shape)

    def flatten(self) -> np.ndarray:
        """The row-major linearization (read-only)."""
        return self.data

    def __getitem__(self, idx) -> float:
        return self.as_array()[idx]


def fold(vector, shape) -> DenseTensor:
    """Fold a flat vector into a tensor of the given shape (row-major).

    fold then flatten is the identity; no arithmetic is performed.
    """
    shape = tuple(int(n) for n in shape)
    vec = np.ascontiguousarray(vector, dtype=np.float64).reshape(-1)
    if vec.size != math.prod(shape):
        raise SizeError(f"cannot fold {vec.size} entries into shape {shape}")
    flat = vec.copy()
    flat.setflags(write=False)
    note_allocation(flat.size)
    return DenseTensor(shape, flat)


def contract(a: DenseTensor, b: DenseTensor, pairs) -> DenseTensor:
    """Contract two tensors along the given (axis_of_a, axis_of_b) pairs.

    The result carries a's unpaired axes (in order) followed by b's unpaired
    axes (in order). An empty pair list yields the outer product.
    """
    pairs = list(pairs)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise SizeError(f"contraction pairs reuse an axis: {pairs}")
    for i, j in pairs:
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise SizeError(f"axis pair ({i},{j}) out of range for {a.shape} x {b.shape}")
        if a.shape[i] != b.shape[j]:
            raise SizeError(
                f"paired axes disagree: a.shape[{i}]={a.shape[i]} vs b.shape[{j}]={b.shape[j]}"
            )
    out = np.tensordot(a.as_array(), b.as_array(), axes=(ax_a, ax_b))
    return DenseTensor.from_array(out)


def unfold_matrix(w: DenseTensor, d: int) -> np.ndarray:
    """Unfold a 2d-way tensor (m_1..m_d, n_1..n_d) into its M x N matrix.

    Pure index permutation (here: a reshape, since the folding is row-major);
    inverse of folding a matrix into its factor axes.
    """
    if w.ndim != 2 * d:
        raise SizeError(f"expected a {2 * d}-way tensor for d={d}, got {w.ndim}-way")
    m_dim = math.prod(w.shape[:d])
    n_dim = math.prod(w.shape[d:])
    return w.as_array().reshape(m_dim, n_dim)
