"""Tensor-train factorized linear layers.

A weight matrix W (M x N) is folded into a 2d-way tensor over factorizations
M = m_1*...*m_d and N = n_1*...*n_d and approximated by a chain of 2d three-way
cores G_k of shape (r_{k-1}, f_k, r_k) with r_0 = r_{2d} = 1: entry
(i_1..i_d, j_1..j_d) is the chained product of core slices
G_1[:, i_1, :] ... G_d[:, i_d, :] G_{d+1}[:, j_1, :] ... G_{2d}[:, j_d, :].

The matvec never rebuilds W. It runs a three-step contraction sequence against
the folded input: (1) contract the folded vector with the last core, (2) absorb
the remaining column cores one by one, last to first, shedding one column axis
per step until only a length-r_d vector is left, (3) absorb the row cores from
G_d down to G_1, growing the output axes to m_1..m_d. Peak intermediate size is
O(r * N) + O(r * M) instead of O(M * N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import DenseTensor, SizeError, contract, note_allocation


@dataclass
class TTLinear:
    """A TT-factorized linear map with a dense bias."""

    row_factors: tuple[int, ...]  # (m_1..m_d)
    col_factors: tuple[int, ...]  # (n_1..n_d)
    ranks: tuple[int, ...]        # (r_0..r_2d), r_0 == r_2d == 1
    cores: list[np.ndarray]       # 2d cores, cores[k]: (ranks[k], f_k, ranks[k+1])
    bias: np.ndarray              # (M,)

    def __post_init__(self):
        self.row_factors = tuple(int(m) for m in self.row_factors)
        self.col_factors = tuple(int(n) for n in self.col_factors)
        self.ranks = tuple(int(r) for r in self.ranks)
        self.validate()

    @property
    def d(self) -> int:
        return len(self.row_factors)

    @property
    def m_dim(self) -> int:
        return math.prod(self.row_factors)

    @property
    def n_dim(self) -> int:
        return math.prod(self.col_factors)

    def validate(self) -> None:
        d = self.d
        if len(self.col_factors) != d:
            raise SizeError(
                f"row/col factorizations disagree: {len(self.row_factors)} vs {len(self.col_factors)} factors"
            )
        if len(self.ranks) != 2 * d + 1:
            raise SizeError(f"need {2 * d + 1} ranks for d={d}, got {len(self.ranks)}")
        if self.ranks[0] != 1 or self.ranks[-1] != 1:
            raise SizeError(f"boundary ranks must be 1, got r0={self.ranks[0]}, r2d={self.ranks[-1]}")
        if len(self.cores) != 2 * d:
            raise SizeError(f"need {2 * d} cores, got {len(self.cores)}")
        factors = self.row_factors + self.col_factors
        for k, core in enumerate(self.cores):
            want = (self.ranks[k], factors[k], self.ranks[k + 1])
            if core.shape != want:
                raise SizeError(f"core {k} has shape {core.shape}, expected {want}")
        if self.bias.shape != (self.m_dim,):
            raise SizeError(f"bias has shape {self.bias.shape}, expected ({self.m_dim},)")


def tt_param_count(layer: TTLinear) -> int:
    """Number of weight entries stored in the cores (bias excluded)."""
    return sum(core.size for core in layer.cores)


@dataclass(frozen=True)
class RankPlan:
    target_compression: float
    chosen_ranks: tuple[int, ...]
    per_layer_params: int
    achieved_compression: float


def _uniform_rank_count(row_factors, col_factors, r: int) -> int:
    d = len(row_factors)
    ranks = (1,) + (r,) * (2 * d - 1) + (1,)
    factors = tuple(row_factors) + tuple(col_factors)
    return sum(ranks[k] * factors[k] * ranks[k + 1] for k in range(2 * d))


def plan_ranks(m_dim: int, n_dim: int, row_factors, col_factors, target: float) -> RankPlan:
    """Pick the uniform TT-rank whose compression ratio is nearest the target.

    "Nearest" is measured in log space; ties go to the smaller rank (higher
    compression). Raises if no uniform rank lands within [0.5, 2]x of the
    target, e.g. when the target exceeds what rank 1 can deliver.
    """
    row_factors = tuple(int(m) for m in row_factors)
    col_factors = tuple(int(n) for n in col_factors)
    if math.prod(row_factors) != m_dim or math.prod(col_factors) != n_dim:
        raise SizeError(
            f"factorizations {row_factors} x {col_factors} do not match {m_dim} x {n_dim}"
        )
    if target < 1.0:
        raise ValueError(f"compression target must be >= 1, got {target}")
    dense = m_dim * n_dim
    best_r, best_gap = 1, float("inf")
    for r in range(1, min(m_dim, n_dim) + 1):
        achieved = dense / _uniform_rank_count(row_factors, col_factors, r)
        gap = abs(math.log(achieved / target))
        if gap < best_gap:
            best_r, best_gap = r, gap
        if achieved < target:
            break  # compression only shrinks from here
    count = _uniform_rank_count(row_factors, col_factors, best_r)
    d = len(row_factors)
    plan = RankPlan(
        target_compression=float(target),
        chosen_ranks=(1,) + (best_r,) * (2 * d - 1) + (1,),
        per_layer_params=count,
        achieved_compression=dense / count,
    )
    if not (0.5 * target <= plan.achieved_compression <= 2.0 * target):
        raise ValueError(
            f"target compression {target}x is infeasible for factors "
            f"{row_factors} x {col_factors}: best uniform rank {best_r} "
            f"achieves {plan.achieved_compression:.1f}x"
        )
    return plan


def tt_init_core_std(m_dim: int, n_dim: int, ranks) -> float:
    """Per-core i.i.d. std so reconstructed entries have Xavier variance.

    An entry of the reconstruction is a sum over prod(r_1..r_{2d-1}) rank paths,
    each a product of 2d independent draws; matching its variance to
    v_W = 2/(M+N) gives sigma = (v_W / prod(r_k))^(1/(4d)).
    """
    d2 = len(ranks) - 1  # == 2d
    v_w = 2.0 / (m_dim + n_dim)
    path_count = math.prod(ranks[1:-1])
    return float((v_w / path_count) ** (1.0 / (2 * d2)))


def tt_init(row_factors, col_factors, ranks, seed_or_rng) -> TTLinear:
    """Gaussian-initialized TT layer: cores i.i.d. N(0, sigma^2), bias zero."""
    rng = np.random.default_rng(seed_or_rng) if isinstance(seed_or_rng, int) else seed_or_rng
    row_factors = tuple(int(m) for m in row_factors)
    col_factors = tuple(int(n) for n in col_factors)
    ranks = tuple(int(r) for r in ranks)
    factors = row_factors + col_factors
    sigma = tt_init_core_std(math.prod(row_factors), math.prod(col_factors), ranks)
    cores = [
        rng.normal(0.0, sigma, size=(ranks[k], factors[k], ranks[k + 1]))
        for k in range(len(factors))
    ]
    bias = np.zeros(math.prod(row_factors))
    return TTLinear(row_factors, col_factors, ranks, cores, bias)


# --------------------------------------------------------------------------- #
# Contraction engine. Every step is a single GEMM: OUT = IN.reshape(-1, K) @ G'
# with G' a transposed-reshaped core, so the batch axis stays leading and all
# buffers stay contiguous. Column steps (absorbing G_2d..G_{d+1}) contract the
# trailing (n_j, r) axes; row steps (G_d..G_1) contract the trailing rank axis
# and append (m_k, r_{k-1}). Row axes accumulate in reverse order and a single
# final transpose restores m_1-major layout.
# --------------------------------------------------------------------------- #


def _col_step_matrix(core: np.ndarray) -> np.ndarray:
    rl, nj, rr = core.shape
    return core.transpose(1, 2, 0).reshape(nj * rr, rl)


def _row_step_matrix(core: np.ndarray) -> np.ndarray:
    rl, mk, rr = core.shape
    return core.transpose(2, 1, 0).reshape(rr, mk * rl)


def tt_matvec_forward(layer: TTLinear, z2d: np.ndarray):
    """Batched factorized matvec: (B, N) -> (B, M), plus cached step inputs.

    The caches hold the input of every contraction step (the folded vector and
    the intermediates), in forward order, for the reverse sweep.
    """
    d = layer.d
    batch = z2d.shape[0]
    if z2d.shape[1] != layer.n_dim:
        raise SizeError(f"input length {z2d.shape[1]} != {layer.n_dim}")
    caches = []
    # Step 1 and 2: eliminate column factors n_d .. n_1, last core first.
    cur = z2d.reshape(batch, *layer.col_factors)
    for k in range(2 * d - 1, d - 1, -1):
        core = layer.cores[k]
        rl, nj, rr = core.shape
        caches.append(cur)
        cur = (cur.reshape(-1, nj * rr) @ _col_step_matrix(core)).reshape(
            (batch,) + layer.col_factors[: k - d] + (rl,)
        )
        note_allocation(cur.size, batch)
    # cur is now (B, r_d).
    # Step 3: absorb row cores G_d .. G_1; row axes come out reversed.
    for k in range(d - 1, -1, -1):
        core = layer.cores[k]
        rl, mk, rr = core.shape
        caches.append(cur)
        cur = (cur.reshape(-1, rr) @ _row_step_matrix(core)).reshape(
            (batch,) + layer.row_factors[: k: -1] + (mk, rl)
        )
        note_allocation(cur.size, batch)
    perm = (0,) + tuple(range(d, 0, -1))
    out = np.ascontiguousarray(cur.reshape((batch,) + layer.row_factors[::-1]).transpose(perm))
    note_allocation(out.size, batch)
    return out.reshape(batch, layer.m_dim), caches


def tt_matvec_vjp_batched(layer: TTLinear, caches, upstream2d: np.ndarray):
    """Reverse sweep of the contraction sequence.

    Returns (core gradients in core order, input gradient (B, N)). Gradients
    accumulate over the batch rows; no M x N buffer is formed.
    """
    d = layer.d
    batch = upstream2d.shape[0]
    perm = (0,) + tuple(range(d, 0, -1))  # involution
    cur = np.ascontiguousarray(
        upstream2d.reshape((batch,) + layer.row_factors).transpose(perm)
    )
    note_allocation(cur.size, batch)
    core_grads: list[np.ndarray | None] = [None] * (2 * d)
    ci = len(caches)
    # Undo row steps, G_1 up to G_d.
    for k in range(d):
        core = layer.cores[k]
        rl, mk, rr = core.shape
        ci -= 1
        inp = caches[ci]
        up = cur.reshape(-1, mk * rl)
        g = inp.reshape(-1, rr).T @ up  # (rr, mk*rl)
        core_grads[k] = g.reshape(rr, mk, rl).transpose(2, 1, 0)
        cur = (up @ _row_step_matrix(core).T).reshape(inp.shape)
        note_allocation(cur.size, batch)
    # Undo column steps, G_{d+1} up to G_{2d}.
    for k in range(d, 2 * d):
        core = layer.cores[k]
        rl, nj, rr = core.shape
        ci -= 1
        inp = caches[ci]
        up = cur.reshape(-1, rl)
        g = inp.reshape(-1, nj * rr).T @ up  # (nj*rr, rl)
        core_grads[k] = g.reshape(nj, rr, rl).transpose(2, 0, 1)
        cur = (up @ _col_step_matrix(core).T).reshape(inp.shape)
        note_allocation(cur.size, batch)
    return core_grads, cur.reshape(batch, layer.n_dim)


# --------------------------------------------------------------------------- #
# Batched fast path. Reassociating the same contraction sequence, the column
# cores collapse (last to first) into C = (r_d, N) and the row cores (first to
# last) into A = (M, r_d), so a batched matvec is two GEMMs: (Z @ C^T) @ A^T.
# Values are identical to the stepwise sweep; peak extra memory is
# O((M + N) r_d), still nowhere near M*N. The stepwise form above remains the
# reference semantics and the per-vector entry point.
# --------------------------------------------------------------------------- #


def _build_halves(layer: TTLinear, with_parts: bool = False):
    d = layer.d
    cores = layer.cores
    col_parts = []
    c = cores[2 * d - 1].reshape(layer.ranks[2 * d - 1], layer.col_factors[-1])
    for k in range(2 * d - 2, d - 1, -1):
        col_parts.append(c)
        g = cores[k]
        rl, nj, rr = g.shape
        c = (g.reshape(rl * nj, rr) @ c).reshape(rl, -1)
    a = cores[0].reshape(layer.row_factors[0], layer.ranks[1])
    row_parts = []
    for k in range(1, d):
        row_parts.append(a)
        g = cores[k]
        rl, mk, rk = g.shape
        a = (a @ g.reshape(rl, mk * rk)).reshape(-1, rk)
    note_allocation(a.size)
    note_allocation(c.size)
    return (a, c, row_parts, col_parts) if with_parts else (a, c)


def tt_halves_forward(layer: TTLinear, z2d: np.ndarray):
    """Batched matvec via the collapsed halves: (B, N) -> (B, M), plus caches."""
    a, c, row_parts, col_parts = _build_halves(layer, with_parts=True)
    y = z2d @ c.T
    out = y @ a.T
    note_allocation(y.size, z2d.shape[0])
    note_allocation(out.size, z2d.shape[0])
    return out, (z2d, y, a, c, row_parts, col_parts)


def tt_halves_vjp(layer: TTLinear, caches, up2d: np.ndarray):
    """Reverse sweep of the halves path: core gradients plus input gradient."""
    z2d, y, a, c, row_parts, col_parts = caches
    d = layer.d
    dy = up2d @ a          # (B, r_d)
    da = up2d.T @ y        # (M, r_d)
    dz = dy @ c            # (B, N)
    dc = dy.T @ z2d        # (r_d, N)
    note_allocation(dy.size, up2d.shape[0])
    note_allocation(dz.size, up2d.shape[0])
    note_allocation(da.size)
    note_allocation(dc.size)
    core_grads: list[np.ndarray | None] = [None] * (2 * d)
    cur = da
    for k in range(d - 1, 0, -1):
        g = layer.cores[k]
        rl, mk, rk = g.shape
        prev = row_parts[k - 1]  # (P, rl)
        cur2 = cur.reshape(prev.shape[0], mk * rk)
        core_grads[k] = (prev.T @ cur2).reshape(rl, mk, rk)
        cur = cur2 @ g.reshape(rl, mk * rk).T
    core_grads[0] = cur.reshape(layer.cores[0].shape)
    cur = dc
    for idx in range(len(col_parts) - 1, -1, -1):
        k = 2 * d - 2 - idx
        g = layer.cores[k]
        rl, nj, rr = g.shape
        prev = col_parts[idx]  # (rr, R)
        cur2 = cur.reshape(rl * nj, prev.shape[1])
        core_grads[k] = (cur2 @ prev.T).reshape(rl, nj, rr)
        cur = g.reshape(rl * nj, rr).T @ cur2
    core_grads[2 * d - 1] = cur.reshape(layer.cores[2 * d - 1].shape)
    return core_grads, dz


def tt_matvec(layer: TTLinear, z: np.ndarray) -> np.ndarray:
    """Factorized matvec for a single vector: returns W @ z (bias not added)."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise SizeError(f"expected a vector, got shape {z.shape}")
    out, _ = tt_matvec_forward(layer, z[None, :])
    return out[0]


def tt_matvec_vjp(layer: TTLinear, z: np.ndarray, upstream: np.ndarray):
    """Vector-Jacobian products of tt_matvec w.r.t. every core and the input."""
    z = np.asarray(z, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if z.shape != (layer.n_dim,) or upstream.shape != (layer.m_dim,):
        raise SizeError(
            f"got z {z.shape}, upstream {upstream.shape}; expected ({layer.n_dim},), ({layer.m_dim},)"
        )
    _, caches = tt_matvec_forward(layer, z[None, :])
    core_grads, z_grad = tt_matvec_vjp_batched(layer, caches, upstream[None, :])
    return core_grads, z_grad[0]


def reconstruct(layer: TTLinear) -> DenseTensor:
    """Rebuild the full 2d-way weight tensor from the cores (test oracle only).

    Entry (i_1..i_d, j_1..j_d) is the chained slice product over all cores.
    Never called during training.
    """
    cur = contract(
        DenseTensor.from_array(layer.cores[0]),
        DenseTensor.from_array(layer.cores[1]),
        pairs=[(2, 0)],
    )
    for core in layer.cores[2:]:
        cur = contract(cur, DenseTensor.from_array(core), pairs=[(cur.ndim - 1, 0)])
    # shape (1, f_1 .. f_2d, 1) -> (f_1 .. f_2d)
    arr = cur.as_array().reshape(layer.row_factors + layer.col_factors)
    return DenseTensor.from_array(arr)


def dense_matrix(layer: TTLinear) -> np.ndarray:
    """Convenience oracle: the reconstructed M x N matrix."""
    from .tensor import unfold_matrix

    return unfold_matrix(reconstruct(layer), layer.d)
