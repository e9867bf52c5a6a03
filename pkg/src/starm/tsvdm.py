"""Facewise tensor products and the slicewise-SVD compression entry points.

Everything here works through the same three steps: move the tensor into
the transform domain, act on the frontal slices independently, move back.
Compression truncates each slice's SVD, either to a uniform rank or to
per-slice ranks chosen by a global energy threshold.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass
from math import prod

import numpy as np
from threadpoolctl import threadpool_limits

from .parallel import run_chunked
from .slicesvd import (
    SLICES_PARALLEL,
    SliceSVDSet,
    VariableRankFactors,
    _truncated_from_cache,
    _values_pass,
    svd_all_slices,
    svd_truncated_slices,
)
from .tensor import DenseTensor
from .transforms import CUSTOM, DATA_DRIVEN, TransformSet
from .ttm import BATCHED, from_transform_domain, to_transform_domain

TRUNCATE = "truncate"
COMPUTE_EFFICIENT = "compute-efficient"
MEMORY_EFFICIENT = "memory-efficient"
TOLERANCE_STRATEGIES = (TRUNCATE, COMPUTE_EFFICIENT, MEMORY_EFFICIENT)

METHOD_FIXED_RANK = "tsvdm1"
METHOD_TOLERANCE = "tsvdm2"


class StageClock:
    """Accumulates wall-clock seconds per named pipeline stage."""

    def __init__(self):
        self.seconds = {}

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = (
                self.seconds.get(name, 0.0) + time.perf_counter() - start
            )

    def mark(self, name):
        """Record a stage the current code path never entered."""
        self.seconds.setdefault(name, 0.0)


@dataclass
class ThresholdResult:
    """Outcome of the global energy thresholding pass.

    ``v`` holds all squared singular values sorted ascending, ``w`` their
    running sums. ``j`` counts how many leading entries of ``v`` the rule
    discards and ``tau`` is the squared-value cutoff: a singular value
    survives when its square exceeds ``tau``. If dropping every value tied
    at the cutoff would push the discarded energy past the budget, the tied
    values are retained instead, keeping the guarantee unconditional.
    """

    v: np.ndarray
    w: np.ndarray
    j: int
    tau: float
    ranks: np.ndarray
    discarded_energy: float
    total_energy: float


def compute_threshold(s, epsilon) -> ThresholdResult:
    """Choose per-slice retention counts from an (r, N) singular value matrix
    so the discarded squared energy stays below ``epsilon**2`` of the total."""
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {epsilon}")
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError(f"expected an (r, N) value matrix, got {s.ndim} modes")
    if not np.isfinite(s).all():
        raise ValueError("singular values must be finite")
    if s.size and s.min() < 0:
        raise ValueError("singular values must be non-negative")
    squared = s * s
    v = np.sort(squared, axis=None)
    w = np.cumsum(v)
    total = float(w[-1]) if w.size else 0.0
    if total == 0.0:
        ranks = np.zeros(s.shape[1] if s.ndim == 2 else 0, dtype=np.int64)
        return ThresholdResult(v, w, 0, 0.0, ranks, 0.0, 0.0)
    budget = epsilon * epsilon * total
    j = int(np.searchsorted(w, budget, side="left"))
    tau = float(v[j - 1]) if j > 0 else 0.0
    keep = squared > tau
    discarded = float(squared[~keep].sum())
    if discarded >= budget and tau > 0.0:
        # every value tied at the cutoff went past the budget; keep the ties
        keep = squared >= tau
        discarded = float(squared[~keep].sum())
    ranks = keep.sum(axis=0).astype(np.int64)
    return ThresholdResult(v, w, j, tau, ranks, discarded, total)


@dataclass
class TSVDMResult:
    """Untruncated factorization: orthonormal per-slice factors in the
    transform domain plus the transforms that got there."""

    factors: SliceSVDSet
    transforms: TransformSet
    dims: tuple[int, ...]

    def reconstruct(self, threads=1, ttm_variant=BATCHED) -> DenseTensor:
        chat = _facewise_from_factors(self.factors, self.dims, threads)
        return from_transform_domain(chat, self.transforms, ttm_variant, threads)


@dataclass
class CompressedTensor:
    """Truncated factorization: packed variable-rank factors, the transforms,
    and the shape needed to reconstruct.

    ``discarded_energy`` and ``total_energy`` are transform-domain squared
    Frobenius quantities recorded at compression time; they are None on
    artifacts read back from files.
    """

    dims: tuple[int, ...]
    transforms: TransformSet
    factors: VariableRankFactors
    method: str
    param: float
    discarded_energy: float | None = None
    total_energy: float | None = None

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        if len(self.dims) < 3:
            raise ValueError("compressed tensors have at least three modes")
        if self.method not in (METHOD_FIXED_RANK, METHOD_TOLERANCE):
            raise ValueError(f"unknown method {self.method!r}")
        self.transforms.check_dims(self.dims)
        f = self.factors
        if (f.slice_rows, f.slice_cols) != (self.dims[0], self.dims[1]):
            raise ValueError(
                f"factor slices are {f.slice_rows}x{f.slice_cols}, "
                f"tensor slices are {self.dims[0]}x{self.dims[1]}"
            )
        if f.num_slices != prod(self.dims[2:]):
            raise ValueError(
                f"{f.num_slices} factor slices for {prod(self.dims[2:])} tensor slices"
            )
        if self.method == METHOD_FIXED_RANK:
            r = int(self.param)
            if f.ranks.size and not (f.ranks == r).all():
                raise ValueError("fixed-rank artifacts must have one uniform rank")

    @property
    def ranks(self) -> np.ndarray:
        return self.factors.ranks

    def relative_error(self) -> float | None:
        """Transform-domain relative reconstruction error, when recorded."""
        if self.discarded_energy is None or self.total_energy is None:
            return None
        if self.total_energy == 0.0:
            return 0.0
        return math.sqrt(self.discarded_energy / self.total_energy)


def _check_decomposable(t):
    if t.ndim < 3:
        raise ValueError("decompositions apply to tensors with at least three modes")


def _facewise_from_factors(factors, dims, threads):
    """Multiply each slice's factors back into a dense transform-domain tensor."""
    m, r, n = factors.u.dims
    p = factors.v.dims[0]
    u_c = factors.u.data.reshape(n, r, m)
    v_c = factors.v.data.reshape(n, r, p)
    s_c = factors.s.T
    scaled = s_c[:, :, None] * u_c
    out = np.empty(prod(dims))
    dst = out.reshape(n, p, m)
    with threadpool_limits(limits=threads, user_api="blas"):
        np.matmul(v_c.transpose(0, 2, 1), scaled, out=dst)
    return DenseTensor(out, dims, copy=False)


def _facewise_matmul(a, b, threads):
    """Slice-by-slice matrix product of two tensors with matching trailing dims."""
    m, p = a.slice_shape
    p2, cols = b.slice_shape
    n = a.num_slices
    a_c = a.data.reshape(n, p, m)
    b_c = b.data.reshape(n, cols, p2)
    out = np.empty(m * cols * n)
    dst = out.reshape(n, cols, m)
    with threadpool_limits(limits=threads, user_api="blas"):
        np.matmul(b_c, a_c, out=dst)
    return DenseTensor(out, (m, cols) + a.dims[2:], copy=False)


def starm_product(a: DenseTensor, b: DenseTensor, ts: TransformSet,
                  ttm_variant=BATCHED, threads=1) -> DenseTensor:
    """Tensor-tensor product: transform, multiply slices facewise, transform back."""
    _check_decomposable(a)
    if a.ndim != b.ndim or a.dims[2:] != b.dims[2:]:
        raise ValueError(f"trailing dims differ: {a.dims} vs {b.dims}")
    if a.dims[1] != b.dims[0]:
        raise ValueError(
            f"slice shapes {a.slice_shape} and {b.slice_shape} do not chain"
        )
    ts.check_dims(a.dims)
    ahat = to_transform_domain(a, ts, ttm_variant, threads)
    bhat = to_transform_domain(b, ts, ttm_variant, threads)
    chat = _facewise_matmul(ahat, bhat, threads)
    return from_transform_domain(chat, ts, ttm_variant, threads)


def full_tsvdm(a: DenseTensor, ts: TransformSet, threads=1,
               svd_strategy=SLICES_PARALLEL, ttm_variant=BATCHED) -> TSVDMResult:
    """Factor every transform-domain slice without truncation."""
    _check_decomposable(a)
    ts.check_dims(a.dims)
    ahat = to_transform_domain(a, ts, ttm_variant, threads)
    factors = svd_all_slices(ahat, svd_strategy, threads)
    return TSVDMResult(factors, ts, a.dims)


def tsvdm_fixed_rank(a: DenseTensor, ts: TransformSet, rank, threads=1,
                     svd_strategy=SLICES_PARALLEL, ttm_variant=BATCHED) -> CompressedTensor:
    """Keep the leading ``rank`` triplets of every slice."""
    _check_decomposable(a)
    ts.check_dims(a.dims)
    m, p = a.slice_shape
    rank = int(rank)
    if not 1 <= rank <= min(m, p):
        raise ValueError(f"rank must lie in [1, {min(m, p)}], got {rank}")
    ahat = to_transform_domain(a, ts, ttm_variant, threads)
    ranks = np.full(a.num_slices, rank, dtype=np.int64)
    factors, values = svd_truncated_slices(
        ahat, ranks, svd_strategy, threads, keep_values=True
    )
    squared = values * values
    total = float(squared.sum())
    discarded = float(squared[rank:, :].sum())
    return CompressedTensor(
        a.dims, ts, factors, METHOD_FIXED_RANK, float(rank), discarded, total
    )


def tsvdm_tolerance(a: DenseTensor, ts: TransformSet, epsilon,
                    strategy=MEMORY_EFFICIENT, threads=1,
                    svd_strategy=SLICES_PARALLEL, ttm_variant=BATCHED,
                    clock=None) -> CompressedTensor:
    """Keep per-slice ranks chosen by a global energy threshold.

    The relative reconstruction error is guaranteed below ``epsilon``. All
    three strategies produce the same ranks and factors; they differ in how
    much work and memory the two passes cost:

    * ``truncate``: factor everything, then discard.
    * ``compute-efficient``: values pass caching slice copies, threshold,
      then factor the cached copies.
    * ``memory-efficient``: values pass with no cache, threshold, then
      factor again reading the transform-domain tensor a second time.
    """
    _check_decomposable(a)
    ts.check_dims(a.dims)
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {epsilon}")
    if strategy not in TOLERANCE_STRATEGIES:
        raise ValueError(f"unknown tolerance strategy {strategy!r}")
    clock = clock if clock is not None else StageClock()
    m, p = a.slice_shape
    ahat = to_transform_domain(a, ts, ttm_variant, threads)
    if strategy == TRUNCATE:
        with clock.stage("stage1-svd"):
            full = svd_all_slices(ahat, svd_strategy, threads)
        with clock.stage("threshold"):
            th = compute_threshold(full.s, epsilon)
        clock.mark("stage2-svd")
        with clock.stage("pack"):
            factors = _pack_from_full(full, th.ranks)
    elif strategy == COMPUTE_EFFICIENT:
        with clock.stage("stage1-svd"):
            values, copies = _values_pass(ahat, svd_strategy, threads, keep_copies=True)
        with clock.stage("threshold"):
            th = compute_threshold(values, epsilon)
        with clock.stage("stage2-svd"):
            factors = _truncated_from_cache(copies, th.ranks, m, p, svd_strategy, threads)
        clock.mark("pack")
    else:
        with clock.stage("stage1-svd"):
            values = _values_pass(ahat, svd_strategy, threads, keep_copies=False)[0]
        with clock.stage("threshold"):
            th = compute_threshold(values, epsilon)
        with clock.stage("stage2-svd"):
            factors = svd_truncated_slices(ahat, th.ranks, svd_strategy, threads)
        clock.mark("pack")
    return CompressedTensor(
        a.dims, ts, factors, METHOD_TOLERANCE, epsilon,
        th.discarded_energy, th.total_energy,
    )


def _pack_from_full(full, ranks):
    """Discard trailing triplets of an untruncated factor set into packed form."""
    m = full.u.dims[0]
    p = full.v.dims[0]
    n = full.num_slices
    factors = VariableRankFactors.allocate(m, p, ranks)
    u = full.u.slices()
    v = full.v.slices()
    s = full.s
    for i in range(n):
        k = int(ranks[i])
        if k == 0:
            continue
        factors.u_block(i)[...] = u[:, :k, i]
        factors.g_block(i)[...] = s[:k, i, None] * v[:, :k, i].T
    return factors


def reconstruct(c: CompressedTensor, threads=1, ttm_variant=BATCHED) -> DenseTensor:
    """Expand a compressed tensor back to a dense one."""
    m, p = c.dims[0], c.dims[1]
    n = prod(c.dims[2:])
    chat = np.zeros((m, p, n), order="F")  # rank-zero slices stay zero
    f = c.factors

    def worker(chunk):
        for i in chunk:
            if f.ranks[i]:
                np.matmul(f.u_block(i), f.g_block(i), out=chat[:, :, i])

    with threadpool_limits(limits=1, user_api="blas"):
        run_chunked(n, threads, worker)
    dense = DenseTensor(chat.reshape(c.dims, order="F"), copy=False)
    return from_transform_domain(dense, c.transforms, ttm_variant, threads)


def compression_ratio(c: CompressedTensor) -> float:
    """Original entry count over stored entry count.

    Stored entries are the packed factor blocks plus any transform matrices
    that cannot be regenerated from their kind tag alone. All ranks zero
    with no stored transforms gives ``inf``.
    """
    m, p = c.dims[0], c.dims[1]
    stored = c.factors.total_rank * (m + p)
    stored += sum(t.size ** 2 for t in c.transforms if t.kind in (DATA_DRIVEN, CUSTOM))
    if stored == 0:
        return math.inf
    return prod(c.dims) / stored
