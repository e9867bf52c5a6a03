"""Independent thin SVDs of every frontal slice of a transform-domain tensor.

Two threading strategies cover the two ends of the shape spectrum:

* ``slices-parallel``: a parallel loop over slices, each factorization
  single-threaded. Wins when slices are small and plentiful.
* ``svd-parallel``: a sequential loop over slices, each factorization free
  to use BLAS threads. Wins when slices are large and few.

Every kernel copies slice data into per-worker scratch before factorizing,
so inputs are never modified and transient allocation is bounded by the
worker count, not the slice count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs
from threadpoolctl import threadpool_limits

from .parallel import run_chunked
from .tensor import DenseTensor

SLICES_PARALLEL = "slices-parallel"
SVD_PARALLEL = "svd-parallel"
STRATEGIES = (SLICES_PARALLEL, SVD_PARALLEL)

_gesvd, _gesvd_lwork = get_lapack_funcs(
    ("gesvd", "gesvd_lwork"), (np.empty(0, dtype=np.float64),)
)


def _svd_workspace(m, p):
    lwork, info = _gesvd_lwork(m, p, compute_uv=1, full_matrices=0)
    if info != 0:
        raise RuntimeError(f"workspace query failed (info={info})")
    return int(lwork)


def _slice_svd(mat, lwork, index, overwrite):
    """Thin SVD of one slice; with ``overwrite`` the input is destroyed.

    All-zero slices get exact identity-basis factors and zero values, so
    callers never see a breakdown on degenerate data. Non-finite entries
    are rejected with the offending slice named.
    """
    if not np.isfinite(mat).all():
        raise ValueError(f"slice {index} contains non-finite values")
    if not mat.any():
        m, p = mat.shape
        r = min(m, p)
        return np.eye(m, r, order="F"), np.zeros(r), np.eye(r, p, order="F")
    u, s, vt, info = _gesvd(
        mat, compute_uv=1, full_matrices=0, lwork=lwork, overwrite_a=overwrite
    )
    if info != 0:
        raise np.linalg.LinAlgError(
            f"SVD did not converge on slice {index} (info={info})"
        )
    return u, s, vt


def _for_each_slice(num_slices, strategy, threads, worker):
    """Run ``worker(chunk)`` over all slices under the strategy's threading."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown slice SVD strategy {strategy!r}")
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    if strategy == SLICES_PARALLEL:
        with threadpool_limits(limits=1, user_api="blas"):
            run_chunked(num_slices, threads, worker)
    else:
        with threadpool_limits(limits=threads, user_api="blas"):
            run_chunked(num_slices, 1, worker)


def _slice_geometry(ahat):
    if ahat.ndim < 3:
        raise ValueError("slicewise SVD applies to tensors with at least three modes")
    m, p = ahat.slice_shape
    return m, p, min(m, p), ahat.num_slices


@dataclass(eq=False)
class SliceSVDSet:
    """Thin SVD factors of every frontal slice.

    ``u`` is (m, r, N), ``s`` is (r, N) with columns sorted descending,
    ``v`` is (p, r, N), where r = min(m, p). Slice i reconstructs as
    ``u[:, :, i] @ diag(s[:, i]) @ v[:, :, i].T``.
    """

    u: DenseTensor
    s: np.ndarray
    v: DenseTensor

    @property
    def rank(self) -> int:
        return self.s.shape[0]

    @property
    def num_slices(self) -> int:
        return self.s.shape[1]

    def reconstruct_slice(self, i) -> np.ndarray:
        i = int(i)
        return self.u.frontal_slice(i) @ (
            self.s[:, i, None] * self.v.frontal_slice(i).T
        )


def svd_all_slices(ahat: DenseTensor, strategy=SLICES_PARALLEL, threads=1) -> SliceSVDSet:
    """Factor every frontal slice; the input is left untouched."""
    m, p, r, n = _slice_geometry(ahat)
    slices = ahat.slices()
    u_out = np.empty((m, r, n), order="F")
    s_out = np.empty((r, n), order="F")
    v_out = np.empty((p, r, n), order="F")
    lwork = _svd_workspace(m, p)

    def worker(chunk):
        scratch = np.empty((m, p), order="F")
        for i in chunk:
            np.copyto(scratch, slices[:, :, i])
            u, s, vt = _slice_svd(scratch, lwork, i, overwrite=1)
            u_out[:, :, i] = u
            s_out[:, i] = s
            v_out[:, :, i] = vt.T

    _for_each_slice(n, strategy, threads, worker)
    return SliceSVDSet(
        DenseTensor(u_out, copy=False), s_out, DenseTensor(v_out, copy=False)
    )


def _values_pass(ahat, strategy, threads, keep_copies):
    """Per-slice singular values; optionally cache a copy of every slice.

    Returns ``(values, copies)`` where ``values`` is (r, N) and ``copies``
    is a list of pristine slice copies (or None). The values come from the
    same factorization kernel as :func:`svd_all_slices`, so the two agree
    bitwise; the vectors live only in per-worker scratch.
    """
    m, p, r, n = _slice_geometry(ahat)
    slices = ahat.slices()
    s_out = np.empty((r, n), order="F")
    copies = [None] * n if keep_copies else None
    lwork = _svd_workspace(m, p)

    def worker(chunk):
        scratch = None if keep_copies else np.empty((m, p), order="F")
        for i in chunk:
            if keep_copies:
                kept = np.array(slices[:, :, i], order="F")
                copies[i] = kept
                # overwrite=0 makes the routine work on its own transient
                # copy, leaving the cached slice pristine for the next pass
                _, s, _ = _slice_svd(kept, lwork, i, overwrite=0)
            else:
                np.copyto(scratch, slices[:, :, i])
                _, s, _ = _slice_svd(scratch, lwork, i, overwrite=1)
            s_out[:, i] = s

    _for_each_slice(n, strategy, threads, worker)
    return s_out, copies


def svd_values_only(ahat: DenseTensor, strategy=SLICES_PARALLEL, threads=1) -> np.ndarray:
    """Per-slice singular values as an (r, N) matrix, no factor tensors.

    Matches the ``s`` field of :func:`svd_all_slices` bitwise while
    allocating no output proportional to the factor tensors.
    """
    return _values_pass(ahat, strategy, threads, keep_copies=False)[0]


@dataclass(eq=False)
class VariableRankFactors:
    """Leading singular triplets per slice, packed with no padding.

    Slice i contributes a (slice_rows x ranks[i]) block of left vectors to
    ``u_data`` and a (ranks[i] x slice_cols) block carrying
    ``diag(s) @ V^T`` to ``g_data``, both column-major, concatenated in
    slice order. Rank-zero slices contribute nothing.
    """

    slice_rows: int
    slice_cols: int
    ranks: np.ndarray
    u_data: np.ndarray
    g_data: np.ndarray

    def __post_init__(self):
        self.slice_rows = int(self.slice_rows)
        self.slice_cols = int(self.slice_cols)
        ranks = np.asarray(self.ranks, dtype=np.int64)
        if ranks.ndim != 1:
            raise ValueError("ranks must be a flat sequence")
        bound = min(self.slice_rows, self.slice_cols)
        if ranks.size and (ranks.min() < 0 or ranks.max() > bound):
            raise ValueError(f"ranks must lie in [0, {bound}]")
        self.ranks = ranks
        self.u_data = np.ascontiguousarray(self.u_data, dtype=np.float64).reshape(-1)
        self.g_data = np.ascontiguousarray(self.g_data, dtype=np.float64).reshape(-1)
        self._u_offsets = np.zeros(ranks.size + 1, dtype=np.int64)
        np.cumsum(ranks * self.slice_rows, out=self._u_offsets[1:])
        self._g_offsets = np.zeros(ranks.size + 1, dtype=np.int64)
        np.cumsum(ranks * self.slice_cols, out=self._g_offsets[1:])
        if self.u_data.size != self._u_offsets[-1]:
            raise ValueError(
                f"left-vector payload holds {self.u_data.size} values, "
                f"ranks call for {int(self._u_offsets[-1])}"
            )
        if self.g_data.size != self._g_offsets[-1]:
            raise ValueError(
                f"product payload holds {self.g_data.size} values, "
                f"ranks call for {int(self._g_offsets[-1])}"
            )

    @classmethod
    def allocate(cls, slice_rows, slice_cols, ranks):
        ranks = np.asarray(ranks, dtype=np.int64)
        return cls(
            slice_rows,
            slice_cols,
            ranks,
            np.empty(int((ranks * slice_rows).sum())),
            np.empty(int((ranks * slice_cols).sum())),
        )

    @property
    def num_slices(self) -> int:
        return self.ranks.size

    @property
    def total_rank(self) -> int:
        return int(self.ranks.sum())

    def u_block(self, i) -> np.ndarray:
        """(slice_rows x ranks[i]) left-vector block of slice i (a view)."""
        start = self._u_offsets[i]
        stop = self._u_offsets[i + 1]
        return self.u_data[start:stop].reshape(
            (self.slice_rows, int(self.ranks[i])), order="F"
        )

    def g_block(self, i) -> np.ndarray:
        """(ranks[i] x slice_cols) scaled right-vector block of slice i (a view)."""
        start = self._g_offsets[i]
        stop = self._g_offsets[i + 1]
        return self.g_data[start:stop].reshape(
            (int(self.ranks[i]), self.slice_cols), order="F"
        )


def svd_truncated_slices(
    ahat: DenseTensor, ranks, strategy=SLICES_PARALLEL, threads=1, keep_values=False
):
    """Leading-rank factors per slice, ranks chosen by the caller.

    Rank-zero slices are skipped entirely. With ``keep_values`` the full
    (r, N) singular value matrix seen during factorization is returned as a
    second result and no slice is skipped.
    """
    m, p, r, n = _slice_geometry(ahat)
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.shape != (n,):
        raise ValueError(f"need one rank per slice ({n}), got shape {ranks.shape}")
    slices = ahat.slices()
    factors = VariableRankFactors.allocate(m, p, ranks)
    values = np.empty((r, n), order="F") if keep_values else None
    lwork = _svd_workspace(m, p)

    def worker(chunk):
        scratch = np.empty((m, p), order="F")
        for i in chunk:
            k = int(ranks[i])
            if k == 0 and values is None:
                continue
            np.copyto(scratch, slices[:, :, i])
            u, s, vt = _slice_svd(scratch, lwork, i, overwrite=1)
            if values is not None:
                values[:, i] = s
            if k:
                factors.u_block(i)[...] = u[:, :k]
                factors.g_block(i)[...] = s[:k, None] * vt[:k, :]

    _for_each_slice(n, strategy, threads, worker)
    return (factors, values) if keep_values else factors


def _truncated_from_cache(copies, ranks, slice_rows, slice_cols, strategy, threads):
    """Second pass of the caching strategy: factor the cached slice copies.

    The copies are consumed (factorized in place).
    """
    ranks = np.asarray(ranks, dtype=np.int64)
    factors = VariableRankFactors.allocate(slice_rows, slice_cols, ranks)
    lwork = _svd_workspace(slice_rows, slice_cols)

    def worker(chunk):
        for i in chunk:
            k = int(ranks[i])
            if k == 0:
                copies[i] = None
                continue
            u, s, vt = _slice_svd(copies[i], lwork, i, overwrite=1)
            copies[i] = None
            factors.u_block(i)[...] = u[:, :k]
            factors.g_block(i)[...] = s[:k, None] * vt[:k, :]

    _for_each_slice(len(copies), strategy, threads, worker)
    return factors
