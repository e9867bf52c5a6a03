"""Mode-k tensor-times-matrix products over the column-major layout.

For a contraction on mode k the flat buffer is ``batch`` contiguous
(rows x inner) submatrices, where ``rows`` is the product of the leading
extents and ``batch`` the product of the trailing ones. Each submatrix is
multiplied by the transform independently, which gives three ways to
dispatch the same arithmetic:

* ``batched``: one strided batched product over all submatrices, the
  transform entering with stride zero, one output allocation.
* ``loop``: a sequential loop of products, each free to use BLAS threads.
* ``parfor``: a parallel loop of single-threaded products. On the last
  mode batch == 1 and this degenerates to one sequential product.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np
from threadpoolctl import threadpool_limits

from .parallel import run_chunked
from .tensor import DenseTensor
from .transforms import Transform, TransformSet

BATCHED = "batched"
LOOP = "loop"
PARFOR = "parfor"
VARIANTS = (BATCHED, LOOP, PARFOR)


@dataclass(frozen=True)
class TTMPlan:
    """Geometry of one mode-k contraction.

    rows
        Rows of each contiguous submatrix (product of extents before k).
    inner
        Contracted extent n_k.
    batch
        Number of submatrices (product of extents after k).
    out_cols
        Leading dimension of the matrix, i.e. columns of each output block.
    """

    mode: int
    rows: int
    inner: int
    batch: int
    out_cols: int
    variant: str = BATCHED

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown ttm variant {self.variant!r}")

    @classmethod
    def for_dims(cls, dims, mode, out_cols, variant=BATCHED):
        dims = tuple(dims)
        mode = int(mode)
        if mode < 2:
            raise ValueError("the first two modes are never contracted")
        if mode >= len(dims):
            raise ValueError(f"mode {mode} out of range for {len(dims)} modes")
        rows = prod(dims[:mode])
        batch = prod(dims[mode + 1:])
        return cls(mode, rows, dims[mode], batch, int(out_cols), variant)

    @property
    def is_last_mode(self) -> bool:
        return self.batch == 1


def _as_matrix(m):
    return m.matrix if isinstance(m, Transform) else np.asarray(m, dtype=np.float64)


def _check_threads(threads):
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    return threads


def ttm(t: DenseTensor, mode, m, variant=BATCHED, threads=1) -> DenseTensor:
    """Contract mode ``mode`` (zero-based, >= 2) of ``t`` with matrix ``m``.

    ``m`` has shape (J, n_mode); the result replaces the contracted extent
    with J and satisfies ``result.unfold(mode) == m @ t.unfold(mode)``.
    """
    mat = _as_matrix(m)
    threads = _check_threads(threads)
    if mat.ndim != 2:
        raise ValueError(f"expected a matrix, got {mat.ndim} modes")
    plan = TTMPlan.for_dims(t.dims, mode, mat.shape[0], variant)
    if mat.shape[1] != plan.inner:
        raise ValueError(
            f"matrix has {mat.shape[1]} columns, mode {plan.mode} extent is {plan.inner}"
        )
    out = _dispatch(t.data, plan, mat, threads)
    out_dims = t.dims[:plan.mode] + (plan.out_cols,) + t.dims[plan.mode + 1:]
    return DenseTensor(out, out_dims, copy=False)


def ttm_inverse(t: DenseTensor, mode, m, variant=BATCHED, threads=1) -> DenseTensor:
    """Contract with the transpose of ``m``, undoing :func:`ttm` when the
    matrix is orthonormal."""
    return ttm(t, mode, _as_matrix(m).T, variant, threads)


def _dispatch(flat, plan, mat, threads):
    # A column-major buffer viewed C-order as (batch, inner, rows) puts each
    # contiguous submatrix at src[b], transposed; out[b] = mat @ src[b] then
    # lands the result in the right column-major spots.
    src = flat.reshape(plan.batch, plan.inner, plan.rows)
    out = np.empty(plan.batch * plan.out_cols * plan.rows)
    dst = out.reshape(plan.batch, plan.out_cols, plan.rows)
    if plan.variant == BATCHED:
        with threadpool_limits(limits=threads, user_api="blas"):
            np.matmul(mat, src, out=dst)
    elif plan.variant == LOOP:
        with threadpool_limits(limits=threads, user_api="blas"):
            for b in range(plan.batch):
                np.matmul(mat, src[b], out=dst[b])
    else:

        def worker(chunk):
            for b in chunk:
                np.matmul(mat, src[b], out=dst[b])

        with threadpool_limits(limits=1, user_api="blas"):
            run_chunked(plan.batch, threads, worker)
    return out


def to_transform_domain(t: DenseTensor, ts: TransformSet, variant=BATCHED, threads=1) -> DenseTensor:
    """Apply every transform in ascending mode order."""
    ts.check_dims(t.dims)
    out = t
    for k, tr in enumerate(ts, start=2):
        out = ttm(out, k, tr, variant, threads)
    return out


def from_transform_domain(t: DenseTensor, ts: TransformSet, variant=BATCHED, threads=1) -> DenseTensor:
    """Apply every transposed transform in descending mode order."""
    ts.check_dims(t.dims)
    out = t
    for k in range(len(ts) + 1, 1, -1):
        out = ttm_inverse(out, k, ts[k - 2], variant, threads)
    return out
