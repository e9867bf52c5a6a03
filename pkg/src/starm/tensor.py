"""Dense column-major tensors: storage, slice addressing, unfoldings, norms."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np


def linear_index(dims, idx):
    """Column-major linear offset of a multi-index.

    The first mode varies fastest: offset = sum_k idx[k] * prod(dims[:k]).

    Parameters
    ----------
    dims : sequence of int
        Extent of each mode.
    idx : sequence of int
        Zero-based index per mode, same length as ``dims``.

    Returns
    -------
    int
        Offset into the flat column-major buffer.
    """
    if len(idx) != len(dims):
        raise ValueError(f"index has {len(idx)} modes, tensor has {len(dims)}")
    offset = 0
    stride = 1
    for k, (i, n) in enumerate(zip(idx, dims)):
        if not 0 <= i < n:
            raise IndexError(f"index {i} out of range [0, {n}) in mode {k}")
        offset += i * stride
        stride *= n
    return offset


def multi_index(dims, offset):
    """Inverse of :func:`linear_index`: recover the multi-index at an offset."""
    size = prod(dims)
    if not 0 <= offset < size:
        raise IndexError(f"offset {offset} out of range [0, {size})")
    idx = []
    for n in dims:
        offset, rem = divmod(offset, n)
        idx.append(rem)
    return tuple(idx)


@dataclass(frozen=True)
class SliceIndex:
    """Address of one frontal slice.

    ``trailing`` holds the indices of every mode beyond the first two and
    ``flat`` is the equivalent column-major position among all slices.
    """

    trailing: tuple[int, ...]
    flat: int

    @classmethod
    def from_trailing(cls, dims, trailing):
        """Build from per-mode trailing indices of a tensor with shape ``dims``."""
        trailing = tuple(int(i) for i in trailing)
        return cls(trailing, linear_index(tuple(dims)[2:], trailing))

    @classmethod
    def from_flat(cls, dims, flat):
        """Build from a flat slice number of a tensor with shape ``dims``."""
        flat = int(flat)
        return cls(multi_index(tuple(dims)[2:], flat), flat)


class DenseTensor:
    """A dense d-way array of 64-bit reals in column-major order.

    The buffer is always Fortran-contiguous, so frontal slices are contiguous
    blocks and mode-wise reshapes are views. Treat instances as immutable
    once constructed; kernels that fill one in place do so before sharing it.
    """

    __slots__ = ("array",)

    def __init__(self, array, dims=None, copy=True):
        arr = np.asarray(array, dtype=np.float64)
        if dims is not None:
            arr = arr.reshape(tuple(int(n) for n in dims), order="F")
        if arr.ndim == 0:
            raise ValueError("a tensor needs at least one mode")
        if min(arr.shape) < 1:
            raise ValueError(f"every extent must be positive, got {arr.shape}")
        if copy:
            arr = arr.copy(order="F")
        else:
            arr = np.asfortranarray(arr)
        object.__setattr__(self, "array", arr)

    def __setattr__(self, name, value):
        raise AttributeError("DenseTensor is read-only")

    @classmethod
    def zeros(cls, dims):
        return cls(np.zeros(tuple(int(n) for n in dims), order="F"), copy=False)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Flat column-major view of the buffer (no copy)."""
        return self.array.reshape(-1, order="F")

    @property
    def slice_shape(self) -> tuple[int, int]:
        """(rows, cols) of each frontal slice."""
        if self.ndim < 2:
            raise ValueError("frontal slices need at least two modes")
        return self.dims[0], self.dims[1]

    @property
    def num_slices(self) -> int:
        """Number of frontal slices (product of all trailing extents)."""
        if self.ndim < 2:
            raise ValueError("frontal slices need at least two modes")
        return prod(self.dims[2:])

    def slices(self) -> np.ndarray:
        """Zero-copy (rows, cols, N) view with all trailing modes flattened."""
        m, p = self.slice_shape
        return self.array.reshape((m, p, self.num_slices), order="F")

    def frontal_slice(self, index) -> np.ndarray:
        """The (rows x cols) slice at ``index`` (an int or :class:`SliceIndex`).

        Returns a contiguous view starting at flat offset ``index * rows * cols``.
        """
        flat = index.flat if isinstance(index, SliceIndex) else int(index)
        n = self.num_slices
        if not 0 <= flat < n:
            raise IndexError(f"slice {flat} out of range [0, {n})")
        return self.slices()[:, :, flat]

    def unfold(self, mode) -> np.ndarray:
        """Mode-``mode`` unfolding as an (n_mode, size / n_mode) matrix.

        Columns are the mode-``mode`` fibers, ordered column-major over the
        remaining modes. Always returns a fresh array.
        """
        mode = int(mode)
        if not 0 <= mode < self.ndim:
            raise ValueError(f"mode {mode} out of range for {self.ndim} modes")
        moved = np.moveaxis(self.array, mode, 0)
        return np.reshape(moved, (self.dims[mode], -1), order="F")

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def copy(self) -> "DenseTensor":
        return DenseTensor(self.array, copy=True)

    def __repr__(self):
        return f"DenseTensor(dims={self.dims})"


def refold(matrix, mode, dims) -> DenseTensor:
    """Inverse of :meth:`DenseTensor.unfold` for a tensor of shape ``dims``."""
    dims = tuple(int(n) for n in dims)
    mode = int(mode)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for {len(dims)} modes")
    mat = np.asarray(matrix, dtype=np.float64)
    expected = (dims[mode], prod(dims) // dims[mode])
    if mat.shape != expected:
        raise ValueError(f"unfolding shape {mat.shape} does not match {expected}")
    rest = dims[:mode] + dims[mode + 1:]
    arr = np.reshape(mat, (dims[mode],) + rest, order="F")
    return DenseTensor(np.moveaxis(arr, 0, mode))
