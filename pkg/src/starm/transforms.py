"""Orthonormal per-mode transform matrices and their construction rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor import DenseTensor

# Relative orthonormality residual accepted at construction.
ORTHONORMALITY_TOL = 1e-10

IDENTITY = "identity"
DCT = "dct"
DATA_DRIVEN = "data-driven"
CUSTOM = "custom"
KINDS = (IDENTITY, DCT, DATA_DRIVEN, CUSTOM)


def orthonormality_residual(matrix) -> float:
    """``||M^T M - I||_F / sqrt(n)`` for a square matrix M."""
    m = np.asarray(matrix, dtype=np.float64)
    gram = m.T @ m
    gram[np.diag_indices(gram.shape[0])] -= 1.0
    return float(np.linalg.norm(gram) / np.sqrt(gram.shape[0]))


@dataclass(frozen=True)
class Transform:
    """An n x n orthonormal matrix applied along one tensor mode.

    The inverse is the transpose; nothing is ever inverted numerically.
    Construction rejects any matrix whose orthonormality residual exceeds
    ``ORTHONORMALITY_TOL``.
    """

    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        mat = np.asfortranarray(np.asarray(self.matrix, dtype=np.float64))
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"transform matrix must be square, got shape {mat.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        object.__setattr__(self, "matrix", mat)
        if self.kind != IDENTITY:  # the identity is exact by construction
            res = orthonormality_residual(mat)
            if res > ORTHONORMALITY_TOL:
                raise ValueError(
                    f"matrix is not orthonormal: residual {res:.3e} exceeds "
                    f"{ORTHONORMALITY_TOL:.0e}"
                )

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"Transform(kind={self.kind!r}, size={self.size})"


def _check_size(n):
    n = int(n)
    if n < 1:
        raise ValueError(f"transform size must be positive, got {n}")
    return n


def identity_transform(n) -> Transform:
    """The exact n x n identity."""
    return Transform(np.eye(_check_size(n)), IDENTITY)


def dct_matrix(n) -> Transform:
    """Orthonormal type-II discrete cosine transform matrix.

    Entry (j, k) is ``c_j * cos(pi * (2k + 1) * j / (2n))`` with
    ``c_0 = sqrt(1/n)`` and ``c_j = sqrt(2/n)`` for j > 0, so rows have unit
    norm and the matrix is orthonormal.
    """
    n = _check_size(n)
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * k + 1) * j / (2.0 * n))
    mat[0, :] *= np.sqrt(1.0 / n)
    if n > 1:
        mat[1:, :] *= np.sqrt(2.0 / n)
    return Transform(mat, DCT)


def data_driven_transform(t: DenseTensor, mode) -> Transform:
    """Basis adapted to one tensor: transposed left singular vectors of the
    mode-``mode`` unfolding.

    Only modes beyond the first two are eligible. An all-zero tensor has no
    preferred basis and is rejected.
    """
    mode = int(mode)
    if mode < 2:
        raise ValueError("data-driven transforms apply to modes beyond the first two")
    if mode >= t.ndim:
        raise ValueError(f"mode {mode} out of range for {t.ndim} modes")
    unf = t.unfold(mode)
    if not unf.any():
        raise ValueError("cannot derive a transform from an all-zero tensor")
    u, _, _ = scipy.linalg.svd(unf, full_matrices=True, lapack_driver="gesvd")
    return Transform(u.T, DATA_DRIVEN)


def validate_transform(matrix) -> Transform:
    """Wrap a user-supplied square matrix, rejecting anything not orthonormal.

    The rejection message reports the measured residual.
    """
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"custom transform must be a square matrix, got shape {mat.shape}")
    return Transform(mat, CUSTOM)


@dataclass(frozen=True)
class TransformSet:
    """One orthonormal transform per tensor mode beyond the first two.

    Entry k applies to mode k + 2 of the target tensor.
    """

    transforms: tuple[Transform, ...]

    def __post_init__(self):
        ts = tuple(self.transforms)
        for t in ts:
            if not isinstance(t, Transform):
                raise TypeError(f"expected Transform, got {type(t).__name__}")
        object.__setattr__(self, "transforms", ts)

    def __len__(self):
        return len(self.transforms)

    def __iter__(self):
        return iter(self.transforms)

    def __getitem__(self, i):
        return self.transforms[i]

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(t.kind for t in self.transforms)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(t.size for t in self.transforms)

    def check_dims(self, dims):
        """Raise unless this set matches a tensor of shape ``dims`` exactly."""
        dims = tuple(dims)
        if len(self.transforms) != len(dims) - 2:
            raise ValueError(
                f"{len(self.transforms)} transforms cannot cover "
                f"{max(len(dims) - 2, 0)} transformable modes"
            )
        for k, (t, n) in enumerate(zip(self.transforms, dims[2:]), start=2):
            if t.size != n:
                raise ValueError(
                    f"mode {k} transform is {t.size}x{t.size} but the extent is {n}"
                )

    @classmethod
    def build(cls, dims, kinds, tensor=None):
        """Construct a set for a tensor of shape ``dims``.

        ``kinds`` is either a single entry applied to every trailing mode or
        one entry per trailing mode. Each entry is a kind name or a ready
        :class:`Transform`. Data-driven entries need ``tensor``.
        """
        dims = tuple(int(n) for n in dims)
        if len(dims) < 3:
            raise ValueError("transform sets apply to tensors with at least three modes")
        if isinstance(kinds, (str, Transform)):
            kinds = [kinds] * (len(dims) - 2)
        kinds = list(kinds)
        if len(kinds) != len(dims) - 2:
            raise ValueError(
                f"need {len(dims) - 2} transform entries, got {len(kinds)}"
            )
        out = []
        for k, spec in zip(range(2, len(dims)), kinds):
            if isinstance(spec, Transform):
                t = spec
            elif spec == IDENTITY:
                t = identity_transform(dims[k])
            elif spec == DCT:
                t = dct_matrix(dims[k])
            elif spec == DATA_DRIVEN:
                if tensor is None:
                    raise ValueError("data-driven transforms need the source tensor")
                t = data_driven_transform(tensor, k)
            else:
                raise ValueError(f"unknown transform kind {spec!r}")
            if t.size != dims[k]:
                raise ValueError(
                    f"mode {k} transform is {t.size}x{t.size} but the extent is {dims[k]}"
                )
            out.append(t)
        return cls(tuple(out))
