"""Binary file formats for raw tensors and compressed artifacts, plus the
benchmark CSV schema.

Both formats are fixed little-endian regardless of host byte order. A raw
tensor file is::

    magic "STARMTEN" | version u8 | dtype u8 | ndim u32 | dims u64[ndim]
    | payload f64[prod(dims)] column-major

A compressed artifact is::

    magic "STARMCMP" | version u8 | method u8 | param f64 | ndim u32
    | dims u64[ndim] | kinds u8[ndim - 2] | num_slices u64
    | ranks u32[num_slices]
    | stored transform matrices (n_k * n_k f64, column-major, mode order,
      only for kinds that cannot be regenerated from the tag)
    | packed left-vector blocks f64 | packed product blocks f64

Readers bound every allocation by the sizes the header declares and raise
a distinct error per failure class.
"""

from __future__ import annotations

import csv
import struct
from contextlib import contextmanager
from math import prod

import numpy as np

from .slicesvd import VariableRankFactors
from .tensor import DenseTensor
from .transforms import (
    CUSTOM,
    DATA_DRIVEN,
    DCT,
    IDENTITY,
    Transform,
    TransformSet,
    dct_matrix,
    identity_transform,
)
from .tsvdm import METHOD_FIXED_RANK, METHOD_TOLERANCE, CompressedTensor

TENSOR_MAGIC = b"STARMTEN"
COMPRESSED_MAGIC = b"STARMCMP"
FORMAT_VERSION = 1
DTYPE_FLOAT64 = 0

# Generous bound on mode count; a corrupt header must not be able to demand
# a huge dims section before any real validation can happen.
MAX_MODES = 64

_KIND_CODES = {IDENTITY: 0, DCT: 1, DATA_DRIVEN: 2, CUSTOM: 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_METHOD_CODES = {METHOD_FIXED_RANK: 1, METHOD_TOLERANCE: 2}
_CODE_METHODS = {v: k for k, v in _METHOD_CODES.items()}

CSV_FIELDS = ("kernel", "variant", "mode", "threads", "trial", "seconds", "peak_bytes")


class CodecError(Exception):
    """Malformed or unsupported file content."""


class BadMagicError(CodecError):
    """The file does not start with the expected magic bytes."""


class UnsupportedVersionError(CodecError):
    """The file declares a format version this reader does not know."""


class UnsupportedDtypeError(CodecError):
    """The file declares an element type this reader does not know."""


class TruncatedPayloadError(CodecError):
    """The file ends before the header-declared content does."""


class FormatError(CodecError):
    """The header-declared metadata is internally inconsistent."""


@contextmanager
def _open_binary(target, mode):
    if hasattr(target, "read") or hasattr(target, "write"):
        yield target
    else:
        with open(target, mode) as handle:
            yield handle


def _read_exact(stream, nbytes, what):
    buf = stream.read(nbytes)
    if len(buf) != nbytes:
        raise TruncatedPayloadError(
            f"truncated {what}: wanted {nbytes} bytes, got {len(buf)}"
        )
    return buf


def _read_floats(stream, count, what):
    """Read exactly ``count`` little-endian doubles into a fresh buffer."""
    nbytes = count * 8
    if stream.seekable():
        # fail before allocating when the file visibly cannot satisfy the
        # header-declared size
        pos = stream.tell()
        end = stream.seek(0, 2)
        stream.seek(pos)
        if end - pos < nbytes:
            raise TruncatedPayloadError(
                f"truncated {what}: wanted {nbytes} bytes, {end - pos} remain"
            )
    buf = bytearray(nbytes)
    view = memoryview(buf)
    got = 0
    while got < nbytes:
        n = stream.readinto(view[got:])
        if not n:
            raise TruncatedPayloadError(
                f"truncated {what}: wanted {nbytes} bytes, got {got}"
            )
        got += n
    return np.frombuffer(buf, dtype="<f8").astype(np.float64, copy=False)


def _read_dims(stream, ndim, minimum):
    if ndim < minimum:
        raise FormatError(f"tensor declares {ndim} modes, need at least {minimum}")
    if ndim > MAX_MODES:
        raise FormatError(f"implausible mode count {ndim}")
    raw = np.frombuffer(_read_exact(stream, 8 * ndim, "dims"), dtype="<u8")
    if (raw == 0).any():
        raise FormatError("zero extent in header")
    return tuple(int(n) for n in raw)


def write_tensor(t: DenseTensor, target) -> None:
    """Write a raw tensor file."""
    with _open_binary(target, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<BBI", FORMAT_VERSION, DTYPE_FLOAT64, t.ndim))
        f.write(np.asarray(t.dims, dtype="<u8").tobytes())
        f.write(t.data.astype("<f8", copy=False).tobytes())


def read_tensor(source) -> DenseTensor:
    """Read a raw tensor file written by :func:`write_tensor`."""
    with _open_binary(source, "rb") as f:
        magic = _read_exact(f, 8, "magic")
        if magic != TENSOR_MAGIC:
            raise BadMagicError(f"not a tensor file (magic {magic!r})")
        version, dtype_code, ndim = struct.unpack("<BBI", _read_exact(f, 6, "header"))
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(f"unsupported version {version}")
        if dtype_code != DTYPE_FLOAT64:
            raise UnsupportedDtypeError(f"unsupported dtype code {dtype_code}")
        dims = _read_dims(f, ndim, minimum=1)
        data = _read_floats(f, prod(dims), "tensor payload")
        return DenseTensor(data, dims, copy=False)


def write_compressed(c: CompressedTensor, target) -> None:
    """Write a compressed artifact file."""
    f_set = c.factors
    with _open_binary(target, "wb") as f:
        f.write(COMPRESSED_MAGIC)
        f.write(
            struct.pack(
                "<BBdI",
                FORMAT_VERSION,
                _METHOD_CODES[c.method],
                float(c.param),
                len(c.dims),
            )
        )
        f.write(np.asarray(c.dims, dtype="<u8").tobytes())
        f.write(bytes(_KIND_CODES[t.kind] for t in c.transforms))
        f.write(struct.pack("<Q", f_set.num_slices))
        f.write(f_set.ranks.astype("<u4").tobytes())
        for t in c.transforms:
            if t.kind in (DATA_DRIVEN, CUSTOM):
                flat = t.matrix.reshape(-1, order="F")
                f.write(flat.astype("<f8", copy=False).tobytes())
        f.write(f_set.u_data.astype("<f8", copy=False).tobytes())
        f.write(f_set.g_data.astype("<f8", copy=False).tobytes())


def read_compressed(source) -> CompressedTensor:
    """Read a compressed artifact written by :func:`write_compressed`."""
    with _open_binary(source, "rb") as f:
        magic = _read_exact(f, 8, "magic")
        if magic != COMPRESSED_MAGIC:
            raise BadMagicError(f"not a compressed artifact (magic {magic!r})")
        version, method_code, param, ndim = struct.unpack(
            "<BBdI", _read_exact(f, 14, "header")
        )
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(f"unsupported version {version}")
        if method_code not in _CODE_METHODS:
            raise FormatError(f"unknown method code {method_code}")
        dims = _read_dims(f, ndim, minimum=3)
        kind_codes = _read_exact(f, ndim - 2, "transform kinds")
        try:
            kinds = [_CODE_KINDS[code] for code in kind_codes]
        except KeyError as exc:
            raise FormatError(f"unknown transform kind code {exc.args[0]}") from None
        (num_slices,) = struct.unpack("<Q", _read_exact(f, 8, "slice count"))
        if num_slices != prod(dims[2:]):
            raise FormatError(
                f"header declares {num_slices} slices, dims imply {prod(dims[2:])}"
            )
        ranks = np.frombuffer(
            _read_exact(f, 4 * num_slices, "ranks"), dtype="<u4"
        ).astype(np.int64)
        bound = min(dims[0], dims[1])
        if ranks.size and ranks.max() > bound:
            raise FormatError(f"rank {int(ranks.max())} exceeds slice bound {bound}")
        transforms = []
        for k, kind in enumerate(kinds, start=2):
            n = dims[k]
            if kind == IDENTITY:
                transforms.append(identity_transform(n))
            elif kind == DCT:
                transforms.append(dct_matrix(n))
            else:
                mat = _read_floats(f, n * n, f"mode {k} transform").reshape(
                    (n, n), order="F"
                )
                try:
                    transforms.append(Transform(mat, kind))
                except ValueError as exc:
                    raise FormatError(str(exc)) from None
        total_rank = int(ranks.sum())
        u_data = _read_floats(f, total_rank * dims[0], "left-vector payload")
        g_data = _read_floats(f, total_rank * dims[1], "product payload")
        method = _CODE_METHODS[method_code]
        try:
            factors = VariableRankFactors(dims[0], dims[1], ranks, u_data, g_data)
            return CompressedTensor(dims, TransformSet(tuple(transforms)), factors,
                                    method, param)
        except ValueError as exc:
            raise FormatError(str(exc)) from None


def write_bench_csv(rows, target) -> None:
    """Write benchmark rows with the fixed header ``CSV_FIELDS``.

    Rows are iterables matching the field order; named tuples work as is.
    """
    if hasattr(target, "write"):
        writer = csv.writer(target)
        writer.writerow(CSV_FIELDS)
        writer.writerows(tuple(row) for row in rows)
    else:
        with open(target, "w", newline="") as handle:
            write_bench_csv(rows, handle)
