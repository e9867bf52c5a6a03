"""File format round trips, golden bytes, and the error taxonomy."""

import csv
import io

import numpy as np
import pytest

from starm import (
    BadMagicError,
    BenchRow,
    CompressedTensor,
    DenseTensor,
    FormatError,
    TransformSet,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    VariableRankFactors,
    identity_transform,
    read_compressed,
    read_tensor,
    track_peak,
    tsvdm_tolerance,
    validate_transform,
    write_bench_csv,
    write_compressed,
    write_tensor,
)
from starm.codec import CSV_FIELDS

from helpers import random_orthonormal, random_tensor

# dims (2, 2, 2), values 0..7 in storage order. Layout: magic, version u8,
# dtype u8, ndim u32, dims u64[3], payload f64[8], everything little-endian.
GOLDEN_TENSOR_HEX = (
    "535441524d54454e010003000000020000000000000002000000000000000200"
    "0000000000000000000000000000000000000000f03f00000000000000400000"
    "0000000008400000000000001040000000000000144000000000000018400000"
    "000000001c40"
)

# dims (2, 2, 2), method 2 with parameter 0.5, one identity transform,
# ranks (1, 0), left block [1, 2], product block [3, 4]
GOLDEN_COMPRESSED_HEX = (
    "535441524d434d500102000000000000e03f0300000002000000000000000200"
    "0000000000000200000000000000000200000000000000010000000000000000"
    "0000000000f03f000000000000004000000000000008400000000000001040"
)


def golden_compressed():
    factors = VariableRankFactors(
        2, 2, np.array([1, 0]), np.array([1.0, 2.0]), np.array([3.0, 4.0])
    )
    return CompressedTensor(
        (2, 2, 2), TransformSet((identity_transform(2),)), factors, "tsvdm2", 0.5
    )


def test_tensor_golden_bytes():
    t = DenseTensor(np.arange(8.0), (2, 2, 2), copy=False)
    buf = io.BytesIO()
    write_tensor(t, buf)
    assert buf.getvalue().hex() == GOLDEN_TENSOR_HEX
    assert len(buf.getvalue()) == 38 + 64


def test_compressed_golden_bytes():
    buf = io.BytesIO()
    write_compressed(golden_compressed(), buf)
    assert buf.getvalue().hex() == GOLDEN_COMPRESSED_HEX


def test_tensor_round_trip_bitwise(tmp_path):
    for dims in [(2, 2, 2), (3, 1, 4, 2), (5, 4, 3, 2, 2), (6,), (3, 4)]:
        t = random_tensor(dims, seed=len(dims))
        path = tmp_path / "t.ten"
        write_tensor(t, path)
        back = read_tensor(path)
        assert back.dims == t.dims
        assert np.array_equal(back.data, t.data)
        # writing what was read reproduces the file exactly
        second = tmp_path / "t2.ten"
        write_tensor(back, second)
        assert second.read_bytes() == path.read_bytes()


def test_compressed_round_trip_bitwise(tmp_path):
    t = random_tensor((5, 4, 3, 2), seed=9)
    custom = validate_transform(random_orthonormal(2, seed=4))
    ts = TransformSet.build(t.dims, ["data-driven", custom], tensor=t)
    c = tsvdm_tolerance(t, ts, 0.35)
    path = tmp_path / "c.cmp"
    write_compressed(c, path)
    back = read_compressed(path)
    assert back.dims == c.dims
    assert back.method == c.method
    assert back.param == c.param
    assert back.transforms.kinds == c.transforms.kinds
    assert np.array_equal(back.ranks, c.ranks)
    assert np.array_equal(back.factors.u_data, c.factors.u_data)
    assert np.array_equal(back.factors.g_data, c.factors.g_data)
    for kept, orig in zip(back.transforms, c.transforms):
        assert np.array_equal(kept.matrix, orig.matrix)
    # energies are compression-time metadata, not stored
    assert back.relative_error() is None
    second = tmp_path / "c2.cmp"
    write_compressed(back, second)
    assert second.read_bytes() == path.read_bytes()


def test_compressed_round_trip_with_zero_ranks():
    c = golden_compressed()
    buf = io.BytesIO()
    write_compressed(c, buf)
    buf.seek(0)
    back = read_compressed(buf)
    assert np.array_equal(back.ranks, [1, 0])
    assert back.factors.u_block(1).shape == (2, 0)


def _tensor_bytes():
    return bytearray(bytes.fromhex(GOLDEN_TENSOR_HEX))


def _compressed_bytes():
    return bytearray(bytes.fromhex(GOLDEN_COMPRESSED_HEX))


def test_read_tensor_error_taxonomy():
    good = _tensor_bytes()

    bad_magic = good.copy()
    bad_magic[0] = ord("X")
    with pytest.raises(BadMagicError):
        read_tensor(io.BytesIO(bytes(bad_magic)))

    bad_version = good.copy()
    bad_version[8] = 9
    with pytest.raises(UnsupportedVersionError):
        read_tensor(io.BytesIO(bytes(bad_version)))

    bad_dtype = good.copy()
    bad_dtype[9] = 7
    with pytest.raises(UnsupportedDtypeError):
        read_tensor(io.BytesIO(bytes(bad_dtype)))

    zero_extent = good.copy()
    zero_extent[14] = 0  # first dim -> 0
    with pytest.raises(FormatError):
        read_tensor(io.BytesIO(bytes(zero_extent)))

    for cut in (4, 12, 30, 38, 70, len(good) - 1):
        with pytest.raises(TruncatedPayloadError):
            read_tensor(io.BytesIO(bytes(good[:cut])))


def test_read_compressed_error_taxonomy():
    good = _compressed_bytes()

    bad_magic = good.copy()
    bad_magic[7] = ord("X")
    with pytest.raises(BadMagicError):
        read_compressed(io.BytesIO(bytes(bad_magic)))

    bad_version = good.copy()
    bad_version[8] = 2
    with pytest.raises(UnsupportedVersionError):
        read_compressed(io.BytesIO(bytes(bad_version)))

    bad_method = good.copy()
    bad_method[9] = 99
    with pytest.raises(FormatError):
        read_compressed(io.BytesIO(bytes(bad_method)))

    bad_kind = good.copy()
    bad_kind[46] = 250  # transform kind byte
    with pytest.raises(FormatError):
        read_compressed(io.BytesIO(bytes(bad_kind)))

    bad_count = good.copy()
    bad_count[47] = 9  # declared slice count no longer matches dims
    with pytest.raises(FormatError):
        read_compressed(io.BytesIO(bytes(bad_count)))

    bad_rank = good.copy()
    bad_rank[55] = 3  # rank above min(m, p)
    with pytest.raises(FormatError):
        read_compressed(io.BytesIO(bytes(bad_rank)))

    for cut in (6, 20, 40, 50, 60, len(good) - 4):
        with pytest.raises(TruncatedPayloadError):
            read_compressed(io.BytesIO(bytes(good[:cut])))


def test_read_compressed_rejects_broken_stored_transform(tmp_path):
    t = random_tensor((3, 3, 4), seed=2)
    ts = TransformSet.build(t.dims, "data-driven", tensor=t)
    c = tsvdm_tolerance(t, ts, 0.3)
    buf = io.BytesIO()
    write_compressed(c, buf)
    raw = bytearray(buf.getvalue())
    # stored matrix starts right after ranks: scale one entry so the matrix
    # is no longer orthonormal
    offset = 8 + 14 + 3 * 8 + 1 + 8 + 4 * 4
    raw[offset:offset + 8] = np.array([7.5]).tobytes()
    with pytest.raises(FormatError):
        read_compressed(io.BytesIO(bytes(raw)))


def test_fixed_rank_artifacts_must_be_uniform():
    good = _compressed_bytes()
    good[9] = 1  # claim method 1 while ranks stay (1, 0)
    with pytest.raises(FormatError):
        read_compressed(io.BytesIO(bytes(good)))


def test_truncated_huge_declaration_fails_before_allocating(tmp_path):
    import struct

    body = b"STARMTEN" + struct.pack("<BBI", 1, 0, 3)
    body += np.asarray([1000, 1000, 1000], dtype="<u8").tobytes()
    body += b"\x00" * 16  # 8 GB declared, 16 bytes present
    path = tmp_path / "huge.ten"
    path.write_bytes(body)
    with track_peak() as stats:
        with pytest.raises(TruncatedPayloadError):
            read_tensor(path)
    assert stats.peak_bytes < 10 * 2 ** 20


def test_max_mode_count_enforced():
    import struct

    body = b"STARMTEN" + struct.pack("<BBI", 1, 0, 4_000_000)
    with pytest.raises(FormatError):
        read_tensor(io.BytesIO(body))


def test_bench_csv_schema(tmp_path):
    rows = [
        BenchRow("ttm", "batched", "2", 1, 0, 0.00125, 4096),
        BenchRow("svd", "slices-parallel", "", 4, 1, 0.5, 123456),
    ]
    path = tmp_path / "bench.csv"
    write_bench_csv(rows, path)
    with open(path, newline="") as f:
        parsed = list(csv.reader(f))
    assert parsed[0] == list(CSV_FIELDS)
    assert len(parsed) == 3
    assert parsed[1][0] == "ttm"
    assert int(parsed[2][3]) == 4
    assert float(parsed[1][5]) == 0.00125
    assert int(parsed[2][6]) == 123456
