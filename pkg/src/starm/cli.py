"""Command-line front end: inspect, compress, decompress, compare, bench.

Exit codes: 0 on success, 2 for usage errors and malformed or mismatched
inputs, 1 for unexpected runtime failures.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import codec
from .bench import bench_svd, bench_tsvdm2, bench_ttm, median_seconds
from .slicesvd import SLICES_PARALLEL, STRATEGIES, SVD_PARALLEL
from .synth import synthetic_tensor
from .tensor import DenseTensor
from .transforms import CUSTOM, DATA_DRIVEN, DCT, IDENTITY, TransformSet, validate_transform
from .tsvdm import (
    COMPUTE_EFFICIENT,
    MEMORY_EFFICIENT,
    METHOD_FIXED_RANK,
    METHOD_TOLERANCE,
    TOLERANCE_STRATEGIES,
    TRUNCATE,
    compression_ratio,
    reconstruct,
    tsvdm_fixed_rank,
    tsvdm_tolerance,
)
from .ttm import BATCHED, VARIANTS

_SVD_STRATEGY_FLAGS = {"slices": SLICES_PARALLEL, "svd": SVD_PARALLEL}
_TOLERANCE_STRATEGY_FLAGS = {
    "truncate": TRUNCATE,
    "compute": COMPUTE_EFFICIENT,
    "memory": MEMORY_EFFICIENT,
}


def _fmt(x) -> str:
    return format(float(x), ".6g")


def _resolve_threads(value):
    if value is None:
        raw = os.environ.get("STARM_THREADS", "1")
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"STARM_THREADS must be an integer, got {raw!r}") from None
    value = int(value)
    if value < 1:
        raise ValueError(f"thread count must be positive, got {value}")
    return value


def _parse_dims(text):
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"dims must be comma-separated integers, got {text!r}") from None
    if len(dims) < 3 or min(dims) < 1:
        raise ValueError(f"dims must be at least three positive extents, got {text!r}")
    return dims


def _parse_int_list(text, what):
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"{what} must be comma-separated integers, got {text!r}") from None
    if not values:
        raise ValueError(f"{what} must not be empty")
    return values


def _load_custom_matrix(path):
    t = codec.read_tensor(path)
    arr = t.array
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"custom transform file must hold a matrix, got dims {t.dims}")
    return validate_transform(arr)


def _parse_transform_spec(spec, ndim):
    """One kind for every trailing mode, or a comma list with one per mode.

    Entries: identity, dct, data (or data-driven), custom:PATH.
    """
    parts = spec.split(",") if "," in spec else [spec] * (ndim - 2)
    if len(parts) != ndim - 2:
        raise ValueError(
            f"transform spec has {len(parts)} entries, tensor needs {ndim - 2}"
        )
    out = []
    for part in parts:
        part = part.strip()
        if part in (IDENTITY, DCT):
            out.append(part)
        elif part in ("data", DATA_DRIVEN):
            out.append(DATA_DRIVEN)
        elif part.startswith("custom:"):
            out.append(_load_custom_matrix(part[len("custom:"):]))
        else:
            raise ValueError(f"unknown transform {part!r}")
    return out


def _sniff_magic(path):
    with open(path, "rb") as f:
        return f.read(8)


def _cmd_info(args):
    magic = _sniff_magic(args.path)
    if magic == codec.TENSOR_MAGIC:
        t = codec.read_tensor(args.path)
        print("kind=tensor")
        print("dims=" + "x".join(str(n) for n in t.dims))
        print("dtype=float64")
        print(f"norm={_fmt(t.frobenius_norm())}")
        return 0
    if magic == codec.COMPRESSED_MAGIC:
        c = codec.read_compressed(args.path)
        print("kind=compressed")
        print("dims=" + "x".join(str(n) for n in c.dims))
        print("dtype=float64")
        print(f"method={c.method}")
        print(f"param={_fmt(c.param)}")
        print("transforms=" + ",".join(c.transforms.kinds))
        counts = {}
        for r in c.ranks:
            counts[int(r)] = counts.get(int(r), 0) + 1
        print("rank_hist=" + ",".join(f"{r}:{counts[r]}" for r in sorted(counts)))
        print(f"ratio={_fmt(compression_ratio(c))}")
        return 0
    raise codec.BadMagicError(f"unrecognized file (magic {magic!r})")


def _cmd_compress(args):
    threads = _resolve_threads(args.threads)
    t = codec.read_tensor(args.input)
    kinds = _parse_transform_spec(args.transform, t.ndim)
    ts = TransformSet.build(t.dims, kinds, tensor=t)
    if args.method == METHOD_FIXED_RANK:
        if args.rank is None or args.tol is not None:
            raise ValueError("tsvdm1 takes --rank and no --tol")
        c = tsvdm_fixed_rank(
            t, ts, args.rank, threads,
            svd_strategy=_SVD_STRATEGY_FLAGS[args.svd_strategy],
            ttm_variant=args.ttm_variant,
        )
    else:
        if args.tol is None or args.rank is not None:
            raise ValueError("tsvdm2 takes --tol and no --rank")
        if not 0.0 < args.tol < 1.0:
            raise ValueError(f"tolerance must lie in (0, 1), got {args.tol}")
        c = tsvdm_tolerance(
            t, ts, args.tol,
            strategy=_TOLERANCE_STRATEGY_FLAGS[args.strategy],
            threads=threads,
            svd_strategy=_SVD_STRATEGY_FLAGS[args.svd_strategy],
            ttm_variant=args.ttm_variant,
        )
    codec.write_compressed(c, args.output)
    print(f"error={_fmt(c.relative_error())}")
    print(f"ratio={_fmt(compression_ratio(c))}")
    return 0


def _cmd_decompress(args):
    threads = _resolve_threads(args.threads)
    c = codec.read_compressed(args.input)
    t = reconstruct(c, threads, ttm_variant=args.ttm_variant)
    codec.write_tensor(t, args.output)
    return 0


def _cmd_error(args):
    a = codec.read_tensor(args.a)
    b = codec.read_tensor(args.b)
    if a.dims != b.dims:
        raise ValueError(f"dims differ: {a.dims} vs {b.dims}")
    denom = a.frobenius_norm()
    diff = float(np.linalg.norm(a.data - b.data))
    if denom == 0.0:
        value = 0.0 if diff == 0.0 else math.inf
    else:
        value = diff / denom
    print(_fmt(value))
    return 0


def _cmd_bench(args):
    if (args.input is None) == (args.dims is None):
        raise ValueError("bench needs exactly one of --input or --dims")
    if args.input is not None:
        t = codec.read_tensor(args.input)
    else:
        t = synthetic_tensor(
            _parse_dims(args.dims), seed=args.seed,
            facewise_rank=args.facewise_rank, snr=args.snr,
        )
    threads_list = _parse_int_list(args.threads_list, "--threads-list")
    if min(threads_list) < 1:
        raise ValueError("thread counts must be positive")
    measure_mem = not args.no_mem
    if args.kernel == "ttm":
        modes = None
        if args.modes is not None:
            modes = _parse_int_list(args.modes, "--modes")
        rows = bench_ttm(t, modes=modes, threads_list=threads_list,
                         trials=args.trials, measure_mem=measure_mem)
    elif args.kernel == "svd":
        rows = bench_svd(t, threads_list=threads_list, trials=args.trials,
                         measure_mem=measure_mem, transform=args.transform)
    else:
        if not 0.0 < args.tol < 1.0:
            raise ValueError(f"tolerance must lie in (0, 1), got {args.tol}")
        rows = bench_tsvdm2(t, args.tol, threads_list=threads_list,
                            trials=args.trials, measure_mem=measure_mem,
                            transform=args.transform)
    if args.csv is None:
        codec.write_bench_csv(rows, sys.stdout)
    else:
        codec.write_bench_csv(rows, args.csv)
        for key, med in sorted(median_seconds(rows).items()):
            kernel, variant, mode, threads = key
            label = f" mode={mode}" if mode else ""
            print(f"{kernel} variant={variant}{label} threads={threads} "
                  f"median={med:.6f}s")
    return 0


def _cmd_gen(args):
    t = synthetic_tensor(
        _parse_dims(args.dims), seed=args.seed,
        facewise_rank=args.facewise_rank, snr=args.snr,
        transform=args.transform,
    )
    codec.write_tensor(t, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starm",
        description="Facewise tensor SVD compression over orthonormal mode transforms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="describe a tensor or compressed file")
    p.add_argument("path")
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("compress", help="compress a raw tensor file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=(METHOD_FIXED_RANK, METHOD_TOLERANCE),
                   default=METHOD_TOLERANCE)
    p.add_argument("--rank", type=int, help="uniform rank for tsvdm1")
    p.add_argument("--tol", type=float, help="relative error bound for tsvdm2")
    p.add_argument("--transform", default=DCT,
                   help="identity|dct|data|custom:PATH, one for all modes or a comma list")
    p.add_argument("--strategy", choices=sorted(_TOLERANCE_STRATEGY_FLAGS),
                   default="memory", help="tsvdm2 pipeline strategy")
    p.add_argument("--svd-strategy", choices=sorted(_SVD_STRATEGY_FLAGS),
                   default="slices")
    p.add_argument("--ttm-variant", choices=VARIANTS, default=BATCHED)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: STARM_THREADS or 1)")
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("decompress", help="expand a compressed artifact")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--ttm-variant", choices=VARIANTS, default=BATCHED)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_decompress)

    p = sub.add_parser("error", help="relative Frobenius error between two tensors")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_error)

    p = sub.add_parser("bench", help="time kernels and emit CSV rows")
    p.add_argument("--kernel", choices=("ttm", "svd", "tsvdm2"), required=True)
    p.add_argument("--input", help="raw tensor file to load")
    p.add_argument("--dims", help="synthesize a tensor with these extents")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--facewise-rank", type=int, default=2)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--transform", choices=(IDENTITY, DCT), default=DCT)
    p.add_argument("--modes", help="comma list of modes for the ttm kernel")
    p.add_argument("--tol", type=float, default=0.2, help="tsvdm2 tolerance")
    p.add_argument("--threads-list", default="1")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--csv", help="write rows here instead of stdout")
    p.add_argument("--no-mem", action="store_true",
                   help="skip the instrumented memory repetition")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gen", help="write a seeded synthetic tensor")
    p.add_argument("output")
    p.add_argument("--dims", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--facewise-rank", type=int, default=2)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--transform", choices=(IDENTITY, DCT), default=DCT)
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (codec.CodecError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: LAPACK breakdowns and the like
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
