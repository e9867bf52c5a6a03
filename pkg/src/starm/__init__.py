"""Facewise tensor SVD compression over orthonormal mode transforms.

Tensors are dense column-major float64 arrays. Compression moves a tensor
into a transform domain one mode at a time, truncates the SVD of every
frontal slice there, and stores the surviving factors.
"""

from .bench import BenchRow, bench_svd, bench_tsvdm2, bench_ttm, median_seconds
from .codec import (
    BadMagicError,
    CodecError,
    FormatError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    read_compressed,
    read_tensor,
    write_bench_csv,
    write_compressed,
    write_tensor,
)
from .memory import PeakStats, measure_peak, track_peak
from .slicesvd import (
    SLICES_PARALLEL,
    SVD_PARALLEL,
    SliceSVDSet,
    VariableRankFactors,
    svd_all_slices,
    svd_truncated_slices,
    svd_values_only,
)
from .synth import synthetic_tensor
from .tensor import DenseTensor, SliceIndex, linear_index, multi_index, refold
from .transforms import (
    CUSTOM,
    DATA_DRIVEN,
    DCT,
    IDENTITY,
    Transform,
    TransformSet,
    data_driven_transform,
    dct_matrix,
    identity_transform,
    orthonormality_residual,
    validate_transform,
)
from .tsvdm import (
    COMPUTE_EFFICIENT,
    MEMORY_EFFICIENT,
    METHOD_FIXED_RANK,
    METHOD_TOLERANCE,
    TRUNCATE,
    CompressedTensor,
    StageClock,
    ThresholdResult,
    TSVDMResult,
    compression_ratio,
    compute_threshold,
    full_tsvdm,
    reconstruct,
    starm_product,
    tsvdm_fixed_rank,
    tsvdm_tolerance,
)
from .ttm import (
    BATCHED,
    LOOP,
    PARFOR,
    TTMPlan,
    from_transform_domain,
    to_transform_domain,
    ttm,
    ttm_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "BATCHED",
    "BadMagicError",
    "BenchRow",
    "COMPUTE_EFFICIENT",
    "CUSTOM",
    "CodecError",
    "CompressedTensor",
    "DATA_DRIVEN",
    "DCT",
    "DenseTensor",
    "FormatError",
    "IDENTITY",
    "LOOP",
    "MEMORY_EFFICIENT",
    "METHOD_FIXED_RANK",
    "METHOD_TOLERANCE",
    "PARFOR",
    "PeakStats",
    "SLICES_PARALLEL",
    "SVD_PARALLEL",
    "SliceIndex",
    "SliceSVDSet",
    "StageClock",
    "TRUNCATE",
    "TSVDMResult",
    "TTMPlan",
    "ThresholdResult",
    "Transform",
    "TransformSet",
    "TruncatedPayloadError",
    "UnsupportedDtypeError",
    "UnsupportedVersionError",
    "VariableRankFactors",
    "bench_svd",
    "bench_tsvdm2",
    "bench_ttm",
    "compression_ratio",
    "compute_threshold",
    "data_driven_transform",
    "dct_matrix",
    "from_transform_domain",
    "full_tsvdm",
    "identity_transform",
    "linear_index",
    "measure_peak",
    "median_seconds",
    "multi_index",
    "orthonormality_residual",
    "read_compressed",
    "read_tensor",
    "reconstruct",
    "refold",
    "starm_product",
    "svd_all_slices",
    "svd_truncated_slices",
    "svd_values_only",
    "synthetic_tensor",
    "to_transform_domain",
    "track_peak",
    "tsvdm_fixed_rank",
    "tsvdm_tolerance",
    "ttm",
    "ttm_inverse",
    "validate_transform",
    "write_bench_csv",
    "write_compressed",
    "write_tensor",
]
