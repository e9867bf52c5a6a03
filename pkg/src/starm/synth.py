"""Seeded synthetic tensors with controllable facewise rank and noise."""

from __future__ import annotations

import math
from math import prod

import numpy as np

from .tensor import DenseTensor
from .transforms import DCT, IDENTITY, TransformSet
from .ttm import from_transform_domain


def synthetic_tensor(dims, seed=0, facewise_rank=1, snr=10.0, transform=DCT) -> DenseTensor:
    """Low facewise-rank structure in a chosen transform domain plus noise.

    Each transform-domain slice is a random rank-``facewise_rank`` matrix
    with geometrically decaying component scales; moving it out of the
    domain spreads the structure across slices. ``snr`` is the ratio of
    signal to noise Frobenius norms; ``math.inf`` disables the noise.

    Only regenerable transform kinds make sense here.
    """
    dims = tuple(int(n) for n in dims)
    if len(dims) < 3:
        raise ValueError("synthetic tensors need at least three modes")
    if transform not in (DCT, IDENTITY):
        raise ValueError(f"synthetic structure supports identity or dct, got {transform!r}")
    snr = float(snr)
    if snr <= 0:
        raise ValueError(f"signal-to-noise ratio must be positive, got {snr}")
    m, p = dims[0], dims[1]
    rank = min(int(facewise_rank), m, p)
    if rank < 1:
        raise ValueError(f"facewise rank must be positive, got {facewise_rank}")
    rng = np.random.default_rng(seed)
    n = prod(dims[2:])
    slices = np.empty((m, p, n), order="F")
    scales = 2.0 ** -np.arange(rank)
    for i in range(n):
        left = rng.standard_normal((m, rank))
        right = rng.standard_normal((rank, p))
        slices[:, :, i] = (left * scales) @ right
    core = DenseTensor(slices.reshape(dims, order="F"), copy=False)
    ts = TransformSet.build(dims, transform)
    signal = from_transform_domain(core, ts)
    if math.isinf(snr):
        return signal
    noise = rng.standard_normal(signal.size)
    norm = np.linalg.norm(noise)
    if norm > 0:
        noise *= signal.frobenius_norm() / (norm * snr)
    return DenseTensor(signal.data + noise, dims, copy=False)
