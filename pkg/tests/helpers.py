"""Shared test inputs and slow reference oracles.

The oracles here recompute results through deliberately naive routes
(fiber loops, subset enumeration) so the fast kernels have something
independent to agree with.
"""

from itertools import combinations
from math import prod

import numpy as np

from starm import DenseTensor


def random_tensor(dims, seed):
    rng = np.random.default_rng(seed)
    return DenseTensor(rng.standard_normal(prod(dims)), dims, copy=False)


def correlated_tensor(seed, dims=(6, 5, 8), components=2, noise=0.05):
    """Slices drawn from a shared low-dimensional mixture, then perturbed."""
    rng = np.random.default_rng(seed)
    m, p = dims[0], dims[1]
    n = prod(dims[2:])
    basis = [
        np.outer(rng.standard_normal(m), rng.standard_normal(p))
        for _ in range(components)
    ]
    slices = np.empty((m, p, n), order="F")
    for i in range(n):
        weights = rng.standard_normal(components)
        slices[:, :, i] = sum(w * b for w, b in zip(weights, basis))
        slices[:, :, i] += noise * rng.standard_normal((m, p))
    return DenseTensor(slices.reshape(dims, order="F"), copy=False)


def random_orthonormal(n, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def rel_error(reference, other):
    return float(
        np.linalg.norm(reference.data - other.data) / np.linalg.norm(reference.data)
    )


def ttm_fiber_oracle(t, mode, mat):
    """Mode product computed one fiber at a time with plain dot products."""
    dims = t.dims
    out_dims = dims[:mode] + (mat.shape[0],) + dims[mode + 1:]
    out = np.zeros(out_dims, order="F")
    other_dims = [n for k, n in enumerate(dims) if k != mode]
    for rest in np.ndindex(*other_dims):
        sel = rest[:mode] + (slice(None),) + rest[mode:]
        out[sel] = mat @ t.array[sel]
    return DenseTensor(out)


def best_discardable_energy(squared, budget):
    """Largest subset sum of squared values strictly below the budget.

    Exhaustive over all subsets; only for tiny fixtures.
    """
    values = list(squared)
    best = 0.0
    for size in range(len(values) + 1):
        for combo in combinations(values, size):
            energy = sum(combo)
            if energy < budget:
                best = max(best, energy)
    return best
