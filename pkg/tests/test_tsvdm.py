"""Thresholding, facewise products, and the compression entry points."""

import math

import numpy as np
import pytest

from starm import (
    COMPUTE_EFFICIENT,
    MEMORY_EFFICIENT,
    TRUNCATE,
    CompressedTensor,
    DenseTensor,
    StageClock,
    TransformSet,
    VariableRankFactors,
    compression_ratio,
    compute_threshold,
    dct_matrix,
    full_tsvdm,
    identity_transform,
    measure_peak,
    reconstruct,
    starm_product,
    svd_values_only,
    synthetic_tensor,
    to_transform_domain,
    tsvdm_fixed_rank,
    tsvdm_tolerance,
    validate_transform,
)

from helpers import (
    best_discardable_energy,
    random_orthonormal,
    random_tensor,
    rel_error,
)

STRATEGIES = (TRUNCATE, COMPUTE_EFFICIENT, MEMORY_EFFICIENT)


def test_threshold_worked_fixture():
    th = compute_threshold(np.array([[3.0], [2.0], [1.0]]), 0.32)
    assert np.array_equal(th.v, [1.0, 4.0, 9.0])
    assert np.array_equal(th.w, [1.0, 5.0, 14.0])
    assert th.j == 1
    assert th.tau == 1.0
    assert np.array_equal(th.ranks, [2])
    assert th.discarded_energy == 1.0
    assert th.total_energy == 14.0
    error = math.sqrt(th.discarded_energy / th.total_energy)
    assert abs(error - 1.0 / math.sqrt(14.0)) <= 1e-12
    # exhaustive-subset oracle: no admissible discard set does better
    oracle = best_discardable_energy(th.v, 0.32 ** 2 * th.total_energy)
    assert th.discarded_energy == oracle


def test_threshold_invariants_on_random_values():
    rng = np.random.default_rng(0)
    for trial in range(20):
        s = np.abs(rng.standard_normal((rng.integers(1, 6), rng.integers(1, 9))))
        for eps in (0.05, 0.2, 0.5, 0.9):
            th = compute_threshold(s, eps)
            assert (np.diff(th.v) >= 0).all()
            assert (np.diff(th.w) >= 0).all()
            total = float((s ** 2).sum())
            assert abs(th.w[-1] - total) <= 1e-12 * total
            assert th.discarded_energy < eps ** 2 * th.total_energy
            # ranks come from a pure value cutoff at tau, ties resolved
            # collectively one way or the other
            strict = (s ** 2 > th.tau).sum(axis=0)
            loose = (s ** 2 >= th.tau).sum(axis=0)
            assert np.array_equal(th.ranks, strict) or np.array_equal(th.ranks, loose)


def test_threshold_retains_ties_when_dropping_them_breaks_the_budget():
    # squared values {4, 1, 1, 1}: the prefix rule points at dropping two
    # of the ones, but a value cutoff drops all three and overshoots, so
    # every tied value must be kept
    s = np.array([[2.0, 1.0], [1.0, 1.0]])
    eps = math.sqrt(2.5 / 7.0)
    th = compute_threshold(s, eps)
    assert th.tau == 1.0
    assert np.array_equal(th.ranks, [2, 2])
    assert th.discarded_energy == 0.0


def test_threshold_drops_ties_when_the_budget_allows():
    # squared values {4, 1, 1}: dropping both ones stays under the budget
    s = np.array([[2.0], [1.0], [1.0]])
    eps = math.sqrt(2.5 / 6.0)
    th = compute_threshold(s, eps)
    assert th.tau == 1.0
    assert np.array_equal(th.ranks, [1])
    assert th.discarded_energy == 2.0


def test_threshold_budget_below_smallest_value():
    # nothing can be discarded, so the cutoff stays at zero
    th = compute_threshold(np.array([[3.0], [1.0]]), 0.01)
    assert th.j == 0
    assert th.tau == 0.0
    assert np.array_equal(th.ranks, [2])
    assert th.discarded_energy == 0.0


def test_threshold_never_retains_exact_zeros():
    # a zero cutoff still drops zero singular values: the comparison is strict
    th = compute_threshold(np.array([[3.0, 0.0], [1.0, 0.0]]), 0.01)
    assert th.tau == 0.0
    assert np.array_equal(th.ranks, [2, 0])
    assert th.discarded_energy == 0.0


def test_threshold_all_zero_matrix():
    th = compute_threshold(np.zeros((3, 4)), 0.3)
    assert np.array_equal(th.ranks, np.zeros(4, dtype=int))
    assert th.total_energy == 0.0
    assert th.tau == 0.0


def test_threshold_validation():
    with pytest.raises(ValueError):
        compute_threshold(np.ones((2, 2)), 0.0)
    with pytest.raises(ValueError):
        compute_threshold(np.ones((2, 2)), 1.0)
    with pytest.raises(ValueError):
        compute_threshold(-np.ones((2, 2)), 0.5)
    with pytest.raises(ValueError):
        compute_threshold(np.full((2, 2), np.nan), 0.5)


def _facewise_oracle(a, b):
    m, _ = a.slice_shape
    _, cols = b.slice_shape
    n = a.num_slices
    out = np.empty((m, cols, n), order="F")
    for i in range(n):
        out[:, :, i] = a.frontal_slice(i) @ b.frontal_slice(i)
    return out.reshape((m, cols) + a.dims[2:], order="F")


def test_product_matches_slicewise_oracle_under_identity():
    a = random_tensor((4, 3, 5, 2), seed=1)
    b = random_tensor((3, 6, 5, 2), seed=2)
    ts = TransformSet.build((4, 6, 5, 2), "identity")
    got = starm_product(a, b, ts)
    expected = _facewise_oracle(a, b)
    assert got.dims == (4, 6, 5, 2)
    assert np.linalg.norm(got.array - expected) <= 1e-12 * np.linalg.norm(expected)


def test_product_is_associative():
    a = random_tensor((3, 4, 6), seed=3)
    b = random_tensor((4, 5, 6), seed=4)
    c = random_tensor((5, 2, 6), seed=5)
    for kinds in ("dct", "identity"):
        ts_ab = TransformSet.build((3, 5, 6), kinds)
        left = starm_product(starm_product(a, b, ts_ab), c, ts_ab)
        right = starm_product(a, starm_product(b, c, ts_ab), ts_ab)
        assert rel_error(left, right) <= 1e-11


def test_product_validates_shapes():
    a = random_tensor((3, 4, 5), seed=0)
    ts = TransformSet.build((3, 3, 5), "dct")
    with pytest.raises(ValueError):
        starm_product(a, random_tensor((3, 3, 5), seed=1), ts)  # 4 vs 3 inner
    with pytest.raises(ValueError):
        starm_product(a, random_tensor((4, 3, 6), seed=1), ts)  # trailing dims


def _transform_cycle(dims, seed):
    """One of each construction kind, keyed off the seed."""
    kinds = ["identity", "dct", "data-driven", "custom"]
    pick = kinds[seed % len(kinds)]
    if pick == "custom":
        return [validate_transform(random_orthonormal(n, seed + 7)) for n in dims[2:]]
    return pick


def test_full_decomposition_is_lossless():
    for seed in range(8):
        dims = ((4, 5, 3), (3, 3, 2, 4), (5, 2, 3, 2, 2))[seed % 3]
        t = random_tensor(dims, seed=seed)
        kinds = _transform_cycle(dims, seed)
        ts = TransformSet.build(dims, kinds, tensor=t)
        result = full_tsvdm(t, ts)
        assert rel_error(t, result.reconstruct()) <= 1e-11


def test_fixed_rank_error_equals_tail_energy():
    for seed in range(6):
        t = random_tensor((6, 5, 4, 2), seed=seed)
        ts = TransformSet.build(t.dims, _transform_cycle(t.dims, seed), tensor=t)
        values = svd_values_only(to_transform_domain(t, ts))
        for rank in (1, 2, 4):
            c = tsvdm_fixed_rank(t, ts, rank)
            assert (c.ranks == rank).all()
            err_sq = float(np.linalg.norm(reconstruct(c).data - t.data) ** 2)
            tail = float((values[rank:, :] ** 2).sum())
            total = float((values ** 2).sum())
            assert abs(err_sq - tail) <= 1e-10 * total
            assert c.discarded_energy is not None
            assert abs(c.discarded_energy - tail) <= 1e-10 * total


def test_fixed_rank_validation():
    t = random_tensor((4, 5, 3), seed=0)
    ts = TransformSet.build(t.dims, "dct")
    with pytest.raises(ValueError):
        tsvdm_fixed_rank(t, ts, 0)
    with pytest.raises(ValueError):
        tsvdm_fixed_rank(t, ts, 5)


def test_tolerance_guarantee_and_strategy_agreement():
    for seed in range(6):
        t = random_tensor((5, 6, 4, 3), seed=seed)
        ts = TransformSet.build(t.dims, _transform_cycle(t.dims, seed), tensor=t)
        for eps in (0.4, 0.15):
            results = {s: tsvdm_tolerance(t, ts, eps, strategy=s) for s in STRATEGIES}
            recons = {s: reconstruct(results[s]) for s in STRATEGIES}
            base = results[TRUNCATE]
            for s in STRATEGIES:
                err = rel_error(t, recons[s])
                assert err < eps
                assert np.array_equal(results[s].ranks, base.ranks)
                assert rel_error(recons[TRUNCATE], recons[s]) <= 1e-10
                assert abs(results[s].relative_error() - err) <= 1e-8


def test_tolerance_on_exactly_low_rank_data():
    t = synthetic_tensor((8, 8, 6), seed=5, facewise_rank=2, snr=math.inf)
    ts = TransformSet.build(t.dims, "dct")
    c = tsvdm_tolerance(t, ts, 0.05)
    assert c.ranks.max() <= 2
    assert rel_error(t, reconstruct(c)) < 0.05


def test_tolerance_on_zero_tensor():
    t = DenseTensor.zeros((4, 4, 3))
    ts = TransformSet.build(t.dims, "identity")
    c = tsvdm_tolerance(t, ts, 0.3)
    assert (c.ranks == 0).all()
    assert c.relative_error() == 0.0
    assert np.array_equal(reconstruct(c).data, np.zeros(48))


def test_tolerance_validation():
    t = random_tensor((4, 4, 3), seed=0)
    ts = TransformSet.build(t.dims, "dct")
    with pytest.raises(ValueError):
        tsvdm_tolerance(t, ts, 1.5)
    with pytest.raises(ValueError):
        tsvdm_tolerance(t, ts, 0.2, strategy="lazy")


def test_stage_clock_covers_the_pipeline():
    t = random_tensor((6, 6, 8), seed=1)
    ts = TransformSet.build(t.dims, "dct")
    for strategy in STRATEGIES:
        clock = StageClock()
        tsvdm_tolerance(t, ts, 0.3, strategy=strategy, clock=clock)
        assert set(clock.seconds) == {"stage1-svd", "threshold", "stage2-svd", "pack"}
        assert all(v >= 0.0 for v in clock.seconds.values())


def test_strategy_memory_ordering():
    """With output far smaller than input the footprints must order:
    memory-efficient <= compute-efficient <= truncate."""
    dims = (32, 32, 96)
    t = synthetic_tensor(dims, seed=0, facewise_rank=2, snr=50.0)
    ts = TransformSet.build(dims, "dct")
    peaks = {}
    ranks_sum = None
    for strategy in STRATEGIES:
        c, peak = measure_peak(tsvdm_tolerance, t, ts, 0.1, strategy)
        peaks[strategy] = peak
        ranks_sum = c.factors.total_rank
    assert min(dims[0], dims[1]) * c.factors.num_slices >= 10 * ranks_sum
    assert peaks[MEMORY_EFFICIENT] <= peaks[COMPUTE_EFFICIENT] <= peaks[TRUNCATE]


def test_reconstruct_rejects_inconsistent_metadata():
    t = random_tensor((4, 5, 3), seed=2)
    ts = TransformSet.build(t.dims, "dct")
    c = tsvdm_tolerance(t, ts, 0.3)
    with pytest.raises(ValueError):
        VariableRankFactors(4, 5, c.ranks, c.factors.u_data[:-1], c.factors.g_data)
    with pytest.raises(ValueError):
        CompressedTensor((4, 5, 4), ts, c.factors, c.method, c.param)
    with pytest.raises(ValueError):
        CompressedTensor((4, 5, 3), ts, c.factors, "tsvdm9", c.param)


def test_compression_ratio_worked_examples():
    # full-rank cube with a regenerable transform stores more than it saves
    factors = VariableRankFactors.allocate(10, 10, np.full(10, 10))
    ts = TransformSet((dct_matrix(10),))
    c = CompressedTensor((10, 10, 10), ts, factors, "tsvdm1", 10.0)
    assert compression_ratio(c) == 0.5

    # rank-one profile on a six-mode tensor: stored entries are one left
    # and one right vector per slice
    dims = (73, 144, 17, 4, 365, 10)
    n = 17 * 4 * 365 * 10
    factors = VariableRankFactors.allocate(73, 144, np.ones(n, dtype=np.int64))
    ts = TransformSet(tuple(dct_matrix(k) for k in dims[2:]))
    c = CompressedTensor(dims, ts, factors, "tsvdm1", 1.0)
    expected = np.prod([float(d) for d in dims]) / (n * (73 + 144))
    assert abs(compression_ratio(c) - expected) <= 1e-9 * expected


def test_compression_ratio_counts_stored_transforms():
    t = random_tensor((6, 5, 4), seed=3)
    ts_dct = TransformSet.build(t.dims, "dct")
    ts_custom = TransformSet((validate_transform(random_orthonormal(4, seed=1)),))
    c_dct = tsvdm_fixed_rank(t, ts_dct, 2)
    c_custom = tsvdm_fixed_rank(t, ts_custom, 2)
    stored_dct = 2 * 4 * (6 + 5)
    assert compression_ratio(c_dct) == 120 / stored_dct
    assert compression_ratio(c_custom) == 120 / (stored_dct + 16)


def test_compression_ratio_infinite_when_nothing_is_stored():
    factors = VariableRankFactors.allocate(4, 4, np.zeros(3, dtype=np.int64))
    ts = TransformSet((identity_transform(3),))
    c = CompressedTensor((4, 4, 3), ts, factors, "tsvdm2", 0.5)
    assert compression_ratio(c) == math.inf
