"""Wall-clock benchmark harness emitting the fixed CSV schema.

Timing and memory are measured separately: each configuration runs
``trials`` timed repetitions, then one extra untimed repetition under the
allocation tracker, so tracker overhead never pollutes the seconds column.
"""

from __future__ import annotations

import statistics
import time
from typing import NamedTuple

from .memory import measure_peak
from .slicesvd import STRATEGIES, svd_all_slices
from .transforms import DCT, TransformSet, dct_matrix
from .tsvdm import TOLERANCE_STRATEGIES, StageClock, tsvdm_tolerance
from .ttm import VARIANTS, to_transform_domain, ttm


class BenchRow(NamedTuple):
    kernel: str
    variant: str
    mode: str
    threads: int
    trial: int
    seconds: float
    peak_bytes: int


def _timed(fn, trials, measure_mem):
    times = []
    for _ in range(int(trials)):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    peak = 0
    if measure_mem:
        _, peak = measure_peak(fn)
    return times, peak


def bench_ttm(t, modes=None, variants=VARIANTS, threads_list=(1,), trials=3,
              measure_mem=True):
    """Time single-mode contractions; one row per trial per configuration."""
    rows = []
    modes = list(modes) if modes is not None else list(range(2, t.ndim))
    for mode in modes:
        mat = dct_matrix(t.dims[mode])
        for variant in variants:
            for threads in threads_list:
                times, peak = _timed(
                    lambda: ttm(t, mode, mat, variant, threads), trials, measure_mem
                )
                rows.extend(
                    BenchRow("ttm", variant, str(mode), threads, i, sec, peak)
                    for i, sec in enumerate(times)
                )
    return rows


def bench_svd(t, strategies=STRATEGIES, threads_list=(1,), trials=3,
              measure_mem=True, transform=DCT):
    """Time untruncated slicewise SVDs of the transform-domain tensor."""
    ts = TransformSet.build(t.dims, transform)
    ahat = to_transform_domain(t, ts)
    rows = []
    for strategy in strategies:
        for threads in threads_list:
            times, peak = _timed(
                lambda: svd_all_slices(ahat, strategy, threads), trials, measure_mem
            )
            rows.extend(
                BenchRow("svd", strategy, "", threads, i, sec, peak)
                for i, sec in enumerate(times)
            )
    return rows


def bench_tsvdm2(t, epsilon, strategies=TOLERANCE_STRATEGIES, threads_list=(1,),
                 trials=3, measure_mem=True, transform=DCT):
    """Time tolerance-driven compression with a per-stage breakdown.

    Each trial emits one row per pipeline stage (stage1-svd, threshold,
    stage2-svd, pack); stages a strategy never enters report zero seconds.
    The peak column carries the whole call's transient peak.
    """
    ts = TransformSet.build(t.dims, transform)
    rows = []
    for strategy in strategies:
        for threads in threads_list:
            peak = 0
            if measure_mem:
                _, peak = measure_peak(
                    tsvdm_tolerance, t, ts, epsilon, strategy, threads
                )
            for trial in range(int(trials)):
                clock = StageClock()
                tsvdm_tolerance(t, ts, epsilon, strategy, threads, clock=clock)
                rows.extend(
                    BenchRow(stage, strategy, "", threads, trial, sec, peak)
                    for stage, sec in clock.seconds.items()
                )
    return rows


def median_seconds(rows):
    """Median seconds per (kernel, variant, mode, threads) configuration."""
    groups = {}
    for row in rows:
        groups.setdefault((row.kernel, row.variant, row.mode, row.threads), []).append(
            row.seconds
        )
    return {key: statistics.median(vals) for key, vals in groups.items()}
