"""Peak transient allocation tracking for the memory-sensitive kernels."""

from __future__ import annotations

import tracemalloc
from contextlib import contextmanager
from dataclasses import dataclass


@dataclass
class PeakStats:
    """Filled in when the surrounding :func:`track_peak` block exits."""

    peak_bytes: int = 0


@contextmanager
def track_peak():
    """Track peak transient allocation, in bytes, of the enclosed block.

    Transient means allocation above the level held when the block was
    entered; buffers freed inside the block still count toward the peak.
    Python-level allocations only (numpy buffers are visible). Not
    reentrant: nesting resets the shared peak counter.
    """
    was_tracing = tracemalloc.is_tracing()
    if not was_tracing:
        tracemalloc.start()
    base = tracemalloc.get_traced_memory()[0]
    tracemalloc.reset_peak()
    stats = PeakStats()
    try:
        yield stats
    finally:
        peak = tracemalloc.get_traced_memory()[1]
        stats.peak_bytes = max(0, peak - base)
        if not was_tracing:
            tracemalloc.stop()


def measure_peak(fn, *args, **kwargs):
    """Run ``fn`` and return ``(result, peak transient bytes)``."""
    with track_peak() as stats:
        result = fn(*args, **kwargs)
    return result, stats.peak_bytes
