"""Chunked thread dispatch shared by the multithreaded kernels."""

from __future__ import annotations

import concurrent.futures


def chunk_ranges(n, parts):
    """Split range(n) into at most ``parts`` contiguous near-equal ranges."""
    parts = max(1, min(int(parts), n))
    step, extra = divmod(n, parts)
    out = []
    start = 0
    for i in range(parts):
        size = step + (1 if i < extra else 0)
        out.append(range(start, start + size))
        start += size
    return out


def run_chunked(n, threads, worker):
    """Run ``worker(chunk)`` over a partition of range(n).

    With one chunk the call happens inline on the calling thread, so
    single-threaded runs stay deterministic and easy to debug. Worker
    exceptions propagate to the caller.
    """
    if n == 0:
        return
    chunks = chunk_ranges(n, threads)
    if len(chunks) == 1:
        worker(chunks[0])
        return
    with concurrent.futures.ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(worker, chunk) for chunk in chunks]
        for fut in futures:
            fut.result()
