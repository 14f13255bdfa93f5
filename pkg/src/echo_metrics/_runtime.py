"""Seeded RNG substreams and ordered parallel map."""

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "ECHO_METRICS_THREADS"


def substream(seed, *labels):
    """Return a Generator derived from ``seed`` and a path of labels.

    Labels may be ints or strings; strings are hashed with crc32 so the
    stream depends only on (seed, labels), never on call order.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        if isinstance(label, str):
            key.append(zlib.crc32(label.encode("utf-8")))
        else:
            key.append(int(label))
    return np.random.default_rng(np.random.SeedSequence(key))


def thread_count():
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def map_ordered(fn, items):
    """``list(map(fn, items))``, possibly threaded; output order is input order."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
