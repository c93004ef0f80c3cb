"""Replica fan-out.  Results always come back in replica order, so any
reduction over them is independent of the worker count."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

from .walk import RngSpec

T = TypeVar("T")

THREADS_ENV = "LLN_THREADS"


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    return os.cpu_count() or 1


def map_replicas(fn: Callable[[int, np.random.Generator], T], rng: RngSpec, replicas: int,
                 threads: int | None = None) -> list[T]:
    """Run ``fn(replica_index, generator)`` for every replica."""
    def one(r: int) -> T:
        return fn(r, rng.replica(r).generator())

    workers = min(thread_count(threads), replicas)
    if workers <= 1:
        return [one(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(replicas)))
