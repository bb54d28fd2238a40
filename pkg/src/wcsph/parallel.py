"""Serial and thread-parallel per-particle loops.

Work is split into contiguous, statically sized index blocks. The heavy
block bodies are numba functions compiled with ``nogil=True``, so worker
threads run them concurrently. Each body writes only the indices of its
own block, which keeps every phase race-free and makes results
independent of the worker count.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import Callable

WORKERS_ENV = "SPH_WORKERS"


@dataclass(frozen=True)
class ExecPolicy:
    parallel: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        if not self.parallel and self.workers != 1:
            raise ValueError("serial policy uses exactly one worker")

    @classmethod
    def serial(cls) -> "ExecPolicy":
        return cls(False, 1)

    @classmethod
    def threads(cls, workers: int) -> "ExecPolicy":
        return cls(True, int(workers))

    @classmethod
    def from_workers(cls, workers: int | None) -> "ExecPolicy":
        """``None`` falls back to $SPH_WORKERS, then to serial."""
        if workers is None:
            env = os.environ.get(WORKERS_ENV)
            workers = int(env) if env else 1
        return cls.serial() if workers <= 1 else cls.threads(workers)

    def __str__(self):
        return f"Parallel({self.workers})" if self.parallel else "Serial"


SERIAL = ExecPolicy.serial()

_pools: dict[int, ThreadPoolExecutor] = {}
_pools_lock = threading.Lock()


def _pool(workers: int) -> ThreadPoolExecutor:
    with _pools_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sph")
            _pools[workers] = pool
        return pool


def partition(n: int, blocks: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into at most ``blocks`` contiguous, near-equal ranges."""
    blocks = max(1, min(blocks, n))
    base, extra = divmod(n, blocks)
    out = []
    start = 0
    for b in range(blocks):
        stop = start + base + (1 if b < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def parallel_for_blocks(n: int, policy: ExecPolicy, body: Callable, *args) -> list:
    """Call ``body(start, stop, *args)`` over a static partition of ``range(n)``.

    Returns the per-block return values in block order. The first failure
    cancels blocks that have not started and is re-raised.
    """
    if n <= 0:
        return []
    if not policy.parallel:
        return [body(0, n, *args)]
    ranges = partition(n, policy.workers)
    futures = [_pool(policy.workers).submit(body, a, b, *args) for a, b in ranges]
    done, pending = wait(futures, return_when=FIRST_EXCEPTION)
    for f in futures:
        if f.done() and f.exception() is not None:
            for p in pending:
                p.cancel()
            wait(pending)
            raise f.exception()
    return [f.result() for f in futures]


def parallel_for_particles(n: int, policy: ExecPolicy, body: Callable[[int], object]) -> None:
    """Invoke ``body(i)`` exactly once for each ``i`` in ``range(n)``.

    ``body`` must only write state owned by index ``i``.
    """

    def run_block(start, stop):
        for i in range(start, stop):
            body(i)

    parallel_for_blocks(n, policy, run_block)
