"""Fork-join primitives with deterministic work/span accounting.

Construction kernels charge an abstract word-machine cost: one unit per
word read, word write, or scalar ALU op (bit-field extract/insert count as
single ops). Allocation, scheduling, and interpreter overhead are never
charged. Meters are therefore exact functions of the input and of the
logical fork tree: work never depends on the thread count, and span never
depends on actual scheduling.
"""
from __future__ import annotations

import operator
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation

WORD_BITS = 64
SCAN_GRAIN = 4096
SORT_GRAIN = 4096


def ceil_log2(x: int) -> int:
    """Smallest k with 2**k >= max(x, 1)."""
    x = int(x)
    return (x - 1).bit_length() if x > 1 else 0


def ceil_div(a: int, b: int) -> int:
    return -(-int(a) // int(b))


class CostMeter:
    """Work (total ops) and span (critical-path ops) accumulator."""

    __slots__ = ("work", "span")

    def __init__(self, work: int = 0, span: int = 0):
        self.work = work
        self.span = span

    def charge(self, ops: int, span_ops: int | None = None) -> None:
        self.work += ops
        self.span += ops if span_ops is None else span_ops

    def charge_parallel(self, count: int, unit_work: int, unit_span: int | None = None) -> None:
        """Charge `count` independent bodies of uniform cost plus fork overhead."""
        count = int(count)
        if count <= 0:
            return
        self.work += count * unit_work
        self.span += (unit_work if unit_span is None else unit_span) + ceil_log2(count)

    def absorb_parallel(self, children: Sequence[CostMeter]) -> None:
        """Join point: child works add, child spans race, plus fork overhead."""
        if not children:
            return
        self.work += sum(c.work for c in children)
        self.span += max(c.span for c in children) + ceil_log2(len(children))

    def add(self, other: CostMeter) -> None:
        self.work += other.work
        self.span += other.span

    def __repr__(self) -> str:
        return f"CostMeter(work={self.work}, span={self.span})"


def _env_threads() -> int:
    try:
        return max(1, int(os.environ.get("WSDS_THREADS", "1")))
    except ValueError:
        return 1


class Pool:
    """Fork-join task runner.

    A task may fork subtasks and must join them before returning. Sibling
    tasks share no mutable state except disjoint output slices, so results
    are identical at any thread count. Each forked task gets a fresh
    CostMeter; the meters are merged at the join in task order.
    """

    def __init__(self, threads: int | None = None):
        self.threads = max(1, int(threads)) if threads is not None else _env_threads()
        self._local = threading.local()
        self._executor: ThreadPoolExecutor | None = None

    def _get_executor(self) -> ThreadPoolExecutor:
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.threads)
        return self._executor

    def run_tasks(self, tasks: Sequence[Callable[[CostMeter], Any]],
                  meter: CostMeter | None = None) -> list:
        """Fork the callables, join, merge their meters; results in task order."""
        tasks = list(tasks)
        if not tasks:
            return []
        meters = [CostMeter() for _ in tasks]
        nested = getattr(self._local, "depth", 0)
        if self.threads == 1 or nested or len(tasks) == 1:
            # Nested forks run inline: the executor must never wait on itself.
            self._local.depth = nested + 1
            try:
                results = [fn(m) for fn, m in zip(tasks, meters)]
            finally:
                self._local.depth = nested
        else:
            ex = self._get_executor()

            def call(fn, m):
                self._local.depth = 1
                try:
                    return fn(m)
                finally:
                    self._local.depth = 0

            futures = [ex.submit(call, fn, m) for fn, m in zip(tasks, meters)]
            results = [f.result() for f in futures]
        if meter is not None:
            meter.absorb_parallel(meters)
        return results

    def parallel_for(self, count: int, body: Callable[[int, CostMeter], None],
                     meter: CostMeter | None = None, grain: int | None = None) -> None:
        """Run body(i, meter) for i in [0, count); bodies must write disjointly.

        Span is charged as the max over leaf tasks plus fork overhead
        logarithmic in the task count. The grain only groups execution; it
        defaults to 1 below SCAN_GRAIN indices so the charge matches the
        max-over-bodies model exactly on small ranges.
        """
        count = int(count)
        if count <= 0:
            return
        g = grain if grain is not None else (1 if count <= SCAN_GRAIN else ceil_div(count, SCAN_GRAIN))

        def leaf(lo, hi):
            def run(m):
                for i in range(lo, hi):
                    body(i, m)
            return run

        tasks = [leaf(lo, min(lo + g, count)) for lo in range(0, count, g)]
        self.run_tasks(tasks, meter)

    def shutdown(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None


_DEFAULT_POOL: Pool | None = None


def default_pool() -> Pool:
    global _DEFAULT_POOL
    if _DEFAULT_POOL is None:
        _DEFAULT_POOL = Pool()
    return _DEFAULT_POOL


# ---------------------------------------------------------------------------
# prefix sum


def scan_span(n: int, grain: int = SCAN_GRAIN) -> int:
    """Span of the blocked exclusive scan over n items (2 ops per item/pass)."""
    n = int(n)
    if n <= 0:
        return 0
    if n <= grain:
        return 2 * n
    blocks = ceil_div(n, grain)
    return 4 * grain + scan_span(blocks, grain) + 2 * ceil_log2(blocks)


def prefix_sum(values: Sequence, op: Callable = None, identity=0,
               meter: CostMeter | None = None, pool: Pool | None = None,
               grain: int = SCAN_GRAIN):
    """Exclusive left scan: returns (prefixes, total).

    prefixes[i] = identity (+) values[0] (+) ... (+) values[i-1]; the result
    equals the serial left fold element for element (op must be associative
    but need not be commutative).
    """
    if op is None:
        op = operator.add
    xs = list(values)
    n = len(xs)
    if n == 0:
        if meter is not None:
            meter.charge(1, 1)
        return [], identity
    if n <= grain:
        out = [identity] * n
        acc = identity
        for i, x in enumerate(xs):
            out[i] = acc
            acc = op(acc, x)
        if meter is not None:
            meter.charge(2 * n, 2 * n)
        return out, acc
    pool = pool or default_pool()
    blocks = [(lo, min(lo + grain, n)) for lo in range(0, n, grain)]

    def reduce_block(lo, hi):
        def run(m):
            acc = identity
            for i in range(lo, hi):
                acc = op(acc, xs[i])
            m.charge(2 * (hi - lo))
            return acc
        return run

    sums = pool.run_tasks([reduce_block(lo, hi) for lo, hi in blocks], meter)
    block_pre, total = prefix_sum(sums, op, identity, meter, pool, grain)
    out = [identity] * n

    def rescan_block(bi, lo, hi):
        def run(m):
            acc = block_pre[bi]
            for i in range(lo, hi):
                out[i] = acc
                acc = op(acc, xs[i])
            m.charge(2 * (hi - lo))
        return run

    pool.run_tasks([rescan_block(bi, lo, hi) for bi, (lo, hi) in enumerate(blocks)], meter)
    return out, total


def excl_cumsum(arr: np.ndarray, meter: CostMeter | None = None) -> tuple[np.ndarray, int]:
    """Vectorized exclusive integer scan, charged per the blocked-scan model."""
    arr = np.asarray(arr)
    if arr.dtype != np.int64:
        arr = arr.astype(np.int64)
    n = int(arr.shape[0])
    out = np.zeros(n + 1, dtype=np.int64)
    if n:
        np.cumsum(arr, out=out[1:])
    if meter is not None:
        meter.charge(2 * n, scan_span(n))
    return out[:-1], int(out[n])


# ---------------------------------------------------------------------------
# stable integer sort


class SortItem(NamedTuple):
    key: int
    payload: Any


def _sort_grain(key_bits: int) -> int:
    # Histogram memory stays O(n): blocks hold at least 8 * 2^key_bits items.
    return max(SORT_GRAIN, 8 << key_bits)


def sort_perm_by_key(keys: np.ndarray, key_bits: int,
                     meter: CostMeter | None = None,
                     pool: Pool | None = None) -> np.ndarray:
    """Stable permutation sorting `keys` ascending (block counting sort).

    Returns perm with keys[perm] sorted and equal keys in input order.
    Work is O(n + B * 2^key_bits) where B is the input-determined block
    count, so meters match at every thread count.
    """
    key_bits = int(key_bits)
    if not 0 <= key_bits <= 24:
        raise ContractViolation(f"key_bits out of range: {key_bits}")
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    n = int(keys.shape[0])
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if int(keys.max()) >> key_bits:
        raise ContractViolation("key exceeds 2**key_bits")
    if meter is not None:
        meter.charge(n, scan_span(n))  # key range validation pass
    nkeys = 1 << key_bits
    grain = _sort_grain(key_bits)
    nblocks = ceil_div(n, grain)
    bounds = [(b * grain, min((b + 1) * grain, n)) for b in range(nblocks)]
    pool = pool or default_pool()
    counts = np.zeros((nblocks, nkeys), dtype=np.int64)

    def hist(b, lo, hi):
        def run(m):
            counts[b] = np.bincount(keys[lo:hi].astype(np.int64), minlength=nkeys)
            m.charge(2 * (hi - lo) + nkeys)
        return run

    pool.run_tasks([hist(b, lo, hi) for b, (lo, hi) in enumerate(bounds)], meter)
    # Key-major offsets: all items with key k across blocks land contiguously.
    starts, _ = excl_cumsum(counts.T.ravel(), meter)
    perm = np.empty(n, dtype=np.int64)

    def scatter(b, lo, hi):
        def run(m):
            kb = keys[lo:hi]
            order = np.argsort(kb, kind="stable")
            sk = kb[order].astype(np.int64)
            block_starts, _ = excl_cumsum(counts[b])
            within = np.arange(hi - lo, dtype=np.int64) - block_starts[sk]
            dest = starts[sk * nblocks + b] + within
            perm[dest] = order + lo
            m.charge(4 * (hi - lo) + 2 * nkeys)
        return run

    pool.run_tasks([scatter(b, lo, hi) for b, (lo, hi) in enumerate(bounds)], meter)
    return perm


def stable_sort_by_key(items: Sequence, key_bits: int,
                       meter: CostMeter | None = None,
                       pool: Pool | None = None) -> list[SortItem]:
    """Stable sort of (key, payload) pairs by key ascending."""
    pairs = [(int(k), p) for k, p in items]
    keys = np.array([k for k, _ in pairs] or [0], dtype=np.uint64)[: len(pairs)]
    perm = sort_perm_by_key(keys, key_bits, meter, pool)
    return [SortItem(*pairs[i]) for i in perm]
