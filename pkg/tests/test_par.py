import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsds.errors import ContractViolation
from wsds.par import (CostMeter, Pool, SortItem, ceil_log2, prefix_sum,
                      sort_perm_by_key, stable_sort_by_key)


def test_ceil_log2():
    assert [ceil_log2(x) for x in (0, 1, 2, 3, 4, 5, 8, 9)] == [0, 0, 1, 2, 2, 3, 3, 4]


def test_prefix_sum_empty():
    pre, total = prefix_sum([], meter=CostMeter())
    assert pre == [] and total == 0


def test_prefix_sum_basic():
    pre, total = prefix_sum([3, 1, 2])
    assert pre == [0, 3, 4]
    assert total == 6


def test_prefix_sum_noncommutative_matches_serial_fold():
    # string concatenation is associative but not commutative
    xs = ["a", "bb", "c", "dd", "e", "f"] * 40
    pre, total = prefix_sum(xs, lambda a, b: a + b, "", grain=7)
    acc = ""
    for i, x in enumerate(xs):
        assert pre[i] == acc
        acc += x
    assert total == acc


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=-50, max_value=50), max_size=60),
       st.integers(min_value=2, max_value=9))
def test_prefix_sum_matches_fold(xs, grain):
    pre, total = prefix_sum(xs, grain=grain)
    acc = 0
    for i, x in enumerate(xs):
        assert pre[i] == acc
        acc += x
    assert total == acc


def test_prefix_sum_vector_operator():
    # per-chunk count vectors combined by elementwise addition
    vecs = [(1, 0, 2), (0, 0, 1), (3, 1, 0), (0, 2, 2)]
    add = lambda a, b: tuple(x + y for x, y in zip(a, b))
    pre, total = prefix_sum(vecs, add, (0, 0, 0))
    assert pre[3] == (4, 1, 3)
    assert total == (4, 3, 5)


def test_stable_sort_examples():
    out = stable_sort_by_key([(1, "a"), (0, "b"), (1, "c")], 1)
    assert out == [SortItem(0, "b"), SortItem(1, "a"), SortItem(1, "c")]
    inp = [(0, 0), (1, 1), (3, 2), (3, 3), (7, 4)]
    assert [tuple(x) for x in stable_sort_by_key(inp, 3)] == inp


def test_stable_sort_key_out_of_range():
    with pytest.raises(ContractViolation):
        stable_sort_by_key([(4, "x")], 2)


def test_stable_sort_random_vs_serial():
    # 1000 instances, sizes log-uniform up to 10^4, key widths up to 12 bits
    rng = np.random.default_rng(7)
    for trial in range(1000):
        n = int(np.exp(rng.uniform(0, np.log(10_000))))
        bits = int(rng.integers(1, 13))
        keys = rng.integers(0, 1 << bits, n)
        pairs = [(int(k), i) for i, k in enumerate(keys)]
        got = [tuple(x) for x in stable_sort_by_key(pairs, bits)]
        assert got == sorted(pairs, key=lambda t: t[0]), trial


def test_sort_perm_deterministic_across_threads():
    rng = np.random.default_rng(3)
    keys = rng.integers(0, 32, 50_000).astype(np.uint64)
    results = []
    for t in (1, 2, 8):
        pool = Pool(t)
        m = CostMeter()
        perm = sort_perm_by_key(keys, 5, m, pool)
        results.append((perm.tobytes(), m.work, m.span))
        pool.shutdown()
    assert results[0] == results[1] == results[2]


def test_meter_span_le_work():
    rng = np.random.default_rng(5)
    keys = rng.integers(0, 64, 30_000).astype(np.uint64)
    m = CostMeter()
    sort_perm_by_key(keys, 6, m)
    assert 0 < m.span <= m.work


def test_meter_join_semantics():
    parent = CostMeter()
    kids = [CostMeter(work=10, span=4), CostMeter(work=7, span=6)]
    parent.absorb_parallel(kids)
    assert parent.work == 17
    assert parent.span == 6 + 1  # max child span plus log2(2) fork overhead


def test_parallel_for_fill():
    for threads in (1, 4):
        pool = Pool(threads)
        out = [0] * 8
        m = CostMeter()
        pool.parallel_for(8, lambda i, mm: out.__setitem__(i, i), m)
        assert out == list(range(8))
        pool.shutdown()
    pool = Pool(2)
    pool.parallel_for(0, lambda i, mm: (_ for _ in ()).throw(AssertionError))
    pool.shutdown()


def test_nested_fork_join_runs_inline():
    pool = Pool(4)
    out = []

    def outer(m):
        inner = pool.run_tasks([lambda mm: 1, lambda mm: 2], m)
        out.append(sum(inner))
        return None

    pool.run_tasks([outer, outer], CostMeter())
    assert out == [3, 3]
    pool.shutdown()
