import numpy as np
import pytest

from wsds import archive, oracle, wt
from wsds.errors import OccurrenceRangeError
from wsds.par import Pool

FIG = [ord(c) for c in "cafgaehbhfd"]


def tree_signature(t):
    return {k: (v.bitmap.nbits, v.bitmap.words.tobytes()) for k, v in t.nodes.items()}


def test_map_alphabet():
    codes, alphabet = wt.map_alphabet([ord(c) for c in "abca"])
    assert [codes.get(i) for i in range(4)] == [0, 1, 2, 0]
    assert len(alphabet) == 3
    codes, alphabet = wt.map_alphabet([0, 1, 2, 1])
    assert [codes.get(i) for i in range(4)] == [0, 1, 2, 1]
    codes, alphabet = wt.map_alphabet(FIG)
    assert len(alphabet) == 8
    assert [codes.get(i) for i in range(11)] == [2, 0, 5, 6, 0, 4, 7, 1, 7, 5, 3]


def test_fig_bitmaps_and_queries():
    tree = wt.build_tree(FIG, "packed", slice_bits=2)
    assert list(tree.nodes[0].bitmap.bit_array()) == [0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0]
    assert list(tree.nodes[1].bitmap.bit_array()) == [1, 0, 0, 0, 1]
    assert tree.access(5) == ord("e")
    assert tree.rank(ord("a"), 4) == 2
    assert tree.select(ord("f"), 2) == 9
    for i in range(11):
        assert tree.access(i) == FIG[i]


def test_fig_cross_algorithms():
    codes, alphabet = wt.map_alphabet(FIG)
    trees = [
        wt.build_packed_serial(codes, 8, 2, alphabet=alphabet),
        wt.build_parallel_sorted(codes, 8, 2, alphabet=alphabet),
        wt.build_domain_decomp(codes, 8, 3, 2, alphabet=alphabet),
        wt.build_naive(codes, 8, 2, alphabet=alphabet),
    ]
    sigs = [tree_signature(t) for t in trees]
    assert all(s == sigs[0] for s in sigs)
    blobs = {archive.serialize(t) for t in trees}
    assert len(blobs) == 1


def test_domain_decomposition_part_sizes():
    # 11 symbols over 3 parts split 4, 4, 3
    codes, alphabet = wt.map_alphabet(FIG)
    t = wt.build_domain_decomp(codes, 8, 3, 2, alphabet=alphabet)
    assert tree_signature(t) == tree_signature(
        wt.build_packed_serial(codes, 8, 2, alphabet=alphabet))
    # more parts than symbols degrades to one symbol per part
    t2 = wt.build_domain_decomp(codes, 8, 99, 2, alphabet=alphabet)
    assert tree_signature(t2) == tree_signature(t)


def test_cross_algorithm_sweep():
    rng = np.random.default_rng(0)
    for trial in range(60):
        n = int(rng.integers(0, 3000))
        raw = rng.integers(0, int(rng.integers(1, 70)), n)
        tau = int(rng.integers(1, 5))
        parts = int(rng.choice([1, 2, 3, 7, 16]))
        codes, alphabet = wt.map_alphabet(raw)
        sigma = len(alphabet)
        sigs = [tree_signature(b) for b in (
            wt.build_packed_serial(codes, sigma, tau, alphabet=alphabet,
                                   with_rank_select=False),
            wt.build_parallel_sorted(codes, sigma, tau, alphabet=alphabet,
                                     with_rank_select=False),
            wt.build_domain_decomp(codes, sigma, parts, tau, alphabet=alphabet,
                                   with_rank_select=False),
            wt.build_naive(codes, sigma, tau, alphabet=alphabet,
                           with_rank_select=False),
        )]
        assert all(s == sigs[0] for s in sigs), (trial, n, sigma, tau, parts)


def test_queries_vs_oracle_sweep():
    rng = np.random.default_rng(1)
    for trial in range(20):
        n = int(rng.integers(1, 500))
        raw = [int(x) for x in rng.integers(0, int(rng.integers(1, 64)), n)]
        tree = wt.build_tree(raw, rng.choice(["packed", "sorted", "domain"]))
        for i in range(n):
            assert tree.access(i) == raw[i]
        for c in sorted(set(raw)):
            for i in range(0, n, max(1, n // 11)):
                assert tree.rank(c, i) == oracle.ref_rank(raw, c, i)
                assert tree.rank_le(c, i) == oracle.ref_rank_le(raw, c, i)
            total = raw.count(c)
            for j in range(1, total + 1, max(1, total // 7)):
                assert tree.select(c, j) == oracle.ref_select(raw, c, j)


def test_inverse_identities():
    rng = np.random.default_rng(2)
    raw = [int(x) for x in rng.integers(0, 30, 2000)]
    tree = wt.build_tree(raw, "sorted")
    for c in sorted(set(raw)):
        total = raw.count(c)
        for j in range(1, total + 1, 3):
            assert tree.rank(c, tree.select(c, j)) == j
    for i in range(0, 2000, 17):
        c = raw[i]
        assert tree.select(c, tree.rank(c, i)) == i


def test_absent_symbol_semantics():
    tree = wt.build_tree([2, 4, 6], "packed")
    assert tree.rank(3, 2) == 0
    assert tree.rank_le(3, 2) == 1
    assert tree.rank_le(1, 2) == 0
    with pytest.raises(OccurrenceRangeError):
        tree.select(3, 1)


def test_single_symbol_tree():
    tree = wt.build_tree([7, 7, 7, 7], "packed")
    assert tree.depth == 0 and tree.nodes == {}
    assert tree.access(2) == 7
    assert tree.rank(7, 3) == 4
    assert tree.select(7, 2) == 1
    assert tree.rank_le(9, 3) == 4


def test_empty_tree():
    tree = wt.build_tree([], "domain")
    assert tree.n == 0 and tree.nodes == {}
    with pytest.raises(IndexError):
        tree.access(0)


def test_space_accounting():
    rng = np.random.default_rng(3)
    for sigma in (2, 5, 16, 40, 64):
        raw = rng.integers(0, sigma, 1500)
        tree = wt.build_tree(raw, "packed")
        assert tree.total_bitmap_bits() <= 1500 * oracle.tree_depth(tree.sigma)
    # full power-of-two alphabet: every level fully populated
    raw = np.concatenate([np.arange(16), rng.integers(0, 16, 1000)])
    tree = wt.build_tree(raw, "packed")
    assert tree.total_bitmap_bits() == len(raw) * 4


def test_thread_determinism():
    rng = np.random.default_rng(4)
    raw = rng.integers(0, 50, 60_000)
    codes, alphabet = wt.map_alphabet(raw)
    sigma = len(alphabet)
    blobs = []
    meters = []
    for threads in (1, 2, 8):
        pool = Pool(threads)
        t = wt.build_parallel_sorted(codes, sigma, 3, alphabet=alphabet, pool=pool)
        blobs.append(archive.serialize(t))
        meters.append((t.build_meter.work, t.build_meter.span, t.rs_meter.work))
        pool.shutdown()
    assert blobs[0] == blobs[1] == blobs[2]
    assert meters[0] == meters[1] == meters[2]


def test_work_ratio_trend_smoke():
    rng = np.random.default_rng(5)
    ratios = []
    for e in (14, 16):
        raw = rng.integers(0, 256, 1 << e)
        codes, alphabet = wt.map_alphabet(raw)
        naive = wt.build_naive(codes, 256, alphabet=alphabet, with_rank_select=False)
        packed = wt.build_packed_serial(codes, 256, alphabet=alphabet,
                                        with_rank_select=False)
        ratios.append(naive.build_meter.work / packed.build_meter.work)
    assert ratios[-1] > 1.3
    assert ratios[1] >= ratios[0] * 0.999
