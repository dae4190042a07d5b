import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsds import bits
from wsds.bits import (BitVector, PackedList, SliceTable, build_slice_table,
                       concat_pieces, mask, pack, registry, unpack_array)
from wsds.errors import ContractViolation


def assert_canonical(pl: PackedList):
    tail = (pl.count * pl.width) & 63
    if tail and len(pl.words):
        assert int(pl.words[-1]) >> tail == 0


def test_pack_examples():
    empty = pack([], 4)
    assert empty.count == 0 and len(empty.words) == 0
    pl = pack([5, 0, 7], 3)
    assert len(pl.words) == 1
    assert int(pl.words[0]) == 5 | (0 << 3) | (7 << 6)
    assert [pl.get(i) for i in range(3)] == [5, 0, 7]
    assert pl.get(2) == 7


def test_pack_fig_sequence():
    codes = [2, 0, 5, 6, 0, 4, 7, 1, 7, 5, 3]
    pl = pack(codes, 3)
    assert pl.count == 11 and pl.width == 3
    assert [pl.get(i) for i in range(11)] == codes


def test_pack_value_too_wide():
    with pytest.raises(ContractViolation):
        pack([8], 3)


def test_get_set_bounds():
    pl = pack([1, 2, 3], 4)
    with pytest.raises(IndexError):
        pl.get(3)
    with pytest.raises(IndexError):
        pl.set(-1, 0)
    with pytest.raises(ContractViolation):
        pl.set(0, 16)


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=1, max_value=64), st.data())
def test_pack_get_roundtrip(width, data):
    vals = data.draw(st.lists(st.integers(min_value=0, max_value=(1 << width) - 1),
                              max_size=40))
    pl = pack(vals, width)
    assert [pl.get(i) for i in range(len(vals))] == vals
    assert_canonical(pl)


def test_set_then_get_random():
    rng = np.random.default_rng(0)
    for _ in range(60):
        width = int(rng.integers(1, 65))
        n = int(rng.integers(1, 120))
        vals = [int(x) for x in rng.integers(0, 1 << min(width, 63), n)]
        pl = pack(vals, width)
        for _ in range(25):
            i = int(rng.integers(0, n))
            v = int(rng.integers(0, 1 << min(width, 63)))
            pl.set(i, v)
            vals[i] = v
            assert pl.get(i) == v
        assert [pl.get(i) for i in range(n)] == vals
        assert_canonical(pl)


def test_get_width64_is_plain_word():
    vals = [2 ** 63 + 5, 17, 2 ** 64 - 1]
    pl = pack(vals, 64)
    assert [pl.get(i) for i in range(3)] == vals
    assert pl.words.tolist() == [np.uint64(v) for v in vals]


def test_append():
    a = pack([1], 2)
    b = pack([2, 3], 2)
    assert a.append(b) == pack([1, 2, 3], 2)
    empty = pack([], 2)
    assert a.append(empty) == a
    assert empty.append(a) == a
    with pytest.raises(ContractViolation):
        a.append(pack([1], 3))


def test_append_unaligned_boundary():
    # first list ends mid-word at an odd multiple of 32 bits
    a = pack(list(range(8)), 4)  # 32 bits
    b = pack(list(range(9)), 4)
    ab = a.append(b)
    assert [ab.get(i) for i in range(17)] == list(range(8)) + list(range(9))
    assert_canonical(ab)


def test_split_examples():
    assert pack([], 3).split(4) == []
    chunks = pack(list(range(1, 11)), 4).split(3)
    assert [c.count for c in chunks] == [3, 3, 3, 1]
    assert [c.get(0) for c in chunks] == [1, 4, 7, 10]
    with pytest.raises(ContractViolation):
        pack([1], 1).split(0)


def test_split_append_inverse():
    rng = np.random.default_rng(1)
    for trial in range(50):
        width = int(rng.integers(1, 20))
        n = int(rng.integers(0, 200))
        vals = rng.integers(0, 1 << width, n)
        pl = pack(vals, width)
        for k in (1, 2, 3, 5, 8, max(1, 16 // width)):
            parts = pl.split(k)
            acc = PackedList.empty(width)
            for p in parts:
                acc = acc.append(p)
            assert acc == pl, (trial, k)


def test_bitvector_basics():
    bv = BitVector.from_bits([0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0])
    assert len(bv) == 11
    assert [bv.get(i) for i in range(11)] == [0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0]
    assert bv.count_ones() == 6
    with pytest.raises(IndexError):
        bv.get(11)


def test_unpack_array_matches_get():
    rng = np.random.default_rng(2)
    for width in (1, 3, 7, 13, 20, 31, 37, 64):
        n = int(rng.integers(1, 100))
        vals = rng.integers(0, 1 << min(width, 63), n).astype(np.uint64)
        pl = pack(vals, width)
        padded = np.concatenate([pl.words, np.zeros(1, np.uint64)])
        assert unpack_array(padded, width, n).tolist() == vals.tolist()


def test_concat_pieces_skips_empty():
    words, total = concat_pieces(np.array([3, 9, 1], dtype=np.uint64),
                                 np.array([2, 0, 1], dtype=np.int64))
    assert total == 3
    assert int(words[0]) == 3 | (1 << 2)


# -- slice tables ---------------------------------------------------------------


def brute_partition(value, length, slice_bits, t):
    elems = [(value >> (j * slice_bits)) & mask(slice_bits) for j in range(length)]
    routed = [(e >> (slice_bits - 1 - t)) & 1 for e in elems]
    bm = sum(b << j for j, b in enumerate(routed))
    zeros = [e for e, b in zip(elems, routed) if not b]
    ones = [e for e, b in zip(elems, routed) if b]
    l0 = sum(e << (j * slice_bits) for j, e in enumerate(zeros))
    l1 = sum(e << (j * slice_bits) for j, e in enumerate(ones))
    return bm, l0, len(zeros), l1, len(ones)


def test_slice_table_tiny_examples():
    t11 = build_slice_table(1, 1)
    assert t11.lookup(1, 1, 0) == (1, 0, 0, 1, 1)
    t22 = build_slice_table(2, 2)
    # chunk [2, 1] at t=0: element 0 routes right, element 1 left
    value = 2 | (1 << 2)
    assert t22.lookup(value, 2, 0) == (0b01, 1, 1, 2, 1)


def test_slice_table_exhaustive_small():
    for slice_bits in (1, 2, 3):
        cap = min(4, 16 // slice_bits)
        tbl = build_slice_table(slice_bits, cap)
        for length in range(0, cap + 1):
            for t in range(slice_bits):
                for value in range(1 << (length * slice_bits)):
                    assert tbl.lookup(value, length, t) == \
                        brute_partition(value, length, slice_bits, t)


def test_slice_table_random_probes_large_params():
    rng = np.random.default_rng(3)
    for slice_bits in (4, 5, 8):
        cap = 16 // slice_bits
        tbl = registry().slice_table(slice_bits, cap)
        for _ in range(4000):
            length = int(rng.integers(0, cap + 1))
            t = int(rng.integers(0, slice_bits))
            value = int(rng.integers(0, 1 << (length * slice_bits))) if length else 0
            assert tbl.lookup(value, length, t) == \
                brute_partition(value, length, slice_bits, t)


def test_slice_table_key_budget():
    with pytest.raises(ContractViolation):
        SliceTable(5, 4)  # 20 bits exceeds the key budget


# -- registry -------------------------------------------------------------------


def test_popcount_table_example():
    assert registry().popcount_table(8)[0b10110000] == 3


def test_nth_one_table_example():
    entry = int(registry().nth_one_table(8)[0b10110000])
    assert (entry >> 4) & 15 == 5  # second set bit, positions counted LSB-first
    assert entry & 15 == 4


def test_symbol_count_example():
    tbl = registry().symbol_tables(4, 2, 8)
    block = 2 | (0 << 2) | (2 << 4)
    assert tbl.block_histogram(block, 3) == (1, 0, 2, 0)


def test_symbol_tables_probe_consistency():
    rng = np.random.default_rng(4)
    tbl = registry().symbol_tables(8)
    u, w = tbl.block_syms, tbl.width
    for _ in range(2000):
        syms = rng.integers(0, 8, u)
        value = int(sum(int(s) << (j * w) for j, s in enumerate(syms)))
        ell = int(rng.integers(1, u + 1))
        c = int(rng.integers(0, 8))
        assert tbl.cnt_eq[c, ell - 1, value] == sum(1 for s in syms[:ell] if s == c)
        assert tbl.cnt_le[c, ell - 1, value] == sum(1 for s in syms[:ell] if s <= c)
        occ = [j for j, s in enumerate(syms) if s == c]
        for j, p in enumerate(occ):
            assert tbl.nth_sym[c, j, value] == p


def test_registry_memoizes_and_reports_bytes():
    reg = bits.TableRegistry()
    t1 = reg.slice_table(2)
    t2 = reg.slice_table(2)
    assert t1 is t2
    assert reg.table_bytes() == t1.table_bytes()
    reg.popcount_table(8)
    assert reg.table_bytes() > t1.table_bytes()
