import numpy as np
import pytest

from wsds import oracle, var, wt
from wsds.errors import ContractViolation, OccurrenceRangeError

FIG = [ord(c) for c in "cafgaehbhfd"]


def fig_setup():
    codes, alphabet = wt.map_alphabet(FIG)
    return codes, alphabet


# -- codebooks -------------------------------------------------------------------


def test_huffman_balanced_case():
    book = var.huffman_codebook([1, 1, 1, 1])
    assert sorted(ln for _, ln in book.codes.values()) == [2, 2, 2, 2]


def test_huffman_skewed_lengths():
    book = var.huffman_codebook([4, 2, 1, 1])
    assert [book.codes[s][1] for s in range(4)] == [1, 2, 3, 3]
    assert book.cost([4, 2, 1, 1]) == 4 + 4 + 3 + 3


def test_huffman_never_beats_fixed_length():
    rng = np.random.default_rng(0)
    for _ in range(60):
        sigma = int(rng.integers(2, 20))
        freqs = [int(x) for x in rng.integers(0, 9, sigma)]
        if not any(freqs):
            freqs[0] = 1
        book = var.huffman_codebook(freqs)
        depth = oracle.tree_depth(sum(1 for f in freqs if f))
        assert book.cost(freqs) <= sum(freqs) * max(depth, 1)


def test_huffman_zero_and_singleton():
    book = var.huffman_codebook([0, 5, 0])
    assert book.codes == {1: (0, 0)}
    assert book.height == 0
    with pytest.raises(ContractViolation):
        var.huffman_codebook([0, 0])


def test_huffman_deterministic():
    freqs = [3, 3, 2, 2, 2, 1]
    a = var.huffman_codebook(freqs).codes
    b = var.huffman_codebook(list(freqs)).codes
    assert a == b


def test_codebook_prefix_free_enforced():
    with pytest.raises(ContractViolation):
        var.Codebook({0: (0, 1), 1: (0, 2), 2: (1, 1)})


# -- shaped trees ----------------------------------------------------------------


def test_shaped_balanced_matches_tree_bitmaps():
    codes, alphabet = fig_setup()
    shaped = var.build_shaped(codes, var.balanced_codebook(8), 2, alphabet=alphabet)
    tree = wt.build_packed_serial(codes, 8, 2, alphabet=alphabet)
    assert len(shaped.nodes) == len(tree.nodes)
    for (d, p), node in shaped.nodes.items():
        assert node.bitmap == tree.nodes[(1 << d) - 1 + p].bitmap


def test_shaped_fig_vs_reference():
    codes, alphabet = fig_setup()
    freqs = np.bincount(codes.unpack().astype(np.int64), minlength=8)
    book = var.huffman_codebook(freqs)
    shaped = var.build_shaped(codes, book, 2, alphabet=alphabet)
    ref = oracle.ref_shaped_bitmaps([int(x) for x in codes.unpack()], book.codes)
    assert set(shaped.nodes) == set(ref)
    for key, bits in ref.items():
        assert list(shaped.nodes[key].bitmap.bit_array()) == bits
    for i in range(11):
        assert shaped.access(i) == FIG[i]
    for c in set(FIG):
        for i in range(11):
            assert shaped.rank(c, i) == oracle.ref_rank(FIG, c, i)
        for j in range(1, FIG.count(c) + 1):
            assert shaped.select(c, j) == oracle.ref_select(FIG, c, j)


def test_shaped_random_sweep():
    rng = np.random.default_rng(1)
    for trial in range(25):
        n = int(rng.integers(1, 500))
        raw = [int(x) for x in rng.integers(0, int(rng.integers(1, 40)), n)]
        codes, alphabet = wt.map_alphabet(raw)
        sigma = len(alphabet)
        freqs = np.bincount(codes.unpack().astype(np.int64), minlength=sigma)
        book = var.huffman_codebook(freqs)
        tau = int(rng.integers(1, 5))
        shaped = var.build_shaped(codes, book, tau, alphabet=alphabet)
        ref = oracle.ref_shaped_bitmaps([int(x) for x in codes.unpack()], book.codes)
        assert set(shaped.nodes) == set(ref), trial
        for key, bits in ref.items():
            assert list(shaped.nodes[key].bitmap.bit_array()) == bits, (trial, key)
        for i in range(n):
            assert shaped.access(i) == raw[i]
        total_bits = shaped.total_bitmap_bits()
        assert total_bits == book.cost(np.bincount(
            codes.unpack().astype(np.int64), minlength=sigma))


def test_shaped_symbol_without_codeword():
    codes, alphabet = fig_setup()
    book = var.huffman_codebook([1, 1, 1, 1, 1, 1, 1, 0])
    with pytest.raises(ContractViolation):
        var.build_shaped(codes, book, 2, alphabet=alphabet)


# -- multiary trees --------------------------------------------------------------


def test_multiary_fig_vs_reference():
    codes, alphabet = fig_setup()
    for degree in (2, 4, 8):
        mt = var.build_multiary(codes, 8, degree, alphabet=alphabet)
        ref = oracle.ref_multiary_digits([int(x) for x in codes.unpack()], 8, degree)
        assert set(mt.nodes) == set(ref)
        for key, digits in ref.items():
            node = mt.nodes[key]
            assert [node.seq.get(i) for i in range(len(digits))] == digits
        for i in range(11):
            assert mt.access(i) == FIG[i]
        for c in set(FIG):
            for i in range(11):
                assert mt.rank(c, i) == oracle.ref_rank(FIG, c, i)
                assert mt.rank_le(c, i) == oracle.ref_rank_le(FIG, c, i)
            for j in range(1, FIG.count(c) + 1):
                assert mt.select(c, j) == oracle.ref_select(FIG, c, j)


def test_multiary_degree_validation():
    codes, alphabet = fig_setup()
    for bad in (1, 3, 6, 32):
        with pytest.raises(ContractViolation):
            var.build_multiary(codes, 8, bad, alphabet=alphabet)


def test_multiary_matches_binary_queries():
    rng = np.random.default_rng(2)
    raw = [int(x) for x in rng.integers(0, 23, 800)]
    codes, alphabet = wt.map_alphabet(raw)
    sigma = len(alphabet)
    mt = var.build_multiary(codes, sigma, 2, alphabet=alphabet)
    bt = wt.build_packed_serial(codes, sigma, 2, alphabet=alphabet)
    for c in sorted(set(raw)):
        for i in range(0, 800, 23):
            assert mt.rank(c, i) == bt.rank(c, i)
        for j in range(1, raw.count(c) + 1, 3):
            assert mt.select(c, j) == bt.select(c, j)


def test_multiary_random_sweep():
    rng = np.random.default_rng(3)
    for trial in range(15):
        n = int(rng.integers(1, 600))
        raw = [int(x) for x in rng.integers(0, int(rng.integers(2, 64)), n)]
        codes, alphabet = wt.map_alphabet(raw)
        sigma = len(alphabet)
        degree = int(rng.choice([2, 4, 8, 16]))
        mt = var.build_multiary(codes, sigma, degree, alphabet=alphabet)
        ref = oracle.ref_multiary_digits([int(x) for x in codes.unpack()], sigma, degree)
        assert set(mt.nodes) == set(ref), trial
        for i in range(n):
            assert mt.access(i) == raw[i]
        for c in sorted(set(raw))[::3]:
            for i in range(0, n, max(1, n // 9)):
                assert mt.rank(c, i) == oracle.ref_rank(raw, c, i)
                assert mt.rank_le(c, i) == oracle.ref_rank_le(raw, c, i)


def test_multiary_digit_space_bound():
    rng = np.random.default_rng(4)
    raw = rng.integers(0, 37, 1200)
    codes, alphabet = wt.map_alphabet(raw)
    sigma = len(alphabet)
    mt = var.build_multiary(codes, sigma, 4, alphabet=alphabet)
    assert mt.total_digit_bits() <= 1200 * oracle.tree_depth(sigma)


# -- wavelet matrix --------------------------------------------------------------


def test_matrix_fig_levels():
    codes, alphabet = fig_setup()
    mx = var.build_wavelet_matrix(codes, 8, 2, alphabet=alphabet)
    assert list(mx.levels[0].bitmap.bit_array()) == [0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0]
    assert mx.zeros[0] == 5
    assert list(mx.levels[1].bitmap.bit_array()) == [1, 0, 0, 0, 1, 0, 1, 0, 1, 1, 0]
    levels, zeros = oracle.ref_matrix_levels([int(x) for x in codes.unpack()], 8)
    for l in range(3):
        assert list(mx.levels[l].bitmap.bit_array()) == levels[l]
        assert mx.zeros[l] == zeros[l]


def test_matrix_binary_alphabet():
    raw = [0, 1, 1, 0, 1]
    mx = var.build_wavelet_matrix(wt.map_alphabet(raw)[0], 2)
    assert len(mx.levels) == 1
    assert list(mx.levels[0].bitmap.bit_array()) == raw
    assert mx.zeros[0] == 2


def test_matrix_queries_vs_oracle():
    rng = np.random.default_rng(5)
    for trial in range(20):
        n = int(rng.integers(1, 700))
        raw = [int(x) for x in rng.integers(0, int(rng.integers(1, 60)), n)]
        codes, alphabet = wt.map_alphabet(raw)
        sigma = len(alphabet)
        tau = int(rng.integers(1, 5))
        mx = var.build_wavelet_matrix(codes, sigma, tau, alphabet=alphabet)
        levels, zeros = oracle.ref_matrix_levels([int(x) for x in codes.unpack()], sigma)
        for l in range(len(levels)):
            assert list(mx.levels[l].bitmap.bit_array()) == levels[l], (trial, l)
            assert mx.zeros[l] == zeros[l]
        for i in range(n):
            assert mx.access(i) == raw[i]
        for c in sorted(set(raw))[::2]:
            for i in range(0, n, max(1, n // 10)):
                assert mx.rank(c, i) == oracle.ref_rank(raw, c, i)
                assert mx.rank_le(c, i) == oracle.ref_rank_le(raw, c, i)
            total = raw.count(c)
            for j in range(1, total + 1, max(1, total // 5)):
                assert mx.select(c, j) == oracle.ref_select(raw, c, j)


def test_matrix_matches_tree_queries():
    rng = np.random.default_rng(6)
    raw = [int(x) for x in rng.integers(0, 31, 900)]
    codes, alphabet = wt.map_alphabet(raw)
    sigma = len(alphabet)
    mx = var.build_wavelet_matrix(codes, sigma, 3, alphabet=alphabet)
    bt = wt.build_packed_serial(codes, sigma, 3, alphabet=alphabet)
    for c in sorted(set(raw))[::2]:
        for i in range(0, 900, 41):
            assert mx.rank(c, i) == bt.rank(c, i)
            assert mx.rank_le(c, i) == bt.rank_le(c, i)
        for j in range(1, raw.count(c) + 1, 2):
            assert mx.select(c, j) == bt.select(c, j)


def test_matrix_level_recurrence_reconstruction():
    # stable partition of each level's implied sequence reproduces the next
    rng = np.random.default_rng(7)
    raw = [int(x) for x in rng.integers(0, 16, 1024)]
    codes, alphabet = wt.map_alphabet(raw)
    sigma = len(alphabet)
    mx = var.build_wavelet_matrix(codes, sigma, 2, alphabet=alphabet,
                                  with_rank_select=False)
    depth = oracle.tree_depth(sigma)
    seq = [int(x) for x in codes.unpack()]
    for l in range(depth):
        bits = list(mx.levels[l].bitmap.bit_array())
        sh = depth - 1 - l
        assert bits == [(x >> sh) & 1 for x in seq], l
        assert mx.zeros[l] == bits.count(0)
        seq = [x for x in seq if not (x >> sh) & 1] + [x for x in seq if (x >> sh) & 1]


def test_matrix_occurrence_error():
    mx = var.build_wavelet_matrix(wt.map_alphabet([3, 1, 3])[0], 2)
    with pytest.raises(OccurrenceRangeError):
        mx.select(0, 2)
