"""Wavelet-structure variants built with the same packed machinery.

Arbitrary-shaped binary trees route symbols by prefix-free codewords
(Huffman by default) and prune every branch no codeword passes through;
multiary trees consume log2(degree) code bits per level and keep a
generalized rank/select structure per node; the wavelet matrix partitions
each level globally, jumping whole slice spans at a time by sorting on the
reversed slice bits.
"""
from __future__ import annotations

import bisect
import heapq

import numpy as np

from .bits import (BitVector, PackedList, TABLE_KEY_BITS, concat_streams, mask,
                   pack_array, registry, words_for_bits)
from .errors import ContractViolation, OccurrenceRangeError
from .par import CostMeter, Pool, ceil_log2, default_pool, sort_perm_by_key
from .rsg import SIGMA_MAX, build_general_rank_select
from .wt import (WaveletNode, _emit_anchor, _partition_short, _Short,
                 default_slice_bits, tree_depth)
from .rsb import build_binary_rank_select


# ---------------------------------------------------------------------------
# prefix codes


class Codebook:
    """Canonical prefix-free codewords per dense symbol code.

    codes maps symbol -> (value, length); the path is read from the
    value's most significant bit. Symbols absent from the mapping carry no
    codeword (zero frequency). A single-symbol book uses the empty
    codeword.
    """

    __slots__ = ("codes", "height", "_decode")

    def __init__(self, codes: dict[int, tuple[int, int]]):
        self.codes = dict(codes)
        self.height = max((ln for _, ln in self.codes.values()), default=0)
        self._decode = {vl: sym for sym, vl in self.codes.items()}
        if len(self._decode) != len(self.codes):
            raise ContractViolation("duplicate codewords")
        for sym, (v, ln) in self.codes.items():
            for other, (w, lm) in self.codes.items():
                if other != sym and lm > ln and (w >> (lm - ln)) == v:
                    raise ContractViolation("codewords are not prefix-free")

    def decode(self, value: int, length: int):
        return self._decode.get((value, length))

    def cost(self, freqs) -> int:
        return sum(int(f) * self.codes[s][1] for s, f in enumerate(freqs) if f)

    def valid_prefixes(self) -> set[tuple[int, int]]:
        """(depth, prefix) pairs some longer codeword routes through."""
        out: set[tuple[int, int]] = set()
        for v, ln in self.codes.values():
            for d in range(ln):
                out.add((d, v >> (ln - d)))
        return out


def huffman_codebook(freqs) -> Codebook:
    """Minimum-redundancy canonical codebook for the given symbol counts.

    Ties merge the two nodes with the smallest (count, smallest contained
    symbol); canonical values are assigned by (length, symbol), so equal
    inputs always produce identical books.
    """
    freqs = [int(f) for f in freqs]
    if any(f < 0 for f in freqs):
        raise ContractViolation("negative frequency")
    alive = [(f, s) for s, f in enumerate(freqs) if f > 0]
    if not alive:
        raise ContractViolation("at least one frequency must be positive")
    if len(alive) == 1:
        return Codebook({alive[0][1]: (0, 0)})
    heap = [(f, s, [s]) for f, s in alive]
    heapq.heapify(heap)
    depths = {s: 0 for _, s in alive}
    while len(heap) > 1:
        fa, _, syms_a = heapq.heappop(heap)
        fb, _, syms_b = heapq.heappop(heap)
        for s in syms_a + syms_b:
            depths[s] += 1
        merged = syms_a + syms_b
        heapq.heappush(heap, (fa + fb, min(merged), merged))
    order = sorted(depths, key=lambda s: (depths[s], s))
    codes = {}
    code = 0
    prev_len = depths[order[0]]
    for k, s in enumerate(order):
        ln = depths[s]
        if k:
            code = (code + 1) << (ln - prev_len)
        codes[s] = (code, ln)
        prev_len = ln
    return Codebook(codes)


def balanced_codebook(sigma: int) -> Codebook:
    depth = tree_depth(sigma)
    return Codebook({s: (s, depth) for s in range(sigma)})


# ---------------------------------------------------------------------------
# shaped binary tree


class ShapedWaveletTree:
    """Binary wavelet tree over codeword paths; nodes keyed (depth, prefix)."""

    __slots__ = ("sigma", "n", "alphabet", "book", "nodes", "slice_bits",
                 "build_meter", "rs_meter", "_reg", "_code_map", "_alpha_list")

    def __init__(self, sigma, n, alphabet, book: Codebook, nodes, slice_bits, reg=None):
        self.sigma = int(sigma)
        self.n = int(n)
        self.alphabet = np.asarray(alphabet, dtype=np.int64)
        self.book = book
        self.nodes = nodes
        self.slice_bits = int(slice_bits)
        self.build_meter = CostMeter()
        self.rs_meter = CostMeter()
        self._reg = reg if reg is not None else registry()
        self._code_map = None
        self._alpha_list = None

    def _maps(self):
        self._alpha_list = self.alphabet.tolist()
        self._code_map = {c: k for k, c in enumerate(self._alpha_list)}
        return self._code_map

    def code_of(self, c) -> int | None:
        return (self._code_map or self._maps()).get(c)

    def access(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self._alpha_list is None:
            self._maps()
        sym = self.book.decode(0, 0)
        if sym is not None:
            return self._alpha_list[sym]
        depth = 0
        prefix = 0
        pos = i
        while True:
            rs = self.nodes[(depth, prefix)].rs
            b = rs.bit(pos)
            pos = rs.rank(b, pos) - 1
            prefix = (prefix << 1) | b
            depth += 1
            sym = self.book.decode(prefix, depth)
            if sym is not None:
                return self._alpha_list[sym]

    def rank(self, c, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        x = self.code_of(c)
        if x is None or x not in self.book.codes:
            return 0
        v, ln = self.book.codes[x]
        if ln == 0:
            return i + 1
        pos = i
        for d in range(ln):
            node = self.nodes.get((d, v >> (ln - d)))
            if node is None:
                return 0
            cnt = node.rs.rank((v >> (ln - 1 - d)) & 1, pos)
            if cnt == 0:
                return 0
            pos = cnt - 1
        return pos + 1

    def select(self, c, j: int) -> int:
        x = self.code_of(c)
        if x is None or x not in self.book.codes:
            raise OccurrenceRangeError(f"symbol {c!r} does not occur")
        total = self.rank(c, self.n - 1) if self.n else 0
        if not 1 <= j <= total:
            raise OccurrenceRangeError(f"occurrence {j} out of range [1, {total}]")
        v, ln = self.book.codes[x]
        if ln == 0:
            return j - 1
        path = [self.nodes[(d, v >> (ln - d))] for d in range(ln)]
        pos = path[-1].rs.select(v & 1, j)
        for d in range(ln - 2, -1, -1):
            pos = path[d].rs.select((v >> (ln - 1 - d)) & 1, pos + 1)
        return pos

    def count(self, c) -> int:
        return self.rank(c, self.n - 1) if self.n else 0

    def total_bitmap_bits(self) -> int:
        return sum(node.bitmap.nbits for node in self.nodes.values())


def build_shaped(codes, book: Codebook, slice_bits: int | None = None, *,
                 alphabet=None, reg=None, pool: Pool | None = None,
                 with_rank_select: bool = True) -> ShapedWaveletTree:
    """Codeword-routed construction: anchor levels scatter padded codewords,
    chunked slice lists fill the levels between, and branches without a
    continuing codeword are dropped as soon as they appear."""
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    if isinstance(codes, PackedList):
        arr = codes.unpack().astype(np.int64)
    else:
        arr = np.asarray(list(codes) if not isinstance(codes, np.ndarray) else codes,
                         dtype=np.int64)
    n = len(arr)
    for x in (np.unique(arr) if n else []):
        if int(x) not in book.codes:
            raise ContractViolation(f"symbol {int(x)} has no codeword")
    sigma = len(alphabet) if alphabet is not None else (int(arr.max()) + 1 if n else 0)
    if alphabet is None:
        alphabet = np.arange(max(sigma, 1), dtype=np.int64)
    h = book.height
    tau = slice_bits if slice_bits is not None else default_slice_bits(n, max(h, 1))
    tau = min(max(1, tau), max(h, 1), TABLE_KEY_BITS)
    meter = CostMeter()
    valid = book.valid_prefixes()
    bitmaps: dict[tuple[int, int], BitVector] = {}
    if n and h and (0, 0) in valid:
        # route by codewords padded to the full height; padded tails only
        # ever reach pruned prefixes, so valid bitmaps never see them
        lut_v = np.zeros(max(sigma, 1), dtype=np.uint64)
        for s, (v, ln) in book.codes.items():
            lut_v[s] = v << (h - ln)
        keys = lut_v[arr]
        live0 = np.array([book.codes[int(x)][1] > 0 for x in arr], dtype=bool)
        meter.charge(2 * n + words_for_bits(n * max(h, 1)))
        content = {0: keys[live0]}
        for a in range(0, h, tau):
            span = min(tau, h - a)
            a2 = a + tau
            tbl = reg.slice_table(span)
            next_content: dict[int, np.ndarray] = {}
            cur_shorts: dict[int, _Short] = {}
            for p in sorted(content):
                arr_p = content[p]
                emit = span >= 2 and ((a + 1, (p << 1)) in valid or (a + 1, (p << 1) | 1) in valid)
                bm, slices, kids, work = _emit_anchor(arr_p, h, h, a, span, emit)
                meter.charge(work)
                bitmaps[(a, p)] = bm
                if kids is not None:
                    for b in (0, 1):
                        if kids[b].count and (a + 1, (p << 1) | b) in valid:
                            cur_shorts[(p << 1) | b] = kids[b]
                if a2 < h:
                    perm = np.argsort(slices, kind="stable")
                    routed = arr_p[perm]
                    sizes = np.bincount(slices.astype(np.int64), minlength=1 << span)
                    meter.charge(2 * len(arr_p) + words_for_bits(len(arr_p) * h))
                    lo = 0
                    for k in range(1 << span):
                        sz = int(sizes[k])
                        child = (p << span) | k
                        if sz and (a2, child) in valid:
                            next_content[child] = routed[lo:lo + sz]
                        lo += sz
            for ell in range(a + 1, a + span):
                t = ell - a
                next_shorts: dict[int, _Short] = {}
                for p in sorted(cur_shorts):
                    short = cur_shorts[p]
                    emit = ell + 1 < a + span and (
                        (ell + 1, p << 1) in valid or (ell + 1, (p << 1) | 1) in valid)
                    bm, kids, work, _ = _partition_short(short, span, t, tbl, emit)
                    meter.charge(work)
                    bitmaps[(ell, p)] = bm
                    if kids is not None:
                        for b in (0, 1):
                            if kids[b].count and (ell + 1, (p << 1) | b) in valid:
                                next_shorts[(p << 1) | b] = kids[b]
                cur_shorts = next_shorts
            content = next_content
    nodes = {key: WaveletNode(bm) for key, bm in sorted(bitmaps.items())}
    tree = ShapedWaveletTree(sigma, n, alphabet, book, nodes, tau, reg)
    tree.build_meter.add(meter)
    if with_rank_select:
        items = sorted(tree.nodes.items())

        def task(item):
            def run(m):
                _, node = item
                node.rs = build_binary_rank_select(node.bitmap, reg=reg, pool=pool, meter=m)
            return run

        pool.run_tasks([task(it) for it in items], tree.rs_meter)
    return tree


# ---------------------------------------------------------------------------
# multiary tree


class MultiaryNode:
    __slots__ = ("seq", "rs")

    def __init__(self, seq: PackedList, rs=None):
        self.seq = seq
        self.rs = rs


class MultiaryWaveletTree:
    """Degree-d tree; each node stores its digit sequence plus generalized
    rank/select over those digits."""

    __slots__ = ("sigma", "n", "degree", "alphabet", "depth", "nodes",
                 "build_meter", "rs_meter", "_reg", "_code_map", "_alpha_list",
                 "_wins")

    def __init__(self, sigma, n, degree, alphabet, nodes, reg=None):
        self.sigma = int(sigma)
        self.n = int(n)
        self.degree = int(degree)
        self.alphabet = np.asarray(alphabet, dtype=np.int64)
        self.depth = tree_depth(sigma)
        self.nodes = nodes
        self.build_meter = CostMeter()
        self.rs_meter = CostMeter()
        self._reg = reg if reg is not None else registry()
        self._code_map = None
        self._alpha_list = None
        self._wins = None

    def _maps(self):
        self._alpha_list = self.alphabet.tolist()
        self._code_map = {c: k for k, c in enumerate(self._alpha_list)}
        return self._code_map

    def code_of(self, c) -> int | None:
        return (self._code_map or self._maps()).get(c)

    def _windows(self):
        if self._wins is None:
            dd = ceil_log2(self.degree)
            wins = []
            consumed = 0
            while consumed < self.depth:
                win = min(dd, self.depth - consumed)
                wins.append(win)
                consumed += win
            self._wins = tuple(wins)
        return self._wins

    def access(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self.depth == 0:
            return int(self.alphabet[0])
        if self._alpha_list is None:
            self._maps()
        pos = i
        path = 0
        code = 0
        for beta, win in enumerate(self._windows()):
            rs = self.nodes[(beta, path)].rs
            dig = rs.access(pos)
            code = (code << win) | dig
            pos = rs.rank_eq(dig, pos) - 1
            path = path * self.degree + dig
        return self._alpha_list[code]

    def _digits(self, x: int) -> list[int]:
        out = []
        rem = self.depth
        for win in self._windows():
            rem -= win
            out.append((x >> rem) & mask(win))
        return out

    def rank(self, c, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        x = self.code_of(c)
        if x is None:
            return 0
        if self.depth == 0:
            return i + 1
        pos = i
        path = 0
        for beta, dig in enumerate(self._digits(x)):
            node = self.nodes.get((beta, path))
            if node is None:
                return 0
            cnt = node.rs.rank_eq(dig, pos)
            if cnt == 0:
                return 0
            pos = cnt - 1
            path = path * self.degree + dig
        return pos + 1

    def select(self, c, j: int) -> int:
        x = self.code_of(c)
        if x is None:
            raise OccurrenceRangeError(f"symbol {c!r} does not occur")
        total = self.rank(c, self.n - 1) if self.n else 0
        if not 1 <= j <= total:
            raise OccurrenceRangeError(f"occurrence {j} out of range [1, {total}]")
        if self.depth == 0:
            return j - 1
        digs = self._digits(x)
        path = 0
        chain = []
        for beta, dig in enumerate(digs):
            chain.append(self.nodes[(beta, path)])
            path = path * self.degree + dig
        pos = chain[-1].rs.select_sym(digs[-1], j)
        for beta in range(len(chain) - 2, -1, -1):
            pos = chain[beta].rs.select_sym(digs[beta], pos + 1)
        return pos

    def rank_le(self, c, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self._alpha_list is None:
            self._maps()
        k = bisect.bisect_right(self._alpha_list, c) - 1
        if k < 0:
            return 0
        if self.depth == 0:
            return i + 1
        pos = i
        path = 0
        acc = 0
        for beta, dig in enumerate(self._digits(k)):
            node = self.nodes.get((beta, path))
            if node is None:
                return acc
            if dig:
                acc += node.rs.rank_le(dig - 1, pos)
            cnt = node.rs.rank_eq(dig, pos)
            if cnt == 0:
                return acc
            pos = cnt - 1
            path = path * self.degree + dig
        return acc + pos + 1

    def count(self, c) -> int:
        return self.rank(c, self.n - 1) if self.n else 0

    def total_digit_bits(self) -> int:
        return sum(node.seq.count * node.seq.width for node in self.nodes.values())


def build_multiary(codes, sigma: int, degree: int, slice_bits: int | None = None, *,
                   alphabet=None, reg=None, pool: Pool | None = None,
                   with_rank_select: bool = True) -> MultiaryWaveletTree:
    """Digit levels built top-down by stable per-node counting sorts."""
    dd = ceil_log2(degree)
    if degree < 2 or (1 << dd) != degree or degree > SIGMA_MAX:
        raise ContractViolation(
            f"degree must be a power of two in [2, {SIGMA_MAX}], got {degree}")
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    if isinstance(codes, PackedList):
        arr = codes.unpack()
    else:
        arr = np.asarray(list(codes) if not isinstance(codes, np.ndarray) else codes,
                         dtype=np.uint64)
    n = len(arr)
    if alphabet is None:
        alphabet = np.arange(sigma, dtype=np.int64)
    depth = tree_depth(sigma)
    tree = MultiaryWaveletTree(sigma, n, degree, alphabet, {}, reg)
    meter = tree.build_meter
    if n == 0 or depth == 0:
        return tree
    content: dict[int, np.ndarray] = {0: arr}
    consumed = 0
    beta = 0
    seqs: list[tuple[tuple[int, int], PackedList]] = []
    while consumed < depth:
        win = min(dd, depth - consumed)
        sh = depth - consumed - win
        next_content: dict[int, np.ndarray] = {}
        for p in sorted(content):
            arr_p = content[p]
            digits = (arr_p >> np.uint64(sh)) & np.uint64(mask(win))
            seqs.append(((beta, p), PackedList(pack_array(digits, max(1, win)),
                                               len(digits), max(1, win))))
            meter.charge_parallel(len(arr_p), 2, 4)
            meter.charge(words_for_bits(len(arr_p) * win), 2)
            if sh:
                perm = sort_perm_by_key(digits, win, meter, pool)
                routed = arr_p[perm]
                sizes = np.bincount(digits.astype(np.int64), minlength=1 << win)
                meter.charge_parallel(len(arr_p), 2, 4)
                lo = 0
                for k in range(1 << win):
                    sz = int(sizes[k])
                    if sz:
                        next_content[p * degree + k] = routed[lo:lo + sz]
                    lo += sz
        content = next_content
        consumed += win
        beta += 1
    for key, seq in seqs:
        tree.nodes[key] = MultiaryNode(seq)
    if with_rank_select:
        items = sorted(tree.nodes.items())

        def task(item):
            def run(m):
                node = item[1]
                node.rs = build_general_rank_select(node.seq, 1 << node.seq.width,
                                                    reg=reg, pool=pool, meter=m)
            return run

        pool.run_tasks([task(it) for it in items], tree.rs_meter)
    return tree


# ---------------------------------------------------------------------------
# wavelet matrix


class WaveletMatrix:
    """Per-level global partitions with zero counts; no node boundaries."""

    __slots__ = ("sigma", "n", "alphabet", "depth", "levels", "zeros", "slice_bits",
                 "build_meter", "rs_meter", "_reg", "_code_map", "_alpha_list")

    def __init__(self, sigma, n, alphabet, levels, zeros, slice_bits, reg=None):
        self.sigma = int(sigma)
        self.n = int(n)
        self.alphabet = np.asarray(alphabet, dtype=np.int64)
        self.depth = tree_depth(sigma)
        self.levels = levels
        self.zeros = zeros
        self.slice_bits = int(slice_bits)
        self.build_meter = CostMeter()
        self.rs_meter = CostMeter()
        self._reg = reg if reg is not None else registry()
        self._code_map = None
        self._alpha_list = None

    def _maps(self):
        self._alpha_list = self.alphabet.tolist()
        self._code_map = {c: k for k, c in enumerate(self._alpha_list)}
        return self._code_map

    def code_of(self, c) -> int | None:
        return (self._code_map or self._maps()).get(c)

    def access(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self._alpha_list is None:
            self._maps()
        pos = i
        code = 0
        for l in range(self.depth):
            rs = self.levels[l].rs
            b = rs.bit(pos)
            code = (code << 1) | b
            pos = rs.rank(b, pos) - 1 + (self.zeros[l] if b else 0)
        return self._alpha_list[code]

    def _counts(self, x: int, stop: int) -> tuple[int, int]:
        """(lo, hi): the bucket of codes with x's top `stop` bits holds
        level-`stop` positions [lo, hi)."""
        lo = 0
        hi = self.n
        for l in range(stop):
            lvl = self.levels[l]
            b = (x >> (self.depth - 1 - l)) & 1
            clo = lvl.rs.rank(b, lo - 1) if lo else 0
            chi = lvl.rs.rank(b, hi - 1) if hi else 0
            if b:
                lo = self.zeros[l] + clo
                hi = self.zeros[l] + chi
            else:
                lo, hi = clo, chi
            if hi <= lo:
                return lo, lo
        return lo, hi

    def rank(self, c, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        x = self.code_of(c)
        if x is None:
            return 0
        if self.depth == 0:
            return i + 1
        lo = 0
        hi = i + 1
        for l in range(self.depth):
            lvl = self.levels[l]
            b = (x >> (self.depth - 1 - l)) & 1
            clo = lvl.rs.rank(b, lo - 1) if lo else 0
            chi = lvl.rs.rank(b, hi - 1) if hi else 0
            if b:
                lo = self.zeros[l] + clo
                hi = self.zeros[l] + chi
            else:
                lo, hi = clo, chi
            if hi <= lo:
                return 0
        return hi - lo

    def select(self, c, j: int) -> int:
        x = self.code_of(c)
        if x is None:
            raise OccurrenceRangeError(f"symbol {c!r} does not occur")
        total = self.rank(c, self.n - 1) if self.n else 0
        if not 1 <= j <= total:
            raise OccurrenceRangeError(f"occurrence {j} out of range [1, {total}]")
        if self.depth == 0:
            return j - 1
        lo, _ = self._counts(x, self.depth)
        pos = lo + j - 1
        for l in range(self.depth - 1, -1, -1):
            lvl = self.levels[l]
            b = (x >> (self.depth - 1 - l)) & 1
            pos = lvl.rs.select(b, pos - (self.zeros[l] if b else 0) + 1)
        return pos

    def rank_le(self, c, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self._alpha_list is None:
            self._maps()
        k = bisect.bisect_right(self._alpha_list, c) - 1
        if k < 0:
            return 0
        if self.depth == 0:
            return i + 1
        lo = 0
        hi = i + 1
        acc = 0
        for l in range(self.depth):
            lvl = self.levels[l]
            b = (k >> (self.depth - 1 - l)) & 1
            zlo = lvl.rs.rank(0, lo - 1) if lo else 0
            zhi = lvl.rs.rank(0, hi - 1) if hi else 0
            if b:
                acc += zhi - zlo
                lo = self.zeros[l] + (lo - zlo)
                hi = self.zeros[l] + (hi - zhi)
            else:
                lo, hi = zlo, zhi
            if hi <= lo:
                return acc
        return acc + hi - lo

    def count(self, c) -> int:
        return self.rank(c, self.n - 1) if self.n else 0

    def total_bitmap_bits(self) -> int:
        return sum(lvl.bitmap.nbits for lvl in self.levels)


def _bit_reverse(vals: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros_like(vals)
    for b in range(width):
        out |= ((vals >> np.uint64(b)) & np.uint64(1)) << np.uint64(width - 1 - b)
    return out


def build_wavelet_matrix(codes, sigma: int, slice_bits: int | None = None, *,
                         alphabet=None, reg=None, pool: Pool | None = None,
                         with_rank_select: bool = True) -> WaveletMatrix:
    """Anchor levels by a stable sort on the reversed slice bits; the levels
    between by chunk probes whose zero/one outputs concatenate globally."""
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    if isinstance(codes, PackedList):
        arr = codes.unpack()
        width = codes.width
    else:
        arr = np.asarray(list(codes) if not isinstance(codes, np.ndarray) else codes,
                         dtype=np.uint64)
        width = max(1, tree_depth(sigma))
    n = len(arr)
    depth = tree_depth(sigma)
    if alphabet is None:
        alphabet = np.arange(sigma, dtype=np.int64)
    tau = slice_bits if slice_bits is not None else default_slice_bits(n, depth)
    tau = min(max(1, tau), depth) if depth else 1
    mx = WaveletMatrix(sigma, n, alphabet, [], [], tau, reg)
    meter = mx.build_meter
    if n == 0 or depth == 0:
        return mx
    level_bitmaps: list[BitVector] = []
    zeros: list[int] = []
    cur = arr
    for a in range(0, depth, tau):
        span = min(tau, depth - a)
        tbl = reg.slice_table(span)
        slices = (cur >> np.uint64(depth - a - span)) & np.uint64(mask(span))
        top = slices >> np.uint64(span - 1)
        level_bitmaps.append(BitVector(pack_array(top, 1), n))
        zeros.append(int(n - top.sum()))
        meter.charge_parallel(n, 3, 6)
        meter.charge(words_for_bits(n * width) + words_for_bits(n), 4)
        if span >= 2:
            # one global slice list, partitioned level by level
            sel = top == 0
            short = _Short(pack_array(np.concatenate([slices[sel], slices[~sel]]), span), n)
            meter.charge_parallel(n, 2, 4)
            for ell in range(a + 1, a + span):
                t = ell - a
                bm, kids, work, nchunks = _partition_short(short, span, t, tbl, True)
                meter.charge_parallel(max(1, nchunks), 15, 16)
                level_bitmaps.append(bm)
                zeros.append(int(kids[0].count))
                if ell + 1 < a + span:
                    # the zero side then the one side form the next level
                    w, _ = concat_streams([
                        (kids[0].words[:words_for_bits(kids[0].count * span)],
                         kids[0].count * span),
                        (kids[1].words[:words_for_bits(kids[1].count * span)],
                         kids[1].count * span)], meter)
                    short = _Short(w, n)
        if a + tau < depth:
            rev = _bit_reverse(slices, span)
            perm = sort_perm_by_key(rev, span, meter, pool)
            cur = cur[perm]
            meter.charge_parallel(n, 2, 4)
    mx.levels = [WaveletNode(bm) for bm in level_bitmaps]
    mx.zeros = zeros
    if with_rank_select:
        items = list(enumerate(mx.levels))

        def task(item):
            def run(m):
                _, node = item
                node.rs = build_binary_rank_select(node.bitmap, reg=reg, pool=pool, meter=m)
            return run

        pool.run_tasks([task(it) for it in items], mx.rs_meter)
    return mx
