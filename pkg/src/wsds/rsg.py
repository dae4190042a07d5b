"""Generalized rank (<= a symbol) and per-symbol select for small alphabets.

Sequences hold symbols below sigma <= 16, packed at ceil(log2 sigma) bits.
Rank keeps, for every symbol, cumulative <=-counts at the end of every
range (sigma * log2(n)^2 symbols, rounded to a whole number of blocks) and
packed counts relative to the range start at the end of every block of
`block_syms` symbols; a query is two field reads plus one block-table
probe. Select mirrors the binary layout per character with
alphabet-scaled thresholds; short sub-range tails fall back to a bounded
block scan, the one non-constant query path.
"""
from __future__ import annotations

import numpy as np

from .bits import (PackedList, TABLE_KEY_BITS, mask, pack_array, registry,
                   unpack_array, words_for_bits)
from .errors import ContractViolation, OccurrenceRangeError
from .par import CostMeter, Pool, ceil_div, ceil_log2, default_pool, scan_span
from .rsb import SelectSide, build_select_side, log2n

SIGMA_MAX = 16

# Sentinel for "no occurrence seen" in span summaries.
NO_OCCURRENCE = -1

SPAN_IDENTITY = (NO_OCCURRENCE, NO_OCCURRENCE)


def span_merge(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    """Combine (first, last) occurrence summaries of adjacent stretches.

    Keeps the earliest location of the left summary and the latest of the
    right, falling through the sentinel when a side saw nothing. The
    sentinel makes the operator associative, as a prefix-sum combiner must
    be: merging never loses the outermost occurrences regardless of
    grouping.
    """
    af, al = a
    bf, bl = b
    return (af if af != NO_OCCURRENCE else bf,
            bl if bl != NO_OCCURRENCE else al)


class GeneralRankSelect:
    """Rank/select directories over a packed small-alphabet sequence."""

    __slots__ = ("sigma", "n", "width", "block_syms", "blocks_per_range", "range_syms",
                 "sub_field_bits", "seq", "range_abs", "sub_rel", "sides", "_reg",
                 "_words_padded", "_q")

    def __init__(self, seq: PackedList, sigma: int, reg=None):
        sigma = int(sigma)
        if not 1 <= sigma <= SIGMA_MAX:
            raise ContractViolation(f"alphabet size must be in [1, {SIGMA_MAX}], got {sigma}")
        self.sigma = sigma
        self.seq = seq
        self.n = seq.count
        self.width = max(1, ceil_log2(sigma))
        if seq.width != self.width:
            raise ContractViolation(
                f"sequence width {seq.width} != {self.width} for alphabet {sigma}")
        self.block_syms = max(1, TABLE_KEY_BITS // self.width)
        L = log2n(self.n)
        self.range_syms = self.block_syms * ceil_div(sigma * L * L, self.block_syms)
        self.blocks_per_range = self.range_syms // self.block_syms
        self.sub_field_bits = ceil_log2(self.range_syms + 1)
        self.range_abs: np.ndarray | None = None
        self.sub_rel: PackedList | None = None
        self.sides: list[SelectSide | None] = [None] * sigma
        self._reg = reg if reg is not None else registry()
        self._words_padded = np.concatenate([seq.words, np.zeros(1, dtype=np.uint64)])
        self._q = None

    # -- queries ------------------------------------------------------------

    def _tables(self):
        return self._reg.symbol_tables(self.sigma, self.width, self.block_syms)

    def _cache(self):
        tbl = self._tables()
        le_flat, eq_flat, nth_flat = tbl.query_lists()
        self._q = (
            self.range_abs.ravel().tolist() if self.range_abs is not None else None,
            self.sub_rel.words.tolist() + [0] if self.sub_rel is not None else None,
            self._words_padded.tolist(),
            le_flat, eq_flat, nth_flat,
            1 << (self.block_syms * self.width),
        )
        return self._q

    def _block(self, b: int) -> int:
        q = self._q or self._cache()
        words = q[2]
        lo = b * self.block_syms * self.width
        off = lo & 63
        v = words[lo >> 6] >> off
        nbits = self.block_syms * self.width
        if off + nbits > 64:
            v |= words[(lo >> 6) + 1] << (64 - off)
        return v & mask(nbits)

    def access(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        q = self._q or self._cache()
        words = q[2]
        lo = i * self.width
        off = lo & 63
        v = words[lo >> 6] >> off
        if off + self.width > 64:
            v |= words[(lo >> 6) + 1] << (64 - off)
        return v & ((1 << self.width) - 1)

    def rank_le(self, c: int, i: int) -> int:
        """Occurrences of symbols <= c in positions [0, i]."""
        if not 0 <= c < self.sigma:
            raise IndexError(f"symbol {c} out of range [0, {self.sigma})")
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self.range_abs is None:
            raise ContractViolation("rank directory not built")
        q = self._q or self._cache()
        ranges, subw, words, le_flat, _, _, nvals = q
        u = self.block_syms
        b = i // u
        r = i // self.range_syms
        total = ranges[(r - 1) * self.sigma + c] if r else 0
        if b - r * self.blocks_per_range:
            sfb = self.sub_field_bits
            bitpos = ((b - 1) * self.sigma + c) * sfb
            off = bitpos & 63
            w = subw[bitpos >> 6] >> off
            if off + sfb > 64:
                w |= subw[(bitpos >> 6) + 1] << (64 - off)
            total += w & ((1 << sfb) - 1)
        nbits = u * self.width
        lo = b * nbits
        off = lo & 63
        blk = words[lo >> 6] >> off
        if off + nbits > 64:
            blk |= words[(lo >> 6) + 1] << (64 - off)
        blk &= (1 << nbits) - 1
        total += le_flat[(c * u + (i - b * u)) * nvals + blk]
        return total

    def rank_eq(self, c: int, i: int) -> int:
        res = self.rank_le(c, i)
        if c:
            res -= self.rank_le(c - 1, i)
        return res

    def count(self, c: int) -> int:
        side = self.sides[c] if c < len(self.sides) else None
        if side is not None:
            return side.total
        return self.rank_eq(c, self.n - 1) if self.n else 0

    def select_sym(self, c: int, j: int) -> int:
        """Position of the j'th occurrence of symbol c (j >= 1)."""
        if not 0 <= c < self.sigma:
            raise IndexError(f"symbol {c} out of range [0, {self.sigma})")
        side = self.sides[c]
        if side is None:
            raise ContractViolation("select directory not built")
        if not 1 <= j <= side.total:
            raise OccurrenceRangeError(f"occurrence {j} out of range [1, {side.total}]")
        pos, pending = side.locate(j)
        if pos is not None:
            return pos
        known, extra = pending
        return self._scan_after(known, extra, c)

    def _scan_after(self, pos: int, need: int, c: int) -> int:
        q = self._q or self._cache()
        _, _, _, _, eq_flat, nth_flat, nvals = q
        u = self.block_syms
        base = c * u
        b = pos // u
        consumed = pos - b * u + 1
        while True:
            blk = self._block(b)
            ell = min(u, self.n - b * u)
            have = eq_flat[(base + ell - 1) * nvals + blk]
            before = eq_flat[(base + consumed - 1) * nvals + blk] if consumed else 0
            have -= before
            if have >= need:
                return b * u + nth_flat[(base + need + before - 1) * nvals + blk]
            need -= have
            b += 1
            consumed = 0


def _as_packed(seq, sigma: int) -> PackedList:
    if isinstance(seq, PackedList):
        return seq
    arr = np.asarray(list(seq) if not isinstance(seq, np.ndarray) else seq, dtype=np.uint64)
    if len(arr) and int(arr.max()) >= sigma:
        raise ContractViolation("symbol out of range for alphabet")
    width = max(1, ceil_log2(sigma))
    return PackedList(pack_array(arr, width), len(arr), width)


def build_general_rank(seq, sigma: int, *, reg=None, pool: Pool | None = None,
                       meter: CostMeter | None = None,
                       into: GeneralRankSelect | None = None) -> GeneralRankSelect:
    """Per-block table probes, in-range prefix sums of count vectors, then a
    sigma-wide prefix sum across ranges."""
    rs = into if into is not None else GeneralRankSelect(_as_packed(seq, sigma), sigma, reg)
    sigma = rs.sigma
    n, u = rs.n, rs.block_syms
    if n == 0:
        rs.range_abs = np.zeros((0, sigma), dtype=np.int64)
        rs.sub_rel = PackedList.empty(rs.sub_field_bits)
        if meter is not None:
            meter.charge(1, 1)
        return rs
    tbl = rs._tables()
    nblk = ceil_div(n, u)
    blocks = unpack_array(rs._words_padded, u * rs.width, nblk).astype(np.int64)
    last_len = n - (nblk - 1) * u
    eq = np.empty((nblk, sigma), dtype=np.int32)
    for c in range(sigma):
        eq[:, c] = tbl.cnt_eq[c, u - 1, blocks]
        eq[nblk - 1, c] = tbl.cnt_eq[c, last_len - 1, blocks[nblk - 1]]
    bpr = rs.blocks_per_range
    nranges = ceil_div(nblk, bpr)
    padded = np.zeros((nranges * bpr, sigma), dtype=np.int32)
    padded[:nblk] = eq
    within = padded.reshape(nranges, bpr, sigma).cumsum(axis=1)
    totals = within[:, bpr - 1, :].astype(np.int64)
    range_eq = totals.cumsum(axis=0)
    rs.range_abs = range_eq.cumsum(axis=1)  # <=-cumulative at range ends
    within_le = within.cumsum(axis=2).reshape(nranges * bpr, sigma)[:nblk]
    rs.sub_rel = PackedList(
        pack_array(within_le.astype(np.uint64).ravel(), rs.sub_field_bits),
        nblk * sigma, rs.sub_field_bits)
    rs._q = None
    if meter is not None:
        meter.charge(words_for_bits(n * rs.width), scan_span(words_for_bits(n * rs.width)))
        meter.charge_parallel(nblk, 2 + sigma)                    # probe + vector extract
        meter.charge(2 * nblk * sigma, sigma * scan_span(bpr))    # in-range prefix sums
        meter.charge(nblk * sigma, sigma)                         # <=-conversion
        meter.charge(2 * nranges * sigma, sigma * scan_span(nranges))
        meter.charge_parallel(nblk * sigma, 2, 3)                 # packed relative fields
    return rs


def build_general_select(seq, sigma: int, *, reg=None, pool: Pool | None = None,
                         meter: CostMeter | None = None,
                         into: GeneralRankSelect | None = None) -> GeneralRankSelect:
    """Chunk histograms and prefix sums locate every stored occurrence; ranges
    then classify as stored-directly or sub-sampled exactly like the binary
    side, with alphabet-scaled thresholds."""
    rs = into if into is not None else GeneralRankSelect(_as_packed(seq, sigma), sigma, reg)
    sigma = rs.sigma
    n, u = rs.n, rs.block_syms
    L = log2n(n)
    lam = log2n(L)
    g1 = rs.range_syms
    direct_min = sigma * sigma * L ** 4
    g2 = max(1, sigma * lam * lam)
    sub_min = sigma ** 3 * lam ** 4

    if n == 0:
        rs.sides = [SelectSide.empty() for _ in range(sigma)]
        if meter is not None:
            meter.charge(1, 1)
        return rs
    vals = rs.seq.unpack().astype(np.int64)
    order = np.argsort(vals, kind="stable").astype(np.int64)
    counts = np.bincount(vals, minlength=sigma)
    offs = np.zeros(sigma + 1, dtype=np.int64)
    np.cumsum(counts, out=offs[1:])
    if meter is not None:
        nblk = ceil_div(n, u)
        meter.charge_parallel(nblk, 2 + sigma)              # group probes + chunk folds
        meter.charge(2 * ceil_div(n, g1) * sigma + 2 * sigma, sigma * scan_span(ceil_div(n, g1)))
    pool = pool or default_pool()

    def side_task(c):
        def run(m):
            occ = order[offs[c]:offs[c + 1]]
            return build_select_side(occ, n, g1, direct_min,
                                     lambda _r: g2,
                                     lambda sl, _rl: sl >= sub_min,
                                     m)
        return run

    rs.sides = pool.run_tasks([side_task(c) for c in range(sigma)], meter)
    rs._q = None
    return rs


def build_general_rank_select(seq, sigma: int, *, reg=None, pool: Pool | None = None,
                              meter: CostMeter | None = None) -> GeneralRankSelect:
    rs = build_general_rank(seq, sigma, reg=reg, pool=pool, meter=meter)
    return build_general_select(seq, sigma, reg=reg, pool=pool, meter=meter, into=rs)
