"""Constant-probe binary rank and select over packed bit vectors.

Rank uses a two-tier directory: absolute counts at the end of every
256-bit range plus packed 9-bit counts, relative to the range start, at
the end of every 16-bit block; a query is two field reads and one table
probe. Select stores the position of every g1'th occurrence; long gaps
between stored positions keep all their answers, short gaps keep a second
tier of every-g2'th positions whose short tails are answered by a bounded
block scan. That scan is the one non-constant query path and is bounded
by the sub-range length over the block width.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .bits import (BitVector, PackedList, TABLE_KEY_BITS, mask, pack_array,
                   registry, words_for_bits)
from .errors import ContractViolation, OccurrenceRangeError
from .par import CostMeter, Pool, ceil_div, ceil_log2, default_pool, scan_span

BLOCK = TABLE_KEY_BITS          # 16-bit half-word blocks
RANGE = BLOCK * BLOCK           # 256-bit ranges
SUB_FIELD_BITS = ceil_log2(RANGE + 1)  # 9-bit packed relative counts
_SUB_MASK = (1 << SUB_FIELD_BITS) - 1
_SUB_SPILL = 64 - SUB_FIELD_BITS
_TAIL = tuple((1 << (t + 1)) - 1 for t in range(BLOCK))  # in-block prefix masks


def log2n(n: int) -> int:
    return ceil_log2(max(int(n), 2))


# ---------------------------------------------------------------------------
# select side (shared with the generalized structures)


class SparseRange:
    """Second tier of a select range: every-g2'th occurrence offsets plus
    directly stored answers for subs that span too many positions."""

    __slots__ = ("g2", "sub_offsets", "sub_flags", "dir_index", "dir_starts", "dir_pool")

    def __init__(self, g2, sub_offsets, sub_flags, dir_index, dir_starts, dir_pool):
        self.g2 = g2
        self.sub_offsets = sub_offsets
        self.sub_flags = sub_flags
        self.dir_index = dir_index
        self.dir_starts = dir_starts
        self.dir_pool = dir_pool


class SelectSide:
    """Position directory for one target value (a bit or a symbol)."""

    __slots__ = ("total", "g1", "anchors", "kind", "direct", "sparse")

    def __init__(self, total, g1, anchors, kind, direct, sparse):
        self.total = total
        self.g1 = g1
        self.anchors = anchors
        self.kind = kind
        self.direct = direct
        self.sparse = sparse

    @classmethod
    def empty(cls) -> "SelectSide":
        return cls(0, 1, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint8), [], [])

    def locate(self, j: int):
        """Resolve occurrence j. Returns (position, None) when stored, or
        (None, (known_pos, extra)) when `extra` more occurrences must be
        scanned past `known_pos`."""
        k = (j - 1) // self.g1
        jj = j - k * self.g1
        base = int(self.anchors[k])
        if jj == 1:
            return base, None
        if self.kind[k]:
            return base + self.direct[k].get(jj - 1), None
        sp = self.sparse[k]
        i = (jj - 1) // sp.g2
        rel = jj - i * sp.g2
        pos0 = base + sp.sub_offsets.get(i)
        if rel == 1:
            return pos0, None
        if sp.sub_flags[i]:
            d = int(sp.dir_index[i]) - 1
            return pos0 + sp.dir_pool.get(int(sp.dir_starts[d]) + rel - 1), None
        return None, (pos0, rel - 1)


def build_select_side(occ: np.ndarray, n: int, g1: int, direct_min: int,
                      g2_of: Callable[[int], int],
                      sub_direct: Callable[[int, int], bool],
                      meter: CostMeter | None = None) -> SelectSide:
    """Lay out the directory for the occurrence positions `occ` (ascending).

    direct_min: whole ranges at least this long store every answer.
    g2_of(range_len): second-tier occurrence spacing for short ranges.
    sub_direct(sub_len, range_len): whether a sub stores its answers.
    """
    m = int(len(occ))
    if m == 0:
        return SelectSide.empty()
    g1 = max(1, int(g1))
    anchors = occ[0::g1].astype(np.int64)
    nranges = len(anchors)
    kind = np.zeros(nranges, dtype=np.uint8)
    direct: list = [None] * nranges
    sparse: list = [None] * nranges
    total_work = 0
    max_range_work = 0
    for k in range(nranges):
        lo = k * g1
        hi = min(lo + g1, m)
        base = int(anchors[k])
        range_len = (int(anchors[k + 1]) if k + 1 < nranges else n) - base
        offs = (occ[lo:hi] - base).astype(np.uint64)
        w_r = max(1, ceil_log2(max(range_len, 2)))
        cnt = hi - lo
        if range_len >= direct_min:
            kind[k] = 1
            direct[k] = PackedList(pack_array(offs, w_r), cnt, w_r)
            # block scan of the range plus packed emission of every position
            cost = ceil_div(range_len, BLOCK) + cnt * 2 + words_for_bits(cnt * w_r)
        else:
            g2 = max(1, int(g2_of(range_len)))
            sub_offs = offs[0::g2]
            nsubs = len(sub_offs)
            sub_flags = np.zeros(nsubs, dtype=np.uint8)
            pool_vals: list[np.ndarray] = []
            dir_starts: list[int] = []
            items = 0
            for i in range(nsubs):
                s_lo = i * g2
                s_hi = min(s_lo + g2, cnt)
                sub_start = int(sub_offs[i])
                sub_len = (int(sub_offs[i + 1]) if i + 1 < nsubs else range_len) - sub_start
                if sub_direct(sub_len, range_len):
                    sub_flags[i] = 1
                    dir_starts.append(items)
                    pool_vals.append(offs[s_lo:s_hi] - np.uint64(sub_start))
                    items += s_hi - s_lo
            if pool_vals:
                flat = np.concatenate(pool_vals)
                dir_pool = PackedList(pack_array(flat, w_r), items, w_r)
            else:
                dir_pool = None
            sparse[k] = SparseRange(
                g2,
                PackedList(pack_array(sub_offs, w_r), nsubs, w_r),
                sub_flags,
                np.cumsum(sub_flags, dtype=np.int32),
                np.asarray(dir_starts, dtype=np.int64),
                dir_pool,
            )
            cost = (ceil_div(range_len, BLOCK) + nsubs * 2 + items * 2
                    + words_for_bits((nsubs + items) * w_r))
        total_work += cost
        max_range_work = max(max_range_work, cost)
    if meter is not None:
        meter.work += total_work
        meter.span += max_range_work + ceil_log2(nranges)
    return SelectSide(m, g1, anchors, kind, direct, sparse)


# ---------------------------------------------------------------------------
# the structure


class BinaryRankSelect:
    """Rank/select directories attached to a BitVector.

    Query state is mirrored into plain Python lists on first use; numpy
    scalar indexing is too slow for probe-per-position sweeps.
    """

    __slots__ = ("bv", "n", "range_abs", "sub_rel", "sides", "_reg",
                 "_words", "_ranges", "_subw", "_pop")

    def __init__(self, bv: BitVector, reg=None):
        self.bv = bv
        self.n = bv.nbits
        self.range_abs: np.ndarray | None = None
        self.sub_rel: PackedList | None = None
        self.sides: list[SelectSide | None] = [None, None]
        self._reg = reg if reg is not None else registry()
        self._words = None

    # -- queries ------------------------------------------------------------

    def _cache(self):
        self._pop = self._reg.popcount_list(BLOCK)
        self._words = self.bv.words.tolist() + [0]
        if self.range_abs is not None:
            self._ranges = self.range_abs.tolist()
            self._subw = self.sub_rel.words.tolist() + [0]
        else:
            self._ranges = None
            self._subw = None
        return self._words

    def _block(self, b: int) -> int:
        words = self._words or self._cache()
        return (words[b >> 2] >> ((b & 3) << 4)) & 0xFFFF

    def rank(self, v: int, i: int) -> int:
        """Occurrences of bit v in positions [0, i] (inclusive)."""
        words = self._words or self._cache()
        if i < 0 or i >= self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        ranges = self._ranges
        if ranges is None:
            raise ContractViolation("rank directory not built")
        b = i >> 4
        r = i >> 8
        ones = ranges[r - 1] if r else 0
        if b & 15:
            bitpos = b * SUB_FIELD_BITS - SUB_FIELD_BITS
            off = bitpos & 63
            w = self._subw[bitpos >> 6] >> off
            if off > _SUB_SPILL:
                w |= self._subw[(bitpos >> 6) + 1] << (64 - off)
            ones += w & _SUB_MASK
        ones += self._pop[(words[i >> 6] >> ((b & 3) << 4)) & _TAIL[i & 15]]
        return ones if v else i + 1 - ones

    def bit(self, i: int) -> int:
        words = self._words or self._cache()
        return (words[i >> 6] >> (i & 63)) & 1

    def count(self, v: int) -> int:
        if self.n == 0:
            return 0
        return self.rank(v, self.n - 1)

    def select(self, v: int, j: int) -> int:
        """Position of the j'th occurrence of bit v (j >= 1)."""
        side = self.sides[v]
        if side is None:
            raise ContractViolation("select directory not built")
        if not 1 <= j <= side.total:
            raise OccurrenceRangeError(f"occurrence {j} out of range [1, {side.total}]")
        pos, pending = side.locate(j)
        if pos is not None:
            return pos
        known, extra = pending
        return self._scan_after(known, extra, v)

    def _scan_after(self, pos: int, need: int, v: int) -> int:
        if self._words is None:
            self._cache()
        pop = self._pop
        nth = self._reg.nth_one_list(BLOCK)
        b = pos >> 4
        consumed = (pos & 15) + 1
        while True:
            blk = self._block(b)
            if not v:
                valid = min(BLOCK, self.n - (b << 4))
                blk = ~blk & mask(valid)
            blk &= ~mask(consumed) & 0xFFFF
            c = pop[blk]
            if c >= need:
                return (b << 4) + ((nth[blk] >> ((need - 1) << 2)) & 15)
            need -= c
            b += 1
            consumed = 0


def build_binary_rank(bv: BitVector, *, reg=None, pool: Pool | None = None,
                      meter: CostMeter | None = None,
                      into: BinaryRankSelect | None = None) -> BinaryRankSelect:
    """Per-block popcount probes, a prefix sum, then packed relative fields."""
    rs = into if into is not None else BinaryRankSelect(bv, reg)
    reg = rs._reg
    n = bv.nbits
    nb = ceil_div(n, BLOCK) if n else 0
    if nb == 0:
        rs.range_abs = np.zeros(0, dtype=np.int64)
        rs.sub_rel = PackedList.empty(SUB_FIELD_BITS)
        if meter is not None:
            meter.charge(1, 1)
        return rs
    pop = reg.popcount_table(BLOCK)
    blocks = bv.words.view(np.uint16)[:nb]
    counts = pop[blocks].astype(np.int64)
    cum = np.cumsum(counts)
    nranges = ceil_div(nb, BLOCK)
    ends = np.minimum((np.arange(nranges, dtype=np.int64) + 1) * BLOCK, nb) - 1
    rs.range_abs = cum[ends]
    starts = np.zeros(nranges, dtype=np.int64)
    starts[1:] = rs.range_abs[:-1]
    rel = cum - np.repeat(starts, BLOCK)[:nb]
    rs.sub_rel = PackedList(pack_array(rel.astype(np.uint64), SUB_FIELD_BITS), nb,
                            SUB_FIELD_BITS)
    rs._words = None
    if meter is not None:
        meter.charge_parallel(nb, 1)                      # block probes
        meter.charge(2 * nb, scan_span(nb))               # prefix sum
        meter.charge_parallel(nranges, 2, 2)              # range extraction
        meter.charge_parallel(nb, 2 + ceil_div(SUB_FIELD_BITS, 8), 3)  # relative fields, packed
    return rs


def build_binary_select(bv: BitVector, *, reg=None, pool: Pool | None = None,
                        meter: CostMeter | None = None,
                        into: BinaryRankSelect | None = None) -> BinaryRankSelect:
    """Block counts, a prefix sum to find stored occurrences, then per-range
    classification and packed payload emission."""
    rs = into if into is not None else BinaryRankSelect(bv, reg)
    n = bv.nbits
    L = log2n(n)
    lam = log2n(L)
    g1 = max(1, L * lam)
    direct_min = g1 * g1
    lam2 = lam * lam

    def g2_of(range_len: int) -> int:
        return max(1, log2n(range_len) * lam)

    def sub_direct(sub_len: int, range_len: int) -> bool:
        return sub_len >= log2n(sub_len) * log2n(range_len) * lam2

    nb = ceil_div(n, BLOCK) if n else 0
    if meter is not None and nb:
        meter.charge_parallel(nb, 1)          # block counts
        meter.charge(2 * nb, scan_span(nb))   # prefix sum over counts
    bits_arr = bv.bit_array()
    pool = pool or default_pool()

    def side_task(v):
        def run(m):
            occ = np.flatnonzero(bits_arr == v).astype(np.int64)
            if len(occ):
                m.charge_parallel(len(occ) // g1 + 1, ceil_log2(max(nb, 2)) + 2, 8)
            return build_select_side(occ, n, g1, direct_min, g2_of, sub_direct, m)
        return run

    rs.sides = pool.run_tasks([side_task(0), side_task(1)], meter)
    rs._words = None
    return rs


def build_binary_rank_select(bv: BitVector, *, reg=None, pool: Pool | None = None,
                             meter: CostMeter | None = None) -> BinaryRankSelect:
    rs = build_binary_rank(bv, reg=reg, pool=pool, meter=meter)
    return build_binary_select(bv, reg=reg, pool=pool, meter=meter, into=rs)
