"""Bit-packed containers and the shared lookup-table registry.

Everything is LSB-first: bit i of a stream lives at bit (i % 64) of word
(i // 64), and element i of a packed list occupies bits [i*b, (i+1)*b).
Trailing bits past the logical length are kept zero after every operation,
so word-level equality is logical equality.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation
from .par import CostMeter, ceil_div, ceil_log2, scan_span

WORD_BITS = 64
MASK64 = (1 << 64) - 1

# Lookup tables are keyed by at most this many bits; blocks of rank/select
# structures and packed-chunk tables both use it as the half-word size.
TABLE_KEY_BITS = 16


def mask(nbits: int) -> int:
    return (1 << nbits) - 1


def words_for_bits(nbits: int) -> int:
    return (int(nbits) + 63) >> 6


# ---------------------------------------------------------------------------
# vectorized word-stream kernels


def unpack_array(words: np.ndarray, width: int, count: int) -> np.ndarray:
    """Read `count` width-bit fields starting at bit 0 of the word stream."""
    count = int(count)
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    if width == 64:
        return words[:count].copy()
    idx = np.arange(count, dtype=np.uint64)
    bitpos = idx * np.uint64(width)
    wi = (bitpos >> np.uint64(6)).astype(np.int64)
    off = bitpos & np.uint64(63)
    vals = words[wi] >> off
    spill = off.astype(np.int64) + width > 64
    if spill.any():
        vals[spill] |= words[wi[spill] + 1] << (np.uint64(64) - off[spill])
    return vals & np.uint64(mask(width))


def pack_array(vals: np.ndarray, width: int) -> np.ndarray:
    """Pack width-bit values into a fresh word stream (values must fit)."""
    count = int(len(vals))
    words = np.zeros(words_for_bits(count * width), dtype=np.uint64)
    if count == 0:
        return words
    vals = np.ascontiguousarray(vals, dtype=np.uint64)
    bitpos = np.arange(count, dtype=np.uint64) * np.uint64(width)
    wi = (bitpos >> np.uint64(6)).astype(np.int64)
    off = bitpos & np.uint64(63)
    np.bitwise_or.at(words, wi, vals << off)  # high bits wrap off harmlessly
    spill = off.astype(np.int64) + width > 64
    if spill.any():
        np.bitwise_or.at(words, wi[spill] + 1, vals[spill] >> (np.uint64(64) - off[spill]))
    return words


def concat_pieces(vals: np.ndarray, widths: np.ndarray) -> tuple[np.ndarray, int]:
    """Concatenate variable-width bit pieces (each <= 64 bits) into words."""
    vals = np.ascontiguousarray(vals, dtype=np.uint64)
    w64 = np.ascontiguousarray(widths, dtype=np.int64)
    ends = np.cumsum(w64)
    total = int(ends[-1]) if len(ends) else 0
    words = np.zeros(words_for_bits(total), dtype=np.uint64)
    if total == 0:
        return words, 0
    keep = w64 > 0  # zero-width pieces would index past the last word
    if not keep.all():
        vals = vals[keep]
        ends = ends[keep]
        w64 = w64[keep]
    starts = (ends - w64).astype(np.uint64)
    wi = (starts >> np.uint64(6)).astype(np.int64)
    off = starts & np.uint64(63)
    np.bitwise_or.at(words, wi, vals << off)
    spill = off.astype(np.int64) + w64 > 64
    if spill.any():
        np.bitwise_or.at(words, wi[spill] + 1, vals[spill] >> (np.uint64(64) - off[spill]))
    return words, total


def extract_bits(words: np.ndarray, bit_lo: int, nbits: int) -> np.ndarray:
    """Copy the bit range [bit_lo, bit_lo + nbits) into fresh words."""
    nbits = int(nbits)
    out_words = words_for_bits(nbits)
    if nbits == 0:
        return np.zeros(0, dtype=np.uint64)
    base = bit_lo >> 6
    sh = bit_lo & 63
    src = words[base:base + out_words + 1]
    if sh == 0:
        out = src[:out_words].copy()
    else:
        out = src[:out_words] >> np.uint64(sh)
        hi = src[1:out_words + 1] << np.uint64(64 - sh)
        out[: len(hi)] |= hi
    tail = nbits & 63
    if tail:
        out[-1] &= np.uint64(mask(tail))
    return out


def concat_streams(parts: Sequence[tuple[np.ndarray, int]],
                   meter: CostMeter | None = None) -> tuple[np.ndarray, int]:
    """Concatenate whole bit streams (words, nbits) word-parallel.

    Interior words copy with two shifted ors; words where adjacent parts
    meet are assembled by the same ors because every part keeps its
    trailing bits zero.
    """
    total = sum(int(nb) for _, nb in parts)
    out = np.zeros(words_for_bits(total), dtype=np.uint64)
    off = 0
    copied_words = 0
    for words, nbits in parts:
        nbits = int(nbits)
        if nbits == 0:
            continue
        nw = words_for_bits(nbits)
        base = off >> 6
        sh = off & 63
        if sh == 0:
            out[base:base + nw] |= words[:nw]
        else:
            out[base:base + nw] |= words[:nw] << np.uint64(sh)
            hi = words[:nw] >> np.uint64(64 - sh)
            end = min(base + 1 + nw, len(out))
            out[base + 1:end] |= hi[: end - base - 1]
        copied_words += nw
        off += nbits
    if meter is not None:
        # parallel word copy plus the offset prefix sum over the parts
        meter.charge_parallel(max(1, 2 * copied_words), 1)
        meter.charge(2 * len(parts), scan_span(len(parts)))
    return out, total


# ---------------------------------------------------------------------------
# containers


class BitVector:
    """Bits packed LSB-first into 64-bit words."""

    __slots__ = ("words", "nbits")

    def __init__(self, words: np.ndarray, nbits: int):
        nbits = int(nbits)
        need = words_for_bits(nbits)
        if len(words) != need:
            raise ContractViolation(f"expected {need} words for {nbits} bits, got {len(words)}")
        self.words = np.ascontiguousarray(words, dtype=np.uint64)
        self.nbits = nbits
        tail = nbits & 63
        if tail and need:
            self.words[-1] &= np.uint64(mask(tail))

    @classmethod
    def zeros(cls, nbits: int) -> "BitVector":
        return cls(np.zeros(words_for_bits(nbits), dtype=np.uint64), nbits)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.uint64)
        return cls(pack_array(arr, 1), len(arr))

    def get(self, i: int) -> int:
        if not 0 <= i < self.nbits:
            raise IndexError(f"bit {i} out of range [0, {self.nbits})")
        return int(self.words[i >> 6] >> np.uint64(i & 63)) & 1

    def bit_array(self) -> np.ndarray:
        """The bits as a uint8 array (for tests and reference checks)."""
        if self.nbits == 0:
            return np.zeros(0, dtype=np.uint8)
        return np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.nbits]

    def count_ones(self) -> int:
        return int(self.bit_array().sum())

    def __len__(self) -> int:
        return self.nbits

    def __eq__(self, other) -> bool:
        return (isinstance(other, BitVector) and self.nbits == other.nbits
                and np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.nbits, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BitVector({self.nbits} bits)"


class PackedList:
    """`count` integers of `width` bits each, packed contiguously."""

    __slots__ = ("words", "count", "width")

    def __init__(self, words: np.ndarray, count: int, width: int):
        width = int(width)
        count = int(count)
        if not 1 <= width <= 64:
            raise ContractViolation(f"width must be in [1, 64], got {width}")
        need = words_for_bits(count * width)
        if len(words) != need:
            raise ContractViolation(f"expected {need} words, got {len(words)}")
        self.words = np.ascontiguousarray(words, dtype=np.uint64)
        self.count = count
        self.width = width
        tail = (count * width) & 63
        if tail and need:
            self.words[-1] &= np.uint64(mask(tail))

    @classmethod
    def empty(cls, width: int) -> "PackedList":
        return cls(np.zeros(0, dtype=np.uint64), 0, width)

    def get(self, i: int) -> int:
        if not 0 <= i < self.count:
            raise IndexError(f"index {i} out of range [0, {self.count})")
        lo = i * self.width
        wi = lo >> 6
        off = lo & 63
        v = int(self.words[wi]) >> off
        if off + self.width > 64:
            v |= int(self.words[wi + 1]) << (64 - off)
        return v & mask(self.width)

    def set(self, i: int, v: int) -> None:
        if not 0 <= i < self.count:
            raise IndexError(f"index {i} out of range [0, {self.count})")
        if v >> self.width:
            raise ContractViolation(f"value {v} does not fit in {self.width} bits")
        lo = i * self.width
        wi = lo >> 6
        off = lo & 63
        m = mask(self.width)
        w = int(self.words[wi])
        self.words[wi] = np.uint64((w & ~(m << off) & MASK64) | ((v << off) & MASK64))
        if off + self.width > 64:
            spill = self.width - (64 - off)
            w2 = int(self.words[wi + 1])
            self.words[wi + 1] = np.uint64((w2 & ~mask(spill)) | (v >> (64 - off)))

    def unpack(self) -> np.ndarray:
        return unpack_array(self.words, self.width, self.count)

    def append(self, other: "PackedList", meter: CostMeter | None = None) -> "PackedList":
        if self.width != other.width:
            raise ContractViolation(f"width mismatch: {self.width} vs {other.width}")
        total = self.count + other.count
        out = np.zeros(words_for_bits(total * self.width), dtype=np.uint64)
        out[: len(self.words)] = self.words
        off = self.count * self.width
        base = off >> 6
        sh = off & 63
        nw = len(other.words)
        if nw:
            if sh == 0:
                out[base:base + nw] |= other.words
            else:
                out[base:base + nw] |= other.words << np.uint64(sh)
                hi = other.words >> np.uint64(64 - sh)
                end = min(base + 1 + nw, len(out))
                out[base + 1:end] |= hi[: end - base - 1]
        if meter is not None:
            meter.charge(1 + words_for_bits(other.count * other.width))
        return PackedList(out, total, self.width)

    def split(self, k: int, meter: CostMeter | None = None) -> list["PackedList"]:
        """Chunks of at most k elements; concatenation reproduces self."""
        if k < 1:
            raise ContractViolation(f"chunk size must be >= 1, got {k}")
        out = []
        for lo in range(0, self.count, k):
            cnt = min(k, self.count - lo)
            w = extract_bits(self.words, lo * self.width, cnt * self.width)
            out.append(PackedList(w, cnt, self.width))
        if meter is not None:
            meter.charge(words_for_bits(self.count * self.width) + ceil_div(self.count, k))
        return out

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other) -> bool:
        return (isinstance(other, PackedList) and self.width == other.width
                and self.count == other.count and np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.width, self.count, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"PackedList(count={self.count}, width={self.width})"


def pack(values, width: int, meter: CostMeter | None = None) -> PackedList:
    """Pack integers into a fresh list, validating they fit the width."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                     dtype=np.uint64)
    if len(arr) and width < 64 and int(arr.max()) >> width:
        raise ContractViolation(f"value does not fit in {width} bits")
    if meter is not None:
        meter.charge(2 * len(arr) + words_for_bits(len(arr) * width))
    return PackedList(pack_array(arr, width), len(arr), width)


# ---------------------------------------------------------------------------
# slice-partition table


class SliceTable:
    """Stable partitions of packed chunks of slice values, by one bit.

    A chunk packs up to `cap` values of `slice_bits` bits each (LSB-first).
    For bit index t (0 = most significant bit of a value) the table yields
    the chunk's routing bitmap plus the packed sublists of values routed to
    the 0 side and the 1 side, order preserved. Only full chunks are
    tabulated: shorter chunks are padded with all-ones values, which land
    at the tail of the ones list and are sliced back off.
    """

    __slots__ = ("slice_bits", "cap", "ent", "_bm_shift", "_l0_shift", "_l1_shift",
                 "_pad", "meter")

    N1_BITS = 5

    def __init__(self, slice_bits: int, cap: int):
        slice_bits = int(slice_bits)
        cap = int(cap)
        if slice_bits < 1 or cap < 1 or cap * slice_bits > TABLE_KEY_BITS:
            raise ContractViolation(
                f"need 1 <= cap*slice_bits <= {TABLE_KEY_BITS}, got cap={cap} slice_bits={slice_bits}")
        self.slice_bits = slice_bits
        self.cap = cap
        self._bm_shift = self.N1_BITS
        self._l0_shift = self.N1_BITS + cap
        self._l1_shift = self.N1_BITS + cap + cap * slice_bits
        full = mask(cap * slice_bits)
        self._pad = [full ^ mask(l * slice_bits) for l in range(cap + 1)]
        self.meter = CostMeter()
        self._build()

    def _build(self):
        sb, cap = self.slice_bits, self.cap
        nvals = 1 << (cap * sb)
        vals = np.arange(nvals, dtype=np.uint64)
        smask = np.uint64(mask(sb))
        self.ent = np.zeros((sb, nvals), dtype=np.uint64)
        for t in range(sb):
            n0 = np.zeros(nvals, dtype=np.uint64)
            n1 = np.zeros(nvals, dtype=np.uint64)
            l0 = np.zeros(nvals, dtype=np.uint64)
            l1 = np.zeros(nvals, dtype=np.uint64)
            bm = np.zeros(nvals, dtype=np.uint64)
            for j in range(cap):
                e = (vals >> np.uint64(j * sb)) & smask
                b = (e >> np.uint64(sb - 1 - t)) & np.uint64(1)
                bm |= b << np.uint64(j)
                ones = b.astype(bool)
                l0 |= np.where(ones, np.uint64(0), e << (n0 * np.uint64(sb)))
                l1 |= np.where(ones, e << (n1 * np.uint64(sb)), np.uint64(0))
                n0 += 1 - b
                n1 += b
            self.ent[t] = (n1 | (bm << np.uint64(self._bm_shift))
                           | (l0 << np.uint64(self._l0_shift))
                           | (l1 << np.uint64(self._l1_shift)))
        # each entry evaluated sequentially, all entries in parallel
        self.meter.charge_parallel(sb * nvals, 4 * cap, 4 * cap)

    def lookup(self, value: int, length: int, t: int) -> tuple[int, int, int, int, int]:
        """Partition a chunk of `length` values: (bitmap, zeros, n0, ones, n1)."""
        sb, cap = self.slice_bits, self.cap
        if not 0 <= t < sb:
            raise ContractViolation(f"bit index {t} out of range [0, {sb})")
        if not 0 <= length <= cap:
            raise ContractViolation(f"chunk length {length} out of range [0, {cap}]")
        if length < cap:
            value |= self._pad[length]
        e = int(self.ent[t][value])
        n1 = e & mask(self.N1_BITS)
        bm = (e >> self._bm_shift) & mask(cap)
        l0 = (e >> self._l0_shift) & mask(cap * sb)
        l1 = (e >> self._l1_shift) & mask(cap * sb)
        if length < cap:
            n1 -= cap - length
            bm &= mask(length)
            l1 &= mask(n1 * sb)
        return bm, l0, length - n1, l1, n1

    def lookup_full(self, values: np.ndarray, t: int):
        """Vectorized lookup for full-length chunks."""
        e = self.ent[t][values.astype(np.int64)]
        n1 = (e & np.uint64(mask(self.N1_BITS))).astype(np.int64)
        bm = (e >> np.uint64(self._bm_shift)) & np.uint64(mask(self.cap))
        l0 = (e >> np.uint64(self._l0_shift)) & np.uint64(mask(self.cap * self.slice_bits))
        l1 = e >> np.uint64(self._l1_shift)
        return bm, l0, self.cap - n1, l1, n1

    def table_bytes(self) -> int:
        return int(self.ent.nbytes)


def build_slice_table(slice_bits: int, cap: int) -> SliceTable:
    return SliceTable(slice_bits, cap)


def default_chunk_cap(slice_bits: int) -> int:
    return max(1, TABLE_KEY_BITS // int(slice_bits))


# ---------------------------------------------------------------------------
# symbol-block tables (small alphabets)


class SymbolTables:
    """Per-block symbol statistics for alphabets up to 2**4.

    Blocks pack `block_syms` symbols of `width` bits. Tables answer, in one
    probe each: occurrences of c among the first l symbols (eq and <=
    variants), the position of the j'th occurrence of c, and the packed
    full-block histogram.
    """

    __slots__ = ("sigma", "width", "block_syms", "cnt_eq", "cnt_le", "nth_sym",
                 "hist_packed", "hist_field_bits", "meter", "_flat")

    NO_POS = 255

    def __init__(self, sigma: int, width: int | None = None, block_syms: int | None = None):
        sigma = int(sigma)
        if sigma < 1:
            raise ContractViolation("alphabet size must be >= 1")
        self.sigma = sigma
        self.width = width if width is not None else max(1, ceil_log2(sigma))
        if sigma > (1 << self.width):
            raise ContractViolation(f"alphabet {sigma} does not fit width {self.width}")
        self.block_syms = block_syms if block_syms is not None else max(
            1, TABLE_KEY_BITS // self.width)
        if self.block_syms * self.width > TABLE_KEY_BITS:
            raise ContractViolation("block exceeds the table key budget")
        self.meter = CostMeter()
        self._flat = None
        self._build()

    def _build(self):
        sigma, w, u = self.sigma, self.width, self.block_syms
        nvals = 1 << (u * w)
        vals = np.arange(nvals, dtype=np.uint64)
        syms = [((vals >> np.uint64(j * w)) & np.uint64(mask(w))) for j in range(u)]
        self.cnt_eq = np.zeros((sigma, u, nvals), dtype=np.uint8)
        self.nth_sym = np.full((sigma, u, nvals), self.NO_POS, dtype=np.uint8)
        for c in range(sigma):
            acc = np.zeros(nvals, dtype=np.uint8)
            for j in range(u):
                hit = syms[j] == c
                if hit.any():
                    where = np.flatnonzero(hit)
                    self.nth_sym[c, acc[where], where] = j
                acc = acc + hit
                self.cnt_eq[c, j] = acc
        self.cnt_le = np.cumsum(self.cnt_eq, axis=0, dtype=np.uint8)
        self.hist_field_bits = ceil_log2(u + 1)
        self.hist_packed = np.zeros(nvals, dtype=np.uint64)
        for c in range(sigma):
            self.hist_packed |= self.cnt_eq[c, u - 1].astype(np.uint64) << np.uint64(
                c * self.hist_field_bits)
        self.meter.charge_parallel(sigma * nvals, 3 * u, 3 * u)

    def query_lists(self):
        """Flat plain-list mirrors of the per-block tables (lazy; query side)."""
        if self._flat is None:
            self._flat = (self.cnt_le.ravel().tolist(),
                          self.cnt_eq.ravel().tolist(),
                          self.nth_sym.ravel().tolist())
        return self._flat

    def block_histogram(self, value: int, length: int) -> tuple[int, ...]:
        """Occurrence counts of every symbol among the first `length` of a block."""
        if not 1 <= length <= self.block_syms:
            raise ContractViolation(f"length {length} out of range [1, {self.block_syms}]")
        return tuple(int(self.cnt_eq[c, length - 1, value]) for c in range(self.sigma))

    def table_bytes(self) -> int:
        return int(self.cnt_eq.nbytes + self.cnt_le.nbytes + self.nth_sym.nbytes
                   + self.hist_packed.nbytes)


# ---------------------------------------------------------------------------
# registry


class TableRegistry:
    """Builds each lookup table once per parameter set and shares it.

    Table construction work is charged to the registry's own meter, not to
    the build that happened to trigger it; `table_bytes` reports the
    resident footprint.
    """

    def __init__(self):
        self._cache: dict = {}
        self.meter = CostMeter()

    def popcount_table(self, block_bits: int = TABLE_KEY_BITS) -> np.ndarray:
        key = ("pop", block_bits)
        if key not in self._cache:
            if not 1 <= block_bits <= 20:
                raise ContractViolation(f"popcount table key too wide: {block_bits}")
            vals = np.arange(1 << block_bits, dtype=np.uint32)
            out = np.zeros(1 << block_bits, dtype=np.uint8)
            for j in range(block_bits):
                out += ((vals >> j) & 1).astype(np.uint8)
            self._cache[key] = out
            self.meter.charge_parallel(1 << block_bits, block_bits, block_bits)
        return self._cache[key]

    def nth_one_table(self, block_bits: int = TABLE_KEY_BITS) -> np.ndarray:
        """entry >> 4*(j-1) & 15 = position of the j'th set bit (LSB-first)."""
        key = ("nth1", block_bits)
        if key not in self._cache:
            if not 1 <= block_bits <= 16:
                raise ContractViolation(f"nth-one table key too wide: {block_bits}")
            vals = np.arange(1 << block_bits, dtype=np.uint64)
            pos = np.zeros(1 << block_bits, dtype=np.uint64)
            cnt = np.zeros(1 << block_bits, dtype=np.uint64)
            for p in range(block_bits):
                bit = (vals >> np.uint64(p)) & np.uint64(1)
                pos |= np.where(bit.astype(bool), np.uint64(p) << (cnt * np.uint64(4)),
                                np.uint64(0))
                cnt += bit
            self._cache[key] = pos
            self.meter.charge_parallel(1 << block_bits, 2 * block_bits, 2 * block_bits)
        return self._cache[key]

    def popcount_list(self, block_bits: int = TABLE_KEY_BITS) -> list:
        key = ("popl", block_bits)
        if key not in self._cache:
            self._cache[key] = self.popcount_table(block_bits).tolist()
        return self._cache[key]

    def nth_one_list(self, block_bits: int = TABLE_KEY_BITS) -> list:
        key = ("nth1l", block_bits)
        if key not in self._cache:
            self._cache[key] = self.nth_one_table(block_bits).tolist()
        return self._cache[key]

    def slice_table(self, slice_bits: int, cap: int | None = None) -> SliceTable:
        cap = cap if cap is not None else default_chunk_cap(slice_bits)
        key = ("slice", slice_bits, cap)
        if key not in self._cache:
            tbl = SliceTable(slice_bits, cap)
            self._cache[key] = tbl
            self.meter.add(tbl.meter)
        return self._cache[key]

    def symbol_tables(self, sigma: int, width: int | None = None,
                      block_syms: int | None = None) -> SymbolTables:
        tbl_width = width if width is not None else max(1, ceil_log2(sigma))
        tbl_u = block_syms if block_syms is not None else max(1, TABLE_KEY_BITS // tbl_width)
        key = ("sym", sigma, tbl_width, tbl_u)
        if key not in self._cache:
            tbl = SymbolTables(sigma, tbl_width, tbl_u)
            self._cache[key] = tbl
            self.meter.add(tbl.meter)
        return self._cache[key]

    def table_bytes(self) -> int:
        total = 0
        for key, v in self._cache.items():
            if isinstance(v, list):
                continue  # query-side mirror of an array already counted
            if isinstance(v, np.ndarray):
                total += v.nbytes
            else:
                total += v.table_bytes()
        return int(total)


_REGISTRY: TableRegistry | None = None


def registry() -> TableRegistry:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = TableRegistry()
    return _REGISTRY
