"""Balanced binary wavelet tree with three interchangeable builders.

All builders produce bit-identical trees; they differ in how work is
organized. Levels at multiples of the slice width materialize full codes
("anchor" levels); the levels between them carry only the relevant code
slice per element, packed, and are processed chunk-at-a-time through the
partition table. The packed-serial builder routes anchor contents node by
node; the parallel-sorted builder replaces that routing with a stable
block counting sort per node; domain decomposition builds a serial tree
per part and concatenates the per-node bitmaps word-parallel.

Tree construction and rank/select attachment are metered separately
(build_meter / rs_meter on the tree).
"""
from __future__ import annotations

import bisect
import math

import numpy as np

from . import oracle
from .bits import (BitVector, PackedList, TABLE_KEY_BITS, concat_pieces,
                   concat_streams, mask, pack, pack_array, registry,
                   unpack_array, words_for_bits)
from .errors import ContractViolation, OccurrenceRangeError
from .par import (CostMeter, Pool, ceil_div, ceil_log2, default_pool,
                  scan_span, sort_perm_by_key)

# per-chunk op budget of the table path: load+extract, probe, field unpacks,
# three appends with counters
CHUNK_OPS = 15
CHUNK_OPS_BITMAP_ONLY = 9


def tree_depth(sigma: int) -> int:
    return oracle.tree_depth(sigma)


def default_slice_bits(n: int, depth: int) -> int:
    L = ceil_log2(max(n, 2))
    return max(1, min(int(math.isqrt(max(L, 1))), max(depth, 1), TABLE_KEY_BITS))


def map_alphabet(raw) -> tuple[PackedList, np.ndarray]:
    """Dense codes (sorted raw order) plus the sorted alphabet."""
    arr = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=np.int64)
    alphabet = np.unique(arr)
    sigma = len(alphabet)
    codes = np.searchsorted(alphabet, arr).astype(np.uint64)
    width = max(1, tree_depth(sigma))
    return PackedList(pack_array(codes, width), len(codes), width), alphabet


def _heap(level: int, path: int) -> int:
    return ((1 << level) - 1) + path


class WaveletNode:
    __slots__ = ("bitmap", "rs")

    def __init__(self, bitmap: BitVector, rs=None):
        self.bitmap = bitmap
        self.rs = rs


class WaveletTree:
    """Heap-indexed nodes, each a bitmap plus its rank/select directories."""

    __slots__ = ("sigma", "n", "depth", "alphabet", "nodes", "slice_bits",
                 "build_meter", "rs_meter", "_reg", "_code_map", "_alpha_list")

    def __init__(self, sigma, n, alphabet, nodes, slice_bits, reg=None):
        self.sigma = int(sigma)
        self.n = int(n)
        self.depth = tree_depth(sigma)
        self.alphabet = np.asarray(alphabet, dtype=np.int64)
        self.nodes = nodes
        self.slice_bits = int(slice_bits)
        self.build_meter = CostMeter()
        self.rs_meter = CostMeter()
        self._reg = reg if reg is not None else registry()
        self._code_map = None
        self._alpha_list = None

    # -- alphabet mapping ----------------------------------------------------

    def _maps(self):
        self._alpha_list = self.alphabet.tolist()
        self._code_map = {c: k for k, c in enumerate(self._alpha_list)}
        return self._code_map

    def code_of(self, c) -> int | None:
        return (self._code_map or self._maps()).get(c)

    def code_at_most(self, c) -> int | None:
        if self._alpha_list is None:
            self._maps()
        k = bisect.bisect_right(self._alpha_list, c) - 1
        return k if k >= 0 else None

    # -- queries --------------------------------------------------------------

    def access(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        if self.depth == 0:
            return int(self.alphabet[0])
        if self._alpha_list is None:
            self._maps()
        idx = 0
        code = 0
        pos = i
        for _ in range(self.depth):
            rs = self.nodes[idx].rs
            b = rs.bit(pos)
            pos = rs.rank(b, pos) - 1
            code = (code << 1) | b
            idx = 2 * idx + 1 + b
        return self._alpha_list[code]

    def rank(self, c, i: int) -> int:
        """Occurrences of raw symbol c in positions [0, i]."""
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        x = self.code_of(c)
        if x is None:
            return 0
        if self.depth == 0:
            return i + 1
        idx = 0
        pos = i
        for level in range(self.depth):
            node = self.nodes.get(idx)
            if node is None:
                return 0
            b = (x >> (self.depth - 1 - level)) & 1
            cnt = node.rs.rank(b, pos)
            if cnt == 0:
                return 0
            pos = cnt - 1
            idx = 2 * idx + 1 + b
        return pos + 1

    def select(self, c, j: int) -> int:
        """Position of the j'th occurrence of raw symbol c (leaf-to-root walk)."""
        x = self.code_of(c)
        if x is None:
            raise OccurrenceRangeError(f"symbol {c!r} does not occur")
        total = self.rank(c, self.n - 1) if self.n else 0
        if not 1 <= j <= total:
            raise OccurrenceRangeError(f"occurrence {j} out of range [1, {total}]")
        if self.depth == 0:
            return j - 1
        path = []
        idx = 0
        for level in range(self.depth):
            path.append(self.nodes[idx])
            idx = 2 * idx + 1 + ((x >> (self.depth - 1 - level)) & 1)
        pos = path[-1].rs.select(x & 1, j)
        for level in range(self.depth - 2, -1, -1):
            b = (x >> (self.depth - 1 - level)) & 1
            pos = path[level].rs.select(b, pos + 1)
        return pos

    def rank_le(self, c, i: int) -> int:
        """Occurrences of raw symbols <= c in positions [0, i]."""
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range [0, {self.n})")
        x = self.code_at_most(c)
        if x is None:
            return 0
        if self.depth == 0:
            return i + 1
        idx = 0
        pos = i
        acc = 0
        for level in range(self.depth):
            node = self.nodes.get(idx)
            if node is None:
                return acc
            b = (x >> (self.depth - 1 - level)) & 1
            zeros = node.rs.rank(0, pos)
            if b:
                acc += zeros
                ones = pos + 1 - zeros
                if ones == 0:
                    return acc
                pos = ones - 1
            else:
                if zeros == 0:
                    return acc
                pos = zeros - 1
            idx = 2 * idx + 1 + b
        return acc + pos + 1

    def count(self, c) -> int:
        return self.rank(c, self.n - 1) if self.n else 0

    def total_bitmap_bits(self) -> int:
        return sum(node.bitmap.nbits for node in self.nodes.values())


# ---------------------------------------------------------------------------
# shared level kernels


def _read_bits(words: np.ndarray, lo: int, nbits: int) -> int:
    """Read up to 64 bits starting at bit lo (words padded by one)."""
    wi = lo >> 6
    off = lo & 63
    v = int(words[wi]) >> off
    if off + nbits > 64:
        v |= int(words[wi + 1]) << (64 - off)
    return v & mask(nbits)


class _Short:
    """A node's packed slice values (padded by one word for chunk reads)."""

    __slots__ = ("words", "count")

    def __init__(self, words: np.ndarray, count: int):
        self.words = np.concatenate([words, np.zeros(1, dtype=np.uint64)])
        self.count = count


def _partition_short(short: _Short, span: int, t: int, tbl, emit_children: bool):
    """Chunk probes: the node's bitmap pieces plus child slice lists."""
    cap = tbl.cap
    cnt = short.count
    nfull = cnt // cap
    tail = cnt - nfull * cap
    vals = unpack_array(short.words, cap * span, nfull)
    bm, l0, n0, l1, n1 = tbl.lookup_full(vals, t)
    bm_vals = bm
    bm_lens = np.full(nfull, cap, dtype=np.int64)
    if tail:
        tval = _read_bits(short.words, nfull * cap * span, tail * span)
        tbm, tl0, tn0, tl1, tn1 = tbl.lookup(tval, tail, t)
        bm_vals = np.append(bm_vals, np.uint64(tbm))
        bm_lens = np.append(bm_lens, tail)
    bm_words, bm_bits = concat_pieces(bm_vals, bm_lens)
    nchunks = nfull + (1 if tail else 0)
    kids = None
    if emit_children:
        w0 = n0 * span
        w1 = (np.asarray(n1, dtype=np.int64)) * span
        if tail:
            l0a = np.append(l0, np.uint64(tl0))
            w0 = np.append(w0, tn0 * span)
            l1a = np.append(l1, np.uint64(tl1))
            w1 = np.append(w1, tn1 * span)
        else:
            l0a, l1a = l0, l1
        c0_words, c0_bits = concat_pieces(l0a, w0)
        c1_words, c1_bits = concat_pieces(l1a, w1)
        kids = (_Short(c0_words, c0_bits // span), _Short(c1_words, c1_bits // span))
        work = (nchunks * CHUNK_OPS + len(bm_words) + len(c0_words) + len(c1_words))
    else:
        work = nchunks * CHUNK_OPS_BITMAP_ONLY + len(bm_words)
    return BitVector(bm_words[:words_for_bits(cnt)], cnt), kids, work, nchunks


def _emit_anchor(arr: np.ndarray, code_width: int, depth: int, a: int, span: int,
                 emit_shorts: bool):
    """One pass over an anchor node: bitmap bits plus child slice lists."""
    m = len(arr)
    slices = (arr >> np.uint64(depth - a - span)) & np.uint64(mask(span))
    top = slices >> np.uint64(span - 1)
    bm = BitVector(pack_array(top, 1), m)
    loads = words_for_bits(m * code_width)
    work = loads + 3 * m + words_for_bits(m)
    kids = None
    if emit_shorts:
        sel = top == 0
        c0 = slices[sel]
        c1 = slices[~sel]
        kids = (_Short(pack_array(c0, span), len(c0)),
                _Short(pack_array(c1, span), len(c1)))
        work += 2 * m + words_for_bits(m * span)
    return bm, slices, kids, work


def _scatter_serial(slices: np.ndarray, span: int, meter: CostMeter | None,
                    pool: Pool | None) -> np.ndarray:
    # element-at-a-time bucket appends; stable by construction
    m = len(slices)
    if meter is not None:
        meter.charge(2 * m)
    return np.argsort(slices, kind="stable")


def _scatter_sorted(slices: np.ndarray, span: int, meter: CostMeter | None,
                    pool: Pool | None) -> np.ndarray:
    return sort_perm_by_key(slices, span, meter, pool)


def _build_bitmaps(arr: np.ndarray, n: int, sigma: int, code_width: int, slice_bits: int,
                   reg, pool: Pool, meter: CostMeter | None, parallel: bool,
                   scatter_fn) -> dict[int, BitVector]:
    """Anchor levels plus the chunked cascade between them."""
    depth = tree_depth(sigma)
    bitmaps: dict[int, BitVector] = {}
    if depth == 0 or n == 0:
        return bitmaps
    tau = slice_bits
    content: dict[int, np.ndarray] = {0: arr}

    def run_node_tasks(entries, fn):
        # fn(entry, meter) -> None; children write disjoint dict keys prepared here
        if parallel and len(entries) > 1:
            pool.run_tasks([(lambda e: (lambda m: fn(e, m)))(e) for e in entries], meter)
        else:
            for e in entries:
                fn(e, meter)

    for a in range(0, depth, tau):
        span = min(tau, depth - a)
        scatter = a + tau < depth
        emit_shorts = span >= 2
        tbl = reg.slice_table(span)
        next_content: dict[int, np.ndarray] = {}
        cur_shorts: dict[int, _Short] = {}

        def anchor_node(item, m, _a=a, _span=span, _scatter=scatter,
                        _emit=emit_shorts):
            p, arr_p = item
            bm, slices, kids, work = _emit_anchor(arr_p, code_width, depth, _a, _span, _emit)
            if m is not None:
                if parallel:
                    m.charge_parallel(max(1, len(arr_p)), 5 if _emit else 3, 8)
                    m.charge(words_for_bits(len(arr_p) * code_width), 2)
                else:
                    m.charge(work)
            bitmaps[_heap(_a, p)] = bm
            if kids is not None:
                if kids[0].count:
                    cur_shorts[(p << 1)] = kids[0]
                if kids[1].count:
                    cur_shorts[(p << 1) | 1] = kids[1]
            if _scatter:
                perm = scatter_fn(slices, _span, m, pool)
                routed = arr_p[perm]
                sizes = np.bincount(slices.astype(np.int64), minlength=1 << _span)
                if m is not None:
                    if parallel:
                        m.charge_parallel(max(1, len(arr_p)), 2, 4)
                    else:
                        m.charge(2 * len(arr_p))
                    m.charge(words_for_bits(len(arr_p) * code_width), 2)
                lo = 0
                for k in range(1 << _span):
                    sz = int(sizes[k])
                    if sz:
                        next_content[(p << _span) | k] = routed[lo:lo + sz]
                    lo += sz

        run_node_tasks(sorted(content.items()), anchor_node)

        for ell in range(a + 1, a + span):
            t = ell - a
            emit_children = ell + 1 < a + span
            next_shorts: dict[int, _Short] = {}

            def short_node(item, m, _ell=ell, _t=t, _span=span, _emit=emit_children,
                           _tbl=tbl, _next=None):
                p, short = item
                bm, kids, work, nchunks = _partition_short(short, _span, _t, _tbl, _emit)
                if m is not None:
                    if parallel:
                        m.charge_parallel(max(1, nchunks),
                                          CHUNK_OPS if _emit else CHUNK_OPS_BITMAP_ONLY, 16)
                        m.charge(2 * ceil_div(short.count, 32), scan_span(nchunks))
                    else:
                        m.charge(work)
                bitmaps[_heap(_ell, p)] = bm
                if kids is not None:
                    if kids[0].count:
                        next_shorts[(p << 1)] = kids[0]
                    if kids[1].count:
                        next_shorts[(p << 1) | 1] = kids[1]

            run_node_tasks(sorted(cur_shorts.items()), short_node)
            cur_shorts = next_shorts

        content = next_content
    return bitmaps


def _attach_rank_select(tree: WaveletTree, pool: Pool) -> None:
    from .rsb import build_binary_rank_select

    items = sorted(tree.nodes.items())

    def task(item):
        def run(m):
            idx, node = item
            node.rs = build_binary_rank_select(node.bitmap, reg=tree._reg, pool=pool, meter=m)
        return run

    pool.run_tasks([task(it) for it in items], tree.rs_meter)


def _as_code_list(codes, sigma: int) -> PackedList:
    if isinstance(codes, PackedList):
        return codes
    arr = np.asarray(list(codes) if not isinstance(codes, np.ndarray) else codes,
                     dtype=np.uint64)
    if len(arr) and int(arr.max()) >= max(sigma, 1):
        raise ContractViolation("code out of range for alphabet size")
    return PackedList(pack_array(arr, max(1, tree_depth(sigma))), len(arr),
                      max(1, tree_depth(sigma)))


def _finish(codes: PackedList, sigma: int, alphabet, slice_bits: int, bitmaps,
            reg, pool: Pool, meter: CostMeter, with_rank_select: bool) -> WaveletTree:
    if alphabet is None:
        alphabet = np.arange(sigma, dtype=np.int64)
    nodes = {idx: WaveletNode(bm) for idx, bm in sorted(bitmaps.items())}
    tree = WaveletTree(sigma, codes.count, alphabet, nodes, slice_bits, reg)
    tree.build_meter.add(meter)
    if with_rank_select:
        _attach_rank_select(tree, pool)
    return tree


def build_packed_serial(codes, sigma: int, slice_bits: int | None = None, *,
                        alphabet=None, reg=None, pool: Pool | None = None,
                        with_rank_select: bool = True) -> WaveletTree:
    """Single-pass-per-level construction; every charge is sequential."""
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    cl = _as_code_list(codes, sigma)
    depth = tree_depth(sigma)
    tau = slice_bits if slice_bits is not None else default_slice_bits(cl.count, depth)
    if not 1 <= tau <= max(TABLE_KEY_BITS, 1):
        raise ContractViolation(f"slice width {tau} out of range")
    tau = min(tau, depth) if depth else 1
    meter = CostMeter()
    arr = cl.unpack()
    if cl.count:
        meter.charge(words_for_bits(cl.count * cl.width) + 1)
    bitmaps = _build_bitmaps(arr, cl.count, sigma, cl.width, tau, reg, pool, meter,
                             parallel=False, scatter_fn=_scatter_serial)
    return _finish(cl, sigma, alphabet, tau, bitmaps, reg, pool, meter, with_rank_select)


def build_parallel_sorted(codes, sigma: int, slice_bits: int | None = None, *,
                          alphabet=None, reg=None, pool: Pool | None = None,
                          with_rank_select: bool = True) -> WaveletTree:
    """Anchor levels by stable per-node counting sorts; chunk work forked."""
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    cl = _as_code_list(codes, sigma)
    depth = tree_depth(sigma)
    tau = slice_bits if slice_bits is not None else default_slice_bits(cl.count, depth)
    if not 1 <= tau <= max(TABLE_KEY_BITS, 1):
        raise ContractViolation(f"slice width {tau} out of range")
    tau = min(tau, depth) if depth else 1
    meter = CostMeter()
    arr = cl.unpack()
    if cl.count:
        meter.charge_parallel(words_for_bits(cl.count * cl.width), 1)
    bitmaps = _build_bitmaps(arr, cl.count, sigma, cl.width, tau, reg, pool, meter,
                             parallel=True, scatter_fn=_scatter_sorted)
    return _finish(cl, sigma, alphabet, tau, bitmaps, reg, pool, meter, with_rank_select)


def build_domain_decomp(codes, sigma: int, parts: int, slice_bits: int | None = None, *,
                        alphabet=None, reg=None, pool: Pool | None = None,
                        with_rank_select: bool = True) -> WaveletTree:
    """Serial trees over equal parts, node bitmaps merged word-parallel."""
    if parts < 1:
        raise ContractViolation(f"parts must be >= 1, got {parts}")
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    cl = _as_code_list(codes, sigma)
    n = cl.count
    depth = tree_depth(sigma)
    tau = slice_bits if slice_bits is not None else default_slice_bits(n, depth)
    tau = min(max(1, tau), depth) if depth else 1
    parts = min(parts, n) if n else 1
    meter = CostMeter()
    arr = cl.unpack()
    if n:
        meter.charge_parallel(words_for_bits(n * cl.width), 1)
    base = n // parts
    extra = n % parts
    bounds = []
    lo = 0
    for p in range(parts):
        sz = base + (1 if p < extra else 0)
        bounds.append((lo, lo + sz))
        lo += sz

    def part_task(lo_hi):
        def run(m):
            plo, phi = lo_hi
            part = np.ascontiguousarray(arr[plo:phi])
            return _build_bitmaps(part, phi - plo, sigma, cl.width, tau, reg, pool, m,
                                  parallel=False, scatter_fn=_scatter_serial)
        return run

    part_maps = pool.run_tasks([part_task(b) for b in bounds], meter)
    all_ids = sorted(set().union(*[set(pm) for pm in part_maps])) if part_maps else []
    bitmaps: dict[int, BitVector] = {}

    def merge_node(idx, m):
        streams = []
        for pm in part_maps:
            bv = pm.get(idx)
            if bv is not None:
                streams.append((bv.words, bv.nbits))
        words, total = concat_streams(streams, m)
        bitmaps[idx] = BitVector(words, total)

    if parts > 1:
        pool.run_tasks([(lambda i: (lambda m: merge_node(i, m)))(i) for i in all_ids],
                       meter)
    else:
        for i in all_ids:
            merge_node(i, meter)
    return _finish(cl, sigma, alphabet, tau, bitmaps, reg, pool, meter, with_rank_select)


def build_naive(codes, sigma: int, slice_bits: int | None = None, *, alphabet=None,
                reg=None, pool: Pool | None = None,
                with_rank_select: bool = True) -> WaveletTree:
    """Reference recursion with the per-element charge model.

    slice_bits is recorded for archive parity with the fast builders; the
    recursion itself never chunks.
    """
    reg = reg if reg is not None else registry()
    pool = pool or default_pool()
    cl = _as_code_list(codes, sigma)
    depth = tree_depth(sigma)
    tau = slice_bits if slice_bits is not None else default_slice_bits(cl.count, depth)
    tau = min(max(1, tau), depth) if depth else 1
    meter = CostMeter()
    bitmaps: dict[int, BitVector] = {}
    oracle.naive_tree_bitmaps([int(x) for x in cl.unpack()], sigma, meter,
                              sink=lambda idx, bits: bitmaps.__setitem__(
                                  idx, BitVector.from_bits(bits)))
    return _finish(cl, sigma, alphabet, tau, bitmaps, reg, pool, meter, with_rank_select)


_BUILDERS = {
    "naive": build_naive,
    "packed": build_packed_serial,
    "sorted": build_parallel_sorted,
}


def build_tree(raw, algo: str = "packed", slice_bits: int | None = None,
               parts: int = 1, *, reg=None, pool: Pool | None = None,
               with_rank_select: bool = True) -> WaveletTree:
    """Map the raw sequence and build with the chosen algorithm."""
    codes, alphabet = map_alphabet(raw)
    sigma = len(alphabet)
    if algo == "domain":
        return build_domain_decomp(codes, sigma, parts, slice_bits, alphabet=alphabet,
                                   reg=reg, pool=pool, with_rank_select=with_rank_select)
    if algo not in _BUILDERS:
        raise ContractViolation(f"unknown algorithm {algo!r}")
    return _BUILDERS[algo](codes, sigma, slice_bits, alphabet=alphabet, reg=reg,
                           pool=pool, with_rank_select=with_rank_select)
