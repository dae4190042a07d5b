"""Reference implementations used as ground truth by the test suite.

Everything here is deliberately simple: plain Python lists, linear scans,
and direct recursive definitions. No kernels are shared with the fast
paths except packing the finished bit lists. The naive tree builder also
carries the word-machine charge model the fast builders are measured
against: per element and level it loads the symbol, extracts one bit,
stores the bit and the symbol, bumps a counter, and finally packs the
accumulated bits one by one.
"""
from __future__ import annotations

from .errors import ContractViolation, OccurrenceRangeError
from .par import CostMeter, ceil_div, ceil_log2


# ---------------------------------------------------------------------------
# query oracles


def ref_access(seq, i: int):
    if not 0 <= i < len(seq):
        raise IndexError(f"position {i} out of range [0, {len(seq)})")
    return seq[i]


def ref_rank(seq, c, i: int) -> int:
    if not 0 <= i < len(seq):
        raise IndexError(f"position {i} out of range [0, {len(seq)})")
    count = 0
    for p in range(i + 1):
        if seq[p] == c:
            count += 1
    return count


def ref_rank_le(seq, c, i: int) -> int:
    if not 0 <= i < len(seq):
        raise IndexError(f"position {i} out of range [0, {len(seq)})")
    count = 0
    for p in range(i + 1):
        if seq[p] <= c:
            count += 1
    return count


def ref_select(seq, c, j: int) -> int:
    if j < 1:
        raise OccurrenceRangeError(f"occurrence index must be >= 1, got {j}")
    seen = 0
    for p, x in enumerate(seq):
        if x == c:
            seen += 1
            if seen == j:
                return p
    raise OccurrenceRangeError(f"occurrence {j} of {c!r} out of range (only {seen})")


# ---------------------------------------------------------------------------
# structure oracles


def tree_depth(sigma: int) -> int:
    """Bitmap levels of the balanced tree: 0 for trivial alphabets."""
    return ceil_log2(sigma) if sigma >= 2 else 0


def walk_tree_nodes(codes, sigma: int, sink) -> None:
    """Recursive partition definition; sink(heap_index, bits_list) per node.

    The bit list is not retained here, so a sink that packs immediately
    keeps memory proportional to one root-to-leaf path.
    """
    depth = tree_depth(sigma)
    if depth == 0:
        return

    def rec(idx, lo, hi, seq):
        mid = (lo + hi + 1) // 2
        bits = []
        left = []
        right = []
        for x in seq:
            if x >= mid:
                bits.append(1)
                right.append(x)
            else:
                bits.append(0)
                left.append(x)
        sink(idx, bits)
        del bits
        if hi - lo + 1 > 2:
            if left:
                rec(2 * idx + 1, lo, mid - 1, left)
            right_seq = right
            left = None
            if right_seq:
                rec(2 * idx + 2, mid, hi, right_seq)

    rec(0, 0, (1 << depth) - 1, list(codes))


def ref_tree_bitmaps(codes, sigma: int) -> dict[int, list[int]]:
    """Heap-indexed node bitmaps by the recursive partition definition."""
    out: dict[int, list[int]] = {}
    walk_tree_nodes(codes, sigma, lambda idx, bits: out.__setitem__(idx, list(bits)))
    return out


def naive_tree_bitmaps(codes, sigma: int, meter: CostMeter | None = None,
                       sink=None) -> dict[int, list[int]] | None:
    """Same recursion, charging the standard per-element construction cost."""
    out: dict[int, list[int]] | None = None
    if sink is None:
        out = {}
        sink = lambda idx, bits: out.__setitem__(idx, list(bits))

    def charge_and_emit(idx, bits):
        if meter is not None:
            m = len(bits)
            # 5 ops per element (load, extract, two stores, counter), then
            # packing the bit list: load + insert per bit plus word writes.
            meter.charge(5 * m + 2 * m + ceil_div(m, 64) + 4)
        sink(idx, bits)

    walk_tree_nodes(codes, sigma, charge_and_emit)
    return out


def ref_matrix_levels(codes, sigma: int) -> tuple[list[list[int]], list[int]]:
    """Levelwise bitmaps and zero counts by repeated stable partition."""
    depth = tree_depth(sigma)
    cur = list(codes)
    levels = []
    zeros = []
    for lvl in range(depth):
        sh = depth - 1 - lvl
        bits = [(x >> sh) & 1 for x in cur]
        levels.append(bits)
        zeros.append(len(bits) - sum(bits))
        cur = [x for x in cur if not ((x >> sh) & 1)] + [x for x in cur if (x >> sh) & 1]
    return levels, zeros


def ref_shaped_bitmaps(codes, codewords: dict) -> dict[tuple[int, int], list[int]]:
    """Bitmaps of every traversed prefix for symbols routed by their codewords.

    codewords maps a symbol to (value, length) with the path read from the
    value's most significant bit. Symbols leave the structure at their
    codeword's end; a node exists only if some longer codeword routes
    through it.
    """
    for x in codes:
        if x not in codewords:
            raise ContractViolation(f"symbol {x!r} has no codeword")
    out: dict[tuple[int, int], list[int]] = {}

    def rec(depth, prefix, seq):
        bits = []
        left = []
        right = []
        for x in seq:
            v, ln = codewords[x]
            b = (v >> (ln - 1 - depth)) & 1
            bits.append(b)
            (right if b else left).append(x)
        out[(depth, prefix)] = bits
        for b, sub in ((0, left), (1, right)):
            nxt = [x for x in sub if codewords[x][1] > depth + 1]
            if nxt:
                rec(depth + 1, (prefix << 1) | b, nxt)

    start = [x for x in codes if codewords[x][1] > 0]
    if start:
        rec(0, 0, start)
    return out


def ref_multiary_digits(codes, sigma: int, degree: int) -> dict[tuple[int, int], list[int]]:
    """Digit sequences of every multiary node.

    Level beta consumes code bits [beta*log2(degree), ...) from the top;
    the last window may be narrower than log2(degree) when the code width
    is not a multiple of it.
    """
    dd = ceil_log2(degree)
    if degree < 2 or (1 << dd) != degree:
        raise ContractViolation(f"degree must be a power of two >= 2, got {degree}")
    depth = tree_depth(sigma)
    out: dict[tuple[int, int], list[int]] = {}

    def rec(beta, path, seq):
        consumed = beta * dd
        if consumed >= depth or not seq:
            return
        win = min(dd, depth - consumed)
        sh = depth - consumed - win
        digits = [(x >> sh) & ((1 << win) - 1) for x in seq]
        out[(beta, path)] = digits
        if consumed + win < depth:
            for dig in range(1 << win):
                sub = [x for x, dg in zip(seq, digits) if dg == dig]
                if sub:
                    rec(beta + 1, path * degree + dig, sub)

    rec(0, 0, list(codes))
    return out
