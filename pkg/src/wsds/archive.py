"""Binary archive format for built structures.

Layout (all integers little-endian):
  magic "WSDS1" | u32 version=1 | u8 word_bits=64 | u8 variant
  | u64 n | u32 sigma | u8 degree | u8 slice_bits
then three length-prefixed sections (u64 byte length each):
  alphabet, shape directory (variant-specific), node payloads.
Packed lists serialize as (u8 width, u64 count, words); bit vectors as
(u64 nbits, words). Serialization is canonical: re-serializing a loaded
archive reproduces it byte for byte.
"""
from __future__ import annotations

import struct

import numpy as np

from .bits import BitVector, PackedList, registry, words_for_bits
from .errors import ArchiveFormatError
from .rsb import BinaryRankSelect, SelectSide, SparseRange
from .rsg import GeneralRankSelect
from .var import (Codebook, MultiaryNode, MultiaryWaveletTree, ShapedWaveletTree,
                  WaveletMatrix)
from .wt import WaveletNode, WaveletTree

MAGIC = b"WSDS1"
VERSION = 1

VARIANT_CODES = {"tree": 0, "shaped": 1, "multiary": 2, "matrix": 3}
VARIANT_NAMES = {v: k for k, v in VARIANT_CODES.items()}


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, v): self.buf += struct.pack("<B", v)
    def u32(self, v): self.buf += struct.pack("<I", v)
    def u64(self, v): self.buf += struct.pack("<Q", v)

    def words(self, arr: np.ndarray):
        self.u64(len(arr))
        self.buf += arr.astype("<u8").tobytes()

    def i64_array(self, arr: np.ndarray):
        self.u64(len(arr))
        self.buf += np.asarray(arr, dtype="<i8").tobytes()

    def u8_array(self, arr: np.ndarray):
        self.u64(len(arr))
        self.buf += np.asarray(arr, dtype=np.uint8).tobytes()

    def bitvector(self, bv: BitVector):
        self.u64(bv.nbits)
        self.buf += bv.words.astype("<u8").tobytes()

    def packed_list(self, pl: PackedList):
        self.u8(pl.width)
        self.u64(pl.count)
        self.buf += pl.words.astype("<u8").tobytes()

    def section(self, payload: bytes):
        self.u64(len(payload))
        self.buf += payload


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise ArchiveFormatError("truncated archive")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def u8(self): return struct.unpack("<B", self._take(1))[0]
    def u32(self): return struct.unpack("<I", self._take(4))[0]
    def u64(self): return struct.unpack("<Q", self._take(8))[0]

    def words(self) -> np.ndarray:
        k = self.u64()
        return np.frombuffer(self._take(8 * k), dtype="<u8").astype(np.uint64)

    def i64_array(self) -> np.ndarray:
        k = self.u64()
        return np.frombuffer(self._take(8 * k), dtype="<i8").astype(np.int64)

    def u8_array(self) -> np.ndarray:
        k = self.u64()
        return np.frombuffer(self._take(k), dtype=np.uint8).copy()

    def bitvector(self) -> BitVector:
        nbits = self.u64()
        w = np.frombuffer(self._take(8 * words_for_bits(nbits)), dtype="<u8").astype(np.uint64)
        return BitVector(w, nbits)

    def packed_list(self) -> PackedList:
        width = self.u8()
        count = self.u64()
        w = np.frombuffer(self._take(8 * words_for_bits(count * width)),
                          dtype="<u8").astype(np.uint64)
        return PackedList(w, count, width)

    def section(self) -> "_Reader":
        k = self.u64()
        return _Reader(self._take(k))


# -- rank/select payloads -----------------------------------------------------


def _write_side(w: _Writer, side: SelectSide):
    w.u64(side.total)
    w.u64(side.g1)
    w.i64_array(side.anchors)
    w.u8_array(side.kind)
    for k in range(len(side.anchors)):
        if side.kind[k]:
            w.packed_list(side.direct[k])
        else:
            sp = side.sparse[k]
            w.u64(sp.g2)
            w.packed_list(sp.sub_offsets)
            w.u8_array(sp.sub_flags)
            w.i64_array(sp.dir_starts)
            w.u8(1 if sp.dir_pool is not None else 0)
            if sp.dir_pool is not None:
                w.packed_list(sp.dir_pool)


def _read_side(r: _Reader) -> SelectSide:
    total = r.u64()
    g1 = r.u64()
    anchors = r.i64_array()
    kind = r.u8_array()
    direct: list = [None] * len(anchors)
    sparse: list = [None] * len(anchors)
    for k in range(len(anchors)):
        if kind[k]:
            direct[k] = r.packed_list()
        else:
            g2 = r.u64()
            sub_offsets = r.packed_list()
            sub_flags = r.u8_array()
            dir_starts = r.i64_array()
            dir_pool = r.packed_list() if r.u8() else None
            sparse[k] = SparseRange(g2, sub_offsets, sub_flags,
                                    np.cumsum(sub_flags, dtype=np.int32),
                                    dir_starts, dir_pool)
    return SelectSide(total, g1, anchors, kind, direct, sparse)


def _write_binary_rs(w: _Writer, rs: BinaryRankSelect):
    w.i64_array(rs.range_abs)
    w.packed_list(rs.sub_rel)
    _write_side(w, rs.sides[0])
    _write_side(w, rs.sides[1])


def _read_binary_rs(r: _Reader, bv: BitVector, reg) -> BinaryRankSelect:
    rs = BinaryRankSelect(bv, reg)
    rs.range_abs = r.i64_array()
    rs.sub_rel = r.packed_list()
    rs.sides = [_read_side(r), _read_side(r)]
    return rs


def _write_general_rs(w: _Writer, rs: GeneralRankSelect):
    w.u32(rs.sigma)
    w.packed_list(rs.seq)
    w.u64(rs.range_abs.shape[0])
    w.buf += np.asarray(rs.range_abs, dtype="<i8").tobytes()
    w.packed_list(rs.sub_rel)
    for side in rs.sides:
        _write_side(w, side)


def _read_general_rs(r: _Reader, reg) -> GeneralRankSelect:
    sigma = r.u32()
    seq = r.packed_list()
    rs = GeneralRankSelect(seq, sigma, reg)
    rows = r.u64()
    rs.range_abs = np.frombuffer(r._take(8 * rows * sigma), dtype="<i8").astype(
        np.int64).reshape(rows, sigma)
    rs.sub_rel = r.packed_list()
    rs.sides = [_read_side(r) for _ in range(sigma)]
    return rs


# -- whole structures ----------------------------------------------------------


def _header(structure) -> tuple[int, int, int]:
    if isinstance(structure, WaveletTree):
        return VARIANT_CODES["tree"], 0, structure.slice_bits
    if isinstance(structure, ShapedWaveletTree):
        return VARIANT_CODES["shaped"], 0, structure.slice_bits
    if isinstance(structure, MultiaryWaveletTree):
        return VARIANT_CODES["multiary"], structure.degree, 1
    if isinstance(structure, WaveletMatrix):
        return VARIANT_CODES["matrix"], 0, structure.slice_bits
    raise ArchiveFormatError(f"cannot serialize {type(structure).__name__}")


def serialize(structure) -> bytes:
    variant, degree, tau = _header(structure)
    w = _Writer()
    w.buf += MAGIC
    w.u32(VERSION)
    w.u8(64)
    w.u8(variant)
    w.u64(structure.n)
    w.u32(structure.sigma)
    w.u8(degree)
    w.u8(tau)

    alpha = _Writer()
    alpha.u32(len(structure.alphabet))
    alpha.buf += np.asarray(structure.alphabet, dtype="<i8").tobytes()
    w.section(bytes(alpha.buf))

    shape = _Writer()
    nodes_w = _Writer()
    if variant == VARIANT_CODES["tree"]:
        items = sorted(structure.nodes.items())
        shape.u64(len(items))
        for idx, _ in items:
            shape.u64(idx)
        for _, node in items:
            nodes_w.bitvector(node.bitmap)
            _write_binary_rs(nodes_w, node.rs)
    elif variant == VARIANT_CODES["shaped"]:
        book = structure.book
        shape.u32(len(book.codes))
        for sym in sorted(book.codes):
            v, ln = book.codes[sym]
            shape.u32(sym)
            shape.u8(ln)
            shape.u64(v)
        items = sorted(structure.nodes.items())
        shape.u64(len(items))
        for (depth, prefix), _ in items:
            shape.u8(depth)
            shape.u64(prefix)
        for _, node in items:
            nodes_w.bitvector(node.bitmap)
            _write_binary_rs(nodes_w, node.rs)
    elif variant == VARIANT_CODES["multiary"]:
        items = sorted(structure.nodes.items())
        shape.u64(len(items))
        for (level, path), _ in items:
            shape.u8(level)
            shape.u64(path)
        for _, node in items:
            _write_general_rs(nodes_w, node.rs)
    else:
        shape.u8(len(structure.levels))
        for z in structure.zeros:
            shape.u64(z)
        for node in structure.levels:
            nodes_w.bitvector(node.bitmap)
            _write_binary_rs(nodes_w, node.rs)
    w.section(bytes(shape.buf))
    w.section(bytes(nodes_w.buf))
    return bytes(w.buf)


def deserialize(data: bytes, reg=None):
    reg = reg if reg is not None else registry()
    r = _Reader(data)
    if r._take(5) != MAGIC:
        raise ArchiveFormatError("bad magic")
    version = r.u32()
    if version != VERSION:
        raise ArchiveFormatError(f"unknown version {version}")
    if r.u8() != 64:
        raise ArchiveFormatError("unsupported word size")
    variant = r.u8()
    if variant not in VARIANT_NAMES:
        raise ArchiveFormatError(f"unknown variant {variant}")
    n = r.u64()
    sigma = r.u32()
    degree = r.u8()
    tau = r.u8()

    alpha_r = r.section()
    count = alpha_r.u32()
    alphabet = np.frombuffer(alpha_r._take(8 * count), dtype="<i8").astype(np.int64)
    shape_r = r.section()
    nodes_r = r.section()

    try:
        if variant == VARIANT_CODES["tree"]:
            nnodes = shape_r.u64()
            ids = [shape_r.u64() for _ in range(nnodes)]
            nodes = {}
            for idx in ids:
                bv = nodes_r.bitvector()
                node = WaveletNode(bv)
                node.rs = _read_binary_rs(nodes_r, bv, reg)
                nodes[idx] = node
            return WaveletTree(sigma, n, alphabet, nodes, tau, reg)
        if variant == VARIANT_CODES["shaped"]:
            ncodes = shape_r.u32()
            codes = {}
            for _ in range(ncodes):
                sym = shape_r.u32()
                ln = shape_r.u8()
                v = shape_r.u64()
                codes[sym] = (v, ln)
            book = Codebook(codes)
            nnodes = shape_r.u64()
            keys = [(shape_r.u8(), shape_r.u64()) for _ in range(nnodes)]
            nodes = {}
            for key in keys:
                bv = nodes_r.bitvector()
                node = WaveletNode(bv)
                node.rs = _read_binary_rs(nodes_r, bv, reg)
                nodes[key] = node
            return ShapedWaveletTree(sigma, n, alphabet, book, nodes, tau, reg)
        if variant == VARIANT_CODES["multiary"]:
            nnodes = shape_r.u64()
            keys = [(shape_r.u8(), shape_r.u64()) for _ in range(nnodes)]
            nodes = {}
            for key in keys:
                rs = _read_general_rs(nodes_r, reg)
                node = MultiaryNode(rs.seq)
                node.rs = rs
                nodes[key] = node
            return MultiaryWaveletTree(sigma, n, degree, alphabet, nodes, reg)
        depth = shape_r.u8()
        zeros = [shape_r.u64() for _ in range(depth)]
        levels = []
        for _ in range(depth):
            bv = nodes_r.bitvector()
            node = WaveletNode(bv)
            node.rs = _read_binary_rs(nodes_r, bv, reg)
            levels.append(node)
        return WaveletMatrix(sigma, n, alphabet, levels, zeros, tau, reg)
    except ArchiveFormatError:
        raise
    except (ValueError, IndexError, struct.error) as exc:
        raise ArchiveFormatError(f"corrupt archive: {exc}") from exc


def save(structure, path: str) -> int:
    data = serialize(structure)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load(path: str, reg=None):
    with open(path, "rb") as fh:
        return deserialize(fh.read(), reg)
