"""Word-packed succinct sequence structures.

Wavelet trees, wavelet matrices, and their variants with interchangeable
construction algorithms, constant-probe rank/select substructures, and
deterministic work/span cost accounting for every builder.
"""

from .par import CostMeter, Pool, SortItem, prefix_sum, stable_sort_by_key
from .bits import BitVector, PackedList, TableRegistry, build_slice_table, pack, registry
from .errors import ArchiveFormatError, ContractViolation, OccurrenceRangeError

__all__ = [
    "ArchiveFormatError",
    "BitVector",
    "ContractViolation",
    "CostMeter",
    "OccurrenceRangeError",
    "PackedList",
    "Pool",
    "SortItem",
    "TableRegistry",
    "build_slice_table",
    "pack",
    "prefix_sum",
    "registry",
    "stable_sort_by_key",
]
