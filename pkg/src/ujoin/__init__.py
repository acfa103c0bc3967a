"""Join engine for relations under discrete uncertainty.

The join attribute of a tuple is a finite set of alternative integer
values; two tuples join when their sets intersect.  The package provides
six join algorithms over paged heap files with exact page-I/O
accounting, a seeded data generator, a cost-based algorithm selector,
and a benchmark harness.
"""

from .model import ResultPair, UTuple, bounds, intersects, normalize_alts, ranges_overlap
from .storage import (
    BufferPool,
    Cursor,
    HeapFileWriter,
    Relation,
    external_sort,
    flatten,
    hash_join_flat,
)
from .joins import (
    IntervalIndex,
    JoinAlgorithm,
    JoinCursor,
    base_join,
    ensure_index,
    first_k,
    index_join,
    nested_loop_join,
    open_join,
    sort_join,
    tuple_join_1,
    tuple_join_2,
)
from .generator import DatasetPair, GenSpec, generate, generate_lookup, load_csv, measure_spreading
from .planner import RelationStats, choose_algorithm, collect_stats, estimate

__all__ = [
    "ResultPair", "UTuple", "bounds", "intersects", "normalize_alts", "ranges_overlap",
    "BufferPool", "Cursor", "HeapFileWriter", "Relation",
    "external_sort", "flatten", "hash_join_flat",
    "IntervalIndex", "JoinAlgorithm", "JoinCursor",
    "base_join", "ensure_index", "first_k", "index_join", "nested_loop_join",
    "open_join", "sort_join", "tuple_join_1", "tuple_join_2",
    "DatasetPair", "GenSpec", "generate", "generate_lookup", "load_csv",
    "measure_spreading",
    "RelationStats", "choose_algorithm", "collect_stats", "estimate",
]

__version__ = "0.1.0"
