"""The six join algorithms behind one streaming cursor contract.

Every algorithm yields the same set of (xid1, xid2) pairs, each exactly
once; they differ in comparison order, page traffic, and how early
results start flowing.  A comparison is one examination of an
(outer, inner) pair, whether it ends at the bounds check or goes through
the full set intersection.

The bounds index doubles as the sorted access path: its entries
(lb, ub, xid, heap position) ordered by (lb, ub, xid) serve the
merge-style join in order and answer overlap probes for the index join.
It is built once per relation, and its build traffic is reported
separately from any join run (see ``IntervalIndex.build_page_reads``).
"""

from __future__ import annotations

import time
from array import array
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from .model import ResultPair, UTuple, intersects
from .storage import (
    BufferPool,
    Cursor,
    Relation,
    decode_utuple,
    drop_relation,
    dedup_pairs,
    encode_pair,
    fetch_record,
    flatten,
    hash_join_flat,
    xid_lookup_join,
)

TRACE_EVERY = 1024


class JoinAlgorithm(str, Enum):
    NESTED_LOOP = "nl"
    BASE = "base"
    SORT = "sort"
    TUPLE1 = "tuple1"
    TUPLE2 = "tuple2"
    INDEX = "index"


class RunCounters:
    __slots__ = ("comparisons", "candidates")

    def __init__(self):
        self.comparisons = 0
        self.candidates = 0


# ---------------------------------------------------------------------------
# bounds index
# ---------------------------------------------------------------------------

class IntervalIndex:
    """Static overlap index over one relation's value ranges.

    Entries are sorted by (lb, ub, xid); a running maximum of ub allows a
    binary search plus bounded backward sweep to return exactly the
    entries whose [lb, ub] overlaps a query range.
    """

    def __init__(self, lbs, ubs, xids, pages, slots, build_page_reads: int):
        self._lbs_np = lbs
        self._ubs_np = ubs
        self._maxub_np = np.maximum.accumulate(ubs) if len(ubs) else ubs
        self.lbs = _as_q(lbs)
        self.ubs = _as_q(ubs)
        self.xids = _as_q(xids)
        self.pages = _as_q(pages)
        self.slots = _as_q(slots)
        self._maxub = _as_q(self._maxub_np)
        self.build_page_reads = build_page_reads

    def __len__(self) -> int:
        return len(self.lbs)

    @property
    def lbs_np(self):
        return self._lbs_np

    @property
    def ubs_np(self):
        return self._ubs_np

    @classmethod
    def build(cls, rel: Relation, pool: BufferPool) -> "IntervalIndex":
        reads_before = pool.page_reads
        lbs, ubs, xids, pages, slots = [], [], [], [], []
        cur = Cursor(rel, pool)
        while True:
            item = cur.next_with_pos()
            if item is None:
                break
            t, pos_page, pos_slot = item
            lbs.append(t.alts[0])
            ubs.append(t.alts[-1])
            xids.append(t.xid)
            pages.append(pos_page)
            slots.append(pos_slot)
        lbs = np.asarray(lbs, dtype=np.int64)
        ubs = np.asarray(ubs, dtype=np.int64)
        xids = np.asarray(xids, dtype=np.int64)
        pages = np.asarray(pages, dtype=np.int64)
        slots = np.asarray(slots, dtype=np.int64)
        if len(lbs):
            order = np.lexsort((xids, ubs, lbs))
            lbs, ubs, xids = lbs[order], ubs[order], xids[order]
            pages, slots = pages[order], slots[order]
        return cls(lbs, ubs, xids, pages, slots, pool.page_reads - reads_before)

    def query(self, qlb: int, qub: int) -> Iterator[int]:
        """Positions of all entries overlapping [qlb, qub], descending lb."""
        hi = int(np.searchsorted(self._lbs_np, qub, side="right"))
        ubs = self.ubs
        maxub = self._maxub
        i = hi - 1
        while i >= 0 and maxub[i] >= qlb:
            if ubs[i] >= qlb:
                yield i
            i -= 1

    def fetch(self, rel: Relation, pool: BufferPool, i: int) -> UTuple:
        return fetch_record(rel, pool, self.pages[i], self.slots[i])


def _as_q(np_arr) -> array:
    a = array("q")
    if len(np_arr):
        a.frombytes(np.ascontiguousarray(np_arr, dtype="<i8").tobytes())
    return a


def ensure_index(rel: Relation, pool: BufferPool) -> IntervalIndex:
    """Build (once) and return the relation's bounds index."""
    if rel.bounds_index is None:
        rel.bounds_index = IntervalIndex.build(rel, pool)
    return rel.bounds_index


# ---------------------------------------------------------------------------
# cursor wrapper
# ---------------------------------------------------------------------------

@dataclass
class RunMetrics:
    algorithm: JoinAlgorithm
    elapsed_ms: float
    comparisons: int
    page_reads: int
    page_writes: int
    result_count: int
    trace: list = field(default_factory=list)


class JoinCursor:
    """Single-consumer streaming cursor over one join execution.

    Page counters are deltas against the pool snapshot taken at
    construction (after any index build), so a run's metrics reflect only
    its own work.  The emission trace samples every ``TRACE_EVERY``-th
    result plus the first and last.
    """

    def __init__(self, algorithm: JoinAlgorithm, gen, pool: BufferPool,
                 counters: RunCounters):
        self.algorithm = algorithm
        self.pool = pool
        self.counters = counters
        self._gen = gen
        self._reads0 = pool.page_reads
        self._writes0 = pool.page_writes
        self._start = time.perf_counter()
        self.result_count = 0
        self.trace: list[tuple[float, int]] = []
        self._exhausted = False

    def next(self) -> Optional[ResultPair]:
        if self._exhausted:
            return None
        try:
            pair = next(self._gen)
        except StopIteration:
            self._exhausted = True
            self._trace_point()
            return None
        self.result_count += 1
        if self.result_count == 1 or self.result_count % TRACE_EVERY == 0:
            self._trace_point()
        return pair

    def __iter__(self):
        while (p := self.next()) is not None:
            yield p

    def close(self) -> None:
        if not self._exhausted:
            self._gen.close()
            self._exhausted = True
            self._trace_point()

    def _trace_point(self) -> None:
        self.trace.append((self.elapsed_ms, self.result_count))

    @property
    def elapsed_ms(self) -> float:
        return (time.perf_counter() - self._start) * 1000.0

    @property
    def page_reads(self) -> int:
        return self.pool.page_reads - self._reads0

    @property
    def page_writes(self) -> int:
        return self.pool.page_writes - self._writes0

    def metrics(self) -> RunMetrics:
        return RunMetrics(self.algorithm, self.elapsed_ms, self.counters.comparisons,
                          self.page_reads, self.page_writes, self.result_count,
                          list(self.trace))


# ---------------------------------------------------------------------------
# algorithms
# ---------------------------------------------------------------------------

def nested_loop_join(r1: Relation, r2: Relation, pool: BufferPool) -> JoinCursor:
    """Compare every outer tuple with every inner tuple in scan order."""
    c = RunCounters()

    def gen():
        outer = Cursor(r1, pool)
        inner = Cursor(r2, pool)
        while (t1 := outer.next()) is not None:
            inner.seek(0)
            a1 = t1.alts
            lb1, ub1 = a1[0], a1[-1]
            while (t2 := inner.next()) is not None:
                c.comparisons += 1
                a2 = t2.alts
                if a2[0] <= ub1 and lb1 <= a2[-1] and intersects(a1, a2):
                    yield ResultPair(t1.xid, t2.xid, t1, t2)

    return JoinCursor(JoinAlgorithm.NESTED_LOOP, gen(), pool, c)


def base_join(r1: Relation, r2: Relation, pool: BufferPool,
              mem_pages: int = 128) -> JoinCursor:
    """Uncertainty-unaware baseline: generic block-nested loop.

    The intersection test is an opaque predicate to this path; blocking
    just amortizes inner passes over ``mem_pages`` worth of outer tuples.
    """
    c = RunCounters()

    def gen():
        rpp = max(1, r1.tuple_count // max(1, r1.page_count))
        block_rows = max(1, mem_pages * rpp)
        outer = Cursor(r1, pool)
        while True:
            block = []
            while len(block) < block_rows and (t := outer.next()) is not None:
                block.append(t)
            if not block:
                return
            for t2 in Cursor(r2, pool):
                a2 = t2.alts
                lb2, ub2 = a2[0], a2[-1]
                for t1 in block:
                    c.comparisons += 1
                    a1 = t1.alts
                    if a1[0] <= ub2 and lb2 <= a1[-1] and intersects(a1, a2):
                        yield ResultPair(t1.xid, t2.xid, t1, t2)

    return JoinCursor(JoinAlgorithm.BASE, gen(), pool, c)


def sort_join(r1: Relation, r2: Relation, pool: BufferPool) -> JoinCursor:
    """Merge-style join over both relations in (lb, ub) order.

    The inner stream is rewound by the number of tuples examined for the
    previous outer tuple; the rewind point only advances past a leading
    inner tuple whose whole range lies below the current outer range.
    The inner scan stops as soon as an inner lower bound exceeds the
    outer upper bound.
    """
    e1 = ensure_index(r1, pool)
    e2 = ensure_index(r2, pool)
    c = RunCounters()

    def gen():
        lb1s, ub1s = e1.lbs, e1.ubs
        lb2s, ub2s = e2.lbs, e2.ubs
        n1, n2 = len(e1), len(e2)
        r = -1  # index of the current inner row; -1 = before first, n2 = after last
        offset = 0
        for i1 in range(n1):
            l1 = lb1s[i1]
            u1 = ub1s[i1]
            r -= offset
            if r < -1:
                r = -1
            offset = 0
            t1 = None
            while True:
                nxt = r + 1
                if nxt >= n2:
                    offset += 1  # the empty fetch still widens the rewind
                    r = n2
                    break
                r = nxt
                offset += 1
                c.comparisons += 1
                if u1 < lb2s[nxt]:
                    break
                if ub2s[nxt] < l1:
                    if offset == 1:
                        offset = 0
                    continue
                if t1 is None:
                    t1 = e1.fetch(r1, pool, i1)
                    a1 = set(t1.alts)
                t2 = e2.fetch(r2, pool, nxt)
                if not a1.isdisjoint(t2.alts):
                    yield ResultPair(t1.xid, t2.xid, t1, t2)

    return JoinCursor(JoinAlgorithm.SORT, gen(), pool, c)


def _emit_buffered(buffer: list) -> Iterator[ResultPair]:
    for blob in buffer:
        t1, i = decode_utuple(blob, 0)
        t2, _ = decode_utuple(blob, i)
        yield ResultPair(t1.xid, t2.xid, t1, t2)


def tuple_join_1(r1: Relation, r2: Relation, pool: BufferPool,
                 mem_pages: int = 128, directory: Optional[str] = None) -> JoinCursor:
    """Flatten to key rows, equi-join values, dedup id pairs, recover tuples.

    Fully blocking: nothing is emitted until the value-level join, the
    distinct step, and both recovery scans have finished, so the page
    traffic of a truncated run equals a full run's.
    """
    c = RunCounters()

    def gen():
        f1 = flatten(r1, False, pool, directory)
        f2 = flatten(r2, False, pool, directory)
        try:
            def id_pairs():
                for row1, row2 in hash_join_flat(f1, f2, pool, mem_pages, directory):
                    c.comparisons += 1
                    yield (row1[0], row2[0])

            distinct = list(dedup_pairs(id_pairs()))
            buffer = [encode_pair(p.left, p.right)
                      for p in xid_lookup_join(distinct, r1, r2, pool)]
        finally:
            drop_relation(f1, pool)
            drop_relation(f2, pool)
        yield from _emit_buffered(buffer)

    return JoinCursor(JoinAlgorithm.TUPLE1, gen(), pool, c)


def tuple_join_2(r1: Relation, r2: Relation, pool: BufferPool,
                 mem_pages: int = 128, directory: Optional[str] = None) -> JoinCursor:
    """Single value-level join over full flat rows, then a distinct step.

    One join instead of three, paid for with wider intermediate rows;
    blocking for the same reason as the first variant.
    """
    c = RunCounters()

    def gen():
        f1 = flatten(r1, True, pool, directory)
        f2 = flatten(r2, True, pool, directory)
        try:
            seen = set()
            add = seen.add
            buffer = []
            for row1, row2 in hash_join_flat(f1, f2, pool, mem_pages, directory):
                c.comparisons += 1
                key = (row1[0] << 64) | row2[0]
                if key not in seen:
                    add(key)
                    buffer.append(
                        encode_pair(UTuple(row1[0], row1[2], row1[3]),
                                    UTuple(row2[0], row2[2], row2[3])))
        finally:
            drop_relation(f1, pool)
            drop_relation(f2, pool)
        yield from _emit_buffered(buffer)

    return JoinCursor(JoinAlgorithm.TUPLE2, gen(), pool, c)


def index_join(r1: Relation, r2: Relation, pool: BufferPool) -> JoinCursor:
    """Probe the inner relation's bounds index with each outer range."""
    idx = ensure_index(r2, pool)
    c = RunCounters()

    def gen():
        for t1 in Cursor(r1, pool):
            a1 = t1.alts
            for i in idx.query(a1[0], a1[-1]):
                c.comparisons += 1
                c.candidates += 1
                t2 = idx.fetch(r2, pool, i)
                if intersects(a1, t2.alts):
                    yield ResultPair(t1.xid, t2.xid, t1, t2)

    return JoinCursor(JoinAlgorithm.INDEX, gen(), pool, c)


# ---------------------------------------------------------------------------
# dispatch and truncation
# ---------------------------------------------------------------------------

def open_join(algo: JoinAlgorithm, r1: Relation, r2: Relation, pool: BufferPool,
              mem_pages: int = 128, directory: Optional[str] = None) -> JoinCursor:
    if algo is JoinAlgorithm.NESTED_LOOP:
        return nested_loop_join(r1, r2, pool)
    if algo is JoinAlgorithm.BASE:
        return base_join(r1, r2, pool, mem_pages)
    if algo is JoinAlgorithm.SORT:
        return sort_join(r1, r2, pool)
    if algo is JoinAlgorithm.TUPLE1:
        return tuple_join_1(r1, r2, pool, mem_pages, directory)
    if algo is JoinAlgorithm.TUPLE2:
        return tuple_join_2(r1, r2, pool, mem_pages, directory)
    if algo is JoinAlgorithm.INDEX:
        return index_join(r1, r2, pool)
    raise ValueError(f"unknown algorithm {algo}")


def first_k(cursor: JoinCursor, k: int) -> tuple[list[ResultPair], RunMetrics]:
    """Pull at most k results, abandon the cursor, report work done so far."""
    if k < 0:
        raise ValueError("k must be non-negative")
    results = []
    for _ in range(k):
        pair = cursor.next()
        if pair is None:
            break
        results.append(pair)
    cursor.close()
    return results, cursor.metrics()
