"""Paged heap files and the counting buffer pool.

Every byte an algorithm touches flows through here, so page reads and
writes are exact, reproducible numbers rather than wall-clock noise.
A heap file is a header block followed by fixed-size pages; each page
holds variable-length records behind a slot directory.  Records are
length-prefixed payload plus delta-encoded sorted alternatives, which
keeps rows-per-page arithmetic testable.

File kinds:

* ``KIND_UTUPLE``    -- full records (xid, alternatives, payload)
* ``KIND_FLAT_KEY``  -- flattened key-only rows (xid, v)
* ``KIND_FLAT_FULL`` -- flattened full rows (xid, v, alternatives, payload)
* ``KIND_PAIR``      -- spooled pairs of full records
"""

from __future__ import annotations

import heapq
import os
import struct
import tempfile
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate, count as _count
from typing import Iterable, Iterator, Optional

from .model import ResultPair, UTuple

MAGIC = b"UREL1"
DEFAULT_PAGE_SIZE = 8192
_HEADER_FMT = "<5sBIQI"
_HEADER_LEN = struct.calcsize(_HEADER_FMT)

KIND_UTUPLE = 0
KIND_FLAT_KEY = 1
KIND_FLAT_FULL = 2
KIND_PAIR = 3

_PAGE_HDR = 4  # u16 slot count, u16 free pointer

_XID_MASK = (1 << 64) - 1


class StorageError(Exception):
    """Base class for heap file and buffer pool failures."""


class PageCorruptError(StorageError):
    """A page failed to decode; carries the page id."""

    def __init__(self, page_id: int, reason: str):
        super().__init__(f"page {page_id}: {reason}")
        self.page_id = page_id


class IntegrityError(StorageError):
    """Cross-file invariant broken (e.g. an xid missing during recovery)."""


# ---------------------------------------------------------------------------
# varint / record codecs
# ---------------------------------------------------------------------------

def _put_uv(out: bytearray, v: int) -> None:
    while v >= 0x80:
        out.append((v & 0x7F) | 0x80)
        v >>= 7
    out.append(v)


def _put_zz(out: bytearray, v: int) -> None:
    _put_uv(out, (v << 1) ^ (v >> 63) if v < 0 else (v << 1))


def _get_uv(buf, i: int) -> tuple[int, int]:
    shift = 0
    result = 0
    while True:
        b = buf[i]
        i += 1
        result |= (b & 0x7F) << shift
        if b < 0x80:
            return result, i
        shift += 7


def _get_zz(buf, i: int) -> tuple[int, int]:
    u, i = _get_uv(buf, i)
    return (u >> 1) ^ -(u & 1), i


def encode_utuple(xid: int, alts: tuple[int, ...], payload: bytes) -> bytes:
    out = bytearray()
    _put_uv(out, xid)
    _put_uv(out, len(payload))
    out += payload
    _put_uv(out, len(alts))
    _put_zz(out, alts[0])
    prev = alts[0]
    for v in alts[1:]:
        _put_uv(out, v - prev)
        prev = v
    return bytes(out)


def decode_utuple(buf, i: int) -> tuple[UTuple, int]:
    # hot path: single-byte varints are decoded inline, the multi-byte
    # continuation case falls back to the generic reader
    b = buf[i]
    if b < 0x80:
        xid = b
        i += 1
    else:
        xid, i = _get_uv(buf, i)
    b = buf[i]
    if b < 0x80:
        plen = b
        i += 1
    else:
        plen, i = _get_uv(buf, i)
    payload = bytes(buf[i:i + plen])
    i += plen
    b = buf[i]
    if b < 0x80:
        n = b
        i += 1
    else:
        n, i = _get_uv(buf, i)
    u = buf[i]
    if u < 0x80:
        i += 1
    else:
        u, i = _get_uv(buf, i)
    v = (u >> 1) ^ -(u & 1)
    if n == 1:
        return UTuple(xid, (v,), payload), i
    # the common case is a run of single-byte deltas, which accumulate
    # turns into alternatives without a per-delta Python loop
    j = i + n - 1
    chunk = buf[i:j]
    if len(chunk) == n - 1 and max(chunk) < 0x80:
        return UTuple(xid, tuple(accumulate(chunk, initial=v)), payload), j
    alts = [v]
    append = alts.append
    for _ in range(n - 1):
        d = buf[i]
        if d < 0x80:
            i += 1
        else:
            d, i = _get_uv(buf, i)
        v += d
        append(v)
    return UTuple(xid, tuple(alts), payload), i


def encode_flat_key(xid: int, v: int) -> bytes:
    out = bytearray()
    _put_uv(out, xid)
    _put_zz(out, v)
    return bytes(out)


def encode_flat_full(xid: int, v: int, alts: tuple[int, ...], payload: bytes) -> bytes:
    out = bytearray()
    _put_uv(out, xid)
    _put_zz(out, v)
    out += encode_utuple(xid, alts, payload)
    return bytes(out)


def encode_pair(t1: UTuple, t2: UTuple) -> bytes:
    return encode_utuple(*t1) + encode_utuple(*t2)


def estimate_record_bytes(avg_card: float, payload_bytes: int, value_bytes: float = 4.0) -> float:
    """Codec-model row size, used by the planner's page arithmetic."""
    return 3 + 1 + payload_bytes + 1 + value_bytes + max(0.0, avg_card - 1) * 1.5


def rows_per_page(avg_card: float, payload_bytes: int,
                  page_size: int = DEFAULT_PAGE_SIZE) -> float:
    rec = estimate_record_bytes(avg_card, payload_bytes) + 2  # slot entry
    return max(1.0, (page_size - _PAGE_HDR) / rec)


# ---------------------------------------------------------------------------
# page decode
# ---------------------------------------------------------------------------

def _slot_offset(data, page_size: int, slot: int) -> int:
    base = page_size - 2 * (slot + 1)
    return data[base] | (data[base + 1] << 8)


def decode_page(data, page_size: int, kind: int, page_id: int) -> list:
    nslots = data[0] | (data[1] << 8)
    out = []
    try:
        for s in range(nslots):
            off = _slot_offset(data, page_size, s)
            out.append(_decode_at(data, off, kind)[0])
    except (IndexError, ValueError) as exc:
        raise PageCorruptError(page_id, str(exc)) from exc
    return out


def _decode_at(data, off: int, kind: int):
    if kind == KIND_UTUPLE:
        return decode_utuple(data, off)
    if kind == KIND_FLAT_KEY:
        xid, i = _get_uv(data, off)
        v, i = _get_zz(data, i)
        return (xid, v), i
    if kind == KIND_FLAT_FULL:
        xid, i = _get_uv(data, off)
        v, i = _get_zz(data, i)
        tup, i = decode_utuple(data, i)
        return (xid, v, tup.alts, tup.payload), i
    if kind == KIND_PAIR:
        t1, i = decode_utuple(data, off)
        t2, i = decode_utuple(data, i)
        return (t1, t2), i
    raise ValueError(f"unknown record kind {kind}")


def decode_slot(data, page_size: int, kind: int, slot: int, page_id: int):
    nslots = data[0] | (data[1] << 8)
    if slot >= nslots:
        raise PageCorruptError(page_id, f"slot {slot} out of range ({nslots})")
    off = _slot_offset(data, page_size, slot)
    return _decode_at(data, off, kind)[0]


# ---------------------------------------------------------------------------
# buffer pool
# ---------------------------------------------------------------------------

class _Frame:
    __slots__ = ("key", "data", "decoded", "slot_cache", "ref")

    def __init__(self, key, data):
        self.key = key
        self.data = data
        self.decoded = None      # full-page decode cache
        self.slot_cache = None   # sparse single-slot decode cache
        self.ref = True


class BufferPool:
    """Clock (second-chance) page cache with monotone read/write counters.

    ``page_reads`` counts logical fetches that miss the cache;
    ``page_writes`` counts page flushes to disk.  ``reset()`` drops all
    frames and zeroes both, which is the engine's cold-cache protocol.
    Frame-table mutation happens under single bytecode-level dict
    operations, so concurrent readers on CPython see a consistent table.
    """

    def __init__(self, capacity_pages: int = 256):
        if capacity_pages < 1:
            raise ValueError("capacity must be at least one page")
        self.capacity_pages = capacity_pages
        self.page_reads = 0
        self.page_writes = 0
        self._frames: dict = {}
        self._clock: list = []
        self._hand = 0

    def fetch(self, rel: "Relation", page_no: int) -> _Frame:
        key = (rel.file_id, page_no)
        frame = self._frames.get(key)
        if frame is not None:
            frame.ref = True
            return frame
        self.page_reads += 1
        data = rel.read_page(page_no)
        frame = _Frame(key, data)
        if len(self._clock) < self.capacity_pages:
            self._frames[key] = frame
            self._clock.append(frame)
            return frame
        # clock sweep for a victim
        clock = self._clock
        n = len(clock)
        hand = self._hand
        while clock[hand].ref:
            clock[hand].ref = False
            hand = (hand + 1) % n
        victim = clock[hand]
        del self._frames[victim.key]
        clock[hand] = frame
        self._frames[key] = frame
        self._hand = (hand + 1) % n
        return frame

    def count_write(self, pages: int = 1) -> None:
        self.page_writes += pages

    def invalidate(self, rel: "Relation") -> None:
        """Drop cached frames of one file (used when a temp file is deleted)."""
        stale = [k for k in self._frames if k[0] == rel.file_id]
        for k in stale:
            frame = self._frames.pop(k)
            self._clock.remove(frame)
        self._hand = 0

    def reset(self) -> None:
        self._frames.clear()
        self._clock.clear()
        self._hand = 0
        self.page_reads = 0
        self.page_writes = 0


# ---------------------------------------------------------------------------
# heap files
# ---------------------------------------------------------------------------

class Relation:
    """A read-only handle on a heap file."""

    _ids = _count()

    def __init__(self, path: str, name: Optional[str] = None):
        self.path = path
        self.name = name or os.path.basename(path)
        self.file_id = next(Relation._ids)
        with open(path, "rb") as fh:
            hdr = fh.read(_HEADER_LEN)
        if len(hdr) < _HEADER_LEN:
            raise StorageError(f"{path}: truncated header")
        magic, kind, page_size, tuple_count, page_count = struct.unpack(_HEADER_FMT, hdr)
        if magic != MAGIC:
            raise StorageError(f"{path}: bad magic {magic!r}")
        self.kind = kind
        self.page_size = page_size
        self.tuple_count = tuple_count
        self.page_count = page_count
        self._fh = open(path, "rb")
        self.bounds_index = None  # populated lazily by ujoin.joins

    def read_page(self, page_no: int) -> bytes:
        if page_no >= self.page_count:
            raise StorageError(f"{self.name}: page {page_no} beyond EOF")
        self._fh.seek((page_no + 1) * self.page_size)
        data = self._fh.read(self.page_size)
        if len(data) != self.page_size:
            raise PageCorruptError(page_no, "short read")
        return data

    def close(self) -> None:
        self._fh.close()

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Relation {self.name}: {self.tuple_count} tuples, {self.page_count} pages>"


class HeapFileWriter:
    """Write-once heap file builder; flushes full pages and counts them."""

    def __init__(self, path: str, kind: int = KIND_UTUPLE,
                 page_size: int = DEFAULT_PAGE_SIZE, pool: Optional[BufferPool] = None):
        self.path = path
        self.kind = kind
        self.page_size = page_size
        self.pool = pool
        self.tuple_count = 0
        self.page_count = 0
        self._fh = open(path, "wb")
        self._fh.write(b"\x00" * page_size)  # header placeholder
        self._page = bytearray(page_size)
        self._free = _PAGE_HDR
        self._nslots = 0

    def _page_capacity(self) -> int:
        return self.page_size - self._free - 2 * self._nslots

    def add_record(self, rec: bytes) -> tuple[int, int]:
        """Append one encoded record; returns its (page, slot) position."""
        need = len(rec) + 2
        if need > self.page_size - _PAGE_HDR:
            raise StorageError(f"record of {len(rec)} bytes exceeds page capacity")
        if need > self._page_capacity():
            self._flush_page()
        off = self._free
        page = self._page
        page[off:off + len(rec)] = rec
        slot = self._nslots
        base = self.page_size - 2 * (slot + 1)
        page[base] = off & 0xFF
        page[base + 1] = off >> 8
        self._nslots += 1
        self._free = off + len(rec)
        self.tuple_count += 1
        return (self.page_count, slot)

    def add(self, xid: int, alts: tuple[int, ...], payload: bytes = b"") -> tuple[int, int]:
        return self.add_record(encode_utuple(xid, alts, payload))

    def _flush_page(self) -> None:
        page = self._page
        page[0] = self._nslots & 0xFF
        page[1] = self._nslots >> 8
        page[2] = self._free & 0xFF
        page[3] = self._free >> 8
        self._fh.write(page)
        self.page_count += 1
        if self.pool is not None:
            self.pool.count_write()
        self._page = bytearray(self.page_size)
        self._free = _PAGE_HDR
        self._nslots = 0

    def close(self) -> Relation:
        if self._nslots:
            self._flush_page()
        self._fh.seek(0)
        hdr = struct.pack(_HEADER_FMT, MAGIC, self.kind, self.page_size,
                          self.tuple_count, self.page_count)
        self._fh.write(hdr)
        self._fh.close()
        return Relation(self.path)


# ---------------------------------------------------------------------------
# cursors
# ---------------------------------------------------------------------------

class Cursor:
    """Sequential reader with tell/seek repositioning.

    ``tell()`` returns the absolute index of the next record; ``seek``
    accepts any position at or before the furthest point already visited,
    which is all the rewinding the join algorithms need.
    """

    def __init__(self, rel: Relation, pool: BufferPool):
        self.rel = rel
        self.pool = pool
        self._page = 0
        self._slot = 0
        self._tuples = None
        self._pos = 0
        self._page_starts = [0]  # abs index of the first record of visited pages

    def _load(self, page_no: int):
        frame = self.pool.fetch(self.rel, page_no)
        if frame.decoded is None:
            frame.decoded = decode_page(frame.data, self.rel.page_size,
                                        self.rel.kind, page_no)
        return frame.decoded

    def next(self):
        rel = self.rel
        while True:
            tuples = self._tuples
            if tuples is None:
                if self._page >= rel.page_count:
                    return None
                tuples = self._tuples = self._load(self._page)
                if len(self._page_starts) == self._page + 1:
                    self._page_starts.append(self._page_starts[-1] + len(tuples))
            if self._slot < len(tuples):
                t = tuples[self._slot]
                self._slot += 1
                self._pos += 1
                return t
            self._page += 1
            self._slot = 0
            self._tuples = None

    def next_with_pos(self):
        """Like next(), but also returns the record's (page, slot) position."""
        t = self.next()
        if t is None:
            return None
        return t, self._page, self._slot - 1

    def __iter__(self):
        while (t := self.next()) is not None:
            yield t

    def tell(self) -> int:
        return self._pos

    def seek(self, pos: int) -> None:
        if pos < 0 or pos > self._page_starts[-1]:
            raise ValueError(f"seek({pos}) beyond visited range")
        page = bisect_right(self._page_starts, pos) - 1
        self._page = page
        self._slot = pos - self._page_starts[page]
        self._pos = pos
        self._tuples = None

    def rewind(self) -> None:
        self.seek(0)


def scan(rel: Relation, pool: BufferPool) -> Cursor:
    return Cursor(rel, pool)


def rescan_from(cursor: Cursor, pos: int) -> Cursor:
    cursor.seek(pos)
    return cursor


def fetch_record(rel: Relation, pool: BufferPool, page_no: int, slot: int):
    """Fetch and decode one record without decoding its whole page."""
    frame = pool.fetch(rel, page_no)
    if frame.decoded is not None:
        return frame.decoded[slot]
    cache = frame.slot_cache
    if cache is None:
        cache = frame.slot_cache = {}
    rec = cache.get(slot)
    if rec is None:
        rec = decode_slot(frame.data, rel.page_size, rel.kind, slot, page_no)
        cache[slot] = rec
    return rec


# ---------------------------------------------------------------------------
# spill files
# ---------------------------------------------------------------------------

def spill_dir() -> str:
    base = os.environ.get("UJOIN_SPILL_DIR") or tempfile.gettempdir()
    os.makedirs(base, exist_ok=True)
    return base


_spill_ids = _count()


def _spill_path(tag: str, directory: Optional[str] = None) -> str:
    d = directory or spill_dir()
    return os.path.join(d, f"ujoin-{os.getpid()}-{next(_spill_ids)}-{tag}.urel")


def drop_relation(rel: Relation, pool: Optional[BufferPool] = None) -> None:
    """Close and delete a temporary relation."""
    if pool is not None:
        pool.invalidate(rel)
    rel.close()
    try:
        os.unlink(rel.path)
    except FileNotFoundError:
        pass


# ---------------------------------------------------------------------------
# external sort
# ---------------------------------------------------------------------------

@dataclass
class SortStats:
    initial_runs: int
    merge_passes: int

    @property
    def total_passes(self) -> int:
        return 1 + self.merge_passes


def _sort_key(t: UTuple):
    alts = t.alts
    return (alts[0], alts[-1], t.xid)


def external_sort(rel: Relation, pool: BufferPool, mem_pages: int = 128,
                  directory: Optional[str] = None) -> tuple[Relation, SortStats]:
    """Sort a relation by (lb, ub, xid) with run generation + k-way merge.

    Memory budget is ``mem_pages`` pages for run generation and
    ``mem_pages - 1`` input streams per merge pass.  All page traffic is
    counted through the pool.
    """
    if mem_pages < 3:
        raise ValueError("external sort needs a budget of at least 3 pages")
    rpp = max(1, rel.tuple_count // max(1, rel.page_count))
    chunk_rows = max(1, mem_pages * rpp)

    runs: list[Relation] = []
    cur = Cursor(rel, pool)
    chunk: list[UTuple] = []
    while True:
        t = cur.next()
        if t is not None:
            chunk.append(t)
        if (t is None and chunk) or len(chunk) >= chunk_rows:
            chunk.sort(key=_sort_key)
            w = HeapFileWriter(_spill_path("run", directory), rel.kind,
                               rel.page_size, pool)
            for u in chunk:
                w.add(*u)
            runs.append(w.close())
            chunk = []
        if t is None:
            break
    if not runs:  # empty input: emit an empty sorted relation
        w = HeapFileWriter(_spill_path("run", directory), rel.kind, rel.page_size, pool)
        runs.append(w.close())

    initial_runs = len(runs)
    fan_in = max(2, mem_pages - 1)
    merge_passes = 0
    while len(runs) > 1:
        merge_passes += 1
        merged: list[Relation] = []
        for i in range(0, len(runs), fan_in):
            group = runs[i:i + fan_in]
            if len(group) == 1:
                merged.append(group[0])
                continue
            w = HeapFileWriter(_spill_path("merge", directory), rel.kind,
                               rel.page_size, pool)
            streams = [iter(Cursor(r, pool)) for r in group]
            for u in heapq.merge(*streams, key=_sort_key):
                w.add(*u)
            merged.append(w.close())
            for r in group:
                drop_relation(r, pool)
        runs = merged
    return runs[0], SortStats(initial_runs, merge_passes)


# ---------------------------------------------------------------------------
# flattening and the flat-row hash join
# ---------------------------------------------------------------------------

def flatten(rel: Relation, full: bool, pool: BufferPool,
            directory: Optional[str] = None) -> Relation:
    """One output row per alternative value.

    Key-only rows keep (xid, v); full rows additionally carry the whole
    source record so no later lookup is needed.
    """
    kind = KIND_FLAT_FULL if full else KIND_FLAT_KEY
    w = HeapFileWriter(_spill_path("flat", directory), kind, rel.page_size, pool)
    cur = Cursor(rel, pool)
    if full:
        for t in cur:
            for v in t.alts:
                w.add_record(encode_flat_full(t.xid, v, t.alts, t.payload))
    else:
        for t in cur:
            for v in t.alts:
                w.add_record(encode_flat_key(t.xid, v))
    return w.close()


def _encode_flat_row(row, kind: int) -> bytes:
    if kind == KIND_FLAT_KEY:
        return encode_flat_key(row[0], row[1])
    return encode_flat_full(*row)


def _hash_partition(v: int, nparts: int) -> int:
    return ((v & _XID_MASK) * 0x9E3779B1 >> 7) % nparts


def hash_join_flat(f1: Relation, f2: Relation, pool: BufferPool,
                   mem_pages: int = 128,
                   directory: Optional[str] = None) -> Iterator[tuple]:
    """Value-level equi-join of two flat relations.

    In-memory hash join when the build side fits the budget, otherwise
    grace-style partitioning with spill files; a partition that still
    exceeds the budget falls back to a block-nested join.  Yields
    (row1, row2) for every pair of rows with equal v.
    """
    if f1.page_count <= mem_pages:
        yield from _hash_join_mem(f1, f2, pool)
        return

    nparts = min(256, -(-f1.page_count // max(1, mem_pages - 2)) + 1)
    parts1 = [HeapFileWriter(_spill_path(f"p1-{i}", directory), f1.kind,
                             f1.page_size, pool) for i in range(nparts)]
    parts2 = [HeapFileWriter(_spill_path(f"p2-{i}", directory), f2.kind,
                             f2.page_size, pool) for i in range(nparts)]
    for row in Cursor(f1, pool):
        parts1[_hash_partition(row[1], nparts)].add_record(_encode_flat_row(row, f1.kind))
    for row in Cursor(f2, pool):
        parts2[_hash_partition(row[1], nparts)].add_record(_encode_flat_row(row, f2.kind))
    rels1 = [w.close() for w in parts1]
    rels2 = [w.close() for w in parts2]
    try:
        for p1, p2 in zip(rels1, rels2):
            if p1.tuple_count == 0 or p2.tuple_count == 0:
                continue
            if p1.page_count <= mem_pages:
                yield from _hash_join_mem(p1, p2, pool)
            else:
                yield from _block_join_flat(p1, p2, pool, mem_pages)
    finally:
        for r in rels1 + rels2:
            drop_relation(r, pool)


def _hash_join_mem(build: Relation, probe: Relation, pool: BufferPool) -> Iterator[tuple]:
    table: dict = {}
    for row in Cursor(build, pool):
        table.setdefault(row[1], []).append(row)
    get = table.get
    for row2 in Cursor(probe, pool):
        hit = get(row2[1])
        if hit:
            for row1 in hit:
                yield (row1, row2)


def _block_join_flat(build: Relation, probe: Relation, pool: BufferPool,
                     mem_pages: int) -> Iterator[tuple]:
    """Skew fallback: build side consumed in budget-sized blocks."""
    rpp = max(1, build.tuple_count // max(1, build.page_count))
    block_rows = max(1, mem_pages * rpp)
    cur = Cursor(build, pool)
    while True:
        table: dict = {}
        n = 0
        while n < block_rows and (row := cur.next()) is not None:
            table.setdefault(row[1], []).append(row)
            n += 1
        if not table:
            return
        get = table.get
        for row2 in Cursor(probe, pool):
            hit = get(row2[1])
            if hit:
                for row1 in hit:
                    yield (row1, row2)


# ---------------------------------------------------------------------------
# dedup and xid recovery
# ---------------------------------------------------------------------------

def dedup_pairs(pairs: Iterable[tuple[int, int]]) -> Iterator[tuple[int, int]]:
    """Distinct (xid1, xid2) pairs in first-occurrence order."""
    seen = set()
    add = seen.add
    for x1, x2 in pairs:
        key = (x1 << 64) | x2
        if key not in seen:
            add(key)
            yield (x1, x2)


def xid_lookup_join(pairs: Iterable[tuple[int, int]], r1: Relation, r2: Relation,
                    pool: BufferPool) -> Iterator[ResultPair]:
    """Recover full tuples for distinct id pairs via hash joins on xid.

    Consumes the whole pair stream before emitting anything, then scans
    each input relation exactly once.
    """
    by_x1: dict = {}
    for x1, x2 in pairs:
        by_x1.setdefault(x1, []).append(x2)

    pending: dict = {}  # xid2 -> list of (xid1, tuple1)
    for t1 in Cursor(r1, pool):
        partners = by_x1.pop(t1.xid, None)
        if partners:
            for x2 in partners:
                pending.setdefault(x2, []).append((t1.xid, t1))
    if by_x1:
        missing = next(iter(by_x1))
        raise IntegrityError(f"xid {missing} in pair stream but not in {r1.name}")

    for t2 in Cursor(r2, pool):
        hits = pending.pop(t2.xid, None)
        if hits:
            for x1, t1 in hits:
                yield ResultPair(x1, t2.xid, t1, t2)
    if pending:
        missing = next(iter(pending))
        raise IntegrityError(f"xid {missing} in pair stream but not in {r2.name}")
