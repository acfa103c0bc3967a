"""Shared fixtures: the six-tuple working relation and oracle helpers."""

import os

import pytest

from ujoin import BufferPool, HeapFileWriter, Relation, intersects
from ujoin.model import UTuple

# The running example: six tuples whose join attribute is a set of
# alternative integers.  Self-joining it yields exactly twelve pairs.
WORKING_ALTS = {
    1: (40, 50, 53, 58),
    2: (37, 40, 42, 47),
    3: (14, 16, 22),
    4: (18, 19),
    5: (23, 25, 28),
    6: (14, 16, 18),
}

EXPECTED_PAIRS = {
    (1, 1), (1, 2), (2, 1), (2, 2),
    (3, 3), (3, 6), (4, 4), (4, 6),
    (5, 5), (6, 3), (6, 4), (6, 6),
}


def write_rel(path, rows, **kw) -> Relation:
    """Build a heap file from (xid, alts[, payload]) rows."""
    w = HeapFileWriter(os.fspath(path), **kw)
    for row in rows:
        if len(row) == 2:
            w.add(row[0], row[1])
        else:
            w.add(row[0], row[1], row[2])
    return w.close()


def brute_force_pairs(rows1, rows2):
    """Oracle: all (xid1, xid2) whose alternative sets intersect."""
    return {(t1.xid, t2.xid)
            for t1 in rows1 for t2 in rows2
            if intersects(t1.alts, t2.alts)}


def working_rows():
    return [UTuple(x, alts) for x, alts in WORKING_ALTS.items()]


@pytest.fixture
def working_rel(tmp_path) -> Relation:
    return write_rel(tmp_path / "working.urel",
                     [(x, alts) for x, alts in WORKING_ALTS.items()])


@pytest.fixture
def pool() -> BufferPool:
    return BufferPool(256)
