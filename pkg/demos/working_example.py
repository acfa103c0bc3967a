"""Walk through the six-tuple working relation.

Builds the small relation whose join attribute is a set of alternative
integers, self-joins it with every algorithm, and prints the counts that
make the example useful: 12 result pairs, 36 nested-loop comparisons,
22 sort-join comparisons, 19 flattened rows, 27 value-level matches.

Run from the repository root:  python3 demos/working_example.py
"""

import os
import tempfile

from ujoin import BufferPool, HeapFileWriter, JoinAlgorithm, flatten, hash_join_flat, open_join
from ujoin.storage import Cursor, dedup_pairs

WORKING = {
    1: (40, 50, 53, 58),
    2: (37, 40, 42, 47),
    3: (14, 16, 22),
    4: (18, 19),
    5: (23, 25, 28),
    6: (14, 16, 18),
}


def main():
    work = tempfile.mkdtemp(prefix="ujoin-demo-")
    pool = BufferPool(64)

    w = HeapFileWriter(os.path.join(work, "working.urel"))
    for xid, alts in WORKING.items():
        w.add(xid, alts)
    rel = w.close()

    print("the working relation (xid: alternatives):")
    for t in Cursor(rel, pool):
        print(f"  ut{t.xid}: {set(t.alts)}")

    print("\nself-join under each algorithm:")
    for algo in JoinAlgorithm:
        cursor = open_join(algo, rel, rel, pool, directory=work)
        pairs = sorted((p.xid1, p.xid2) for p in cursor)
        m = cursor.metrics()
        print(f"  {algo.value:7s} {m.result_count:2d} pairs, "
              f"{m.comparisons:3d} comparisons")
        if algo is JoinAlgorithm.NESTED_LOOP:
            print(f"          pairs: {pairs}")

    print("\nflattening view:")
    f1 = flatten(rel, False, pool, work)
    f2 = flatten(rel, False, pool, work)
    print(f"  key-only flat relation: {f1.tuple_count} rows "
          f"(one per alternative value)")
    value_pairs = [(r1[0], r2[0]) for r1, r2 in hash_join_flat(f1, f2, pool)]
    distinct = list(dedup_pairs(value_pairs))
    print(f"  value-level self-join:  {len(value_pairs)} matches")
    print(f"  after the distinct step: {len(distinct)} pairs")


if __name__ == "__main__":
    main()
