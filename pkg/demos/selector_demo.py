"""The statistics-driven algorithm selector in action.

Collects uncertainty statistics from generated datasets at two very
different spreading levels, prints the cost model's per-algorithm
scores, and shows which algorithm choose_algorithm picks for a full
result versus a 100-row fetch.

Run from the repository root:  python3 demos/selector_demo.py
"""

import tempfile

from ujoin import BufferPool, GenSpec, choose_algorithm, collect_stats
from ujoin.bench import DatasetCache
from ujoin.planner import estimate_all, score


def show(name, pair, pool):
    s1 = collect_stats(pair.left, pool, pair.right)
    s2 = collect_stats(pair.right, pool, pair.left)
    print(f"\n{name}: n={s1.n}, avg_card={s1.avg_card:.2f}, "
          f"avg_overlap={s1.avg_overlap:.2f}, flat_rows={s1.flat_rows:.0f}")
    for k, label in ((None, "full result"), (100, "first 100")):
        ests = estimate_all(s1, s2, k)
        scores = ", ".join(f"{e.algorithm.value}={score(e):,.0f}" for e in ests)
        pick = choose_algorithm(s1, s2, k)
        print(f"  {label:11s} -> {pick.value:7s} (scores: {scores})")


def main():
    work = tempfile.mkdtemp(prefix="ujoin-demo-")
    cache = DatasetCache(work)
    pool = BufferPool(256)

    tight = cache.synthetic(GenSpec(n=200_000, c=3, p=100.0, s=1, seed=2))
    wide = cache.synthetic(GenSpec(n=200_000, c=3, p=100.0, s=17, seed=2))

    show("tight spreading (s=1)", tight, pool)
    show("wide spreading (s=17)", wide, pool)

    print("\nwith tight spreading the index path is cheap enough to win "
          "outright; wide\nspreading multiplies its candidate work, so the "
          "selector falls back to the\nmerge join for a short fetch and to "
          "the spread-immune flattening join when\nthe whole result is wanted.")


if __name__ == "__main__":
    main()
