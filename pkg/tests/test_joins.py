"""The six algorithms against the working example and small oracles."""

import os
import random

import pytest

from ujoin import BufferPool, JoinAlgorithm, ensure_index, first_k, open_join
from ujoin.joins import IntervalIndex, index_join, nested_loop_join, sort_join

from .conftest import EXPECTED_PAIRS, WORKING_ALTS, brute_force_pairs, working_rows, write_rel

ALL_ALGOS = list(JoinAlgorithm)


def run_pairs(algo, rel1, rel2, pool, tmp_path=None):
    directory = os.fspath(tmp_path) if tmp_path else None
    cursor = open_join(algo, rel1, rel2, pool, directory=directory)
    pairs = [(p.xid1, p.xid2) for p in cursor]
    return pairs, cursor.metrics()


class TestWorkingExample:
    @pytest.mark.parametrize("algo", ALL_ALGOS)
    def test_twelve_distinct_pairs(self, algo, working_rel, pool, tmp_path):
        pairs, metrics = run_pairs(algo, working_rel, working_rel, pool, tmp_path)
        assert len(pairs) == len(set(pairs)), "a pair was emitted twice"
        assert set(pairs) == EXPECTED_PAIRS
        assert metrics.result_count == 12

    def test_nested_loop_comparison_count(self, working_rel, pool):
        cursor = nested_loop_join(working_rel, working_rel, pool)
        for _ in cursor:
            pass
        assert cursor.counters.comparisons == 36  # 6 x 6, no shortcuts

    def test_base_join_comparison_count(self, working_rel, pool):
        # one block holds all six tuples, so the work equals the plain loop
        cursor = open_join(JoinAlgorithm.BASE, working_rel, working_rel, pool)
        for _ in cursor:
            pass
        assert cursor.counters.comparisons == 36

    def test_sort_join_comparison_count(self, working_rel, pool):
        cursor = sort_join(working_rel, working_rel, pool)
        for _ in cursor:
            pass
        assert cursor.counters.comparisons == 22

    def test_pairs_materialize_full_tuples(self, working_rel, pool):
        cursor = nested_loop_join(working_rel, working_rel, pool)
        p = cursor.next()
        assert p.left.alts == WORKING_ALTS[p.xid1]
        assert p.right.alts == WORKING_ALTS[p.xid2]


class TestIntervalIndex:
    def test_probe_returns_overlapping_ranges(self, working_rel, pool):
        idx = ensure_index(working_rel, pool)
        # probing with ut3's range [14, 22] must surface every tuple whose
        # range overlaps it, including ut4's [18, 19]
        hits = {idx.xids[i] for i in idx.query(14, 22)}
        assert hits == {3, 4, 6}
        hits = {idx.xids[i] for i in idx.query(40, 58)}
        assert hits == {1, 2}

    def test_query_matches_brute_force(self, tmp_path, pool):
        rng = random.Random(3)
        rows = []
        for i in range(400):
            lo = rng.randrange(1000)
            rows.append((i, (lo, lo + rng.randrange(40))))
        rel = write_rel(tmp_path / "r.urel", rows)
        idx = ensure_index(rel, pool)
        for _ in range(50):
            qlb = rng.randrange(1000)
            qub = qlb + rng.randrange(60)
            got = {idx.xids[i] for i in idx.query(qlb, qub)}
            want = {x for x, (lo, hi) in rows if lo <= qub and qlb <= hi}
            assert got == want

    def test_built_once_per_relation(self, working_rel, pool):
        idx1 = ensure_index(working_rel, pool)
        idx2 = ensure_index(working_rel, pool)
        assert idx1 is idx2

    def test_build_traffic_reported_separately(self, working_rel):
        pool = BufferPool(16)
        idx = ensure_index(working_rel, pool)
        assert idx.build_page_reads == working_rel.page_count


class TestSortJoinSemantics:
    def test_all_overlapping_degenerates_to_full_cross_check(self, tmp_path, pool):
        # every range covers every other: the rewind never advances, so
        # each outer tuple examines the whole inner relation
        rows1 = [(i, (0, 1000 + i)) for i in range(25)]
        rows2 = [(100 + i, (0, 1000 + i)) for i in range(30)]
        r1 = write_rel(tmp_path / "a.urel", rows1)
        r2 = write_rel(tmp_path / "b.urel", rows2)
        cursor = sort_join(r1, r2, pool)
        n = sum(1 for _ in cursor)
        assert n == 25 * 30
        assert cursor.counters.comparisons == 25 * 30

    def test_certain_inputs_behave_like_sort_merge(self, tmp_path, pool):
        rows1 = [(i, (v,)) for i, v in enumerate([5, 1, 9, 3, 7])]
        rows2 = [(10 + i, (v,)) for i, v in enumerate([3, 9, 2, 5])]
        r1 = write_rel(tmp_path / "a.urel", rows1)
        r2 = write_rel(tmp_path / "b.urel", rows2)
        cursor = sort_join(r1, r2, pool)
        got = {(p.xid1, p.xid2) for p in cursor}
        assert got == {(0, 13), (3, 10), (2, 11)}


class TestOracleEquivalence:
    @pytest.mark.parametrize("algo", ALL_ALGOS)
    def test_random_instances(self, algo, tmp_path, pool):
        rng = random.Random(77)
        for case in range(25):
            n1, n2 = rng.randint(1, 60), rng.randint(1, 60)
            universe = rng.randint(10, 3 * (n1 + n2))
            def mk(n, base):
                return [(base + i,
                         tuple(sorted(rng.sample(range(universe),
                                                 rng.randint(1, 4)))))
                        for i in range(n)]
            rows1, rows2 = mk(n1, 0), mk(n2, 1000)
            r1 = write_rel(tmp_path / f"a{case}.urel", rows1)
            r2 = write_rel(tmp_path / f"b{case}.urel", rows2)
            from ujoin.model import UTuple
            want = brute_force_pairs([UTuple(x, a) for x, a in rows1],
                                     [UTuple(x, a) for x, a in rows2])
            pairs, _ = run_pairs(algo, r1, r2, pool, tmp_path)
            assert len(pairs) == len(set(pairs))
            assert set(pairs) == want, f"case {case} diverged from the oracle"


class TestTopK:
    def test_first_k_truncates(self, working_rel, pool):
        cursor = nested_loop_join(working_rel, working_rel, pool)
        pairs, metrics = first_k(cursor, 5)
        assert len(pairs) == 5
        assert metrics.result_count == 5
        assert metrics.comparisons < 36

    def test_first_k_past_the_end(self, working_rel, pool):
        cursor = nested_loop_join(working_rel, working_rel, pool)
        pairs, metrics = first_k(cursor, 100)
        assert len(pairs) == 12

    def test_k_zero(self, working_rel, pool):
        cursor = nested_loop_join(working_rel, working_rel, pool)
        pairs, metrics = first_k(cursor, 0)
        assert pairs == [] and metrics.result_count == 0

    def test_negative_k_rejected(self, working_rel, pool):
        cursor = nested_loop_join(working_rel, working_rel, pool)
        with pytest.raises(ValueError):
            first_k(cursor, -1)

    @pytest.mark.parametrize("algo", [JoinAlgorithm.TUPLE1, JoinAlgorithm.TUPLE2])
    def test_tuple_joins_pay_full_io_up_front(self, algo, tmp_path):
        rows = [(i, (3 * i, 3 * i + 1, 3 * i + 2), b"p" * 16) for i in range(3000)]
        r1 = write_rel(tmp_path / "a.urel", rows)
        r2 = write_rel(tmp_path / "b.urel", rows)

        pool = BufferPool(256)
        full = open_join(algo, r1, r2, pool, directory=os.fspath(tmp_path))
        for _ in full:
            pass
        full_m = full.metrics()

        pool.reset()
        trunc = open_join(algo, r1, r2, pool, directory=os.fspath(tmp_path))
        _, trunc_m = first_k(trunc, 1)
        assert trunc_m.page_reads == full_m.page_reads
        assert trunc_m.page_writes == full_m.page_writes


class TestDeterminism:
    @pytest.mark.parametrize("algo", ALL_ALGOS)
    def test_repeat_cold_runs_are_identical(self, algo, working_rel, pool, tmp_path):
        from ujoin.bench import run_single
        from ujoin.generator import DatasetPair

        pair = DatasetPair(working_rel, working_rel, None, 12)
        m1 = run_single(algo, pair, pool, directory=os.fspath(tmp_path))
        m2 = run_single(algo, pair, pool, directory=os.fspath(tmp_path))
        assert m1.comparisons == m2.comparisons
        assert m1.page_reads == m2.page_reads
        assert m1.result_count == m2.result_count == 12


class TestMetrics:
    def test_trace_is_monotone(self, tmp_path, pool):
        rows = [(i, (i,)) for i in range(5000)]
        r1 = write_rel(tmp_path / "a.urel", rows)
        r2 = write_rel(tmp_path / "b.urel", rows)
        cursor = open_join(JoinAlgorithm.SORT, r1, r2, pool)
        for _ in cursor:
            pass
        trace = cursor.metrics().trace
        assert len(trace) >= 2
        assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(trace, trace[1:]))
        assert trace[-1][1] == 5000

    def test_unknown_algorithm_rejected(self, working_rel, pool):
        with pytest.raises(ValueError):
            open_join("zigzag", working_rel, working_rel, pool)
