"""Synthetic data generation, spreading measurement, CSV loading."""

import math
import os
import random

import pytest

from ujoin import BufferPool, Cursor, GenSpec, generate, generate_lookup, load_csv, measure_spreading
from ujoin.generator import CsvFormatError, next_coprime

from .conftest import brute_force_pairs, write_rel


def rows_of(rel, pool):
    return sorted(Cursor(rel, pool), key=lambda t: t.xid)


class TestGenSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GenSpec(n=0)
        with pytest.raises(ValueError):
            GenSpec(n=10, p=120.0)
        with pytest.raises(ValueError):
            GenSpec(n=10, s=0)

    def test_rejects_stretch_sharing_a_factor_with_c(self):
        # gcd(s, c) > 1 would let blocks of different tuples collide
        with pytest.raises(ValueError):
            GenSpec(n=10, c=4, s=2)
        GenSpec(n=10, c=4, s=3)   # coprime: fine
        GenSpec(n=10, c=1, s=5)   # certain tuples: any stretch

    def test_next_coprime(self):
        assert next_coprime(2, 4) == 3
        assert next_coprime(3, 3) == 4
        assert next_coprime(5, 3) == 5
        assert next_coprime(9, 1) == 9

    def test_cache_key_distinguishes_specs(self):
        a = GenSpec(n=10, c=3, s=1)
        b = GenSpec(n=10, c=3, s=2)
        assert a.cache_key() != b.cache_key()


class TestGenerate:
    def test_block_values(self, tmp_path, pool):
        spec = GenSpec(n=4, c=3, p=100.0, s=1, seed=1)
        pair = generate(spec, os.fspath(tmp_path / "L.urel"),
                        os.fspath(tmp_path / "R.urel"))
        rows = rows_of(pair.left, pool)
        assert rows[0].alts == (0, 1, 2)
        assert rows[1].alts == (3, 4, 5)

    def test_stretched_blocks(self, tmp_path, pool):
        spec = GenSpec(n=3, c=3, p=100.0, s=2, seed=1)
        pair = generate(spec, os.fspath(tmp_path / "L.urel"),
                        os.fspath(tmp_path / "R.urel"))
        rows = rows_of(pair.left, pool)
        assert rows[0].alts == (0, 2, 4)
        assert rows[1].alts == (3, 5, 7)

    @pytest.mark.parametrize("s", [1, 2, 7])
    def test_self_join_result_is_exactly_n(self, s, tmp_path, pool):
        spec = GenSpec(n=300, c=3, p=100.0, s=s, seed=9)
        pair = generate(spec, os.fspath(tmp_path / f"L{s}.urel"),
                        os.fspath(tmp_path / f"R{s}.urel"))
        want = brute_force_pairs(list(Cursor(pair.left, pool)),
                                 list(Cursor(pair.right, pool)))
        assert len(want) == 300 == pair.intended_result
        assert all(x1 == x2 for x1, x2 in want)

    def test_percentage_controls_uncertain_share(self, tmp_path, pool):
        spec = GenSpec(n=2000, c=3, p=50.0, s=1, seed=4)
        pair = generate(spec, os.fspath(tmp_path / "L.urel"),
                        os.fspath(tmp_path / "R.urel"))
        uncertain = sum(1 for t in Cursor(pair.left, pool) if t.cardinality > 1)
        assert abs(uncertain / 2000 - 0.5) < 0.05

    def test_deterministic_in_seed(self, tmp_path):
        spec = GenSpec(n=500, c=3, p=80.0, s=2, seed=42)
        generate(spec, os.fspath(tmp_path / "a-L"), os.fspath(tmp_path / "a-R"))
        generate(spec, os.fspath(tmp_path / "b-L"), os.fspath(tmp_path / "b-R"))
        assert (tmp_path / "a-L").read_bytes() == (tmp_path / "b-L").read_bytes()
        assert (tmp_path / "a-R").read_bytes() == (tmp_path / "b-R").read_bytes()

    def test_sides_are_shuffled_independently(self, tmp_path, pool):
        spec = GenSpec(n=500, c=3, s=1, seed=42)
        pair = generate(spec, os.fspath(tmp_path / "L"), os.fspath(tmp_path / "R"))
        order_l = [t.xid for t in Cursor(pair.left, pool)]
        order_r = [t.xid for t in Cursor(pair.right, pool)]
        assert order_l != sorted(order_l)  # physical order carries no signal
        assert order_l != order_r


class TestLookupShaped:
    def test_intended_count_and_shape(self, tmp_path, pool):
        pair = generate_lookup(400, 50, 6, os.fspath(tmp_path / "L"),
                               os.fspath(tmp_path / "R"), seed=3)
        left = list(Cursor(pair.left, pool))
        right = list(Cursor(pair.right, pool))
        assert len(right) == 50
        assert all(t.cardinality == 1 for t in right)
        assert sorted(t.alts[0] for t in right) == list(range(50))
        assert pair.intended_result == sum(t.cardinality for t in left)
        want = brute_force_pairs(left, right)
        assert len(want) == pair.intended_result


class TestMeasureSpreading:
    def _gen(self, tmp_path, pool, **kw):
        spec = GenSpec(seed=2, **kw)
        return generate(spec, os.fspath(tmp_path / f"{spec.cache_key()}-L"),
                        os.fspath(tmp_path / f"{spec.cache_key()}-R"))

    def test_disjoint_blocks_give_one(self, tmp_path, pool):
        pair = self._gen(tmp_path, pool, n=1000, c=3, s=1)
        assert measure_spreading(pair.left, pair.right, pool) == pytest.approx(1.0)

    def test_stretch_two_gives_three_interior_overlaps(self, tmp_path, pool):
        pair = self._gen(tmp_path, pool, n=1000, c=3, s=2)
        got = measure_spreading(pair.left, pair.right, pool)
        assert got == pytest.approx(3.0, rel=0.01)  # edges pull it just below 3

    def test_matches_brute_force(self, tmp_path, pool):
        rng = random.Random(8)
        rows1 = [(i, (rng.randrange(100), )) for i in range(80)]
        rows1 = [(i, (v[0], v[0] + rng.randrange(20))) for i, v in rows1]
        rows2 = [(200 + i, (rng.randrange(100), )) for i in range(60)]
        rows2 = [(i, (v[0], v[0] + rng.randrange(20))) for i, v in rows2]
        r1 = write_rel(tmp_path / "a.urel", rows1)
        r2 = write_rel(tmp_path / "b.urel", rows2)
        want = sum(1 for _, (l1, u1) in rows1 for _, (l2, u2) in rows2
                   if l1 <= u2 and l2 <= u1) / len(rows1)
        assert measure_spreading(r1, r2, pool) == pytest.approx(want)

    def test_monotone_in_stretch(self, tmp_path, pool):
        values = []
        for s in (1, 2, 4, 7):
            pair = self._gen(tmp_path, pool, n=500, c=3, s=s)
            values.append(measure_spreading(pair.left, pair.right, pool))
        assert values == sorted(values)
        assert values[0] < values[-1]


class TestCsvLoader:
    def _load(self, tmp_path, text, **kw):
        src = tmp_path / "in.csv"
        src.write_text(text)
        return load_csv(os.fspath(src), os.fspath(tmp_path / "out.urel"), **kw)

    def test_plain_and_set_values(self, tmp_path, pool):
        rel = self._load(tmp_path, "1,5\n2,{7|3|9},note\n")
        rows = rows_of(rel, pool)
        assert rows[0].alts == (5,)
        assert rows[1].alts == (3, 7, 9)
        assert rows[1].payload == b"note"

    def test_decimals_scale_to_integers(self, tmp_path, pool):
        rel = self._load(tmp_path, "1,{1.5|2.25}\n")
        assert rows_of(rel, pool)[0].alts == (1500, 2250)

    def test_header_skipped(self, tmp_path, pool):
        rel = self._load(tmp_path, "id,value\n1,5\n", has_header=True)
        assert rel.tuple_count == 1

    def test_duplicate_alternatives_warn_and_normalize(self, tmp_path, pool, caplog):
        import logging
        with caplog.at_level(logging.WARNING, logger="ujoin.generator"):
            rel = self._load(tmp_path, "1,{4|4|2}\n")
        assert rows_of(rel, pool)[0].alts == (2, 4)
        assert any("duplicate" in r.message for r in caplog.records)

    def test_sequential_ids_for_non_numeric_keys(self, tmp_path, pool):
        rel = self._load(tmp_path, "alice,5\nbob,6\n")
        assert [t.xid for t in rows_of(rel, pool)] == [0, 1]

    @pytest.mark.parametrize("bad", ["1,{}\n", "1,{3|x}\n", "1,{3|4\n", "justone\n"])
    def test_malformed_rows_raise_with_line_number(self, tmp_path, bad):
        with pytest.raises(CsvFormatError) as exc:
            self._load(tmp_path, bad)
        assert exc.value.line_no == 1
