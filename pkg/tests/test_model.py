"""Value-level primitives: intersection, bounds, range overlap."""

import pytest
from hypothesis import given, strategies as st

from ujoin import bounds, intersects, normalize_alts, ranges_overlap
from ujoin.model import UTuple, validate_alts

from .conftest import WORKING_ALTS


alt_sets = st.lists(st.integers(-10_000, 10_000), min_size=1, max_size=8).map(
    lambda vs: normalize_alts(vs))


class TestIntersects:
    def test_working_example_pairs(self):
        assert intersects(WORKING_ALTS[1], WORKING_ALTS[2])       # share 40
        assert intersects(WORKING_ALTS[3], WORKING_ALTS[6])       # share 14, 16
        assert intersects(WORKING_ALTS[4], WORKING_ALTS[6])       # share 18
        assert not intersects(WORKING_ALTS[3], WORKING_ALTS[4])   # 18,19 vs 14,16,22
        assert not intersects(WORKING_ALTS[5], WORKING_ALTS[4])

    def test_singletons(self):
        assert intersects((7,), (7,))
        assert not intersects((7,), (8,))

    @given(alt_sets, alt_sets)
    def test_matches_set_intersection(self, a, b):
        assert intersects(a, b) == bool(set(a) & set(b))

    @given(alt_sets, alt_sets)
    def test_symmetric(self, a, b):
        assert intersects(a, b) == intersects(b, a)

    @given(alt_sets)
    def test_reflexive(self, a):
        assert intersects(a, a)


class TestBounds:
    def test_examples(self):
        assert bounds(WORKING_ALTS[1]) == (40, 58)
        assert bounds((5,)) == (5, 5)

    @given(alt_sets)
    def test_min_max(self, a):
        lb, ub = bounds(a)
        assert lb == min(a) and ub == max(a)

    def test_utuple_properties(self):
        t = UTuple(3, WORKING_ALTS[3])
        assert (t.lb, t.ub, t.cardinality) == (14, 22, 3)


class TestRangesOverlap:
    def test_examples(self):
        assert ranges_overlap((14, 22), (14, 18))
        assert ranges_overlap((18, 19), (14, 18))   # touch at 18
        assert not ranges_overlap((23, 28), (14, 22))

    @given(alt_sets, alt_sets)
    def test_intersection_implies_overlap(self, a, b):
        if intersects(a, b):
            assert ranges_overlap(bounds(a), bounds(b))

    def test_overlap_without_intersection(self):
        # ranges [14,22] and [18,19] overlap, yet no shared alternative
        a, b = WORKING_ALTS[3], WORKING_ALTS[4]
        assert ranges_overlap(bounds(a), bounds(b))
        assert not intersects(a, b)


class TestNormalize:
    def test_sorts_and_dedups(self):
        assert normalize_alts([5, 2, 5, -1]) == (-1, 2, 5)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            normalize_alts([])

    def test_validate(self):
        validate_alts((1, 2, 9))
        with pytest.raises(ValueError):
            validate_alts((1, 1, 2))
        with pytest.raises(ValueError):
            validate_alts(())
