"""Core value and tuple types.

A join attribute value is a non-empty, strictly sorted tuple of signed
integers (the alternatives).  Two tuples join when their alternative sets
share at least one value.  Sortedness gives O(|a|+|b|) intersection and
O(1) bounds, so every algorithm in :mod:`ujoin.joins` builds on the three
functions here.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional


class UTuple(NamedTuple):
    """One record: unique id, sorted alternative values, opaque payload."""

    xid: int
    alts: tuple[int, ...]
    payload: bytes = b""

    @property
    def lb(self) -> int:
        return self.alts[0]

    @property
    def ub(self) -> int:
        return self.alts[-1]

    @property
    def cardinality(self) -> int:
        return len(self.alts)


class ResultPair(NamedTuple):
    """A qualifying (outer, inner) pair; full tuples attached when materialized."""

    xid1: int
    xid2: int
    left: Optional[UTuple] = None
    right: Optional[UTuple] = None


def normalize_alts(values: Iterable[int]) -> tuple[int, ...]:
    """Sort and deduplicate an alternative set; reject empty sets."""
    alts = tuple(sorted({int(v) for v in values}))
    if not alts:
        raise ValueError("alternative set must be non-empty")
    return alts


def validate_alts(alts: tuple[int, ...]) -> None:
    """Raise ValueError unless alts is non-empty and strictly increasing."""
    if not alts:
        raise ValueError("alternative set must be non-empty")
    for i in range(1, len(alts)):
        if alts[i] <= alts[i - 1]:
            raise ValueError(f"alternatives not strictly increasing: {alts}")


def intersects(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    """True iff the two sorted alternative sets share a value.

    Linear two-pointer merge; total function, no allocation.
    """
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        av = a[i]
        bv = b[j]
        if av == bv:
            return True
        if av < bv:
            i += 1
        else:
            j += 1
    return False


def bounds(alts: tuple[int, ...]) -> tuple[int, int]:
    """(min, max) of a sorted alternative set; lb == ub for singletons."""
    return (alts[0], alts[-1])


def ranges_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff the closed ranges share at least one point."""
    return a[0] <= b[1] and b[0] <= a[1]
