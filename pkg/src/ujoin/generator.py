"""Seeded synthetic data and a CSV loader.

The synthetic generator builds self-join-aligned relation pairs: tuple i
of either relation draws its alternatives from the block
``i*c + j*s`` (j = 0..card-1).  With the stretch factor s coprime to c,
values never coincide across different i, so the join result has exactly
one pair per tuple no matter how wide the ranges spread.  Heap placement
is shuffled so physical order carries no information.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import UTuple, normalize_alts
from .storage import (
    DEFAULT_PAGE_SIZE,
    BufferPool,
    HeapFileWriter,
    Relation,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one synthetic relation pair."""

    n: int
    c: int = 3
    p: float = 100.0
    s: int = 1
    seed: int = 0
    payload_bytes: int = 16
    page_size: int = DEFAULT_PAGE_SIZE

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.c < 1:
            raise ValueError("c must be at least 1")
        if not (0.0 <= self.p <= 100.0):
            raise ValueError("p must be a percentage in [0, 100]")
        if self.s < 1:
            raise ValueError("s must be at least 1")
        if self.c > 1 and math.gcd(self.s, self.c) != 1:
            raise ValueError(
                f"s={self.s} shares a factor with c={self.c}; "
                "cross-tuple value collisions would corrupt result cardinality")
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be non-negative")

    def cache_key(self) -> str:
        return (f"n{self.n}-c{self.c}-p{self.p:g}-s{self.s}"
                f"-seed{self.seed}-pl{self.payload_bytes}-ps{self.page_size}")


@dataclass
class DatasetPair:
    left: Relation
    right: Relation
    spec: Optional[GenSpec]
    intended_result: int


def next_coprime(s: int, c: int) -> int:
    """Smallest s' >= s with gcd(s', c) == 1 (c == 1 accepts any s)."""
    while c > 1 and math.gcd(s, c) != 1:
        s += 1
    return s


def generate(spec: GenSpec, left_path: str, right_path: str,
             pool: Optional[BufferPool] = None) -> DatasetPair:
    """Write both relations of a dataset pair; deterministic in the seed."""
    rng = random.Random(spec.seed)
    n, c, s = spec.n, spec.c, spec.s
    threshold = spec.p / 100.0
    cards = [c if rng.random() < threshold else 1 for _ in range(n)]

    pair = []
    for side, path in ((0, left_path), (1, right_path)):
        order = list(range(n))
        side_rng = random.Random((spec.seed << 2) ^ (side + 1))
        side_rng.shuffle(order)
        w = HeapFileWriter(path, page_size=spec.page_size, pool=pool)
        for i in order:
            alts = tuple(range(i * c, i * c + cards[i] * s, s))
            w.add(i, alts, side_rng.randbytes(spec.payload_bytes))
        pair.append(w.close())
    return DatasetPair(pair[0], pair[1], spec, intended_result=n)


def generate_lookup(n_left: int, n_right: int, max_card: int,
                    left_path: str, right_path: str, seed: int = 0,
                    payload_bytes: int = 16,
                    pool: Optional[BufferPool] = None) -> DatasetPair:
    """Many-to-one reference-shaped pair.

    Left tuples hold a small set of right-side keys (set size k drawn
    with probability proportional to 1/k, up to max_card); right tuples
    are certain singletons with unique keys.  Every alternative on the
    left matches exactly one right tuple.
    """
    rng = random.Random(seed)
    sizes = list(range(1, max_card + 1))
    weights = [1.0 / k for k in sizes]
    intended = 0
    w = HeapFileWriter(left_path, pool=pool)
    for i in range(n_left):
        k = rng.choices(sizes, weights)[0]
        alts = normalize_alts(rng.sample(range(n_right), min(k, n_right)))
        intended += len(alts)
        w.add(i, alts, rng.randbytes(payload_bytes))
    left = w.close()

    order = list(range(n_right))
    rng.shuffle(order)
    w = HeapFileWriter(right_path, pool=pool)
    for j in order:
        w.add(j, (j,), rng.randbytes(payload_bytes))
    right = w.close()
    return DatasetPair(left, right, None, intended)


def measure_spreading(r1: Relation, r2: Relation, pool: BufferPool) -> float:
    """Mean number of r2 tuples whose value range overlaps each r1 tuple's."""
    from .joins import ensure_index  # local import: joins depends on storage only

    e1 = ensure_index(r1, pool)
    e2 = ensure_index(r2, pool)
    if len(e1) == 0 or len(e2) == 0:
        return 0.0
    lb1, ub1 = e1.lbs_np, e1.ubs_np
    lb2_sorted = e2.lbs_np  # already sorted by lb
    ub2_sorted = np.sort(e2.ubs_np)
    counts = (np.searchsorted(lb2_sorted, ub1, side="right")
              - np.searchsorted(ub2_sorted, lb1, side="left"))
    return float(counts.mean())


class CsvFormatError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


def _parse_value(token: str, line_no: int) -> int:
    token = token.strip()
    try:
        if "." in token:
            # decimal join keys are scaled to integers at load time
            return round(float(token) * 1000)
        return int(token)
    except ValueError:
        raise CsvFormatError(line_no, f"non-integer value {token!r}") from None


def load_csv(path: str, out_path: str, pool: Optional[BufferPool] = None,
             has_header: bool = False,
             page_size: int = DEFAULT_PAGE_SIZE) -> Relation:
    """Build a heap file from CSV rows ``id,value[,payload...]``.

    The value field is either a plain integer or ``{v1|v2|...|vk}``; sets
    are sorted and deduplicated (with a warning).  Ids that parse as
    non-negative integers become xids, otherwise xids are sequential.
    """
    w = HeapFileWriter(out_path, page_size=page_size, pool=pool)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        seq = 0
        for line_no, row in enumerate(reader, start=1):
            if not row or (line_no == 1 and has_header):
                continue
            if len(row) < 2:
                raise CsvFormatError(line_no, "need at least id and value columns")
            id_tok = row[0].strip()
            xid = int(id_tok) if id_tok.lstrip("-").isdigit() and int(id_tok) >= 0 else seq
            seq += 1
            val_tok = row[1].strip()
            if val_tok.startswith("{"):
                if not val_tok.endswith("}"):
                    raise CsvFormatError(line_no, f"unterminated set literal {val_tok!r}")
                inner = val_tok[1:-1].strip()
                if not inner:
                    raise CsvFormatError(line_no, "empty alternative set")
                raw = [_parse_value(t, line_no) for t in inner.split("|")]
                alts = normalize_alts(raw)
                if len(alts) != len(raw):
                    log.warning("line %d: duplicate alternatives normalized to %s",
                                line_no, list(alts))
            else:
                alts = (_parse_value(val_tok, line_no),)
            payload = ",".join(row[2:]).encode("utf-8")
            w.add(xid, alts, payload)
    rel = w.close()
    return rel
