"""Relation statistics and the statistics-driven algorithm selector.

The cost model turns a handful of uncertainty statistics (tuple count,
alternatives per tuple, fraction uncertain, measured range overlap) into
per-algorithm cost scores.  Functional forms follow how each algorithm
actually spends its time: the flattening joins scale with the number of
alternative values, the merge-style join with tuple count times range
overlap, the index path with how many results are requested.  Constants
are calibrated once per machine and stored in a key=value config.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

from .joins import JoinAlgorithm
from .storage import BufferPool, Relation, Cursor, rows_per_page

ALL = None  # sentinel: full result requested

#: Shipped constants, measured on the reference bench run.
DEFAULT_CALIBRATION = {
    "cmp_page_equiv": 0.18,   # one tuple comparison, in units of one page read
    "probe_page_equiv": 0.04,  # one index probe (binary search), same units
    "index_cand_weight": 2.8,  # per-candidate cost of the index path, in comparisons
    "flat_cmp_weight": 7.0,   # per-flat-row pipeline cost, in comparison units
    "wide_row_factor": 1.6,   # extra per-row cost of full (wide) flat rows
    "hash_pass_weight": 4.0,  # flat-page multiplier covering write+read passes
    "miss_floor": 0.05,       # lower bound on random-fetch miss rate
    "pool_pages": 256.0,
    "mem_pages": 128.0,
    "calibrated": 0.0,        # 1.0 once `ujoin calibrate` has run
}

_TIE_ORDER = [JoinAlgorithm.INDEX, JoinAlgorithm.SORT, JoinAlgorithm.TUPLE1,
              JoinAlgorithm.TUPLE2, JoinAlgorithm.BASE, JoinAlgorithm.NESTED_LOOP]


@dataclass(frozen=True)
class RelationStats:
    n: int
    avg_card: float
    max_card: int
    pct_uncertain: float      # fraction of tuples with more than one alternative
    avg_overlap: float        # measured spreading against the join partner
    flat_rows: float
    has_index: bool
    pages: int
    avg_payload: float


@dataclass(frozen=True)
class CostEstimate:
    algorithm: JoinAlgorithm
    est_page_ios: float
    est_comparisons: float
    calibrated: bool


def collect_stats(rel: Relation, pool: BufferPool,
                  partner: Optional[Relation] = None) -> RelationStats:
    """One scan over the relation plus an endpoint-sort overlap measure."""
    from .generator import measure_spreading

    n = 0
    total_card = 0
    max_card = 0
    uncertain = 0
    payload_total = 0
    for t in Cursor(rel, pool):
        n += 1
        card = len(t.alts)
        total_card += card
        payload_total += len(t.payload)
        if card > max_card:
            max_card = card
        if card > 1:
            uncertain += 1
    avg_card = total_card / n if n else 0.0
    overlap = measure_spreading(rel, partner if partner is not None else rel, pool)
    return RelationStats(
        n=n,
        avg_card=avg_card,
        max_card=max_card,
        pct_uncertain=uncertain / n if n else 0.0,
        avg_overlap=overlap,
        flat_rows=n * avg_card,
        has_index=True,  # the engine builds the bounds index on demand
        pages=rel.page_count,
        avg_payload=payload_total / n if n else 0.0,
    )


# ---------------------------------------------------------------------------
# calibration config
# ---------------------------------------------------------------------------

def load_calibration(path: Optional[str] = None) -> dict:
    calib = dict(DEFAULT_CALIBRATION)
    if path and os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                key = key.strip()
                if key in calib:
                    calib[key] = float(value.strip())
    return calib


def save_calibration(calib: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# ujoin cost-model constants (units: one sequential page read = 1.0)\n")
        for key in DEFAULT_CALIBRATION:
            fh.write(f"{key} = {calib.get(key, DEFAULT_CALIBRATION[key])!r}\n")


# ---------------------------------------------------------------------------
# cost model
# ---------------------------------------------------------------------------

def _flat_pages(stats: RelationStats, full_rows: bool) -> float:
    payload = stats.avg_payload if full_rows else 0
    card = stats.avg_card if full_rows else 1.0
    return stats.flat_rows / rows_per_page(card, int(payload))


def _miss(pages: float, calib: dict) -> float:
    pool = calib["pool_pages"]
    return max(calib["miss_floor"], min(1.0, 1.0 - pool / max(pages, 1.0)))


def estimate(algo: JoinAlgorithm, stats1: RelationStats, stats2: RelationStats,
             k: Optional[int] = ALL, calib: Optional[dict] = None) -> CostEstimate:
    """Closed-form cost of one algorithm, in page-read-equivalent units."""
    calib = calib if calib is not None else dict(DEFAULT_CALIBRATION)
    calibrated = bool(calib.get("calibrated"))
    n1, n2 = stats1.n, stats2.n
    P1, P2 = float(stats1.pages), float(stats2.pages)
    mem = calib["mem_pages"]
    ov = max(stats1.avg_overlap, 1e-9)
    miss1, miss2 = _miss(P1, calib), _miss(P2, calib)

    result_est = max(1.0, float(min(n1, n2)))
    frac = 1.0 if k is ALL else min(1.0, k / result_est)
    touched = n1 * frac

    if algo is JoinAlgorithm.NESTED_LOOP:
        io = P1 * frac + touched * P2
        cmp = touched * n2
    elif algo is JoinAlgorithm.BASE:
        rpp1 = max(1.0, n1 / max(P1, 1.0))
        block_tuples = mem * rpp1
        if k is ALL:
            io = P1 + math.ceil(P1 / max(mem, 1.0)) * P2
            cmp = float(n1) * n2
        else:
            inner_frac = min(1.0, (k * n1 / max(block_tuples, 1.0)) / max(n2, 1.0))
            io = min(P1, mem) + P2 * inner_frac
            cmp = min(block_tuples, n1) * n2 * inner_frac
    elif algo is JoinAlgorithm.SORT:
        io = touched * miss1 + touched * ov * miss2
        cmp = touched * (ov + 1.0)
    elif algo in (JoinAlgorithm.TUPLE1, JoinAlgorithm.TUPLE2):
        full_rows = algo is JoinAlgorithm.TUPLE2
        fp = _flat_pages(stats1, full_rows) + _flat_pages(stats2, full_rows)
        io = (P1 + P2) + calib["hash_pass_weight"] * fp
        cmp = calib["flat_cmp_weight"] * (stats1.flat_rows + stats2.flat_rows)
        if algo is JoinAlgorithm.TUPLE1:
            io += P1 + P2  # recovery scans
        else:
            cmp *= calib["wide_row_factor"]
    elif algo is JoinAlgorithm.INDEX:
        rpp1 = max(1.0, n1 / max(P1, 1.0))
        io = touched / rpp1 + touched * ov * miss2
        # each candidate costs more than a merge comparison: the probe's
        # backward sweep revisits entries and materializes the hit list
        cmp = touched * ov * calib["index_cand_weight"] + touched * calib[
            "probe_page_equiv"] / max(calib["cmp_page_equiv"], 1e-9)
    else:  # pragma: no cover
        raise ValueError(f"unknown algorithm {algo}")
    return CostEstimate(algo, io, cmp, calibrated)


def score(est: CostEstimate, calib: Optional[dict] = None) -> float:
    """Total cost: page I/O plus CPU comparisons in page-read equivalents.

    Pure page counts alone would mispredict CPU-bound regimes (wide
    overlap makes the merge-style join comparison-heavy at constant
    I/O), so the selector ranks on this combined figure.
    """
    calib = calib if calib is not None else dict(DEFAULT_CALIBRATION)
    return est.est_page_ios + calib["cmp_page_equiv"] * est.est_comparisons


def choose_algorithm(stats1: RelationStats, stats2: RelationStats,
                     k: Optional[int] = ALL,
                     calib: Optional[dict] = None) -> JoinAlgorithm:
    """Pick the cheapest algorithm; pure in its inputs.

    The index path competes only when an index is available; the plain
    nested loop is never chosen while an alternative exists.  Ties break
    on a fixed preference order.
    """
    calib = calib if calib is not None else dict(DEFAULT_CALIBRATION)
    candidates = [a for a in _TIE_ORDER
                  if a is not JoinAlgorithm.INDEX or stats2.has_index]
    if len(candidates) > 1:
        candidates = [a for a in candidates if a is not JoinAlgorithm.NESTED_LOOP]
    best = None
    best_score = math.inf
    for algo in candidates:  # _TIE_ORDER order makes min() tie-stable
        s = score(estimate(algo, stats1, stats2, k, calib), calib)
        if s < best_score:
            best, best_score = algo, s
    return best


def estimate_all(stats1: RelationStats, stats2: RelationStats,
                 k: Optional[int] = ALL,
                 calib: Optional[dict] = None) -> list[CostEstimate]:
    return [estimate(a, stats1, stats2, k, calib) for a in _TIE_ORDER]
