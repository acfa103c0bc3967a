"""Experiment runner: parameter grids, cold-cache protocol, CSV output.

One process runs one join at a time so elapsed times stay clean.
Datasets are generated once per parameter combination and cached on disk
keyed by their generation spec; a manifest makes interrupted grid runs
resumable.  A cold-cache run flushes the buffer pool and zeroes its
counters after any index build, so each row's page counts are exactly
that run's own traffic.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .generator import DatasetPair, GenSpec, generate, generate_lookup, next_coprime
from .joins import JoinAlgorithm, ensure_index, first_k, open_join
from .planner import DEFAULT_CALIBRATION, save_calibration
from .storage import BufferPool, Relation

FAMILIES = ("cardinality", "top_k", "spreading", "tuple_cardinality",
            "percentage", "query_trace")

CSV_COLUMNS = ["family", "algo", "n", "c", "p", "s", "k", "rep",
               "elapsed_ms", "comparisons", "page_reads", "page_writes",
               "result_count"]

#: algorithms cheap enough to run to completion at any grid scale
FULL_RUN_SAFE = {JoinAlgorithm.SORT, JoinAlgorithm.TUPLE1, JoinAlgorithm.TUPLE2}


class ResultCountMismatch(RuntimeError):
    pass


@dataclass
class ExperimentSpec:
    family: str
    grid: list = field(default_factory=list)
    algorithms: list = field(default_factory=lambda: list(JoinAlgorithm))
    repetitions: int = 1
    cold_cache: bool = True
    seed: int = 0
    n: int = 100_000          # base cardinality for non-cardinality families
    c: int = 3
    p: float = 100.0
    s: int = 1
    k: int = 100              # top-k fetch size
    n2: int = 6_000           # right-side cardinality for query_trace
    max_card: int = 10        # left-side set size cap for query_trace
    mem_pages: int = 128
    pool_pages: int = 256
    payload_bytes: int = 16

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        self.algorithms = [JoinAlgorithm(a) for a in self.algorithms]


@dataclass
class _GridPoint:
    n: int
    c: int
    p: float
    s: int
    k: Optional[int]  # None = full run


def _grid_points(spec: ExperimentSpec) -> Iterator[_GridPoint]:
    if spec.family == "cardinality":
        for n in spec.grid:
            yield _GridPoint(int(n), spec.c, spec.p, spec.s, None)
    elif spec.family == "top_k":
        for n in (spec.grid or [spec.n]):
            yield _GridPoint(int(n), spec.c, spec.p, spec.s, spec.k)
            yield _GridPoint(int(n), spec.c, spec.p, spec.s, None)
    elif spec.family == "spreading":
        for s in spec.grid:
            yield _GridPoint(spec.n, spec.c, spec.p, next_coprime(int(s), spec.c), None)
    elif spec.family == "tuple_cardinality":
        for c in spec.grid:
            yield _GridPoint(spec.n, int(c), spec.p, next_coprime(spec.s, int(c)), None)
    elif spec.family == "percentage":
        for p in spec.grid:
            yield _GridPoint(spec.n, spec.c, float(p), spec.s, None)
    else:  # query_trace: a single reference-shaped dataset
        yield _GridPoint(spec.n, spec.max_card, spec.p, spec.s, None)


class DatasetCache:
    """On-disk dataset pool keyed by generation parameters."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self._open: dict[str, DatasetPair] = {}

    def synthetic(self, gspec: GenSpec) -> DatasetPair:
        key = gspec.cache_key()
        if key in self._open:
            return self._open[key]
        left = os.path.join(self.directory, f"{key}-L.urel")
        right = os.path.join(self.directory, f"{key}-R.urel")
        if os.path.exists(left) and os.path.exists(right):
            pair = DatasetPair(Relation(left), Relation(right), gspec, gspec.n)
        else:
            pair = generate(gspec, left, right)
        self._open[key] = pair
        return pair

    def lookup_shaped(self, n_left: int, n_right: int, max_card: int,
                      seed: int, payload_bytes: int) -> DatasetPair:
        key = f"lookup-n{n_left}-m{n_right}-c{max_card}-seed{seed}-pl{payload_bytes}"
        if key in self._open:
            return self._open[key]
        left = os.path.join(self.directory, f"{key}-L.urel")
        right = os.path.join(self.directory, f"{key}-R.urel")
        pair = generate_lookup(n_left, n_right, max_card, left, right,
                               seed=seed, payload_bytes=payload_bytes)
        self._open[key] = pair
        return pair


def run_single(algo: JoinAlgorithm, pair: DatasetPair, pool: BufferPool,
               mem_pages: int = 128, k: Optional[int] = None,
               cold_cache: bool = True, directory: Optional[str] = None):
    """Execute one join run and return its metrics.

    Index/sorted access paths are built (or reused) before the cold-cache
    reset so their build traffic never leaks into the run's counters.
    """
    if algo in (JoinAlgorithm.SORT, JoinAlgorithm.INDEX):
        ensure_index(pair.left, pool)
        ensure_index(pair.right, pool)
    if cold_cache:
        pool.reset()
    cursor = open_join(algo, pair.left, pair.right, pool, mem_pages, directory)
    if k is not None:
        _, metrics = first_k(cursor, k)
        return metrics
    for _ in cursor:
        pass
    return cursor.metrics()


def run_experiment(spec: ExperimentSpec, out_dir: str,
                   data_dir: Optional[str] = None) -> str:
    """Run a whole family grid, appending one CSV row per run.

    Returns the CSV path.  Raises ResultCountMismatch if any full run
    disagrees with the dataset's intended result cardinality.
    """
    os.makedirs(out_dir, exist_ok=True)
    cache = DatasetCache(data_dir or os.path.join(out_dir, "datasets"))
    csv_path = os.path.join(out_dir, f"{spec.family}.csv")
    manifest_path = os.path.join(out_dir, f"{spec.family}.manifest.json")
    done: set[str] = set()
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            done = set(json.load(fh).get("done", []))

    new_file = not os.path.exists(csv_path)
    with open(csv_path, "a", newline="", encoding="utf-8") as out:
        writer = csv.writer(out)
        if new_file:
            writer.writerow(CSV_COLUMNS)
        pool = BufferPool(spec.pool_pages)
        for point in _grid_points(spec):
            pair = _dataset_for(spec, point, cache)
            for algo in spec.algorithms:
                if (spec.family == "top_k" and point.k is None
                        and algo not in FULL_RUN_SAFE):
                    continue
                for rep in range(spec.repetitions):
                    key = _run_key(spec, point, algo, rep)
                    if key in done:
                        continue
                    metrics = run_single(algo, pair, pool, spec.mem_pages,
                                         point.k, spec.cold_cache)
                    if point.k is None and metrics.result_count != pair.intended_result:
                        raise ResultCountMismatch(
                            f"{algo.value} at {key}: result {metrics.result_count}"
                            f" != intended {pair.intended_result}")
                    writer.writerow([
                        spec.family, algo.value, point.n, point.c, point.p,
                        point.s, point.k if point.k is not None else -1, rep,
                        f"{metrics.elapsed_ms:.3f}", metrics.comparisons,
                        metrics.page_reads, metrics.page_writes,
                        metrics.result_count,
                    ])
                    out.flush()
                    if spec.family == "query_trace":
                        _write_trace(out_dir, algo, metrics.trace)
                    done.add(key)
                    with open(manifest_path, "w", encoding="utf-8") as fh:
                        json.dump({"done": sorted(done)}, fh)
    return csv_path


def _dataset_for(spec: ExperimentSpec, point: _GridPoint,
                 cache: DatasetCache) -> DatasetPair:
    if spec.family == "query_trace":
        return cache.lookup_shaped(spec.n, spec.n2, spec.max_card,
                                   spec.seed, spec.payload_bytes)
    gspec = GenSpec(n=point.n, c=point.c, p=point.p, s=point.s,
                    seed=spec.seed, payload_bytes=spec.payload_bytes)
    return cache.synthetic(gspec)


def _run_key(spec: ExperimentSpec, point: _GridPoint, algo: JoinAlgorithm,
             rep: int) -> str:
    k = point.k if point.k is not None else -1
    return f"{spec.family}/{algo.value}/n{point.n}/c{point.c}/p{point.p:g}/s{point.s}/k{k}/r{rep}"


def _write_trace(out_dir: str, algo: JoinAlgorithm, trace: list) -> None:
    path = os.path.join(out_dir, f"trace_{algo.value}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["elapsed_ms", "tuples_emitted"])
        for t, n in trace:
            w.writerow([f"{t:.3f}", n])


# ---------------------------------------------------------------------------
# plot-data reshaping
# ---------------------------------------------------------------------------

_X_VAR = {"cardinality": "n", "top_k": "n", "spreading": "s",
          "tuple_cardinality": "c", "percentage": "p"}


class PlotDataError(ValueError):
    pass


def emit_plot_data(csv_path: str, out_dir: str) -> list[str]:
    """Reshape a results CSV into tidy per-figure series files."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader, start=2):
            if row.get("family") is None or row.get("algo") is None:
                raise PlotDataError(f"row {i}: missing family/algo column")
            try:
                rows.append({
                    "family": row["family"], "algo": row["algo"],
                    "n": int(row["n"]), "c": int(row["c"]),
                    "p": float(row["p"]), "s": int(row["s"]),
                    "k": int(row["k"]),
                    "elapsed_ms": float(row["elapsed_ms"]),
                    "page_reads": int(row["page_reads"]),
                })
            except (KeyError, ValueError) as exc:
                raise PlotDataError(f"row {i}: {exc}") from None

    written = []
    for family in sorted({r["family"] for r in rows}):
        fam_rows = [r for r in rows if r["family"] == family]
        x = _X_VAR.get(family)
        if x is None:
            continue
        for metric, tag in (("elapsed_ms", "time"), ("page_reads", "io")):
            suffix = "topk" if family == "top_k" else x
            path = os.path.join(out_dir, f"{tag}_vs_{suffix}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow([x, "k", "algo", metric])
                for r in sorted(fam_rows, key=lambda r: (r[x], r["k"], r["algo"])):
                    w.writerow([r[x], r["k"], r["algo"], r[metric]])
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def calibrate(out_path: str, work_dir: str, n: int = 5000,
              mem_pages: int = 128, pool_pages: int = 256) -> dict:
    """Measure machine constants on a small grid and write the config."""
    from .storage import Cursor

    os.makedirs(work_dir, exist_ok=True)
    cache = DatasetCache(work_dir)
    pool = BufferPool(pool_pages)
    pair = cache.synthetic(GenSpec(n=n, c=3, p=100.0, s=1, seed=7))

    # sequential page cost
    pool.reset()
    t0 = time.perf_counter()
    for _ in Cursor(pair.left, pool):
        pass
    page_cost = (time.perf_counter() - t0) / max(1, pool.page_reads)

    # comparison cost from a nested-loop run on a slice of the data
    small = cache.synthetic(GenSpec(n=min(n, 1500), c=3, p=100.0, s=1, seed=7))
    m = run_single(JoinAlgorithm.NESTED_LOOP, small, pool, mem_pages)
    cmp_cost = (m.elapsed_ms / 1000.0) / max(1, m.comparisons)

    # hash pass weight from measured tuple-join traffic per flat page,
    # flat-row weight from the same run's elapsed time per flat row
    m1 = run_single(JoinAlgorithm.TUPLE1, pair, pool, mem_pages)
    flat_rows = 2 * pair.left.tuple_count * 3
    flat_pages = flat_rows * 9 / pair.left.page_size
    base_io = 2 * (pair.left.page_count + pair.right.page_count)
    hash_w = max(1.0, ((m1.page_reads + m1.page_writes) - base_io) / max(flat_pages, 1.0))
    flat_w = max(0.5, (m1.elapsed_ms / 1000.0) / max(flat_rows, 1) / max(cmp_cost, 1e-9))

    calib = dict(DEFAULT_CALIBRATION)
    calib.update({
        "cmp_page_equiv": max(1e-4, cmp_cost / max(page_cost, 1e-9)),
        "probe_page_equiv": max(4e-4, 0.25 * cmp_cost / max(page_cost, 1e-9)),
        "hash_pass_weight": hash_w,
        "flat_cmp_weight": flat_w,
        "mem_pages": float(mem_pages),
        "pool_pages": float(pool_pages),
        "calibrated": 1.0,
    })
    save_calibration(calib, out_path)
    return calib
