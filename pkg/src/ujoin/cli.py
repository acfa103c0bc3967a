"""Command-line entry points: gen, join, stats, bench, calibrate."""

from __future__ import annotations

import argparse
import csv
import sys

from . import bench as bench_mod
from .generator import DatasetPair, GenSpec, generate, load_csv
from .joins import JoinAlgorithm, ensure_index, first_k, open_join
from .planner import choose_algorithm, collect_stats, estimate_all, load_calibration, score
from .storage import BufferPool, Relation


def _add_gen(sub):
    p = sub.add_parser("gen", help="generate a synthetic dataset pair")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=int, default=3)
    p.add_argument("--p", type=float, default=100.0)
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--payload-bytes", type=int, default=16)
    p.add_argument("--out", required=True,
                   help="output prefix; writes <out>-L.urel and <out>-R.urel")


def _add_join(sub):
    p = sub.add_parser("join", help="run one join and report its metrics")
    p.add_argument("--algo", required=True,
                   choices=[a.value for a in JoinAlgorithm] + ["auto"])
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--k", type=int, default=None, help="stop after K results")
    p.add_argument("--cold", action="store_true",
                   help="flush the buffer pool and reset counters before the run")
    p.add_argument("--mem-pages", type=int, default=128)
    p.add_argument("--pool-pages", type=int, default=256)
    p.add_argument("--trace", default=None, help="write the emission trace CSV here")
    p.add_argument("--print-pairs", action="store_true")
    p.add_argument("--calibration", default=None)


def _add_stats(sub):
    p = sub.add_parser("stats", help="print uncertainty statistics of a relation")
    p.add_argument("--rel", required=True)
    p.add_argument("--partner", default=None,
                   help="measure range overlap against this relation")


def _add_bench(sub):
    p = sub.add_parser("bench", help="run one experiment family")
    p.add_argument("--family", required=True, choices=bench_mod.FAMILIES)
    p.add_argument("--grid", default="",
                   help="comma-separated grid values for the family's parameter")
    p.add_argument("--algos", default=",".join(a.value for a in JoinAlgorithm))
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--n2", type=int, default=6_000)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warm", action="store_true", help="skip the cold-cache reset")
    p.add_argument("--mem-pages", type=int, default=128)
    p.add_argument("--pool-pages", type=int, default=256)
    p.add_argument("--out", required=True)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--plot-data", action="store_true",
                   help="also emit tidy per-figure series files")


def _add_calibrate(sub):
    p = sub.add_parser("calibrate", help="measure cost-model constants")
    p.add_argument("--out", required=True)
    p.add_argument("--work-dir", default=None)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--mem-pages", type=int, default=128)
    p.add_argument("--pool-pages", type=int, default=256)


def _add_load(sub):
    p = sub.add_parser("load", help="build a heap file from a CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--header", action="store_true")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ujoin")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for add in (_add_gen, _add_join, _add_stats, _add_bench, _add_calibrate, _add_load):
        add(sub)
    args = parser.parse_args(argv)

    if args.cmd == "gen":
        spec = GenSpec(n=args.n, c=args.c, p=args.p, s=args.s, seed=args.seed,
                       payload_bytes=args.payload_bytes)
        pair = generate(spec, f"{args.out}-L.urel", f"{args.out}-R.urel")
        print(f"wrote {pair.left.path} and {pair.right.path} "
              f"({pair.left.tuple_count} tuples, {pair.left.page_count} pages each)")
        return 0

    if args.cmd == "join":
        pool = BufferPool(args.pool_pages)
        left, right = Relation(args.left), Relation(args.right)
        algo_name = args.algo
        if algo_name == "auto":
            calib = load_calibration(args.calibration)
            s1 = collect_stats(left, pool, right)
            s2 = collect_stats(right, pool, left)
            algo = choose_algorithm(s1, s2, args.k, calib)
            print(f"selected algorithm: {algo.value}")
        else:
            algo = JoinAlgorithm(algo_name)
        if algo in (JoinAlgorithm.SORT, JoinAlgorithm.INDEX):
            ensure_index(left, pool)
            ensure_index(right, pool)
        if args.cold:
            pool.reset()
        cursor = open_join(algo, left, right, pool, args.mem_pages)
        if args.k is not None:
            pairs, metrics = first_k(cursor, args.k)
            if args.print_pairs:
                for p in pairs:
                    print(f"{p.xid1}\t{p.xid2}")
        else:
            for p in cursor:
                if args.print_pairs:
                    print(f"{p.xid1}\t{p.xid2}")
            metrics = cursor.metrics()
        print(f"algo={algo.value} elapsed_ms={metrics.elapsed_ms:.1f} "
              f"comparisons={metrics.comparisons} page_reads={metrics.page_reads} "
              f"page_writes={metrics.page_writes} results={metrics.result_count}")
        if args.trace:
            with open(args.trace, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["elapsed_ms", "tuples_emitted"])
                w.writerows((f"{t:.3f}", n) for t, n in metrics.trace)
        return 0

    if args.cmd == "stats":
        pool = BufferPool(256)
        rel = Relation(args.rel)
        partner = Relation(args.partner) if args.partner else None
        st = collect_stats(rel, pool, partner)
        print(f"n={st.n} avg_card={st.avg_card:.3f} max_card={st.max_card} "
              f"pct_uncertain={st.pct_uncertain:.3f} avg_overlap={st.avg_overlap:.3f} "
              f"flat_rows={st.flat_rows:.0f} pages={st.pages}")
        return 0

    if args.cmd == "bench":
        grid = [float(x) if "." in x else int(x)
                for x in args.grid.split(",") if x.strip()]
        spec = bench_mod.ExperimentSpec(
            family=args.family, grid=grid,
            algorithms=[JoinAlgorithm(a) for a in args.algos.split(",") if a],
            repetitions=args.reps, cold_cache=not args.warm, seed=args.seed,
            n=args.n, n2=args.n2, k=args.k,
            mem_pages=args.mem_pages, pool_pages=args.pool_pages)
        try:
            csv_path = bench_mod.run_experiment(spec, args.out, args.data_dir)
        except bench_mod.ResultCountMismatch as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"wrote {csv_path}")
        if args.plot_data:
            for path in bench_mod.emit_plot_data(csv_path, args.out):
                print(f"wrote {path}")
        return 0

    if args.cmd == "calibrate":
        work = args.work_dir or f"{args.out}.work"
        calib = bench_mod.calibrate(args.out, work, n=args.n,
                                    mem_pages=args.mem_pages,
                                    pool_pages=args.pool_pages)
        print(f"wrote {args.out}: " + " ".join(
            f"{k}={v:.4g}" for k, v in calib.items()))
        return 0

    if args.cmd == "load":
        rel = load_csv(args.csv, args.out, has_header=args.header)
        print(f"wrote {rel.path} ({rel.tuple_count} tuples, {rel.page_count} pages)")
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
