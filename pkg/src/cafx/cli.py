"""Command line entry point: ``cafx bench <workload> [options]``."""
from __future__ import annotations

import argparse
import sys
import time

from .bench import harness, kernels, workloads
from .scheduler import default_max_msgs, default_workers


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cafx", description="actor runtime benchmarks")
    sub = p.add_subparsers(dest="command", required=True)
    bench = sub.add_parser("bench", help="run a benchmark")
    bench.add_argument("--workers", type=int, default=None,
                       help="scheduler worker threads (default: CAFX_WORKERS or CPU count)")
    bench.add_argument("--max-msgs", type=int, default=None,
                       help="messages per resume before yielding (default: unlimited)")
    bench.add_argument("--runs", type=int, default=10, help="repetitions (default 10)")
    bench.add_argument("--csv", metavar="PATH", default=None, help="append results to PATH")
    wl = bench.add_subparsers(dest="workload", required=True)

    c = wl.add_parser("creation", help="binary tree of actors summing to 2**K")
    c.add_argument("--exp", type=int, default=20, metavar="K")

    m = wl.add_parser("mailbox", help="many senders, one receiver")
    m.add_argument("--senders", type=int, default=100)
    m.add_argument("--msgs", type=int, default=1_000_000)

    x = wl.add_parser("mixed", help="token rings plus prime factorization")
    x.add_argument("--rings", type=int, default=100)
    x.add_argument("--ring-size", type=int, default=100)
    x.add_argument("--token", type=int, default=1000)
    x.add_argument("--reps", type=int, default=4)
    x.add_argument("--target", type=int, default=workloads.DEFAULT_FACTOR_TARGET)
    x.add_argument("--decrement", choices=("round", "hop"), default="round")

    b = wl.add_parser("mandelbrot", help="one actor per image row")
    b.add_argument("--size", type=int, default=16000)
    b.add_argument("--iter", type=int, default=500)

    k = wl.add_parser("kernels", help="numba kernels against their numpy fallbacks")
    k.add_argument("--size", type=int, default=512)
    k.add_argument("--iter", type=int, default=200)
    k.add_argument("--target", type=int, default=workloads.DEFAULT_FACTOR_TARGET)
    return p


def _workload(args):
    w, mm = args.workers, args.max_msgs
    if args.workload == "creation":
        return {"k": args.exp}, lambda: workloads.run_creation(args.exp, w, mm)
    if args.workload == "mailbox":
        return ({"senders": args.senders, "msgs": args.msgs},
                lambda: workloads.run_mailbox(args.senders, args.msgs, w, mm))
    if args.workload == "mixed":
        params = {"rings": args.rings, "ring_size": args.ring_size, "token": args.token,
                  "reps": args.reps, "target": args.target, "decrement": args.decrement}
        return params, lambda: workloads.run_mixed(
            args.rings, args.ring_size, args.token, args.reps, args.target, args.decrement,
            w, mm)[0]
    return ({"size": args.size, "iter": args.iter},
            lambda: workloads.run_mandelbrot(args.size, args.iter, workers=w, max_msgs=mm))


def _kernels(args) -> list[harness.BenchReport]:
    if not kernels.USE_NUMBA:
        print("numba disabled (CAFX_PURE_NUMPY set or numba missing); timing numpy only")
    n, it = args.size, args.iter
    pairs = [
        ("mandelbrot_rows", {"size": n, "iter": it},
         lambda row: lambda: kernels.counts_checksum([row(y, n, it) for y in range(n)]),
         "mandelbrot_row"),
        ("factorize", {"target": args.target},
         lambda fn: lambda: _prod(fn(args.target)), "factorize"),
    ]
    reports = []
    for name, params, make, attr in pairs:
        for impl in ("numba", "numpy") if kernels.USE_NUMBA else ("numpy",):
            fn = getattr(kernels, f"{attr}_{impl}")
            make(fn)()  # warm-up: JIT compilation is not part of the measurement
            rs = harness.repeat(f"kernel_{name}_{impl}", make(fn), params, 1, args.runs)
            print(harness.summarize(rs))
            reports.extend(rs)
    return reports


def _prod(xs) -> int:
    out = 1
    for x in xs:
        out *= x
    return out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.runs < 1:
        print("--runs must be at least 1", file=sys.stderr)
        return 2
    if args.workload == "kernels":
        reports = _kernels(args)
    else:
        args.workers = args.workers or default_workers()
        args.max_msgs = args.max_msgs or default_max_msgs()
        params, fn = _workload(args)
        t0 = time.perf_counter()
        reports = harness.repeat(args.workload, fn, params, args.workers, args.runs)
        print(harness.summarize(reports))
        print(f"total {time.perf_counter() - t0:.1f} s, backend {kernels.backend()}")
    if args.csv:
        harness.write_csv(args.csv, reports)
    return 0


if __name__ == "__main__":
    sys.exit(main())
