"""Benchmark the compiled correlation kernels against the numpy fallback.

Both implementations share one contract and one accumulation order, so
their outputs must agree bitwise; this script first cross-checks that and
then reports median timings and speedups, at the kernel level and through
a full backward solve.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000]
        [--taps 4,6,12] [--repeats 9] [--skip-solve]

The end-to-end comparison swaps the solver's kernel binding in place, so
it works regardless of which backend was selected at import time.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

import rkbsde.solver
from rkbsde.experiments import example2
from rkbsde.kernels import (
    BACKEND,
    _correlate_fallback,
    _correlate_pair_fallback,
)
from rkbsde.solver import SolveConfig, solve
from rkbsde.tableaux import builtin

try:
    from rkbsde._corekernels import correlate as compiled_correlate
    from rkbsde._corekernels import correlate_pair as compiled_correlate_pair
except ImportError:
    compiled_correlate = None
    compiled_correlate_pair = None


def _median_time(fn, repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def _cross_check(sizes: list[int], taps: list[int]) -> None:
    rng = np.random.default_rng(0)
    for n in sizes:
        for k in taps:
            ga = rng.standard_normal(n)
            gb = rng.standard_normal(n)
            kernel = rng.standard_normal(k)
            nout = n - k - 3
            shift = 2
            ref_a = np.empty(nout)
            ref_b = np.empty(nout)
            _correlate_pair_fallback(ga, gb, kernel, shift, ref_a, ref_b)
            got_a = np.empty(nout)
            got_b = np.empty(nout)
            compiled_correlate_pair(ga, gb, kernel, shift, got_a, got_b)
            if not (np.array_equal(ref_a, got_a) and np.array_equal(ref_b, got_b)):
                raise SystemExit(
                    f"backends disagree at size={n}, taps={k}: "
                    f"max diff {np.max(np.abs(ref_a - got_a)):.3e}"
                )
    print("cross-check: compiled and fallback outputs are bit-identical")


def _bench_kernels(sizes: list[int], taps: list[int], repeats: int) -> None:
    rng = np.random.default_rng(1)
    header = f"{'size':>8} {'taps':>5} {'fallback':>12} {'compiled':>12} {'speedup':>8}"
    print()
    print("correlate_pair, median of %d runs" % repeats)
    print(header)
    print("-" * len(header))
    for n in sizes:
        ga = rng.standard_normal(n)
        gb = rng.standard_normal(n)
        for k in taps:
            kernel = rng.standard_normal(k)
            nout = n - k - 3
            outa = np.empty(nout)
            outb = np.empty(nout)

            t_fallback = _median_time(
                lambda: _correlate_pair_fallback(ga, gb, kernel, 2, outa, outb), repeats
            )
            t_compiled = _median_time(
                lambda: compiled_correlate_pair(ga, gb, kernel, 2, outa, outb), repeats
            )
            print(
                f"{n:>8} {k:>5} {t_fallback * 1e6:>10.1f}us {t_compiled * 1e6:>10.1f}us "
                f"{t_fallback / t_compiled:>7.2f}x"
            )


def _bench_solve(repeats: int) -> None:
    problem = example2()
    cfg = SolveConfig(tableau=builtin("rk3"), N=30, domain=(-1.0, 1.0), l=7, M=16, order=3)
    results = {}
    print()
    print("end-to-end backward solve (benchmark problem 2, rk3, N=30)")
    for label, pair_fn in (
        ("fallback", _correlate_pair_fallback),
        ("compiled", compiled_correlate_pair),
    ):
        original = rkbsde.solver.correlate_pair
        rkbsde.solver.correlate_pair = pair_fn
        try:
            solve(problem, cfg)  # warm-up
            results[label] = _median_time(lambda: solve(problem, cfg), repeats)
        finally:
            rkbsde.solver.correlate_pair = original
        print(f"  {label:>8}: {results[label]:.3f}s")
    print(f"  speedup: {results['fallback'] / results['compiled']:.2f}x")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1000,10000,100000", help="comma-separated grid lengths")
    parser.add_argument("--taps", default="4,6,12", help="comma-separated kernel lengths")
    parser.add_argument("--repeats", type=int, default=9, help="timing repetitions (median)")
    parser.add_argument("--skip-solve", action="store_true", help="kernel micro-benchmarks only")
    args = parser.parse_args(argv)

    print(f"active backend at import: {BACKEND}")
    if compiled_correlate is None:
        print("compiled extension unavailable; nothing to compare", file=sys.stderr)
        return 1

    sizes = [int(s) for s in args.sizes.split(",")]
    taps = [int(s) for s in args.taps.split(",")]
    _cross_check(sizes, taps)
    _bench_kernels(sizes, taps, args.repeats)
    if not args.skip_solve:
        _bench_solve(max(3, args.repeats // 3))
    return 0


if __name__ == "__main__":
    sys.exit(main())
