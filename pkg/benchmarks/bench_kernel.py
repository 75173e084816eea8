"""Time the two-point Taylor coefficient kernel on both backends.

Usage: python3 benchmarks/bench_kernel.py [--counts 40,80,160] [--repeat 3]
"""
from __future__ import annotations

import argparse
import statistics
import time

import mpmath

from mfflow import kernel


def _time(fn, repeat: int) -> float:
    runs = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - start)
    return statistics.median(runs)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--counts", default="40,80,160")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--bits", type=int, default=113, help="precision of the mpmath fallback")
    args = parser.parse_args()
    b1, g40 = mpmath.mpf(1) / 40, mpmath.mpf(1) / 300
    print(f"compiled kernel available: {kernel.compiled_available()}")
    print(f"{'coefficients':>12} {'python_s':>10} {'compiled_s':>10} {'speedup':>8} {'max_rel_diff':>13}")
    for count in (int(c) for c in args.counts.split(",")):
        slow = _time(lambda: kernel.f2_coefficients_python(b1, g40, count, args.bits), args.repeat)
        if not kernel.compiled_available():
            print(f"{count:>12} {slow:>10.4f} {'-':>10} {'-':>8} {'-':>13}")
            continue
        fast = _time(lambda: kernel.f2_coefficients_compiled(b1, g40, count), args.repeat)
        ref = kernel.f2_coefficients_python(b1, g40, count, 256)
        got = kernel.f2_coefficients_compiled(b1, g40, count)
        diff = max(abs(a - b) / abs(a) for a, b in zip(ref, got) if a != 0)
        print(f"{count:>12} {slow:>10.4f} {fast:>10.4f} {slow / fast:>8.1f} {mpmath.nstr(diff, 3):>13}")


if __name__ == "__main__":
    main()
