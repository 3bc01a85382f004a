"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 100 500 1000] [--repeats 3]

Both paths return identical tours; the script checks that before timing.
"""
import argparse
import time

import numpy as np

from tspmdf import _kernels
from tspmdf.tsplib import generate_uniform


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 500, 1000])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    # compile outside the timed region
    warm = generate_uniform(10, 0).nodes
    _kernels.insertion(warm, True, use_numba=True)
    _kernels.two_opt(warm, np.arange(10), 5, use_numba=True)

    print(f"{'kernel':<22}{'n':>6}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for n in args.sizes:
        xy = generate_uniform(n, 1).nodes
        for name, farthest in (("farthest insertion", True), ("nearest insertion", False)):
            a = _kernels.insertion(xy, farthest, use_numba=True)
            b = _kernels.insertion(xy, farthest, use_numba=False)
            assert np.array_equal(a, b), "paths disagree"
            fast = best_of(lambda: _kernels.insertion(xy, farthest, use_numba=True), args.repeats)
            slow = best_of(lambda: _kernels.insertion(xy, farthest, use_numba=False), args.repeats)
            print(f"{name:<22}{n:>6}{fast:>12.4f}{slow:>12.4f}{slow / fast:>10.1f}")
        start = _kernels.insertion(xy, True)
        passes = 20
        assert np.array_equal(_kernels.two_opt(xy, start, passes, use_numba=True)[0],
                              _kernels.two_opt(xy, start, passes, use_numba=False)[0]), "paths disagree"
        fast = best_of(lambda: _kernels.two_opt(xy, start, passes, use_numba=True), args.repeats)
        slow = best_of(lambda: _kernels.two_opt(xy, start, passes, use_numba=False), args.repeats)
        print(f"{'2-opt, 20 passes':<22}{n:>6}{fast:>12.4f}{slow:>12.4f}{slow / fast:>10.1f}")


if __name__ == "__main__":
    main()
