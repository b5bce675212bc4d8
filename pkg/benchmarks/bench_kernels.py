"""Benchmark the compiled splat kernel against the numpy fallback.

Both implementations must produce bit-identical buffers; this script checks
that on every size it times. Run from the repo root:

    python3 benchmarks/bench_kernels.py --points 200000 --sizes 128,512,1024
"""

import argparse
import sys
import time

import numpy as np

from partlift._kernels import _numpy_impl

try:
    from partlift._kernels import _splat
except ImportError:
    _splat = None


def make_inputs(rng, n_points, size):
    px = rng.integers(0, size, n_points, dtype=np.int64)
    py = rng.integers(0, size, n_points, dtype=np.int64)
    depth = rng.uniform(1.0, 10.0, n_points)
    index = np.arange(n_points, dtype=np.int32)
    return px, py, depth, index


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=100000)
    parser.add_argument("--sizes", default="128,512,1024",
                        help="comma-separated square image sizes")
    parser.add_argument("--radius", type=int, default=2)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _splat is None:
        print("compiled kernel not built; only timing the numpy fallback")

    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{args.points} points, radius {args.radius}, "
          f"best of {args.repeats}")
    header = f"{'size':>6}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))

    for size in sizes:
        inputs = make_inputs(rng, args.points, size)
        call = (*inputs, size, size, args.radius)
        t_np, (zbuf_np, win_np) = best_of(
            _numpy_impl.splat_zbuffer, call, args.repeats)
        if _splat is None:
            print(f"{size:>6}  {t_np * 1e3:>8.1f}ms  {'-':>10}  {'-':>8}")
            continue
        t_c, (zbuf_c, win_c) = best_of(
            _splat.splat_zbuffer, call, args.repeats)
        if not (np.array_equal(zbuf_np, zbuf_c)
                and np.array_equal(win_np, win_c)):
            print(f"size {size}: kernel outputs differ", file=sys.stderr)
            return 1
        print(f"{size:>6}  {t_np * 1e3:>8.1f}ms  {t_c * 1e3:>8.1f}ms  "
              f"{t_np / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
