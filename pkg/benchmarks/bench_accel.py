"""Time the numba and numpy paths of the hot kernels on the same inputs.

    python3 benchmarks/bench_accel.py [--repeat 5] [--sizes 64 256 1024]

Prints one line per (kernel, size) with the best-of-N time for each backend,
the speedup, and the max abs difference between the two results.
"""
import argparse
import time
from fractions import Fraction

import numpy as np

from mlmc import _accel
from mlmc.kernels import gauss_ar1
from mlmc.partition import Partition
from mlmc.ulam import QuadratureSpec, _bin_nodes_1d, discretize_kernel


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_bin_masses(n_bins, repeat, reflect):
    part = Partition(Fraction(2, n_bins), 1)
    k = gauss_ar1(0.5, 0.3, "reflect" if reflect else "renormalize-rows")
    xs, ws, ptr = _bin_nodes_1d(part, QuadratureSpec(points=8))
    fam, p0, p1 = k.code_params
    edges = part.edges()
    call = lambda: _accel.bin_masses_1d(xs, ws, ptr, edges, fam, p0, p1, reflect)
    return call


def bench_dobrushin(n, repeat):
    part = Partition(Fraction(2, n), 1)
    P = discretize_kernel(gauss_ar1(0.5, 0.3), part).dense()
    return lambda: _accel.dobrushin_dense(P)


def run(sizes, repeat):
    cases = []
    for n in sizes:
        cases.append((f"bin_masses renorm n={n}", bench_bin_masses(n, repeat, False)))
        cases.append((f"bin_masses reflect n={n}", bench_bin_masses(n, repeat, True)))
        cases.append((f"dobrushin n={n}", bench_dobrushin(n, repeat)))
    rows = []
    for name, fn in cases:
        times, outs = {}, {}
        for b in ("numba", "numpy"):
            _accel.set_backend(b)
            fn()  # warm-up (and JIT compilation for numba)
            times[b], outs[b] = best_of(fn, repeat)
        a, c = outs["numba"], outs["numpy"]
        if isinstance(a, tuple):
            diff = max(float(np.abs(x - y).max()) for x, y in zip(a, c))
        else:
            diff = abs(a - c)
        rows.append((name, times["numba"], times["numpy"], times["numpy"] / times["numba"], diff))
        print(f"{name:28s} numba {times['numba'] * 1e3:9.3f} ms   numpy {times['numpy'] * 1e3:9.3f} ms"
              f"   speedup {times['numpy'] / times['numba']:6.2f}x   max|diff| {diff:.2e}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    prev = _accel.backend()
    try:
        run(args.sizes, args.repeat)
    finally:
        _accel.set_backend(prev)


if __name__ == "__main__":
    main()
