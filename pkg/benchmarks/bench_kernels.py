"""Time the numba kernels against the numpy/scipy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from pmbm import _kernels
from pmbm.association import dbscan_partitions, murty_kbest


def _time(fn, repeat):
    fn()  # warm-up / compilation
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    cost_small = rng.normal(size=(4, 8))
    cost_big = rng.normal(size=(30, 60))
    Z = rng.uniform(-20, 20, (25, 2))

    cases = {
        "lsap 4x8": lambda: _kernels.solve_lsap(cost_small),
        "lsap 30x60": lambda: _kernels.solve_lsap(cost_big),
        "murty k=20 4x8": lambda: murty_kbest(cost_small, 20),
        "dbscan grid |Z|=25": lambda: dbscan_partitions(Z),
    }
    print(f"{'kernel':22s} {'numba [us]':>12s} {'numpy [us]':>12s} {'speedup':>8s}")
    for name, fn in cases.items():
        res = {}
        for b in ("numba", "numpy"):
            prev = _kernels.set_backend(b)
            res[b] = _time(fn, args.repeat) * 1e6
            _kernels.set_backend(prev)
        print(f"{name:22s} {res['numba']:12.1f} {res['numpy']:12.1f} {res['numpy'] / res['numba']:8.2f}")


if __name__ == "__main__":
    main()
